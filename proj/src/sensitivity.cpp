#include "iterrain/sensitivity.hpp"

#include <sstream>

#include "iterrain/metrics.hpp"
#include "iterrain/quantize.hpp"

namespace iterrain {

namespace {

void quantize_layer(DenseLayer& l, int bits) {
  l.weight = fake_quantize(l.weight, bits, Granularity::per_channel);
  l.bias = fake_quantize(l.bias, kSweepBiasBits, Granularity::per_tensor).col(0);
}

void quantize_stack_layer(LayerStack& stack, const std::string& layer, int bits) {
  if (layer == "output") {
    quantize_layer(stack.output, bits);
    return;
  }
  for (std::size_t i = 0; i < stack.hidden.size(); ++i) {
    if (layer == "hidden" + std::to_string(i)) {
      quantize_layer(stack.hidden[i], bits);
      return;
    }
  }
  throw ArgumentError("unknown layer " + layer);
}

void append_stack(std::vector<LayerGroup>& out, const std::string& stage, const LayerStack& s) {
  for (std::size_t i = 0; i < s.hidden.size(); ++i) out.push_back({stage, "hidden" + std::to_string(i)});
  out.push_back({stage, "output"});
}

}  // namespace

std::vector<LayerGroup> layer_groups(const TerrainModel& model) {
  std::vector<LayerGroup> g;
  append_stack(g, "shape", model.shape.layers);
  if (model.geometry) {
    append_stack(g, "geometry", model.geometry->stage.layers);
    if (model.geometry->masked) g.push_back({"wcf", "decoder"});
  }
  return g;
}

TerrainModel quantize_group(const TerrainModel& model, const LayerGroup& group, int bits) {
  if (bits < kMinBits || bits > kMaxBits) throw ArgumentError("sweep bit width must lie in [2, 16]");
  TerrainModel q = model;
  if (group.stage == "shape") {
    quantize_stack_layer(q.shape.layers, group.layer, bits);
  } else if (group.stage == "geometry" && q.geometry) {
    quantize_stack_layer(q.geometry->stage.layers, group.layer, bits);
  } else if (group.stage == "wcf" && q.geometry) {
    for (auto& l : q.geometry->decoder.layers) {
      l.weight = fake_quantize(l.weight, bits, Granularity::per_channel);
      l.bias = fake_quantize(l.bias, kSweepBiasBits, Granularity::per_tensor).col(0);
    }
  } else {
    throw ArgumentError("unknown layer group " + group.stage + "/" + group.layer);
  }
  return q;
}

SweepTable sensitivity_sweep(const TerrainModel& model, const DemTile& truth, const std::vector<int>& bits) {
  const NormalizedTile norm = normalize(truth);
  const int w = truth.width();
  const int h = truth.height();
  SweepTable t;
  t.bits = bits;
  t.baseline_db = psnr(reconstruct(model, w, h), norm.grid);
  for (const auto& g : layer_groups(model)) {
    SweepRow row{g, {}};
    for (int b : bits) row.delta_db.push_back(psnr(reconstruct(quantize_group(model, g, b), w, h), norm.grid) - t.baseline_db);
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string SweepTable::to_text() const {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << "# baseline_psnr_db=" << baseline_db << "\nstage\tlayer";
  for (int b : bits) os << '\t' << b << 'b';
  os << '\n';
  for (const auto& r : rows) {
    os << r.group.stage << '\t' << r.group.layer;
    for (double d : r.delta_db) os << '\t' << d;
    os << '\n';
  }
  return os.str();
}

const SweepRow* SweepTable::find(const std::string& stage, const std::string& layer) const {
  for (const auto& r : rows)
    if (r.group.stage == stage && r.group.layer == layer) return &r;
  return nullptr;
}

}  // namespace iterrain
