#include "iterrain/container.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include <zlib.h>

#include "iterrain/entropy.hpp"

namespace iterrain {

namespace {

enum : std::uint8_t { kFlagGeometry = 1, kFlagMasked = 2 };
enum : std::uint8_t { kTableSeeded = 0, kTableExplicit = 1 };

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void count(std::size_t n) {
    if (n > 0xFFFFFFFFu) throw ArgumentError("container field too large");
    u32(static_cast<std::uint32_t>(n));
  }
  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  // Element count bounded by what could still fit in the remaining bytes.
  std::size_t count(std::size_t min_bytes_each) {
    const std::size_t n = u32();
    if (min_bytes_each > 0 && n > remaining() / min_bytes_each) throw FormatError("container count out of range");
    return n;
  }
  std::size_t remaining() const { return b_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) throw FormatError("container truncated");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

bool valid_bits(int b) { return (b >= kMinBits && b <= kMaxBits) || b == 32 || b == 64; }

void check_config(const PackConfig& cfg) {
  for (int b : {cfg.b_shape, cfg.b_geom, cfg.b_wcf, cfg.b_field})
    if (!valid_bits(b)) throw ArgumentError("unsupported bit width " + std::to_string(b));
}

// ---------------------------------------------------------------------------
// Tensor groups

struct TensorSlot {
  Eigen::MatrixXd value;
  Granularity granularity;
};

std::vector<TensorSlot> stage_tensors(const LayerStack& layers) {
  std::vector<TensorSlot> t;
  for (const auto& l : layers.hidden) {
    t.push_back({l.weight, Granularity::per_channel});
    t.push_back({l.bias, Granularity::per_tensor});
  }
  t.push_back({layers.output.weight, Granularity::per_channel});
  t.push_back({layers.output.bias, Granularity::per_tensor});
  return t;
}

void set_stage_tensors(LayerStack& layers, const std::vector<Eigen::MatrixXd>& t) {
  std::size_t k = 0;
  auto assign = [&](Eigen::MatrixXd& dst) {
    if (k >= t.size() || t[k].rows() != dst.rows() || t[k].cols() != dst.cols())
      throw FormatError("tensor shape mismatch in container");
    dst = t[k++];
  };
  auto assign_vec = [&](Eigen::VectorXd& dst) {
    if (k >= t.size() || t[k].rows() != dst.rows() || t[k].cols() != 1)
      throw FormatError("tensor shape mismatch in container");
    dst = t[k++].col(0);
  };
  for (auto& l : layers.hidden) {
    assign(l.weight);
    assign_vec(l.bias);
  }
  assign(layers.output.weight);
  assign_vec(layers.output.bias);
  if (k != t.size()) throw FormatError("unexpected tensor count in container");
}

std::vector<TensorSlot> decoder_tensors(const WcfDecoder& d) {
  std::vector<TensorSlot> t;
  for (const auto& l : d.layers) {
    t.push_back({l.weight, Granularity::per_channel});
    t.push_back({l.bias, Granularity::per_tensor});
  }
  return t;
}

void set_decoder_tensors(WcfDecoder& d, const std::vector<Eigen::MatrixXd>& t) {
  if (t.size() != 6) throw FormatError("unexpected decoder tensor count");
  for (std::size_t i = 0; i < 3; ++i) {
    auto& l = d.layers[i];
    if (t[2 * i].rows() != l.weight.rows() || t[2 * i].cols() != l.weight.cols() ||
        t[2 * i + 1].rows() != l.bias.rows() || t[2 * i + 1].cols() != 1)
      throw FormatError("decoder tensor shape mismatch");
    l.weight = t[2 * i];
    l.bias = t[2 * i + 1].col(0);
  }
}

std::vector<std::uint8_t> encode_group(const std::vector<TensorSlot>& tensors, int bits) {
  Writer w;
  w.u8(static_cast<std::uint8_t>(bits));
  w.count(tensors.size());
  std::vector<std::int32_t> symbols;
  std::vector<QuantizedTensor> qs;
  for (const auto& t : tensors) {
    QuantizedTensor q = quantize(t.value, bits, t.granularity);
    w.count(static_cast<std::size_t>(q.rows));
    w.count(static_cast<std::size_t>(q.cols));
    w.u8(static_cast<std::uint8_t>(q.granularity));
    for (float s : q.scales) w.f32(s);
    symbols.insert(symbols.end(), q.ints.begin(), q.ints.end());
    qs.push_back(std::move(q));
  }
  if (bits == 32) {
    for (const auto& q : qs)
      for (double v : q.raw) w.f32(static_cast<float>(v));
  } else if (bits == 64) {
    for (const auto& q : qs)
      for (double v : q.raw) w.f64(v);
  } else {
    const std::int32_t lim = signed_limit(bits);
    w.bytes(entropy_encode(symbols, -lim, lim));
  }
  return std::move(w.buffer());
}

std::vector<Eigen::MatrixXd> decode_group(std::span<const std::uint8_t> payload, int expected_bits) {
  Reader r(payload);
  const int bits = r.u8();
  if (bits != expected_bits) throw FormatError("stream bit width disagrees with header");
  const std::size_t n = r.count(9);
  std::vector<QuantizedTensor> qs(n);
  std::size_t total = 0;
  for (auto& q : qs) {
    q.bits = bits;
    q.rows = static_cast<int>(r.u32());
    q.cols = static_cast<int>(r.u32());
    if (q.rows < 0 || q.cols < 0 || static_cast<std::size_t>(q.rows) * static_cast<std::size_t>(q.cols) > (1u << 26))
      throw FormatError("tensor dimensions out of range");
    const std::uint8_t g = r.u8();
    if (g > 1) throw FormatError("unknown quantization granularity");
    q.granularity = static_cast<Granularity>(g);
    if (!q.passthrough()) {
      const std::size_t groups = q.granularity == Granularity::per_channel ? static_cast<std::size_t>(q.rows) : 1;
      if (groups > r.remaining() / 4) throw FormatError("container truncated");
      q.scales.resize(groups);
      for (auto& s : q.scales) s = r.f32();
    }
    total += static_cast<std::size_t>(q.rows) * static_cast<std::size_t>(q.cols);
  }
  if (bits == 32 || bits == 64) {
    const std::size_t each = bits == 32 ? 4 : 8;
    if (total > r.remaining() / each) throw FormatError("container truncated");
    for (auto& q : qs) {
      q.raw.resize(static_cast<std::size_t>(q.rows) * static_cast<std::size_t>(q.cols));
      for (auto& v : q.raw) v = bits == 32 ? static_cast<double>(r.f32()) : r.f64();
    }
  } else {
    const std::int32_t lim = signed_limit(bits);
    std::size_t used = 0;
    const auto symbols = entropy_decode(payload.subspan(r.position()), -lim, lim, &used);
    if (symbols.size() != total) throw FormatError("symbol count disagrees with tensor shapes");
    r.bytes(used);
    std::size_t k = 0;
    for (auto& q : qs) {
      q.ints.assign(symbols.begin() + static_cast<std::ptrdiff_t>(k),
                    symbols.begin() + static_cast<std::ptrdiff_t>(k + static_cast<std::size_t>(q.rows * q.cols)));
      k += static_cast<std::size_t>(q.rows * q.cols);
    }
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes in tensor stream");
  std::vector<Eigen::MatrixXd> out;
  for (const auto& q : qs) out.push_back(dequantize(q));
  return out;
}

// ---------------------------------------------------------------------------
// Field

std::vector<std::uint8_t> encode_field(const Grid& field, int bits) {
  Writer w;
  w.u8(static_cast<std::uint8_t>(bits));
  if (bits == 32) {
    for (double v : field.values) w.f32(static_cast<float>(v));
  } else if (bits == 64) {
    for (double v : field.values) w.f64(v);
  } else {
    const QuantizedField q = quantize_field(field, bits);
    w.f64(q.lo);
    w.f64(q.hi);
    w.bytes(entropy_encode(q.levels, 0, (1 << bits) - 1));
  }
  return std::move(w.buffer());
}

Grid decode_field(std::span<const std::uint8_t> payload, int expected_bits, int width, int height) {
  Reader r(payload);
  const int bits = r.u8();
  if (bits != expected_bits) throw FormatError("field bit width disagrees with header");
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  Grid g(width, height);
  if (bits == 32 || bits == 64) {
    if (n > r.remaining() / (bits / 8)) throw FormatError("container truncated");
    for (auto& v : g.values) v = bits == 32 ? static_cast<double>(r.f32()) : r.f64();
  } else {
    QuantizedField q;
    q.bits = bits;
    q.lo = r.f64();
    q.hi = r.f64();
    std::size_t used = 0;
    q.levels = entropy_decode(payload.subspan(r.position()), 0, (1 << bits) - 1, &used);
    r.bytes(used);
    if (q.levels.size() != n) throw FormatError("field size disagrees with header");
    g = dequantize_field(q, width, height);
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes in field stream");
  return g;
}

// ---------------------------------------------------------------------------
// Stage descriptors

void write_stage(Writer& w, const SirenStage& s) {
  w.count(static_cast<std::size_t>(s.hidden_count()));
  w.count(static_cast<std::size_t>(s.hidden_count() > 0 ? s.width() : 0));
  w.f64(s.omega0);
  const auto& f = s.freq;
  if (f.source) {
    const FrequencyConfig& c = *f.source;
    w.u8(kTableSeeded);
    w.u64(c.seed);
    w.i32(c.low_limit);
    w.count(c.band_edges.size());
    for (int e : c.band_edges) w.i32(e);
    for (int b : c.band_sizes) w.count(static_cast<std::size_t>(b));
  } else {
    w.u8(kTableExplicit);
    w.count(f.rows.size());
    w.count(static_cast<std::size_t>(f.band_count));
    for (std::size_t i = 0; i < f.rows.size(); ++i) {
      w.i32(f.rows[i][0]);
      w.i32(f.rows[i][1]);
      w.f64(f.phases[i]);
      w.count(static_cast<std::size_t>(f.band_of[i]));
    }
  }
}

SirenStage read_stage(Reader& r) {
  const std::size_t hidden = r.u32();
  const std::size_t width = r.u32();
  if (hidden > 64 || width > 4096) throw FormatError("stage shape out of range");
  const double omega0 = r.f64();
  const std::uint8_t kind = r.u8();
  FrequencyTable table;
  if (kind == kTableSeeded) {
    FrequencyConfig c;
    c.seed = r.u64();
    c.low_limit = r.i32();
    const std::size_t k = r.count(8);
    for (std::size_t i = 0; i < k; ++i) c.band_edges.push_back(r.i32());
    for (std::size_t i = 0; i <= k; ++i) {
      const std::uint32_t b = r.u32();
      if (b > 65536) throw FormatError("band size out of range");
      c.band_sizes.push_back(static_cast<int>(b));
    }
    try {
      table = build_frequency_table(c);
    } catch (const ArgumentError& e) {
      throw FormatError(std::string("bad frequency configuration: ") + e.what());
    }
  } else if (kind == kTableExplicit) {
    const std::size_t n = r.count(20);
    const std::size_t bands = r.u32();
    std::vector<std::array<int, 2>> rows(n);
    std::vector<double> phases(n);
    std::vector<int> band_of(n);
    for (std::size_t i = 0; i < n; ++i) {
      rows[i] = {r.i32(), r.i32()};
      phases[i] = r.f64();
      const std::uint32_t b = r.u32();
      if (b >= bands) throw FormatError("band index out of range");
      band_of[i] = static_cast<int>(b);
    }
    try {
      table = explicit_frequency_table(std::move(rows), std::move(phases), std::move(band_of));
    } catch (const ArgumentError& e) {
      throw FormatError(std::string("bad frequency table: ") + e.what());
    }
    table.band_count = static_cast<int>(bands);
  } else {
    throw FormatError("unknown frequency table kind");
  }
  return make_stage(std::move(table), static_cast<int>(width), static_cast<int>(hidden), omega0);
}

void check_trained(const TerrainModel& m) {
  const auto finite = [](const LayerStack& l) {
    std::vector<double> v(l.parameter_count());
    l.gather(v);
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  };
  if (m.shape.layers.output.weight.size() == 0 || m.shape.layers.output.weight.isZero(0.0))
    throw DataError("model is untrained (zero output layer)");
  if (!finite(m.shape.layers) || (m.geometry && !finite(m.geometry->stage.layers)))
    throw NumericError("model has non-finite parameters");
  if (m.meta.width < 1 || m.meta.height < 1) throw DataError("model has no tile metadata");
}

std::uint32_t crc_of(std::span<const std::uint8_t> b) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t pos = 0;
  while (pos < b.size()) {
    const std::size_t len = std::min<std::size_t>(b.size() - pos, 1u << 30);
    crc = crc32(crc, b.data() + pos, static_cast<uInt>(len));
    pos += len;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

QuantizedField quantize_field(const Grid& field, int bits) {
  if (bits < 1 || bits > kMaxBits) throw ArgumentError("field bit width must lie in [1, 16]");
  QuantizedField q;
  q.bits = bits;
  if (field.values.empty()) return q;
  q.lo = *std::min_element(field.values.begin(), field.values.end());
  q.hi = *std::max_element(field.values.begin(), field.values.end());
  const double levels = static_cast<double>((1 << bits) - 1);
  q.levels.resize(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double t = q.hi > q.lo ? (field.values[i] - q.lo) / (q.hi - q.lo) : 0.0;
    q.levels[i] = static_cast<std::int32_t>(std::clamp(std::round(t * levels), 0.0, levels));
  }
  return q;
}

Grid dequantize_field(const QuantizedField& q, int width, int height) {
  Grid g(width, height);
  if (q.levels.size() != g.size()) throw ArgumentError("field size mismatch");
  const double levels = static_cast<double>((1 << q.bits) - 1);
  for (std::size_t i = 0; i < g.size(); ++i) g.values[i] = std::lerp(q.lo, q.hi, q.levels[i] / levels);
  return g;
}

std::vector<std::uint8_t> pack(const TerrainModel& model, const PackConfig& cfg) {
  check_config(cfg);
  check_trained(model);

  Writer header;
  std::uint8_t flags = 0;
  if (model.geometry) flags |= kFlagGeometry;
  if (model.geometry && model.geometry->masked) flags |= kFlagMasked;
  header.u8(flags);
  header.count(static_cast<std::size_t>(model.meta.width));
  header.count(static_cast<std::size_t>(model.meta.height));
  header.f64(model.meta.z_min);
  header.f64(model.meta.z_max);
  header.f64(model.meta.cell_size);
  for (int b : {cfg.b_shape, cfg.b_geom, cfg.b_wcf, cfg.b_field}) header.u8(static_cast<std::uint8_t>(b));
  write_stage(header, model.shape);

  std::vector<std::vector<std::uint8_t>> streams;
  streams.push_back(encode_group(stage_tensors(model.shape.layers), cfg.b_shape));
  if (model.geometry) {
    const GeometryModel& g = *model.geometry;
    write_stage(header, g.stage);
    header.f64(g.residual_scale);
    header.count(static_cast<std::size_t>(g.decoder.hidden_channels()));
    header.count(static_cast<std::size_t>(g.field.width()));
    header.count(static_cast<std::size_t>(g.field.height()));
    header.f64(g.field.mu_c);
    header.f64(g.field.sigma_c);
    header.f64(g.field.eps);
    header.count(static_cast<std::size_t>(g.thresholds.count()));
    header.f64(g.thresholds.tau_tilde_1);
    for (double d : g.thresholds.deltas) header.f64(d);
    streams.push_back(encode_group(stage_tensors(g.stage.layers), cfg.b_geom));
    streams.push_back(encode_group(decoder_tensors(g.decoder), cfg.b_wcf));
    streams.push_back(encode_field(g.field.c_hat, cfg.b_field));
  }

  Writer out;
  for (char c : kMagic) out.u8(static_cast<std::uint8_t>(c));
  out.u16(kFormatVersion);
  out.count(header.buffer().size());
  out.bytes(header.buffer());
  out.count(streams.size());
  for (const auto& s : streams) {
    out.count(s.size());
    out.bytes(s);
  }
  out.u32(crc_of(out.buffer()));
  return std::move(out.buffer());
}

TerrainModel unpack(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad magic: not an ITV2 container");
  if (bytes.size() < 14) throw FormatError("container truncated");
  Reader r(bytes);
  r.bytes(4);
  const std::uint16_t version = r.u16();
  if (version != kFormatVersion) throw FormatError("unsupported container version " + std::to_string(version));
  const std::uint32_t stored_crc = static_cast<std::uint32_t>(bytes[bytes.size() - 4]) |
                                   static_cast<std::uint32_t>(bytes[bytes.size() - 3]) << 8 |
                                   static_cast<std::uint32_t>(bytes[bytes.size() - 2]) << 16 |
                                   static_cast<std::uint32_t>(bytes[bytes.size() - 1]) << 24;
  const std::size_t header_len = r.u32();
  if (header_len > r.remaining()) throw FormatError("container truncated");
  if (crc_of(bytes.first(bytes.size() - 4)) != stored_crc) throw FormatError("checksum mismatch");

  Reader h(r.bytes(header_len));
  TerrainModel m;
  const std::uint8_t flags = h.u8();
  if (flags & ~(kFlagGeometry | kFlagMasked)) throw FormatError("unknown header flags");
  m.meta.width = static_cast<int>(h.u32());
  m.meta.height = static_cast<int>(h.u32());
  m.meta.z_min = h.f64();
  m.meta.z_max = h.f64();
  m.meta.cell_size = h.f64();
  PackConfig cfg;
  cfg.b_shape = h.u8();
  cfg.b_geom = h.u8();
  cfg.b_wcf = h.u8();
  cfg.b_field = h.u8();
  for (int b : {cfg.b_shape, cfg.b_geom, cfg.b_wcf, cfg.b_field})
    if (!valid_bits(b)) throw FormatError("unsupported bit width in header");
  m.shape = read_stage(h);

  const bool has_geom = (flags & kFlagGeometry) != 0;
  GeometryModel g;
  int field_w = 0;
  int field_h = 0;
  if (has_geom) {
    g.stage = read_stage(h);
    g.masked = (flags & kFlagMasked) != 0;
    g.residual_scale = h.f64();
    const std::size_t hidden = h.u32();
    if (hidden < 1 || hidden > 4096) throw FormatError("decoder width out of range");
    g.decoder = make_decoder(static_cast<int>(hidden));
    field_w = static_cast<int>(h.u32());
    field_h = static_cast<int>(h.u32());
    if (field_w < 1 || field_h < 1 || static_cast<std::size_t>(field_w) * static_cast<std::size_t>(field_h) > (1u << 24))
      throw FormatError("field dimensions out of range");
    g.field.mu_c = h.f64();
    g.field.sigma_c = h.f64();
    g.field.eps = h.f64();
    const std::size_t k = h.count(8);
    if (k < 1) throw FormatError("threshold count must be positive");
    g.thresholds.tau_tilde_1 = h.f64();
    g.thresholds.deltas.resize(k - 1);
    for (auto& d : g.thresholds.deltas) d = h.f64();
  }
  if (h.remaining() != 0) throw FormatError("trailing bytes in header");

  const std::size_t n_streams = r.u32();
  if (n_streams != (has_geom ? 4u : 1u)) throw FormatError("unexpected stream count");
  std::vector<std::span<const std::uint8_t>> streams;
  for (std::size_t i = 0; i < n_streams; ++i) {
    const std::size_t len = r.u32();
    if (len > r.remaining()) throw FormatError("container truncated");
    streams.push_back(r.bytes(len));
  }
  if (r.remaining() != 4) throw FormatError("unexpected bytes before checksum");

  set_stage_tensors(m.shape.layers, decode_group(streams[0], cfg.b_shape));
  if (has_geom) {
    set_stage_tensors(g.stage.layers, decode_group(streams[1], cfg.b_geom));
    set_decoder_tensors(g.decoder, decode_group(streams[2], cfg.b_wcf));
    g.field.c_hat = decode_field(streams[3], cfg.b_field, field_w, field_h);
    m.geometry = std::move(g);
  }
  return m;
}

TerrainModel quantize_model(const TerrainModel& model, const PackConfig& cfg) {
  check_config(cfg);
  TerrainModel q = model;
  auto apply = [](const std::vector<TensorSlot>& t, int bits) {
    std::vector<Eigen::MatrixXd> out;
    for (const auto& s : t) out.push_back(fake_quantize(s.value, bits, s.granularity));
    return out;
  };
  set_stage_tensors(q.shape.layers, apply(stage_tensors(model.shape.layers), cfg.b_shape));
  if (q.geometry) {
    auto& g = *q.geometry;
    set_stage_tensors(g.stage.layers, apply(stage_tensors(g.stage.layers), cfg.b_geom));
    set_decoder_tensors(g.decoder, apply(decoder_tensors(g.decoder), cfg.b_wcf));
    if (cfg.b_field == 32) {
      for (auto& v : g.field.c_hat.values) v = static_cast<double>(static_cast<float>(v));
    } else if (cfg.b_field != 64) {
      g.field.c_hat = dequantize_field(quantize_field(g.field.c_hat, cfg.b_field), g.field.width(), g.field.height());
    }
  }
  return q;
}

double bits_per_pixel(std::size_t container_bytes, const TileMeta& meta) {
  return 8.0 * static_cast<double>(container_bytes) /
         (static_cast<double>(meta.width) * static_cast<double>(meta.height));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

TerrainModel load_model(const std::filesystem::path& path) { return unpack(read_file(path)); }

void save_model(const std::filesystem::path& path, const TerrainModel& model, const PackConfig& cfg) {
  write_file(path, pack(model, cfg));
}

}  // namespace iterrain
