#include "iterrain/entropy.hpp"

#include <algorithm>
#include <string>

#include "iterrain/common.hpp"

namespace iterrain {

namespace {

constexpr std::uint32_t kTop = 1u << 24;
constexpr std::uint32_t kMinLimit = 1u << 20;

class Encoder {
 public:
  void encode(std::uint32_t cum, std::uint32_t freq, std::uint32_t total) {
    const std::uint32_t r = range_ / total;
    low_ += static_cast<std::uint64_t>(r) * cum;
    range_ = r * freq;
    while (range_ < kTop) {
      range_ <<= 8;
      shift_low();
    }
  }

  void finish() {
    for (int i = 0; i < 5; ++i) shift_low();
  }

  std::vector<std::uint8_t>& bytes() { return out_; }

 private:
  void shift_low() {
    if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
      const auto carry = static_cast<std::uint8_t>(low_ >> 32);
      std::uint8_t temp = cache_;
      do {
        out_.push_back(static_cast<std::uint8_t>(temp + carry));
        temp = 0xFF;
      } while (--pending_ != 0);
      cache_ = static_cast<std::uint8_t>(low_ >> 24);
    }
    ++pending_;
    low_ = (low_ & 0x00FFFFFFu) << 8;
  }

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t pending_ = 1;
  std::vector<std::uint8_t> out_;
};

class Decoder {
 public:
  explicit Decoder(std::span<const std::uint8_t> in) : in_(in) {
    for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next();
  }

  std::uint32_t target(std::uint32_t total) {
    r_ = range_ / total;
    const std::uint32_t v = code_ / r_;
    return v < total ? v : total - 1;
  }

  void consume(std::uint32_t cum, std::uint32_t freq) {
    code_ -= r_ * cum;
    range_ = r_ * freq;
    while (range_ < kTop) {
      range_ <<= 8;
      code_ = (code_ << 8) | next();
    }
  }

  std::size_t position() const { return pos_; }

 private:
  std::uint32_t next() {
    if (pos_ >= in_.size()) throw FormatError("entropy stream truncated");
    return in_[pos_++];
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t r_ = 1;
};

}  // namespace

AdaptiveModel::AdaptiveModel(std::int32_t lo, std::int32_t hi) {
  if (hi < lo) throw ArgumentError("empty alphabet");
  const auto n = static_cast<std::size_t>(static_cast<std::int64_t>(hi) - lo + 1);
  if (n > (1u << 20)) throw ArgumentError("alphabet too large for the range coder");
  counts_.assign(n, 1);
  tree_.assign(n + 1, 0);
  // Keep room for the alphabet to grow well past its initial counts.
  limit_ = kMinLimit;
  while (limit_ < 8 * n) limit_ <<= 1;
  while (top_bit_ * 2 <= n) top_bit_ *= 2;
  rebuild();
}

void AdaptiveModel::rebuild() {
  std::fill(tree_.begin(), tree_.end(), 0);
  total_ = 0;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    total_ += counts_[i];
    for (std::size_t j = i + 1; j < tree_.size(); j += j & (~j + 1)) tree_[j] += counts_[i];
  }
}

void AdaptiveModel::add(std::size_t symbol, std::int64_t delta) {
  for (std::size_t j = symbol + 1; j < tree_.size(); j += j & (~j + 1))
    tree_[j] = static_cast<std::uint32_t>(tree_[j] + delta);
}

std::uint32_t AdaptiveModel::cumulative(std::size_t symbol) const {
  std::uint32_t s = 0;
  for (std::size_t j = symbol; j > 0; j -= j & (~j + 1)) s += tree_[j];
  return s;
}

std::size_t AdaptiveModel::find(std::uint32_t target) const {
  // Largest prefix whose sum is <= target; the symbol is the next index.
  std::size_t pos = 0;
  for (std::size_t step = top_bit_; step > 0; step >>= 1) {
    const std::size_t next = pos + step;
    if (next < tree_.size() && tree_[next] <= target) {
      pos = next;
      target -= tree_[next];
    }
  }
  return pos;
}

void AdaptiveModel::update(std::size_t symbol) {
  counts_[symbol] += kCountIncrement;
  total_ += kCountIncrement;
  add(symbol, kCountIncrement);
  if (total_ > limit_) {
    for (auto& c : counts_) c = (c + 1) / 2;
    rebuild();
  }
}

std::int32_t signed_limit(int bits) {
  if (bits < 2 || bits > 20) throw ArgumentError("signed alphabet needs 2..20 bits");
  return (1 << (bits - 1)) - 1;
}

std::vector<std::uint8_t> entropy_encode(std::span<const std::int32_t> symbols, std::int32_t lo, std::int32_t hi) {
  if (symbols.size() > 0xFFFFFFFFu) throw ArgumentError("too many symbols for one stream");
  AdaptiveModel model(lo, hi);
  Encoder enc;
  auto& out = enc.bytes();
  const auto n = static_cast<std::uint32_t>(symbols.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(n >> (8 * i)));
  if (n == 0) return out;
  for (std::int32_t s : symbols) {
    if (s < lo || s > hi) throw ArgumentError("symbol " + std::to_string(s) + " outside the alphabet");
    const auto idx = static_cast<std::size_t>(static_cast<std::int64_t>(s) - lo);
    enc.encode(model.cumulative(idx), model.count(idx), model.total());
    model.update(idx);
  }
  enc.finish();
  return out;
}

std::vector<std::int32_t> entropy_decode(std::span<const std::uint8_t> bytes, std::int32_t lo, std::int32_t hi,
                                         std::size_t* consumed) {
  if (bytes.size() < 4) throw FormatError("entropy stream truncated");
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n |= static_cast<std::uint32_t>(bytes[static_cast<std::size_t>(i)]) << (8 * i);
  std::vector<std::int32_t> out;
  if (n == 0) {
    if (consumed != nullptr) *consumed = 4;
    return out;
  }
  AdaptiveModel model(lo, hi);
  Decoder dec(bytes.subspan(4));
  // A corrupt count must not trigger a huge allocation up front.
  out.reserve(std::min<std::size_t>(n, 8 * bytes.size()));
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t t = dec.target(model.total());
    const std::size_t idx = model.find(t);
    if (idx >= model.size()) throw FormatError("entropy stream corrupt");
    dec.consume(model.cumulative(idx), model.count(idx));
    model.update(idx);
    out.push_back(static_cast<std::int32_t>(static_cast<std::int64_t>(idx) + lo));
  }
  if (consumed != nullptr) *consumed = 4 + dec.position();
  return out;
}

}  // namespace iterrain
