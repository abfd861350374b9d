#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace iterrain {

// Adaptive order-0 model over the alphabet [lo, hi]: counts start at 1, grow
// by kCountIncrement per coded symbol and are halved (keeping each >= 1)
// once the total exceeds 2^20 (or 8x the alphabet size if larger).
class AdaptiveModel {
 public:
  static constexpr std::uint32_t kCountIncrement = 32;

  AdaptiveModel(std::int32_t lo, std::int32_t hi);

  std::uint32_t total() const { return total_; }
  std::uint32_t cumulative(std::size_t symbol) const;  // sum of counts below symbol
  std::uint32_t count(std::size_t symbol) const { return counts_[symbol]; }
  // Symbol whose cumulative interval contains `target`.
  std::size_t find(std::uint32_t target) const;
  void update(std::size_t symbol);
  std::size_t size() const { return counts_.size(); }

 private:
  void add(std::size_t symbol, std::int64_t delta);
  void rebuild();

  std::vector<std::uint32_t> counts_;
  std::vector<std::uint32_t> tree_;  // Fenwick tree over counts_
  std::uint32_t total_ = 0;
  std::uint32_t limit_ = 0;
  std::size_t top_bit_ = 1;
};

// Range coder (32-bit range, 64-bit low with byte-wise carry propagation).
// The stream starts with a little-endian u32 symbol count.
std::vector<std::uint8_t> entropy_encode(std::span<const std::int32_t> symbols, std::int32_t lo, std::int32_t hi);

// Decodes one stream from the front of `bytes`; `consumed` receives its length.
std::vector<std::int32_t> entropy_decode(std::span<const std::uint8_t> bytes, std::int32_t lo, std::int32_t hi,
                                         std::size_t* consumed = nullptr);

// Symmetric b-bit alphabet [-(2^(b-1)-1), 2^(b-1)-1].
std::int32_t signed_limit(int bits);

}  // namespace iterrain
