#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "onnpic/errors.hpp"

namespace onnpic {

// Quantized-latent alphabet. The two end bins double as tails that absorb
// clamped outliers; trained toy latents stay far inside.
inline constexpr int kSymbolMin = -64;
inline constexpr int kSymbolMax = 63;

// Per-context cumulative frequency table over a bounded symbol alphabet.
// Invariants: cum.front() == 0, cum.back() == 65536 (16-bit probability
// precision), strictly increasing (every symbol has width >= 1).
struct CdfTable {
  std::vector<uint32_t> cum;

  int nsym() const { return static_cast<int>(cum.size()) - 1; }
  uint32_t freq(int s) const { return cum[s + 1] - cum[s]; }
  // Largest s with cum[s] <= v < cum[s+1].
  int find(uint32_t v) const;
};

// Scales probability masses to a total of 2^16 by largest remainder, then
// raises empty bins to width 1 (stealing from the widest bin). Deterministic.
CdfTable build_cdf_from_masses(std::span<const double> masses);

// Discretized Gaussian over [smin, smax] with the end bins as tails; interior
// masses equal the training-time gaussian_likelihood values.
CdfTable build_cdf(double mu, double sigma, int smin, int smax);
std::vector<double> discretized_gaussian_masses(double mu, double sigma,
                                                int smin, int smax);

// Same construction for the per-channel logistic prior over z.
CdfTable build_cdf_logistic(double loc, double scale, int smin, int smax);

// Carry-less 32-bit range coder with 16-bit probability precision
// (Subbotin-style renormalization). The flush emits the fewest bytes that
// pin the final interval, so a near-certain stream costs ~2 bytes.
class RangeEncoder {
 public:
  void encode(uint32_t cum_freq, uint32_t freq);
  std::vector<uint8_t> finish();
  size_t bytes_pending() const { return out_.size(); }

 private:
  uint32_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  std::vector<uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const uint8_t> bytes);
  // Returns the scaled cumulative value in [0, 2^16) for the next symbol;
  // follow with decode_update for the symbol found in the table.
  uint32_t decode_freq();
  void decode_update(uint32_t cum_freq, uint32_t freq);
  int decode_symbol(const CdfTable& table);

 private:
  uint8_t next_byte();
  uint32_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t code_ = 0;
  uint32_t r_ = 0;
  const uint8_t* p_ = nullptr;
  size_t n_ = 0;
  size_t pos_ = 0;
  size_t overread_ = 0;
};

// Encodes symbol values (alphabet [kSymbolMin, kSymbolMax] by default built
// into the tables). Values outside the table alphabet are clamped into the
// end (tail) bins; *clamped counts them. table_at(i) supplies the table for
// symbol i, in encode order.
std::vector<uint8_t> rc_encode(
    std::span<const int32_t> symbols,
    const std::function<const CdfTable&(size_t)>& table_at, int symbol_min,
    int64_t* clamped = nullptr);

// Exact inverse given identical tables in identical order.
std::vector<int32_t> rc_decode(
    std::span<const uint8_t> bytes, size_t count,
    const std::function<const CdfTable&(size_t)>& table_at, int symbol_min);

}  // namespace onnpic
