#include "onnpic/rangecoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "onnpic/constants.hpp"
#include "onnpic/ops.hpp"  // normal_cdf

namespace onnpic {

namespace {
constexpr uint32_t kTop = 1u << 24;
constexpr uint32_t kBot = 1u << 16;
constexpr uint32_t kTotal = 1u << 16;
}  // namespace

int CdfTable::find(uint32_t v) const {
  // first index with cum[idx+1] > v
  int lo = 0, hi = nsym() - 1;
  while (lo < hi) {
    int mid = (lo + hi) / 2;
    if (cum[mid + 1] > v) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

CdfTable build_cdf_from_masses(std::span<const double> masses) {
  const int n = static_cast<int>(masses.size());
  if (n < 1) throw ArgumentError("build_cdf: empty alphabet");
  if (n > static_cast<int>(kTotal / 2)) {
    throw ArgumentError("build_cdf: alphabet too large for 16-bit tables");
  }
  double total = 0.0;
  for (double m : masses) total += std::max(m, 0.0);

  std::vector<uint32_t> cnt(n, 0);
  if (total <= 0.0) {
    // Degenerate input: fall back to a uniform table.
    uint32_t base = kTotal / n, extra = kTotal % n;
    for (int i = 0; i < n; ++i) cnt[i] = base + (i < static_cast<int>(extra));
  } else {
    std::vector<std::pair<double, int>> rem(n);
    uint64_t sum = 0;
    for (int i = 0; i < n; ++i) {
      double scaled = std::max(masses[i], 0.0) * kTotal / total;
      double fl = std::floor(scaled);
      cnt[i] = static_cast<uint32_t>(fl);
      rem[i] = {scaled - fl, i};
      sum += cnt[i];
    }
    // Largest-remainder distribution of the leftover counts; ties broken by
    // index so the construction is deterministic.
    std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    int64_t deficit = static_cast<int64_t>(kTotal) - static_cast<int64_t>(sum);
    for (int64_t k = 0; deficit > 0; ++k, --deficit) {
      cnt[rem[k % n].second] += 1;
    }
    for (int64_t k = 0; deficit < 0; ++k) {  // float overshoot, rare
      int i = rem[(n - 1) - (k % n)].second;
      if (cnt[i] > 1) {
        cnt[i] -= 1;
        ++deficit;
      }
    }
  }
  // Every symbol needs nonzero width; steal from the widest bin.
  for (int i = 0; i < n; ++i) {
    if (cnt[i] == 0) {
      int widest = 0;
      for (int j = 1; j < n; ++j) {
        if (cnt[j] > cnt[widest]) widest = j;
      }
      if (cnt[widest] < 2) throw ComputationError("build_cdf: table overflow");
      cnt[widest] -= 1;
      cnt[i] = 1;
    }
  }
  CdfTable t;
  t.cum.resize(n + 1);
  t.cum[0] = 0;
  for (int i = 0; i < n; ++i) t.cum[i + 1] = t.cum[i] + cnt[i];
  if (t.cum[n] != kTotal) throw ComputationError("build_cdf: bad total");
  return t;
}

std::vector<double> discretized_gaussian_masses(double mu, double sigma,
                                                int smin, int smax) {
  if (smax < smin) throw ArgumentError("build_cdf: empty alphabet");
  if (sigma < kSigmaMin) sigma = kSigmaMin;
  const int n = smax - smin + 1;
  std::vector<double> m(n);
  for (int i = 0; i < n; ++i) {
    int s = smin + i;
    if (n == 1) {
      m[i] = 1.0;
    } else if (s == smin) {
      m[i] = normal_cdf((s + 0.5 - mu) / sigma);
    } else if (s == smax) {
      m[i] = 1.0 - normal_cdf((s - 0.5 - mu) / sigma);
    } else {
      m[i] = normal_cdf((s + 0.5 - mu) / sigma) -
             normal_cdf((s - 0.5 - mu) / sigma);
    }
  }
  return m;
}

CdfTable build_cdf(double mu, double sigma, int smin, int smax) {
  auto m = discretized_gaussian_masses(mu, sigma, smin, smax);
  return build_cdf_from_masses(m);
}

CdfTable build_cdf_logistic(double loc, double scale, int smin, int smax) {
  if (smax < smin) throw ArgumentError("build_cdf: empty alphabet");
  if (scale < 1e-6) scale = 1e-6;
  const int n = smax - smin + 1;
  auto cdf = [&](double x) { return 1.0 / (1.0 + std::exp(-(x - loc) / scale)); };
  std::vector<double> m(n);
  for (int i = 0; i < n; ++i) {
    int s = smin + i;
    if (n == 1) {
      m[i] = 1.0;
    } else if (s == smin) {
      m[i] = cdf(s + 0.5);
    } else if (s == smax) {
      m[i] = 1.0 - cdf(s - 0.5);
    } else {
      m[i] = cdf(s + 0.5) - cdf(s - 0.5);
    }
  }
  return build_cdf_from_masses(m);
}

void RangeEncoder::encode(uint32_t cum_freq, uint32_t freq) {
  uint32_t r = range_ >> 16;
  low_ += cum_freq * r;
  range_ = freq * r;
  while ((low_ ^ (low_ + range_)) < kTop ||
         (range_ < kBot && ((range_ = (0u - low_) & (kBot - 1)), true))) {
    out_.push_back(static_cast<uint8_t>(low_ >> 24));
    low_ <<= 8;
    range_ <<= 8;
  }
}

std::vector<uint8_t> RangeEncoder::finish() {
  // Emit the fewest bytes v such that v followed by zero padding falls in
  // [low, low + range). Byte 2 always succeeds because range >= 2^16 holds
  // after renormalization; byte 4 is the unconditional fallback.
  for (int nbytes = 1; nbytes <= 4; ++nbytes) {
    int shift = 32 - 8 * nbytes;
    uint64_t mask = (1ull << shift) - 1;
    uint64_t v = (static_cast<uint64_t>(low_) + mask) & ~mask;
    if (v < static_cast<uint64_t>(low_) + range_) {
      for (int b = 0; b < nbytes; ++b) {
        out_.push_back(static_cast<uint8_t>(v >> (24 - 8 * b)));
      }
      return std::move(out_);
    }
  }
  for (int b = 0; b < 4; ++b) {
    out_.push_back(static_cast<uint8_t>(low_ >> (24 - 8 * b)));
  }
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const uint8_t> bytes)
    : p_(bytes.data()), n_(bytes.size()) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

uint8_t RangeDecoder::next_byte() {
  if (pos_ < n_) return p_[pos_++];
  // The minimal flush implies up to 3 legitimate zero reads past the end
  // (plus the 4-byte pipeline warm-up); anything more means truncation.
  if (++overread_ > 4) {
    throw DecodeError("range stream exhausted at byte " + std::to_string(n_));
  }
  return 0;
}

uint32_t RangeDecoder::decode_freq() {
  r_ = range_ >> 16;
  uint32_t v = (code_ - low_) / r_;
  return v < kTotal ? v : kTotal - 1;
}

void RangeDecoder::decode_update(uint32_t cum_freq, uint32_t freq) {
  low_ += cum_freq * r_;
  range_ = freq * r_;
  while ((low_ ^ (low_ + range_)) < kTop ||
         (range_ < kBot && ((range_ = (0u - low_) & (kBot - 1)), true))) {
    code_ = (code_ << 8) | next_byte();
    low_ <<= 8;
    range_ <<= 8;
  }
}

int RangeDecoder::decode_symbol(const CdfTable& table) {
  uint32_t v = decode_freq();
  int s = table.find(v);
  decode_update(table.cum[s], table.freq(s));
  return s;
}

std::vector<uint8_t> rc_encode(
    std::span<const int32_t> symbols,
    const std::function<const CdfTable&(size_t)>& table_at, int symbol_min,
    int64_t* clamped) {
  RangeEncoder enc;
  int64_t nclamped = 0;
  for (size_t i = 0; i < symbols.size(); ++i) {
    const CdfTable& t = table_at(i);
    int32_t idx = symbols[i] - symbol_min;
    if (idx < 0) {
      idx = 0;
      ++nclamped;
    } else if (idx >= t.nsym()) {
      idx = t.nsym() - 1;
      ++nclamped;
    }
    enc.encode(t.cum[idx], t.freq(idx));
  }
  if (clamped) *clamped = nclamped;
  return enc.finish();
}

std::vector<int32_t> rc_decode(
    std::span<const uint8_t> bytes, size_t count,
    const std::function<const CdfTable&(size_t)>& table_at, int symbol_min) {
  RangeDecoder dec(bytes);
  std::vector<int32_t> out(count);
  for (size_t i = 0; i < count; ++i) {
    out[i] = dec.decode_symbol(table_at(i)) + symbol_min;
  }
  return out;
}

}  // namespace onnpic
