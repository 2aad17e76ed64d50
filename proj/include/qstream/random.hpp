#pragma once

// Counter-based random streams. Every replica draws from its own stream,
// keyed by (master seed, stream id), so results do not depend on how
// replicas are scheduled across threads.

#include <array>
#include <cmath>
#include <cstdint>

namespace qstream {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter single_round(const Counter& c, const Key& k) noexcept {
    const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Inverse of the standard normal CDF (Wichura, AS 241 / PPND16).
/// Relative accuracy about 1e-16 over (0, 1).
inline double normal_quantile(double p) {
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
               1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
               0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
               0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
               7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0 ? -val : val;
}

/// One independent stream of the counter-based generator.
class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::uint64_t stream_id) noexcept
      : key_{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32)},
        stream_{static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)} {}

  std::uint64_t next_u64() noexcept {
    if (slot_ == 2) refill();
    const std::uint64_t v = (std::uint64_t{buf_[2 * slot_]} << 32) | buf_[2 * slot_ + 1];
    ++slot_;
    return v;
  }

  /// Uniform on the open interval (0, 1); never returns 0 or 1.
  double uniform() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  /// Exponential(rate) by inversion.
  double exponential(double rate) noexcept { return -std::log(uniform()) / rate; }

  /// Standard normal by inversion.
  double normal() noexcept { return normal_quantile(uniform()); }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  std::uint8_t byte() noexcept { return static_cast<std::uint8_t>(next_u64() >> 56); }

  std::uint64_t blocks_used() const noexcept { return block_; }

 private:
  void refill() noexcept {
    buf_ = Philox4x32::generate(
        {static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32), stream_[0], stream_[1]},
        key_);
    ++block_;
    slot_ = 0;
  }

  Philox4x32::Key key_;
  std::array<std::uint32_t, 2> stream_;
  Philox4x32::Counter buf_{};
  std::uint64_t block_ = 0;
  int slot_ = 2;
};

}  // namespace qstream
