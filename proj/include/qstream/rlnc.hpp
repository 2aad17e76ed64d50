#pragma once

// Random linear network coding: GF(2^8) arithmetic, random encoding of a
// block of W packets, an incremental rank decoder, and a simulation of
// several independently encoding servers whose deliveries merge at the client.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qstream/errors.hpp"
#include "qstream/estimate.hpp"
#include "qstream/random.hpp"

namespace qstream::rlnc {

namespace detail {

struct Gf256Tables {
  std::array<std::uint8_t, 512> exp{};
  std::array<int, 256> log{};
};

constexpr Gf256Tables make_gf256_tables(unsigned poly) {
  Gf256Tables t;
  unsigned x = 1;
  for (int i = 0; i < 255; ++i) {
    t.exp[i] = static_cast<std::uint8_t>(x);
    t.log[x] = i;
    x <<= 1;
    if (x & 0x100) x ^= poly;
  }
  for (int i = 255; i < 512; ++i) t.exp[i] = t.exp[i - 255];
  t.log[0] = -1;
  return t;
}

}  // namespace detail

/// GF(2^8) with reduction polynomial x^8 + x^4 + x^3 + x^2 + 1 (0x11D).
struct GF256 {
  static constexpr unsigned kOrder = 256;
  static constexpr unsigned kPoly = 0x11D;
  static constexpr detail::Gf256Tables kTables = detail::make_gf256_tables(kPoly);

  static constexpr std::uint8_t add(std::uint8_t a, std::uint8_t b) noexcept { return a ^ b; }
  static constexpr std::uint8_t mul(std::uint8_t a, std::uint8_t b) noexcept {
    if (a == 0 || b == 0) return 0;
    return kTables.exp[kTables.log[a] + kTables.log[b]];
  }
  static std::uint8_t inv(std::uint8_t a) {
    if (a == 0) throw DomainError("GF256::inv: zero has no inverse");
    return kTables.exp[255 - kTables.log[a]];
  }
  /// Coefficient times one payload byte (a single field symbol).
  static constexpr std::uint8_t scale(std::uint8_t c, std::uint8_t symbol) noexcept { return mul(c, symbol); }
  static std::uint8_t random(RandomStream& s) noexcept { return s.byte(); }
};

/// GF(2). Payload bytes are read as eight independent GF(2) symbols.
struct GF2 {
  static constexpr unsigned kOrder = 2;

  static constexpr std::uint8_t add(std::uint8_t a, std::uint8_t b) noexcept { return a ^ b; }
  static constexpr std::uint8_t mul(std::uint8_t a, std::uint8_t b) noexcept { return a & b; }
  static std::uint8_t inv(std::uint8_t a) {
    if (a == 0) throw DomainError("GF2::inv: zero has no inverse");
    return 1;
  }
  static constexpr std::uint8_t scale(std::uint8_t c, std::uint8_t symbol) noexcept { return c ? symbol : 0; }
  static std::uint8_t random(RandomStream& s) noexcept { return static_cast<std::uint8_t>(s.byte() >> 7); }
};

struct CodedPacket {
  std::vector<std::uint8_t> coeffs;
  std::vector<std::uint8_t> payload;
};

using Block = std::vector<std::vector<std::uint8_t>>;

/// dst += c * src, symbolwise.
template <class Field>
void axpy(std::span<std::uint8_t> dst, std::uint8_t c, std::span<const std::uint8_t> src) {
  if (c == 0) return;
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = Field::add(dst[i], Field::scale(c, src[i]));
}

/// Combination of the block with the given coefficients.
template <class Field>
CodedPacket combine(const Block& block, std::vector<std::uint8_t> coeffs) {
  if (block.empty()) throw DomainError("rlnc::combine: empty block");
  if (coeffs.size() != block.size()) throw LengthMismatch("rlnc::combine: one coefficient per packet required");
  const std::size_t len = block.front().size();
  CodedPacket pkt{std::move(coeffs), std::vector<std::uint8_t>(len, 0)};
  for (std::size_t j = 0; j < block.size(); ++j) {
    if (block[j].size() != len) throw LengthMismatch("rlnc::combine: payload lengths differ within the block");
    axpy<Field>(pkt.payload, pkt.coeffs[j], block[j]);
  }
  return pkt;
}

/// Coefficients i.i.d. uniform over the field.
template <class Field>
CodedPacket encode(const Block& block, RandomStream& stream) {
  if (block.empty()) throw DomainError("rlnc::encode: empty block");
  std::vector<std::uint8_t> coeffs(block.size());
  for (auto& c : coeffs) c = Field::random(stream);
  return combine<Field>(block, std::move(coeffs));
}

/// Wire format: W coefficient bytes followed by the payload.
inline std::vector<std::uint8_t> serialize(const CodedPacket& pkt) {
  std::vector<std::uint8_t> out(pkt.coeffs);
  out.insert(out.end(), pkt.payload.begin(), pkt.payload.end());
  return out;
}

inline CodedPacket parse(std::span<const std::uint8_t> bytes, std::size_t w, std::size_t payload_len) {
  if (bytes.size() != w + payload_len)
    throw LengthMismatch("rlnc::parse: expected " + std::to_string(w + payload_len) + " bytes, got " +
                         std::to_string(bytes.size()));
  return {{bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(w)},
          {bytes.begin() + static_cast<std::ptrdiff_t>(w), bytes.end()}};
}

enum class Reception { Innovative, Redundant };

/// Incremental Gauss-Jordan elimination. Stored rows are kept fully reduced,
/// each with a unit pivot, so a complete decoder holds the original packets.
template <class Field>
class Decoder {
 public:
  Decoder(std::size_t w, std::size_t payload_len) : w_(w), len_(payload_len), pivot_row_(w, npos) {
    if (w == 0) throw DomainError("rlnc::Decoder: block size must be positive");
  }

  Reception receive(const CodedPacket& pkt) {
    if (pkt.coeffs.size() != w_ || pkt.payload.size() != len_)
      throw LengthMismatch("rlnc::Decoder::receive: packet shape does not match the decoder");
    ++received_;
    std::vector<std::uint8_t> row(pkt.coeffs);
    row.insert(row.end(), pkt.payload.begin(), pkt.payload.end());
    for (std::size_t c = 0; c < w_; ++c)
      if (pivot_row_[c] != npos && row[c] != 0) axpy<Field>(row, row[c], rows_[pivot_row_[c]]);
    std::size_t pivot = 0;
    while (pivot < w_ && row[pivot] == 0) ++pivot;
    if (pivot == w_) return Reception::Redundant;

    const std::uint8_t s = Field::inv(row[pivot]);
    for (auto& x : row) x = Field::scale(s, x);
    for (auto& other : rows_)
      if (other[pivot] != 0) axpy<Field>(other, other[pivot], row);
    pivot_row_[pivot] = rows_.size();
    rows_.push_back(std::move(row));
    return Reception::Innovative;
  }

  std::size_t rank() const noexcept { return rows_.size(); }
  std::size_t received() const noexcept { return received_; }
  std::size_t block_size() const noexcept { return w_; }
  bool complete() const noexcept { return rows_.size() == w_; }

  /// Original packets, in block order. Requires rank == W.
  Block decode() const {
    if (!complete()) throw DomainError("rlnc::Decoder::decode: rank below block size");
    Block out(w_);
    for (std::size_t c = 0; c < w_; ++c) {
      const auto& r = rows_[pivot_row_[c]];
      out[c].assign(r.begin() + static_cast<std::ptrdiff_t>(w_), r.end());
    }
    return out;
  }

 private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t w_;
  std::size_t len_;
  std::size_t received_ = 0;
  std::vector<std::size_t> pivot_row_;
  std::vector<std::vector<std::uint8_t>> rows_;
};

/// Probability that w uniform random vectors in GF(q)^w are independent.
inline double full_rank_probability(unsigned q, unsigned w) {
  if (q < 2 || w == 0) throw DomainError("full_rank_probability: need q >= 2 and w >= 1");
  double p = 1.0;
  for (unsigned i = 1; i <= w; ++i) p *= 1.0 - std::pow(static_cast<double>(q), -static_cast<double>(i));
  return p;
}

/// Expected redundant receptions while completing one block: a reception at
/// deficit d is redundant with probability q^{-d}, so the count at deficit d
/// is geometric with mean q^{-d} / (1 - q^{-d}).
inline double expected_redundant_per_block(unsigned q, unsigned w) {
  if (q < 2 || w == 0) throw DomainError("expected_redundant_per_block: need q >= 2 and w >= 1");
  double s = 0.0;
  for (unsigned d = 1; d <= w; ++d) {
    const double x = std::pow(static_cast<double>(q), -static_cast<double>(d));
    s += x / (1.0 - x);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov against an exponential law

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

/// Asymptotic Kolmogorov tail with the Stephens small-sample correction.
inline double kolmogorov_pvalue(double d, std::size_t n) {
  if (n == 0) return 1.0;
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

inline KsResult ks_exponential(std::vector<double> xs, double rate) {
  KsResult r;
  r.n = xs.size();
  if (xs.empty()) return r;
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = -std::expm1(-rate * xs[i]);
    r.statistic = std::max({r.statistic, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  r.p_value = kolmogorov_pvalue(r.statistic, xs.size());
  return r;
}

// ---------------------------------------------------------------------------
// Merged delivery from several servers

struct MergeConfig {
  std::size_t replicas = 10;
  std::uint64_t master_seed = 1;
  std::size_t payload_len = 0;
  unsigned workers = 0;
};

struct MergeReport {
  double total_rate = 0.0;
  double expected_count = 0.0;     // sum R_k * horizon
  Estimate count;                  // merged arrivals per replica
  std::size_t blocks = 0;          // completed blocks over all replicas
  Estimate redundant_per_block;    // over completed blocks
  double expected_redundant = 0.0; // sum_d q^{-d} / (1 - q^{-d})
  KsResult ks;                     // merged inter-arrival times vs Exponential(sum R_k)
  bool count_consistent = false;   // |count - expected| <= 3 Poisson std-errors
};

namespace detail {

struct MergeReplica {
  std::size_t count = 0;
  std::vector<double> redundant;  // per completed block
  std::vector<double> gaps;
};

template <class Field>
MergeReplica merge_replica(std::span<const double> rates, double horizon, std::size_t w, std::size_t len,
                           std::uint64_t seed, std::size_t replica) {
  const std::size_t m = rates.size();
  // Stream layout per replica: m arrival streams, m coding streams, one source stream.
  const std::uint64_t base = static_cast<std::uint64_t>(replica) * (2 * m + 1);
  std::vector<RandomStream> arrivals, coders;
  for (std::size_t k = 0; k < m; ++k) {
    arrivals.emplace_back(seed, base + k);
    coders.emplace_back(seed, base + m + k);
  }
  RandomStream source(seed, base + 2 * m);

  auto fresh_block = [&] {
    Block b(w, std::vector<std::uint8_t>(len));
    for (auto& pkt : b)
      for (auto& x : pkt) x = source.byte();
    return b;
  };

  std::vector<double> next(m);
  for (std::size_t k = 0; k < m; ++k) next[k] = arrivals[k].exponential(rates[k]);

  MergeReplica out;
  Block block = fresh_block();
  Decoder<Field> dec(w, len);
  std::size_t redundant = 0;
  double last = 0.0;
  for (;;) {
    const auto k = static_cast<std::size_t>(std::min_element(next.begin(), next.end()) - next.begin());
    const double t = next[k];
    if (t > horizon) break;
    next[k] = t + arrivals[k].exponential(rates[k]);
    ++out.count;
    out.gaps.push_back(t - last);
    last = t;
    if (dec.receive(encode<Field>(block, coders[k])) == Reception::Redundant) ++redundant;
    if (dec.complete()) {
      out.redundant.push_back(static_cast<double>(redundant));
      redundant = 0;
      block = fresh_block();
      dec = Decoder<Field>(w, len);
    }
  }
  return out;
}

}  // namespace detail

/// m independent Poisson servers, each sending independently encoded packets
/// of the client's current block; the client decodes block after block.
template <class Field>
MergeReport merge_experiment(std::span<const double> server_rates, double horizon, std::size_t w,
                             const MergeConfig& cfg = {}) {
  if (server_rates.empty()) throw DomainError("merge_experiment: at least one server required");
  for (double r : server_rates)
    if (!(r > 0.0)) throw DomainError("merge_experiment: server rates must be positive");
  if (!(horizon > 0.0)) throw DomainError("merge_experiment: horizon must be positive");
  if (w == 0 || cfg.replicas == 0) throw DomainError("merge_experiment: need w >= 1 and replicas >= 1");

  const unsigned workers = cfg.workers ? cfg.workers : worker_count();
  auto reps = run_replicas<detail::MergeReplica>(
      cfg.replicas,
      [&](std::size_t i) {
        return detail::merge_replica<Field>(server_rates, horizon, w, cfg.payload_len, cfg.master_seed, i);
      },
      workers);

  MergeReport rep;
  for (double r : server_rates) rep.total_rate += r;
  rep.expected_count = rep.total_rate * horizon;
  rep.expected_redundant = expected_redundant_per_block(Field::kOrder, static_cast<unsigned>(w));
  RunningStats count, red;
  std::vector<double> gaps;
  for (const auto& r : reps) {
    count.add(static_cast<double>(r.count));
    for (double x : r.redundant) red.add(x);
    gaps.insert(gaps.end(), r.gaps.begin(), r.gaps.end());
  }
  rep.count = count.estimate();
  rep.blocks = red.count();
  rep.redundant_per_block = red.estimate();
  rep.ks = ks_exponential(std::move(gaps), rep.total_rate);
  // Under the null the per-replica count is Poisson(expected_count).
  const double se = std::sqrt(rep.expected_count / static_cast<double>(cfg.replicas));
  rep.count_consistent = std::abs(rep.count.mean - rep.expected_count) <= 3.0 * se;
  return rep;
}

/// Runtime dispatch on the field size (2 or 256).
inline MergeReport merge_experiment(std::span<const double> server_rates, double horizon, std::size_t w, unsigned q,
                                    const MergeConfig& cfg = {}) {
  if (q == 256) return merge_experiment<GF256>(server_rates, horizon, w, cfg);
  if (q == 2) return merge_experiment<GF2>(server_rates, horizon, w, cfg);
  throw DomainError("merge_experiment: field size must be 2 or 256");
}

}  // namespace qstream::rlnc
