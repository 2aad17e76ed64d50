#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "qstream/rlnc.hpp"

using namespace qstream;
using namespace qstream::rlnc;

namespace {

// Shift-and-add multiplication reduced by 0x11D, independent of the tables.
std::uint8_t slow_mul(std::uint8_t a, std::uint8_t b) {
  unsigned acc = 0;
  for (int i = 0; i < 8; ++i)
    if (b & (1u << i)) acc ^= static_cast<unsigned>(a) << i;
  for (int bit = 14; bit >= 8; --bit)
    if (acc & (1u << bit)) acc ^= 0x11Du << (bit - 8);
  return static_cast<std::uint8_t>(acc);
}

Block random_block(RandomStream& s, std::size_t w, std::size_t len) {
  Block b(w, std::vector<std::uint8_t>(len));
  for (auto& p : b)
    for (auto& x : p) x = s.byte();
  return b;
}

// Fraction of all w x w binary matrices with full rank, by enumeration.
double enumerate_full_rank(std::size_t w) {
  const std::uint64_t total = 1ull << (w * w);
  std::uint64_t full = 0;
  for (std::uint64_t bits = 0; bits < total; ++bits) {
    Decoder<GF2> dec(w, 0);
    for (std::size_t r = 0; r < w; ++r) {
      CodedPacket pkt{std::vector<std::uint8_t>(w), {}};
      for (std::size_t c = 0; c < w; ++c) pkt.coeffs[c] = (bits >> (r * w + c)) & 1u;
      dec.receive(pkt);
    }
    if (dec.complete()) ++full;
  }
  return static_cast<double>(full) / static_cast<double>(total);
}

}  // namespace

TEST(GF256, TablesMatchShiftAndAdd) {
  for (unsigned a = 0; a < 256; ++a)
    for (unsigned b = 0; b < 256; ++b)
      ASSERT_EQ(GF256::mul(a, b), slow_mul(a, b)) << a << " " << b;
}

TEST(GF256, FieldAxioms) {
  for (unsigned a = 1; a < 256; ++a) {
    EXPECT_EQ(GF256::mul(a, GF256::inv(a)), 1) << a;
    EXPECT_EQ(GF256::mul(a, 1), a);
    EXPECT_EQ(GF256::add(a, a), 0);
  }
  EXPECT_THROW(GF256::inv(0), DomainError);
  for (unsigned a : {3u, 77u, 200u})
    for (unsigned b : {5u, 128u, 255u})
      for (unsigned c : {9u, 64u}) {
        EXPECT_EQ(GF256::mul(a, GF256::add(b, c)), GF256::add(GF256::mul(a, b), GF256::mul(a, c)));
        EXPECT_EQ(GF256::mul(GF256::mul(a, b), c), GF256::mul(a, GF256::mul(b, c)));
      }
  // 2 generates the multiplicative group
  std::vector<bool> seen(256, false);
  std::uint8_t x = 1;
  for (int i = 0; i < 255; ++i, x = GF256::mul(x, 2)) seen[x] = true;
  EXPECT_EQ(std::count(seen.begin(), seen.end(), true), 255);
}

TEST(Decoder, HandWorkedTwoPacketBlock) {
  const Block block{{0x10, 0x20}, {0x03, 0x04}};
  Decoder<GF256> dec(2, 2);
  const auto p1 = combine<GF256>(block, {1, 1});
  EXPECT_EQ(p1.payload, (std::vector<std::uint8_t>{0x13, 0x24}));
  EXPECT_EQ(dec.receive(p1), Reception::Innovative);
  EXPECT_EQ(dec.receive(combine<GF256>(block, {2, 2})), Reception::Redundant);
  EXPECT_EQ(dec.rank(), 1u);
  EXPECT_THROW(dec.decode(), DomainError);
  EXPECT_EQ(dec.receive(combine<GF256>(block, {1, 2})), Reception::Innovative);
  ASSERT_TRUE(dec.complete());
  EXPECT_EQ(dec.decode(), block);
  EXPECT_EQ(dec.received(), 3u);
}

TEST(Decoder, SinglePacketBlock) {
  const Block block{{9, 8, 7}};
  Decoder<GF256> dec(1, 3);
  EXPECT_EQ(dec.receive(combine<GF256>(block, {0})), Reception::Redundant);
  EXPECT_EQ(dec.receive(combine<GF256>(block, {57})), Reception::Innovative);
  EXPECT_EQ(dec.decode(), block);
}

TEST(Decoder, DuplicatePacketIsRedundant) {
  RandomStream s(4, 0);
  const Block block = random_block(s, 8, 16);
  Decoder<GF256> dec(8, 16);
  const auto pkt = encode<GF256>(block, s);
  EXPECT_EQ(dec.receive(pkt), Reception::Innovative);
  EXPECT_EQ(dec.receive(pkt), Reception::Redundant);
}

TEST(Decoder, RoundTripIsBitExact) {
  RandomStream s(6, 1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t w = 1 + trial % 32, len = 1 + trial % 17;
    const Block block = random_block(s, w, len);
    Decoder<GF256> dec(w, len);
    while (!dec.complete()) dec.receive(encode<GF256>(block, s));
    ASSERT_EQ(dec.decode(), block) << trial;
  }
  for (int trial = 0; trial < 200; ++trial) {
    const Block block = random_block(s, 6, 5);
    Decoder<GF2> dec(6, 5);
    while (!dec.complete()) dec.receive(encode<GF2>(block, s));
    ASSERT_EQ(dec.decode(), block) << trial;
  }
}

TEST(Decoder, RejectsMismatchedShapes) {
  Decoder<GF256> dec(3, 4);
  EXPECT_THROW(dec.receive({{1, 2}, {0, 0, 0, 0}}), LengthMismatch);
  EXPECT_THROW(dec.receive({{1, 2, 3}, {0}}), LengthMismatch);
  EXPECT_THROW(Decoder<GF256>(0, 4), DomainError);
  EXPECT_THROW(combine<GF256>({{1}, {2, 3}}, {1, 1}), LengthMismatch);
}

TEST(WireFormat, SerializeParse) {
  const CodedPacket pkt{{1, 2, 3}, {9, 8}};
  const auto bytes = serialize(pkt);
  EXPECT_EQ(bytes, (std::vector<std::uint8_t>{1, 2, 3, 9, 8}));
  const auto back = parse(bytes, 3, 2);
  EXPECT_EQ(back.coeffs, pkt.coeffs);
  EXPECT_EQ(back.payload, pkt.payload);
  EXPECT_THROW(parse(bytes, 3, 3), LengthMismatch);
}

TEST(FullRank, BinaryEnumerationMatchesProduct) {
  EXPECT_EQ(enumerate_full_rank(2), 0.375);
  EXPECT_EQ(enumerate_full_rank(4), 0.3076171875);
  EXPECT_NEAR(full_rank_probability(2, 2), 0.375, 1e-15);
  EXPECT_NEAR(full_rank_probability(2, 4), 0.3076171875, 1e-15);
  EXPECT_THROW(full_rank_probability(1, 4), DomainError);
}

TEST(FullRank, RandomBinaryMatricesWithinThreeSigma) {
  RandomStream s(8, 2);
  const Block block = random_block(s, 4, 1);
  const int n = 40000;
  int full = 0;
  for (int i = 0; i < n; ++i) {
    Decoder<GF2> dec(4, 1);
    for (int r = 0; r < 4; ++r) dec.receive(encode<GF2>(block, s));
    full += dec.complete();
  }
  const double p = 0.3076171875;
  EXPECT_NEAR(static_cast<double>(full) / n, p, 3 * std::sqrt(p * (1 - p) / n));
}

TEST(Innovation, ProbabilityAtEachDeficit) {
  // From rank W - d, a uniform coefficient vector is innovative w.p. 1 - 2^{-d}.
  RandomStream s(10, 3);
  const std::size_t w = 4;
  const Block block = random_block(s, w, 1);
  std::vector<int> trials(w + 1, 0), innovative(w + 1, 0);
  for (int rep = 0; rep < 20000; ++rep) {
    Decoder<GF2> dec(w, 1);
    while (!dec.complete()) {
      const std::size_t d = w - dec.rank();
      ++trials[d];
      innovative[d] += dec.receive(encode<GF2>(block, s)) == Reception::Innovative;
    }
  }
  for (std::size_t d = 1; d <= w; ++d) {
    const double p = 1.0 - std::pow(2.0, -static_cast<double>(d));
    const double n = trials[d];
    EXPECT_NEAR(innovative[d] / n, p, 3 * std::sqrt(p * (1 - p) / n)) << d;
  }
  EXPECT_NEAR(expected_redundant_per_block(2, 1), 1.0, 1e-15);
}

TEST(Ks, PValueSanity) {
  EXPECT_EQ(kolmogorov_pvalue(0.0, 100), 1.0);
  EXPECT_NEAR(kolmogorov_pvalue(1.36 / std::sqrt(1e6), 1000000), 0.05, 2e-3);
  EXPECT_LT(kolmogorov_pvalue(0.2, 1000), 1e-10);
  RandomStream s(12, 0);
  std::vector<double> good, bad;
  for (int i = 0; i < 5000; ++i) {
    good.push_back(s.exponential(2.0));
    bad.push_back(s.exponential(2.5));
  }
  EXPECT_GT(ks_exponential(good, 2.0).p_value, 0.01);
  EXPECT_LT(ks_exponential(bad, 2.0).p_value, 1e-6);
}

TEST(Merge, SmallGF256Experiment) {
  const std::vector<double> rates{1.05, 0.15};
  const auto rep = merge_experiment(rates, 2000.0, 8, 256, {.replicas = 4, .master_seed = 2, .payload_len = 4});
  EXPECT_DOUBLE_EQ(rep.total_rate, 1.2);
  EXPECT_TRUE(rep.count_consistent) << rep.count.mean;
  EXPECT_GT(rep.blocks, 1000u);
  EXPECT_LT(rep.redundant_per_block.mean, 0.01);
  EXPECT_GT(rep.ks.p_value, 0.01);
  EXPECT_THROW(merge_experiment(rates, 10.0, 8, 16), DomainError);
}

TEST(Merge, BinaryRedundancyMatchesSeries) {
  const std::vector<double> rates{1.0, 0.5, 0.25};
  const auto rep = merge_experiment(rates, 4000.0, 4, 2, {.replicas = 4, .master_seed = 9});
  EXPECT_NEAR(rep.expected_redundant, 1.0 + 1.0 / 3 + 1.0 / 7 + 1.0 / 15, 1e-15);
  EXPECT_NEAR(rep.redundant_per_block.mean, rep.expected_redundant, 3.5 * rep.redundant_per_block.std_error());
}
