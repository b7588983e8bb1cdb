#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "autosched/schedulers.hpp"

using namespace autosched;

namespace {

// Drain a loop with a single requester and return the delivered sizes.
std::vector<Count> drain(SchedulerKind kind, Count n, Count p, Count cp = 1) {
  auto s = SchedulerState::init(n, p, cp);
  std::vector<Count> out;
  while (s.remaining > 0) out.push_back(next_chunk(s, kind, out.size() % p));
  return out;
}

Count sum(const std::vector<Count>& v) { return std::accumulate(v.begin(), v.end(), Count{0}); }

bool non_increasing(const std::vector<Count>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[i - 1]) return false;
  }
  return true;
}

}  // namespace

TEST(Names, RoundTrip) {
  for (auto k : kAllKinds) EXPECT_EQ(parse_scheduler(to_string(k)), k);
  EXPECT_FALSE(parse_scheduler("dynamic"));
  EXPECT_EQ(to_string(kPortfolio[0]), "static");
  EXPECT_EQ(to_string(kPortfolio[11]), "maf");
  EXPECT_THROW(portfolio_index(SchedulerKind::FAC), std::out_of_range);
}

TEST(Threshold, Examples) {
  EXPECT_EQ(apply_chunk_threshold(3, 781, 10000), 781u);
  EXPECT_EQ(apply_chunk_threshold(5000, 781, 10000), 5000u);
  EXPECT_EQ(apply_chunk_threshold(5000, 1, 300), 300u);
}

TEST(Static, Blocks) {
  EXPECT_EQ(static_block_sizes(100, 4), (std::vector<Count>{25, 25, 25, 25}));
  EXPECT_EQ(static_block_sizes(7, 4), (std::vector<Count>{2, 2, 2, 1}));
  const auto big = static_block_sizes(262144, 20);
  for (int k = 0; k < 19; ++k) EXPECT_EQ(big[k], 13108u);
  EXPECT_EQ(big[19], 13092u);
  EXPECT_EQ(drain(SchedulerKind::Static, 262144, 20).size(), 20u);
  EXPECT_EQ(drain(SchedulerKind::AutoLLVM, 7, 4), (std::vector<Count>{2, 2, 2, 1}));
}

TEST(SS, OneIterationPerRound) {
  EXPECT_EQ(drain(SchedulerKind::SS, 1000, 4).size(), 1000u);
  const auto c = drain(SchedulerKind::SS, 1000, 4, 100);
  EXPECT_EQ(c, std::vector<Count>(10, 100));
}

TEST(GSS, Examples) {
  auto s = SchedulerState::init(1000000, 20);
  EXPECT_EQ(gss_chunk(s), 50000u);
  s.remaining = 1;
  EXPECT_EQ(gss_chunk(s), 1u);
  const auto c = drain(SchedulerKind::GSS, 100, 4);
  EXPECT_EQ(sum(c), 100u);
  EXPECT_TRUE(non_increasing(c));
  EXPECT_EQ(c.front(), 25u);
}

TEST(TSS, Parameters) {
  auto s = SchedulerState::init(1000000, 20);
  EXPECT_EQ(s.tss_f, 25000u);
  EXPECT_EQ(s.tss_l, 1u);
  EXPECT_EQ(s.tss_a, 80u);
  EXPECT_DOUBLE_EQ(s.tss_delta, 24999.0 / 79.0);
  EXPECT_EQ(tss_chunk(s), 25000u);
  // second chunk: floor(25000 - 24999/79)
  EXPECT_EQ(tss_chunk(s), static_cast<Count>(std::floor(25000.0 - 24999.0 / 79.0)));
  EXPECT_NEAR(s.tss_prev_chunk, 25000.0 - 24999.0 / 79.0, 1e-9);
}

TEST(TSS, SmallLoop) {
  const auto c = drain(SchedulerKind::TSS, 100, 4);
  EXPECT_EQ(sum(c), 100u);
  EXPECT_TRUE(non_increasing(c));
  EXPECT_EQ(c.front(), 13u);
}

TEST(FAC, ZeroSigmaMatchesGssFirstChunk) {
  auto s = SchedulerState::init(1000, 8);
  EXPECT_EQ(fac_chunk(s, 1.0, 0.0), ceil_div(1000, 8));
  // equal chunks inside a batch
  for (int i = 1; i < 8; ++i) EXPECT_EQ(fac_chunk(s, 1.0, 0.0), 125u);
}

TEST(FAC, BruteForceSequence) {
  // Independent evaluation of the factoring rule for N=100, P=4, mu=1, sigma=1.
  const double p = 4.0;
  double r = 100.0;
  std::vector<Count> expect;
  for (int j = 0; r > 0.0; ++j) {
    const double b = p / (2.0 * std::sqrt(r));
    const double x = j == 0 ? 1.0 + b * b + b * std::sqrt(b * b + 2.0) : 2.0 + b * b + b * std::sqrt(b * b + 4.0);
    const double cs = std::max(1.0, std::ceil(r / (x * p)));
    for (int k = 0; k < 4 && r > 0.0; ++k) {
      const double give = std::min(cs, r);
      expect.push_back(static_cast<Count>(give));
      r -= give;
    }
  }
  auto s = SchedulerState::init(100, 4);
  s.fac_mu = 1.0;
  s.fac_sigma = 1.0;
  std::vector<Count> got;
  while (s.remaining > 0) got.push_back(next_chunk(s, SchedulerKind::FAC, 0));
  EXPECT_EQ(got, expect);
  EXPECT_EQ(sum(got), 100u);
}

TEST(FAC2, Batches) {
  auto s = SchedulerState::init(1000000, 20);
  EXPECT_EQ(fac2_chunk(s), 25000u);
  const auto a = drain(SchedulerKind::FAC2, 10000, 8);
  const auto b = drain(SchedulerKind::MFAC2, 10000, 8);
  EXPECT_EQ(a, b);
  EXPECT_EQ(sum(a), 10000u);
  EXPECT_TRUE(non_increasing(a));
  // Whole batches halve (within one for the ceiling).
  for (std::size_t j = 8; j + 8 <= a.size(); j += 8) {
    EXPECT_LE(a[j], (a[j - 8] + 1) / 2 + 1);
  }
}

TEST(AWF, WeightsFromTimePerIteration) {
  auto s = SchedulerState::init(100, 2);
  awf_update_weights(s, 0, 1, 1.0, AwfVariant::C);
  awf_update_weights(s, 1, 1, 1.0, AwfVariant::C);
  EXPECT_DOUBLE_EQ(s.weights[0], 1.0);
  EXPECT_DOUBLE_EQ(s.weights[1], 1.0);

  auto t = SchedulerState::init(100, 2);
  awf_update_weights(t, 0, 1, 1.0, AwfVariant::C);
  awf_update_weights(t, 1, 1, 3.0, AwfVariant::C);
  EXPECT_DOUBLE_EQ(t.weights[0], 1.5);
  EXPECT_DOUBLE_EQ(t.weights[1], 0.5);
  EXPECT_DOUBLE_EQ(t.weights[0] + t.weights[1], 2.0);
  // per-chunk variant: ceil(w * ceil(R / 2P)) = ceil(1.5 * 25)
  EXPECT_EQ(awf_chunk(t, 0, AwfVariant::C), 38u);
  EXPECT_EQ(awf_chunk(t, 1, AwfVariant::C), 13u);
}

TEST(AWF, UnmeasuredKeepsWeightOne) {
  auto s = SchedulerState::init(100, 3);
  awf_update_weights(s, 0, 2, 1.0, AwfVariant::E);
  awf_update_weights(s, 1, 1, 1.0, AwfVariant::E);
  EXPECT_DOUBLE_EQ(s.weights[2], 1.0);
  EXPECT_NEAR(s.weights[0] + s.weights[1] + s.weights[2], 3.0, 1e-12);
}

TEST(AWF, BatchVariantsRecomputeAtBatchStart) {
  auto s = SchedulerState::init(1000, 2);
  EXPECT_EQ(awf_chunk(s, 0, AwfVariant::B), 250u);
  awf_update_weights(s, 0, 1, 1.0, AwfVariant::B);
  awf_update_weights(s, 1, 1, 3.0, AwfVariant::B);
  EXPECT_DOUBLE_EQ(s.weights[0], 1.0);  // not yet: mid-batch
  EXPECT_EQ(awf_chunk(s, 1, AwfVariant::B), 250u);
  s.remaining = 500;
  EXPECT_EQ(awf_chunk(s, 0, AwfVariant::B), 188u);  // ceil(1.5 * 125)
  EXPECT_DOUBLE_EQ(s.weights[0], 1.5);
}

TEST(AWF, BatchVariantsWithUnitWeightsEqualFac2) {
  for (auto k : {SchedulerKind::AWF_B, SchedulerKind::AWF_D}) {
    EXPECT_EQ(drain(k, 5000, 4), drain(SchedulerKind::FAC2, 5000, 4)) << to_string(k);
  }
}

TEST(AF, HandEvaluated) {
  auto s = SchedulerState::init(100, 2);
  EXPECT_EQ(af_chunk(s, 0), 100u);
  af_record(s, 0, 10, 10.0);
  af_record(s, 1, 10, 20.0);
  EXPECT_DOUBLE_EQ(s.thread_mu[0], 1.0);
  EXPECT_DOUBLE_EQ(s.thread_mu[1], 2.0);
  EXPECT_EQ(af_chunk(s, 0), 67u);
  EXPECT_EQ(af_chunk(s, 1), 34u);
}

TEST(AF, HomogeneousZeroSigmaGivesRoverP) {
  auto s = SchedulerState::init(1000, 4);
  for (Count i = 0; i < 4; ++i) af_record(s, i, 5, 10.0);
  s.remaining = 400;
  EXPECT_EQ(af_chunk(s, 2), 100u);
}

TEST(AF, BootstrapRespectsChunkParam) {
  auto s = SchedulerState::init(1000, 4, 250);
  EXPECT_EQ(af_chunk(s, 0), 250u);
  auto small = SchedulerState::init(30, 4);
  EXPECT_EQ(next_chunk(small, SchedulerKind::MAF, 0), 30u);
}

TEST(ExpChunk, Enumeration) {
  const Count n = 1000000, p = 20;
  std::vector<Count> cand;
  for (Count i = 2;; i *= 2) {
    cand.push_back(std::max<Count>(1, (n + i * p - 1) / (i * p)));
    if (cand.back() == 1) break;
  }
  EXPECT_EQ(cand[0], 25000u);
  EXPECT_EQ(cand[5], 782u);
  const auto idx = static_cast<std::size_t>(std::lround(0.618 * (cand.size() - 1)));
  EXPECT_EQ(exp_chunk(n, p), cand[idx]);
  EXPECT_EQ(exp_chunk(40, 20), 1u);
  for (Count nn : {1u, 10u, 999u, 4096u, 100000u}) {
    EXPECT_LE(exp_chunk(nn, 8), std::max<Count>(1, ceil_div(nn, 16)));
    EXPECT_GE(exp_chunk(nn, 8), 1u);
  }
}

TEST(StaticSteal, Plan) {
  const auto plan = StaticStealPlan::make(10, 3);
  EXPECT_EQ(plan.blocks[0], (std::pair<Count, Count>{0, 4}));
  EXPECT_EQ(plan.blocks[2], (std::pair<Count, Count>{8, 10}));
  EXPECT_EQ(StaticStealPlan::pick_victim({{0, 0}, {3, 5}, {6, 8}}), 1u);
  EXPECT_FALSE(StaticStealPlan::pick_victim({{1, 1}, {4, 4}}));
  EXPECT_EQ(StaticStealPlan::steal_amount(5), 3u);
  auto s = SchedulerState::init(10, 2);
  EXPECT_THROW(next_chunk(s, SchedulerKind::StaticSteal, 0), std::logic_error);
}

TEST(Properties, ConservationAndThreshold) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Count n = 1 + gen() % 20000;
    const Count p = 1 + gen() % 32;
    for (Count cp : {Count{1}, exp_chunk(n, p), Count{1 + gen() % 500}}) {
      for (auto k : kAllKinds) {
        if (k == SchedulerKind::StaticSteal) continue;
        const auto c = drain(k, n, p, cp);
        ASSERT_EQ(sum(c), n) << to_string(k);
        if (k == SchedulerKind::Static || k == SchedulerKind::AutoLLVM) continue;
        for (std::size_t i = 0; i + 1 < c.size(); ++i) ASSERT_GE(c[i], cp) << to_string(k);
      }
      for (auto k : {SchedulerKind::SS, SchedulerKind::GSS, SchedulerKind::TSS, SchedulerKind::FAC2,
                     SchedulerKind::MFAC2}) {
        ASSERT_TRUE(non_increasing(drain(k, n, p, cp))) << to_string(k);
      }
    }
  }
}
