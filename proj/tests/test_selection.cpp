#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "autosched/selection.hpp"

using namespace autosched;

namespace {

// Deterministic environment: each portfolio kind has a fixed loop time and LIB.
struct FixedEnv {
  std::array<double, kPortfolioSize> t_par{};
  std::array<double, kPortfolioSize> lib{};

  LoopRecord record(SchedulerKind k) const {
    LoopRecord r;
    r.t_par = t_par[portfolio_index(k)];
    r.lib_percent = lib[portfolio_index(k)];
    return r;
  }
};

FixedEnv env_with_best(std::size_t best) {
  FixedEnv e;
  for (std::size_t i = 0; i < kPortfolioSize; ++i) {
    e.t_par[i] = 10.0 + static_cast<double>((i * 5) % kPortfolioSize);
    e.lib[i] = 1.0;
  }
  e.t_par[best] = 5.0;
  return e;
}

std::vector<SchedulerKind> drive(ScheduleProvider& p, const FixedEnv& env, Count steps) {
  std::vector<SchedulerKind> out;
  for (Count t = 0; t < steps; ++t) {
    const auto c = p.choose(t);
    out.push_back(c.kind);
    p.observe(t, env.record(c.kind));
  }
  return out;
}

}  // namespace

TEST(QTable, Updates) {
  QTable q;
  sarsa_update(q, 0, 1, -2.0, 1, 2, 0.5, 0.5);
  EXPECT_DOUBLE_EQ(q(0, 1), -1.0);
  QTable z;
  qlearn_update(z, 3, 4, 0.01, 4, 0.5, 0.5);
  EXPECT_DOUBLE_EQ(z(3, 4), 0.005);

  QTable same = q;
  sarsa_update(same, 5, 6, 3.0, 7, 8, 0.0, 0.5);
  EXPECT_EQ(same, q);

  // Fixed point: Q(s,a) = r + gamma Q(s',a') is left unchanged.
  QTable f;
  f(2, 2) = 4.0;
  f(0, 0) = 1.0 + 0.5 * 4.0;
  sarsa_update(f, 0, 0, 1.0, 2, 2, 0.7, 0.5);
  EXPECT_DOUBLE_EQ(f(0, 0), 3.0);
}

TEST(QTable, QlearnEqualsSarsaOnGreedyAction) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 20; ++trial) {
    QTable a;
    for (auto& row : a.values)
      for (auto& v : row) v = u(gen);
    QTable b = a;
    qlearn_update(a, 1, 2, 0.3, 4, 0.5, 0.9);
    sarsa_update(b, 1, 2, 0.3, 4, b.argmax(4), 0.5, 0.9);
    EXPECT_DOUBLE_EQ(a(1, 2), b(1, 2));
  }
}

TEST(QTable, ConvergesToGeometricLimit) {
  QTable q;
  for (int i = 0; i < 2000; ++i) qlearn_update(q, 0, 0, 0.01, 0, 0.5, 0.5);
  EXPECT_NEAR(q(0, 0), 0.01 / (1.0 - 0.5), 1e-12);
}

TEST(QTable, ArgmaxTiesGoLow) {
  QTable q;
  EXPECT_EQ(q.argmax(3), 0u);
  q(3, 5) = 1.0;
  q(3, 7) = 1.0;
  EXPECT_EQ(q.argmax(3), 5u);
}

TEST(QTable, ScalingKeepsArgmax) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(-5, 5);
  QTable q;
  for (auto& row : q.values)
    for (auto& v : row) v = u(gen);
  QTable s = q;
  for (auto& row : s.values)
    for (auto& v : row) v *= 3.25;
  for (std::size_t st = 0; st < kPortfolioSize; ++st) EXPECT_EQ(q.argmax(st), s.argmax(st));
}

TEST(QTable, DumpLoadRoundTrip) {
  QTable q;
  q(0, 0) = 0.1;
  q(11, 3) = -1.0 / 3.0;
  q(5, 7) = 1e-17;
  std::stringstream ss;
  dump_qtable(q, ss);
  EXPECT_EQ(load_qtable(ss), q);
}

TEST(QTable, LoadErrors) {
  std::istringstream short_rows("0,0\n");
  EXPECT_THROW(load_qtable(short_rows), csv::ParseError);
  std::ostringstream os;
  dump_qtable(QTable{}, os);
  std::string text = os.str();
  text.replace(text.find('0'), 1, "x");
  std::istringstream bad(text);
  try {
    load_qtable(bad);
    FAIL();
  } catch (const csv::ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

// Reduced 3-kind portfolio: Q-Learn, and SARSA along greedy-consistent
// trajectories, reach the value-iteration optimum's greedy policy.
TEST(QTable, ThreeKindAgreement) {
  constexpr std::size_t K = 3;
  const double r[K][K] = {{-2.0, 0.01, -4.0}, {-4.0, -2.0, 0.01}, {0.01, -4.0, -2.0}};
  const double gamma = 0.5;

  // Value iteration oracle; next state is the action.
  double v[K] = {0, 0, 0};
  for (int it = 0; it < 500; ++it) {
    double nv[K];
    for (std::size_t s = 0; s < K; ++s) {
      nv[s] = -1e300;
      for (std::size_t a = 0; a < K; ++a) nv[s] = std::max(nv[s], r[s][a] + gamma * v[a]);
    }
    std::copy(nv, nv + K, v);
  }
  std::size_t best[K];
  for (std::size_t s = 0; s < K; ++s) {
    double bv = -1e300;
    for (std::size_t a = 0; a < K; ++a) {
      if (r[s][a] + gamma * v[a] > bv) {
        bv = r[s][a] + gamma * v[a];
        best[s] = a;
      }
    }
  }

  BasicQTable<K> ql, sa;
  for (int sweep = 0; sweep < 400; ++sweep) {
    for (std::size_t s = 0; s < K; ++s) {
      for (std::size_t a = 0; a < K; ++a) {
        qlearn_update(ql, s, a, r[s][a], a, 0.5, gamma);
        sarsa_update(sa, s, a, r[s][a], a, sa.argmax(a), 0.5, gamma);
      }
    }
  }
  for (std::size_t s = 0; s < K; ++s) {
    EXPECT_EQ(ql.argmax(s), best[s]);
    EXPECT_EQ(sa.argmax(s), best[s]);
    for (std::size_t a = 0; a < K; ++a) EXPECT_NEAR(ql(s, a), r[s][a] + gamma * v[a], 1e-9);
  }
}

TEST(Reward, Cases) {
  RewardTracker t{10.0, 20.0};
  auto copy = t;
  EXPECT_EQ(reward(9.0, copy), 0.01);
  copy = t;
  EXPECT_EQ(reward(15.0, copy), -2.0);
  copy = t;
  EXPECT_EQ(reward(25.0, copy), -4.0);
  EXPECT_EQ(*copy.max_x, 25.0);

  RewardTracker fresh;
  EXPECT_EQ(reward(7.0, fresh), -2.0);
  EXPECT_EQ(*fresh.min_x, 7.0);
  EXPECT_EQ(*fresh.max_x, 7.0);
}

TEST(RLConfig, Validation) {
  RLConfig c;
  EXPECT_NO_THROW(c.validate());
  c.alpha = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.r_neutral = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(ExploreFirst, CoversEveryPairOnce) {
  const auto& plan = explore_first_plan();
  std::map<std::pair<std::size_t, std::size_t>, int> pairs;
  std::size_t prev = plan.initial_state;
  for (std::size_t a : plan.actions) {
    ++pairs[{prev, a}];
    prev = a;
  }
  EXPECT_EQ(pairs.size(), kLearningSteps);
  for (const auto& [pair, count] : pairs) EXPECT_EQ(count, 1);
  EXPECT_EQ(prev, plan.initial_state);
}

TEST(ExploreFirst, DeBruijnSmall) {
  EXPECT_EQ(de_bruijn_pairs<3>(), (std::vector<std::size_t>{0, 0, 1, 0, 2, 1, 1, 2, 2}));
}

TEST(RLAgent, LearningPhaseFollowsPlan) {
  RLAgent agent(RLMethod::QLearn, RLConfig{});
  const auto env = env_with_best(4);
  const auto kinds = drive(agent, env, kLearningSteps);
  for (std::size_t i = 0; i < kLearningSteps; ++i) {
    EXPECT_EQ(portfolio_index(kinds[i]), explore_first_plan().actions[i]);
  }
  EXPECT_EQ(agent.phase(), "learning");
  agent.choose(kLearningSteps);
  EXPECT_EQ(agent.phase(), "exploiting");
}

TEST(RLAgent, QlearnFindsFastestKind) {
  for (std::size_t best = 0; best < kPortfolioSize; ++best) {
    RLAgent agent(RLMethod::QLearn, RLConfig{});
    const auto kinds = drive(agent, env_with_best(best), kLearningSteps + 20);
    EXPECT_EQ(kinds[kLearningSteps], kPortfolio[best]) << best;
  }
}

TEST(RLAgent, AlphaDecaysAfterLearning) {
  RLAgent agent(RLMethod::Sarsa, RLConfig{});
  const auto env = env_with_best(2);
  drive(agent, env, kLearningSteps);
  EXPECT_EQ(agent.alpha(), 0.5);
  drive(agent, env, 10);
  EXPECT_EQ(agent.alpha(), 0.0);
}

TEST(RLAgent, WarmStartSkipsLearning) {
  RLAgent cold(RLMethod::QLearn, RLConfig{});
  const auto env = env_with_best(6);
  const auto kinds = drive(cold, env, kLearningSteps + 1);
  std::stringstream ss;
  dump_qtable(cold.qtable(), ss);
  RLAgent warm(RLMethod::QLearn, RLConfig{}, 1, load_qtable(ss));
  EXPECT_FALSE(warm.learning());
  EXPECT_EQ(warm.choose(0).kind, kPortfolio[cold.qtable().argmax(explore_first_plan().initial_state)]);
  EXPECT_EQ(kinds.back(), kPortfolio[6]);
}

TEST(RandomSel, Probabilities) {
  std::mt19937_64 gen(1);
  for (int i = 0; i < 10000; ++i) {
    const auto s = randomsel_step(SchedulerKind::GSS, 15.0, gen);
    ASSERT_TRUE(s.jumped);
    ASSERT_NE(s.kind, SchedulerKind::GSS);
  }
  for (int i = 0; i < 1000; ++i) ASSERT_FALSE(randomsel_step(SchedulerKind::GSS, 0.0, gen).jumped);
  int jumps = 0;
  for (int i = 0; i < 10000; ++i) jumps += randomsel_step(SchedulerKind::Static, 5.0, gen).jumped;
  EXPECT_NEAR(jumps / 10000.0, 0.5, 0.02);
}

TEST(RandomSel, JumpTargetsUniform) {
  std::mt19937_64 gen(2);
  std::map<SchedulerKind, int> hits;
  for (int i = 0; i < 22000; ++i) ++hits[randomsel_step(SchedulerKind::Static, 50.0, gen).kind];
  EXPECT_EQ(hits.size(), kPortfolioSize - 1);
  for (const auto& [k, n] : hits) EXPECT_NEAR(n, 2000, 200) << to_string(k);
}

TEST(RandomSel, StartsStatic) {
  RandomSel r(5);
  EXPECT_EQ(r.choose(0).kind, SchedulerKind::Static);
}

TEST(ExhaustiveSel, TrialThenArgmin) {
  ExhaustiveSel sel;
  const auto kinds = drive(sel, env_with_best(3), 500);
  for (std::size_t i = 0; i < kPortfolioSize; ++i) EXPECT_EQ(kinds[i], kPortfolio[i]);
  for (std::size_t i = kPortfolioSize; i < kinds.size(); ++i) ASSERT_EQ(kinds[i], kPortfolio[3]);
  EXPECT_EQ(sel.retriggers(), 0u);
  const auto& tt = sel.trial_times();
  EXPECT_EQ(sel.chosen(), kPortfolio[std::min_element(tt.begin(), tt.end()) - tt.begin()]);
}

TEST(ExhaustiveSel, RetriggersOnShift) {
  ExhaustiveSel sel;
  const auto before = env_with_best(3);
  auto after = before;
  for (auto& l : after.lib) l = 40.0;
  after.t_par[7] = 1.0;
  std::vector<SchedulerKind> kinds = drive(sel, before, 50);
  const auto more = drive(sel, after, 50);
  kinds.insert(kinds.end(), more.begin(), more.end());
  EXPECT_GE(sel.retriggers(), 1u);
  // A second block of 12 distinct kinds follows the shift.
  std::set<SchedulerKind> block(kinds.begin() + 51, kinds.begin() + 63);
  EXPECT_EQ(block.size(), kPortfolioSize);
  EXPECT_EQ(kinds[51], kPortfolio[0]);
}

TEST(Fuzzy, InitialClass) {
  EXPECT_EQ(expert_initial_class(1.0, 2.0), ExpertClass::StaticLike);
  EXPECT_EQ(expert_initial_class(1.0, 20.0), ExpertClass::NonAdaptive);
  EXPECT_EQ(expert_initial_class(1.0, 45.0), ExpertClass::Adaptive);
  // pivots at 10 and 30
  EXPECT_EQ(expert_initial_class(1.0, 9.0), ExpertClass::StaticLike);
  EXPECT_EQ(expert_initial_class(1.0, 11.0), ExpertClass::NonAdaptive);
  EXPECT_EQ(expert_initial_class(1.0, 31.0), ExpertClass::Adaptive);
}

TEST(Fuzzy, DeltaRules) {
  using C = ExpertClass;
  EXPECT_EQ(expert_delta_class(C::StaticLike, C::StaticLike, 0.0, 2.0, 0.0), C::StaticLike);
  EXPECT_EQ(expert_delta_class(C::StaticLike, C::StaticLike, 0.0, 50.0, 0.0), C::Adaptive);
  EXPECT_EQ(expert_delta_class(C::NonAdaptive, C::StaticLike, 30.0, 2.0, 0.0), C::StaticLike);
  EXPECT_EQ(expert_delta_class(C::StaticLike, C::StaticLike, -20.0, 20.0, 0.0), C::NonAdaptive);
}

TEST(ExpertSel, StepsThroughClasses) {
  ExpertSel sel;
  EXPECT_EQ(sel.choose(0).kind, SchedulerKind::Static);
  LoopRecord r;
  r.t_par = 10.0;
  r.lib_percent = 50.0;
  sel.observe(0, r);
  EXPECT_EQ(sel.choose(1).kind, SchedulerKind::MAF);
  r.lib_percent = 2.0;
  r.t_par = 8.0;
  sel.observe(1, r);
  EXPECT_EQ(sel.choose(2).kind, SchedulerKind::MAF);

  ExpertSel low(ExpertMembers{SchedulerKind::StaticSteal, SchedulerKind::GSS, SchedulerKind::AWF_C});
  r.lib_percent = 1.0;
  low.observe(0, r);
  EXPECT_EQ(low.choose(1).kind, SchedulerKind::StaticSteal);
}

TEST(Oracle, PicksPerStepMinimum) {
  const Workload w(400, 4, [](Count t, Count i) { return t % 2 ? 1.0 + (i < 50 ? 20.0 : 0.0) : 1.0; });
  const auto sys = SystemModel::homogeneous(4, 0.5);
  const auto o = oracle_select(w, sys, kPortfolio, ChunkMode::Default, 0);
  ASSERT_EQ(o.choices.size(), 4u);
  double total = 0.0;
  for (Count t = 0; t < 4; ++t) {
    double best = 1e300;
    for (auto k : kPortfolio) best = std::min(best, simulate_loop(w, t, sys, SimConfig{k, 1}, 0).t_par);
    EXPECT_EQ(o.t_par[t], best);
    total += best;
  }
  EXPECT_EQ(o.total, total);
  EXPECT_EQ(o.choices[0].kind, SchedulerKind::Static);
}

TEST(Oracle, SingleKindPortfolio) {
  const Workload w(100, 3, [](Count, Count i) { return 1.0 + i % 3; });
  const auto sys = SystemModel::homogeneous(4, 0.1);
  const std::array<SchedulerKind, 1> only{SchedulerKind::TSS};
  const auto o = oracle_select(w, sys, only, ChunkMode::Default, 0);
  ConstantProvider prov({SchedulerKind::TSS, 1});
  double total = 0.0;
  for (const auto& r : run_timesteps(w, sys, prov, 0)) total += r.t_par;
  EXPECT_EQ(o.total, total);
}

TEST(Oracle, BaselineEqualsSelectWithoutNoise) {
  const Workload w(200, 3, [](Count, Count i) { return 1.0 + i % 5; });
  const auto sys = SystemModel::homogeneous(4, 0.1);
  EXPECT_EQ(oracle_baseline(w, sys, kPortfolio, ChunkMode::ExpChunk, 2).total,
            oracle_select(w, sys, kPortfolio, ChunkMode::ExpChunk, 2).total);
}
