#pragma once

// Automated scheduling-algorithm selection. Every method is a
// ScheduleProvider invoked once before each loop instance; it observes the
// finished instance and picks the (kind, chunk parameter) for the next one.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "autosched/core.hpp"
#include "autosched/csv.hpp"
#include "autosched/schedulers.hpp"
#include "autosched/simulator.hpp"

namespace autosched {

// ---------------------------------------------------------------------------
// Q-tables and update rules

/// State -> action values over a K-kind portfolio; state is the kind used in
/// the previous loop instance, action the kind for the next one.
template <std::size_t K>
struct BasicQTable {
  std::array<std::array<double, K>, K> values{};

  double& operator()(std::size_t s, std::size_t a) { return values.at(s).at(a); }
  double operator()(std::size_t s, std::size_t a) const { return values.at(s).at(a); }

  /// Greedy action; ties go to the lowest index.
  std::size_t argmax(std::size_t s) const {
    const auto& row = values.at(s);
    return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }

  double max(std::size_t s) const {
    const auto& row = values.at(s);
    return *std::max_element(row.begin(), row.end());
  }

  bool operator==(const BasicQTable&) const = default;
};

using QTable = BasicQTable<kPortfolioSize>;

/// Q(s,a) += alpha * (r + gamma * Q(s',a') - Q(s,a))
template <std::size_t K>
void sarsa_update(BasicQTable<K>& q, std::size_t s, std::size_t a, double r, std::size_t s_next,
                  std::size_t a_next, double alpha, double gamma) {
  q(s, a) += alpha * (r + gamma * q(s_next, a_next) - q(s, a));
}

/// Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a))
template <std::size_t K>
void qlearn_update(BasicQTable<K>& q, std::size_t s, std::size_t a, double r, std::size_t s_next,
                   double alpha, double gamma) {
  q(s, a) += alpha * (r + gamma * q.max(s_next) - q(s, a));
}

inline void dump_qtable(const QTable& q, std::ostream& os) {
  for (std::size_t s = 0; s < kPortfolioSize; ++s) {
    for (std::size_t a = 0; a < kPortfolioSize; ++a) {
      if (a) os << ',';
      os << csv::format(q(s, a));
    }
    os << '\n';
  }
}

inline void dump_qtable(const QTable& q, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  dump_qtable(q, out);
}

inline QTable load_qtable(std::istream& in) {
  QTable q;
  std::string line;
  std::size_t row = 0;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    if (row == kPortfolioSize) throw csv::ParseError(lineno, "more than 12 rows");
    const auto fields = csv::split(line);
    if (fields.size() != kPortfolioSize) {
      throw csv::ParseError(lineno, "expected 12 columns, got " + std::to_string(fields.size()));
    }
    for (std::size_t a = 0; a < kPortfolioSize; ++a) {
      auto v = csv::parse_double(fields[a]);
      if (!v || !std::isfinite(*v)) {
        throw csv::ParseError(lineno, "malformed value '" + std::string(fields[a]) + "'");
      }
      q(row, a) = *v;
    }
    ++row;
  }
  if (row != kPortfolioSize) {
    throw csv::ParseError(lineno + 1, "expected 12 rows, got " + std::to_string(row));
  }
  return q;
}

inline QTable load_qtable(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open Q-table '" + path + "'");
  return load_qtable(in);
}

// ---------------------------------------------------------------------------
// Rewards

enum class RewardKind : std::uint8_t { LT, LIB };

constexpr std::string_view to_string(RewardKind k) noexcept { return k == RewardKind::LT ? "lt" : "lib"; }

inline std::optional<RewardKind> parse_reward_kind(std::string_view s) noexcept {
  if (s == "lt") return RewardKind::LT;
  if (s == "lib") return RewardKind::LIB;
  return std::nullopt;
}

struct RLConfig {
  double alpha = 0.5;
  double gamma = 0.5;
  double alpha_decay = 0.05;
  RewardKind reward_kind = RewardKind::LT;
  double r_pos = 0.01;
  double r_neutral = -2.0;
  double r_neg = -4.0;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in [0, 1]");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in [0, 1]");
    if (!(alpha_decay >= 0.0)) throw std::invalid_argument("alpha_decay must be >= 0");
    if (!(r_pos > r_neutral && r_neutral > r_neg)) {
      throw std::invalid_argument("rewards must satisfy r_pos > r_neutral > r_neg");
    }
  }

  bool operator==(const RLConfig&) const = default;
};

/// Running extremes of the reward input across all loop instances seen.
struct RewardTracker {
  std::optional<double> min_x;
  std::optional<double> max_x;
};

/// Positive at or below the running minimum, negative at or above the running
/// maximum, neutral in between. The first observation is neutral and seeds
/// both bounds.
inline double reward(double x, RewardTracker& tracker, const RLConfig& cfg = {}) {
  double r = cfg.r_neutral;
  if (tracker.min_x && tracker.max_x) {
    if (x <= *tracker.min_x) {
      r = cfg.r_pos;
    } else if (x >= *tracker.max_x) {
      r = cfg.r_neg;
    }
    tracker.min_x = std::min(*tracker.min_x, x);
    tracker.max_x = std::max(*tracker.max_x, x);
  } else {
    tracker.min_x = x;
    tracker.max_x = x;
  }
  return r;
}

inline double reward_input(RewardKind kind, const LoopRecord& rec) {
  return kind == RewardKind::LT ? rec.t_par : rec.lib_percent;
}

// ---------------------------------------------------------------------------
// Explore-first

inline constexpr std::size_t kLearningSteps = kPortfolioSize * kPortfolioSize;

/// Visiting order covering every ordered (state, action) pair exactly once.
/// `actions` is a de Bruijn sequence of order 2 over the portfolio indices;
/// the state before the first action is the sequence's last element, so the
/// walk closes on itself and ends in `initial_state`.
struct ExploreFirstPlan {
  std::size_t initial_state = 0;
  std::array<std::size_t, kLearningSteps> actions{};
};

template <std::size_t K = kPortfolioSize>
std::vector<std::size_t> de_bruijn_pairs() {
  std::vector<std::size_t> seq;
  seq.reserve(K * K);
  for (std::size_t a = 0; a < K; ++a) {
    seq.push_back(a);
    for (std::size_t b = a + 1; b < K; ++b) {
      seq.push_back(a);
      seq.push_back(b);
    }
  }
  return seq;
}

inline const ExploreFirstPlan& explore_first_plan() {
  static const ExploreFirstPlan plan = [] {
    ExploreFirstPlan p;
    const auto seq = de_bruijn_pairs<kPortfolioSize>();
    std::copy(seq.begin(), seq.end(), p.actions.begin());
    p.initial_state = seq.back();
    return p;
  }();
  return plan;
}

// ---------------------------------------------------------------------------
// RL agents

enum class RLMethod : std::uint8_t { QLearn, Sarsa };

/// Q-Learn / SARSA agent with the explore-first policy. Time-steps 0..143
/// walk the explore-first plan; afterwards the agent acts greedily and decays
/// alpha after every step. A warm-start table skips the learning phase.
class RLAgent final : public ScheduleProvider {
 public:
  RLAgent(RLMethod method, RLConfig cfg, Count chunk_param = 1,
          std::optional<QTable> warm_start = std::nullopt)
      : method_(method), cfg_(cfg), chunk_param_(chunk_param), alpha_(cfg.alpha),
        state_(explore_first_plan().initial_state), learning_(!warm_start) {
    cfg_.validate();
    if (warm_start) q_ = *warm_start;
  }

  ScheduleChoice choose(Count timestep) override {
    if (learning_ && step_ >= kLearningSteps) {
      learning_ = false;
    }
    const std::size_t action = learning_ ? explore_first_plan().actions[step_] : q_.argmax(state_);
    if (pending_) {
      sarsa_update(q_, pending_->s, pending_->a, pending_->r, pending_->a, action, pending_->alpha,
                   cfg_.gamma);
      pending_.reset();
    }
    (void)timestep;
    action_ = action;
    return {kPortfolio[action], chunk_param_};
  }

  void observe(Count, const LoopRecord& rec) override {
    // The very first observation only seeds the reward bounds: its neutral
    // reward carries no information and would otherwise be the sole update
    // the (initial state, first action) pair receives while learning.
    const bool seeding = !tracker_.min_x;
    const double r = reward(reward_input(cfg_.reward_kind, rec), tracker_, cfg_);
    if (!seeding) {
      if (method_ == RLMethod::QLearn) {
        qlearn_update(q_, state_, action_, r, action_, alpha_, cfg_.gamma);
      } else {
        pending_ = Pending{state_, action_, r, alpha_};
      }
    }
    state_ = action_;
    ++step_;
    if (!learning_) {
      ++exploit_steps_;
      alpha_ = std::max(0.0, cfg_.alpha - cfg_.alpha_decay * static_cast<double>(exploit_steps_));
    }
  }

  std::string_view phase() const override { return learning_ ? "learning" : "exploiting"; }

  const QTable& qtable() const noexcept { return q_; }
  double alpha() const noexcept { return alpha_; }
  bool learning() const noexcept { return learning_; }
  std::size_t state() const noexcept { return state_; }

 private:
  struct Pending {
    std::size_t s;
    std::size_t a;
    double r;
    double alpha;
  };

  RLMethod method_;
  RLConfig cfg_;
  Count chunk_param_;
  double alpha_;
  QTable q_{};
  RewardTracker tracker_;
  std::size_t state_;
  std::size_t action_ = 0;
  std::size_t step_ = 0;
  std::size_t exploit_steps_ = 0;
  bool learning_;
  std::optional<Pending> pending_;
};

// ---------------------------------------------------------------------------
// RandomSel

struct RandomSelStep {
  SchedulerKind kind;
  bool jumped;
};

/// Jump probability LIB/10 (LIB in percent, saturating at 1). On a jump the
/// new kind is drawn uniformly from the other eleven portfolio members.
template <class Rng>
RandomSelStep randomsel_step(SchedulerKind current, double lib_pct, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double p_jump = lib_pct / 10.0;
  if (!(p_jump > unit(rng))) {
    return {current, false};
  }
  std::uniform_int_distribution<std::size_t> pick(0, kPortfolioSize - 2);
  std::size_t idx = pick(rng);
  if (idx >= portfolio_index(current)) ++idx;
  return {kPortfolio[idx], true};
}

class RandomSel final : public ScheduleProvider {
 public:
  RandomSel(std::uint64_t seed, Count chunk_param = 1) : rng_(seed), chunk_param_(chunk_param) {}

  ScheduleChoice choose(Count) override { return {current_, chunk_param_}; }

  void observe(Count, const LoopRecord& rec) override {
    const auto step = randomsel_step(current_, rec.lib_percent, rng_);
    current_ = step.kind;
    jumps_ += step.jumped ? 1 : 0;
  }

  Count jumps() const noexcept { return jumps_; }

 private:
  std::mt19937_64 rng_;
  Count chunk_param_;
  SchedulerKind current_ = SchedulerKind::Static;
  Count jumps_ = 0;
};

// ---------------------------------------------------------------------------
// ExhaustiveSel

/// Try every portfolio kind once, keep the fastest. While stable, a step
/// whose LIB exceeds the running mean LIB by more than 10 points, or whose
/// loop time exceeds the running mean time by more than 10%, restarts the
/// trial.
class ExhaustiveSel final : public ScheduleProvider {
 public:
  static constexpr double kLibMarginPoints = 10.0;
  static constexpr double kTimeMargin = 0.10;

  explicit ExhaustiveSel(Count chunk_param = 1) : chunk_param_(chunk_param) {}

  ScheduleChoice choose(Count) override {
    return {trial_ ? kPortfolio[trial_index_] : chosen_, chunk_param_};
  }

  void observe(Count, const LoopRecord& rec) override {
    if (trial_) {
      trial_time_[trial_index_] = rec.t_par;
      trial_lib_[trial_index_] = rec.lib_percent;
      if (++trial_index_ == kPortfolioSize) {
        const auto best = static_cast<std::size_t>(
            std::min_element(trial_time_.begin(), trial_time_.end()) - trial_time_.begin());
        chosen_ = kPortfolio[best];
        trial_ = false;
        mean_time_ = trial_time_[best];
        mean_lib_ = trial_lib_[best];
        stable_count_ = 1;
      }
      return;
    }
    if (rec.lib_percent > mean_lib_ + kLibMarginPoints || rec.t_par > mean_time_ * (1.0 + kTimeMargin)) {
      trial_ = true;
      trial_index_ = 0;
      ++retriggers_;
      return;
    }
    ++stable_count_;
    const double c = static_cast<double>(stable_count_);
    mean_time_ += (rec.t_par - mean_time_) / c;
    mean_lib_ += (rec.lib_percent - mean_lib_) / c;
  }

  std::string_view phase() const override { return trial_ ? "trial" : "stable"; }

  SchedulerKind chosen() const noexcept { return chosen_; }
  Count retriggers() const noexcept { return retriggers_; }
  const std::array<double, kPortfolioSize>& trial_times() const noexcept { return trial_time_; }

 private:
  Count chunk_param_;
  bool trial_ = true;
  std::size_t trial_index_ = 0;
  std::array<double, kPortfolioSize> trial_time_{};
  std::array<double, kPortfolioSize> trial_lib_{};
  SchedulerKind chosen_ = SchedulerKind::Static;
  double mean_time_ = 0.0;
  double mean_lib_ = 0.0;
  Count stable_count_ = 0;
  Count retriggers_ = 0;
};

// ---------------------------------------------------------------------------
// ExpertSel

/// Scheduler families the fuzzy systems choose between, in increasing order
/// of dynamism. Defuzzification works on this axis.
enum class ExpertClass : std::uint8_t { StaticLike = 0, NonAdaptive = 1, Adaptive = 2 };

namespace fuzzy {

/// Trapezoid with feet a, d and shoulders b, c. Infinite a/b or c/d give open shoulders.
inline double trapezoid(double x, double a, double b, double c, double d) {
  if (x < b) {
    if (!std::isfinite(a)) return 1.0;
    return x <= a ? 0.0 : (x - a) / (b - a);
  }
  if (x <= c) return 1.0;
  if (!std::isfinite(d)) return 1.0;
  return x >= d ? 0.0 : (d - x) / (d - c);
}

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// LIB in percent: Low below 10, Moderate 10..30, High from 30.
inline double lib_low(double lib) { return trapezoid(lib, -kInf, -kInf, 5.0, 15.0); }
inline double lib_moderate(double lib) { return trapezoid(lib, 5.0, 15.0, 25.0, 35.0); }
inline double lib_high(double lib) { return trapezoid(lib, 25.0, 35.0, kInf, kInf); }

// Relative change of loop time in percent: Improved below -5, Same within
// +-5, Worse above +5.
inline double dt_improved(double d) { return trapezoid(d, -kInf, -kInf, -10.0, 0.0); }
inline double dt_same(double d) { return trapezoid(d, -10.0, 0.0, 0.0, 10.0); }
inline double dt_worse(double d) { return trapezoid(d, 0.0, 10.0, kInf, kInf); }

// Change of LIB in percentage points.
inline double dlib_rising(double d) { return trapezoid(d, 0.0, 10.0, kInf, kInf); }

struct Rule {
  double strength;
  double target;
};

/// Weighted centroid of the rule targets, rounded to the nearest class.
inline ExpertClass defuzzify(std::span<const Rule> rules, ExpertClass fallback) {
  double w = 0.0;
  double m = 0.0;
  for (const auto& r : rules) {
    w += r.strength;
    m += r.strength * r.target;
  }
  if (w <= 0.0) return fallback;
  const long c = std::lround(m / w);
  return static_cast<ExpertClass>(std::clamp(c, 0L, 2L));
}

}  // namespace fuzzy

/// Initial system: absolute measurements of the first (STATIC) instance.
/// Loop time has no absolute scale, so only LIB drives the class.
inline ExpertClass expert_initial_class(double /*t_par*/, double lib_pct) {
  const std::array<fuzzy::Rule, 3> rules{{
      {fuzzy::lib_low(lib_pct), 0.0},
      {fuzzy::lib_moderate(lib_pct), 1.0},
      {fuzzy::lib_high(lib_pct), 2.0},
  }};
  return fuzzy::defuzzify(rules, ExpertClass::StaticLike);
}

/// Delta system: reacts to how the last change played out.
///   LIB Low and time not worse         -> stay
///   time worse                         -> return to the previous class
///   (LIB Moderate or LIB rising) and time not worse -> one step more dynamic
///   LIB High                           -> adaptive
inline ExpertClass expert_delta_class(ExpertClass current, ExpertClass previous, double dt_pct,
                                      double lib_pct, double dlib_pts) {
  using namespace fuzzy;
  const double cur = static_cast<double>(current);
  const double up = std::min(2.0, cur + 1.0);
  const double not_worse = 1.0 - dt_worse(dt_pct);
  const std::array<Rule, 4> rules{{
      {std::min(lib_low(lib_pct), not_worse), cur},
      {dt_worse(dt_pct), static_cast<double>(previous)},
      {std::min(std::max(lib_moderate(lib_pct), dlib_rising(dlib_pts)), not_worse), up},
      {lib_high(lib_pct), 2.0},
  }};
  return defuzzify(rules, current);
}

struct ExpertMembers {
  SchedulerKind static_like = SchedulerKind::Static;
  SchedulerKind non_adaptive = SchedulerKind::MFAC2;
  SchedulerKind adaptive = SchedulerKind::MAF;

  SchedulerKind of(ExpertClass c) const {
    switch (c) {
      case ExpertClass::StaticLike: return static_like;
      case ExpertClass::NonAdaptive: return non_adaptive;
      case ExpertClass::Adaptive: return adaptive;
    }
    return static_like;
  }

  bool operator==(const ExpertMembers&) const = default;
};

class ExpertSel final : public ScheduleProvider {
 public:
  explicit ExpertSel(ExpertMembers members = {}, Count chunk_param = 1)
      : members_(members), chunk_param_(chunk_param) {}

  ScheduleChoice choose(Count) override {
    if (step_ == 0) return {SchedulerKind::Static, chunk_param_};
    return {members_.of(current_), chunk_param_};
  }

  void observe(Count, const LoopRecord& rec) override {
    const ExpertClass used = step_ == 0 ? ExpertClass::StaticLike : current_;
    ExpertClass next = used;
    if (step_ == 0) {
      next = expert_initial_class(rec.t_par, rec.lib_percent);
    } else {
      const double dt = last_t_par_ > 0.0 ? (rec.t_par - last_t_par_) / last_t_par_ * 100.0 : 0.0;
      next = expert_delta_class(used, previous_, dt, rec.lib_percent, rec.lib_percent - last_lib_);
    }
    previous_ = used;
    current_ = next;
    last_t_par_ = rec.t_par;
    last_lib_ = rec.lib_percent;
    ++step_;
  }

  ExpertClass current_class() const noexcept { return current_; }

 private:
  ExpertMembers members_;
  Count chunk_param_;
  Count step_ = 0;
  ExpertClass current_ = ExpertClass::StaticLike;
  ExpertClass previous_ = ExpertClass::StaticLike;
  double last_t_par_ = 0.0;
  double last_lib_ = 0.0;
};

// ---------------------------------------------------------------------------
// Oracle

struct OracleResult {
  std::vector<ScheduleChoice> choices;
  std::vector<Time> t_par;
  Time total = 0.0;
};

/// Per time-step exhaustive best over `portfolio` on identical seeds.
inline OracleResult oracle_select(const Workload& workload, const SystemModel& system,
                                  std::span<const SchedulerKind> portfolio, ChunkMode mode,
                                  std::uint64_t seed) {
  if (portfolio.empty()) throw std::invalid_argument("oracle: empty portfolio");
  const Count cp = chunk_param_for(mode, workload.n_iterations(), system.p);
  OracleResult out;
  for (Count t = 0; t < workload.n_timesteps(); ++t) {
    const CostPrefix costs(workload, t);
    ScheduleChoice best{portfolio.front(), cp};
    Time best_time = std::numeric_limits<Time>::infinity();
    for (SchedulerKind k : portfolio) {
      const Time tp = simulate_loop(costs, t, system, SimConfig{k, cp, false}, seed).t_par;
      if (tp < best_time) {
        best_time = tp;
        best = {k, cp};
      }
    }
    out.choices.push_back(best);
    out.t_par.push_back(best_time);
    out.total += best_time;
  }
  return out;
}

/// Replays a fixed per-time-step plan.
class ReplayProvider final : public ScheduleProvider {
 public:
  explicit ReplayProvider(std::vector<ScheduleChoice> plan) : plan_(std::move(plan)) {}

  ScheduleChoice choose(Count timestep) override { return plan_.at(timestep); }
  void observe(Count, const LoopRecord&) override {}

 private:
  std::vector<ScheduleChoice> plan_;
};

/// Oracle baseline for a possibly noisy system: the per-step choices come
/// from the noise-free system (the oracle does not see system variability),
/// and are then replayed on the actual system and seed. Without noise this
/// equals oracle_select.
inline OracleResult oracle_baseline(const Workload& workload, const SystemModel& system,
                                    std::span<const SchedulerKind> portfolio, ChunkMode mode,
                                    std::uint64_t seed) {
  if (system.noise_sigma == 0.0) {
    return oracle_select(workload, system, portfolio, mode, seed);
  }
  SystemModel quiet = system;
  quiet.noise_sigma = 0.0;
  OracleResult out = oracle_select(workload, quiet, portfolio, mode, seed);
  out.total = 0.0;
  for (Count t = 0; t < workload.n_timesteps(); ++t) {
    const auto& c = out.choices[t];
    out.t_par[t] = simulate_loop(workload, t, system, SimConfig{c.kind, c.chunk_param, false}, seed).t_par;
    out.total += out.t_par[t];
  }
  return out;
}

}  // namespace autosched
