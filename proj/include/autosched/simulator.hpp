#pragma once

// Discrete-event execution of one loop instance.
//
// Threads become available at their start offsets. The earliest available
// thread (lowest id on ties) performs a scheduling round costing h, receives
// a chunk and executes it; chunk time is the summed iteration cost scaled by
// the thread's speed factor and a log-normal noise factor keyed by
// (system seed, seed, time-step, thread, round). The loop ends when no
// iterations remain and every in-flight chunk has finished.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <ostream>
#include <queue>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "autosched/core.hpp"
#include "autosched/csv.hpp"
#include "autosched/rng.hpp"
#include "autosched/schedulers.hpp"

namespace autosched {

struct SimConfig {
  SchedulerKind scheduler = SchedulerKind::Static;
  Count chunk_param = 1;
  bool record_chunks = false;
};

/// Prefix sums of one time-step's iteration costs; chunk cost is a difference.
class CostPrefix {
 public:
  CostPrefix(const Workload& w, Count timestep) : prefix_(w.n_iterations() + 1, 0.0) {
    if (timestep >= w.n_timesteps()) throw std::out_of_range("timestep out of range");
    double sum = 0.0;
    double sum_sq = 0.0;
    for (Count i = 0; i < w.n_iterations(); ++i) {
      const double c = w.cost_of(timestep, i);
      sum += c;
      sum_sq += c * c;
      prefix_[i + 1] = sum;
    }
    const double n = static_cast<double>(w.n_iterations());
    mean_ = sum / n;
    stddev_ = n > 1 ? std::sqrt(std::max(0.0, (sum_sq - n * mean_ * mean_) / (n - 1.0))) : 0.0;
  }

  Count n() const noexcept { return prefix_.size() - 1; }
  double range(Count begin, Count end) const { return prefix_[end] - prefix_[begin]; }
  double mean() const noexcept { return mean_; }
  double stddev() const noexcept { return stddev_; }

 private:
  std::vector<double> prefix_;
  double mean_ = 0.0;
  double stddev_ = 0.0;
};

namespace detail {

struct Ready {
  Time at;
  Count thread;
  bool operator>(const Ready& o) const noexcept {
    return at != o.at ? at > o.at : thread > o.thread;
  }
};

using ReadyQueue = std::priority_queue<Ready, std::vector<Ready>, std::greater<>>;

class LoopRun {
 public:
  LoopRun(const CostPrefix& costs, Count timestep, const SystemModel& sys, const SimConfig& cfg,
          std::uint64_t seed)
      : costs_(costs), timestep_(timestep), sys_(sys), cfg_(cfg), seed_(seed),
        rounds_(sys.p, 0) {
    rec_.finish.assign(sys.p, 0.0);
  }

  /// Execute [start, start + size) on `thread` beginning at `begin`.
  Time execute(Count thread, Count start, Count size, Time request, Time begin) {
    const double noise = rng::lognormal_factor(
        rng::mix({sys_.seed, seed_, timestep_, thread, rounds_[thread]}), sys_.noise_sigma);
    ++rounds_[thread];
    const Time compute = costs_.range(start, start + size) * sys_.speed[thread] * noise;
    const Time end = begin + compute;
    last_compute_ = compute;
    if (cfg_.record_chunks) {
      rec_.assignments.push_back({thread, start, size, request, end});
    }
    return end;
  }

  Time last_compute() const noexcept { return last_compute_; }

  LoopRecord finish(Count n_rounds, Count n_steals) && {
    rec_.t_par = *std::max_element(rec_.finish.begin(), rec_.finish.end());
    rec_.lib_percent = lib_percent(rec_.finish);
    rec_.n_rounds = n_rounds;
    rec_.n_steals = n_steals;
    return std::move(rec_);
  }

  std::vector<Time>& finish_times() noexcept { return rec_.finish; }

 private:
  const CostPrefix& costs_;
  Count timestep_;
  const SystemModel& sys_;
  const SimConfig& cfg_;
  std::uint64_t seed_;
  std::vector<Count> rounds_;
  Time last_compute_ = 0.0;
  LoopRecord rec_;
};

inline LoopRecord run_static(LoopRun run, const CostPrefix& costs, const SystemModel& sys) {
  Count rounds = 0;
  Count begin = 0;
  const auto sizes = static_block_sizes(costs.n(), sys.p);
  for (Count k = 0; k < sys.p; ++k) {
    const Time arrive = sys.start_offset[k];
    if (sizes[k] == 0) {
      run.finish_times()[k] = arrive;
      continue;
    }
    ++rounds;
    run.finish_times()[k] = run.execute(k, begin, sizes[k], arrive, arrive + sys.h);
    begin += sizes[k];
  }
  return std::move(run).finish(rounds, 0);
}

inline LoopRecord run_static_steal(LoopRun run, const CostPrefix& costs, const SystemModel& sys,
                                   const SimConfig& cfg) {
  auto ranges = StaticStealPlan::make(costs.n(), sys.p).blocks;
  const Count grain = std::max<Count>(1, cfg.chunk_param);
  std::vector<bool> started(sys.p, false);
  Count rounds = 0;
  Count steals = 0;

  ReadyQueue ready;
  for (Count k = 0; k < sys.p; ++k) ready.push({sys.start_offset[k], k});
  while (!ready.empty()) {
    const auto [now, k] = ready.top();
    ready.pop();
    Time t = now;
    auto& own = ranges[k];
    if (own.first == own.second) {
      auto victim = StaticStealPlan::pick_victim(ranges);
      if (!victim) {
        run.finish_times()[k] = now;
        continue;
      }
      auto& v = ranges[*victim];
      const Count take = StaticStealPlan::steal_amount(v.second - v.first);
      own = {v.second - take, v.second};
      v.second -= take;
      ++steals;
      ++rounds;
      t += sys.h;
    } else if (!started[k]) {
      ++rounds;
      t += sys.h;
    }
    started[k] = true;
    const Count size = std::min(grain, own.second - own.first);
    const Time end = run.execute(k, own.first, size, now, t);
    own.first += size;
    ready.push({end, k});
  }
  return std::move(run).finish(rounds, steals);
}

inline LoopRecord run_dynamic(LoopRun run, const CostPrefix& costs, const SystemModel& sys,
                              const SimConfig& cfg) {
  auto state = SchedulerState::init(costs.n(), sys.p, cfg.chunk_param);
  if (cfg.scheduler == SchedulerKind::FAC) {
    double mean_speed = std::accumulate(sys.speed.begin(), sys.speed.end(), 0.0) /
                        static_cast<double>(sys.p);
    state.fac_mu = costs.mean() * mean_speed;
    state.fac_sigma = costs.stddev() * mean_speed;
  }

  struct Pending {
    Count iters = 0;
    Time compute = 0.0;
  };
  std::vector<Pending> pending(sys.p);
  Count rounds = 0;

  ReadyQueue ready;
  for (Count k = 0; k < sys.p; ++k) ready.push({sys.start_offset[k], k});
  while (!ready.empty()) {
    const auto [now, k] = ready.top();
    ready.pop();
    if (pending[k].iters > 0) {
      record_chunk(state, cfg.scheduler, k, pending[k].iters, pending[k].compute, sys.h);
      pending[k] = {};
    }
    if (state.remaining == 0) {
      run.finish_times()[k] = now;
      continue;
    }
    const Count start = state.n - state.remaining;
    const Count size = next_chunk(state, cfg.scheduler, k);
    ++rounds;
    const Time end = run.execute(k, start, size, now, now + sys.h);
    pending[k] = {size, run.last_compute()};
    ready.push({end, k});
  }
  return std::move(run).finish(rounds, 0);
}

}  // namespace detail

/// Simulate one loop instance over precomputed cost prefix sums.
inline LoopRecord simulate_loop(const CostPrefix& costs, Count timestep, const SystemModel& system,
                                const SimConfig& config, std::uint64_t seed) {
  system.validate();
  detail::LoopRun run(costs, timestep, system, config, seed);
  switch (config.scheduler) {
    case SchedulerKind::Static:
    case SchedulerKind::AutoLLVM:
      return detail::run_static(std::move(run), costs, system);
    case SchedulerKind::StaticSteal:
      return detail::run_static_steal(std::move(run), costs, system, config);
    default:
      return detail::run_dynamic(std::move(run), costs, system, config);
  }
}

inline LoopRecord simulate_loop(const Workload& workload, Count timestep, const SystemModel& system,
                                const SimConfig& config, std::uint64_t seed) {
  const CostPrefix costs(workload, timestep);
  return simulate_loop(costs, timestep, system, config, seed);
}

/// What to run at a time-step.
struct ScheduleChoice {
  SchedulerKind kind = SchedulerKind::Static;
  Count chunk_param = 1;

  bool operator==(const ScheduleChoice&) const = default;
};

/// Chooses a schedule before every loop instance and observes the outcome.
class ScheduleProvider {
 public:
  virtual ~ScheduleProvider() = default;

  virtual ScheduleChoice choose(Count timestep) = 0;
  virtual void observe(Count timestep, const LoopRecord& record) = 0;

  /// Phase of the most recent choice: learning, exploiting, trial or stable.
  virtual std::string_view phase() const { return "stable"; }
};

class ConstantProvider final : public ScheduleProvider {
 public:
  explicit ConstantProvider(ScheduleChoice choice) : choice_(choice) {}

  ScheduleChoice choose(Count) override { return choice_; }
  void observe(Count, const LoopRecord&) override {}

 private:
  ScheduleChoice choice_;
};

/// Run every time-step of `workload` with the schedule chosen by `provider`.
/// `on_step` (optional) sees each choice with its record.
inline std::vector<LoopRecord> run_timesteps(
    const Workload& workload, const SystemModel& system, ScheduleProvider& provider,
    std::uint64_t seed, bool record_chunks = false,
    const std::function<void(Count, const ScheduleChoice&, const LoopRecord&)>& on_step = {}) {
  std::vector<LoopRecord> records;
  records.reserve(workload.n_timesteps());
  for (Count t = 0; t < workload.n_timesteps(); ++t) {
    const ScheduleChoice choice = provider.choose(t);
    const SimConfig cfg{choice.kind, choice.chunk_param, record_chunks};
    LoopRecord rec = simulate_loop(workload, t, system, cfg, seed);
    if (on_step) on_step(t, choice, rec);
    provider.observe(t, rec);
    records.push_back(std::move(rec));
  }
  return records;
}

inline constexpr std::string_view kChunkTraceHeader =
    "timestep,thread,round,start,size,request_time,finish_time";

/// Append one loop's chunk trace (requires record_chunks); round is the
/// assignment order within the loop.
inline void write_chunk_trace(std::ostream& os, Count timestep, const LoopRecord& rec) {
  Count round = 0;
  for (const auto& a : rec.assignments) {
    os << timestep << ',' << a.thread_id << ',' << round++ << ',' << a.start << ',' << a.size << ','
       << csv::format(a.request_time) << ',' << csv::format(a.finish_time) << '\n';
  }
}

}  // namespace autosched
