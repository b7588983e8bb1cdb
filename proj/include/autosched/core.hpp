#pragma once

// Shared domain types and the imbalance / variability metrics.
//
// All simulated time is in abstract units. Counts are 64-bit so that
// iteration spaces beyond 2^31 stay representable.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace autosched {

using Count = std::uint64_t;
using Time = double;

/// A loop executed repeatedly over time-steps: N iterations, T time-steps and
/// a pure cost function cost_of(t, i) > 0.
class Workload {
 public:
  using CostFn = std::function<double(Count, Count)>;

  Workload() = default;

  Workload(Count n, Count t, CostFn cost) : n_(n), t_(t), cost_(std::move(cost)) {
    if (n_ == 0 || t_ == 0) {
      throw std::invalid_argument("workload needs n >= 1 and t >= 1");
    }
    if (!cost_) {
      throw std::invalid_argument("workload needs a cost function");
    }
  }

  Count n_iterations() const noexcept { return n_; }
  Count n_timesteps() const noexcept { return t_; }

  double cost_of(Count timestep, Count iteration) const { return cost_(timestep, iteration); }

  /// Costs of every iteration of one time-step.
  std::vector<double> row(Count timestep) const {
    std::vector<double> out(n_);
    for (Count i = 0; i < n_; ++i) {
      out[i] = cost_(timestep, i);
    }
    return out;
  }

 private:
  Count n_ = 0;
  Count t_ = 0;
  CostFn cost_;
};

/// The machine a loop runs on.
struct SystemModel {
  Count p = 1;
  // Multiplier on iteration cost; 2.0 means the thread runs at half rate.
  std::vector<double> speed;
  Time h = 0.0;
  std::vector<Time> start_offset;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  /// Homogeneous system with p threads.
  static SystemModel homogeneous(Count p, Time h = 0.0, double noise_sigma = 0.0,
                                 std::uint64_t seed = 0) {
    SystemModel s;
    s.p = p;
    s.speed.assign(p, 1.0);
    s.h = h;
    s.start_offset.assign(p, 0.0);
    s.noise_sigma = noise_sigma;
    s.seed = seed;
    return s;
  }

  void validate() const {
    if (p < 1) throw std::invalid_argument("system: p must be >= 1");
    if (speed.size() != p) throw std::invalid_argument("system: speed must have p entries");
    if (start_offset.size() != p) {
      throw std::invalid_argument("system: start_offset must have p entries");
    }
    if (!(h >= 0.0)) throw std::invalid_argument("system: h must be >= 0");
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("system: noise_sigma must be >= 0");
    for (double s : speed) {
      if (!(s > 0.0)) throw std::invalid_argument("system: speed entries must be > 0");
    }
    for (Time o : start_offset) {
      if (!(o >= 0.0)) throw std::invalid_argument("system: start_offset entries must be >= 0");
    }
  }

  bool operator==(const SystemModel&) const = default;
};

struct ChunkAssignment {
  Count thread_id = 0;
  Count start = 0;
  Count size = 0;
  Time request_time = 0.0;
  Time finish_time = 0.0;
};

/// Outcome of one loop instance.
struct LoopRecord {
  std::vector<ChunkAssignment> assignments;
  std::vector<Time> finish;
  Time t_par = 0.0;
  double lib_percent = 0.0;
  Count n_rounds = 0;
  Count n_steals = 0;
};

/// Percent load imbalance: (1 - mean/max) * 100.
inline double lib_percent(std::span<const Time> finish) {
  if (finish.empty()) {
    throw std::domain_error("lib_percent: no finishing times");
  }
  const auto [lo, hi] = std::minmax_element(finish.begin(), finish.end());
  const Time max = *hi;
  if (!(max > 0.0) || *lo == max) {
    return 0.0;
  }
  const Time mean = std::accumulate(finish.begin(), finish.end(), 0.0) /
                    static_cast<double>(finish.size());
  // mean <= max holds mathematically; clamp the rounding residue.
  return std::max(0.0, (1.0 - mean / max) * 100.0);
}

/// Execution imbalance: (max - mean)/max * P/(P-1) * 100.
inline double execution_imbalance(std::span<const Time> finish, Count p) {
  if (p < 2) {
    throw std::domain_error("execution_imbalance: needs p >= 2");
  }
  if (finish.empty()) {
    throw std::domain_error("execution_imbalance: no finishing times");
  }
  const auto [lo, hi] = std::minmax_element(finish.begin(), finish.end());
  const Time max = *hi;
  if (!(max > 0.0) || *lo == max) {
    return 0.0;
  }
  const Time mean = std::accumulate(finish.begin(), finish.end(), 0.0) /
                    static_cast<double>(finish.size());
  const double pd = static_cast<double>(p);
  return std::max(0.0, (max - mean) / max * (pd / (pd - 1.0)) * 100.0);
}

/// Coefficient of variation (sample standard deviation over mean).
inline double cov(std::span<const double> values) {
  if (values.empty()) {
    throw std::domain_error("cov: empty input");
  }
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (mean == 0.0) {
    throw std::domain_error("cov: mean is zero");
  }
  if (values.size() == 1) {
    return 0.0;
  }
  double ss = 0.0;
  for (double v : values) {
    ss += (v - mean) * (v - mean);
  }
  return std::sqrt(ss / (n - 1.0)) / mean;
}

/// Ceiling division for positive counts.
constexpr Count ceil_div(Count a, Count b) noexcept { return b == 0 ? 0 : (a + b - 1) / b; }

/// Ceiling of a non-negative real as a count (0 for non-positive input).
inline Count ceil_count(double x) {
  if (!(x > 0.0)) return 0;
  return static_cast<Count>(std::ceil(x));
}

}  // namespace autosched
