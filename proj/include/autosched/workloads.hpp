#pragma once

// Synthetic workload generators and cost-matrix trace files.
//
// Trace format: CSV, one row per time-step, N positive decimal costs per row.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "autosched/core.hpp"
#include "autosched/csv.hpp"
#include "autosched/rng.hpp"

namespace autosched {

enum class WorkloadKind : std::uint8_t {
  Uniform,
  Gaussian,
  ConstantImbalance,
  IncreasingImbalance,
  DecreasingImbalance,
  Powerlaw,
  Timevarying,
  Trace,
};

constexpr std::string_view to_string(WorkloadKind k) noexcept {
  switch (k) {
    case WorkloadKind::Uniform: return "uniform";
    case WorkloadKind::Gaussian: return "gaussian";
    case WorkloadKind::ConstantImbalance: return "constant_imbalance";
    case WorkloadKind::IncreasingImbalance: return "increasing_imbalance";
    case WorkloadKind::DecreasingImbalance: return "decreasing_imbalance";
    case WorkloadKind::Powerlaw: return "powerlaw";
    case WorkloadKind::Timevarying: return "timevarying";
    case WorkloadKind::Trace: return "trace";
  }
  return "?";
}

inline std::optional<WorkloadKind> parse_workload_kind(std::string_view s) {
  for (auto k : {WorkloadKind::Uniform, WorkloadKind::Gaussian, WorkloadKind::ConstantImbalance,
                 WorkloadKind::IncreasingImbalance, WorkloadKind::DecreasingImbalance,
                 WorkloadKind::Powerlaw, WorkloadKind::Timevarying, WorkloadKind::Trace}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

/// Parameters per kind (all optional, defaults in brackets):
///   every kind except trace: cost [1.0]
///   gaussian: sigma [0.1], relative to cost
///   *_imbalance: amplitude [1.0]; cost(i) = cost * (1 + A * i / N)
///   powerlaw: beta [1.0], shuffle [1]
///   timevarying: amplitude [1.0], bumps [3], width [0.05]
///   trace: no parameters; `path` names the file, n and t come from it.
struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::Uniform;
  Count n = 1000;
  Count t = 200;
  std::map<std::string, double> params;
  std::uint64_t seed = 0;
  std::string path;

  double param(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }

  bool operator==(const WorkloadSpec&) const = default;
};

inline const std::set<std::string>& allowed_params(WorkloadKind k) {
  static const std::set<std::string> uniform{"cost"};
  static const std::set<std::string> gaussian{"cost", "sigma"};
  static const std::set<std::string> imbalance{"cost", "amplitude"};
  static const std::set<std::string> powerlaw{"cost", "beta", "shuffle"};
  static const std::set<std::string> timevarying{"cost", "amplitude", "bumps", "width"};
  static const std::set<std::string> none{};
  switch (k) {
    case WorkloadKind::Uniform: return uniform;
    case WorkloadKind::Gaussian: return gaussian;
    case WorkloadKind::ConstantImbalance:
    case WorkloadKind::IncreasingImbalance:
    case WorkloadKind::DecreasingImbalance: return imbalance;
    case WorkloadKind::Powerlaw: return powerlaw;
    case WorkloadKind::Timevarying: return timevarying;
    case WorkloadKind::Trace: return none;
  }
  return none;
}

inline void validate(const WorkloadSpec& spec) {
  const auto name = std::string(to_string(spec.kind));
  for (const auto& [key, value] : spec.params) {
    if (!allowed_params(spec.kind).contains(key)) {
      throw std::invalid_argument("workload " + name + ": unknown parameter '" + key + "'");
    }
  }
  if (spec.kind == WorkloadKind::Trace) {
    if (spec.path.empty()) throw std::invalid_argument("workload trace: missing path");
    return;
  }
  if (spec.n < 1 || spec.t < 1) throw std::invalid_argument("workload " + name + ": n and t must be >= 1");
  if (!(spec.param("cost", 1.0) > 0.0)) throw std::invalid_argument("workload " + name + ": cost must be > 0");
  if (!(spec.param("sigma", 0.1) >= 0.0)) throw std::invalid_argument("workload " + name + ": sigma must be >= 0");
  if (!(spec.param("amplitude", 1.0) >= 0.0)) {
    throw std::invalid_argument("workload " + name + ": amplitude must be >= 0");
  }
  if (!(spec.param("beta", 1.0) > 0.0)) throw std::invalid_argument("workload " + name + ": beta must be > 0");
  if (!(spec.param("width", 0.05) > 0.0)) throw std::invalid_argument("workload " + name + ": width must be > 0");
  if (!(spec.param("bumps", 3.0) >= 0.0)) throw std::invalid_argument("workload " + name + ": bumps must be >= 0");
}

/// Parse a cost matrix. Throws csv::ParseError naming the line.
inline Workload parse_trace(std::istream& in) {
  auto rows = std::make_shared<std::vector<std::vector<double>>>();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) {
      throw csv::ParseError(lineno, "empty row");
    }
    std::vector<double> row;
    for (auto field : csv::split(line)) {
      auto v = csv::parse_double(field);
      if (!v) throw csv::ParseError(lineno, "malformed cost '" + std::string(field) + "'");
      if (!(*v > 0.0) || !std::isfinite(*v)) {
        throw csv::ParseError(lineno, "cost must be positive and finite");
      }
      row.push_back(*v);
    }
    if (!rows->empty() && row.size() != rows->front().size()) {
      throw csv::ParseError(lineno, "ragged row: expected " + std::to_string(rows->front().size()) +
                                        " columns, got " + std::to_string(row.size()));
    }
    rows->push_back(std::move(row));
  }
  if (rows->empty()) throw csv::ParseError(lineno == 0 ? 1 : lineno, "trace is empty");
  const Count n = rows->front().size();
  const Count t = rows->size();
  return Workload(n, t, [rows](Count ts, Count i) { return (*rows)[ts][i]; });
}

inline Workload load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace '" + path + "'");
  return parse_trace(in);
}

inline void dump_workload(const Workload& w, std::ostream& os) {
  for (Count t = 0; t < w.n_timesteps(); ++t) {
    for (Count i = 0; i < w.n_iterations(); ++i) {
      if (i) os << ',';
      os << csv::format(w.cost_of(t, i));
    }
    os << '\n';
  }
}

inline void dump_workload(const Workload& w, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  dump_workload(w, out);
}

namespace detail {

inline std::vector<Count> seeded_permutation(Count n, std::uint64_t seed) {
  std::vector<Count> perm(n);
  std::iota(perm.begin(), perm.end(), Count{0});
  // Fisher-Yates driven by the counter-based generator.
  for (Count i = n; i > 1; --i) {
    const auto j = static_cast<Count>(rng::uniform(rng::mix({seed, 0x5eedULL, i})) * static_cast<double>(i));
    std::swap(perm[i - 1], perm[std::min(j, i - 1)]);
  }
  return perm;
}

}  // namespace detail

inline Workload build_workload(const WorkloadSpec& spec) {
  validate(spec);
  if (spec.kind == WorkloadKind::Trace) {
    return load_trace(spec.path);
  }
  const Count n = spec.n;
  const Count t = spec.t;
  const double c = spec.param("cost", 1.0);
  const std::uint64_t seed = spec.seed;
  const double nd = static_cast<double>(n);

  switch (spec.kind) {
    case WorkloadKind::Uniform:
      return Workload(n, t, [c](Count, Count) { return c; });

    case WorkloadKind::Gaussian: {
      const double sd = spec.param("sigma", 0.1) * c;
      const double floor = 1e-3 * c;
      return Workload(n, t, [=](Count ts, Count i) {
        return std::max(floor, c + sd * rng::normal(rng::mix({seed, ts, i})));
      });
    }

    case WorkloadKind::ConstantImbalance:
    case WorkloadKind::IncreasingImbalance:
    case WorkloadKind::DecreasingImbalance: {
      const double a = spec.param("amplitude", 1.0);
      const auto kind = spec.kind;
      const double span = t > 1 ? static_cast<double>(t - 1) : 1.0;
      return Workload(n, t, [=](Count ts, Count i) {
        double amp = a;
        const double progress = t > 1 ? static_cast<double>(ts) / span : 1.0;
        if (kind == WorkloadKind::IncreasingImbalance) amp = a * progress;
        if (kind == WorkloadKind::DecreasingImbalance) amp = a * (1.0 - progress);
        return c * (1.0 + amp * static_cast<double>(i) / nd);
      });
    }

    case WorkloadKind::Powerlaw: {
      const double beta = spec.param("beta", 1.0);
      auto perm = std::make_shared<const std::vector<Count>>(
          spec.param("shuffle", 1.0) != 0.0 ? detail::seeded_permutation(n, seed) : [n] {
            std::vector<Count> id(n);
            std::iota(id.begin(), id.end(), Count{0});
            return id;
          }());
      return Workload(n, t, [=](Count, Count i) {
        return c * std::pow(1.0 + static_cast<double>((*perm)[i]), -beta);
      });
    }

    case WorkloadKind::Timevarying: {
      const double a = spec.param("amplitude", 1.0);
      const auto bumps = static_cast<Count>(spec.param("bumps", 3.0));
      const double width = spec.param("width", 0.05);
      // Bump centres and heights are re-drawn every time-step.
      auto centres = std::make_shared<std::vector<std::pair<double, double>>>();
      centres->reserve(t * bumps);
      for (Count ts = 0; ts < t; ++ts) {
        for (Count b = 0; b < bumps; ++b) {
          centres->emplace_back(rng::uniform(rng::mix({seed, ts, b, 1})),
                                rng::uniform(rng::mix({seed, ts, b, 2})));
        }
      }
      return Workload(n, t, [=](Count ts, Count i) {
        const double x = (static_cast<double>(i) + 0.5) / nd;
        double extra = 0.0;
        for (Count b = 0; b < bumps; ++b) {
          const auto [mid, height] = (*centres)[ts * bumps + b];
          const double z = (x - mid) / width;
          extra += height * std::exp(-0.5 * z * z);
        }
        return c * (1.0 + a * extra);
      });
    }

    case WorkloadKind::Trace:
      break;
  }
  throw std::invalid_argument("unknown workload kind");
}

/// Inline spec "kind=uniform,n=1000,t=10,cost=1.5,seed=3" (path=... for trace).
inline WorkloadSpec parse_workload_spec(std::string_view text) {
  WorkloadSpec spec;
  bool have_kind = false;
  for (auto item : csv::split(text)) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("workload spec: expected key=value, got '" + std::string(item) + "'");
    }
    const auto key = std::string(csv::trim(item.substr(0, eq)));
    const auto value = csv::trim(item.substr(eq + 1));
    auto need_count = [&] {
      auto v = csv::parse_count(value);
      if (!v) throw std::invalid_argument("workload spec: '" + key + "' needs a non-negative integer");
      return *v;
    };
    if (key == "kind") {
      auto k = parse_workload_kind(value);
      if (!k) throw std::invalid_argument("workload spec: unknown kind '" + std::string(value) + "'");
      spec.kind = *k;
      have_kind = true;
    } else if (key == "n") {
      spec.n = need_count();
    } else if (key == "t") {
      spec.t = need_count();
    } else if (key == "seed") {
      spec.seed = need_count();
    } else if (key == "path") {
      spec.path = std::string(value);
    } else {
      auto v = csv::parse_double(value);
      if (!v) throw std::invalid_argument("workload spec: '" + key + "' needs a number");
      spec.params[key] = *v;
    }
  }
  if (!have_kind) throw std::invalid_argument("workload spec: missing kind");
  validate(spec);
  return spec;
}

}  // namespace autosched
