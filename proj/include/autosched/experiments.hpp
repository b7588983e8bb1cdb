#pragma once

// Factorial campaigns: every (workload, system, method, chunk mode, reward)
// cell is run once per repetition, with repetition r seeded base_seed + r.
// The Oracle baseline is computed on the same seeds and both sides are
// reduced to their median over repetitions.
//
// Output layout under the campaign directory:
//   summary.csv
//   <workload>__<system>__<method>__<chunk_mode>__<reward>/selection.csv
//   <workload>__<system>__<method>__<chunk_mode>__<reward>/chunks.csv   (record_chunks)

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "autosched/config.hpp"
#include "autosched/core.hpp"
#include "autosched/csv.hpp"
#include "autosched/rng.hpp"
#include "autosched/schedulers.hpp"
#include "autosched/selection.hpp"
#include "autosched/simulator.hpp"
#include "autosched/workloads.hpp"

namespace autosched {

inline constexpr std::string_view kSummaryHeader =
    "workload,system,method,chunk_mode,reward,median_total,oracle_total,degradation_pct";
inline constexpr std::string_view kSelectionHeader =
    "timestep,method,kind,chunk_param,phase,t_par,lib_percent";
inline constexpr std::string_view kSelectionSummaryHeader = "cell,learning_share,kind,share";
inline constexpr std::string_view kOracleHeader =
    "workload,system,chunk_mode,repetition,timestep,kind,chunk_param,t_par";

struct CellKey {
  std::string workload;
  std::string system;
  std::string method;
  std::string chunk_mode;
  std::string reward = "none";

  std::string dir_name() const {
    return workload + "__" + system + "__" + method + "__" + chunk_mode + "__" + reward;
  }

  auto operator<=>(const CellKey&) const = default;
};

struct SelectionRow {
  Count timestep = 0;
  std::string method;
  SchedulerKind kind = SchedulerKind::Static;
  Count chunk_param = 1;
  std::string phase;
  Time t_par = 0.0;
  double lib_percent = 0.0;
};

struct CellResult {
  CellKey key;
  std::vector<Time> totals;  // per repetition
  std::vector<Time> oracle_totals;
  Time median_total = 0.0;
  Time oracle_total = 0.0;
  double degradation_pct = 0.0;
  std::vector<SelectionRow> selection;  // median repetition
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Index of the repetition whose total is the (lower) median; ties go to the
/// earliest repetition.
inline std::size_t median_index(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  return idx[(v.size() - 1) / 2];
}

inline double degradation_pct(double total, double oracle_total) {
  if (!(oracle_total > 0.0)) throw std::domain_error("oracle total must be positive");
  return (total - oracle_total) / oracle_total * 100.0;
}

inline void write_selection_log(std::ostream& os, const std::vector<SelectionRow>& rows) {
  os << kSelectionHeader << '\n';
  for (const auto& r : rows) {
    os << r.timestep << ',' << r.method << ',' << to_string(r.kind) << ',' << r.chunk_param << ','
       << r.phase << ',' << csv::format(r.t_par) << ',' << csv::format(r.lib_percent) << '\n';
  }
}

inline std::vector<SelectionRow> read_selection_log(std::istream& in) {
  std::vector<SelectionRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) {
      if (csv::trim(line) != kSelectionHeader) throw csv::ParseError(1, "unexpected selection log header");
      continue;
    }
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 7) throw csv::ParseError(lineno, "expected 7 fields");
    SelectionRow r;
    auto ts = csv::parse_count(f[0]);
    auto kind = parse_scheduler(f[2]);
    auto cp = csv::parse_count(f[3]);
    auto tp = csv::parse_double(f[5]);
    auto lib = csv::parse_double(f[6]);
    if (!ts || !kind || !cp || !tp || !lib) throw csv::ParseError(lineno, "malformed selection row");
    r.timestep = *ts;
    r.method = std::string(f[1]);
    r.kind = *kind;
    r.chunk_param = *cp;
    r.phase = std::string(f[4]);
    r.t_par = *tp;
    r.lib_percent = *lib;
    rows.push_back(std::move(r));
  }
  return rows;
}

struct SelectionShare {
  std::string kind;  // scheduler name or "others"
  double share = 0.0;
};

struct SelectionSummary {
  double learning_share = 0.0;
  std::vector<SelectionShare> shares;  // portfolio order, "others" last
};

inline constexpr double kOthersThreshold = 0.02;

/// Selection shares of one run. Learning and trial steps are reported as
/// learning_share (fraction of all time-steps); the kind shares cover the
/// remaining steps and sum to 1. Kinds under 2% are folded into "others".
inline SelectionSummary emit_selection_summary(const std::vector<SelectionRow>& rows) {
  SelectionSummary out;
  if (rows.empty()) return out;
  std::map<SchedulerKind, Count> counts;
  Count learning = 0;
  for (const auto& r : rows) {
    if (r.phase == "learning" || r.phase == "trial") {
      ++learning;
    } else {
      ++counts[r.kind];
    }
  }
  out.learning_share = static_cast<double>(learning) / static_cast<double>(rows.size());
  const Count rest = rows.size() - learning;
  if (rest == 0) return out;
  double others = 0.0;
  for (SchedulerKind k : kAllKinds) {
    auto it = counts.find(k);
    if (it == counts.end()) continue;
    const double share = static_cast<double>(it->second) / static_cast<double>(rest);
    if (share < kOthersThreshold) {
      others += share;
    } else {
      out.shares.push_back({std::string(to_string(k)), share});
    }
  }
  if (others > 0.0) out.shares.push_back({"others", others});
  return out;
}

inline void write_selection_summary(std::ostream& os,
                                    const std::vector<std::pair<std::string, SelectionSummary>>& cells) {
  os << kSelectionSummaryHeader << '\n';
  for (const auto& [cell, s] : cells) {
    for (const auto& sh : s.shares) {
      os << cell << ',' << csv::format(s.learning_share) << ',' << sh.kind << ',' << csv::format(sh.share)
         << '\n';
    }
  }
}

/// Summarize every cell directory under `dir` that holds a selection.csv and
/// write dir/selection_summary.csv. Returns the per-cell summaries.
inline std::vector<std::pair<std::string, SelectionSummary>> summarize_directory(
    const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<std::string> cells;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && fs::exists(e.path() / "selection.csv")) cells.push_back(e.path().filename().string());
  }
  std::sort(cells.begin(), cells.end());
  std::vector<std::pair<std::string, SelectionSummary>> out;
  for (const auto& c : cells) {
    std::ifstream in(dir / c / "selection.csv");
    try {
      out.emplace_back(c, emit_selection_summary(read_selection_log(in)));
    } catch (const csv::ParseError& e) {
      throw std::runtime_error(c + "/selection.csv: " + e.what());
    }
  }
  std::ofstream os(dir / "selection_summary.csv");
  if (!os) throw std::runtime_error("cannot write selection_summary.csv in " + dir.string());
  write_selection_summary(os, out);
  return out;
}

namespace detail {

inline std::unique_ptr<ScheduleProvider> make_provider(const MethodSpec& m, RewardKind reward,
                                                       const Campaign& c, Count cp,
                                                       std::uint64_t seed) {
  switch (m.kind) {
    case MethodKind::Constant: return std::make_unique<ConstantProvider>(ScheduleChoice{m.constant, cp});
    case MethodKind::RandomSel: return std::make_unique<RandomSel>(rng::mix({seed, 0x52414e44ULL}), cp);
    case MethodKind::ExhaustiveSel: return std::make_unique<ExhaustiveSel>(cp);
    case MethodKind::ExpertSel: return std::make_unique<ExpertSel>(c.expert, cp);
    case MethodKind::QLearn:
    case MethodKind::Sarsa: {
      RLConfig cfg = c.rl;
      cfg.reward_kind = reward;
      return std::make_unique<RLAgent>(m.kind == MethodKind::QLearn ? RLMethod::QLearn : RLMethod::Sarsa, cfg,
                                       cp);
    }
    case MethodKind::Oracle: break;
  }
  throw std::logic_error("no provider for method " + m.name());
}

struct RepRun {
  Time total = 0.0;
  std::vector<SelectionRow> selection;
  std::string chunks;
};

inline void ensure_dir(const std::filesystem::path& p) {
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw std::runtime_error("cannot create directory " + p.string() + ": " + ec.message());
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << text;
}

}  // namespace detail

/// Resolve every workload up front so configuration errors surface before
/// any simulation starts.
inline std::vector<Workload> build_campaign_workloads(const Campaign& c) {
  if (c.repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  if (c.methods.empty()) throw std::invalid_argument("campaign has no methods");
  for (const auto& s : c.systems) s.model.validate();
  std::vector<Workload> out;
  out.reserve(c.workloads.size());
  for (const auto& w : c.workloads) {
    try {
      out.push_back(build_workload(w.spec));
    } catch (const std::exception& e) {
      throw std::runtime_error("workload '" + w.name + "': " + e.what());
    }
  }
  return out;
}

/// Run every cell; write results under `out_dir` when it is non-empty.
/// Results are sorted by cell key.
inline std::vector<CellResult> run_campaign(const Campaign& c, const std::filesystem::path& out_dir = {}) {
  const auto workloads = build_campaign_workloads(c);
  std::vector<CellResult> results;
  std::map<std::string, std::string> chunk_files;

  for (std::size_t wi = 0; wi < c.workloads.size(); ++wi) {
    const Workload& w = workloads[wi];
    for (const auto& [sys_name, sys] : c.systems) {
      for (ChunkMode mode : c.chunk_modes) {
        const Count cp = chunk_param_for(mode, w.n_iterations(), sys.p);
        std::vector<OracleResult> oracle;
        for (Count r = 0; r < c.repetitions; ++r) {
          oracle.push_back(oracle_baseline(w, sys, kPortfolio, mode, c.base_seed + r));
        }
        std::vector<Time> oracle_totals;
        for (const auto& o : oracle) oracle_totals.push_back(o.total);

        for (const auto& m : c.methods) {
          std::vector<std::optional<RewardKind>> rewards;
          if (m.uses_reward()) {
            rewards.assign(c.rewards.begin(), c.rewards.end());
          } else {
            rewards.push_back(std::nullopt);
          }
          for (const auto& reward : rewards) {
            CellResult cell;
            cell.key = {c.workloads[wi].name, sys_name, m.name(), std::string(to_string(mode)),
                        reward ? std::string(to_string(*reward)) : "none"};
            std::vector<detail::RepRun> runs;
            for (Count r = 0; r < c.repetitions; ++r) {
              const std::uint64_t seed = c.base_seed + r;
              detail::RepRun run;
              std::unique_ptr<ScheduleProvider> provider;
              if (m.kind == MethodKind::Oracle) {
                provider = std::make_unique<ReplayProvider>(oracle[r].choices);
              } else {
                provider = detail::make_provider(m, reward.value_or(RewardKind::LT), c, cp, seed);
              }
              std::ostringstream chunks;
              if (c.record_chunks) chunks << kChunkTraceHeader << '\n';
              run_timesteps(w, sys, *provider, seed, c.record_chunks,
                            [&](Count t, const ScheduleChoice& ch, const LoopRecord& rec) {
                              run.total += rec.t_par;
                              run.selection.push_back({t, m.name(), ch.kind, ch.chunk_param,
                                                       std::string(provider->phase()), rec.t_par,
                                                       rec.lib_percent});
                              if (c.record_chunks) write_chunk_trace(chunks, t, rec);
                            });
              run.chunks = chunks.str();
              cell.totals.push_back(run.total);
              runs.push_back(std::move(run));
            }
            cell.oracle_totals = oracle_totals;
            cell.median_total = median(cell.totals);
            cell.oracle_total = median(oracle_totals);
            cell.degradation_pct = degradation_pct(cell.median_total, cell.oracle_total);
            auto& mid = runs[median_index(cell.totals)];
            cell.selection = std::move(mid.selection);
            if (c.record_chunks) chunk_files[cell.key.dir_name()] = std::move(mid.chunks);
            results.push_back(std::move(cell));
          }
        }
      }
    }
  }
  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) { return a.key < b.key; });

  if (!out_dir.empty()) {
    detail::ensure_dir(out_dir);
    std::ostringstream summary;
    summary << kSummaryHeader << '\n';
    for (const auto& r : results) {
      summary << r.key.workload << ',' << r.key.system << ',' << r.key.method << ',' << r.key.chunk_mode << ','
              << r.key.reward << ',' << csv::format(r.median_total) << ',' << csv::format(r.oracle_total)
              << ',' << csv::format(r.degradation_pct) << '\n';
      const auto cell_dir = out_dir / r.key.dir_name();
      detail::ensure_dir(cell_dir);
      std::ostringstream sel;
      write_selection_log(sel, r.selection);
      detail::write_file(cell_dir / "selection.csv", sel.str());
      if (auto it = chunk_files.find(r.key.dir_name()); it != chunk_files.end()) {
        detail::write_file(cell_dir / "chunks.csv", it->second);
      }
    }
    detail::write_file(out_dir / "summary.csv", summary.str());
  }
  return results;
}

/// Per-step Oracle choices for every (workload, system, chunk mode,
/// repetition), in kOracleHeader format.
inline void write_oracle_table(const Campaign& c, std::ostream& os) {
  const auto workloads = build_campaign_workloads(c);
  os << kOracleHeader << '\n';
  for (std::size_t wi = 0; wi < c.workloads.size(); ++wi) {
    for (const auto& [sys_name, sys] : c.systems) {
      for (ChunkMode mode : c.chunk_modes) {
        for (Count r = 0; r < c.repetitions; ++r) {
          const auto o = oracle_baseline(workloads[wi], sys, kPortfolio, mode, c.base_seed + r);
          for (Count t = 0; t < o.choices.size(); ++t) {
            os << c.workloads[wi].name << ',' << sys_name << ',' << to_string(mode) << ',' << r << ',' << t
               << ',' << to_string(o.choices[t].kind) << ',' << o.choices[t].chunk_param << ','
               << csv::format(o.t_par[t]) << '\n';
          }
        }
      }
    }
  }
}

}  // namespace autosched
