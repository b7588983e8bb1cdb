#pragma once

// Chunk-size calculators for the scheduling portfolio.
//
// Each calculator reads and updates a SchedulerState. The delivered chunk is
// the calculated size raised to the user chunk parameter and clamped to the
// remaining iterations (see apply_chunk_threshold). next_chunk() is the single
// entry point the simulator uses; the individual calculators are exposed so
// they can be checked against the closed forms directly.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "autosched/core.hpp"

namespace autosched {

enum class SchedulerKind : std::uint8_t {
  Static,
  SS,
  GSS,
  AutoLLVM,
  TSS,
  StaticSteal,
  MFAC2,
  AWF_B,
  AWF_C,
  AWF_D,
  AWF_E,
  MAF,
  // Not part of the selection portfolio.
  FAC,
  FAC2,
};

inline constexpr std::size_t kPortfolioSize = 12;

inline constexpr std::array<SchedulerKind, kPortfolioSize> kPortfolio = {
    SchedulerKind::Static, SchedulerKind::SS,          SchedulerKind::GSS,
    SchedulerKind::AutoLLVM, SchedulerKind::TSS,       SchedulerKind::StaticSteal,
    SchedulerKind::MFAC2,  SchedulerKind::AWF_B,       SchedulerKind::AWF_C,
    SchedulerKind::AWF_D,  SchedulerKind::AWF_E,       SchedulerKind::MAF,
};

inline constexpr std::array<SchedulerKind, 14> kAllKinds = {
    SchedulerKind::Static,   SchedulerKind::SS,    SchedulerKind::GSS,   SchedulerKind::AutoLLVM,
    SchedulerKind::TSS,      SchedulerKind::StaticSteal, SchedulerKind::MFAC2, SchedulerKind::AWF_B,
    SchedulerKind::AWF_C,    SchedulerKind::AWF_D, SchedulerKind::AWF_E, SchedulerKind::MAF,
    SchedulerKind::FAC,      SchedulerKind::FAC2,
};

constexpr std::string_view to_string(SchedulerKind k) noexcept {
  switch (k) {
    case SchedulerKind::Static: return "static";
    case SchedulerKind::SS: return "ss";
    case SchedulerKind::GSS: return "gss";
    case SchedulerKind::AutoLLVM: return "auto_llvm";
    case SchedulerKind::TSS: return "tss";
    case SchedulerKind::StaticSteal: return "static_steal";
    case SchedulerKind::MFAC2: return "mfac2";
    case SchedulerKind::AWF_B: return "awf_b";
    case SchedulerKind::AWF_C: return "awf_c";
    case SchedulerKind::AWF_D: return "awf_d";
    case SchedulerKind::AWF_E: return "awf_e";
    case SchedulerKind::MAF: return "maf";
    case SchedulerKind::FAC: return "fac";
    case SchedulerKind::FAC2: return "fac2";
  }
  return "?";
}

constexpr std::optional<SchedulerKind> parse_scheduler(std::string_view name) noexcept {
  for (SchedulerKind k : kAllKinds) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

/// Position in the 12-member portfolio; throws for FAC / FAC2.
constexpr std::size_t portfolio_index(SchedulerKind k) {
  const auto i = static_cast<std::size_t>(k);
  if (i >= kPortfolioSize) throw std::out_of_range("scheduler is not in the portfolio");
  return i;
}

constexpr bool is_static_like(SchedulerKind k) noexcept {
  return k == SchedulerKind::Static || k == SchedulerKind::AutoLLVM;
}

constexpr bool is_adaptive(SchedulerKind k) noexcept {
  switch (k) {
    case SchedulerKind::AWF_B:
    case SchedulerKind::AWF_C:
    case SchedulerKind::AWF_D:
    case SchedulerKind::AWF_E:
    case SchedulerKind::MAF:
      return true;
    default:
      return false;
  }
}

enum class AwfVariant : std::uint8_t { B, C, D, E };

constexpr std::optional<AwfVariant> awf_variant_of(SchedulerKind k) noexcept {
  switch (k) {
    case SchedulerKind::AWF_B: return AwfVariant::B;
    case SchedulerKind::AWF_C: return AwfVariant::C;
    case SchedulerKind::AWF_D: return AwfVariant::D;
    case SchedulerKind::AWF_E: return AwfVariant::E;
    default: return std::nullopt;
  }
}

/// B and D update weights per batch; C and E per chunk.
constexpr bool awf_per_chunk(AwfVariant v) noexcept {
  return v == AwfVariant::C || v == AwfVariant::E;
}

/// D and E time whole chunks including the scheduling overhead.
constexpr bool awf_counts_overhead(AwfVariant v) noexcept {
  return v == AwfVariant::D || v == AwfVariant::E;
}

/// Mutable state of one scheduler over one loop instance.
struct SchedulerState {
  Count n = 0;
  Count p = 1;
  Count remaining = 0;
  Count chunk_param = 1;

  // Batch bookkeeping (FAC, FAC2/mFAC2, AWF-B/D). batch_index counts batches
  // started so far.
  Count batch_index = 0;
  Count batch_chunk_size = 0;
  Count batch_remaining_chunks = 0;

  // TSS.
  Count tss_f = 0;
  Count tss_l = 1;
  Count tss_a = 1;
  double tss_delta = 0.0;
  double tss_prev_chunk = 0.0;
  Count tss_emitted = 0;

  // Prior knowledge used by FAC.
  double fac_mu = 1.0;
  double fac_sigma = 0.0;

  // AWF: weights sum to p; raw per-thread time and iteration totals.
  std::vector<double> weights;
  std::vector<Count> thread_iter_count;
  std::vector<double> thread_time_sum;

  // AF: one observation per executed chunk, the mean time per iteration.
  std::vector<Count> thread_obs_count;
  std::vector<double> thread_obs_sum;
  std::vector<double> thread_obs_sum_sq;
  std::vector<double> thread_mu;
  std::vector<double> thread_sigma;

  static SchedulerState init(Count n, Count p, Count chunk_param = 1) {
    if (n < 1) throw std::invalid_argument("scheduler state: n must be >= 1");
    if (p < 1) throw std::invalid_argument("scheduler state: p must be >= 1");
    SchedulerState s;
    s.n = n;
    s.p = p;
    s.remaining = n;
    s.chunk_param = std::max<Count>(1, chunk_param);
    s.weights.assign(p, 1.0);
    s.thread_iter_count.assign(p, 0);
    s.thread_time_sum.assign(p, 0.0);
    s.thread_obs_count.assign(p, 0);
    s.thread_obs_sum.assign(p, 0.0);
    s.thread_obs_sum_sq.assign(p, 0.0);
    s.thread_mu.assign(p, 0.0);
    s.thread_sigma.assign(p, 0.0);
    s.tss_init();
    return s;
  }

  /// Trapezoid parameters; f = 0 selects the default ceil(N / 2P).
  void tss_init(Count first = 0, Count last = 1) {
    tss_f = first == 0 ? ceil_div(n, 2 * p) : first;
    tss_l = std::max<Count>(1, std::min(last, tss_f));
    tss_a = ceil_div(2 * n, tss_f + tss_l);
    tss_delta = tss_a > 1 ? static_cast<double>(tss_f - tss_l) / static_cast<double>(tss_a - 1)
                          : 0.0;
    tss_prev_chunk = 0.0;
    tss_emitted = 0;
  }
};

/// max(calculated, chunk_param) clamped to remaining.
constexpr Count apply_chunk_threshold(Count calculated, Count chunk_param, Count remaining) noexcept {
  return std::min(remaining, std::max({calculated, chunk_param, Count{1}}));
}

/// Block sizes for STATIC: ceil(N/P) each, the last non-empty block takes the
/// remainder. Threads past the end of the iteration space get 0.
inline std::vector<Count> static_block_sizes(Count n, Count p) {
  std::vector<Count> out(p, 0);
  const Count cs = ceil_div(n, p);
  Count left = n;
  for (Count k = 0; k < p; ++k) {
    out[k] = std::min(cs, left);
    left -= out[k];
  }
  return out;
}

inline Count static_chunk(const SchedulerState& s) { return std::min(s.remaining, ceil_div(s.n, s.p)); }

inline Count auto_llvm_chunk(const SchedulerState& s) { return static_chunk(s); }

inline Count ss_chunk(const SchedulerState&) { return 1; }

inline Count gss_chunk(const SchedulerState& s) { return ceil_div(s.remaining, s.p); }

/// Linearly decreasing chunks f, f - delta, f - 2 delta, ... rounded down and
/// floored at l. Evaluated in exact integer arithmetic.
inline Count tss_chunk(SchedulerState& s) {
  Count c = s.tss_f;
  if (s.tss_a > 1) {
    const Count k = s.tss_emitted;
    const Count den = s.tss_a - 1;
    const Count num_pos = den * s.tss_f;
    const Count num_neg = k * (s.tss_f - s.tss_l);
    c = num_neg >= num_pos ? 0 : (num_pos - num_neg) / den;
  }
  c = std::max(c, s.tss_l);
  s.tss_prev_chunk = static_cast<double>(s.tss_f) - static_cast<double>(s.tss_emitted) * s.tss_delta;
  ++s.tss_emitted;
  return c;
}

namespace detail {

inline void start_batch(SchedulerState& s, Count size) {
  s.batch_chunk_size = std::max<Count>(1, size);
  s.batch_remaining_chunks = s.p;
  ++s.batch_index;
}

}  // namespace detail

/// Factoring: batches of P equal chunks sized from the remaining work and the
/// iteration-time statistics mu, sigma.
inline Count fac_chunk(SchedulerState& s, double mu, double sigma) {
  if (!(mu > 0.0)) throw std::invalid_argument("fac_chunk: mu must be > 0");
  if (s.batch_remaining_chunks == 0) {
    const double r = static_cast<double>(s.remaining);
    const double pd = static_cast<double>(s.p);
    const double b = r > 0.0 ? pd / (2.0 * std::sqrt(r)) * (sigma / mu) : 0.0;
    const double x = s.batch_index == 0 ? 1.0 + b * b + b * std::sqrt(b * b + 2.0)
                                        : 2.0 + b * b + b * std::sqrt(b * b + 4.0);
    detail::start_batch(s, ceil_count(r / (x * pd)));
  }
  --s.batch_remaining_chunks;
  return s.batch_chunk_size;
}

/// FAC2 and mFAC2: factoring with x = 2 for every batch.
inline Count fac2_chunk(SchedulerState& s) {
  if (s.batch_remaining_chunks == 0) {
    detail::start_batch(s, ceil_div(s.remaining, 2 * s.p));
  }
  --s.batch_remaining_chunks;
  return s.batch_chunk_size;
}

/// Recompute AWF weights from the recorded time per iteration. Threads
/// without history keep weight 1; the rest share what is left of P in
/// proportion to their rate.
inline void awf_recompute_weights(SchedulerState& s) {
  Count unmeasured = 0;
  double rate_sum = 0.0;
  for (Count i = 0; i < s.p; ++i) {
    if (s.thread_iter_count[i] == 0 || !(s.thread_time_sum[i] > 0.0)) {
      ++unmeasured;
    } else {
      rate_sum += static_cast<double>(s.thread_iter_count[i]) / s.thread_time_sum[i];
    }
  }
  if (rate_sum <= 0.0) {
    return;
  }
  const double share = static_cast<double>(s.p - unmeasured);
  for (Count i = 0; i < s.p; ++i) {
    if (s.thread_iter_count[i] == 0 || !(s.thread_time_sum[i] > 0.0)) {
      s.weights[i] = 1.0;
    } else {
      const double rate = static_cast<double>(s.thread_iter_count[i]) / s.thread_time_sum[i];
      s.weights[i] = share * rate / rate_sum;
    }
  }
}

/// Record a finished chunk for AWF. `elapsed` is the chunk time the variant
/// measures (with or without the scheduling overhead; see awf_counts_overhead).
inline void awf_update_weights(SchedulerState& s, Count thread_id, Count executed_iters,
                               Time elapsed, AwfVariant variant) {
  if (executed_iters == 0 || !(elapsed > 0.0)) return;
  s.thread_iter_count.at(thread_id) += executed_iters;
  s.thread_time_sum.at(thread_id) += elapsed;
  if (awf_per_chunk(variant)) {
    awf_recompute_weights(s);
  }
}

inline Count awf_chunk(SchedulerState& s, Count thread_id, AwfVariant variant) {
  const double w = s.weights.at(thread_id);
  if (awf_per_chunk(variant)) {
    return std::max<Count>(1, ceil_count(w * static_cast<double>(ceil_div(s.remaining, 2 * s.p))));
  }
  if (s.batch_remaining_chunks == 0) {
    awf_recompute_weights(s);
    detail::start_batch(s, ceil_div(s.remaining, 2 * s.p));
  }
  --s.batch_remaining_chunks;
  return std::max<Count>(1, ceil_count(s.weights[thread_id] * static_cast<double>(s.batch_chunk_size)));
}

/// Record a finished chunk for AF: one observation of the mean time per
/// iteration, from which the per-thread mean and sample deviation follow.
inline void af_record(SchedulerState& s, Count thread_id, Count executed_iters, Time compute_time) {
  if (executed_iters == 0) return;
  const double x = compute_time / static_cast<double>(executed_iters);
  const Count i = thread_id;
  s.thread_obs_count.at(i) += 1;
  s.thread_obs_sum[i] += x;
  s.thread_obs_sum_sq[i] += x * x;
  const double c = static_cast<double>(s.thread_obs_count[i]);
  s.thread_mu[i] = s.thread_obs_sum[i] / c;
  if (s.thread_obs_count[i] > 1) {
    const double var = (s.thread_obs_sum_sq[i] - c * s.thread_mu[i] * s.thread_mu[i]) / (c - 1.0);
    s.thread_sigma[i] = std::sqrt(std::max(0.0, var));
  } else {
    s.thread_sigma[i] = 0.0;
  }
}

inline constexpr Count kAfBootstrapChunk = 100;

/// Adaptive factoring. Until every thread has executed a chunk the request
/// gets the bootstrap size; afterwards the chunk follows from the measured
/// per-thread means and deviations.
inline Count af_chunk(const SchedulerState& s, Count thread_id) {
  const bool all_measured = std::all_of(s.thread_obs_count.begin(), s.thread_obs_count.end(),
                                        [](Count c) { return c > 0; });
  if (!all_measured) {
    return std::max(kAfBootstrapChunk, s.chunk_param);
  }
  double min_pos = std::numeric_limits<double>::infinity();
  for (double m : s.thread_mu) {
    if (m > 0.0) min_pos = std::min(min_pos, m);
  }
  if (!std::isfinite(min_pos)) {
    min_pos = 1.0;
  }
  auto mu_of = [&](Count i) { return s.thread_mu[i] > 0.0 ? s.thread_mu[i] : min_pos; };

  double d = 0.0;
  double inv_sum = 0.0;
  for (Count i = 0; i < s.p; ++i) {
    const double mu = mu_of(i);
    d += s.thread_sigma[i] * s.thread_sigma[i] / mu;
    inv_sum += 1.0 / mu;
  }
  const double t = 1.0 / inv_sum;
  const double r = static_cast<double>(s.remaining);
  const double cs = (d + 2.0 * t * r - std::sqrt(d * d + 4.0 * d * t * r)) / (2.0 * mu_of(thread_id));
  return std::max<Count>(1, ceil_count(cs));
}

/// Expert chunk parameter: candidates ceil(N / (i P)) for i = 2, 4, 8, ...
/// down to 1, picked at the golden-ratio point 0.618 of the list.
inline Count exp_chunk(Count n, Count p) {
  if (n < 1 || p < 1) throw std::invalid_argument("exp_chunk: n and p must be >= 1");
  std::vector<Count> candidates;
  for (Count i = 2;; i *= 2) {
    const Count c = std::max<Count>(1, ceil_div(n, i * p));
    candidates.push_back(c);
    if (c == 1 || i > std::numeric_limits<Count>::max() / 4 / p) break;
  }
  const double pos = 0.618 * static_cast<double>(candidates.size() - 1);
  return candidates[static_cast<std::size_t>(std::lround(pos))];
}

/// Chunk parameter policy of a run: the runtime default (1) or expChunk.
enum class ChunkMode : std::uint8_t { Default, ExpChunk };

constexpr std::string_view to_string(ChunkMode m) noexcept {
  return m == ChunkMode::Default ? "default" : "expchunk";
}

inline std::optional<ChunkMode> parse_chunk_mode(std::string_view s) noexcept {
  if (s == "default") return ChunkMode::Default;
  if (s == "expchunk") return ChunkMode::ExpChunk;
  return std::nullopt;
}

inline Count chunk_param_for(ChunkMode mode, Count n, Count p) {
  return mode == ChunkMode::Default ? 1 : exp_chunk(n, p);
}

/// Initial contiguous blocks for static steal, one per thread.
struct StaticStealPlan {
  std::vector<std::pair<Count, Count>> blocks;  // [begin, end)

  static StaticStealPlan make(Count n, Count p) {
    StaticStealPlan plan;
    Count begin = 0;
    for (Count size : static_block_sizes(n, p)) {
      plan.blocks.emplace_back(begin, begin + size);
      begin += size;
    }
    return plan;
  }

  /// Victim with the most unclaimed iterations, lowest id on ties; nullopt
  /// when nobody has work left.
  static std::optional<Count> pick_victim(const std::vector<std::pair<Count, Count>>& ranges) {
    std::optional<Count> best;
    Count best_left = 0;
    for (Count i = 0; i < ranges.size(); ++i) {
      const Count left = ranges[i].second - ranges[i].first;
      if (left > best_left) {
        best_left = left;
        best = i;
      }
    }
    return best;
  }

  /// Iterations taken from a victim with `victim_left` unclaimed.
  static constexpr Count steal_amount(Count victim_left) noexcept { return (victim_left + 1) / 2; }
};

/// Chunk delivered to `thread_id` by a self-scheduling kind. Applies the
/// threshold rule, clamps to the remaining iterations and consumes them.
/// STATIC_STEAL is driven by the simulator, not by this function.
inline Count next_chunk(SchedulerState& s, SchedulerKind kind, Count thread_id) {
  if (s.remaining == 0) return 0;
  Count calc = 0;
  bool threshold = true;
  switch (kind) {
    case SchedulerKind::Static:
    case SchedulerKind::AutoLLVM:
      calc = static_chunk(s);
      threshold = false;
      break;
    case SchedulerKind::SS: calc = ss_chunk(s); break;
    case SchedulerKind::GSS: calc = gss_chunk(s); break;
    case SchedulerKind::TSS: calc = tss_chunk(s); break;
    case SchedulerKind::FAC: calc = fac_chunk(s, s.fac_mu, s.fac_sigma); break;
    case SchedulerKind::FAC2:
    case SchedulerKind::MFAC2: calc = fac2_chunk(s); break;
    case SchedulerKind::AWF_B:
    case SchedulerKind::AWF_C:
    case SchedulerKind::AWF_D:
    case SchedulerKind::AWF_E: calc = awf_chunk(s, thread_id, *awf_variant_of(kind)); break;
    case SchedulerKind::MAF: calc = af_chunk(s, thread_id); break;
    case SchedulerKind::StaticSteal:
      throw std::logic_error("static_steal chunks are planned by the simulator");
  }
  const Count delivered = threshold ? apply_chunk_threshold(calc, s.chunk_param, s.remaining)
                                    : std::min(calc, s.remaining);
  s.remaining -= delivered;
  return delivered;
}

/// Feed a completed chunk back to the adaptive kinds.
inline void record_chunk(SchedulerState& s, SchedulerKind kind, Count thread_id, Count iters,
                         Time compute_time, Time overhead) {
  if (auto v = awf_variant_of(kind)) {
    awf_update_weights(s, thread_id, iters, awf_counts_overhead(*v) ? compute_time + overhead
                                                                    : compute_time, *v);
  } else if (kind == SchedulerKind::MAF) {
    af_record(s, thread_id, iters, compute_time);
  }
}

}  // namespace autosched
