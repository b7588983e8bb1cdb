#pragma once

// Campaign configuration: line-oriented `key = value` entries grouped in
// sections. Lists are comma separated, `#` starts a comment.
//
//   [campaign]            name, repetitions, base_seed, methods, chunk_modes,
//                         record_chunks
//   [rl]                  alpha, gamma, alpha_decay, reward (list: lt, lib),
//                         r_pos, r_neutral, r_neg
//   [expertsel]           static_like, non_adaptive, adaptive
//   [workload <name>]     kind, n, t, seed, path, plus kind parameters
//   [system <name>]       p, h, noise_sigma, seed, speed, start_offset
//
// speed and start_offset take either one value for every thread or exactly p
// values.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "autosched/core.hpp"
#include "autosched/csv.hpp"
#include "autosched/schedulers.hpp"
#include "autosched/selection.hpp"
#include "autosched/workloads.hpp"

namespace autosched {

enum class MethodKind : std::uint8_t { Constant, RandomSel, ExhaustiveSel, ExpertSel, QLearn, Sarsa, Oracle };

struct MethodSpec {
  MethodKind kind = MethodKind::Constant;
  SchedulerKind constant = SchedulerKind::Static;

  bool uses_reward() const noexcept { return kind == MethodKind::QLearn || kind == MethodKind::Sarsa; }

  std::string name() const {
    switch (kind) {
      case MethodKind::Constant: return std::string(to_string(constant));
      case MethodKind::RandomSel: return "randomsel";
      case MethodKind::ExhaustiveSel: return "exhaustivesel";
      case MethodKind::ExpertSel: return "expertsel";
      case MethodKind::QLearn: return "qlearn";
      case MethodKind::Sarsa: return "sarsa";
      case MethodKind::Oracle: return "oracle";
    }
    return "?";
  }

  static std::optional<MethodSpec> parse(std::string_view s) {
    if (auto k = parse_scheduler(s)) return MethodSpec{MethodKind::Constant, *k};
    if (s == "randomsel") return MethodSpec{MethodKind::RandomSel};
    if (s == "exhaustivesel") return MethodSpec{MethodKind::ExhaustiveSel};
    if (s == "expertsel") return MethodSpec{MethodKind::ExpertSel};
    if (s == "qlearn") return MethodSpec{MethodKind::QLearn};
    if (s == "sarsa") return MethodSpec{MethodKind::Sarsa};
    if (s == "oracle") return MethodSpec{MethodKind::Oracle};
    return std::nullopt;
  }

  bool operator==(const MethodSpec&) const = default;
};

struct NamedWorkload {
  std::string name;
  WorkloadSpec spec;
  bool operator==(const NamedWorkload&) const = default;
};

struct NamedSystem {
  std::string name;
  SystemModel model;
  bool operator==(const NamedSystem&) const = default;
};

struct Campaign {
  std::string name = "campaign";
  std::vector<NamedWorkload> workloads;
  std::vector<NamedSystem> systems;
  std::vector<MethodSpec> methods;
  std::vector<ChunkMode> chunk_modes{ChunkMode::Default};
  std::vector<RewardKind> rewards{RewardKind::LT};
  Count repetitions = 5;
  std::uint64_t base_seed = 0;
  bool record_chunks = false;
  RLConfig rl;
  ExpertMembers expert;

  /// Number of (workload, system, method, chunk mode, reward) cells; RL
  /// methods are crossed with every reward kind.
  Count cell_count() const {
    Count per_mode = 0;
    for (const auto& m : methods) per_mode += m.uses_reward() ? rewards.size() : 1;
    return workloads.size() * systems.size() * chunk_modes.size() * per_mode;
  }

  bool operator==(const Campaign&) const = default;
};

namespace detail {

inline std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += items[i];
  }
  return out;
}

inline bool valid_name(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

class ConfigParser {
 public:
  Campaign parse(std::istream& in) {
    std::string raw;
    while (std::getline(in, raw)) {
      ++line_;
      std::string_view text = raw;
      if (auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
      text = csv::trim(text);
      if (text.empty()) continue;
      if (text.front() == '[') {
        section(text);
        continue;
      }
      const auto eq = text.find('=');
      if (eq == std::string_view::npos) fail("expected 'key = value'");
      const auto key = std::string(csv::trim(text.substr(0, eq)));
      const auto value = csv::trim(text.substr(eq + 1));
      if (key.empty()) fail("empty key");
      entry(key, value);
    }
    finish();
    return std::move(c_);
  }

 private:
  enum class Section { None, Campaign, RL, Expert, Workload, System };

  [[noreturn]] void fail(const std::string& what) const { throw csv::ParseError(line_, what); }

  void section(std::string_view text) {
    if (text.back() != ']') fail("unterminated section header");
    const auto inner = csv::trim(text.substr(1, text.size() - 2));
    const auto space = inner.find_first_of(" \t");
    const auto head = inner.substr(0, space);
    const auto arg = space == std::string_view::npos ? std::string_view{} : csv::trim(inner.substr(space));
    auto need_name = [&] {
      if (!valid_name(arg)) fail("section [" + std::string(head) + "] needs a name of [A-Za-z0-9_.-]");
      return std::string(arg);
    };
    if (head == "campaign" && arg.empty()) {
      cur_ = Section::Campaign;
    } else if (head == "rl" && arg.empty()) {
      cur_ = Section::RL;
    } else if (head == "expertsel" && arg.empty()) {
      cur_ = Section::Expert;
    } else if (head == "workload") {
      cur_ = Section::Workload;
      const auto name = need_name();
      for (const auto& w : c_.workloads) {
        if (w.name == name) fail("duplicate workload '" + name + "'");
      }
      c_.workloads.push_back({name, WorkloadSpec{}});
      workload_lines_.push_back(line_);
    } else if (head == "system") {
      cur_ = Section::System;
      const auto name = need_name();
      for (const auto& s : c_.systems) {
        if (s.name == name) fail("duplicate system '" + name + "'");
      }
      SystemModel m;
      m.speed.clear();
      m.start_offset.clear();
      c_.systems.push_back({name, m});
      system_lines_.push_back(line_);
    } else {
      fail("unknown section [" + std::string(inner) + "]");
    }
    seen_.clear();
  }

  double real(std::string_view v) const {
    auto d = csv::parse_double(v);
    if (!d || !std::isfinite(*d)) fail("expected a number, got '" + std::string(v) + "'");
    return *d;
  }

  Count count(std::string_view v) const {
    auto d = csv::parse_count(v);
    if (!d) fail("expected a non-negative integer, got '" + std::string(v) + "'");
    return *d;
  }

  bool flag(std::string_view v) const {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail("expected true or false, got '" + std::string(v) + "'");
  }

  std::vector<double> reals(std::string_view v) const {
    std::vector<double> out;
    for (auto f : csv::split(v)) out.push_back(real(f));
    return out;
  }

  SchedulerKind scheduler(std::string_view v) const {
    auto k = parse_scheduler(v);
    if (!k) fail("unknown scheduler '" + std::string(v) + "'");
    return *k;
  }

  void entry(const std::string& key, std::string_view value) {
    if (!seen_.insert(key).second) fail("duplicate key '" + key + "'");
    switch (cur_) {
      case Section::None: fail("entry outside of any section");
      case Section::Campaign: campaign_entry(key, value); break;
      case Section::RL: rl_entry(key, value); break;
      case Section::Expert: expert_entry(key, value); break;
      case Section::Workload: workload_entry(key, value); break;
      case Section::System: system_entry(key, value); break;
    }
  }

  void campaign_entry(const std::string& key, std::string_view v) {
    if (key == "name") {
      if (!valid_name(v)) fail("campaign name must match [A-Za-z0-9_.-]+");
      c_.name = std::string(v);
    } else if (key == "repetitions") {
      c_.repetitions = count(v);
      if (c_.repetitions < 1) fail("repetitions must be >= 1");
    } else if (key == "base_seed") {
      c_.base_seed = count(v);
    } else if (key == "record_chunks") {
      c_.record_chunks = flag(v);
    } else if (key == "methods") {
      for (auto f : csv::split(v)) {
        auto m = MethodSpec::parse(f);
        if (!m) fail("unknown method '" + std::string(f) + "'");
        if (std::find(c_.methods.begin(), c_.methods.end(), *m) != c_.methods.end()) {
          fail("method '" + std::string(f) + "' listed twice");
        }
        c_.methods.push_back(*m);
      }
    } else if (key == "chunk_modes") {
      c_.chunk_modes.clear();
      for (auto f : csv::split(v)) {
        auto m = parse_chunk_mode(f);
        if (!m) fail("unknown chunk mode '" + std::string(f) + "'");
        if (std::find(c_.chunk_modes.begin(), c_.chunk_modes.end(), *m) != c_.chunk_modes.end()) {
          fail("chunk mode listed twice");
        }
        c_.chunk_modes.push_back(*m);
      }
    } else {
      fail("unknown key '" + key + "' in [campaign]");
    }
  }

  void rl_entry(const std::string& key, std::string_view v) {
    auto& rl = c_.rl;
    if (key == "alpha") {
      rl.alpha = real(v);
      if (rl.alpha < 0.0 || rl.alpha > 1.0) fail("alpha must be in [0, 1]");
    } else if (key == "gamma") {
      rl.gamma = real(v);
      if (rl.gamma < 0.0 || rl.gamma > 1.0) fail("gamma must be in [0, 1]");
    } else if (key == "alpha_decay") {
      rl.alpha_decay = real(v);
      if (rl.alpha_decay < 0.0) fail("alpha_decay must be >= 0");
    } else if (key == "r_pos") {
      rl.r_pos = real(v);
    } else if (key == "r_neutral") {
      rl.r_neutral = real(v);
    } else if (key == "r_neg") {
      rl.r_neg = real(v);
    } else if (key == "reward") {
      c_.rewards.clear();
      for (auto f : csv::split(v)) {
        auto r = parse_reward_kind(f);
        if (!r) fail("unknown reward kind '" + std::string(f) + "'");
        if (std::find(c_.rewards.begin(), c_.rewards.end(), *r) != c_.rewards.end()) {
          fail("reward kind listed twice");
        }
        c_.rewards.push_back(*r);
      }
      rl.reward_kind = c_.rewards.front();
    } else {
      fail("unknown key '" + key + "' in [rl]");
    }
    if (key.starts_with("r_")) rl_line_ = line_;
  }

  void expert_entry(const std::string& key, std::string_view v) {
    if (key == "static_like") {
      c_.expert.static_like = scheduler(v);
    } else if (key == "non_adaptive") {
      c_.expert.non_adaptive = scheduler(v);
    } else if (key == "adaptive") {
      c_.expert.adaptive = scheduler(v);
    } else {
      fail("unknown key '" + key + "' in [expertsel]");
    }
    const SchedulerKind k = scheduler(v);
    if (k == SchedulerKind::FAC || k == SchedulerKind::FAC2) fail("expertsel members must be portfolio kinds");
  }

  void workload_entry(const std::string& key, std::string_view v) {
    auto& w = c_.workloads.back().spec;
    if (key == "kind") {
      auto k = parse_workload_kind(v);
      if (!k) fail("unknown workload kind '" + std::string(v) + "'");
      w.kind = *k;
    } else if (key == "n") {
      w.n = count(v);
      if (w.n < 1) fail("n must be >= 1");
    } else if (key == "t") {
      w.t = count(v);
      if (w.t < 1) fail("t must be >= 1");
    } else if (key == "seed") {
      w.seed = count(v);
    } else if (key == "path") {
      w.path = std::string(v);
    } else {
      w.params[key] = real(v);
    }
  }

  void system_entry(const std::string& key, std::string_view v) {
    auto& s = c_.systems.back().model;
    if (key == "p") {
      s.p = count(v);
      if (s.p < 1) fail("p must be >= 1");
    } else if (key == "h") {
      s.h = real(v);
      if (s.h < 0.0) fail("h must be >= 0");
    } else if (key == "noise_sigma") {
      s.noise_sigma = real(v);
      if (s.noise_sigma < 0.0) fail("noise_sigma must be >= 0");
    } else if (key == "seed") {
      s.seed = count(v);
    } else if (key == "speed") {
      s.speed = reals(v);
      for (double x : s.speed) {
        if (!(x > 0.0)) fail("speed entries must be > 0");
      }
    } else if (key == "start_offset") {
      s.start_offset = reals(v);
      for (double x : s.start_offset) {
        if (x < 0.0) fail("start_offset entries must be >= 0");
      }
    } else {
      fail("unknown key '" + key + "' in [system]");
    }
  }

  void finish() {
    for (std::size_t i = 0; i < c_.workloads.size(); ++i) {
      try {
        validate(c_.workloads[i].spec);
      } catch (const std::invalid_argument& e) {
        throw csv::ParseError(workload_lines_[i], e.what());
      }
    }
    for (std::size_t i = 0; i < c_.systems.size(); ++i) {
      auto& s = c_.systems[i].model;
      auto expand = [&](std::vector<double>& v, double fallback, const char* what) {
        if (v.empty()) v.assign(s.p, fallback);
        if (v.size() == 1) v.assign(s.p, v.front());
        if (v.size() != s.p) {
          throw csv::ParseError(system_lines_[i], std::string(what) + " needs 1 or p values");
        }
      };
      expand(s.speed, 1.0, "speed");
      expand(s.start_offset, 0.0, "start_offset");
    }
    try {
      c_.rl.validate();
    } catch (const std::invalid_argument& e) {
      throw csv::ParseError(rl_line_ ? rl_line_ : line_, e.what());
    }
    if (c_.workloads.empty()) throw csv::ParseError(line_, "no [workload] section");
    if (c_.systems.empty()) throw csv::ParseError(line_, "no [system] section");
    if (c_.methods.empty()) throw csv::ParseError(line_, "[campaign] methods is empty");
  }

  Campaign c_;
  Section cur_ = Section::None;
  std::size_t line_ = 0;
  std::size_t rl_line_ = 0;
  std::vector<std::size_t> workload_lines_;
  std::vector<std::size_t> system_lines_;
  std::set<std::string> seen_;
};

inline std::string list(const std::vector<double>& v) {
  std::vector<std::string> s;
  for (double x : v) s.push_back(csv::format(x));
  return join(s);
}

}  // namespace detail

/// Parse a campaign. Errors are csv::ParseError carrying the line number.
inline Campaign parse_config(std::istream& in) { return detail::ConfigParser{}.parse(in); }

inline Campaign parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline Campaign parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  return parse_config(in);
}

/// Canonical text form; parse_config(dump_config(c)) == c.
inline std::string dump_config(const Campaign& c) {
  std::ostringstream os;
  std::vector<std::string> methods;
  for (const auto& m : c.methods) methods.push_back(m.name());
  std::vector<std::string> modes;
  for (auto m : c.chunk_modes) modes.emplace_back(to_string(m));
  std::vector<std::string> rewards;
  for (auto r : c.rewards) rewards.emplace_back(to_string(r));

  os << "[campaign]\n"
     << "name = " << c.name << '\n'
     << "repetitions = " << c.repetitions << '\n'
     << "base_seed = " << c.base_seed << '\n'
     << "methods = " << detail::join(methods) << '\n'
     << "chunk_modes = " << detail::join(modes) << '\n'
     << "record_chunks = " << (c.record_chunks ? "true" : "false") << "\n\n";
  os << "[rl]\n"
     << "alpha = " << csv::format(c.rl.alpha) << '\n'
     << "gamma = " << csv::format(c.rl.gamma) << '\n'
     << "alpha_decay = " << csv::format(c.rl.alpha_decay) << '\n'
     << "reward = " << detail::join(rewards) << '\n'
     << "r_pos = " << csv::format(c.rl.r_pos) << '\n'
     << "r_neutral = " << csv::format(c.rl.r_neutral) << '\n'
     << "r_neg = " << csv::format(c.rl.r_neg) << "\n\n";
  os << "[expertsel]\n"
     << "static_like = " << to_string(c.expert.static_like) << '\n'
     << "non_adaptive = " << to_string(c.expert.non_adaptive) << '\n'
     << "adaptive = " << to_string(c.expert.adaptive) << "\n";
  for (const auto& [name, w] : c.workloads) {
    os << "\n[workload " << name << "]\n"
       << "kind = " << to_string(w.kind) << '\n'
       << "n = " << w.n << '\n'
       << "t = " << w.t << '\n'
       << "seed = " << w.seed << '\n';
    if (!w.path.empty()) os << "path = " << w.path << '\n';
    for (const auto& [k, v] : w.params) os << k << " = " << csv::format(v) << '\n';
  }
  for (const auto& [name, s] : c.systems) {
    os << "\n[system " << name << "]\n"
       << "p = " << s.p << '\n'
       << "h = " << csv::format(s.h) << '\n'
       << "noise_sigma = " << csv::format(s.noise_sigma) << '\n'
       << "seed = " << s.seed << '\n'
       << "speed = " << detail::list(s.speed) << '\n'
       << "start_offset = " << detail::list(s.start_offset) << '\n';
  }
  return os.str();
}

}  // namespace autosched
