// Command-line front end for campaigns.
//
//   autosched run <config> [--out DIR]
//   autosched oracle <config> [--out FILE]
//   autosched summarize <dir>
//   autosched dump-workload <spec|trace.csv> <path>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "autosched/config.hpp"
#include "autosched/experiments.hpp"
#include "autosched/workloads.hpp"

namespace {

using namespace autosched;

int cmd_run(const std::string& config, std::string out) {
  const Campaign c = parse_config_file(config);
  if (out.empty()) out = c.name;
  const auto results = run_campaign(c, out);
  std::cout << "wrote " << results.size() << " cells to " << out << "/summary.csv\n";
  return 0;
}

int cmd_oracle(const std::string& config, std::string out) {
  const Campaign c = parse_config_file(config);
  if (out.empty()) out = c.name + "_oracle.csv";
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot write " + out);
  write_oracle_table(c, os);
  std::cout << "wrote " << out << '\n';
  return 0;
}

int cmd_summarize(const std::string& dir) {
  const auto cells = summarize_directory(dir);
  write_selection_summary(std::cout, cells);
  return 0;
}

int cmd_dump_workload(const std::string& spec, const std::string& path) {
  // An existing file is taken as a trace; anything else as a spec string.
  const Workload w = std::filesystem::is_regular_file(spec) ? load_trace(spec)
                                                            : build_workload(parse_workload_spec(spec));
  dump_workload(w, path);
  std::cout << "wrote " << w.n_timesteps() << "x" << w.n_iterations() << " trace to " << path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"loop scheduling selection simulator"};
  app.require_subcommand(1);

  std::string config, out, dir, spec, path;

  auto* run = app.add_subcommand("run", "run a campaign and write summary.csv plus per-cell logs");
  run->add_option("config", config, "campaign config file")->required();
  run->add_option("--out", out, "output directory (default: campaign name)");

  auto* oracle = app.add_subcommand("oracle", "write per-step Oracle choices");
  oracle->add_option("config", config, "campaign config file")->required();
  oracle->add_option("--out", out, "output CSV (default: <name>_oracle.csv)");

  auto* summarize = app.add_subcommand("summarize", "selection shares per cell of a campaign directory");
  summarize->add_option("dir", dir, "campaign output directory")->required();

  auto* dump = app.add_subcommand("dump-workload", "materialize a workload as a trace CSV");
  dump->add_option("spec", spec, "workload spec (kind=...,n=...,t=...) or trace file")->required();
  dump->add_option("path", path, "output path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, out);
    if (*oracle) return cmd_oracle(config, out);
    if (*summarize) return cmd_summarize(dir);
    if (*dump) return cmd_dump_workload(spec, path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
