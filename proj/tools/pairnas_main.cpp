#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "pairnas/error.hpp"
#include "pairnas/experiment/commands.hpp"
#include "pairnas/experiment/report.hpp"

namespace ex = pairnas::experiment;

namespace {

struct GlobalFlags {
  std::string config, out, preset = "desk", sampler;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials, concurrency;
  bool memory_cap = false;
};

ex::ExperimentConfig resolve(const GlobalFlags& g) {
  ex::ExperimentConfig c = g.config.empty() ? ex::ExperimentConfig{} : ex::load_config(g.config);
  ex::apply_preset(c, g.preset);
  if (g.seed) c.seed = *g.seed;
  if (g.trials) c.budget.baseline_trials = c.budget.derived_trials = *g.trials;
  if (g.concurrency) c.budget.concurrency = *g.concurrency;
  if (!g.out.empty()) c.output = g.out;
  if (!g.sampler.empty()) c.budget.sampler = g.sampler;
  if (g.memory_cap) c.memory_cap = true;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sentence-pair models with searched recurrent cells"};
  app.require_subcommand(1);
  GlobalFlags g;
  app.add_option("--config", g.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Study and search seed");
  app.add_option("--trials", g.trials, "Trials per study");
  app.add_option("--concurrency", g.concurrency, "Concurrent trials");
  app.add_option("--out", g.out, "Root for run directories");
  app.add_option("--preset", g.preset, "Budget preset")->check(CLI::IsMember({"desk", "full"}));
  app.add_flag("--memory-cap", g.memory_cap, "Restrict hidden and batch sizes");
  app.add_option("--sampler", g.sampler, "Trial sampler")->check(CLI::IsMember({"tpe", "random"}));

  auto* baseline = app.add_subcommand("tune-baseline", "Tune the all-LSTM model");

  std::string baseline_dir;
  auto* search = app.add_subcommand("search", "Search for a cell and derive candidates");
  search->add_option("--baseline-dir", baseline_dir, "Baseline run directory supplying child hyperparameters");

  std::string arch_file, plan, source;
  auto* derived = app.add_subcommand("tune-derived", "Tune a model using derived cells");
  derived->add_option("--arch", arch_file, "Architecture file")->required()->check(CLI::ExistingFile);
  derived->add_option("--plan", plan, "Layer plan such as \"E / L\"")->required();

  int k = 10;
  std::uint64_t arch_seed = 0;
  auto* random = app.add_subcommand("random-baseline", "Tune a model using uniformly sampled cells");
  random->add_option("--k", k, "Number of sampled architectures")->capture_default_str();
  random->add_option("--arch-seed", arch_seed, "Seed for the sampled architectures")->capture_default_str();
  random->add_option("--plan", plan, "Layer plan such as \"RND / L\"")->required();

  bool allow_overlap = false;
  auto* transfer = app.add_subcommand("transfer", "Tune on this dataset with cells found on another");
  transfer->add_option("--arch", arch_file, "Source architecture file")->required()->check(CLI::ExistingFile);
  transfer->add_option("--source", source, "Source dataset name")->required();
  transfer->add_option("--plan", plan, "Layer plan such as \"E / L\"")->required();
  transfer->add_flag("--allow-overlap", allow_overlap, "Permit pairs involving stsb");

  std::vector<std::string> report_dirs;
  std::string tsv_path;
  auto* report = app.add_subcommand("report", "Summarise finished and pending studies");
  report->add_option("dirs", report_dirs, "Run directories or roots (default: --out)");
  report->add_option("--tsv", tsv_path, "Also write the table as TSV");

  auto* table = app.add_subcommand("export-arch-table", "Print an architecture file as a table");
  table->add_option("file", arch_file, "Architecture file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (table->parsed()) {
      std::cout << ex::cmd_export_arch_table(arch_file);
      return 0;
    }
    if (report->parsed()) {
      if (report_dirs.empty()) report_dirs.push_back(g.out.empty() ? resolve(g).output : g.out);
      std::vector<std::filesystem::path> paths(report_dirs.begin(), report_dirs.end());
      const auto rows = ex::collect_rows(paths);
      std::cout << ex::format_table(rows);
      if (!tsv_path.empty()) {
        std::ofstream out(tsv_path);
        if (!out) throw pairnas::ConfigError("cannot write " + tsv_path);
        out << ex::format_tsv(rows);
      }
      return 0;
    }
    const auto config = resolve(g);
    if (baseline->parsed()) {
      ex::cmd_tune_baseline(config, std::cout);
    } else if (search->parsed()) {
      ex::cmd_search(config, baseline_dir, std::cout);
    } else if (derived->parsed()) {
      ex::cmd_tune_derived(config, arch_file, plan, std::cout);
    } else if (random->parsed()) {
      ex::cmd_random_baseline(config, k, arch_seed, plan, std::cout);
    } else if (transfer->parsed()) {
      ex::cmd_transfer(config, arch_file, source, plan, allow_overlap, std::cout);
    }
  } catch (const pairnas::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
