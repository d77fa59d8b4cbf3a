#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "pairnas/cell/architecture.hpp"
#include "pairnas/data/metrics.hpp"
#include "pairnas/experiment/config.hpp"
#include "pairnas/hpt/study.hpp"
#include "pairnas/models/spec.hpp"
#include "pairnas/nas/search.hpp"
#include "pairnas/nas/train.hpp"

namespace pairnas::experiment {

// <output>/<dataset>.<embedding>.<model>.<tag>
std::filesystem::path run_directory(const ExperimentConfig& config, const std::string& tag);
// "E / L" -> "E-L"
std::string plan_tag(const std::vector<models::CellKind>& plan);

// Tuning space for a study; the architecture categorical is present only
// when `architectures` is non-empty.
hpt::SearchSpace tuning_space(const ExperimentConfig& config, const std::vector<cell::CellArchitecture>& architectures);

// Model and training settings for one trial. The "seed" hyperparameter
// seeds initialisation, shuffling and dropout together with the study seed.
models::ModelSpec trial_spec(const ExperimentConfig& config, const std::vector<models::CellKind>& plan,
                             const hpt::Assignment& params, int input_dim);
nas::TrainConfig trial_train_config(const ExperimentConfig& config, const hpt::Assignment& params);
std::uint64_t trial_model_seed(const ExperimentConfig& config, const hpt::Assignment& params);

// Builds, centres and trains the trial's model, scoring test when
// `with_test` is set. Providers with trainable mixing weights are reloaded
// per call so concurrent trials never share them. With an artifact
// directory the trained model and test predictions are written there.
nas::TrainResult run_trial(const ExperimentConfig& config, const Splits& splits,
                           const data::EmbeddingProvider& shared_provider, const std::vector<models::CellKind>& plan,
                           const hpt::Assignment& params, bool with_test,
                           const std::filesystem::path& artifact_dir = {});

struct StudyRequest {
  std::string command;
  std::vector<models::CellKind> plan;
  std::vector<cell::CellArchitecture> architectures;  // empty for LSTM-only studies
  std::string source_dataset;                         // transfer studies
  int trials = 20;
  std::filesystem::path run_dir;
};

struct StudyOutcome {
  std::filesystem::path run_dir;
  std::vector<hpt::Trial> trials;
  hpt::Trial best;
  bool tie = false;  // another trial reached the same dev metric
  data::MetricReport dev, test;
  nas::TrainResult retrain;  // best trial retrained with test evaluation
  double hpt_seconds = 0.0;
};

// Run directory layout:
//   config.json            snapshot of the request, written before any compute
//   space.json             the tuning space
//   study.jsonl            one record per trial
//   best.json              best trial with dev and test metrics and its curve
//   model.ckpt             the retrained best model
//   test_predictions.tsv
// Rerunning resumes the study; a directory holding a different request is
// refused with ConfigError.
StudyOutcome run_tuning(const ExperimentConfig& config, const StudyRequest& request, std::ostream& log);

StudyOutcome cmd_tune_baseline(const ExperimentConfig& config, std::ostream& log);

struct SearchOutcome {
  std::filesystem::path run_dir;
  nas::SearchResult result;
};

// Child hyperparameters come from the baseline study's best trial (in
// `baseline_dir`, or the default baseline directory when empty), else from
// config.search_overrides; overrides win over baseline values. Search-phase
// learning rate and clip are fixed at 1e-4 and 0.25.
SearchOutcome cmd_search(const ExperimentConfig& config, const std::filesystem::path& baseline_dir,
                         std::ostream& log);

// `plan` in E / L notation; E layers draw from the file's architectures.
StudyOutcome cmd_tune_derived(const ExperimentConfig& config, const std::filesystem::path& arch_file,
                              const std::string& plan, std::ostream& log);

// k distinct uniform architectures from `arch_seed`, written to
// random.arch in the run directory, then the derived-tuning protocol with
// RND layers wherever `plan` says E or RND.
StudyOutcome cmd_random_baseline(const ExperimentConfig& config, int k, std::uint64_t arch_seed,
                                 const std::string& plan, std::ostream& log);
std::vector<cell::CellArchitecture> sample_unique(int k, std::uint64_t seed, int num_nodes = cell::kDefaultNodes);

// Refuses a source equal to the target dataset, and any pair involving
// stsb (which contains data from the others) unless allow_overlap is set.
StudyOutcome cmd_transfer(const ExperimentConfig& config, const std::filesystem::path& source_arch_file,
                          const std::string& source_dataset, const std::string& plan, bool allow_overlap,
                          std::ostream& log);

std::string cmd_export_arch_table(const std::filesystem::path& arch_file);

}  // namespace pairnas::experiment
