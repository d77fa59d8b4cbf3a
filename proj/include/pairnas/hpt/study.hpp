#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "pairnas/hpt/space.hpp"
#include "pairnas/hpt/tpe.hpp"

namespace pairnas::hpt {

enum class TrialStatus { Pending, Running, Done, Failed };
enum class SamplerMode { Tpe, Random };

std::string_view status_name(TrialStatus s);
std::string_view mode_name(SamplerMode m);
SamplerMode parse_mode(std::string_view name);

struct Trial {
  int id = 0;
  Assignment params;
  TrialStatus status = TrialStatus::Pending;
  double objective = 0.0;  // finite when done
  double seconds = 0.0;
  std::string reason;      // set when failed
};

struct TrialContext {
  int id = 0;
  std::uint64_t seed = 0;  // for the objective's own randomness
};

// Higher is better. Throwing marks the trial failed.
using Objective = std::function<double(const Assignment&, const TrialContext&)>;

struct StudyOptions {
  int n_trials = 20;
  int concurrency = 1;
  SamplerMode mode = SamplerMode::Tpe;
  std::uint64_t seed = 0;
  TpeConfig tpe;
  std::filesystem::path log_path;  // JSON lines; empty disables persistence
};

// Deterministic per-(study seed, trial id) streams, so assignments in random
// mode do not depend on concurrency or completion order.
std::mt19937_64 suggestion_rng(std::uint64_t study_seed, int trial_id);
std::uint64_t trial_seed(std::uint64_t study_seed, int trial_id);

// Runs trials 0..n_trials-1 with up to `concurrency` in flight. Suggestions
// use whatever results have arrived (asynchronous, possibly stale). Trials
// already recorded in the log are kept and not rerun. Log records are
// appended in trial-id order. Returns all trials sorted by id.
std::vector<Trial> run_study(const SearchSpace& space, const Objective& objective, const StudyOptions& options);

// Highest objective among done trials, ties to the lower id. Throws
// DegenerateError when no trial finished.
const Trial& best_trial(const std::vector<Trial>& trials);

std::string trial_to_json(const Trial& t);
Trial trial_from_json(std::string_view line);
std::vector<Trial> read_study_log(const std::filesystem::path& path);

}  // namespace pairnas::hpt
