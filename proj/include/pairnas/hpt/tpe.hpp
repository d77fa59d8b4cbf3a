#pragma once

#include <random>
#include <vector>

#include "pairnas/hpt/space.hpp"

namespace pairnas::hpt {

struct TpeConfig {
  double gamma = 0.25;      // fraction of observations forming the "good" set
  int startup = 20;         // random suggestions before the model kicks in
  int candidates = 24;      // draws from the good density per parameter
  double prior_weight = 1.0;

  // Throws ConfigError.
  void validate() const;
};

// One finished trial as seen by the sampler. Failed trials carry -infinity.
struct Observation {
  const Assignment* params = nullptr;
  double objective = 0.0;
};

// Uniform per parameter (log-uniform on log-scale ranges).
Assignment sample_random(const SearchSpace& space, std::mt19937_64& rng);

// Random until `startup` observations exist. Afterwards the observations
// are split at the gamma quantile (objective maximized); each parameter
// gets a Parzen estimator over the good and the bad set (truncated
// Gaussians for continuous values, smoothed counts for categoricals) and
// takes the candidate drawn from the good density with the largest
// log l(x) - log g(x).
Assignment suggest_tpe(const SearchSpace& space, const std::vector<Observation>& history, const TpeConfig& config,
                       std::mt19937_64& rng);

}  // namespace pairnas::hpt
