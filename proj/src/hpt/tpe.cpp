#include "pairnas/hpt/tpe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pairnas/error.hpp"

namespace pairnas::hpt {

void TpeConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("TPE gamma must be in (0, 1)");
  if (startup < 1) throw ConfigError("TPE startup must be at least 1");
  if (candidates < 1) throw ConfigError("TPE candidates must be at least 1");
  if (!(prior_weight > 0.0)) throw ConfigError("TPE prior weight must be positive");
}

namespace {

double to_internal(const ParamSpec& p, double v) { return p.log_scale ? std::log(v) : v; }

double from_internal(const ParamSpec& p, double t) {
  const double v = p.log_scale ? std::exp(t) : t;
  return std::clamp(v, p.low, p.high);
}

Value random_value(const ParamSpec& p, std::mt19937_64& rng) {
  if (p.kind == ParamKind::Categorical) {
    std::uniform_int_distribution<std::size_t> pick(0, p.choices.size() - 1);
    return p.choices[pick(rng)];
  }
  std::uniform_real_distribution<double> u(to_internal(p, p.low), to_internal(p, p.high));
  return from_internal(p, u(rng));
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Mixture of Gaussians truncated to [low, high], one component per
// observation plus a broad prior component at the centre.
struct Parzen {
  std::vector<double> mu, sigma, weight, mass;
  double low, high;

  Parzen(std::vector<double> points, double lo, double hi, double prior_weight) : low(lo), high(hi) {
    const double range = hi - lo;
    const double prior_mu = 0.5 * (lo + hi);
    struct Component {
      double mu, weight;
      bool prior;
      bool operator<(const Component& o) const { return mu < o.mu || (mu == o.mu && prior < o.prior); }
    };
    std::vector<Component> comps;
    for (double p : points) comps.push_back({p, 1.0, false});
    comps.push_back({prior_mu, prior_weight, true});
    std::sort(comps.begin(), comps.end());
    const std::size_t n = comps.size();
    const double min_sigma = range / std::min(100.0, 1.0 + static_cast<double>(points.size()));
    for (std::size_t i = 0; i < n; ++i) {
      const double left = comps[i].mu - (i == 0 ? lo : comps[i - 1].mu);
      const double right = (i + 1 == n ? hi : comps[i + 1].mu) - comps[i].mu;
      const double s = comps[i].prior ? range : std::clamp(std::max(left, right), min_sigma, range);
      mu.push_back(comps[i].mu);
      sigma.push_back(s);
      weight.push_back(comps[i].weight);
    }
    double total = 0.0;
    for (double w : weight) total += w;
    for (double& w : weight) w /= total;
    for (std::size_t i = 0; i < n; ++i) {
      mass.push_back(std::max(normal_cdf((hi - mu[i]) / sigma[i]) - normal_cdf((lo - mu[i]) / sigma[i]), 1e-300));
    }
  }

  double sample(std::mt19937_64& rng) const {
    std::discrete_distribution<std::size_t> pick(weight.begin(), weight.end());
    const std::size_t k = pick(rng);
    std::normal_distribution<double> g(mu[k], sigma[k]);
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double x = g(rng);
      if (x >= low && x <= high) return x;
    }
    return std::clamp(mu[k], low, high);
  }

  double log_density(double x) const {
    double total = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      const double z = (x - mu[i]) / sigma[i];
      total += weight[i] * std::exp(-0.5 * z * z) / (sigma[i] * std::sqrt(2.0 * std::numbers::pi) * mass[i]);
    }
    return std::log(std::max(total, 1e-300));
  }
};

std::vector<double> categorical_probs(const ParamSpec& p, const std::vector<const Assignment*>& set,
                                      double prior_weight) {
  const double k = static_cast<double>(p.choices.size());
  std::vector<double> w(p.choices.size(), prior_weight / k);
  for (const Assignment* a : set) {
    const std::string& c = choice(*a, p.name);
    auto it = std::find(p.choices.begin(), p.choices.end(), c);
    if (it != p.choices.end()) w[it - p.choices.begin()] += 1.0;
  }
  double total = 0.0;
  for (double v : w) total += v;
  for (double& v : w) v /= total;
  return w;
}

}  // namespace

Assignment sample_random(const SearchSpace& space, std::mt19937_64& rng) {
  Assignment a;
  for (const auto& p : space.params()) a[p.name] = random_value(p, rng);
  return a;
}

Assignment suggest_tpe(const SearchSpace& space, const std::vector<Observation>& history, const TpeConfig& config,
                       std::mt19937_64& rng) {
  config.validate();
  if (static_cast<int>(history.size()) < config.startup) return sample_random(space, rng);

  std::vector<Observation> sorted = history;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Observation& a, const Observation& b) { return a.objective > b.objective; });
  const std::size_t n_good = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(config.gamma * static_cast<double>(sorted.size()))));
  std::vector<const Assignment*> good, bad;
  for (std::size_t i = 0; i < sorted.size(); ++i) (i < n_good ? good : bad).push_back(sorted[i].params);

  Assignment out;
  for (const auto& p : space.params()) {
    if (p.kind == ParamKind::Categorical) {
      auto l = categorical_probs(p, good, config.prior_weight);
      auto g = categorical_probs(p, bad, config.prior_weight);
      std::discrete_distribution<std::size_t> pick(l.begin(), l.end());
      std::size_t best = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < config.candidates; ++c) {
        const std::size_t k = pick(rng);
        const double score = std::log(l[k]) - std::log(g[k]);
        if (score > best_score) {
          best_score = score;
          best = k;
        }
      }
      out[p.name] = p.choices[best];
      continue;
    }
    auto points = [&](const std::vector<const Assignment*>& set) {
      std::vector<double> v;
      for (const Assignment* a : set) v.push_back(to_internal(p, number(*a, p.name)));
      return v;
    };
    const double lo = to_internal(p, p.low), hi = to_internal(p, p.high);
    Parzen l(points(good), lo, hi, config.prior_weight);
    Parzen g(points(bad), lo, hi, config.prior_weight);
    double best = l.sample(rng);
    double best_score = l.log_density(best) - g.log_density(best);
    for (int c = 1; c < config.candidates; ++c) {
      const double x = l.sample(rng);
      const double score = l.log_density(x) - g.log_density(x);
      if (score > best_score) {
        best_score = score;
        best = x;
      }
    }
    out[p.name] = from_internal(p, best);
  }
  return out;
}

}  // namespace pairnas::hpt
