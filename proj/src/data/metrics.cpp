#include "pairnas/data/metrics.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "pairnas/error.hpp"

namespace pairnas::data {

PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("pearson inputs differ in length");
  if (x.size() < 2) throw DimensionError("pearson needs at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return {0.0, false};
  const double r = sxy / std::sqrt(sxx * syy);
  return {std::max(-1.0, std::min(1.0, r)), true};
}

double accuracy(std::span<const int> predicted, std::span<const int> gold) {
  if (predicted.size() != gold.size()) throw DimensionError("accuracy inputs differ in length");
  if (gold.empty()) throw DimensionError("accuracy of an empty set");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hit += predicted[i] == gold[i];
  return static_cast<double>(hit) / static_cast<double>(gold.size());
}

double f1_score(std::span<const int> predicted, std::span<const int> gold) {
  if (predicted.size() != gold.size()) throw DimensionError("f1 inputs differ in length");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predicted[i] == 1 && gold[i] == 1) ++tp;
    if (predicted[i] == 1 && gold[i] != 1) ++fp;
    if (predicted[i] != 1 && gold[i] == 1) ++fn;
  }
  return tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
}

std::string MetricReport::to_string() const {
  std::ostringstream out;
  if (task == TaskKind::Regression) {
    out << "pearson=" << pearson;
    if (!pearson_defined) out << " (undefined)";
  } else {
    out << "accuracy=" << accuracy << " f1=" << f1;
  }
  return out.str();
}

MetricReport score(TaskKind task, std::span<const double> predictions, std::span<const double> gold) {
  MetricReport report;
  report.task = task;
  if (task == TaskKind::Regression) {
    auto r = pearson(predictions, gold);
    report.pearson = r.value;
    report.pearson_defined = r.defined;
  } else {
    std::vector<int> p, g;
    for (double v : predictions) p.push_back(static_cast<int>(std::lround(v)));
    for (double v : gold) g.push_back(static_cast<int>(std::lround(v)));
    report.accuracy = accuracy(p, g);
    report.f1 = f1_score(p, g);
  }
  return report;
}

}  // namespace pairnas::data
