#pragma once

#include <span>
#include <string>

#include "pairnas/data/dataset.hpp"

namespace pairnas::data {

struct PearsonResult {
  double value = 0.0;
  bool defined = false;  // false when either input has zero variance; value is then 0
};

// Throws DimensionError on length mismatch or fewer than two points.
PearsonResult pearson(std::span<const double> x, std::span<const double> y);

double accuracy(std::span<const int> predicted, std::span<const int> gold);
// F1 of the positive class (1). Zero when there are no true positives.
double f1_score(std::span<const int> predicted, std::span<const int> gold);

struct MetricReport {
  TaskKind task = TaskKind::Regression;
  double pearson = 0.0;
  bool pearson_defined = true;
  double accuracy = 0.0;
  double f1 = 0.0;

  // Pearson for regression, accuracy for classification.
  double primary() const { return task == TaskKind::Regression ? pearson : accuracy; }
  std::string to_string() const;
};

// Regression predictions are single values; classification predictions are
// class indices stored as doubles.
MetricReport score(TaskKind task, std::span<const double> predictions, std::span<const double> gold);

}  // namespace pairnas::data
