#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pairnas::data {

enum class TaskKind { Classification, Regression };

std::string_view task_name(TaskKind task);
TaskKind parse_task(std::string_view name);

struct LabelRange {
  double low = 0.0;
  double high = 1.0;
  bool contains(double v) const { return v >= low && v <= high; }
};

struct Example {
  std::string id;
  std::vector<std::string> a;
  std::vector<std::string> b;
  double label = 0.0;  // class index for classification
};

struct SentencePairDataset {
  std::string name;
  TaskKind task = TaskKind::Regression;
  LabelRange range;
  int token_cap = 0;  // 0 = uncapped
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
  // Throws ConfigError on an out-of-range label or a non-integer class.
  void validate() const;
};

// Task, label range and per-sentence token cap for a named benchmark
// ("mrpc", "stsb", "sick") or a synthetic stand-in ("synthetic-cls",
// "synthetic-reg").
struct DatasetProfile {
  std::string name;
  TaskKind task;
  LabelRange range;
  int token_cap;
};

DatasetProfile builtin_profile(std::string_view name);

// Whitespace tokenization, truncated to `cap` tokens when cap > 0.
std::vector<std::string> tokenize(std::string_view text, int cap = 0);

struct TsvOptions {
  bool header = false;
};

// sentence1 <TAB> sentence2 <TAB> label. Errors carry the line number.
SentencePairDataset load_tsv(const std::filesystem::path& path, const DatasetProfile& profile,
                             const TsvOptions& options = {});
void write_tsv(const std::filesystem::path& path, const SentencePairDataset& data);

// Shuffled, disjoint split; dev gets round(n * dev_fraction) examples.
// Throws DegenerateError when either side would be empty.
std::pair<SentencePairDataset, SentencePairDataset> split(const SentencePairDataset& data, double dev_fraction,
                                                          std::uint64_t seed);

struct SyntheticOptions {
  int vocab = 60;
  int min_len = 4;
  int max_len = 8;
  LabelRange range{0.0, 5.0};  // regression only
};

// Classification: B is a permutation of A (label 1) or a permutation of A
// with one token substituted (label 0), alternating. Regression: sentences
// of distinct tokens; label maps the Jaccard overlap of the two token sets
// linearly onto the range.
SentencePairDataset make_synthetic(TaskKind task, int n, std::uint64_t seed, const SyntheticOptions& options = {});

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);

}  // namespace pairnas::data
