#include "pairnas/data/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "pairnas/error.hpp"

namespace pairnas::data {

std::string_view task_name(TaskKind task) {
  return task == TaskKind::Classification ? "classification" : "regression";
}

TaskKind parse_task(std::string_view name) {
  if (name == "classification") return TaskKind::Classification;
  if (name == "regression") return TaskKind::Regression;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

void SentencePairDataset::validate() const {
  for (const auto& ex : examples) {
    if (!range.contains(ex.label)) {
      throw ConfigError("example " + ex.id + ": label " + std::to_string(ex.label) + " outside [" +
                        std::to_string(range.low) + ", " + std::to_string(range.high) + "]");
    }
    if (task == TaskKind::Classification && ex.label != std::floor(ex.label)) {
      throw ConfigError("example " + ex.id + ": class label must be an integer");
    }
  }
}

DatasetProfile builtin_profile(std::string_view name) {
  if (name == "mrpc") return {"mrpc", TaskKind::Classification, {0, 1}, 46};
  if (name == "stsb") return {"stsb", TaskKind::Regression, {0, 5}, 39};
  if (name == "sick") return {"sick", TaskKind::Regression, {1, 5}, 30};
  if (name == "synthetic-cls") return {"synthetic-cls", TaskKind::Classification, {0, 1}, 0};
  if (name == "synthetic-reg") return {"synthetic-reg", TaskKind::Regression, {0, 5}, 0};
  throw ConfigError("unknown dataset profile '" + std::string(name) + "'");
}

std::vector<std::string> tokenize(std::string_view text, int cap) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) {
      if (cap > 0 && static_cast<int>(out.size()) == cap) break;
      out.emplace_back(text.substr(i, j - i));
    }
    i = j;
  }
  return out;
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace

SentencePairDataset load_tsv(const std::filesystem::path& path, const DatasetProfile& profile,
                             const TsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file " + path.string());
  SentencePairDataset data{profile.name, profile.task, profile.range, profile.token_cap, {}};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (options.header && line_no == 1) continue;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw ParseError("expected 3 tab-separated fields, found " + std::to_string(fields.size()), line_no);
    }
    Example ex;
    ex.id = std::to_string(line_no);
    ex.a = tokenize(fields[0], profile.token_cap);
    ex.b = tokenize(fields[1], profile.token_cap);
    if (ex.a.empty() || ex.b.empty()) throw ParseError("empty sentence", line_no);
    std::string_view label = fields[2];
    while (!label.empty() && label.back() == ' ') label.remove_suffix(1);
    while (!label.empty() && label.front() == ' ') label.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(label.data(), label.data() + label.size(), ex.label);
    if (ec != std::errc() || ptr != label.data() + label.size() || !std::isfinite(ex.label)) {
      throw ParseError("bad label '" + std::string(label) + "'", line_no);
    }
    if (!profile.range.contains(ex.label)) {
      throw ParseError("label " + std::string(label) + " outside [" + format_double(profile.range.low) + ", " +
                           format_double(profile.range.high) + "]",
                       line_no);
    }
    if (profile.task == TaskKind::Classification && ex.label != std::floor(ex.label)) {
      throw ParseError("class label must be an integer", line_no);
    }
    data.examples.push_back(std::move(ex));
  }
  return data;
}

void write_tsv(const std::filesystem::path& path, const SentencePairDataset& data) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (const auto& ex : data.examples) out << join(ex.a) << '\t' << join(ex.b) << '\t' << format_double(ex.label) << '\n';
}

std::pair<SentencePairDataset, SentencePairDataset> split(const SentencePairDataset& data, double dev_fraction,
                                                          std::uint64_t seed) {
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) throw ConfigError("dev fraction must be in (0, 1)");
  const std::size_t n = data.size();
  const auto dev_n = static_cast<std::size_t>(std::llround(static_cast<double>(n) * dev_fraction));
  if (dev_n == 0 || dev_n >= n) {
    throw DegenerateError("dataset of " + std::to_string(n) + " examples is too small to split");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  SentencePairDataset train{data.name, data.task, data.range, data.token_cap, {}};
  SentencePairDataset dev = train;
  for (std::size_t i = 0; i < n; ++i) (i < dev_n ? dev : train).examples.push_back(data.examples[order[i]]);
  return {std::move(train), std::move(dev)};
}

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  const std::size_t uni = sa.size() + sb.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

SentencePairDataset make_synthetic(TaskKind task, int n, std::uint64_t seed, const SyntheticOptions& options) {
  if (n < 8) throw ConfigError("synthetic datasets need at least 8 examples");
  if (options.min_len < 1 || options.max_len < options.min_len) throw ConfigError("bad synthetic length range");
  if (options.vocab < 2 * options.max_len) throw ConfigError("synthetic vocabulary too small for sentence length");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> length(options.min_len, options.max_len);
  std::uniform_int_distribution<int> word(0, options.vocab - 1);
  auto token = [](int w) { return "w" + std::to_string(w); };

  SentencePairDataset data;
  data.task = task;
  if (task == TaskKind::Classification) {
    data.name = "synthetic-cls";
    data.range = {0, 1};
    for (int i = 0; i < n; ++i) {
      Example ex;
      ex.id = "syn-" + std::to_string(i);
      const int len = length(rng);
      std::vector<int> words(len);
      for (int& w : words) w = word(rng);
      std::vector<int> other = words;
      const bool paraphrase = i % 2 == 0;
      if (!paraphrase) {
        const int pos = std::uniform_int_distribution<int>(0, len - 1)(rng);
        int replacement = word(rng);
        while (replacement == other[pos]) replacement = word(rng);
        other[pos] = replacement;
      }
      std::shuffle(other.begin(), other.end(), rng);
      for (int w : words) ex.a.push_back(token(w));
      for (int w : other) ex.b.push_back(token(w));
      ex.label = paraphrase ? 1.0 : 0.0;
      data.examples.push_back(std::move(ex));
    }
  } else {
    data.name = "synthetic-reg";
    data.range = options.range;
    std::vector<int> vocab(options.vocab);
    std::iota(vocab.begin(), vocab.end(), 0);
    for (int i = 0; i < n; ++i) {
      Example ex;
      ex.id = "syn-" + std::to_string(i);
      const int la = length(rng), lb = length(rng);
      std::shuffle(vocab.begin(), vocab.end(), rng);
      const int overlap = std::uniform_int_distribution<int>(0, std::min(la, lb))(rng);
      std::vector<int> a(vocab.begin(), vocab.begin() + la);
      std::vector<int> b(a.begin(), a.begin() + overlap);
      b.insert(b.end(), vocab.begin() + la, vocab.begin() + la + (lb - overlap));
      std::shuffle(b.begin(), b.end(), rng);
      for (int w : a) ex.a.push_back(token(w));
      for (int w : b) ex.b.push_back(token(w));
      const double j = static_cast<double>(overlap) / static_cast<double>(la + lb - overlap);
      ex.label = data.range.low + (data.range.high - data.range.low) * j;
      data.examples.push_back(std::move(ex));
    }
  }
  return data;
}

}  // namespace pairnas::data
