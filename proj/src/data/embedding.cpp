#include "pairnas/data/embedding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pairnas/ad/ops.hpp"
#include "pairnas/data/dataset.hpp"
#include "pairnas/error.hpp"

namespace pairnas::data {

namespace {

std::vector<double> parse_floats(const std::vector<std::string_view>& fields, std::size_t first, int line_no) {
  std::vector<double> out;
  for (std::size_t i = first; i < fields.size(); ++i) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(fields[i].data(), fields[i].data() + fields[i].size(), v);
    if (ec != std::errc() || ptr != fields[i].data() + fields[i].size() || !std::isfinite(v)) {
      throw ParseError("bad number '" + std::string(fields[i]) + "'", line_no);
    }
    out.push_back(v);
  }
  return out;
}

std::vector<std::string_view> fields_of(const std::string& line) {
  std::vector<std::string_view> out;
  std::string_view s(line);
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

StaticLookup::StaticLookup(int dim, std::unordered_map<std::string, std::vector<double>> table)
    : dim_(dim), table_(std::move(table)) {
  if (dim <= 0) throw ConfigError("embedding dimension must be positive");
  for (const auto& [token, v] : table_) {
    if (static_cast<int>(v.size()) != dim) throw DimensionError("embedding for '" + token + "' has wrong width");
  }
}

StaticLookup StaticLookup::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open embedding file " + path.string());
  std::unordered_map<std::string, std::vector<double>> table;
  int dim = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = fields_of(line);
    if (fields.empty()) continue;
    if (fields.size() < 2) throw ParseError("embedding row needs a token and at least one value", line_no);
    auto values = parse_floats(fields, 1, line_no);
    if (dim == 0) dim = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != dim) {
      throw ParseError("expected " + std::to_string(dim) + " values, found " + std::to_string(values.size()), line_no);
    }
    table[std::string(fields[0])] = std::move(values);
  }
  if (dim == 0) throw ParseError("embedding file is empty");
  return StaticLookup(dim, std::move(table));
}

bool StaticLookup::lookup(const TokenKey& key, int, std::span<double> out) const {
  auto it = table_.find(std::string(key.token));
  if (it == table_.end()) {
    std::fill(out.begin(), out.end(), 0.0);
    return false;
  }
  std::copy(it->second.begin(), it->second.end(), out.begin());
  return true;
}

MultiLayerLookup::MultiLayerLookup(int dim, int layers, std::unordered_map<std::string, std::vector<double>> table,
                                   LayerKeying keying)
    : dim_(dim), layers_(layers), keying_(keying), table_(std::move(table)), weights_(ad::Tensor::zeros({layers}, true)) {
  if (dim <= 0 || layers <= 0) throw ConfigError("multi-layer embedding needs positive dim and layer count");
  for (const auto& [token, v] : table_) {
    if (static_cast<int>(v.size()) != dim * layers) {
      throw DimensionError("multi-layer embedding for '" + token + "' has wrong width");
    }
  }
}

MultiLayerLookup MultiLayerLookup::load(const std::filesystem::path& path, LayerKeying keying) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open embedding file " + path.string());
  struct Row {
    int layer;
    std::vector<double> values;
    int line;
  };
  std::unordered_map<std::string, std::vector<Row>> rows;
  int dim = 0, layers = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = fields_of(line);
    if (fields.empty()) continue;
    if (fields.size() < 3) throw ParseError("multi-layer row needs token, layer and values", line_no);
    int layer = -1;
    auto [ptr, ec] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), layer);
    if (ec != std::errc() || ptr != fields[1].data() + fields[1].size() || layer < 0) {
      throw ParseError("bad layer index '" + std::string(fields[1]) + "'", line_no);
    }
    auto values = parse_floats(fields, 2, line_no);
    if (dim == 0) dim = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != dim) {
      throw ParseError("expected " + std::to_string(dim) + " values, found " + std::to_string(values.size()), line_no);
    }
    layers = std::max(layers, layer + 1);
    rows[std::string(fields[0])].push_back({layer, std::move(values), line_no});
  }
  if (dim == 0) throw ParseError("embedding file is empty");
  std::unordered_map<std::string, std::vector<double>> table;
  for (auto& [token, list] : rows) {
    std::vector<double> flat(static_cast<std::size_t>(dim) * layers, 0.0);
    std::vector<bool> seen(layers, false);
    for (const auto& r : list) {
      if (seen[r.layer]) throw ParseError("duplicate layer " + std::to_string(r.layer) + " for '" + token + "'", r.line);
      seen[r.layer] = true;
      std::copy(r.values.begin(), r.values.end(), flat.begin() + static_cast<std::ptrdiff_t>(r.layer) * dim);
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
      throw ParseError("token '" + token + "' is missing layers", list.front().line);
    }
    table.emplace(token, std::move(flat));
  }
  return MultiLayerLookup(dim, layers, std::move(table), keying);
}

std::string MultiLayerLookup::pair_key(std::string_view pair_id, char side, int position) {
  return std::string(pair_id) + "/" + side + "/" + std::to_string(position);
}

bool MultiLayerLookup::lookup(const TokenKey& key, int layer, std::span<double> out) const {
  const std::string k = keying_ == LayerKeying::PairPosition && key.context
                            ? pair_key(key.context->pair_id, key.context->side, key.position)
                            : std::string(key.token);
  auto it = table_.find(k);
  if (it == table_.end()) {
    std::fill(out.begin(), out.end(), 0.0);
    return false;
  }
  auto begin = it->second.begin() + static_cast<std::ptrdiff_t>(layer) * dim_;
  std::copy(begin, begin + dim_, out.begin());
  return true;
}

ad::Tensor MultiLayerLookup::mix(const std::vector<ad::Tensor>& layers) const {
  if (static_cast<int>(layers.size()) != layers_) throw DimensionError("layer count mismatch in embedding mix");
  ad::Tensor p = ad::softmax(weights_, 0);
  ad::Tensor out = ad::scale_by(layers[0], ad::slice_last(p, 0, 1));
  for (int l = 1; l < layers_; ++l) out = ad::add(out, ad::scale_by(layers[l], ad::slice_last(p, l, 1)));
  return out;
}

std::vector<double> MultiLayerLookup::mixing_weights() const {
  ad::NoGradGuard guard;
  auto p = ad::softmax(weights_, 0);
  return {p.data().begin(), p.data().end()};
}

ToyHash::ToyHash(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim <= 0) throw ConfigError("embedding dimension must be positive");
}

bool ToyHash::lookup(const TokenKey& key, int, std::span<double> out) const {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed_;
  for (unsigned char c : key.token) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  for (double& v : out) v = static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  return true;
}

ad::Tensor embed_padded(const EmbeddingProvider& provider, const std::vector<const std::vector<std::string>*>& sentences,
                        const std::vector<TokenContext>& contexts) {
  if (sentences.empty()) throw DimensionError("cannot embed an empty batch");
  if (!contexts.empty() && contexts.size() != sentences.size()) throw DimensionError("one context per sentence");
  const int batch = static_cast<int>(sentences.size());
  const int d = provider.dim();
  int steps = 0;
  for (const auto* s : sentences) steps = std::max(steps, static_cast<int>(s->size()));
  if (steps == 0) throw DimensionError("every sentence in the batch is empty");
  std::vector<ad::Tensor> layers;
  for (int l = 0; l < provider.num_layers(); ++l) {
    std::vector<double> values(static_cast<std::size_t>(batch) * steps * d, 0.0);
    for (int b = 0; b < batch; ++b) {
      const auto& tokens = *sentences[b];
      for (int t = 0; t < static_cast<int>(tokens.size()); ++t) {
        TokenKey key{tokens[t], contexts.empty() ? nullptr : &contexts[b], t};
        provider.lookup(key, l, std::span<double>(values).subspan((static_cast<std::size_t>(b) * steps + t) * d, d));
      }
    }
    layers.emplace_back(ad::Shape{batch, steps, d}, std::move(values));
  }
  return provider.mix(layers);
}

ad::Tensor embed(const EmbeddingProvider& provider, const std::vector<std::string>& tokens,
                 const TokenContext* context) {
  std::vector<TokenContext> contexts;
  if (context) contexts.push_back(*context);
  ad::Tensor batched = embed_padded(provider, {&tokens}, contexts);
  return ad::reshape(batched, {batched.dim(1), batched.dim(2)});
}

std::unique_ptr<EmbeddingProvider> make_provider(std::string_view kind, const std::filesystem::path& path, int dim,
                                                 std::uint64_t seed) {
  if (kind == "toy-hash") return std::make_unique<ToyHash>(dim, seed);
  if (kind == "static") return std::make_unique<StaticLookup>(StaticLookup::load(path));
  if (kind == "multi-layer") return std::make_unique<MultiLayerLookup>(MultiLayerLookup::load(path));
  if (kind == "multi-layer-pair") {
    return std::make_unique<MultiLayerLookup>(MultiLayerLookup::load(path, LayerKeying::PairPosition));
  }
  throw ConfigError("unknown embedding kind '" + std::string(kind) + "'");
}

}  // namespace pairnas::data
