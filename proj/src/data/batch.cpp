#include "pairnas/data/batch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pairnas/error.hpp"

namespace pairnas::data {

std::vector<int> EmbeddedBatch::classes() const {
  std::vector<int> out;
  out.reserve(labels.size());
  for (double v : labels) out.push_back(static_cast<int>(std::lround(v)));
  return out;
}

namespace {

ad::Tensor length_mask(const std::vector<const std::vector<std::string>*>& sentences, int steps) {
  const int batch = static_cast<int>(sentences.size());
  std::vector<double> m(static_cast<std::size_t>(batch) * steps, 0.0);
  for (int b = 0; b < batch; ++b) {
    const int len = static_cast<int>(sentences[b]->size());
    for (int t = 0; t < len; ++t) m[static_cast<std::size_t>(b) * steps + t] = 1.0;
  }
  return ad::Tensor({batch, steps}, std::move(m));
}

}  // namespace

EmbeddedBatch make_batch(const EmbeddingProvider& provider, const SentencePairDataset& data,
                         std::span<const std::size_t> indices) {
  if (indices.empty()) throw DimensionError("empty batch");
  std::vector<const std::vector<std::string>*> sa, sb;
  std::vector<TokenContext> ca, cb;
  EmbeddedBatch batch;
  for (std::size_t i : indices) {
    if (i >= data.size()) throw DimensionError("batch index out of range");
    const Example& ex = data.examples[i];
    if (ex.a.empty() || ex.b.empty()) throw DegenerateError("example " + ex.id + " has an empty sentence");
    sa.push_back(&ex.a);
    sb.push_back(&ex.b);
    ca.push_back({ex.id, 'a'});
    cb.push_back({ex.id, 'b'});
    batch.labels.push_back(ex.label);
  }
  batch.a = embed_padded(provider, sa, ca);
  batch.b = embed_padded(provider, sb, cb);
  batch.mask_a = length_mask(sa, batch.a.dim(1));
  batch.mask_b = length_mask(sb, batch.b.dim(1));
  return batch;
}

std::vector<std::vector<std::size_t>> minibatches(std::size_t n, int batch_size, std::mt19937_64* rng) {
  if (batch_size <= 0) throw ConfigError("batch size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (rng) std::shuffle(order.begin(), order.end(), *rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(batch_size)) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  }
  return out;
}

}  // namespace pairnas::data
