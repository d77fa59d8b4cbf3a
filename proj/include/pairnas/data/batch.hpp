#pragma once

#include <random>
#include <span>
#include <vector>

#include "pairnas/ad/tensor.hpp"
#include "pairnas/data/dataset.hpp"
#include "pairnas/data/embedding.hpp"

namespace pairnas::data {

struct EmbeddedBatch {
  ad::Tensor a;       // [B x Ta x D]
  ad::Tensor b;       // [B x Tb x D]
  ad::Tensor mask_a;  // [B x Ta]
  ad::Tensor mask_b;  // [B x Tb]
  std::vector<double> labels;

  int size() const { return static_cast<int>(labels.size()); }
  std::vector<int> classes() const;
};

EmbeddedBatch make_batch(const EmbeddingProvider& provider, const SentencePairDataset& data,
                         std::span<const std::size_t> indices);

// Minibatch index lists covering every example once, shuffled when rng is
// given; the last batch may be short.
std::vector<std::vector<std::size_t>> minibatches(std::size_t n, int batch_size, std::mt19937_64* rng = nullptr);

}  // namespace pairnas::data
