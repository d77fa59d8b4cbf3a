#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pairnas/ad/optimizer.hpp"
#include "pairnas/ad/tensor.hpp"

namespace pairnas::data {

// Where a token sits, for providers keyed on pair context.
struct TokenContext {
  std::string_view pair_id;
  char side = 'a';  // 'a' or 'b'
};

struct TokenKey {
  std::string_view token;
  const TokenContext* context = nullptr;
  int position = 0;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string_view kind() const = 0;
  virtual int dim() const = 0;
  virtual int num_layers() const { return 1; }
  // Fills `out` (dim() values) with the layer vector. Returns false for OOV,
  // in which case `out` is left zeroed.
  virtual bool lookup(const TokenKey& key, int layer, std::span<double> out) const = 0;
  // Combines per-layer [B x T x D] tensors. Single-layer providers pass the
  // only layer through.
  virtual ad::Tensor mix(const std::vector<ad::Tensor>& layers) const { return layers.front(); }
  // Trainable parameters (empty for frozen providers).
  virtual ad::NamedTensors parameters() const { return {}; }
};

// token v1 .. vD per line.
class StaticLookup final : public EmbeddingProvider {
 public:
  StaticLookup(int dim, std::unordered_map<std::string, std::vector<double>> table);
  static StaticLookup load(const std::filesystem::path& path);

  std::string_view kind() const override { return "static"; }
  int dim() const override { return dim_; }
  bool lookup(const TokenKey& key, int layer, std::span<double> out) const override;
  std::size_t vocab_size() const { return table_.size(); }

 private:
  int dim_;
  std::unordered_map<std::string, std::vector<double>> table_;
};

enum class LayerKeying { Token, PairPosition };

// token layer v1 .. vD per line. With PairPosition keying the token field is
// "<pair_id>/<side>/<position>" and lookups use the token's context instead
// of its text. Output is sum_l softmax(w)_l * E_l with w trainable.
class MultiLayerLookup final : public EmbeddingProvider {
 public:
  MultiLayerLookup(int dim, int layers, std::unordered_map<std::string, std::vector<double>> table,
                   LayerKeying keying = LayerKeying::Token);
  static MultiLayerLookup load(const std::filesystem::path& path, LayerKeying keying = LayerKeying::Token);

  std::string_view kind() const override { return "multi-layer"; }
  int dim() const override { return dim_; }
  int num_layers() const override { return layers_; }
  bool lookup(const TokenKey& key, int layer, std::span<double> out) const override;
  ad::Tensor mix(const std::vector<ad::Tensor>& layers) const override;
  ad::NamedTensors parameters() const override { return {{"embedding.mix", weights_}}; }

  const ad::Tensor& mixing_logits() const { return weights_; }
  std::vector<double> mixing_weights() const;

  static std::string pair_key(std::string_view pair_id, char side, int position);

 private:
  int dim_, layers_;
  LayerKeying keying_;
  // key -> layers * dim values
  std::unordered_map<std::string, std::vector<double>> table_;
  ad::Tensor weights_;
};

// Deterministic pseudo-random vectors derived from a hash of the token text.
class ToyHash final : public EmbeddingProvider {
 public:
  explicit ToyHash(int dim, std::uint64_t seed = 0);

  std::string_view kind() const override { return "toy-hash"; }
  int dim() const override { return dim_; }
  bool lookup(const TokenKey& key, int layer, std::span<double> out) const override;

 private:
  int dim_;
  std::uint64_t seed_;
};

// [T x D] for one sentence.
ad::Tensor embed(const EmbeddingProvider& provider, const std::vector<std::string>& tokens,
                 const TokenContext* context = nullptr);

// [B x T x D] with zero padding past each sentence's end; T = max length.
ad::Tensor embed_padded(const EmbeddingProvider& provider, const std::vector<const std::vector<std::string>*>& sentences,
                        const std::vector<TokenContext>& contexts = {});

std::unique_ptr<EmbeddingProvider> make_provider(std::string_view kind, const std::filesystem::path& path, int dim,
                                                 std::uint64_t seed);

}  // namespace pairnas::data
