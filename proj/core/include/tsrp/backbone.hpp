#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tsrp/checkpoint.hpp"
#include "tsrp/matrix.hpp"
#include "tsrp/tape.hpp"

namespace tsrp {

struct BackboneConfig {
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t d_llm = 32;
  std::size_t d_ff = 64;
  std::size_t vocab = 256;
  std::size_t max_seq = 512;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Per-layer attention keys and values of already-encoded leading rows.
struct PrefixKV {
  std::size_t length = 0;
  std::vector<Matrix> keys;
  std::vector<Matrix> values;
};

/// Frozen pre-LN causal transformer with GELU feed-forward blocks and
/// sinusoidal absolute positions. Immutable after construction; none of its
/// arrays ever enters a tape as a parameter.
class Backbone {
 public:
  /// Seeded N(0, 0.02) weights, layer-norm gain 1 and bias 0.
  explicit Backbone(const BackboneConfig& cfg);

  const BackboneConfig& config() const noexcept { return cfg_; }
  const Matrix& vocab_embeddings() const noexcept { return vocab_; }

  /// Rows of W_vocab for the given token ids.
  Matrix embed_tokens(std::span<const std::size_t> ids) const;

  /// Full forward of I (rows at positions 0..n−1).
  Matrix forward(const Matrix& input) const;
  /// Differentiable forward of rows that follow `prefix` (positions
  /// prefix.length, ...). Gradients reach `input` only.
  Var forward(Var input, const PrefixKV* prefix = nullptr) const;

  /// Encodes `embeddings` as rows following `base` and returns the combined
  /// prefix. Row outputs past the last layer's keys/values are not computed.
  PrefixKV encode_prefix(const Matrix& embeddings, const PrefixKV* base = nullptr) const;

  /// SHA-256 over every array, names and shapes included.
  std::string hash() const;
  std::size_t scalar_count() const;

  Checkpoint to_checkpoint() const;
  void save(const std::filesystem::path& path) const;
  /// Validates every expected array name and shape; FormatError otherwise.
  static Backbone from_checkpoint(const Checkpoint& ckpt);
  static Backbone load_external(const std::filesystem::path& path);

  /// Names in serialization order.
  std::vector<std::string> array_names() const;

 private:
  struct Layer {
    Matrix ln1_gain, ln1_bias;
    Matrix w_q, w_k, w_v, w_o;
    Matrix ln2_gain, ln2_bias;
    Matrix w_ff1, b_ff1, w_ff2, b_ff2;
  };

  Backbone(const BackboneConfig& cfg, bool allocate_only);
  void build_positions();
  std::vector<std::pair<std::string, const Matrix*>> arrays() const;
  std::vector<std::pair<std::string, Matrix*>> mutable_arrays();
  Var run(Var input, const PrefixKV* prefix, PrefixKV* capture) const;

  BackboneConfig cfg_;
  Matrix vocab_;
  std::vector<Layer> layers_;
  Matrix final_gain_, final_bias_;
  Matrix positions_;
};

}  // namespace tsrp
