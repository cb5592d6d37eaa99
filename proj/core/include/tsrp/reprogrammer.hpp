#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tsrp/matrix.hpp"
#include "tsrp/tape.hpp"

namespace tsrp {

struct ReprogramConfig {
  std::size_t heads = 4;
  std::size_t head_dim = 8;
  /// V', the number of text prototypes.
  std::size_t prototypes = 32;

  void validate() const;
};

/// T = M·W_vocab.
Matrix build_prototypes(const Matrix& w_vocab, const Matrix& mapping);
Var build_prototypes(Var w_vocab, Var mapping);

/// Trainable cross-attention from patch embeddings onto vocabulary prototypes.
/// Head h owns row block [h·d_h, (h+1)·d_h) of W_q, W_k and W_v, and the
/// matching column block of W_o.
struct Reprogrammer {
  ReprogramConfig config;
  Parameter mapping;  // V'×V
  Parameter w_q;      // H·d_h × d_model
  Parameter w_k;      // H·d_h × d_llm
  Parameter w_v;      // H·d_h × d_llm
  Parameter w_o;      // d_llm × H·d_h

  static Reprogrammer init(const ReprogramConfig& cfg, std::size_t d_model, std::size_t vocab,
                           std::size_t d_llm, std::uint64_t seed);

  std::vector<Parameter*> parameters();
  std::size_t scalar_count() const;
};

/// Prototype keys and values, computed once and shared by every window on a tape.
struct PrototypeKV {
  Var keys;
  Var values;
};

PrototypeKV prototype_kv(Tape& tape, Reprogrammer& rep, const Matrix& w_vocab, bool trainable);

/// e' = concat_h(softmax(q^h (k^h)ᵀ/√d_h) v^h)·W_oᵀ, k×d_llm.
Var reprogram(Var patch_embeddings, const PrototypeKV& kv, Reprogrammer& rep, bool trainable);

/// Plain-value evaluation on a scratch tape.
Matrix reprogram(const Matrix& patch_embeddings, Reprogrammer& rep, const Matrix& w_vocab);

/// Per-head attention probabilities, k×V' each.
std::vector<Matrix> reprogram_attention(const Matrix& patch_embeddings, Reprogrammer& rep,
                                        const Matrix& w_vocab);

/// I = [prompt; aligned]. Throws ShapeError when widths differ.
Matrix assemble_input(const Matrix& prompt_embeddings, const Matrix& aligned);

}  // namespace tsrp
