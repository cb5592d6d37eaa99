#include "tsrp/reprogrammer.hpp"

#include <cmath>

#include <fmt/format.h>

#include "tsrp/error.hpp"
#include "tsrp/rng.hpp"

namespace tsrp {

void ReprogramConfig::validate() const {
  if (prototypes == 0) throw ConfigError("prototype count V' must be at least 1");
  if (heads == 0) throw ConfigError("reprogramming needs at least one head");
  if (head_dim == 0) throw ConfigError("reprogramming head dimension must be positive");
}

Matrix build_prototypes(const Matrix& w_vocab, const Matrix& mapping) {
  if (mapping.rows() == 0) throw ConfigError("prototype count V' must be at least 1");
  if (mapping.cols() != w_vocab.rows())
    throw ShapeError(fmt::format("build_prototypes: mapping {} vs W_vocab {}", mapping.shape_string(),
                                 w_vocab.shape_string()));
  return matmul(mapping, w_vocab);
}

Var build_prototypes(Var w_vocab, Var mapping) { return ad::matmul(mapping, w_vocab); }

namespace {

Parameter random_param(std::string name, std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Parameter p{std::move(name), Matrix(rows, cols), true};
  fill_normal(p.value, rng, stddev);
  return p;
}

Var use(Tape& tape, Parameter& p, bool trainable) {
  return trainable ? tape.param(p) : tape.constant_ref(p.value);
}

}  // namespace

Reprogrammer Reprogrammer::init(const ReprogramConfig& cfg, std::size_t d_model, std::size_t vocab,
                                std::size_t d_llm, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const std::size_t inner = cfg.heads * cfg.head_dim;
  Reprogrammer r;
  r.config = cfg;
  r.mapping = random_param("reprogram.mapping", cfg.prototypes, vocab,
                           1.0 / std::sqrt(static_cast<double>(vocab)), rng);
  r.w_q = random_param("reprogram.w_q", inner, d_model, 1.0 / std::sqrt(static_cast<double>(d_model)), rng);
  r.w_k = random_param("reprogram.w_k", inner, d_llm, 1.0 / std::sqrt(static_cast<double>(d_llm)), rng);
  r.w_v = random_param("reprogram.w_v", inner, d_llm, 1.0 / std::sqrt(static_cast<double>(d_llm)), rng);
  r.w_o = random_param("reprogram.w_o", d_llm, inner, 1.0 / std::sqrt(static_cast<double>(inner)), rng);
  return r;
}

std::vector<Parameter*> Reprogrammer::parameters() { return {&mapping, &w_q, &w_k, &w_v, &w_o}; }

std::size_t Reprogrammer::scalar_count() const {
  return mapping.value.size() + w_q.value.size() + w_k.value.size() + w_v.value.size() +
         w_o.value.size();
}

PrototypeKV prototype_kv(Tape& tape, Reprogrammer& rep, const Matrix& w_vocab, bool trainable) {
  rep.config.validate();
  if (rep.mapping.value.cols() != w_vocab.rows())
    throw ShapeError(fmt::format("prototype mapping {} does not match W_vocab {}",
                                 rep.mapping.value.shape_string(), w_vocab.shape_string()));
  Var t = build_prototypes(tape.constant_ref(w_vocab), use(tape, rep.mapping, trainable));
  return {ad::linear(t, use(tape, rep.w_k, trainable)), ad::linear(t, use(tape, rep.w_v, trainable))};
}

Var reprogram(Var patch_embeddings, const PrototypeKV& kv, Reprogrammer& rep, bool trainable) {
  Tape& tape = *patch_embeddings.tape();
  Var q = ad::linear(patch_embeddings, use(tape, rep.w_q, trainable));
  Var o = ad::attention(q, kv.keys, kv.values, {.heads = rep.config.heads});
  return ad::linear(o, use(tape, rep.w_o, trainable));
}

Matrix reprogram(const Matrix& patch_embeddings, Reprogrammer& rep, const Matrix& w_vocab) {
  Tape tape;
  const PrototypeKV kv = prototype_kv(tape, rep, w_vocab, false);
  return reprogram(tape.constant_ref(patch_embeddings), kv, rep, false).value();
}

std::vector<Matrix> reprogram_attention(const Matrix& patch_embeddings, Reprogrammer& rep,
                                        const Matrix& w_vocab) {
  Tape tape;
  const PrototypeKV kv = prototype_kv(tape, rep, w_vocab, false);
  Var q = ad::linear(tape.constant_ref(patch_embeddings), tape.constant_ref(rep.w_q.value));
  return ad::attention_weights(q.value(), kv.keys.value(), {.heads = rep.config.heads});
}

Matrix assemble_input(const Matrix& prompt_embeddings, const Matrix& aligned) {
  if (prompt_embeddings.rows() == 0) return aligned;
  if (prompt_embeddings.cols() != aligned.cols())
    throw ShapeError(fmt::format("assemble_input: prompt {} vs patches {}",
                                 prompt_embeddings.shape_string(), aligned.shape_string()));
  return concat_rows(prompt_embeddings, aligned);
}

}  // namespace tsrp
