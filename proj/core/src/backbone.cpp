#include "tsrp/backbone.hpp"

#include <cmath>

#include <fmt/format.h>

#include "tsrp/error.hpp"
#include "tsrp/hash.hpp"
#include "tsrp/rng.hpp"

namespace tsrp {

namespace {

constexpr double kInitStd = 0.02;

std::size_t meta_size(const Checkpoint& ckpt, const std::string& key) {
  const std::string& s = ckpt.require_meta(key);
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw FormatError(fmt::format("metadata '{}' is not an unsigned integer: '{}'", key, s));
  }
}

}  // namespace

void BackboneConfig::validate() const {
  if (layers == 0 || heads == 0 || d_llm == 0 || d_ff == 0 || max_seq == 0)
    throw ConfigError("backbone sizes must be positive");
  if (d_llm % heads != 0)
    throw ConfigError(fmt::format("d_llm {} is not divisible by {} heads", d_llm, heads));
  if (vocab != 256) throw ConfigError(fmt::format("vocab must be 256 for the byte tokenizer, got {}", vocab));
}

Backbone::Backbone(const BackboneConfig& cfg, bool) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t d = cfg_.d_llm;
  vocab_ = Matrix(cfg_.vocab, d);
  layers_.resize(cfg_.layers);
  for (Layer& l : layers_) {
    l.ln1_gain = Matrix(1, d, 1.0);
    l.ln1_bias = Matrix(1, d);
    l.w_q = Matrix(d, d);
    l.w_k = Matrix(d, d);
    l.w_v = Matrix(d, d);
    l.w_o = Matrix(d, d);
    l.ln2_gain = Matrix(1, d, 1.0);
    l.ln2_bias = Matrix(1, d);
    l.w_ff1 = Matrix(cfg_.d_ff, d);
    l.b_ff1 = Matrix(1, cfg_.d_ff);
    l.w_ff2 = Matrix(d, cfg_.d_ff);
    l.b_ff2 = Matrix(1, d);
  }
  final_gain_ = Matrix(1, d, 1.0);
  final_bias_ = Matrix(1, d);
  build_positions();
}

Backbone::Backbone(const BackboneConfig& cfg) : Backbone(cfg, true) {
  Rng rng(cfg_.seed);
  fill_normal(vocab_, rng, kInitStd);
  for (Layer& l : layers_) {
    for (Matrix* m : {&l.w_q, &l.w_k, &l.w_v, &l.w_o, &l.w_ff1, &l.w_ff2}) fill_normal(*m, rng, kInitStd);
  }
}

void Backbone::build_positions() {
  const std::size_t d = cfg_.d_llm;
  positions_ = Matrix(cfg_.max_seq, d);
  for (std::size_t pos = 0; pos < cfg_.max_seq; ++pos) {
    for (std::size_t i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
      const double angle = static_cast<double>(pos) * freq;
      positions_(pos, i) = std::sin(angle);
      if (i + 1 < d) positions_(pos, i + 1) = std::cos(angle);
    }
  }
}

Matrix Backbone::embed_tokens(std::span<const std::size_t> ids) const {
  Matrix out(ids.size(), cfg_.d_llm);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= cfg_.vocab)
      throw ShapeError(fmt::format("token id {} outside vocabulary of {}", ids[i], cfg_.vocab));
    auto src = vocab_.row(ids[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Var Backbone::run(Var input, const PrefixKV* prefix, PrefixKV* capture) const {
  Tape& t = *input.tape();
  const std::size_t start = prefix != nullptr ? prefix->length : 0;
  const std::size_t n = input.rows();
  if (input.cols() != cfg_.d_llm)
    throw ShapeError(fmt::format("backbone input width {} != d_llm {}", input.cols(), cfg_.d_llm));
  if (start + n > cfg_.max_seq)
    throw ConfigError(fmt::format("sequence length {} exceeds max_seq {}", start + n, cfg_.max_seq));
  if (prefix != nullptr && prefix->length > 0 &&
      (prefix->keys.size() != cfg_.layers || prefix->values.size() != cfg_.layers))
    throw ShapeError("prefix does not match the backbone depth");

  Var h = ad::add(input, t.constant(slice_rows(positions_, start, n)));
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const Layer& l = layers_[li];
    Var a = ad::layer_norm(h, t.constant_ref(l.ln1_gain), t.constant_ref(l.ln1_bias));
    Var k = ad::linear(a, t.constant_ref(l.w_k));
    Var v = ad::linear(a, t.constant_ref(l.w_v));
    if (capture != nullptr) {
      capture->keys.push_back(k.value());
      capture->values.push_back(v.value());
      if (li + 1 == layers_.size()) return h;
    }
    Var q = ad::linear(a, t.constant_ref(l.w_q));
    ad::AttentionOptions opts{.heads = cfg_.heads, .causal = true};
    if (prefix != nullptr && prefix->length > 0) {
      opts.context_keys = &prefix->keys[li];
      opts.context_values = &prefix->values[li];
    }
    h = ad::add(h, ad::linear(ad::attention(q, k, v, opts), t.constant_ref(l.w_o)));
    Var f = ad::layer_norm(h, t.constant_ref(l.ln2_gain), t.constant_ref(l.ln2_bias));
    f = ad::gelu(ad::linear(f, t.constant_ref(l.w_ff1), t.constant_ref(l.b_ff1)));
    h = ad::add(h, ad::linear(f, t.constant_ref(l.w_ff2), t.constant_ref(l.b_ff2)));
  }
  return ad::layer_norm(h, t.constant_ref(final_gain_), t.constant_ref(final_bias_));
}

Var Backbone::forward(Var input, const PrefixKV* prefix) const { return run(input, prefix, nullptr); }

Matrix Backbone::forward(const Matrix& input) const {
  Tape t;
  return run(t.constant_ref(input), nullptr, nullptr).value();
}

PrefixKV Backbone::encode_prefix(const Matrix& embeddings, const PrefixKV* base) const {
  PrefixKV fresh;
  if (embeddings.rows() > 0) {
    Tape t;
    run(t.constant_ref(embeddings), base, &fresh);
  }
  const bool has_base = base != nullptr && base->length > 0;
  PrefixKV out;
  out.length = (has_base ? base->length : 0) + embeddings.rows();
  if (out.length == 0) return out;
  for (std::size_t li = 0; li < cfg_.layers; ++li) {
    if (!has_base) {
      out.keys.push_back(std::move(fresh.keys[li]));
      out.values.push_back(std::move(fresh.values[li]));
    } else if (embeddings.rows() == 0) {
      out.keys.push_back(base->keys[li]);
      out.values.push_back(base->values[li]);
    } else {
      out.keys.push_back(concat_rows(base->keys[li], fresh.keys[li]));
      out.values.push_back(concat_rows(base->values[li], fresh.values[li]));
    }
  }
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> Backbone::arrays() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  out.emplace_back("backbone.vocab", &vocab_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    const std::string p = fmt::format("backbone.layer{}.", i);
    out.emplace_back(p + "ln1.gain", &l.ln1_gain);
    out.emplace_back(p + "ln1.bias", &l.ln1_bias);
    out.emplace_back(p + "attn.w_q", &l.w_q);
    out.emplace_back(p + "attn.w_k", &l.w_k);
    out.emplace_back(p + "attn.w_v", &l.w_v);
    out.emplace_back(p + "attn.w_o", &l.w_o);
    out.emplace_back(p + "ln2.gain", &l.ln2_gain);
    out.emplace_back(p + "ln2.bias", &l.ln2_bias);
    out.emplace_back(p + "ff.w1", &l.w_ff1);
    out.emplace_back(p + "ff.b1", &l.b_ff1);
    out.emplace_back(p + "ff.w2", &l.w_ff2);
    out.emplace_back(p + "ff.b2", &l.b_ff2);
  }
  out.emplace_back("backbone.final.gain", &final_gain_);
  out.emplace_back("backbone.final.bias", &final_bias_);
  return out;
}

std::vector<std::pair<std::string, Matrix*>> Backbone::mutable_arrays() {
  std::vector<std::pair<std::string, Matrix*>> out;
  for (auto& [name, m] : arrays()) out.emplace_back(name, const_cast<Matrix*>(m));
  return out;
}

std::vector<std::string> Backbone::array_names() const {
  std::vector<std::string> names;
  for (const auto& entry : arrays()) names.push_back(entry.first);
  return names;
}

std::string Backbone::hash() const {
  ArrayHasher h;
  for (const auto& [name, m] : arrays()) h.add(name, *m);
  return h.finish();
}

std::size_t Backbone::scalar_count() const {
  std::size_t n = 0;
  for (const auto& entry : arrays()) n += entry.second->size();
  return n;
}

Checkpoint Backbone::to_checkpoint() const {
  Checkpoint c;
  c.metadata["kind"] = "backbone";
  c.metadata["layers"] = std::to_string(cfg_.layers);
  c.metadata["heads"] = std::to_string(cfg_.heads);
  c.metadata["d_llm"] = std::to_string(cfg_.d_llm);
  c.metadata["d_ff"] = std::to_string(cfg_.d_ff);
  c.metadata["vocab"] = std::to_string(cfg_.vocab);
  c.metadata["max_seq"] = std::to_string(cfg_.max_seq);
  c.metadata["seed"] = std::to_string(cfg_.seed);
  for (const auto& [name, m] : arrays()) c.arrays.push_back(NamedArray::from_matrix(name, *m));
  return c;
}

void Backbone::save(const std::filesystem::path& path) const { write_checkpoint(path, to_checkpoint()); }

Backbone Backbone::from_checkpoint(const Checkpoint& ckpt) {
  BackboneConfig cfg;
  cfg.layers = meta_size(ckpt, "layers");
  cfg.heads = meta_size(ckpt, "heads");
  cfg.d_llm = meta_size(ckpt, "d_llm");
  cfg.d_ff = meta_size(ckpt, "d_ff");
  cfg.vocab = meta_size(ckpt, "vocab");
  cfg.max_seq = meta_size(ckpt, "max_seq");
  cfg.seed = meta_size(ckpt, "seed");
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(fmt::format("backbone header: {}", e.what()));
  }
  Backbone b(cfg, true);
  for (auto& [name, m] : b.mutable_arrays()) *m = ckpt.require_matrix(name, m->rows(), m->cols());
  if (ckpt.arrays.size() != b.arrays().size())
    throw FormatError(fmt::format("backbone file has {} arrays, expected {}", ckpt.arrays.size(),
                                  b.arrays().size()));
  return b;
}

Backbone Backbone::load_external(const std::filesystem::path& path) {
  return from_checkpoint(read_checkpoint(path));
}

}  // namespace tsrp
