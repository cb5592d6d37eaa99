#include "tsrp/forecaster.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "tsrp/error.hpp"
#include "tsrp/hash.hpp"
#include "tsrp/rng.hpp"

namespace tsrp {

void ForecasterConfig::validate() const {
  if (horizon == 0) throw ConfigError("horizon must be positive");
  patch.validate(input_len);
  reprogram.validate();
}

std::size_t ForecasterConfig::patch_count() const { return tsrp::patch_count(input_len, patch); }

ModelState ModelState::init(const ForecasterConfig& cfg, std::shared_ptr<const Backbone> backbone) {
  cfg.validate();
  if (!backbone) throw ConfigError("model state needs a backbone");
  const BackboneConfig& bc = backbone->config();
  ModelState s;
  s.config = cfg;
  s.backbone = std::move(backbone);
  const std::size_t m = cfg.patch.patch_len;
  const std::size_t d = cfg.patch.d_model;
  s.w_e = {"patch.w_e", Matrix(d, m), true};
  s.b_e = {"patch.b_e", Matrix(1, d), true};
  Rng rng(derive_seed(cfg.seed, 1));
  fill_normal(s.w_e.value, rng, 1.0 / std::sqrt(static_cast<double>(m)));
  s.reprogrammer = Reprogrammer::init(cfg.reprogram, d, bc.vocab, bc.d_llm, derive_seed(cfg.seed, 2));
  s.head = ProjectionHead::init(cfg.patch_count(), bc.d_llm, cfg.horizon, derive_seed(cfg.seed, 3));
  return s;
}

std::vector<Parameter*> ModelState::trainable() {
  std::vector<Parameter*> out{&w_e, &b_e};
  for (Parameter* p : reprogrammer.parameters()) out.push_back(p);
  for (Parameter* p : head.parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> ModelState::trainable() const {
  std::vector<const Parameter*> out;
  for (Parameter* p : const_cast<ModelState*>(this)->trainable()) out.push_back(p);
  return out;
}

std::vector<std::pair<std::string, std::vector<const Parameter*>>> ModelState::modules() const {
  const Reprogrammer& r = reprogrammer;
  return {{"patch_embedder", {&w_e, &b_e}},
          {"mapping", {&r.mapping}},
          {"attention", {&r.w_q, &r.w_k, &r.w_v, &r.w_o}},
          {"projector", {&head.weight, &head.bias}}};
}

std::size_t ModelState::trainable_count() const {
  std::size_t n = 0;
  for (const Parameter* p : trainable()) n += p->value.size();
  return n;
}

std::string ModelState::trainable_hash() const {
  ArrayHasher h;
  for (const Parameter* p : trainable()) h.add(p->name, p->value);
  return h.finish();
}

std::size_t analytic_trainable_count(const ForecasterConfig& cfg, const BackboneConfig& bc) {
  const std::size_t m = cfg.patch.patch_len;
  const std::size_t d = cfg.patch.d_model;
  const std::size_t inner = cfg.reprogram.heads * cfg.reprogram.head_dim;
  const std::size_t k = cfg.patch_count();
  const std::size_t patch = d * m + d;
  const std::size_t mapping = cfg.reprogram.prototypes * bc.vocab;
  const std::size_t attention = inner * d + 2 * inner * bc.d_llm + bc.d_llm * inner;
  const std::size_t projector = cfg.horizon * k * bc.d_llm + cfg.horizon;
  return patch + mapping + attention + projector;
}

std::size_t PrefixCache::VectorHash::operator()(const std::vector<std::size_t>& v) const noexcept {
  std::size_t h = 1469598103934665603ull;
  for (std::size_t x : v) h = (h ^ x) * 1099511628211ull;
  return h;
}

PrefixCache::PrefixCache(std::shared_ptr<const Backbone> backbone, std::size_t budget_bytes)
    : backbone_(std::move(backbone)), budget_(budget_bytes) {}

std::size_t PrefixCache::hits() const {
  std::lock_guard lock(mutex_);
  return hits_;
}

std::size_t PrefixCache::misses() const {
  std::lock_guard lock(mutex_);
  return misses_;
}

std::size_t PrefixCache::bytes() const {
  std::lock_guard lock(mutex_);
  return bytes_;
}

namespace {

PrefixKV leading_rows(const PrefixKV& kv, std::size_t rows) {
  PrefixKV out;
  out.length = rows;
  if (rows == 0) return out;
  for (std::size_t l = 0; l < kv.keys.size(); ++l) {
    out.keys.push_back(slice_rows(kv.keys[l], 0, rows));
    out.values.push_back(slice_rows(kv.values[l], 0, rows));
  }
  return out;
}

std::size_t kv_bytes(const PrefixKV& kv) {
  std::size_t n = 0;
  for (const Matrix& m : kv.keys) n += m.size();
  for (const Matrix& m : kv.values) n += m.size();
  return n * sizeof(double);
}

}  // namespace

std::shared_ptr<const PrefixKV> PrefixCache::combine(const Entry& e) const {
  auto out = std::make_shared<PrefixKV>();
  out->length = e.shared + e.tail.length;
  if (out->length == 0) return out;
  const PrefixKV& trunk = trunks_[e.trunk].kv;
  for (std::size_t l = 0; l < backbone_->config().layers; ++l) {
    if (e.shared == 0) {
      out->keys.push_back(e.tail.keys[l]);
      out->values.push_back(e.tail.values[l]);
    } else if (e.tail.length == 0) {
      out->keys.push_back(slice_rows(trunk.keys[l], 0, e.shared));
      out->values.push_back(slice_rows(trunk.values[l], 0, e.shared));
    } else {
      out->keys.push_back(concat_rows(slice_rows(trunk.keys[l], 0, e.shared), e.tail.keys[l]));
      out->values.push_back(concat_rows(slice_rows(trunk.values[l], 0, e.shared), e.tail.values[l]));
    }
  }
  return out;
}

std::shared_ptr<const PrefixKV> PrefixCache::get(std::span<const std::size_t> tokens) {
  std::vector<std::size_t> key(tokens.begin(), tokens.end());
  std::unique_lock lock(mutex_);
  if (auto it = memo_.find(key); it != memo_.end()) {
    ++hits_;
    return combine(it->second);
  }
  ++misses_;

  Entry e;
  for (std::size_t t = 0; t < trunks_.size(); ++t) {
    const auto& tt = trunks_[t].tokens;
    const auto shared = static_cast<std::size_t>(std::mismatch(key.begin(), key.end(), tt.begin(), tt.end()).first - key.begin());
    if (shared > e.shared) {
      e.trunk = t;
      e.shared = shared;
    }
  }
  if (!key.empty() && 2 * e.shared < key.size() && trunks_.size() < kMaxTrunks) {
    // Trunks are never removed, so their addresses stay valid after the lock is released.
    lock.unlock();
    PrefixKV kv = backbone_->encode_prefix(backbone_->embed_tokens(key));
    auto result = std::make_shared<const PrefixKV>(kv);
    lock.lock();
    if (!memo_.contains(key) && trunks_.size() < kMaxTrunks) {
      bytes_ += kv_bytes(kv);
      trunks_.push_back({key, std::move(kv)});
      memo_.emplace(std::move(key), Entry{trunks_.size() - 1, result->length, {}});
    }
    return result;
  }

  const PrefixKV base = leading_rows(trunks_.empty() ? PrefixKV{} : trunks_[e.trunk].kv, e.shared);
  lock.unlock();
  const std::span<const std::size_t> rest(key.begin() + static_cast<std::ptrdiff_t>(e.shared), key.end());
  PrefixKV full = backbone_->encode_prefix(backbone_->embed_tokens(rest), &base);
  e.tail.length = rest.size();
  if (!rest.empty()) {
    for (std::size_t l = 0; l < full.keys.size(); ++l) {
      e.tail.keys.push_back(slice_rows(full.keys[l], e.shared, rest.size()));
      e.tail.values.push_back(slice_rows(full.values[l], e.shared, rest.size()));
    }
  }
  auto result = std::make_shared<const PrefixKV>(std::move(full));
  lock.lock();
  const std::size_t size = kv_bytes(e.tail);
  if (bytes_ + size <= budget_ && !memo_.contains(key)) {
    bytes_ += size;
    memo_.emplace(std::move(key), std::move(e));
  }
  return result;
}

Forecaster::Forecaster(ModelState& state, std::shared_ptr<PrefixCache> cache)
    : state_(&state), cache_(std::move(cache)) {
  if (!cache_) cache_ = std::make_shared<PrefixCache>(state.backbone);
}

PrototypeKV Forecaster::prototypes(Tape& tape, bool trainable) {
  return prototype_kv(tape, state_->reprogrammer, state_->backbone->vocab_embeddings(), trainable);
}

std::vector<std::size_t> Forecaster::prompt_tokens(std::span<const double> x) const {
  if (!state_->config.use_prompt) return {};
  return make_prompt(x, state_->config.horizon, state_->config.dataset_context).token_ids;
}

WindowForward Forecaster::forward(Tape& tape, const PrototypeKV& kv, std::span<const double> x,
                                  bool trainable) {
  const ForecasterConfig& cfg = state_->config;
  if (x.size() != cfg.input_len)
    throw ShapeError(fmt::format("window length {} != configured input length {}", x.size(), cfg.input_len));
  const Backbone& bb = *state_->backbone;
  const std::size_t k = cfg.patch_count();

  std::shared_ptr<const PrefixKV> prefix;
  if (cfg.use_prompt) {
    const std::vector<std::size_t> tokens = prompt_tokens(x);
    if (tokens.size() + k > bb.config().max_seq)
      throw ConfigError(fmt::format("prompt of {} tokens plus {} patches exceeds max_seq {}", tokens.size(),
                                    k, bb.config().max_seq));
    prefix = cache_->get(tokens);
  }

  WindowForward out;
  Matrix patches;
  if (cfg.standardize) {
    const std::vector<double> z = window_standardize(x, out.norm);
    patches = partition(z, cfg.patch);
  } else {
    patches = partition(x, cfg.patch);
  }

  auto param = [&](Parameter& p) { return trainable ? tape.param(p) : tape.constant_ref(p.value); };
  Var e = embed_patches(tape.constant(std::move(patches)), param(state_->w_e), param(state_->b_e));
  Var aligned = reprogram(e, kv, state_->reprogrammer, trainable);
  Var o = bb.forward(aligned, prefix.get());
  out.forecast = project(o, state_->head, trainable);
  if (prefix) tape.retain(prefix);
  return out;
}

std::vector<double> Forecaster::predict(std::span<const double> x) {
  Tape tape;
  const PrototypeKV kv = prototypes(tape, false);
  WindowForward f = forward(tape, kv, x, false);
  std::vector<double> y = f.forecast.value().values();
  if (state_->config.standardize) y = window_destandardize(y, f.norm);
  return y;
}

}  // namespace tsrp
