#include "tsrp/trainer.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "tsrp/error.hpp"
#include "tsrp/rng.hpp"

namespace tsrp {

namespace {

Matrix training_target(std::span<const double> y, const ModelState& state, const WindowNormState& norm) {
  Matrix t(1, y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    t(0, i) = state.config.standardize ? (y[i] - norm.mean) / norm.scale : y[i];
  return t;
}

void check_windows(const ModelState& state, const WindowSet& w, const char* what) {
  if (w.empty()) throw ConfigError(fmt::format("{} window set is empty", what));
  if (w.input_length() != state.config.input_len || w.horizon() != state.config.horizon)
    throw ConfigError(fmt::format("{} windows are L={}, H={} but the model expects L={}, H={}", what,
                                  w.input_length(), w.horizon(), state.config.input_len,
                                  state.config.horizon));
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch, bool shuffle) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (!shuffle) return order;
  Rng rng(derive_seed(seed, 1000 + epoch));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.next_u64() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::string meta_bool(bool b) { return b ? "1" : "0"; }

std::size_t meta_size(const Checkpoint& c, const std::string& key) {
  const std::string& s = c.require_meta(key);
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

double mse_loss(std::span<const double> forecast, std::span<const double> target) {
  if (forecast.size() != target.size())
    throw ShapeError(fmt::format("mse_loss: {} forecasts vs {} targets", forecast.size(), target.size()));
  return mse(target, forecast);
}

double train_step(ModelState& state, Forecaster& forecaster, const WindowSet& windows,
                  std::span<const std::size_t> batch, const TrainConfig& cfg, std::size_t epoch,
                  std::size_t step) {
  Tape tape;
  const PrototypeKV kv = forecaster.prototypes(tape, true);
  std::vector<Var> losses;
  losses.reserve(batch.size());
  for (std::size_t idx : batch) {
    WindowForward f = forecaster.forward(tape, kv, windows.input(idx), true);
    losses.push_back(ad::mse(f.forecast, training_target(windows.target(idx), state, f.norm)));
  }
  Var loss = ad::mean(losses);
  const double value = loss.value()(0, 0);
  if (!std::isfinite(value)) throw NumericError(fmt::format("non-finite training loss at epoch {}", epoch));
  tape.backward(loss);

  std::vector<std::pair<Parameter*, Matrix>> grads;
  double norm2 = 0.0;
  for (Parameter* p : state.trainable()) {
    std::optional<Matrix> g = tape.gradient(*p);
    if (!g) continue;
    for (double v : g->data()) norm2 += v * v;
    grads.emplace_back(p, std::move(*g));
  }
  const double clip = cfg.clip_norm > 0.0 && std::sqrt(norm2) > cfg.clip_norm ? cfg.clip_norm / std::sqrt(norm2) : 1.0;
  const double lr = cfg.lr * (cfg.lr_schedule ? cfg.lr_schedule(epoch, step) : 1.0);
  for (auto& [p, g] : grads) {
    if (clip != 1.0) g *= clip;
    AdamState& st = state.optimizer[p->name];
    st.config.lr = lr;
    adam_step(st, p->value, g);
  }
  return value;
}

double loss_on(ModelState& state, const WindowSet& windows, std::shared_ptr<PrefixCache> cache) {
  check_windows(state, windows, "loss");
  Forecaster fc(state, std::move(cache));
  Tape proto_tape;
  const PrototypeKV kv = fc.prototypes(proto_tape, false);
  const Matrix keys = kv.keys.value();
  const Matrix values = kv.values.value();
  double total = 0.0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    Tape tape;
    const PrototypeKV local{tape.constant_ref(keys), tape.constant_ref(values)};
    WindowForward f = fc.forward(tape, local, windows.input(i), false);
    const Matrix target = training_target(windows.target(i), state, f.norm);
    double s = 0.0;
    for (std::size_t j = 0; j < target.cols(); ++j) {
      const double d = f.forecast.value()(0, j) - target(0, j);
      s += d * d;
    }
    total += s / static_cast<double>(target.cols());
  }
  return total / static_cast<double>(windows.size());
}

TrainHistory train(ModelState& state, const WindowSet& train_set, const WindowSet* val_set,
                   const TrainConfig& cfg, std::shared_ptr<PrefixCache> cache,
                   const std::function<void(const EpochLog&)>& on_epoch) {
  if (train_set.empty()) throw ConfigError("training set is empty");
  check_windows(state, train_set, "training");
  if (val_set != nullptr && !val_set->empty()) check_windows(state, *val_set, "validation");
  if (cfg.batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(cfg.lr >= 0.0)) throw ConfigError("learning rate must be >= 0");
  const std::size_t census = analytic_trainable_count(state.config, state.backbone->config());
  if (state.trainable_count() != census)
    throw ConfigError(fmt::format("trainable census {} != analytic count {}", state.trainable_count(), census));

  if (!cache) cache = std::make_shared<PrefixCache>(state.backbone);
  const std::string backbone_before = state.backbone->hash();
  Forecaster fc(state, cache);
  const bool use_val = val_set != nullptr && !val_set->empty();

  TrainHistory hist;
  double best = std::numeric_limits<double>::infinity();
  std::vector<Matrix> best_values;
  std::size_t bad_epochs = 0;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const std::vector<std::size_t> order = epoch_order(train_set.size(), cfg.seed, epoch, cfg.shuffle);
    double sum = 0.0;
    std::size_t batches = 0;
    bool budget_done = false;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), b + cfg.batch_size);
      std::span<const std::size_t> batch(order.data() + b, end - b);
      sum += train_step(state, fc, train_set, batch, cfg, epoch, hist.steps);
      ++batches;
      ++hist.steps;
      if (cfg.max_steps != 0 && hist.steps >= cfg.max_steps) {
        budget_done = true;
        break;
      }
    }
    EpochLog log{epoch, sum / static_cast<double>(batches), 0.0, use_val, hist.steps};
    hist.train_loss.push_back(log.train_loss);
    if (use_val) {
      log.val_loss = loss_on(state, *val_set, cache);
      hist.val_loss.push_back(log.val_loss);
      if (log.val_loss < best) {
        best = log.val_loss;
        hist.best_epoch = epoch;
        bad_epochs = 0;
        best_values.clear();
        for (const Parameter* p : state.trainable()) best_values.push_back(p->value);
      } else {
        ++bad_epochs;
      }
    } else {
      hist.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(log);
    if (budget_done) break;
    if (use_val && bad_epochs >= cfg.patience) {
      hist.stopped_early = true;
      break;
    }
  }
  if (use_val && !best_values.empty()) {
    auto params = state.trainable();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = std::move(best_values[i]);
  }
  if (state.backbone->hash() != backbone_before)
    throw NumericError("frozen backbone changed during training");
  return hist;
}

Evaluation evaluate(ModelState& state, const WindowSet& windows, std::shared_ptr<PrefixCache> cache) {
  check_windows(state, windows, "evaluation");
  const std::string before = state.trainable_hash();
  const std::string backbone_before = state.backbone->hash();
  Forecaster fc(state, std::move(cache));
  Tape proto_tape;
  const PrototypeKV kv = fc.prototypes(proto_tape, false);
  const Matrix keys = kv.keys.value();
  const Matrix values = kv.values.value();
  Evaluation ev;
  ev.truth.reserve(windows.size() * windows.horizon());
  ev.forecast.reserve(windows.size() * windows.horizon());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    Tape tape;
    const PrototypeKV local{tape.constant_ref(keys), tape.constant_ref(values)};
    WindowForward f = fc.forward(tape, local, windows.input(i), false);
    std::vector<double> y = f.forecast.value().values();
    if (state.config.standardize) y = window_destandardize(y, f.norm);
    const auto target = windows.target(i);
    ev.truth.insert(ev.truth.end(), target.begin(), target.end());
    ev.forecast.insert(ev.forecast.end(), y.begin(), y.end());
  }
  ev.metrics = compute_metrics(ev.truth, ev.forecast);
  if (state.trainable_hash() != before || state.backbone->hash() != backbone_before)
    throw NumericError("evaluation modified model parameters");
  return ev;
}

Checkpoint model_checkpoint(const ModelState& state) {
  const ForecasterConfig& c = state.config;
  const BackboneConfig& b = state.backbone->config();
  Checkpoint ck;
  auto& m = ck.metadata;
  m["kind"] = "tsreprogram";
  m["input_len"] = std::to_string(c.input_len);
  m["horizon"] = std::to_string(c.horizon);
  m["patch_len"] = std::to_string(c.patch.patch_len);
  m["patch_stride"] = std::to_string(c.patch.stride);
  m["d_model"] = std::to_string(c.patch.d_model);
  m["heads"] = std::to_string(c.reprogram.heads);
  m["head_dim"] = std::to_string(c.reprogram.head_dim);
  m["prototypes"] = std::to_string(c.reprogram.prototypes);
  m["standardize"] = meta_bool(c.standardize);
  m["use_prompt"] = meta_bool(c.use_prompt);
  m["dataset_context"] = c.dataset_context;
  m["seed"] = std::to_string(c.seed);
  m["backbone.layers"] = std::to_string(b.layers);
  m["backbone.heads"] = std::to_string(b.heads);
  m["backbone.d_llm"] = std::to_string(b.d_llm);
  m["backbone.d_ff"] = std::to_string(b.d_ff);
  m["backbone.vocab"] = std::to_string(b.vocab);
  m["backbone.max_seq"] = std::to_string(b.max_seq);
  m["backbone.seed"] = std::to_string(b.seed);
  m["backbone.hash"] = state.backbone->hash();
  for (const Parameter* p : state.trainable()) ck.arrays.push_back(NamedArray::from_matrix(p->name, p->value));
  return ck;
}

void save_model(const std::filesystem::path& path, const ModelState& state) {
  write_checkpoint(path, model_checkpoint(state));
}

ModelState model_from_checkpoint(const Checkpoint& ck, std::shared_ptr<const Backbone> backbone) {
  if (ck.require_meta("kind") != "tsreprogram")
    throw FormatError(fmt::format("checkpoint kind '{}' is not a tsreprogram model", ck.require_meta("kind")));
  ForecasterConfig c;
  c.input_len = meta_size(ck, "input_len");
  c.horizon = meta_size(ck, "horizon");
  c.patch.patch_len = meta_size(ck, "patch_len");
  c.patch.stride = meta_size(ck, "patch_stride");
  c.patch.d_model = meta_size(ck, "d_model");
  c.reprogram.heads = meta_size(ck, "heads");
  c.reprogram.head_dim = meta_size(ck, "head_dim");
  c.reprogram.prototypes = meta_size(ck, "prototypes");
  c.standardize = ck.require_meta("standardize") == "1";
  c.use_prompt = ck.require_meta("use_prompt") == "1";
  c.dataset_context = ck.require_meta("dataset_context");
  c.seed = meta_size(ck, "seed");
  if (!backbone) {
    BackboneConfig b;
    b.layers = meta_size(ck, "backbone.layers");
    b.heads = meta_size(ck, "backbone.heads");
    b.d_llm = meta_size(ck, "backbone.d_llm");
    b.d_ff = meta_size(ck, "backbone.d_ff");
    b.vocab = meta_size(ck, "backbone.vocab");
    b.max_seq = meta_size(ck, "backbone.max_seq");
    b.seed = meta_size(ck, "backbone.seed");
    backbone = std::make_shared<const Backbone>(b);
  }
  if (backbone->hash() != ck.require_meta("backbone.hash"))
    throw FormatError("checkpoint was trained against a different backbone");
  ModelState s = ModelState::init(c, std::move(backbone));
  for (Parameter* p : s.trainable()) p->value = ck.require_matrix(p->name, p->value.rows(), p->value.cols());
  return s;
}

ModelState load_model(const std::filesystem::path& path, std::shared_ptr<const Backbone> backbone) {
  return model_from_checkpoint(read_checkpoint(path), std::move(backbone));
}

}  // namespace tsrp
