#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tsrp/adam.hpp"
#include "tsrp/backbone.hpp"
#include "tsrp/patcher.hpp"
#include "tsrp/projector.hpp"
#include "tsrp/prompt.hpp"
#include "tsrp/reprogrammer.hpp"
#include "tsrp/tape.hpp"

namespace tsrp {

struct ForecasterConfig {
  std::size_t input_len = 24;
  std::size_t horizon = 12;
  PatchConfig patch;
  ReprogramConfig reprogram;
  bool standardize = false;
  bool use_prompt = true;
  std::string dataset_context{kDefaultDatasetContext};
  /// Seed for the trainable modules' initial values.
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t patch_count() const;
};

/// Trainable lightweight modules plus a shared reference to the frozen backbone.
struct ModelState {
  ForecasterConfig config;
  std::shared_ptr<const Backbone> backbone;
  Parameter w_e;  // d_model × m
  Parameter b_e;  // 1 × d_model
  Reprogrammer reprogrammer;
  ProjectionHead head;
  std::map<std::string, AdamState> optimizer;

  static ModelState init(const ForecasterConfig& cfg, std::shared_ptr<const Backbone> backbone);

  std::vector<Parameter*> trainable();
  std::vector<const Parameter*> trainable() const;
  /// Trainable parameters grouped by module: patch_embedder, mapping, attention, projector.
  std::vector<std::pair<std::string, std::vector<const Parameter*>>> modules() const;
  std::size_t trainable_count() const;
  /// SHA-256 over every trainable array.
  std::string trainable_hash() const;
};

/// Closed-form trainable scalar count for a configuration.
std::size_t analytic_trainable_count(const ForecasterConfig& cfg, const BackboneConfig& backbone);

/// Memo of backbone keys/values for prompt prefixes. The prompt rows never
/// depend on trainable parameters, so their per-layer keys and values are
/// computed once without a tape. A prompt that shares less than half of its
/// rows with every existing trunk becomes a new trunk (up to kMaxTrunks);
/// other prompts only encode the rows past their longest common prefix with a
/// trunk. Results are bitwise identical to a full forward pass. Thread-safe.
class PrefixCache {
 public:
  explicit PrefixCache(std::shared_ptr<const Backbone> backbone, std::size_t budget_bytes = 768u << 20);

  std::shared_ptr<const PrefixKV> get(std::span<const std::size_t> tokens);

  std::size_t hits() const;
  std::size_t misses() const;
  std::size_t bytes() const;

  static constexpr std::size_t kMaxTrunks = 8;

 private:
  struct Trunk {
    std::vector<std::size_t> tokens;
    PrefixKV kv;
  };
  struct Entry {
    std::size_t trunk = 0;
    std::size_t shared = 0;  // rows reused from the trunk
    PrefixKV tail;
  };

  struct VectorHash {
    std::size_t operator()(const std::vector<std::size_t>& v) const noexcept;
  };

  std::shared_ptr<const PrefixKV> combine(const Entry& e) const;

  std::shared_ptr<const Backbone> backbone_;
  std::size_t budget_;
  mutable std::mutex mutex_;
  std::deque<Trunk> trunks_;
  std::unordered_map<std::vector<std::size_t>, Entry, VectorHash> memo_;
  std::size_t bytes_ = 0;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

struct WindowForward {
  Var forecast;  // 1×H, standardized space when standardization is on
  WindowNormState norm;
};

/// Runs the full pipeline for windows of one configuration.
class Forecaster {
 public:
  Forecaster(ModelState& state, std::shared_ptr<PrefixCache> cache);

  ModelState& state() noexcept { return *state_; }
  PrefixCache& cache() noexcept { return *cache_; }

  /// Prototype keys/values for one tape; share across the windows of a batch.
  PrototypeKV prototypes(Tape& tape, bool trainable);

  /// stats → prompt → embed prompt, partition → embed patches, reprogram,
  /// backbone over [prompt; e'], project.
  WindowForward forward(Tape& tape, const PrototypeKV& kv, std::span<const double> x, bool trainable);

  /// De-standardized forecast of one window.
  std::vector<double> predict(std::span<const double> x);

  /// Prompt token ids used for window x (empty when prompts are disabled).
  std::vector<std::size_t> prompt_tokens(std::span<const double> x) const;

 private:
  ModelState* state_;
  std::shared_ptr<PrefixCache> cache_;
};

}  // namespace tsrp
