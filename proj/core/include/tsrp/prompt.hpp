#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tsrp {

enum class Trend { Upward, Downward };

std::string_view to_string(Trend t) noexcept;

/// Statistics that fill the prompt, computed on the capacity-normalized window.
struct PromptStats {
  double min_val = 0.0;
  double max_val = 0.0;
  /// Lower middle element for even lengths.
  double median_val = 0.0;
  /// Upward iff the least-squares slope is >= 0.
  Trend trend = Trend::Upward;
  /// Five lags in 5-minute steps, strongest autocorrelation first.
  std::vector<std::size_t> top_lags;
  bool lags_degenerate = false;

  friend bool operator==(const PromptStats&, const PromptStats&) = default;
};

PromptStats series_stats(std::span<const double> x);

/// Background sentence placed before the task instruction.
inline constexpr std::string_view kDefaultDatasetContext =
    "Capacity-normalized output power of a distributed photovoltaic plant, sampled every "
    "5 minutes; output is zero at night.";

struct PromptFields {
  std::string dataset_context{kDefaultDatasetContext};
  std::optional<std::size_t> horizon;
  std::optional<std::size_t> input_len;
  std::optional<PromptStats> stats;
};

/// Renders the prompt-as-prefix text. Throws ConfigError when a placeholder is
/// missing. Numbers use fixed 4-decimal formatting; lags are comma separated.
std::string render_prompt(const PromptFields& fields);

/// Byte-level tokenizer: each UTF-8 byte maps to its value in [0, 255].
std::vector<std::size_t> tokenize(std::string_view text);
std::string detokenize(std::span<const std::size_t> ids);

struct PromptBundle {
  std::string text;
  std::vector<std::size_t> token_ids;
  PromptStats stats;
};

PromptBundle make_prompt(std::span<const double> window, std::size_t horizon,
                         std::string_view dataset_context = kDefaultDatasetContext);

}  // namespace tsrp
