#include "tsrp/prompt.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "tsrp/error.hpp"
#include "tsrp/spectral.hpp"

namespace tsrp {

std::string_view to_string(Trend t) noexcept { return t == Trend::Upward ? "upward" : "downward"; }

PromptStats series_stats(std::span<const double> x) {
  if (x.size() < 2) throw ConfigError("prompt statistics need at least 2 points");
  PromptStats s;
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  s.min_val = *lo;
  s.max_val = *hi;
  std::vector<double> sorted(x.begin(), x.end());
  const std::size_t mid = (sorted.size() - 1) / 2;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
  s.median_val = sorted[mid];

  const double n = static_cast<double>(x.size());
  const double t_mean = (n - 1.0) / 2.0;
  const double x_mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double cov = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) cov += (static_cast<double>(i) - t_mean) * (x[i] - x_mean);
  s.trend = cov >= 0.0 ? Trend::Upward : Trend::Downward;

  if (x.size() >= 10) {
    const LagResult lags = top_lags(x, 5);
    s.top_lags = lags.lags;
    s.lags_degenerate = lags.degenerate;
  } else {
    // Too short for five distinct lags with Q >= 2k; report what fits.
    const LagResult lags = top_lags(x, x.size() / 2);
    s.top_lags = lags.lags;
    s.lags_degenerate = lags.degenerate;
  }
  return s;
}

std::string render_prompt(const PromptFields& f) {
  if (!f.horizon) throw ConfigError("prompt placeholder <Horizon> not supplied");
  if (!f.input_len) throw ConfigError("prompt placeholder <Input Size> not supplied");
  if (!f.stats) throw ConfigError("prompt statistics not supplied");
  const PromptStats& s = *f.stats;
  if (s.top_lags.empty()) throw ConfigError("prompt placeholder <lag_val> not supplied");
  return fmt::format(
      "{}\n"
      "Below is the information about the input time series:\n"
      "[Instruction]: forecast the next {} steps given the previous {} steps information;\n"
      "[Statistics]: The input has a minimum of {:.4f}, a maximum of {:.4f}, and a median of {:.4f}. "
      "The overall trend is {}. The top five lags are {}.",
      f.dataset_context, *f.horizon, *f.input_len, s.min_val, s.max_val, s.median_val,
      to_string(s.trend), fmt::join(s.top_lags, ", "));
}

std::vector<std::size_t> tokenize(std::string_view text) {
  std::vector<std::size_t> ids(text.size());
  std::transform(text.begin(), text.end(), ids.begin(),
                 [](char c) { return static_cast<std::size_t>(static_cast<unsigned char>(c)); });
  return ids;
}

std::string detokenize(std::span<const std::size_t> ids) {
  std::string text(ids.size(), '\0');
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] > 255) throw ShapeError(fmt::format("token id {} outside the byte vocabulary", ids[i]));
    text[i] = static_cast<char>(static_cast<unsigned char>(ids[i]));
  }
  return text;
}

PromptBundle make_prompt(std::span<const double> window, std::size_t horizon,
                         std::string_view dataset_context) {
  PromptBundle b;
  b.stats = series_stats(window);
  PromptFields f;
  f.dataset_context = std::string(dataset_context);
  f.horizon = horizon;
  f.input_len = window.size();
  f.stats = b.stats;
  b.text = render_prompt(f);
  b.token_ids = tokenize(b.text);
  return b;
}

}  // namespace tsrp
