#include "tsrp/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "tsrp/error.hpp"
#include "tsrp/rng.hpp"

namespace tsrp {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    fields.push_back(trim(line.substr(pos, comma == std::string_view::npos ? comma : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return fields;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", path.string()));
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

}  // namespace

std::vector<PlantManifest> default_plants() {
  return {{"A", 13.0, 117.25, 32.65}, {"B", 8.0, 117.05, 32.75}, {"C", 8.0, 116.75, 32.85}};
}

std::vector<PlantManifest> read_manifest(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto lines = lines_of(text);
  std::vector<PlantManifest> plants;
  std::set<std::string> ids;
  bool header_seen = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    const auto f = split_csv(line);
    if (!header_seen) {
      if (f.size() != 4 || f[0] != "plant_id" || f[1] != "capacity_mw" || f[2] != "lon" || f[3] != "lat") {
        throw ParseError("manifest header must be plant_id,capacity_mw,lon,lat", i + 1);
      }
      header_seen = true;
      continue;
    }
    PlantManifest p;
    if (f.size() != 4 || f[0].empty() || !parse_double(f[1], p.capacity_mw) ||
        !parse_double(f[2], p.lon) || !parse_double(f[3], p.lat)) {
      throw ParseError(fmt::format("malformed manifest row '{}'", line), i + 1);
    }
    p.plant_id = std::string(f[0]);
    if (!(p.capacity_mw > 0.0)) {
      throw ConfigError(fmt::format("plant '{}': capacity must be > 0", p.plant_id));
    }
    if (!ids.insert(p.plant_id).second) {
      throw ConfigError(fmt::format("duplicate plant id '{}'", p.plant_id));
    }
    plants.push_back(std::move(p));
  }
  if (plants.empty()) throw DataError(fmt::format("manifest '{}' lists no plants", path.string()));
  return plants;
}

void write_manifest(const std::filesystem::path& path, std::span<const PlantManifest> plants) {
  std::ofstream out(path);
  if (!out) throw ConfigError(fmt::format("cannot open '{}' for writing", path.string()));
  out << "plant_id,capacity_mw,lon,lat\n";
  for (const auto& p : plants) out << fmt::format("{},{},{},{}\n", p.plant_id, p.capacity_mw, p.lon, p.lat);
}

const PlantManifest& find_plant(std::span<const PlantManifest> plants, const std::string& id) {
  for (const auto& p : plants)
    if (p.plant_id == id) return p;
  throw ConfigError(fmt::format("unknown plant '{}'", id));
}

std::size_t TimeSeries::gap_count() const {
  return static_cast<std::size_t>(std::count(missing.begin(), missing.end(), true));
}

TimeSeries parse_series(std::string_view csv, const PlantManifest& plant) {
  const auto lines = lines_of(csv);
  TimeSeries s;
  s.plant_id = plant.plant_id;
  bool header_seen = false;
  std::optional<TimePoint> prev;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (!header_seen) {
      if (f.size() != 2 || f[0] != "timestamp" || f[1] != "power_mw") {
        throw ParseError("header must be timestamp,power_mw", i + 1);
      }
      header_seen = true;
      continue;
    }
    if (f.size() != 2) throw ParseError(fmt::format("expected 2 fields, found {}", f.size()), i + 1);
    const auto t = parse_timestamp(f[0]);
    if (!t) throw ParseError(fmt::format("bad timestamp '{}'", f[0]), i + 1);
    double power = 0.0;
    const bool blank = f[1].empty();
    if (!blank && (!parse_double(f[1], power) || !std::isfinite(power))) {
      throw ParseError(fmt::format("bad power value '{}'", f[1]), i + 1);
    }
    if (prev) {
      if (*t <= *prev) {
        throw DataError(fmt::format("line {}: timestamp {} does not follow {}", i + 1,
                                    format_timestamp(*t), format_timestamp(*prev)));
      }
      const auto delta = *t - *prev;
      if (delta % kSampleStep != std::chrono::seconds{0}) {
        throw DataError(fmt::format("line {}: timestamp {} is off the 5-minute grid", i + 1,
                                    format_timestamp(*t)));
      }
      for (auto skipped = delta / kSampleStep - 1; skipped > 0; --skipped) {
        s.values.push_back(0.0);
        s.missing.push_back(true);
      }
    } else {
      s.start = *t;
    }
    s.values.push_back(blank ? 0.0 : power);
    s.missing.push_back(blank);
    prev = t;
  }
  if (s.values.empty()) throw DataError(fmt::format("series for plant '{}' has no rows", plant.plant_id));
  return s;
}

TimeSeries load_series(const std::filesystem::path& path, const PlantManifest& plant) {
  try {
    return parse_series(read_file(path), plant);
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()), e.line());
  }
}

void write_series(const std::filesystem::path& path, const TimeSeries& series) {
  std::ofstream out(path);
  if (!out) throw ConfigError(fmt::format("cannot open '{}' for writing", path.string()));
  out << "timestamp,power_mw\n";
  const double scale = series.normalized ? series.capacity_mw : 1.0;
  std::string buf;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (!series.missing.empty() && series.missing[i]) continue;
    buf.clear();
    fmt::format_to(std::back_inserter(buf), "{},{}\n", format_timestamp(series.timestamp(i)),
                   series.values[i] * scale);
    out << buf;
  }
}

TimeSeries normalize_capacity(const TimeSeries& series, double capacity_mw) {
  if (!(capacity_mw > 0.0)) throw ConfigError(fmt::format("capacity must be > 0, got {}", capacity_mw));
  if (series.normalized) throw ConfigError("series is already capacity-normalized");
  TimeSeries out = series;
  for (double& v : out.values) v /= capacity_mw;
  out.normalized = true;
  out.capacity_mw = capacity_mw;
  return out;
}

TimeSeries mark_abnormal(const TimeSeries& series, double upper) {
  if (!series.normalized) throw ConfigError("abnormal-value screening needs a normalized series");
  TimeSeries out = series;
  out.missing.resize(out.values.size(), false);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out.values[i] < 0.0 || out.values[i] > upper) out.missing[i] = true;
  }
  return out;
}

TimeSeries fill_missing_cubic(const TimeSeries& series) {
  TimeSeries out = series;
  out.missing.resize(out.values.size(), false);
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out.missing[i]) {
      xs.push_back(static_cast<double>(i));
      ys.push_back(out.values[i]);
    }
  }
  if (xs.size() < 4) {
    throw DataError(fmt::format("cubic fill needs at least 4 known points, found {}", xs.size()));
  }
  if (xs.size() == out.size()) return out;

  // Natural spline second derivatives via the Thomas algorithm.
  const std::size_t n = xs.size();
  std::vector<double> h(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) h[i] = xs[i + 1] - xs[i];
  std::vector<double> second(n, 0.0);
  if (n > 2) {
    const std::size_t m = n - 2;
    std::vector<double> diag(m), upper(m), rhs(m);
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t i = k + 1;
      diag[k] = 2.0 * (h[i - 1] + h[i]);
      upper[k] = h[i];
      rhs[k] = 6.0 * ((ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1]);
    }
    for (std::size_t k = 1; k < m; ++k) {
      const double w = h[k] / diag[k - 1];  // sub-diagonal entry of row k is h[k]
      diag[k] -= w * upper[k - 1];
      rhs[k] -= w * rhs[k - 1];
    }
    second[m] = rhs[m - 1] / diag[m - 1];
    for (std::size_t k = m - 1; k-- > 0;) second[k + 1] = (rhs[k] - upper[k] * second[k + 2]) / diag[k];
  }

  std::size_t seg = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out.missing[i]) continue;
    const double x = static_cast<double>(i);
    double y;
    if (x < xs.front()) {
      y = ys.front();
    } else if (x > xs.back()) {
      y = ys.back();
    } else {
      while (xs[seg + 1] < x) ++seg;
      const double hi = h[seg];
      const double a = xs[seg + 1] - x;
      const double b = x - xs[seg];
      y = second[seg] * a * a * a / (6.0 * hi) + second[seg + 1] * b * b * b / (6.0 * hi) +
          (ys[seg] / hi - second[seg] * hi / 6.0) * a + (ys[seg + 1] / hi - second[seg + 1] * hi / 6.0) * b;
    }
    out.values[i] = std::max(0.0, y);
    out.missing[i] = false;
  }
  return out;
}

TimeSeries preprocess(const TimeSeries& raw, double capacity_mw) {
  TimeSeries s = fill_missing_cubic(mark_abnormal(normalize_capacity(raw, capacity_mw)));
  for (double& v : s.values) v = std::clamp(v, 0.0, 1.0);
  return s;
}

Splits chronological_split(std::size_t n, double train, double val, double test) {
  if (!(train > 0.0 && val > 0.0 && test > 0.0)) throw ConfigError("split fractions must be positive");
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw ConfigError(fmt::format("split fractions sum to {}, not 1", train + val + test));
  }
  const double total = static_cast<double>(n);
  const auto n_train = static_cast<std::size_t>(std::floor(train * total + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(val * total + 1e-9));
  if (n_train + n_val > n) throw ConfigError("split fractions exceed the series length");
  return {{0, n_train}, {n_train, n_train + n_val}, {n_train + n_val, n}};
}

WindowSet::WindowSet(std::shared_ptr<const std::vector<double>> series, Segment segment,
                     std::size_t input_len, std::size_t horizon, std::vector<std::size_t> origins)
    : series_(std::move(series)),
      segment_(segment),
      input_len_(input_len),
      horizon_(horizon),
      origins_(std::move(origins)) {}

std::span<const double> WindowSet::input(std::size_t i) const {
  return std::span<const double>(*series_).subspan(origins_.at(i), input_len_);
}

std::span<const double> WindowSet::target(std::size_t i) const {
  return std::span<const double>(*series_).subspan(origins_.at(i) + input_len_, horizon_);
}

WindowSet WindowSet::prefix(std::size_t count) const {
  count = std::min(count, origins_.size());
  return WindowSet(series_, segment_, input_len_, horizon_,
                   std::vector<std::size_t>(origins_.begin(), origins_.begin() + static_cast<std::ptrdiff_t>(count)));
}

bool WindowSet::within_segment() const {
  if (segment_.end > series_->size()) return false;
  return std::all_of(origins_.begin(), origins_.end(), [&](std::size_t o) {
    return segment_.contains(o, o + input_len_ + horizon_);
  });
}

WindowSet make_windows(std::shared_ptr<const std::vector<double>> series, Segment segment,
                       std::size_t input_len, std::size_t horizon, std::size_t stride) {
  if (input_len == 0 || horizon == 0 || stride == 0) {
    throw ConfigError("window input length, horizon and stride must be >= 1");
  }
  if (segment.end > series->size() || segment.begin > segment.end) {
    throw ConfigError("window segment lies outside the series");
  }
  if (input_len + horizon > segment.size()) {
    throw DataError(fmt::format("empty window set: L + H = {} exceeds segment length {}",
                                input_len + horizon, segment.size()));
  }
  const std::size_t count = (segment.size() - input_len - horizon) / stride + 1;
  std::vector<std::size_t> origins(count);
  for (std::size_t i = 0; i < count; ++i) origins[i] = segment.begin + i * stride;
  return WindowSet(std::move(series), segment, input_len, horizon, std::move(origins));
}

std::size_t fraction_count(std::size_t count, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError(fmt::format("fraction {} outside (0, 1]", p));
  if (count == 0) return 0;
  const auto kept = static_cast<std::size_t>(std::ceil(p * static_cast<double>(count) - 1e-9));
  return std::clamp<std::size_t>(kept, 1, count);
}

WindowSet limit_fraction(const WindowSet& windows, double p) {
  return windows.prefix(fraction_count(windows.size(), p));
}

TimeSeries synth_plant(std::uint64_t seed, std::size_t days, double capacity_mw, double cloud_level,
                       const SynthOptions& opts) {
  if (days == 0) throw ConfigError("synthetic plant needs at least one day");
  if (!(capacity_mw > 0.0)) throw ConfigError("capacity must be > 0");
  if (cloud_level < 0.0) throw ConfigError("cloud level must be >= 0");
  constexpr std::size_t kPerDay = 288;
  TimeSeries s;
  s.start = opts.start;
  s.values.resize(days * kPerDay);
  s.missing.assign(days * kPerDay, false);
  s.normalized = true;
  s.capacity_mw = capacity_mw;

  Rng rng(seed);
  const double daylight = opts.sunset_hour - opts.sunrise_hour;
  constexpr double kPersistence = 0.97;
  const double innovation = std::sqrt(1.0 - kPersistence * kPersistence);
  double ar = 0.0;
  for (std::size_t d = 0; d < days; ++d) {
    const double doy = static_cast<double>(opts.start_day_of_year) + static_cast<double>(d);
    const double season = 1.0 - opts.seasonal_amplitude * 0.5 *
                                    (1.0 - std::cos(2.0 * std::numbers::pi * (doy - 172.0) / 365.0));
    const double u = rng.uniform();
    const double cloudiness = cloud_level * u * u;
    for (std::size_t k = 0; k < kPerDay; ++k) {
      ar = kPersistence * ar + innovation * rng.normal();
      const double hour = static_cast<double>(k) / 12.0;
      double v = 0.0;
      if (hour > opts.sunrise_hour && hour < opts.sunset_hour) {
        const double bell = std::pow(std::sin(std::numbers::pi * (hour - opts.sunrise_hour) / daylight), 1.5);
        const double attenuation = std::clamp(cloudiness * (1.0 + 0.6 * ar), 0.0, 0.9);
        v = opts.peak * season * bell * (1.0 - attenuation);
      }
      s.values[d * kPerDay + k] = std::clamp(v, 0.0, 1.0);
    }
  }
  return s;
}

PlantData::PlantData(PlantManifest plant, TimeSeries series, Splits splits)
    : plant_(std::move(plant)),
      series_(std::move(series)),
      splits_(splits),
      values_(std::make_shared<const std::vector<double>>(series_.values)) {}

WindowSet PlantData::train_windows(std::size_t input_len, std::size_t horizon, std::size_t stride) const {
  ++train_reads_;
  return make_windows(values_, splits_.train, input_len, horizon, stride);
}

WindowSet PlantData::val_windows(std::size_t input_len, std::size_t horizon, std::size_t stride) const {
  ++val_reads_;
  return make_windows(values_, splits_.val, input_len, horizon, stride);
}

WindowSet PlantData::test_windows(std::size_t input_len, std::size_t horizon, std::size_t stride) const {
  ++test_reads_;
  return make_windows(values_, splits_.test, input_len, horizon, stride);
}

}  // namespace tsrp
