#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tsrp/timestamp.hpp"

namespace tsrp {

struct PlantManifest {
  std::string plant_id;
  double capacity_mw = 0.0;
  double lon = 0.0;
  double lat = 0.0;
};

/// Three plants with the capacities and coordinates of the reference study.
std::vector<PlantManifest> default_plants();
/// CSV with header `plant_id,capacity_mw,lon,lat`; ids must be unique, capacity > 0.
std::vector<PlantManifest> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, std::span<const PlantManifest> plants);
const PlantManifest& find_plant(std::span<const PlantManifest> plants, const std::string& id);

/// Univariate power record on a uniform 5-minute grid. Raw series carry MW and
/// may have `missing` slots; preprocessed series are capacity-normalized and
/// gap-free.
struct TimeSeries {
  std::string plant_id;
  TimePoint start{};
  std::vector<double> values;
  std::vector<bool> missing;
  bool normalized = false;
  double capacity_mw = 0.0;

  std::size_t size() const noexcept { return values.size(); }
  TimePoint timestamp(std::size_t i) const { return start + kSampleStep * static_cast<long long>(i); }
  std::size_t gap_count() const;
};

/// Reads a `timestamp,power_mw` CSV. Skipped 5-minute slots and empty power
/// fields are recorded as gaps.
TimeSeries load_series(const std::filesystem::path& path, const PlantManifest& plant);
TimeSeries parse_series(std::string_view csv, const PlantManifest& plant);
void write_series(const std::filesystem::path& path, const TimeSeries& series);

TimeSeries normalize_capacity(const TimeSeries& series, double capacity_mw);

/// Normalized values below 0 or above `upper` become missing.
TimeSeries mark_abnormal(const TimeSeries& series, double upper = 1.05);

/// Interior gaps from a natural cubic spline through the known points,
/// boundary gaps by nearest known value, everything clipped to >= 0.
TimeSeries fill_missing_cubic(const TimeSeries& series);

/// normalize → mark abnormal → cubic fill → clip to [0, 1].
TimeSeries preprocess(const TimeSeries& raw, double capacity_mw);

/// Half-open index range into a series.
struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
  bool contains(std::size_t first, std::size_t last_exclusive) const noexcept {
    return first >= begin && last_exclusive <= end && first <= last_exclusive;
  }
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct Splits {
  Segment train, val, test;
};

/// Contiguous train/val/test in time order: ⌊f_train·N⌋, ⌊f_val·N⌋, remainder.
Splits chronological_split(std::size_t n, double train = 0.7, double val = 0.2, double test = 0.1);

/// Supervised (input, target) pairs carved from one segment of a shared series.
class WindowSet {
 public:
  WindowSet(std::shared_ptr<const std::vector<double>> series, Segment segment,
            std::size_t input_len, std::size_t horizon, std::vector<std::size_t> origins);

  std::size_t size() const noexcept { return origins_.size(); }
  bool empty() const noexcept { return origins_.empty(); }
  std::size_t input_length() const noexcept { return input_len_; }
  std::size_t horizon() const noexcept { return horizon_; }
  const Segment& segment() const noexcept { return segment_; }

  /// Global series index of window i's first input point.
  std::size_t origin(std::size_t i) const { return origins_.at(i); }
  std::span<const double> input(std::size_t i) const;
  std::span<const double> target(std::size_t i) const;

  /// First `count` windows in chronological order.
  WindowSet prefix(std::size_t count) const;
  /// Every window (input and target) lies inside the segment.
  bool within_segment() const;

 private:
  std::shared_ptr<const std::vector<double>> series_;
  Segment segment_;
  std::size_t input_len_;
  std::size_t horizon_;
  std::vector<std::size_t> origins_;
};

/// ⌊(N − L − H)/stride⌋ + 1 windows; window i starts at segment.begin + i·stride.
WindowSet make_windows(std::shared_ptr<const std::vector<double>> series, Segment segment,
                       std::size_t input_len, std::size_t horizon, std::size_t stride = 1);

/// First ⌈p·count⌉ windows, p ∈ (0, 1].
WindowSet limit_fraction(const WindowSet& windows, double p);
std::size_t fraction_count(std::size_t count, double p);

struct SynthOptions {
  double sunrise_hour = 6.0;
  double sunset_hour = 18.0;
  double peak = 0.85;
  /// Fractional drop of the daily peak from summer to winter solstice.
  double seasonal_amplitude = 0.15;
  int start_day_of_year = 1;
  TimePoint start = TimePoint{std::chrono::seconds{1136073600}};  // 2006-01-01T00:00:00
};

/// Capacity-normalized synthetic plant: clear-sky bell (zero at night, peak at
/// solar noon) × seasonal scale × multiplicative seeded cloud attenuation,
/// clipped to [0, 1].
TimeSeries synth_plant(std::uint64_t seed, std::size_t days, double capacity_mw,
                       double cloud_level, const SynthOptions& opts = {});

/// One plant's preprocessed series with access-counted split views. Zero-shot
/// runs use the counters to prove target train/val data was never read.
class PlantData {
 public:
  PlantData(PlantManifest plant, TimeSeries series, Splits splits);

  const PlantManifest& plant() const noexcept { return plant_; }
  const TimeSeries& series() const noexcept { return series_; }
  const Splits& splits() const noexcept { return splits_; }
  std::shared_ptr<const std::vector<double>> values() const noexcept { return values_; }

  WindowSet train_windows(std::size_t input_len, std::size_t horizon, std::size_t stride) const;
  WindowSet val_windows(std::size_t input_len, std::size_t horizon, std::size_t stride) const;
  WindowSet test_windows(std::size_t input_len, std::size_t horizon, std::size_t stride) const;

  std::size_t train_reads() const noexcept { return train_reads_; }
  std::size_t val_reads() const noexcept { return val_reads_; }
  std::size_t test_reads() const noexcept { return test_reads_; }
  void reset_audit() noexcept { train_reads_ = val_reads_ = test_reads_ = 0; }

 private:
  PlantManifest plant_;
  TimeSeries series_;
  Splits splits_;
  std::shared_ptr<const std::vector<double>> values_;
  mutable std::size_t train_reads_ = 0;
  mutable std::size_t val_reads_ = 0;
  mutable std::size_t test_reads_ = 0;
};

}  // namespace tsrp
