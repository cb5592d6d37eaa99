#include "tsrp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <fmt/format.h>

#include "tsrp/baselines.hpp"
#include "tsrp/error.hpp"
#include "tsrp/rng.hpp"

namespace tsrp {

std::string_view to_string(Protocol p) noexcept {
  switch (p) {
    case Protocol::Short: return "short";
    case Protocol::Long: return "long";
    case Protocol::FewShot: return "fewshot";
    case Protocol::ZeroShot: return "zeroshot";
  }
  return "short";
}

Protocol parse_protocol(std::string_view s) {
  for (Protocol p : {Protocol::Short, Protocol::Long, Protocol::FewShot, Protocol::ZeroShot})
    if (to_string(p) == s) return p;
  throw ConfigError(fmt::format("unknown protocol '{}' (expected short, long, fewshot or zeroshot)", s));
}

std::vector<std::size_t> ExperimentConfig::resolved_horizons() const {
  if (!horizons.empty()) return horizons;
  if (protocol == Protocol::Short) return {12, 24};
  return {192, 336};
}

std::size_t ExperimentConfig::resolved_input_len(std::size_t horizon) const {
  if (protocol == Protocol::Short) return 2 * horizon;
  return input_len.value_or(336);
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (models.empty()) throw ConfigError("at least one model is required");
  for (const std::string& m : models)
    if (std::find(kModelNames.begin(), kModelNames.end(), m) == kModelNames.end())
      throw ConfigError(fmt::format("unknown model '{}'", m));
  for (std::size_t h : resolved_horizons())
    if (h == 0) throw ConfigError("horizons must be positive");
  if (protocol == Protocol::Short && input_len) {
    for (std::size_t h : resolved_horizons())
      if (*input_len != 2 * h)
        throw ConfigError(fmt::format("short protocol uses input length 2*H = {} for H = {}, not {}", 2 * h, h,
                                      *input_len));
  }
  if (protocol == Protocol::FewShot) {
    if (fractions.empty()) throw ConfigError("few-shot protocol needs at least one fraction");
    for (double p : fractions)
      if (!(p > 0.0 && p <= 1.0)) throw ConfigError(fmt::format("fraction {} outside (0, 1]", p));
  }
  for (const PlantPair& pp : pairs)
    if (pp.source == pp.target) throw ConfigError(fmt::format("zero-shot pair {0}->{0} is not cross-plant", pp.source));
  if (train_stride == 0 || val_stride == 0 || test_stride == 0) throw ConfigError("window strides must be positive");
  if (jobs == 0) throw ConfigError("jobs must be at least 1");
}

namespace {

template <class T, class F>
std::vector<T> parse_list(const std::string& value, F&& parse_one) {
  std::vector<T> out;
  for (const std::string& item : split_list(value)) {
    if (item.empty()) throw ConfigError(fmt::format("empty list item in '{}'", value));
    out.push_back(parse_one(item));
  }
  return out;
}

PlantPair parse_pair(const std::string& s) {
  const auto arrow = s.find("->");
  const auto gt = s.find('>');
  std::string src, tgt;
  if (arrow != std::string::npos) {
    src = trim(s.substr(0, arrow));
    tgt = trim(s.substr(arrow + 2));
  } else if (gt != std::string::npos) {
    src = trim(s.substr(0, gt));
    tgt = trim(s.substr(gt + 1));
  }
  if (src.empty() || tgt.empty()) throw ConfigError(fmt::format("zero-shot pair '{}' should look like A->B", s));
  return {src, tgt};
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"protocol", [](auto& c, const auto& v) { c.protocol = parse_protocol(v); }},
      {"plants", [](auto& c, const auto& v) { c.plants = parse_list<std::string>(v, [](const std::string& s) { return s; }); }},
      {"horizons", [](auto& c, const auto& v) { c.horizons = parse_list<std::size_t>(v, [](const std::string& s) { return parse_size(s, "horizons"); }); }},
      {"input_len", [](auto& c, const auto& v) { c.input_len = parse_size(v, "input_len"); }},
      {"fractions", [](auto& c, const auto& v) { c.fractions = parse_list<double>(v, [](const std::string& s) { return parse_double(s, "fractions"); }); }},
      {"pairs", [](auto& c, const auto& v) { c.pairs = parse_list<PlantPair>(v, parse_pair); }},
      {"seeds", [](auto& c, const auto& v) { c.seeds = parse_list<std::uint64_t>(v, [](const std::string& s) { return static_cast<std::uint64_t>(parse_size(s, "seeds")); }); }},
      {"models", [](auto& c, const auto& v) { c.models = parse_list<std::string>(v, [](const std::string& s) { return s; }); }},
      {"data_dir", [](auto& c, const auto& v) { c.data_dir = v; }},
      {"synth_days", [](auto& c, const auto& v) { c.synth_days = parse_size(v, "synth_days"); }},
      {"synth_seed", [](auto& c, const auto& v) { c.synth_seed = parse_size(v, "synth_seed"); }},
      {"train_stride", [](auto& c, const auto& v) { c.train_stride = parse_size(v, "train_stride"); }},
      {"val_stride", [](auto& c, const auto& v) { c.val_stride = parse_size(v, "val_stride"); }},
      {"test_stride", [](auto& c, const auto& v) { c.test_stride = parse_size(v, "test_stride"); }},
      {"epochs", [](auto& c, const auto& v) { c.train.max_epochs = parse_size(v, "epochs"); }},
      {"batch_size", [](auto& c, const auto& v) { c.train.batch_size = parse_size(v, "batch_size"); }},
      {"lr", [](auto& c, const auto& v) { c.train.lr = parse_double(v, "lr"); }},
      {"patience", [](auto& c, const auto& v) { c.train.patience = parse_size(v, "patience"); }},
      {"clip_norm", [](auto& c, const auto& v) { c.train.clip_norm = parse_double(v, "clip_norm"); }},
      {"max_steps", [](auto& c, const auto& v) { c.train.max_steps = parse_size(v, "max_steps"); }},
      {"patch_len", [](auto& c, const auto& v) { c.model.patch.patch_len = parse_size(v, "patch_len"); }},
      {"patch_stride", [](auto& c, const auto& v) { c.model.patch.stride = parse_size(v, "patch_stride"); }},
      {"d_model", [](auto& c, const auto& v) { c.model.patch.d_model = parse_size(v, "d_model"); }},
      {"heads", [](auto& c, const auto& v) { c.model.reprogram.heads = parse_size(v, "heads"); }},
      {"head_dim", [](auto& c, const auto& v) { c.model.reprogram.head_dim = parse_size(v, "head_dim"); }},
      {"prototypes", [](auto& c, const auto& v) { c.model.reprogram.prototypes = parse_size(v, "prototypes"); }},
      {"standardize", [](auto& c, const auto& v) { c.model.standardize = parse_bool(v, "standardize"); }},
      {"use_prompt", [](auto& c, const auto& v) { c.model.use_prompt = parse_bool(v, "use_prompt"); }},
      {"dataset_context", [](auto& c, const auto& v) { c.model.dataset_context = v; }},
      {"backbone_layers", [](auto& c, const auto& v) { c.backbone.layers = parse_size(v, "backbone_layers"); }},
      {"backbone_heads", [](auto& c, const auto& v) { c.backbone.heads = parse_size(v, "backbone_heads"); }},
      {"d_llm", [](auto& c, const auto& v) { c.backbone.d_llm = parse_size(v, "d_llm"); }},
      {"d_ff", [](auto& c, const auto& v) { c.backbone.d_ff = parse_size(v, "d_ff"); }},
      {"max_seq", [](auto& c, const auto& v) { c.backbone.max_seq = parse_size(v, "max_seq"); }},
      {"backbone_seed", [](auto& c, const auto& v) { c.backbone.seed = parse_size(v, "backbone_seed"); }},
      {"backbone_path", [](auto& c, const auto& v) { c.backbone_path = v; }},
      {"dlinear_kernel", [](auto& c, const auto& v) { c.dlinear_kernel = parse_size(v, "dlinear_kernel"); }},
      {"traces", [](auto& c, const auto& v) { c.traces = parse_bool(v, "traces"); }},
      {"jobs", [](auto& c, const auto& v) { c.jobs = parse_size(v, "jobs"); }},
      {"prefix_cache_mb", [](auto& c, const auto& v) { c.prefix_cache_mb = parse_size(v, "prefix_cache_mb"); }},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& experiment_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& entry : setters()) k.push_back(entry.first);
    return k;
  }();
  return keys;
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [name, set] : setters()) {
    if (name == key) {
      set(cfg, value);
      return;
    }
  }
  throw ConfigError(fmt::format("unknown config key '{}'", key));
}

ExperimentConfig experiment_config_from(const KeyValueFile& file) {
  ExperimentConfig cfg;
  for (const auto& [key, value] : file.entries()) {
    try {
      apply_setting(cfg, key, value);
    } catch (const ConfigError& e) {
      const std::size_t line = file.line(key);
      if (line == 0) throw;
      throw ConfigError(fmt::format("line {}: {}", line, e.what()));
    }
  }
  return cfg;
}

std::vector<TimeSeries> synth_fixture_raw(std::size_t days, std::uint64_t seed) {
  const std::vector<PlantManifest> plants = default_plants();
  std::vector<TimeSeries> out;
  for (std::size_t i = 0; i < plants.size(); ++i) {
    TimeSeries s = synth_plant(derive_seed(seed, i), days, plants[i].capacity_mw, kFixtureCloud[i % 3]);
    s.plant_id = plants[i].plant_id;
    for (double& v : s.values) v *= plants[i].capacity_mw;
    s.normalized = false;
    out.push_back(std::move(s));
  }
  return out;
}

void write_fixture(const std::filesystem::path& dir, std::size_t days, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  const std::vector<PlantManifest> plants = default_plants();
  write_manifest(dir / "manifest.csv", plants);
  for (const TimeSeries& s : synth_fixture_raw(days, seed)) write_series(dir / (s.plant_id + ".csv"), s);
}

std::vector<PlantDataset> load_datasets(const ExperimentConfig& cfg) {
  std::vector<PlantDataset> out;
  if (cfg.data_dir.empty()) {
    const std::vector<PlantManifest> plants = default_plants();
    std::vector<TimeSeries> raw = synth_fixture_raw(cfg.synth_days, cfg.synth_seed);
    for (std::size_t i = 0; i < plants.size(); ++i) {
      TimeSeries s = preprocess(raw[i], plants[i].capacity_mw);
      s.plant_id = plants[i].plant_id;
      out.push_back({plants[i], std::move(s)});
    }
    return out;
  }
  const auto manifest_path = cfg.data_dir / "manifest.csv";
  if (!std::filesystem::exists(manifest_path))
    throw ConfigError(fmt::format("missing plant manifest {}", manifest_path.string()));
  for (const PlantManifest& p : read_manifest(manifest_path)) {
    if (!cfg.plants.empty() && std::find(cfg.plants.begin(), cfg.plants.end(), p.plant_id) == cfg.plants.end() &&
        std::none_of(cfg.pairs.begin(), cfg.pairs.end(),
                     [&](const PlantPair& pp) { return pp.source == p.plant_id || pp.target == p.plant_id; }))
      continue;
    const auto path = cfg.data_dir / (p.plant_id + ".csv");
    if (!std::filesystem::exists(path)) throw ConfigError(fmt::format("missing data file for plant {}: {}", p.plant_id, path.string()));
    TimeSeries s = preprocess(load_series(path, p), p.capacity_mw);
    s.plant_id = p.plant_id;
    out.push_back({p, std::move(s)});
  }
  return out;
}

namespace {

std::string fraction_text(const std::optional<double>& f) { return f ? format_metric(*f) : std::string(); }

}  // namespace

std::string report_csv(std::span<const ReportRow> rows) {
  std::string out(kReportHeader);
  out += '\n';
  for (const ReportRow& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.plant, r.horizon, r.protocol, r.model, r.seed,
                       format_metric(r.metrics.mse), format_metric(r.metrics.mae), format_metric(r.metrics.r2_raw),
                       format_metric(r.metrics.r2_reported), format_metric(r.metrics.smape), r.input_len,
                       fraction_text(r.fraction), r.train_windows, r.metrics.n);
  }
  return out;
}

namespace {

double to_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError(fmt::format("expected a number, got '{}'", s), line);
  return v;
}

std::size_t to_size(const std::string& s, std::size_t line) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError(fmt::format("expected an integer, got '{}'", s), line);
  return v;
}

}  // namespace

std::vector<ReportRow> parse_report(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line) || trim(line) != kReportHeader)
    throw ParseError(fmt::format("report header must be '{}'", kReportHeader), 1);
  std::vector<ReportRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> f = split_list(line);
    if (f.size() != 14) throw ParseError(fmt::format("expected 14 fields, found {}", f.size()), lineno);
    ReportRow r;
    r.plant = f[0];
    r.horizon = to_size(f[1], lineno);
    r.protocol = f[2];
    r.model = f[3];
    r.seed = to_size(f[4], lineno);
    r.metrics.mse = to_double(f[5], lineno);
    r.metrics.mae = to_double(f[6], lineno);
    r.metrics.r2_raw = to_double(f[7], lineno);
    r.metrics.r2_reported = to_double(f[8], lineno);
    r.metrics.smape = to_double(f[9], lineno);
    r.input_len = to_size(f[10], lineno);
    if (!f[11].empty()) r.fraction = to_double(f[11], lineno);
    r.train_windows = to_size(f[12], lineno);
    r.metrics.n = to_size(f[13], lineno);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ReportRow> read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open report {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_report(ss.str());
}

namespace {

struct Cell {
  std::string label;  // plant id or "A->B"
  std::string source;
  std::string target;
  std::size_t horizon = 0;
  std::size_t input_len = 0;
  std::optional<double> fraction;
  std::string model;
  std::uint64_t seed = 0;
};

struct TracePoint {
  TimePoint time;
  double truth;
  double forecast;
};

struct CellResult {
  ReportRow row;
  std::vector<TracePoint> trace;
};

auto row_key(const ReportRow& r) {
  return std::make_tuple(r.protocol, r.model, r.plant, r.horizon, r.fraction.value_or(-1.0), r.seed);
}

std::string file_safe(std::string s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.compare(i, 2, "->") == 0) {
      out += "-to-";
      ++i;
    } else if (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '-' || s[i] == '_' || s[i] == '.') {
      out += s[i];
    } else {
      out += '_';
    }
  }
  return out;
}

const PlantDataset& find_dataset(std::span<const PlantDataset> data, const std::string& id) {
  for (const PlantDataset& d : data)
    if (d.plant.plant_id == id) return d;
  throw ConfigError(fmt::format("no data for plant '{}'", id));
}

PlantData make_plant_data(const PlantDataset& d) {
  return PlantData(d.plant, d.series, chronological_split(d.series.size()));
}

class Runner {
 public:
  Runner(const ExperimentConfig& cfg, std::span<const PlantDataset> data, std::span<const Cell> cells,
         const LogSink& log)
      : cfg_(cfg), data_(data), log_(log) {
    backbone_ = cfg.backbone_path.empty() ? std::make_shared<const Backbone>(cfg.backbone)
                                          : std::make_shared<const Backbone>(Backbone::load_external(cfg.backbone_path));
    for (const Cell& c : cells) ++caches_[group(c)].pending;
  }

  void info(const std::string& msg) {
    if (!log_) return;
    std::lock_guard lock(log_mutex_);
    log_(LogLevel::Info, msg);
  }

  CellResult run(const Cell& cell) {
    const std::shared_ptr<PrefixCache> cache = acquire(cell);
    CellResult out = run(cell, cache);
    release(cell);
    return out;
  }

 private:
  using GroupKey = std::tuple<std::string, std::string, std::size_t>;

  // Prompts only repeat within one (source, target, horizon) group, so each
  // group gets its own prefix cache, dropped when its last cell finishes.
  struct CacheSlot {
    std::size_t pending = 0;
    std::shared_ptr<PrefixCache> cache;
  };

  static GroupKey group(const Cell& c) { return {c.source, c.target, c.horizon}; }

  std::shared_ptr<PrefixCache> acquire(const Cell& cell) {
    std::lock_guard lock(cache_mutex_);
    CacheSlot& slot = caches_.at(group(cell));
    if (!slot.cache) slot.cache = std::make_shared<PrefixCache>(backbone_, cfg_.prefix_cache_mb << 20);
    return slot.cache;
  }

  void release(const Cell& cell) {
    std::lock_guard lock(cache_mutex_);
    CacheSlot& slot = caches_.at(group(cell));
    if (--slot.pending == 0) slot.cache.reset();
  }

  CellResult run(const Cell& cell, const std::shared_ptr<PrefixCache>& cache) {
    const PlantData source = make_plant_data(find_dataset(data_, cell.source));
    const bool cross = cell.source != cell.target;
    const PlantData target = make_plant_data(find_dataset(data_, cell.target));
    const std::size_t L = cell.input_len, H = cell.horizon;

    WindowSet train_set = source.train_windows(L, H, cfg_.train_stride);
    if (cell.fraction) {
      const std::size_t total = train_set.size();
      train_set = limit_fraction(train_set, *cell.fraction);
      info(fmt::format("{} fewshot p={}: {} of {} training windows", cell.label, format_metric(*cell.fraction),
                       train_set.size(), total));
    }
    const WindowSet val_set = source.val_windows(L, H, cfg_.val_stride);
    if (cross && (target.train_reads() != 0 || target.val_reads() != 0))
      throw DataError("zero-shot target training or validation data was read");

    CellResult out;
    ReportRow& row = out.row;
    row.plant = cell.label;
    row.horizon = H;
    row.protocol = std::string(to_string(cfg_.protocol));
    row.model = cell.model;
    row.seed = cell.seed;
    row.input_len = L;
    row.fraction = cell.fraction;

    TrainConfig tc = cfg_.train;
    tc.seed = cell.seed;
    std::function<Evaluation(const WindowSet&)> eval;
    std::optional<ModelState> state;
    std::optional<DLinearState> dlinear;
    if (cell.model == "persistence") {
      eval = [](const WindowSet& w) { return evaluate_persistence(w); };
    } else if (cell.model == "dlinear") {
      dlinear = DLinearState::init(L, H, cfg_.dlinear_kernel);
      const TrainHistory h = train_dlinear(*dlinear, train_set, &val_set, tc);
      row.train_windows = train_set.size();
      info(fmt::format("{} dlinear H={} seed={}: {} epochs", cell.label, H, cell.seed, h.train_loss.size()));
      eval = [&](const WindowSet& w) { return evaluate_dlinear(*dlinear, w); };
    } else {
      ForecasterConfig fc = cfg_.model;
      fc.input_len = L;
      fc.horizon = H;
      fc.seed = cell.seed;
      state = ModelState::init(fc, backbone_);
      const TrainHistory h = train(*state, train_set, &val_set, tc, cache, [&](const EpochLog& e) {
        info(fmt::format("{} H={} seed={} epoch {}: train {:.6f} val {:.6f}", cell.label, H, cell.seed, e.epoch,
                         e.train_loss, e.val_loss));
      });
      row.train_windows = train_set.size();
      info(fmt::format("{} H={} seed={}: best epoch {} of {}", cell.label, H, cell.seed, h.best_epoch,
                       h.train_loss.size()));
      eval = [&](const WindowSet& w) { return evaluate(*state, w, cache); };
    }

    const std::string before = state ? state->trainable_hash() : std::string();
    const WindowSet test_set = target.test_windows(L, H, cfg_.test_stride);
    const Evaluation ev = eval(test_set);
    row.metrics = ev.metrics;
    if (cfg_.traces) {
      const WindowSet tiles = target.test_windows(L, H, H);
      const Evaluation tr = eval(tiles);
      for (std::size_t i = 0; i < tiles.size(); ++i)
        for (std::size_t j = 0; j < H; ++j)
          out.trace.push_back({target.series().timestamp(tiles.origin(i) + L + j), tr.truth[i * H + j],
                               tr.forecast[i * H + j]});
    }
    if (state && state->trainable_hash() != before)
      throw NumericError(fmt::format("{}: trainable parameters changed during target evaluation", cell.label));
    if (cross && (target.train_reads() != 0 || target.val_reads() != 0))
      throw DataError(fmt::format("{}: zero-shot run read target training or validation data", cell.label));
    return out;
  }

  const ExperimentConfig& cfg_;
  std::span<const PlantDataset> data_;
  const LogSink& log_;
  std::mutex log_mutex_;
  std::shared_ptr<const Backbone> backbone_;
  std::mutex cache_mutex_;
  std::map<GroupKey, CacheSlot> caches_;
};

std::vector<Cell> plan_cells(const ExperimentConfig& cfg, std::span<const PlantDataset> data) {
  std::vector<std::string> plants = cfg.plants;
  if (plants.empty())
    for (const PlantDataset& d : data) plants.push_back(d.plant.plant_id);
  for (const std::string& p : plants) find_dataset(data, p);

  std::vector<PlantPair> pairs;
  if (cfg.protocol == Protocol::ZeroShot) {
    pairs = cfg.pairs;
    if (pairs.empty()) {
      for (const std::string& a : plants)
        for (const std::string& b : plants)
          if (a != b) pairs.push_back({a, b});
    }
    if (pairs.empty()) throw ConfigError("zero-shot protocol needs at least two plants");
    for (const PlantPair& pp : pairs) {
      find_dataset(data, pp.source);
      find_dataset(data, pp.target);
    }
  } else {
    for (const std::string& p : plants) pairs.push_back({p, p});
  }

  std::vector<std::optional<double>> fractions{std::nullopt};
  if (cfg.protocol == Protocol::FewShot) {
    fractions.clear();
    for (double f : cfg.fractions) fractions.emplace_back(f);
  }

  std::vector<Cell> cells;
  for (const PlantPair& pp : pairs)
    for (std::size_t h : cfg.resolved_horizons())
      for (const auto& f : fractions)
        for (const std::string& model : cfg.models)
          for (std::uint64_t seed : cfg.seeds) {
            Cell c;
            c.label = pp.source == pp.target ? pp.source : pp.source + "->" + pp.target;
            c.source = pp.source;
            c.target = pp.target;
            c.horizon = h;
            c.input_len = cfg.resolved_input_len(h);
            c.fraction = f;
            c.model = model;
            c.seed = seed;
            cells.push_back(std::move(c));
          }
  return cells;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write {}", path.string()));
  out << text;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::span<const PlantDataset> data,
                                const std::filesystem::path& out_dir, const LogSink& log) {
  cfg.validate();
  ExperimentResult result;
  auto warn = [&](const std::string& msg) {
    result.warnings.push_back(msg);
    if (log) log(LogLevel::Warn, msg);
  };
  if (cfg.protocol == Protocol::FewShot)
    for (double f : cfg.fractions)
      if (std::none_of(kDefaultFractions.begin(), kDefaultFractions.end(), [&](double d) { return std::abs(d - f) < 1e-12; }))
        warn(fmt::format("fraction {} is outside the default set {{0.05, 0.1, 0.2, 0.5}}", format_metric(f)));
  if (cfg.protocol != Protocol::Short && cfg.input_len && *cfg.input_len != 336)
    warn(fmt::format("{} protocol normally uses input length 336; using {}", to_string(cfg.protocol), *cfg.input_len));

  const std::vector<Cell> cells = plan_cells(cfg, data);
  Runner runner(cfg, data, cells, log);
  std::vector<std::optional<CellResult>> results(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        results[i] = runner.run(cells[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(cfg.jobs, cells.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<std::size_t> order(cells.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return row_key(results[a]->row) < row_key(results[b]->row); });
  for (std::size_t i : order) result.rows.push_back(results[i]->row);

  if (out_dir.empty()) return result;
  std::filesystem::create_directories(out_dir);
  result.report_path = out_dir / "report.csv";
  write_text(result.report_path, report_csv(result.rows));
  result.summary_path = out_dir / "summary.csv";
  write_text(result.summary_path, summary_csv(summarize(result.rows)));
  if (cfg.traces) {
    std::filesystem::create_directories(out_dir / "traces");
    for (std::size_t i : order) {
      const ReportRow& r = results[i]->row;
      std::string name = fmt::format("{}_{}_{}_h{}", r.protocol, r.model, file_safe(r.plant), r.horizon);
      if (r.fraction) name += fmt::format("_p{}", format_metric(*r.fraction));
      name += fmt::format("_s{}.csv", r.seed);
      std::string text = "timestamp,truth,forecast,model\n";
      for (const TracePoint& p : results[i]->trace)
        text += fmt::format("{},{},{},{}\n", format_timestamp(p.time), format_metric(p.truth),
                            format_metric(p.forecast), r.model);
      const auto path = out_dir / "traces" / name;
      write_text(path, text);
      result.traces.push_back(path);
    }
  }
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                const LogSink& log) {
  cfg.validate();
  const std::vector<PlantDataset> data = load_datasets(cfg);
  return run_experiment(cfg, data, out_dir, log);
}

std::vector<SummaryRow> summarize(std::span<const ReportRow> rows) {
  if (rows.empty()) throw ConfigError("report is empty");
  using Key = std::tuple<std::string, std::size_t, double, std::string>;
  std::map<Key, std::vector<const ReportRow*>> groups;
  for (const ReportRow& r : rows) groups[{r.protocol, r.horizon, r.fraction.value_or(-1.0), r.model}].push_back(&r);

  std::vector<SummaryRow> out;
  for (const auto& [key, members] : groups) {
    SummaryRow s;
    s.protocol = std::get<0>(key);
    s.horizon = std::get<1>(key);
    s.fraction = members.front()->fraction;
    s.model = std::get<3>(key);
    std::set<std::string> plants;
    std::set<std::uint64_t> seeds;
    for (const ReportRow* r : members) {
      plants.insert(r->plant);
      seeds.insert(r->seed);
      s.mse += r->metrics.mse;
      s.mae += r->metrics.mae;
      s.r2_raw += r->metrics.r2_raw;
      s.r2_reported += r->metrics.r2_reported;
      s.smape += r->metrics.smape;
    }
    const double n = static_cast<double>(members.size());
    s.mse /= n;
    s.mae /= n;
    s.r2_raw /= n;
    s.r2_reported /= n;
    s.smape /= n;
    s.rows = members.size();
    s.n_plants = plants.size();
    s.n_seeds = seeds.size();
    out.push_back(std::move(s));
  }

  // Rank models within each (protocol, horizon, fraction) block.
  for (std::size_t metric = 0; metric < 4; ++metric) {
    auto value = [metric](const SummaryRow& s) {
      switch (metric) {
        case 0: return s.mse;
        case 1: return s.mae;
        case 2: return -s.r2_reported;
        default: return s.smape;
      }
    };
    std::map<std::tuple<std::string, std::size_t, double>, std::vector<SummaryRow*>> blocks;
    for (SummaryRow& s : out) blocks[{s.protocol, s.horizon, s.fraction.value_or(-1.0)}].push_back(&s);
    for (auto& [k, members] : blocks) {
      std::vector<double> vals;
      for (SummaryRow* s : members) vals.push_back(value(*s));
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      for (SummaryRow* s : members) {
        const double v = value(*s);
        s->rank[metric] = v == vals[0] ? 1 : (vals.size() > 1 && v == vals[1] ? 2 : 0);
      }
    }
  }
  return out;
}

std::string summary_csv(std::span<const SummaryRow> rows) {
  auto flag = [](int r) { return r == 1 ? "best" : r == 2 ? "second" : ""; };
  std::string out =
      "protocol,horizon,fraction,model,n_plants,n_seeds,rows,mse,mse_rank,mae,mae_rank,r2_raw,r2_reported,"
      "r2_rank,smape,smape_rank\n";
  for (const SummaryRow& s : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", s.protocol, s.horizon,
                       fraction_text(s.fraction), s.model, s.n_plants, s.n_seeds, s.rows, format_metric(s.mse),
                       flag(s.rank[0]), format_metric(s.mae), flag(s.rank[1]), format_metric(s.r2_raw),
                       format_metric(s.r2_reported), flag(s.rank[2]), format_metric(s.smape), flag(s.rank[3]));
  }
  return out;
}

}  // namespace tsrp
