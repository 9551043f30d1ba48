#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "loceq/dynamics.hpp"
#include "loceq/ensembles.hpp"
#include "loceq/errors.hpp"
#include "loceq/flow.hpp"
#include "loceq/graph_analysis.hpp"
#include "loceq/io.hpp"
#include "loceq/rng.hpp"
#include "loceq/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace loceq::cli {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A scan fails only if more than this fraction of its samples fail.
constexpr double kFailureTolerance = 0.10;

struct ModelOptions {
  std::vector<std::string> variants{"exh"};
  std::string sizes = "6";
  std::string bodies = "2";
  std::string diameters = "1";
  std::uint64_t seed = 1;
  long samples = 0;  // 0: the schedule of the command
  double margin = 0.10;
  double horizon = 0.0;
  std::string out = ".";
  std::string obs_mode = "randomised";
  std::string fits_dir;
  std::size_t calibration_samples = 100;
};

void add_model_options(CLI::App* sub, ModelOptions& o, bool dynamics) {
  sub->add_option("--variant", o.variants,
                  "Ensembles: exh, exa, brf, bvf, brc, reg or all")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_option("--L", o.sizes, "Chain lengths, e.g. 8, 4..9 or 4,6,8")
      ->capture_default_str();
  sub->add_option("--n", o.bodies, "Sites per interaction term (list)")->capture_default_str();
  sub->add_option("--d", o.diameters, "Term diameters (list, or auto for n-1..L-1)")
      ->capture_default_str();
  sub->add_option("--seed", o.seed, "Base seed")->capture_default_str();
  sub->add_option("--samples", o.samples, "Samples per cell (0: default schedule)")
      ->capture_default_str();
  sub->add_option("--out", o.out, "Output directory")->capture_default_str();
  sub->add_option("--obs-mode", o.obs_mode, "Magnetisation weights")
      ->check(CLI::IsMember({"randomised", "homogeneous"}))
      ->capture_default_str();
  sub->add_option("--fits-dir", o.fits_dir, "Calibration cache (default <out>/fits)");
  sub->add_option("--calibration-samples", o.calibration_samples,
                  "Samples per size for weight and norm calibration")
      ->capture_default_str();
  if (dynamics) {
    sub->add_option("--margin", o.margin, "Relative equilibration margin")
        ->check(CLI::Range(1e-9, 1.0 - 1e-9))
        ->capture_default_str();
    sub->add_option("--horizon", o.horizon, "Integration horizon (0: 10 L)")
        ->capture_default_str();
  }
}

std::vector<Variant> variants_of(const ModelOptions& o) {
  std::vector<Variant> out;
  for (const auto& name : o.variants) {
    if (name == "all") {
      out.assign(std::begin(kAllVariants), std::end(kAllVariants));
      return out;
    }
    try {
      out.push_back(parse_variant(name));
    } catch (const DomainError& e) {
      throw UsageError(e.what());
    }
  }
  if (out.empty()) throw UsageError("no ensemble variant given");
  return out;
}

ObservableMode mode_of(const ModelOptions& o) {
  return o.obs_mode == "homogeneous" ? ObservableMode::kHomogeneous
                                     : ObservableMode::kRandomised;
}

std::string mode_name(ObservableMode m) {
  return m == ObservableMode::kHomogeneous ? "homogeneous" : "randomised";
}

struct Cell {
  Variant variant;
  LocalitySpec locality;
};

// Cartesian grid over variants, sizes, bodies and diameters; invalid
// (L, n, d) combinations are skipped. "auto" diameters mean n-1..L-1.
std::vector<Cell> cells_of(const ModelOptions& o) {
  const auto variants = variants_of(o);
  const auto sizes = parse_int_list(o.sizes);
  const auto bodies = parse_int_list(o.bodies);
  const bool auto_d = o.diameters == "auto";
  const auto diameters = auto_d ? std::vector<int>{} : parse_int_list(o.diameters);
  std::vector<Cell> cells;
  for (const auto v : variants)
    for (const int L : sizes)
      for (const int n : bodies) {
        std::vector<int> ds = diameters;
        if (auto_d)
          for (int d = std::max(n - 1, 1); d <= L - 1; ++d) ds.push_back(d);
        for (const int d : ds) {
          const LocalitySpec loc{L, n, d};
          try {
            loc.validate();
          } catch (const DomainError&) {
            continue;
          }
          cells.push_back({v, loc});
        }
      }
  if (cells.empty()) throw UsageError("the (L, n, d) grid is empty");
  return cells;
}

std::uint64_t cell_seed(std::uint64_t base, const LocalitySpec& loc, std::size_t index) {
  // Variants share seeds so that samples are paired across ensembles.
  const auto key = static_cast<std::uint64_t>(loc.sites) * 1000000 +
                   static_cast<std::uint64_t>(loc.bodies) * 1000 +
                   static_cast<std::uint64_t>(loc.diameter);
  return derive_seed(derive_seed(base, key), index);
}

long pow2(int e) { return e <= 0 ? 1 : (e >= 40 ? (1L << 40) : (1L << e)); }

enum class Schedule { kOne, kTeq, kFit, kCorrelation, kExtrapolation };

std::size_t sample_count(const ModelOptions& o, Schedule s, const LocalitySpec& loc) {
  if (o.samples < 0) throw UsageError("--samples must be nonnegative");
  if (o.samples > 0) return static_cast<std::size_t>(o.samples);
  switch (s) {
    case Schedule::kOne: return 1;
    case Schedule::kTeq: return static_cast<std::size_t>(pow2(18 - loc.sites));
    case Schedule::kFit: return static_cast<std::size_t>(pow2(14 - loc.sites));
    case Schedule::kCorrelation:
      return static_cast<std::size_t>(pow2(loc.sites - loc.bodies)) + 1;
    case Schedule::kExtrapolation:
      return static_cast<std::size_t>(std::max(4L, pow2(18 - loc.sites)));
  }
  return 1;
}

Metadata base_config(const std::string& command, const ModelOptions& o) {
  Metadata m;
  m["command"] = command;
  std::string vs;
  for (const auto& v : o.variants) vs += (vs.empty() ? "" : ",") + v;
  m["variant"] = vs;
  m["L"] = o.sizes;
  m["n"] = o.bodies;
  m["d"] = o.diameters;
  m["seed"] = std::to_string(o.seed);
  m["samples"] = std::to_string(o.samples);
  m["margin"] = format_double(o.margin);
  m["horizon"] = format_double(o.horizon);
  m["obs_mode"] = o.obs_mode;
  m["calibration_samples"] = std::to_string(o.calibration_samples);
  return m;
}

struct Provenance {
  std::string hash;
  std::uint64_t seed = 0;

  std::string line() const {
    return "loceq " + std::string(code_version()) + " config_hash=" + hash +
           " seed=" + std::to_string(seed);
  }
  void stamp(json& j) const {
    j["config_hash"] = hash;
    j["code_version"] = std::string(code_version());
    j["base_seed"] = seed;
  }
};

Provenance provenance_of(const Metadata& config, std::uint64_t seed) {
  return {config_hash(config), seed};
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

std::ofstream open_out(const fs::path& p, std::ios::openmode mode = std::ios::out) {
  std::ofstream f(p, mode);
  if (!f) throw DomainError("cannot open " + p.string() + " for writing");
  return f;
}

// Timestamps live only here so that every other output is reproducible.
void log_run(const fs::path& dir, const std::string& command, const Provenance& p,
             const std::string& status) {
  auto f = open_out(dir / "run.log", std::ios::app);
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  f << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ") << ' ' << command << ' '
    << p.line() << ' ' << status << '\n';
}

// Lazily computed calibrations. Needed only by graph variants (weight
// model) and above the exact-norm size (norm fit).
class Models {
 public:
  explicit Models(const ModelOptions& o)
      : dir_(o.fits_dir.empty() ? fs::path(o.out) / "fits" : fs::path(o.fits_dir)) {
    opts_.samples_per_size = o.calibration_samples;
    opts_.seed = o.seed;
  }

  void prepare(const Cell& c, std::ostream& err) {
    if (!needs(c)) return;
    const Key key{c.locality.bodies, c.locality.diameter, c.variant};
    if (cache_.count(key)) return;
    err << "calibrating n=" << key.n << " d=" << key.d << " " << to_string(c.variant)
        << " (cache " << dir_.string() << ")\n";
    cache_.emplace(key, cached_calibration(dir_, key.n, key.d, c.variant, opts_));
  }

  WeightModel weights(const Cell& c) const {
    const auto* cal = find(c);
    return cal ? cal->weights : WeightModel{};
  }
  const ScalingFits* fits(const Cell& c) const {
    const auto* cal = find(c);
    return cal ? &cal->fits : nullptr;
  }

 private:
  struct Key {
    int n, d;
    Variant v;
    bool operator<(const Key& o) const {
      return std::tie(n, d, v) < std::tie(o.n, o.d, o.v);
    }
  };
  static bool needs(const Cell& c) {
    return c.variant != Variant::kExh || c.locality.dimension() > kExactNormMaxDim;
  }
  const Calibration* find(const Cell& c) const {
    const auto it = cache_.find({c.locality.bodies, c.locality.diameter, c.variant});
    return it == cache_.end() ? nullptr : &it->second;
  }

  fs::path dir_;
  CalibrationOptions opts_;
  std::map<Key, Calibration> cache_;
};

struct Task {
  Cell cell;
  std::size_t index = 0;
  std::uint64_t seed = 0;
};

struct SampleResult {
  Task task;
  bool ok = false;
  std::string error;
  bool dynamics = false;
  bool reached = false;
  std::optional<double> t_eq;
  double diag_o = std::numeric_limits<double>::quiet_NaN();
  double diag_o2 = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> f_max;
  std::optional<double> extrapolated;
  bool trusted = true;
};

template <class F>
void parallel_for(std::size_t count, unsigned threads, F&& body) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) body(i);
  };
  std::vector<std::thread> pool;
  const auto extra = std::min<std::size_t>(threads, count);
  for (std::size_t t = 1; t < extra; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

struct Evaluation {
  bool dynamics = true;
  bool flow = false;
  EquilibrationOptions eq;
  const FlowFit* fit = nullptr;
  double trust_fraction = 1.0;
};

std::vector<SampleResult> evaluate(const std::vector<Task>& tasks, const Models& models,
                                   const ModelOptions& o, const Evaluation& ev) {
  std::vector<SampleResult> results(tasks.size());
  const auto mode = mode_of(o);
  parallel_for(tasks.size(), thread_count(), [&](std::size_t i) {
    SampleResult r;
    r.task = tasks[i];
    r.dynamics = ev.dynamics;
    const auto& c = tasks[i].cell;
    try {
      const EnsembleSpec spec{c.variant, c.locality, mode, tasks[i].seed};
      const auto smp = draw(spec, models.weights(c), models.fits(c));
      std::optional<double> diag;
      if (ev.dynamics) {
        const auto eq = equilibration_time(smp.hamiltonian, smp.observable,
                                           default_initial_node(smp.observable), ev.eq);
        r.reached = eq.reached();
        r.t_eq = eq.t_eq;
        r.diag_o = eq.diag_o;
        r.diag_o2 = eq.diag_o2;
        diag = eq.diag_o;
      }
      if (ev.flow) {
        const auto ends = flow_endpoints(smp.observable, diag);
        r.f_max = max_flow(capacity_graph(smp.hamiltonian, ends.source, ends.sink));
        if (ev.fit) {
          const auto x = extrapolate_teq(*ev.fit, *r.f_max, ev.trust_fraction);
          r.extrapolated = x.t_eq;
          r.trusted = x.trusted;
        }
      }
      r.ok = true;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    results[i] = std::move(r);
  });
  return results;
}

EquilibrationOptions eq_options(const ModelOptions& o) {
  EquilibrationOptions eq;
  eq.margin = o.margin;
  eq.horizon = o.horizon;
  return eq;
}

std::vector<Task> tasks_for(const std::vector<Cell>& cells, const ModelOptions& o,
                            Schedule s) {
  std::vector<Task> tasks;
  for (const auto& c : cells) {
    const auto count = sample_count(o, s, c.locality);
    for (std::size_t i = 0; i < count; ++i)
      tasks.push_back({c, i, cell_seed(o.seed, c.locality, i)});
  }
  return tasks;
}

std::string opt_num(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

json sample_json(const SampleResult& r, const Provenance& p) {
  const auto& c = r.task.cell;
  json j;
  j["variant"] = std::string(to_string(c.variant));
  j["L"] = c.locality.sites;
  j["n"] = c.locality.bodies;
  j["d"] = c.locality.diameter;
  j["index"] = r.task.index;
  j["seed"] = r.task.seed;
  if (!r.ok) {
    j["error"] = r.error;
  } else {
    j["T_eq"] = r.t_eq ? json(*r.t_eq) : json(nullptr);
    j["diag_O"] = r.diag_o;
    j["diag_O2"] = r.diag_o2;
    j["reached"] = r.reached;
    if (r.f_max) j["f_max"] = *r.f_max;
  }
  p.stamp(j);
  return j;
}

struct FailureCount {
  std::size_t failed = 0;
  std::size_t total = 0;
  bool exceeded() const {
    return total > 0 && static_cast<double>(failed) > kFailureTolerance * static_cast<double>(total);
  }
};

FailureCount report_failures(const std::vector<SampleResult>& results, std::ostream& err) {
  FailureCount f;
  f.total = results.size();
  for (const auto& r : results) {
    if (r.ok) continue;
    ++f.failed;
    const auto& c = r.task.cell;
    err << "sample failed: " << to_string(c.variant) << " " << c.locality.to_string()
        << " index " << r.task.index << ": " << r.error << '\n';
  }
  if (f.failed)
    err << f.failed << " of " << f.total << " samples failed and are excluded from means\n";
  return f;
}

// ---------------------------------------------------------------- generate

int cmd_generate(const ModelOptions& o, std::optional<std::size_t> rho, std::ostream& out,
                 std::ostream& err) {
  const auto cells = cells_of(o);
  const auto dir = prepare_out(o.out);
  auto config = base_config("generate", o);
  if (rho) config["rho"] = std::to_string(*rho);
  const auto prov = provenance_of(config, o.seed);
  Models models(o);
  for (const auto& c : cells) models.prepare(c, err);
  for (const auto& task : tasks_for(cells, o, Schedule::kOne)) {
    const auto& c = task.cell;
    const EnsembleSpec spec{c.variant, c.locality, mode_of(o), task.seed, rho};
    const auto smp = draw(spec, models.weights(c), models.fits(c));
    const std::string stem = std::string(to_string(c.variant)) + "_L" +
                             std::to_string(c.locality.sites) + "_n" +
                             std::to_string(c.locality.bodies) + "_d" +
                             std::to_string(c.locality.diameter) + "_i" +
                             std::to_string(task.index);
    const auto path = dir / (stem + ".bin");
    write_matrix(path, smp.hamiltonian);
    Metadata meta;
    meta["variant"] = std::string(to_string(c.variant));
    meta["L"] = std::to_string(c.locality.sites);
    meta["n"] = std::to_string(c.locality.bodies);
    meta["d"] = std::to_string(c.locality.diameter);
    meta["obs_mode"] = mode_name(mode_of(o));
    meta["index"] = std::to_string(task.index);
    meta["seed"] = std::to_string(task.seed);
    meta["base_seed"] = std::to_string(o.seed);
    meta["dim"] = std::to_string(smp.hamiltonian.dim());
    meta["stored_entries"] = std::to_string(smp.hamiltonian.entries().size());
    meta["nonzeros"] = std::to_string(smp.hamiltonian.nonzero_count());
    meta["raw_norm"] = format_double(smp.raw_norm);
    meta["norm_extrapolated"] = smp.norm_extrapolated ? "true" : "false";
    meta["construction_attempts"] = std::to_string(smp.construction.attempts);
    meta["construction_shuffles"] = std::to_string(smp.construction.shuffles);
    meta["config_hash"] = prov.hash;
    meta["code_version"] = std::string(code_version());
    write_metadata(metadata_path(path), meta);
    out << path.string() << '\n';
  }
  return kExitOk;
}

// ----------------------------------------------------------------- analyze

struct SingleOptions {
  std::string matrix;
  std::size_t index = 0;
};

struct Loaded {
  Cell cell;
  std::uint64_t seed = 0;
  SparseHermitian hamiltonian;
  DiagonalObservable observable;
};

// One sample: either read from a generated file (the observable is rebuilt
// from the sidecar seed) or drawn from the first grid cell.
Loaded load_single(const ModelOptions& o, const SingleOptions& s, std::ostream& err) {
  if (!s.matrix.empty()) {
    const auto h = read_matrix(fs::path(s.matrix));
    const auto meta = read_metadata(metadata_path(s.matrix));
    check_against_metadata(h, meta);
    auto field = [&](const char* key) {
      const auto it = meta.find(key);
      if (it == meta.end()) throw FormatError(std::string("sidecar lacks ") + key);
      return it->second;
    };
    const LocalitySpec loc{std::stoi(field("L")), std::stoi(field("n")), std::stoi(field("d"))};
    const auto seed = std::stoull(field("seed"));
    const auto mode = field("obs_mode") == "homogeneous" ? ObservableMode::kHomogeneous
                                                         : ObservableMode::kRandomised;
    return {{parse_variant(field("variant")), loc}, seed, h,
            build_observable(loc.sites, mode, seed)};
  }
  const auto cells = cells_of(o);
  if (cells.size() != 1) throw UsageError("give a single variant and (L, n, d)");
  Models models(o);
  models.prepare(cells[0], err);
  const auto seed = cell_seed(o.seed, cells[0].locality, s.index);
  const EnsembleSpec spec{cells[0].variant, cells[0].locality, mode_of(o), seed};
  auto smp = draw(spec, models.weights(cells[0]), models.fits(cells[0]));
  return {cells[0], seed, std::move(smp.hamiltonian), std::move(smp.observable)};
}

int cmd_analyze(const ModelOptions& o, const SingleOptions& s, std::ostream& out,
                std::ostream& err) {
  const auto x = load_single(o, s, err);
  const auto dir = prepare_out(o.out);
  auto config = base_config("analyze", o);
  config["matrix"] = s.matrix;
  config["index"] = std::to_string(s.index);
  const auto prov = provenance_of(config, o.seed);

  const auto& loc = x.cell.locality;
  const auto g = adjacency_of(x.hamiltonian);
  const auto deg = degrees(g);
  const auto [dmin, dmax] = std::minmax_element(deg.begin(), deg.end());
  double dmean = 0;
  for (auto v : deg) dmean += static_cast<double>(v);
  dmean /= static_cast<double>(deg.size());
  const double radius = flip_radius(loc, x.observable);
  const double dlt = delta_o(x.hamiltonian, x.observable);
  const auto fun = functional_bandwidth(x.observable, radius);
  const auto emp = empirical_bandwidth(g);
  const bool homogeneous = x.observable.mode() == ObservableMode::kHomogeneous;

  json j;
  j["variant"] = std::string(to_string(x.cell.variant));
  j["L"] = loc.sites;
  j["n"] = loc.bodies;
  j["d"] = loc.diameter;
  j["seed"] = x.seed;
  j["dim"] = x.hamiltonian.dim();
  j["edges"] = g.edge_count();
  j["degree_formula"] = degree_formula(loc);
  j["degree_min"] = *dmin;
  j["degree_max"] = *dmax;
  j["degree_mean"] = dmean;
  j["delta_o"] = dlt;
  j["flip_radius"] = radius;
  j["band_violations"] = band_violations(g, fun);
  j["delta_o_window_violations"] = window_violations(g, x.observable, dlt);
  j["max_empirical_bandwidth"] = emp.max_half_width();
  if (homogeneous) j["block_band_violations"] = band_violations(g, block_bandwidth(x.observable, loc.bodies));
  prov.stamp(j);
  open_out(dir / "analysis.json") << j.dump(2) << '\n';

  {
    auto f = open_out(dir / "bandwidth.csv");
    std::vector<std::string> cols = {"node", "o", "b_empirical", "b_functional",
                                     "window_first", "window_last"};
    if (homogeneous) cols.push_back("b_block");
    CsvWriter w(f, cols, prov.line());
    const auto block = homogeneous ? block_bandwidth(x.observable, loc.bodies) : BandwidthProfile{};
    for (std::size_t k = 0; k < g.dim(); ++k) {
      std::vector<std::string> row = {std::to_string(k + 1), format_double(x.observable.eigenvalues()[k]),
                                      std::to_string(emp.width[k]), std::to_string(fun.width[k]),
                                      std::to_string(fun.first[k] + 1), std::to_string(fun.last[k] + 1)};
      if (homogeneous) row.push_back(std::to_string(block.width[k]));
      w.row(row);
    }
  }
  {
    json head = {{"variant", j["variant"]}, {"L", loc.sites}, {"n", loc.bodies},
                 {"d", loc.diameter}, {"seed", x.seed}};
    prov.stamp(head);
    auto f = open_out(dir / "edges.txt");
    write_edge_list(f, g, head.dump());
  }
  {
    auto f = open_out(dir / "mask.pbm", std::ios::binary);
    write_mask_pbm(f, g);
  }
  out << j.dump(2) << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------ evolve

int cmd_evolve(const ModelOptions& o, const SingleOptions& s, double step,
               std::ostream& out, std::ostream& err) {
  const auto x = load_single(o, s, err);
  const auto dir = prepare_out(o.out);
  auto config = base_config("evolve", o);
  config["matrix"] = s.matrix;
  config["index"] = std::to_string(s.index);
  config["step"] = format_double(step);
  const auto prov = provenance_of(config, o.seed);

  const double horizon = o.horizon > 0 ? o.horizon : default_horizon(x.cell.locality.sites);
  const auto grid = default_time_grid(horizon, step);
  const auto node = default_initial_node(x.observable);
  const auto series = evolve(x.hamiltonian, x.observable, node, grid);
  {
    auto f = open_out(dir / "trajectory.csv");
    CsvWriter w(f, {"t", "exp_O", "exp_O2", "norm"}, prov.line());
    for (std::size_t i = 0; i < grid.size(); ++i)
      w.row({format_double(grid[i]), format_double(series.exp_o[i]),
             format_double(series.exp_o2[i]), format_double(1.0 + series.norm_drift[i])});
  }
  auto eq = eq_options(o);
  eq.grid = grid;
  const auto r = equilibration_time(x.hamiltonian, x.observable, node, eq);
  SampleResult sr;
  sr.task = {x.cell, s.index, x.seed};
  sr.ok = true;
  sr.reached = r.reached();
  sr.t_eq = r.t_eq;
  sr.diag_o = r.diag_o;
  sr.diag_o2 = r.diag_o2;
  const auto j = sample_json(sr, prov);
  open_out(dir / "equilibration.json") << j.dump(2) << '\n';
  out << j.dump() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- teq-scan

int cmd_teq_scan(const ModelOptions& o, std::ostream& out, std::ostream& err) {
  const auto cells = cells_of(o);
  const auto dir = prepare_out(o.out);
  const auto config = base_config("teq-scan", o);
  const auto prov = provenance_of(config, o.seed);
  Models models(o);
  for (const auto& c : cells) models.prepare(c, err);
  const auto tasks = tasks_for(cells, o, Schedule::kTeq);
  Evaluation ev;
  ev.eq = eq_options(o);
  const auto results = evaluate(tasks, models, o, ev);

  {
    auto f = open_out(dir / "teq_samples.jsonl");
    for (const auto& r : results) f << sample_json(r, prov).dump() << '\n';
  }
  auto f = open_out(dir / "teq_summary.csv");
  CsvWriter w(f, {"variant", "L", "n", "d", "samples", "reached", "not_reached", "failed",
                  "mean_T_eq", "stderr_T_eq"},
              prov.line());
  std::size_t pos = 0;
  for (const auto& c : cells) {
    std::vector<double> t;
    std::size_t total = 0, failed = 0, missing = 0;
    for (; pos < results.size() && results[pos].task.cell.variant == c.variant &&
           results[pos].task.cell.locality == c.locality;
         ++pos) {
      ++total;
      const auto& r = results[pos];
      if (!r.ok) {
        ++failed;
      } else if (!r.reached) {
        ++missing;
      } else {
        t.push_back(*r.t_eq);
      }
    }
    std::string mean, se;
    if (!t.empty()) {
      const auto m = mean_stderr(t);
      mean = format_double(m.mean);
      se = format_double(m.stderr_);
    }
    w.row({std::string(to_string(c.variant)), std::to_string(c.locality.sites),
           std::to_string(c.locality.bodies), std::to_string(c.locality.diameter),
           std::to_string(total), std::to_string(t.size()), std::to_string(missing),
           std::to_string(failed), mean, se});
    out << to_string(c.variant) << ' ' << c.locality.to_string() << " T_eq " << mean << " +- "
        << se << " (" << t.size() << "/" << total << ")\n";
  }
  const auto fails = report_failures(results, err);
  log_run(dir, "teq-scan", prov, fails.exceeded() ? "failed" : "ok");
  return fails.exceeded() ? kExitDomain : kExitOk;
}

// ---------------------------------------------------------------- flow fits

json fit_json(const FlowFit& fit, Variant v, int n, int d, const Provenance& p) {
  json j;
  j["variant"] = std::string(to_string(v));
  j["n"] = n;
  j["d"] = d;
  j["slope"] = fit.slope();
  j["intercept"] = fit.intercept();
  j["slope_stderr"] = fit.line.slope_stderr;
  j["intercept_stderr"] = fit.line.intercept_stderr;
  j["r_squared"] = fit.line.r_squared;
  j["f_max_min"] = fit.line.x_min;
  j["f_max_max"] = fit.line.x_max;
  j["pair_count"] = fit.pair_count;
  j["residuals"] = fit.line.residuals;
  json sizes = json::array();
  for (const auto& s : fit.sizes)
    sizes.push_back({{"L", s.sites}, {"count", s.t_eq.count},
                     {"mean_T_eq", s.t_eq.mean}, {"stderr_T_eq", s.t_eq.stderr_},
                     {"mean_f_max", s.f_max.mean}, {"stderr_f_max", s.f_max.stderr_}});
  j["sizes"] = sizes;
  p.stamp(j);
  return j;
}

struct FitFile {
  FlowFit fit;
  Variant variant = Variant::kBrf;
  int n = 0;
  int d = 0;
};

FitFile read_fit(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open fit file " + path.string());
  try {
    const auto j = json::parse(in);
    FitFile f;
    f.variant = parse_variant(j.at("variant").get<std::string>());
    f.n = j.at("n").get<int>();
    f.d = j.at("d").get<int>();
    f.fit.line.slope = j.at("slope").get<double>();
    f.fit.line.intercept = j.at("intercept").get<double>();
    f.fit.line.slope_stderr = j.value("slope_stderr", 0.0);
    f.fit.line.intercept_stderr = j.value("intercept_stderr", 0.0);
    f.fit.line.x_min = j.at("f_max_min").get<double>();
    f.fit.line.x_max = j.at("f_max_max").get<double>();
    f.fit.pair_count = j.value("pair_count", std::size_t{0});
    return f;
  } catch (const json::exception& e) {
    throw FormatError("malformed fit file " + path.string() + ": " + e.what());
  }
}

std::string fit_name(Variant v, int n, int d) {
  return "fit_" + std::string(to_string(v)) + "_n" + std::to_string(n) + "_d" +
         std::to_string(d) + ".json";
}

// Writes one fit per (variant, n, d) with at least three sizes.
void write_fits(const std::vector<SampleResult>& results, const fs::path& dir,
                const Provenance& prov, std::ostream& out) {
  std::map<std::tuple<Variant, int, int>, std::vector<FlowSample>> groups;
  for (const auto& r : results) {
    if (!r.ok || !r.t_eq || !r.f_max) continue;
    const auto& l = r.task.cell.locality;
    groups[{r.task.cell.variant, l.bodies, l.diameter}].push_back(
        {l.sites, l.bodies, l.diameter, *r.t_eq, *r.f_max});
  }
  for (const auto& [key, samples] : groups) {
    const auto [v, n, d] = key;
    std::map<int, int> sizes;
    for (const auto& s : samples) ++sizes[s.sites];
    if (sizes.size() < 3) continue;
    const auto fit = fit_teq_vs_fmax(samples);
    open_out(dir / fit_name(v, n, d)) << fit_json(fit, v, n, d, prov).dump(2) << '\n';
    out << "fit " << to_string(v) << " n=" << n << " d=" << d << ": T_eq = " << fit.slope()
        << " f_max + " << fit.intercept() << " (slope stderr " << fit.line.slope_stderr << ")\n";
  }
}

void write_scan_rows(const std::vector<SampleResult>& results, const fs::path& path,
                     const Provenance& prov) {
  auto f = open_out(path);
  CsvWriter w(f, {"variant", "L", "n", "d", "seed", "f_max", "T_eq", "extrapolated_T_eq"},
              prov.line());
  for (const auto& r : results) {
    if (!r.ok) continue;
    const auto& c = r.task.cell;
    w.row({std::string(to_string(c.variant)), std::to_string(c.locality.sites),
           std::to_string(c.locality.bodies), std::to_string(c.locality.diameter),
           std::to_string(r.task.seed), opt_num(r.f_max), opt_num(r.t_eq),
           opt_num(r.extrapolated)});
  }
}

// ---------------------------------------------------------------- flow-scan

struct FlowScanOptions {
  std::string protocol = "fit";
  std::string fit;
  bool no_dynamics = false;
  double trust = 1.0;
};

int cmd_flow_scan(const ModelOptions& o, const FlowScanOptions& fo, std::ostream& out,
                  std::ostream& err) {
  const auto cells = cells_of(o);
  const auto dir = prepare_out(o.out);
  auto config = base_config("flow-scan", o);
  config["protocol"] = fo.protocol;
  config["fit"] = fo.fit;
  config["no_dynamics"] = fo.no_dynamics ? "1" : "0";
  config["trust"] = format_double(fo.trust);
  const auto prov = provenance_of(config, o.seed);
  if (fo.no_dynamics && fo.fit.empty())
    throw UsageError("--no-dynamics needs --fit: nothing would be computed besides f_max");

  std::optional<FitFile> fit;
  if (!fo.fit.empty()) fit = read_fit(fo.fit);
  const Schedule sched = fo.protocol == "correlation" ? Schedule::kCorrelation
                         : fo.protocol == "extrapolation" ? Schedule::kExtrapolation
                                                         : Schedule::kFit;
  Models models(o);
  for (const auto& c : cells) models.prepare(c, err);
  const auto tasks = tasks_for(cells, o, sched);
  Evaluation ev;
  ev.dynamics = !fo.no_dynamics;
  ev.flow = true;
  ev.eq = eq_options(o);
  ev.fit = fit ? &fit->fit : nullptr;
  ev.trust_fraction = fo.trust;
  const auto results = evaluate(tasks, models, o, ev);

  write_scan_rows(results, dir / "flow_scan.csv", prov);
  {
    auto f = open_out(dir / "flow_samples.jsonl");
    for (const auto& r : results) f << sample_json(r, prov).dump() << '\n';
  }

  // Per-cell means.
  std::vector<FlowSample> pairs;
  {
    auto f = open_out(dir / "flow_groups.csv");
    CsvWriter w(f, {"variant", "L", "n", "d", "count", "mean_f_max", "stderr_f_max",
                    "mean_T_eq", "stderr_T_eq", "mean_extrapolated_T_eq",
                    "stderr_extrapolated_T_eq", "untrusted"},
                prov.line());
    std::size_t pos = 0;
    for (const auto& c : cells) {
      std::vector<double> fm, te, ex;
      std::size_t untrusted = 0;
      for (; pos < results.size() && results[pos].task.cell.variant == c.variant &&
             results[pos].task.cell.locality == c.locality;
           ++pos) {
        const auto& r = results[pos];
        if (!r.ok) continue;
        fm.push_back(*r.f_max);
        if (r.t_eq) {
          te.push_back(*r.t_eq);
          pairs.push_back({c.locality.sites, c.locality.bodies, c.locality.diameter, *r.t_eq,
                           *r.f_max});
        }
        if (r.extrapolated) ex.push_back(*r.extrapolated);
        if (!r.trusted) ++untrusted;
      }
      auto cellstat = [](const std::vector<double>& v) {
        if (v.empty()) return std::pair<std::string, std::string>{};
        const auto m = mean_stderr(v);
        return std::pair{format_double(m.mean), format_double(m.stderr_)};
      };
      const auto [fmean, fse] = cellstat(fm);
      const auto [tmean, tse] = cellstat(te);
      const auto [xmean, xse] = cellstat(ex);
      w.row({std::string(to_string(c.variant)), std::to_string(c.locality.sites),
             std::to_string(c.locality.bodies), std::to_string(c.locality.diameter),
             std::to_string(fm.size()), fmean, fse, tmean, tse, xmean, xse,
             std::to_string(untrusted)});
      out << to_string(c.variant) << ' ' << c.locality.to_string() << " f_max " << fmean;
      if (!tmean.empty()) out << " T_eq " << tmean;
      if (!xmean.empty()) out << " extrapolated T_eq " << xmean;
      out << '\n';
      if (untrusted)
        err << "warning: " << untrusted << " extrapolations for " << c.locality.to_string()
            << " lie outside the trusted f_max range\n";
    }
  }
  if (pairs.size() >= 10) {
    try {
      const auto rep = correlate(pairs);
      json j;
      j["pearson"] = rep.pearson.coefficient;
      j["p_value"] = rep.pearson.p_value;
      j["pairs"] = rep.pearson.count;
      json groups = json::array();
      for (const auto& g : rep.groups)
        groups.push_back({{"n", g.bodies}, {"d", g.diameter}, {"count", g.t_eq.count},
                          {"mean_T_eq", g.t_eq.mean}, {"stderr_T_eq", g.t_eq.stderr_},
                          {"mean_f_max", g.f_max.mean}, {"stderr_f_max", g.f_max.stderr_}});
      j["groups"] = groups;
      prov.stamp(j);
      open_out(dir / "correlation.json") << j.dump(2) << '\n';
      out << "pearson(T_eq, f_max) = " << rep.pearson.coefficient << " (p = "
          << rep.pearson.p_value << ", " << rep.pearson.count << " pairs)\n";
    } catch (const DomainError& e) {
      err << "correlation skipped: " << e.what() << '\n';
    }
  }
  write_fits(results, dir, prov, out);
  const auto fails = report_failures(results, err);
  log_run(dir, "flow-scan", prov, fails.exceeded() ? "failed" : "ok");
  return fails.exceeded() ? kExitDomain : kExitOk;
}

// --------------------------------------------------------------------- fit

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

int cmd_fit(const std::vector<std::string>& scans, const std::string& output,
            const ModelOptions& o, std::ostream& out) {
  if (scans.empty()) throw UsageError("fit needs --scan files");
  std::map<std::tuple<Variant, int, int>, std::vector<FlowSample>> groups;
  Metadata config;
  config["command"] = "fit";
  for (const auto& path : scans) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open scan " + path);
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (line[0] == '#') {
        config["source:" + path] = line.substr(1);
        continue;
      }
      auto cells = split_csv(line);
      if (header.empty()) {
        header = cells;
        continue;
      }
      if (cells.size() != header.size()) throw FormatError("ragged row in " + path);
      std::map<std::string, std::string> row;
      for (std::size_t i = 0; i < cells.size(); ++i) row[header[i]] = cells[i];
      if (row["T_eq"].empty() || row["f_max"].empty()) continue;
      const Variant v = parse_variant(row.at("variant"));
      const int n = std::stoi(row.at("n")), d = std::stoi(row.at("d"));
      groups[{v, n, d}].push_back(
          {std::stoi(row.at("L")), n, d, std::stod(row.at("T_eq")), std::stod(row.at("f_max"))});
    }
  }
  const auto prov = provenance_of(config, 0);
  int written = 0;
  for (const auto& [key, samples] : groups) {
    const auto [v, n, d] = key;
    const auto fit = fit_teq_vs_fmax(samples);
    const fs::path target = output.empty() || groups.size() > 1
                                ? prepare_out(o.out) / fit_name(v, n, d)
                                : fs::path(output);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    open_out(target) << fit_json(fit, v, n, d, prov).dump(2) << '\n';
    out << target.string() << ": slope " << fit.slope() << " +- " << fit.line.slope_stderr
        << ", intercept " << fit.intercept() << " +- " << fit.line.intercept_stderr << '\n';
    ++written;
  }
  if (!written) throw DomainError("no (T_eq, f_max) pairs in the scan files");
  return kExitOk;
}

// ------------------------------------------------------------- extrapolate

int cmd_extrapolate(const std::string& fit_path, const std::vector<double>& fmax,
                    ModelOptions o, double trust, std::ostream& out, std::ostream& err) {
  const auto f = read_fit(fit_path);
  if (!fmax.empty()) {
    for (double x : fmax) {
      const auto e = extrapolate_teq(f.fit, x, trust);
      out << format_double(x) << ' ' << format_double(e.t_eq)
          << (e.trusted ? "" : " untrusted") << '\n';
      if (!e.trusted) err << "warning: f_max " << x << " lies outside the trusted range\n";
    }
    return kExitOk;
  }
  o.variants = {std::string(to_string(f.variant))};
  o.bodies = std::to_string(f.n);
  o.diameters = std::to_string(f.d);
  FlowScanOptions fo;
  fo.protocol = "extrapolation";
  fo.fit = fit_path;
  fo.no_dynamics = true;
  fo.trust = trust;
  return cmd_flow_scan(o, fo, out, err);
}

// ---------------------------------------------------------------- validate

struct SuiteResult {
  std::string name;
  std::size_t checks = 0;
  std::size_t failures = 0;
};

double brute_min_cut(std::size_t n, const std::vector<CapacityEdge>& edges, std::size_t s,
                     std::size_t t) {
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t m = 0; m < (1u << n); ++m) {
    if (!(m >> s & 1u) || (m >> t & 1u)) continue;
    double cut = 0;
    for (const auto& e : edges)
      if ((m >> e.a & 1u) != (m >> e.b & 1u)) cut += e.capacity;
    best = std::min(best, cut);
  }
  return best;
}

std::vector<SuiteResult> run_validation(bool quick, std::uint64_t seed) {
  std::vector<SuiteResult> out;
  const int lmax = quick ? 6 : 8;

  SuiteResult deg{"degree_formula"};
  for (int L = 4; L <= lmax; ++L)
    for (int n = 1; n <= L; ++n)
      for (int d = std::max(n - 1, 1); d <= L - 1; ++d) {
        const auto obs = build_observable(L, ObservableMode::kRandomised, seed);
        const auto dg = degrees(exact_adjacency({L, n, d}, obs));
        const auto rho = static_cast<std::size_t>(degree_formula(L, n, d));
        ++deg.checks;
        if (!std::all_of(dg.begin(), dg.end(), [rho](std::size_t x) { return x == rho; }))
          ++deg.failures;
      }
  for (int L = 4; L <= 6; ++L) {
    // Numerically assembled Hamiltonians agree with the boolean pattern.
    const LocalitySpec loc{L, 2, 1};
    const auto obs = build_observable(L, ObservableMode::kRandomised, seed);
    const auto h = build_hamiltonian(loc, sample_couplings(loc, seed), obs);
    ++deg.checks;
    if (!(adjacency_of(h) == exact_adjacency(loc, obs))) ++deg.failures;
  }
  out.push_back(deg);

  SuiteResult band{"band_containment"};
  for (int L = 4; L <= lmax; ++L)
    for (int n = 1; n <= std::min(L, 4); ++n)
      for (int d = std::max(n - 1, 1); d <= L - 1; ++d) {
        const LocalitySpec loc{L, n, d};
        const auto obs = build_observable(L, ObservableMode::kRandomised, derive_seed(seed, L));
        const auto h = build_hamiltonian(loc, sample_couplings(loc, seed), obs);
        ++band.checks;
        if (band_violations(adjacency_of(h), ensemble_band(loc, obs)) != 0) ++band.failures;
      }
  out.push_back(band);

  SuiteResult brf{"banded_regular"};
  const LocalitySpec bl{6, 2, 1};
  const auto rho = static_cast<std::size_t>(degree_formula(bl));
  for (std::uint64_t s = 0; s < (quick ? 50u : 1000u); ++s) {
    const auto obs = build_observable(6, ObservableMode::kRandomised, derive_seed(seed, s));
    const auto b = ensemble_band(bl, obs);
    ++brf.checks;
    try {
      const auto g = build_banded_regular(64, rho, b, derive_seed(seed, s));
      const auto dg = degrees(g);
      if (band_violations(g, b) != 0 ||
          !std::all_of(dg.begin(), dg.end(), [rho](std::size_t x) { return x == rho; }))
        ++brf.failures;
    } catch (const InfeasibleError&) {
      ++brf.failures;
    }
  }
  out.push_back(brf);

  SuiteResult flow{"max_flow"};
  Rng rng(seed, Stream::kOracle, 11);
  for (int t = 0; t < (quick ? 50 : 200); ++t) {
    const std::size_t n = 2 + rng.below(11);
    std::vector<CapacityEdge> edges;
    for (std::uint32_t a = 0; a < n; ++a)
      for (std::uint32_t b = a + 1; b < n; ++b)
        if (rng.uniform() < 0.4) edges.push_back({a, b, 0.01 + rng.uniform()});
    const auto res = max_flow_detailed(CapacityGraph(n, edges, 0, n - 1));
    ++flow.checks;
    if (std::abs(res.value - brute_min_cut(n, edges, 0, n - 1)) > 1e-9 ||
        std::abs(res.value - res.cut_capacity) > 1e-9)
      ++flow.failures;
  }
  out.push_back(flow);

  SuiteResult prop{"propagator"};
  for (int t = 0; t < (quick ? 5 : 20); ++t) {
    const std::size_t n = 16 + rng.below(quick ? 48 : 240);
    std::vector<MatrixEntry> e;
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = j; k < n; ++k)
        if (j == k || rng.uniform() < 0.1)
          e.push_back({j, k, j == k ? Complex(rng.normal(0, 1), 0)
                                    : Complex(rng.normal(0, 1), rng.normal(0, 1))});
    const auto h = normalize(SparseHermitian::from_upper(n, e));
    const Eigen::MatrixXcd dense = h.to_dense();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense);
    const std::vector<double> times = {0.5, 5.0, 50.0};
    const auto states = propagate(h, basis_state(n, 0), times);
    for (std::size_t i = 0; i < times.size(); ++i) {
      Eigen::VectorXcd c = es.eigenvectors().row(0).adjoint();
      for (Eigen::Index k = 0; k < c.size(); ++k)
        c(k) *= std::exp(Complex(0, -es.eigenvalues()(k) * times[i]));
      const Eigen::VectorXcd ref = es.eigenvectors() * c;
      double err = 0;
      for (std::size_t k = 0; k < n; ++k) err = std::max(err, std::abs(states[i][k] - ref(k)));
      ++prop.checks;
      if (err > 1e-8) ++prop.failures;
    }
  }
  out.push_back(prop);
  return out;
}

int cmd_validate(bool quick, const std::vector<std::string>& matrices, std::uint64_t seed,
                 std::ostream& out) {
  std::vector<SuiteResult> suites;
  if (matrices.empty()) suites = run_validation(quick, seed);
  SuiteResult files{"matrix_files"};
  for (const auto& m : matrices) {
    ++files.checks;
    try {
      const auto h = read_matrix(fs::path(m));
      if (fs::exists(metadata_path(m))) check_against_metadata(h, read_metadata(metadata_path(m)));
      out << "ok   " << m << '\n';
    } catch (const DomainError& e) {
      ++files.failures;
      out << "FAIL " << m << ": " << e.what() << '\n';
    }
  }
  if (!matrices.empty()) suites.push_back(files);
  bool ok = true;
  for (const auto& s : suites) {
    out << (s.failures ? "FAIL " : "PASS ") << s.name << " " << (s.checks - s.failures) << "/"
        << s.checks << '\n';
    ok = ok && s.failures == 0;
  }
  return ok ? kExitOk : kExitDomain;
}

}  // namespace

unsigned thread_count() {
  if (const char* env = std::getenv("LOCEQ_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string part;
  auto to_int = [&](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      throw UsageError("not an integer list: '" + text + "'");
    }
    if (used != s.size()) throw UsageError("not an integer list: '" + text + "'");
    return v;
  };
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(to_int(part));
      continue;
    }
    const int lo = to_int(part.substr(0, dots)), hi = to_int(part.substr(dots + 2));
    if (hi < lo) throw UsageError("empty range '" + part + "'");
    for (int v = lo; v <= hi; ++v) out.push_back(v);
  }
  if (out.empty()) throw UsageError("empty list '" + text + "'");
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"loceq: locality, random graphs and equilibration times of spin chains"};
  app.name("loceq");
  app.set_config("--config", "", "INI/TOML file; [subcommand] sections set its options");
  app.set_version_flag("--version", std::string(code_version()));
  app.require_subcommand(1);

  ModelOptions gen, ana, evo, teq, flw, ext, fitm;
  SingleOptions single_a, single_e;
  double step = 0.1;
  FlowScanOptions fo;
  std::vector<std::string> scans;
  std::string fit_output, fit_path;
  std::vector<double> fmax;
  double trust = 1.0;
  bool quick = false;
  std::vector<std::string> check_files;
  std::uint64_t validate_seed = 1;

  auto* g = app.add_subcommand("generate", "Sample matrices and write them with sidecars");
  add_model_options(g, gen, false);
  std::optional<std::size_t> rho;
  g->add_option("--rho", rho, "Override the degree of the graph variants");
  auto* a = app.add_subcommand("analyze", "Degrees, bandwidths, edge list and mask of one sample");
  add_model_options(a, ana, false);
  a->add_option("--matrix", single_a.matrix, "Analyse a generated matrix file");
  a->add_option("--index", single_a.index, "Sample index within the cell")->capture_default_str();
  auto* e = app.add_subcommand("evolve", "Trajectory and equilibration time of one sample");
  add_model_options(e, evo, true);
  e->add_option("--matrix", single_e.matrix, "Evolve a generated matrix file");
  e->add_option("--index", single_e.index, "Sample index within the cell")->capture_default_str();
  e->add_option("--step", step, "Output grid step")->check(CLI::PositiveNumber)->capture_default_str();
  auto* t = app.add_subcommand("teq-scan", "Equilibration times over a grid (2^(18-L) samples)");
  add_model_options(t, teq, true);
  auto* f = app.add_subcommand("flow-scan", "Max-flow values, T_eq pairs, correlations and fits");
  add_model_options(f, flw, true);
  f->add_option("--protocol", fo.protocol,
                "Sample schedule: fit 2^(14-L), correlation 2^(L-n)+1, extrapolation max(4,2^(18-L))")
      ->check(CLI::IsMember({"fit", "correlation", "extrapolation"}))
      ->capture_default_str();
  f->add_option("--fit", fo.fit, "Fit file applied to every f_max");
  f->add_flag("--no-dynamics", fo.no_dynamics, "Compute f_max only (needs --fit)");
  f->add_option("--trust", fo.trust, "Trusted f_max range, in fit-range widths")->capture_default_str();
  auto* ft = app.add_subcommand("fit", "Linear fit of per-L mean T_eq against mean f_max");
  ft->add_option("--scan", scans, "flow_scan.csv files")->required()->check(CLI::ExistingFile);
  ft->add_option("--output", fit_output, "Output fit file");
  ft->add_option("--out", fitm.out, "Output directory")->capture_default_str();
  auto* x = app.add_subcommand("extrapolate", "Equilibration times from f_max through a fit");
  add_model_options(x, ext, false);
  x->add_option("--fit", fit_path, "Fit file")->required()->check(CLI::ExistingFile);
  x->add_option("--fmax", fmax, "Extrapolate these f_max values instead of sampling");
  x->add_option("--trust", trust, "Trusted f_max range, in fit-range widths")->capture_default_str();
  auto* v = app.add_subcommand("validate", "Invariant suites and matrix file checks");
  v->add_flag("--quick", quick, "Smaller sizes and fewer instances");
  v->add_option("--matrix", check_files, "Only check these matrix files");
  v->add_option("--seed", validate_seed, "Seed of the random instances")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (g->parsed()) return cmd_generate(gen, rho, out, err);
    if (a->parsed()) return cmd_analyze(ana, single_a, out, err);
    if (e->parsed()) return cmd_evolve(evo, single_e, step, out, err);
    if (t->parsed()) return cmd_teq_scan(teq, out, err);
    if (f->parsed()) return cmd_flow_scan(flw, fo, out, err);
    if (ft->parsed()) return cmd_fit(scans, fit_output, fitm, out);
    if (x->parsed()) return cmd_extrapolate(fit_path, fmax, ext, trust, out, err);
    if (v->parsed()) return cmd_validate(quick, check_files, validate_seed, out);
  } catch (const UsageError& ue) {
    err << "usage error: " << ue.what() << '\n';
    return kExitUsage;
  } catch (const DomainError& de) {
    err << "error: " << de.what() << '\n';
    return kExitDomain;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitDomain;
  }
  return kExitUsage;
}

}  // namespace loceq::cli
