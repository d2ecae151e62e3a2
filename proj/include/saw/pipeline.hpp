#ifndef SAW_PIPELINE_HPP
#define SAW_PIPELINE_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "saw/config.hpp"
#include "saw/csv.hpp"
#include "saw/errors.hpp"
#include "saw/essm.hpp"
#include "saw/hmm.hpp"
#include "saw/metrics.hpp"
#include "saw/scenario.hpp"

namespace saw {

namespace fs = std::filesystem;
using nlohmann::json;

inline const std::vector<std::string> kStateHeader = {"k", "x", "vx", "y", "vy"};
inline const std::vector<std::string> kMeasurementHeader = {"k", "bearing_deg", "range_m"};
inline const std::vector<std::string> kLabelHeader = {"k", "label"};
inline const std::vector<std::string> kEssmDiagnosticsHeader = {"k", "ess", "resampled", "flags"};
inline const std::vector<std::string> kHmmDiagnosticsHeader = {"k", "flags"};

// Diagnostic flag bits.
inline constexpr int kFlagSituationUnderflow = 1;  ///< situation posterior fell back to uniform / zero evidence
inline constexpr int kFlagDivergence = 2;          ///< particle weights reset to uniform

inline void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << j.dump(2) << '\n';
}

inline std::vector<std::string> posterior_header(const SituationSpace& space) {
  std::vector<std::string> h = {"k"};
  for (const auto& l : space.labels()) h.push_back(l);
  return h;
}

// ---------------------------------------------------------------------------
// simulate

struct Simulation {
  std::uint64_t seed = 0;
  bool noise = true;
  std::vector<TargetState> truth;
  std::vector<Observation> observations;
  std::vector<std::size_t> labels;
};

/// Truth, measurements and labels. Streams: truth <- (seed, "truth"), sensor <- (seed, "sensor").
inline Simulation simulate_scenario(const ScenarioConfig& cfg, std::uint64_t seed, bool noise = true) {
  Simulation sim;
  sim.seed = seed;
  sim.noise = noise;
  ScenarioConfig c = cfg;
  if (!noise) c.process_noise_on = false;
  RandomStream truth_rng(derive_seed(seed, "truth"));
  sim.truth = generate_truth(c, truth_rng);
  RandomStream sensor_rng(derive_seed(seed, "sensor"));
  const SensorModel sensor = c.sensor();
  for (std::size_t i = 0; i < sim.truth.size(); ++i)
    sim.observations.push_back(sensor.observe(sim.truth[i], i + 1, noise ? &sensor_rng : nullptr));
  sim.labels = build_labels(c.regions, sim.truth);
  return sim;
}

inline void write_simulation(const Simulation& sim, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError(dir.string() + ": cannot create output directory: " + ec.message());
  const SituationSpace space = threat_space();
  {
    CsvWriter w(dir / "truth.csv", kStateHeader);
    for (std::size_t i = 0; i < sim.truth.size(); ++i) {
      const auto& s = sim.truth[i];
      w.write_row(i + 1, {s.x(), s.vx(), s.y(), s.vy()});
    }
  }
  {
    CsvWriter w(dir / "measurements.csv", kMeasurementHeader);
    for (const auto& y : sim.observations) w.write_row(y.k, {y.bearing * kRadToDeg, y.range});
  }
  {
    CsvWriter w(dir / "labels.csv", kLabelHeader);
    for (std::size_t i = 0; i < sim.labels.size(); ++i)
      w.write_cells({std::to_string(i + 1), space.label(sim.labels[i])});
  }
  write_json(dir / "simulation.json", json{{"seed", sim.seed},
                                           {"noise", sim.noise},
                                           {"steps", sim.truth.size()},
                                           {"streams",
                                            {{"truth", derive_seed(sim.seed, "truth")},
                                             {"sensor", derive_seed(sim.seed, "sensor")}}}});
}

inline Simulation cmd_simulate(const Config& cfg, const fs::path& out, std::optional<std::uint64_t> seed,
                               bool no_noise) {
  Simulation sim = simulate_scenario(cfg.scenario, seed.value_or(cfg.scenario.seed), !no_noise);
  write_simulation(sim, out);
  return sim;
}

// ---------------------------------------------------------------------------
// data ingestion

inline std::vector<Observation> read_measurements(const fs::path& path) {
  const NumericTable t = read_numeric_csv(path, kMeasurementHeader);
  if (t.k.empty()) throw DataError(path.string() + ": no measurement rows");
  std::vector<Observation> out;
  for (std::size_t i = 0; i < t.k.size(); ++i) {
    const double range = t.values[i][1];
    if (!(range > 0.0)) throw DataError(path.string() + ":" + std::to_string(i + 2) + ": range must be > 0");
    out.push_back({t.k[i], wrap_angle(t.values[i][0] * kDegToRad), range});
  }
  return out;
}

inline std::vector<TargetState> read_states(const fs::path& path) {
  const NumericTable t = read_numeric_csv(path, kStateHeader);
  std::vector<TargetState> out;
  for (const auto& r : t.values) out.emplace_back(r[0], r[1], r[2], r[3]);
  return out;
}

/// Label names from a `k,label` file.
inline std::vector<std::string> read_label_names(const fs::path& path) {
  const CsvTable t = read_csv(path);
  if (t.header != kLabelHeader) throw DataError(path.string() + ": header must be 'k,label'");
  std::vector<std::string> out;
  for (const auto& r : t.rows) out.push_back(r[1]);
  return out;
}

// ---------------------------------------------------------------------------
// run

enum class Engine { hmm, essm, both };

inline Engine parse_engine(const std::string& s) {
  if (s == "hmm") return Engine::hmm;
  if (s == "essm") return Engine::essm;
  if (s == "both") return Engine::both;
  throw ConfigError("engine must be one of hmm, essm, both (got '" + s + "')");
}

inline bool runs_hmm(Engine e) { return e != Engine::essm; }
inline bool runs_essm(Engine e) { return e != Engine::hmm; }

struct EngineRun {
  std::vector<std::vector<double>> posterior;
  std::vector<int> flags;
  std::size_t degenerate_steps = 0;
};

struct EssmRun : EngineRun {
  std::vector<TargetState> estimate;
  std::vector<PfDiagnostics> diagnostics;
};

inline EngineRun run_hmm(const Config& cfg, const std::vector<Observation>& ys, std::uint64_t seed) {
  const KnowledgeModel km = cfg.knowledge_model();
  HmmFilter<SensorModel> filter(km, cfg.transition_matrix(), cfg.scenario.sensor(), cfg.model.n_mc, seed,
                                cfg.initial_distribution(km.size()));
  EngineRun out;
  for (const auto& y : ys) {
    const auto& post = filter.step(y);
    out.posterior.emplace_back(post.probs().begin(), post.probs().end());
    out.flags.push_back(filter.last_step_degenerate() ? kFlagSituationUnderflow : 0);
  }
  out.degenerate_steps = filter.degenerate_steps();
  return out;
}

inline EssmRun run_essm(const Config& cfg, const std::vector<Observation>& ys, std::uint64_t seed) {
  const SensorModel sensor = cfg.scenario.sensor();
  const MeasurementAnchoredInit init{cfg.model.init_velocity_std, cfg.model.init_widen};
  const std::size_t n = cfg.model.n_particles;
  EssmFilter<MotionModel, SensorModel> filter(
      cfg.knowledge_model(), cfg.scenario.motion(), sensor,
      [=](const Observation& y, RandomStream& rng) { return pf_init(init, sensor, y, n, rng); },
      cfg.model.ess_threshold, seed);
  EssmRun out;
  for (const auto& y : ys) {
    EssmStep st = filter.step(y);
    const auto probs = st.situation.dist.probs();
    out.posterior.emplace_back(probs.begin(), probs.end());
    out.estimate.emplace_back(Vector4(st.estimate));
    int flags = 0;
    if (st.situation.degenerate) flags |= kFlagSituationUnderflow;
    if (st.diagnostics.diverged) flags |= kFlagDivergence;
    if (flags) ++out.degenerate_steps;
    out.flags.push_back(flags);
    out.diagnostics.push_back(st.diagnostics);
  }
  return out;
}

inline void write_posterior(const fs::path& path, const SituationSpace& space, const std::vector<Observation>& ys,
                            const std::vector<std::vector<double>>& rows) {
  CsvWriter w(path, posterior_header(space));
  for (std::size_t i = 0; i < rows.size(); ++i) w.write_row(ys[i].k, rows[i]);
}

// ---------------------------------------------------------------------------
// eval

/// Metrics for every posterior table found in `run_dir`. Pure function of the files.
inline json evaluate_run_dir(const fs::path& run_dir, const fs::path& labels_path,
                             const std::optional<fs::path>& truth_path, std::size_t margin) {
  const auto names = read_label_names(labels_path);
  json out = json::object();
  bool any = false;
  for (const std::string engine : {"hmm", "essm"}) {
    const fs::path post_path = run_dir / (engine + "_posterior.csv");
    if (!fs::exists(post_path)) continue;
    any = true;
    const NumericTable post = read_numeric_csv(post_path);
    if (post.k.size() != names.size())
      throw DataError(post_path.string() + ": " + std::to_string(post.k.size()) + " rows but labels have " +
                      std::to_string(names.size()));
    const std::vector<std::string> cols(post.header.begin() + 1, post.header.end());
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto it = std::find(cols.begin(), cols.end(), names[i]);
      if (it == cols.end()) throw DataError(labels_path.string() + ": label '" + names[i] + "' not in posterior columns");
      labels.push_back(static_cast<std::size_t>(it - cols.begin()));
    }
    const auto dit = std::find(cols.begin(), cols.end(), kDanger);
    const std::size_t danger = dit == cols.end() ? cols.size() - 1 : static_cast<std::size_t>(dit - cols.begin());
    const PosteriorMetrics m = evaluate_posterior(post.values, labels, danger, margin);

    json passes = json::array();
    for (const auto& p : m.passes) {
      json pj{{"first_k", post.k[p.first]}, {"last_k", post.k[p.last]}, {"max_danger", p.max_danger}};
      pj["detection_lag"] = p.detection_lag ? json(*p.detection_lag) : json(nullptr);
      passes.push_back(pj);
    }
    json ej{{"accuracy", m.accuracy},
            {"evaluated_steps", m.evaluated_steps},
            {"degenerate", m.degenerate},
            {"danger_passes", passes}};

    const fs::path est_path = run_dir / (engine + "_estimate.csv");
    if (fs::exists(est_path) && truth_path && fs::exists(*truth_path)) {
      const auto est = read_states(est_path);
      const auto truth = read_states(*truth_path);
      if (est.size() != truth.size()) throw DataError(est_path.string() + ": row count differs from truth");
      std::vector<Vector2> a;
      std::vector<Vector2> b;
      for (std::size_t i = 0; i < est.size(); ++i) {
        a.push_back(est[i].position());
        b.push_back(truth[i].position());
      }
      ej["position_rmse"] = position_rmse(a, b);
    }
    out[engine] = ej;
  }
  if (!any) throw DataError(run_dir.string() + ": no posterior tables found");
  return out;
}

/// `eval`: metrics for a run directory, or for each replicate subdirectory of it.
/// Writes `metrics.json` into `run_dir` and returns the same document.
inline json cmd_eval(const fs::path& run_dir, const fs::path& labels_path, std::optional<fs::path> truth_path,
                     std::size_t margin) {
  if (!truth_path) truth_path = labels_path.parent_path() / "truth.csv";
  if (!fs::exists(labels_path)) throw DataError(labels_path.string() + ": labels file not found");
  if (!fs::is_directory(run_dir)) throw DataError(run_dir.string() + ": run directory not found");
  json out;
  if (fs::exists(run_dir / "hmm_posterior.csv") || fs::exists(run_dir / "essm_posterior.csv")) {
    out = evaluate_run_dir(run_dir, labels_path, truth_path, margin);
  } else {
    std::vector<fs::path> subdirs;
    for (const auto& e : fs::directory_iterator(run_dir))
      if (e.is_directory() && e.path().filename().string().rfind("replicate_", 0) == 0) subdirs.push_back(e.path());
    if (subdirs.empty()) throw DataError(run_dir.string() + ": no posterior tables found");
    std::sort(subdirs.begin(), subdirs.end());
    for (const auto& d : subdirs) out[d.filename().string()] = evaluate_run_dir(d, labels_path, truth_path, margin);
  }
  write_json(run_dir / "metrics.json", out);
  return out;
}

// ---------------------------------------------------------------------------
// run orchestration

struct RunOptions {
  Engine engine = Engine::both;
  std::size_t replicates = 1;
  std::optional<std::uint64_t> seed;  ///< overrides the config seed
};

/// Runs the selected engines over `data_dir/measurements.csv`; writes tables and
/// `summary.json` under `out_dir` (one `replicate_NNN` subdirectory per replicate
/// when replicates > 1). Throws DegeneracyError after writing everything when an
/// engine flags more steps than `max_degenerate_fraction` allows.
inline json cmd_run(const Config& cfg, const fs::path& data_dir, const fs::path& out_dir, const RunOptions& opt) {
  if (opt.replicates == 0) throw ConfigError("replicate count must be >= 1");
  const auto ys = read_measurements(data_dir / "measurements.csv");
  for (std::size_t i = 1; i < ys.size(); ++i)
    if (ys[i].k <= ys[i - 1].k) throw DataError("measurements.csv: step indices must increase");
  const fs::path labels_path = data_dir / "labels.csv";
  const fs::path truth_path = data_dir / "truth.csv";
  const bool have_labels = fs::exists(labels_path);
  const SituationSpace space = cfg.knowledge_model().space();
  const std::uint64_t master = opt.seed.value_or(cfg.scenario.seed);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError(out_dir.string() + ": cannot create output directory: " + ec.message());

  json summary{{"master_seed", master},
               {"replicates", opt.replicates},
               {"steps", ys.size()},
               {"labels", space.labels()},
               {"engines", json::array()}};
  if (runs_hmm(opt.engine)) summary["engines"].push_back("hmm");
  if (runs_essm(opt.engine)) summary["engines"].push_back("essm");
  json reps = json::array();
  std::vector<std::string> degeneracy;

  for (std::size_t r = 0; r < opt.replicates; ++r) {
    const std::uint64_t rseed = derive_seed(master, "replicate", {r});
    char name[32];
    std::snprintf(name, sizeof name, "replicate_%03zu", r);
    const fs::path dir = opt.replicates == 1 ? out_dir : out_dir / name;
    fs::create_directories(dir, ec);
    json rj{{"replicate", r}, {"seed", rseed}, {"directory", fs::relative(dir, out_dir).generic_string()}};
    json seeds = json::object();

    if (runs_hmm(opt.engine)) {
      const std::uint64_t s = derive_seed(rseed, "hmm");
      seeds["hmm"] = s;
      const EngineRun run = run_hmm(cfg, ys, s);
      write_posterior(dir / "hmm_posterior.csv", space, ys, run.posterior);
      CsvWriter w(dir / "hmm_diagnostics.csv", kHmmDiagnosticsHeader);
      for (std::size_t i = 0; i < ys.size(); ++i) w.write_cells({std::to_string(ys[i].k), std::to_string(run.flags[i])});
      rj["hmm_degenerate_steps"] = run.degenerate_steps;
      if (static_cast<double>(run.degenerate_steps) > cfg.model.max_degenerate_fraction * static_cast<double>(ys.size()))
        degeneracy.push_back("replicate " + std::to_string(r) + ": hmm flagged " + std::to_string(run.degenerate_steps) +
                             " degenerate steps");
    }
    if (runs_essm(opt.engine)) {
      const std::uint64_t s = derive_seed(rseed, "essm");
      seeds["essm"] = s;
      const EssmRun run = run_essm(cfg, ys, s);
      write_posterior(dir / "essm_posterior.csv", space, ys, run.posterior);
      {
        CsvWriter w(dir / "essm_estimate.csv", kStateHeader);
        for (std::size_t i = 0; i < ys.size(); ++i) {
          const auto& e = run.estimate[i];
          w.write_row(ys[i].k, {e.x(), e.vx(), e.y(), e.vy()});
        }
      }
      {
        CsvWriter w(dir / "essm_diagnostics.csv", kEssmDiagnosticsHeader);
        for (std::size_t i = 0; i < ys.size(); ++i)
          w.write_cells({std::to_string(ys[i].k), format_double(run.diagnostics[i].ess),
                         run.diagnostics[i].resampled ? "1" : "0", std::to_string(run.flags[i])});
      }
      rj["essm_degenerate_steps"] = run.degenerate_steps;
      if (static_cast<double>(run.degenerate_steps) > cfg.model.max_degenerate_fraction * static_cast<double>(ys.size()))
        degeneracy.push_back("replicate " + std::to_string(r) + ": essm flagged " +
                             std::to_string(run.degenerate_steps) + " degenerate steps");
    }
    rj["streams"] = seeds;
    if (have_labels) {
      rj["metrics"] = evaluate_run_dir(dir, labels_path, truth_path, cfg.model.eval_margin);
    }
    reps.push_back(rj);
  }
  summary["runs"] = reps;

  if (have_labels) {
    // Mean and (population) standard deviation of the scalar metrics across replicates.
    json agg = json::object();
    for (const auto& engine : summary["engines"]) {
      const std::string e = engine.get<std::string>();
      for (const std::string key : {"accuracy", "position_rmse"}) {
        std::vector<double> xs;
        for (const auto& rj : reps)
          if (rj["metrics"].contains(e) && rj["metrics"][e].contains(key)) xs.push_back(rj["metrics"][e][key].get<double>());
        if (xs.empty()) continue;
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        var /= static_cast<double>(xs.size());
        agg[e][key] = {{"mean", mean}, {"std", std::sqrt(var)}};
      }
    }
    summary["aggregate"] = agg;
  }
  summary["degeneracy"] = degeneracy;
  write_json(out_dir / "summary.json", summary);

  if (!degeneracy.empty()) {
    std::string msg = "engine degeneracy beyond tolerance";
    for (const auto& d : degeneracy) msg += "; " + d;
    throw DegeneracyError(msg);
  }
  return summary;
}

}  // namespace saw

#endif  // SAW_PIPELINE_HPP
