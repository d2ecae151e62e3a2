#ifndef SAW_CONFIG_HPP
#define SAW_CONFIG_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "saw/errors.hpp"
#include "saw/hmm.hpp"
#include "saw/knowledge.hpp"
#include "saw/scenario.hpp"

namespace saw {

/// Inference-engine parameters read from the "model" section.
struct ModelConfig {
  std::vector<std::vector<double>> transition = {{0.9, 0.1, 0.0}, {0.05, 0.9, 0.05}, {0.0, 0.1, 0.9}};
  std::optional<std::vector<double>> initial;  ///< p(s_1|y_1); uniform when absent
  std::size_t n_mc = 10000;
  std::size_t n_particles = 5000;
  double ess_threshold = 0.5;
  double init_velocity_std = 10.0;
  double init_widen = 2.0;
  double max_degenerate_fraction = 0.05;
  std::size_t eval_margin = 2;
};

/// Whole config file: world, optional explicit knowledge model, engine parameters.
struct Config {
  ScenarioConfig scenario;
  ModelConfig model;
  std::optional<KnowledgeModel> knowledge;  ///< explicit mixtures; otherwise built from regions

  [[nodiscard]] KnowledgeModel knowledge_model() const {
    if (knowledge) return *knowledge;
    return build_knowledge(scenario.regions, scenario.area, scenario.safe_grid);
  }

  [[nodiscard]] TransitionMatrix transition_matrix() const { return TransitionMatrix(model.transition); }

  [[nodiscard]] SituationDistribution initial_distribution(std::size_t m) const {
    if (!model.initial) return SituationDistribution::uniform(m);
    return SituationDistribution(*model.initial);
  }
};

namespace detail {

using nlohmann::json;

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& pointer, const std::string& what) const {
    throw ConfigError(source_ + ": " + (pointer.empty() ? "/" : pointer) + ": " + what);
  }

  void only_keys(const json& obj, const std::string& ptr, std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) fail(ptr, "expected an object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : obj.items())
      if (!allowed.count(k)) fail(ptr + "/" + k, "unknown key");
  }

  const json& require(const json& obj, const std::string& ptr, const char* key) const {
    if (!obj.contains(key)) fail(ptr + "/" + key, "required key is missing");
    return obj.at(key);
  }

  double number(const json& v, const std::string& ptr) const {
    if (!v.is_number()) fail(ptr, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(ptr, "number must be finite");
    return d;
  }

  double positive(const json& v, const std::string& ptr) const {
    const double d = number(v, ptr);
    if (!(d > 0.0)) fail(ptr, "must be > 0");
    return d;
  }

  std::size_t count(const json& v, const std::string& ptr) const {
    if (!v.is_number_integer() || v.get<long long>() < 1) fail(ptr, "expected a positive integer");
    return v.get<std::size_t>();
  }

  bool boolean(const json& v, const std::string& ptr) const {
    if (!v.is_boolean()) fail(ptr, "expected true or false");
    return v.get<bool>();
  }

  std::vector<double> numbers(const json& v, const std::string& ptr) const {
    if (!v.is_array()) fail(ptr, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], ptr + "/" + std::to_string(i)));
    return out;
  }

  Vector2 point(const json& v, const std::string& ptr) const {
    auto xs = numbers(v, ptr);
    if (xs.size() != 2) fail(ptr, "expected [x, y]");
    return {xs[0], xs[1]};
  }

 private:
  std::string source_;
};

inline Area parse_area(const Reader& r, const json& j, const std::string& p) {
  r.only_keys(j, p, {"x_min", "x_max", "y_min", "y_max"});
  Area a{r.number(r.require(j, p, "x_min"), p + "/x_min"), r.number(r.require(j, p, "x_max"), p + "/x_max"),
         r.number(r.require(j, p, "y_min"), p + "/y_min"), r.number(r.require(j, p, "y_max"), p + "/y_max")};
  if (!(a.x_max > a.x_min) || !(a.y_max > a.y_min)) r.fail(p, "area must have x_max > x_min and y_max > y_min");
  return a;
}

inline GaussianMixture parse_mixture(const Reader& r, const json& j, const std::string& p) {
  if (!j.is_array() || j.empty()) r.fail(p, "expected a non-empty array of components");
  std::vector<GaussianComponent> comps;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string cp = p + "/" + std::to_string(i);
    const json& c = j[i];
    r.only_keys(c, cp, {"weight", "mean", "covariance", "diagonal"});
    GaussianComponent g;
    g.weight = r.positive(r.require(c, cp, "weight"), cp + "/weight");
    const auto mean = r.numbers(r.require(c, cp, "mean"), cp + "/mean");
    const auto d = static_cast<Eigen::Index>(mean.size());
    if (d == 0) r.fail(cp + "/mean", "mean must be non-empty");
    g.mean = Eigen::Map<const Vector>(mean.data(), d);
    if (c.contains("covariance") == c.contains("diagonal"))
      r.fail(cp, "give exactly one of 'covariance' (row-major d*d) or 'diagonal'");
    if (c.contains("diagonal")) {
      const auto diag = r.numbers(c.at("diagonal"), cp + "/diagonal");
      if (static_cast<Eigen::Index>(diag.size()) != d) r.fail(cp + "/diagonal", "length must equal mean length");
      g.covariance = Eigen::Map<const Vector>(diag.data(), d).asDiagonal();
    } else {
      const auto flat = r.numbers(c.at("covariance"), cp + "/covariance");
      if (static_cast<Eigen::Index>(flat.size()) != d * d) r.fail(cp + "/covariance", "expected d*d row-major entries");
      g.covariance = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          flat.data(), d, d);
    }
    comps.push_back(std::move(g));
  }
  try {
    return GaussianMixture(std::move(comps));
  } catch (const std::invalid_argument& e) {
    r.fail(p, e.what());
  }
}

inline KnowledgeModel parse_knowledge(const Reader& r, const json& j, const std::string& p) {
  r.only_keys(j, p, {"labels", "projection", "mixtures"});
  const json& lj = r.require(j, p, "labels");
  if (!lj.is_array()) r.fail(p + "/labels", "expected an array of strings");
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < lj.size(); ++i) {
    if (!lj[i].is_string()) r.fail(p + "/labels/" + std::to_string(i), "expected a string");
    labels.push_back(lj[i].get<std::string>());
  }
  std::vector<std::size_t> projection = {0, 2};
  if (j.contains("projection")) {
    projection.clear();
    const json& pj = j.at("projection");
    if (!pj.is_array()) r.fail(p + "/projection", "expected an array of state indices");
    for (std::size_t i = 0; i < pj.size(); ++i) {
      if (!pj[i].is_number_integer() || pj[i].get<long long>() < 0)
        r.fail(p + "/projection/" + std::to_string(i), "expected a non-negative integer");
      projection.push_back(pj[i].get<std::size_t>());
    }
  }
  const json& mj = r.require(j, p, "mixtures");
  if (!mj.is_object()) r.fail(p + "/mixtures", "expected an object keyed by label");
  try {
    SituationSpace space(labels);
    std::vector<GaussianMixture> mixtures;
    for (const auto& l : labels) {
      if (!mj.contains(l)) r.fail(p + "/mixtures/" + l, "no mixture for this label");
      mixtures.push_back(parse_mixture(r, mj.at(l), p + "/mixtures/" + l));
    }
    for (const auto& [k, v] : mj.items())
      if (!space.contains(k)) r.fail(p + "/mixtures/" + k, "label not listed in 'labels'");
    return KnowledgeModel(std::move(space), std::move(mixtures), std::move(projection), 4);
  } catch (const std::invalid_argument& e) {
    r.fail(p, e.what());
  } catch (const std::out_of_range& e) {
    r.fail(p, e.what());
  }
}

inline ModelConfig parse_model(const Reader& r, const json& j, const std::string& p) {
  r.only_keys(j, p,
              {"transition", "initial", "n_mc", "n_particles", "ess_threshold", "init_velocity_std", "init_widen",
               "max_degenerate_fraction", "eval_margin"});
  ModelConfig m;
  if (j.contains("transition")) {
    const json& t = j.at("transition");
    if (!t.is_array()) r.fail(p + "/transition", "expected an array of rows");
    m.transition.clear();
    for (std::size_t i = 0; i < t.size(); ++i) m.transition.push_back(r.numbers(t[i], p + "/transition/" + std::to_string(i)));
    try {
      TransitionMatrix check(m.transition);
    } catch (const std::invalid_argument& e) {
      r.fail(p + "/transition", e.what());
    }
  }
  if (j.contains("initial")) {
    m.initial = r.numbers(j.at("initial"), p + "/initial");
    try {
      SituationDistribution check(*m.initial);
    } catch (const std::invalid_argument& e) {
      r.fail(p + "/initial", e.what());
    }
  }
  if (j.contains("n_mc")) m.n_mc = r.count(j.at("n_mc"), p + "/n_mc");
  if (j.contains("n_particles")) m.n_particles = r.count(j.at("n_particles"), p + "/n_particles");
  if (j.contains("ess_threshold")) {
    m.ess_threshold = r.number(j.at("ess_threshold"), p + "/ess_threshold");
    if (!(m.ess_threshold >= 0.0 && m.ess_threshold <= 1.0)) r.fail(p + "/ess_threshold", "must lie in [0, 1]");
  }
  if (j.contains("init_velocity_std")) {
    m.init_velocity_std = r.number(j.at("init_velocity_std"), p + "/init_velocity_std");
    if (!(m.init_velocity_std >= 0.0)) r.fail(p + "/init_velocity_std", "must be >= 0");
  }
  if (j.contains("init_widen")) m.init_widen = r.positive(j.at("init_widen"), p + "/init_widen");
  if (j.contains("max_degenerate_fraction")) {
    m.max_degenerate_fraction = r.number(j.at("max_degenerate_fraction"), p + "/max_degenerate_fraction");
    if (!(m.max_degenerate_fraction >= 0.0 && m.max_degenerate_fraction <= 1.0))
      r.fail(p + "/max_degenerate_fraction", "must lie in [0, 1]");
  }
  if (j.contains("eval_margin")) {
    const json& v = j.at("eval_margin");
    if (!v.is_number_integer() || v.get<long long>() < 0) r.fail(p + "/eval_margin", "expected an integer >= 0");
    m.eval_margin = v.get<std::size_t>();
  }
  return m;
}

}  // namespace detail

/// Parses a config document. `source` names the input in diagnostics.
inline Config parse_config(const std::string& text, const std::string& source = "<config>") {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    // nlohmann reports "line L, column C" for syntax errors.
    throw ConfigError(source + ": " + e.what());
  }
  const detail::Reader r(source);
  r.only_keys(j, "",
              {"area", "regions", "kappa", "safe_grid", "waypoints", "segment_steps", "steps", "T", "process_noise_on",
               "process_noise_intensity", "paper_literal_B", "sensor", "seed", "model", "knowledge"});
  Config cfg;
  ScenarioConfig& s = cfg.scenario;
  s.area = detail::parse_area(r, r.require(j, "", "area"), "/area");

  double kappa = std::sqrt(10.0);
  if (j.contains("kappa")) {
    kappa = r.number(j.at("kappa"), "/kappa");
    if (!(kappa > 1.0)) r.fail("/kappa", "must be > 1");
  }
  const json& rj = r.require(j, "", "regions");
  if (!rj.is_array() || rj.empty()) r.fail("/regions", "expected a non-empty array");
  std::vector<Region> regions;
  for (std::size_t i = 0; i < rj.size(); ++i) {
    const std::string p = "/regions/" + std::to_string(i);
    r.only_keys(rj[i], p, {"center", "radius"});
    Region reg{r.point(r.require(rj[i], p, "center"), p + "/center"),
               r.positive(r.require(rj[i], p, "radius"), p + "/radius")};
    if (!s.area.contains(reg.center)) r.fail(p + "/center", "region center lies outside the area");
    regions.push_back(reg);
  }
  s.regions = RegionSet(std::move(regions), kappa);

  if (j.contains("safe_grid")) {
    const json& g = j.at("safe_grid");
    r.only_keys(g, "/safe_grid", {"spacing", "std"});
    if (g.contains("spacing")) s.safe_grid.spacing = r.positive(g.at("spacing"), "/safe_grid/spacing");
    if (g.contains("std")) s.safe_grid.std = r.positive(g.at("std"), "/safe_grid/std");
  }

  const json& wj = r.require(j, "", "waypoints");
  if (!wj.is_array() || wj.size() < 2) r.fail("/waypoints", "expected at least two [x, y] waypoints");
  for (std::size_t i = 0; i < wj.size(); ++i) s.waypoints.push_back(r.point(wj[i], "/waypoints/" + std::to_string(i)));
  const json& sj = r.require(j, "", "segment_steps");
  if (!sj.is_array() || sj.size() != s.waypoints.size() - 1)
    r.fail("/segment_steps", "expected one positive step count per waypoint leg (" +
                                 std::to_string(s.waypoints.size() - 1) + ")");
  std::size_t total = 1;
  for (std::size_t i = 0; i < sj.size(); ++i) {
    s.segment_steps.push_back(r.count(sj[i], "/segment_steps/" + std::to_string(i)));
    total += s.segment_steps.back();
  }
  s.steps = r.count(r.require(j, "", "steps"), "/steps");
  if (s.steps != total)
    r.fail("/steps", "must equal 1 + sum(segment_steps) = " + std::to_string(total));

  if (j.contains("T")) s.period = r.positive(j.at("T"), "/T");
  if (j.contains("process_noise_on")) s.process_noise_on = r.boolean(j.at("process_noise_on"), "/process_noise_on");
  if (j.contains("process_noise_intensity")) {
    s.process_noise_intensity = r.number(j.at("process_noise_intensity"), "/process_noise_intensity");
    if (!(s.process_noise_intensity >= 0.0)) r.fail("/process_noise_intensity", "must be >= 0");
  }
  if (j.contains("paper_literal_B")) s.paper_literal_b = r.boolean(j.at("paper_literal_B"), "/paper_literal_B");
  if (j.contains("sensor")) {
    const json& sen = j.at("sensor");
    r.only_keys(sen, "/sensor", {"position", "bearing_std_deg", "range_std_m"});
    if (sen.contains("position")) s.sensor_position = r.point(sen.at("position"), "/sensor/position");
    if (sen.contains("bearing_std_deg")) s.bearing_std_deg = r.positive(sen.at("bearing_std_deg"), "/sensor/bearing_std_deg");
    if (sen.contains("range_std_m")) s.range_std_m = r.positive(sen.at("range_std_m"), "/sensor/range_std_m");
  }
  if (j.contains("seed")) {
    const json& sd = j.at("seed");
    if (!sd.is_number_unsigned()) r.fail("/seed", "expected a non-negative integer");
    s.seed = sd.get<std::uint64_t>();
  }
  if (j.contains("model")) cfg.model = detail::parse_model(r, j.at("model"), "/model");
  if (j.contains("knowledge")) cfg.knowledge = detail::parse_knowledge(r, j.at("knowledge"), "/knowledge");

  const std::size_t m = cfg.knowledge ? cfg.knowledge->size() : 3;
  if (cfg.model.transition.size() != m) r.fail("/model/transition", "must be " + std::to_string(m) + "x" + std::to_string(m));
  if (cfg.model.initial && cfg.model.initial->size() != m)
    r.fail("/model/initial", "must have " + std::to_string(m) + " entries");
  if (!cfg.knowledge) {
    try {
      (void)build_knowledge(s.regions, s.area, s.safe_grid);
    } catch (const std::invalid_argument& e) {
      r.fail("/safe_grid", e.what());
    }
  }
  return cfg;
}

inline Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

}  // namespace saw

#endif  // SAW_CONFIG_HPP
