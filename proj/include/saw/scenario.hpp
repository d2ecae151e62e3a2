#ifndef SAW_SCENARIO_HPP
#define SAW_SCENARIO_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "saw/gaussian_mixture.hpp"
#include "saw/knowledge.hpp"
#include "saw/particle_filter.hpp"
#include "saw/random.hpp"
#include "saw/situation.hpp"

namespace saw {

using Vector2 = Eigen::Vector2d;
using Vector4 = Eigen::Vector4d;

inline constexpr double kDegToRad = std::numbers::pi / 180.0;
inline constexpr double kRadToDeg = 180.0 / std::numbers::pi;

// Situation labels of the threat-surveillance world, in transition-table order.
inline const std::string kSafe = "safe";
inline const std::string kPotentialDanger = "potential danger";
inline const std::string kDanger = "danger";
inline constexpr std::size_t kSafeIndex = 0;
inline constexpr std::size_t kPotentialIndex = 1;
inline constexpr std::size_t kDangerIndex = 2;

inline SituationSpace threat_space() { return SituationSpace({kSafe, kPotentialDanger, kDanger}); }

/// Kinematic target state ordered [x, vx, y, vy].
struct TargetState {
  Vector4 v = Vector4::Zero();

  TargetState() = default;
  explicit TargetState(const Vector4& s) : v(s) {}
  TargetState(double x, double vx, double y, double vy) : v(x, vx, y, vy) {}

  [[nodiscard]] double x() const { return v[0]; }
  [[nodiscard]] double vx() const { return v[1]; }
  [[nodiscard]] double y() const { return v[2]; }
  [[nodiscard]] double vy() const { return v[3]; }
  [[nodiscard]] Vector2 position() const { return {v[0], v[2]}; }
  [[nodiscard]] Vector2 velocity() const { return {v[1], v[3]}; }
};

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a > std::numbers::pi) a -= two_pi;
  if (a <= -std::numbers::pi) a += two_pi;
  return a;
}

/// Near-constant-velocity model: x_{k+1} = F x_k + v_k, v_k ~ N(0, B diag(q, q) B^T).
class MotionModel {
 public:
  MotionModel() : MotionModel(1.0) {}

  /// `paper_literal_b` selects the gain matrix exactly as typeset in the source
  /// ([T,0],[0,T],[T^2/2,0],[0,T^2/2]); the default is the standard discretization.
  explicit MotionModel(double period, double intensity = 10.0, bool paper_literal_b = false)
      : period_(period), intensity_(intensity), paper_literal_b_(paper_literal_b) {
    if (!(period_ > 0.0)) throw std::invalid_argument("sampling period must be positive");
    if (!(intensity_ >= 0.0)) throw std::invalid_argument("process-noise intensity must be non-negative");
    const double t = period_;
    f_.setIdentity();
    f_(0, 1) = t;
    f_(2, 3) = t;
    gain_.setZero();
    if (paper_literal_b_) {
      gain_(0, 0) = t;
      gain_(1, 1) = t;
      gain_(2, 0) = t * t / 2.0;
      gain_(3, 1) = t * t / 2.0;
    } else {
      gain_(0, 0) = t * t / 2.0;
      gain_(1, 0) = t;
      gain_(2, 1) = t * t / 2.0;
      gain_(3, 1) = t;
    }
    q_ = gain_ * (intensity_ * Eigen::Matrix2d::Identity()) * gain_.transpose();
  }

  [[nodiscard]] double period() const noexcept { return period_; }
  [[nodiscard]] double intensity() const noexcept { return intensity_; }
  [[nodiscard]] bool paper_literal_b() const noexcept { return paper_literal_b_; }
  [[nodiscard]] const Eigen::Matrix4d& transition() const noexcept { return f_; }
  [[nodiscard]] const Eigen::Matrix<double, 4, 2>& gain() const noexcept { return gain_; }
  [[nodiscard]] const Eigen::Matrix4d& process_covariance() const noexcept { return q_; }

  /// F s, plus a N(0, Q) draw when a stream is supplied.
  [[nodiscard]] TargetState step(const TargetState& s, RandomStream* rng = nullptr) const {
    Vector4 next = f_ * s.v;
    if (rng != nullptr) next += noise(*rng);
    return TargetState(next);
  }

  /// StateMotion interface for the particle filter.
  [[nodiscard]] Vector propagate(const Vector& x, RandomStream& rng) const {
    if (x.size() != 4) throw std::invalid_argument("motion model expects a 4-D state");
    return f_ * Vector4(x) + noise(rng);
  }

 private:
  [[nodiscard]] Vector4 noise(RandomStream& rng) const {
    // Q = B (q I) B^T, so B sqrt(q) z with z ~ N(0, I_2) has covariance Q.
    const double sd = std::sqrt(intensity_);
    const Eigen::Vector2d z(sd * rng.normal(), sd * rng.normal());
    return gain_ * z;
  }

  double period_;
  double intensity_;
  bool paper_literal_b_;
  Eigen::Matrix4d f_;
  Eigen::Matrix<double, 4, 2> gain_;
  Eigen::Matrix4d q_;
};

/// Bearing/range measurement at step k. Bearing in radians from the +x axis.
struct Observation {
  std::uint64_t k = 0;
  double bearing = 0.0;
  double range = 0.0;
};

/// Result of a likelihood evaluation that may hit the undefined-bearing case.
struct LikelihoodValue {
  double log_value = -std::numeric_limits<double>::infinity();
  bool coincident = false;
  [[nodiscard]] double value() const { return std::exp(log_value); }
};

/// Bearing-range sensor with independent Gaussian noise on each channel.
class SensorModel {
 public:
  using observation_type = Observation;

  SensorModel() : SensorModel(Vector2::Zero(), 0.1 * kDegToRad, 50.0) {}

  SensorModel(Vector2 position, double bearing_std, double range_std)
      : position_(std::move(position)), bearing_std_(bearing_std), range_std_(range_std) {
    if (!(bearing_std_ > 0.0) || !(range_std_ > 0.0)) throw std::invalid_argument("sensor noise stds must be > 0");
    log_peak_ = -(std::log(2.0 * std::numbers::pi) + std::log(bearing_std_) + std::log(range_std_));
  }

  [[nodiscard]] const Vector2& position() const noexcept { return position_; }
  [[nodiscard]] double bearing_std() const noexcept { return bearing_std_; }
  [[nodiscard]] double range_std() const noexcept { return range_std_; }
  [[nodiscard]] double peak_density() const { return std::exp(log_peak_); }

  /// Noiseless when `rng` is null. Noisy ranges are redrawn until positive.
  [[nodiscard]] Observation observe(const TargetState& s, std::uint64_t k = 0, RandomStream* rng = nullptr) const {
    const double dx = s.x() - position_.x();
    const double dy = s.y() - position_.y();
    if (dx == 0.0 && dy == 0.0) throw std::domain_error("bearing undefined: target coincides with the sensor");
    double bearing = std::atan2(dy, dx);
    const double dist = std::hypot(dx, dy);
    double range = dist;
    if (rng != nullptr) {
      bearing += bearing_std_ * rng->normal();
      do {
        range = dist + range_std_ * rng->normal();
      } while (!(range > 0.0));
    }
    return {k, wrap_angle(bearing), range};
  }

  /// log p(y|s) with the wrapped bearing residual; flags the coincident case.
  [[nodiscard]] LikelihoodValue evaluate(const Observation& y, double px, double py) const {
    const double dx = px - position_.x();
    const double dy = py - position_.y();
    if (dx == 0.0 && dy == 0.0) return {-std::numeric_limits<double>::infinity(), true};
    const double eb = wrap_angle(y.bearing - std::atan2(dy, dx)) / bearing_std_;
    const double er = (y.range - std::hypot(dx, dy)) / range_std_;
    return {log_peak_ - 0.5 * (eb * eb + er * er), false};
  }

  [[nodiscard]] LikelihoodValue evaluate(const Observation& y, const TargetState& s) const {
    return evaluate(y, s.x(), s.y());
  }

  [[nodiscard]] double likelihood(const Observation& y, const TargetState& s) const { return evaluate(y, s).value(); }

  /// StateSensor interface: x is a full [x, vx, y, vy] state.
  [[nodiscard]] double log_likelihood(const Observation& y, const Vector& x) const {
    return evaluate(y, x[0], x[2]).log_value;
  }

 private:
  Vector2 position_;
  double bearing_std_;
  double range_std_;
  double log_peak_ = 0.0;
};

struct Region {
  Vector2 center = Vector2::Zero();
  double radius = 1.0;
};

/// Sensitive regions plus the potential-danger scale factor kappa.
class RegionSet {
 public:
  RegionSet() = default;
  RegionSet(std::vector<Region> regions, double kappa) : regions_(std::move(regions)), kappa_(kappa) {
    if (regions_.empty()) throw std::invalid_argument("at least one sensitive region is required");
    for (const auto& r : regions_)
      if (!(r.radius > 0.0)) throw std::invalid_argument("region radius must be > 0");
    if (!(kappa_ > 1.0)) throw std::invalid_argument("kappa must be > 1");
  }

  [[nodiscard]] const std::vector<Region>& regions() const noexcept { return regions_; }
  [[nodiscard]] std::size_t size() const noexcept { return regions_.size(); }
  [[nodiscard]] double kappa() const noexcept { return kappa_; }

 private:
  std::vector<Region> regions_;
  double kappa_ = std::sqrt(10.0);
};

struct Area {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;

  [[nodiscard]] bool contains(const Vector2& p) const {
    return p.x() >= x_min && p.x() <= x_max && p.y() >= y_min && p.y() <= y_max;
  }
};

/// Safe-situation mixture construction parameters.
struct SafeGrid {
  double spacing = 1500.0;
  double std = 1000.0;
};

/// Everything that defines the simulated world.
struct ScenarioConfig {
  Area area;
  RegionSet regions;
  SafeGrid safe_grid;
  std::vector<Vector2> waypoints;
  std::vector<std::size_t> segment_steps;  ///< steps spent travelling to waypoint i+1
  std::size_t steps = 0;                   ///< trajectory length, 1 + sum(segment_steps)
  double period = 1.0;
  bool process_noise_on = false;
  double process_noise_intensity = 10.0;
  bool paper_literal_b = false;
  Vector2 sensor_position = Vector2::Zero();
  double bearing_std_deg = 0.1;
  double range_std_m = 50.0;
  std::uint64_t seed = 1;

  [[nodiscard]] MotionModel motion() const { return MotionModel(period, process_noise_intensity, paper_literal_b); }
  [[nodiscard]] SensorModel sensor() const {
    return SensorModel(sensor_position, bearing_std_deg * kDegToRad, range_std_m);
  }
};

/// Piecewise constant-velocity trajectory through the waypoints. At the start of each
/// segment the velocity is re-aimed from the current position at the next waypoint;
/// with process noise off the path is exact.
inline std::vector<TargetState> generate_truth(const ScenarioConfig& cfg, RandomStream& rng) {
  if (cfg.waypoints.size() < 2) throw std::invalid_argument("at least two waypoints are required");
  if (cfg.segment_steps.size() != cfg.waypoints.size() - 1)
    throw std::invalid_argument("need one segment step count per waypoint leg");
  std::size_t total = 1;
  for (std::size_t n : cfg.segment_steps) {
    if (n == 0) throw std::invalid_argument("segment step counts must be positive");
    total += n;
  }
  if (total != cfg.steps)
    throw std::invalid_argument("steps (" + std::to_string(cfg.steps) + ") must equal 1 + sum of segment steps (" +
                                std::to_string(total) + ")");

  const MotionModel motion = cfg.motion();
  const double t = cfg.period;
  std::vector<TargetState> out;
  out.reserve(cfg.steps);
  const Vector2 v0 = (cfg.waypoints[1] - cfg.waypoints[0]) / (static_cast<double>(cfg.segment_steps[0]) * t);
  TargetState s(cfg.waypoints[0].x(), v0.x(), cfg.waypoints[0].y(), v0.y());
  out.push_back(s);
  for (std::size_t seg = 0; seg < cfg.segment_steps.size(); ++seg) {
    const std::size_t n = cfg.segment_steps[seg];
    const Vector2 v = (cfg.waypoints[seg + 1] - s.position()) / (static_cast<double>(n) * t);
    s.v[1] = v.x();
    s.v[3] = v.y();
    for (std::size_t i = 0; i < n; ++i) {
      s = motion.step(s, cfg.process_noise_on ? &rng : nullptr);
      out.push_back(s);
    }
  }
  return out;
}

/// Danger: one component per region at its center, diagonal std radius/2, weight 1/m.
/// Potential danger: same means, diagonals x10. Safe: equal-weight isotropic components
/// on a grid over the area, keeping points outside every potential-danger 2-sigma ellipse.
inline KnowledgeModel build_knowledge(const RegionSet& regions, const Area& area, const SafeGrid& grid = {}) {
  if (!(grid.spacing > 0.0) || !(grid.std > 0.0)) throw std::invalid_argument("safe grid spacing and std must be > 0");
  if (!(area.x_max > area.x_min) || !(area.y_max > area.y_min)) throw std::invalid_argument("area is empty");
  for (const auto& r : regions.regions())
    if (!area.contains(r.center)) throw std::invalid_argument("region center outside the surveillance area");

  const double w = 1.0 / static_cast<double>(regions.size());
  std::vector<GaussianComponent> danger;
  std::vector<GaussianComponent> potential;
  for (const auto& r : regions.regions()) {
    const double var = (r.radius / 2.0) * (r.radius / 2.0);
    danger.push_back({w, r.center, (var * Eigen::Vector2d::Ones()).asDiagonal().toDenseMatrix()});
    potential.push_back({w, r.center, (10.0 * var * Eigen::Vector2d::Ones()).asDiagonal().toDenseMatrix()});
  }

  std::vector<Vector2> points;
  const auto nx = static_cast<std::size_t>(std::floor((area.x_max - area.x_min) / grid.spacing + 1e-9));
  const auto ny = static_cast<std::size_t>(std::floor((area.y_max - area.y_min) / grid.spacing + 1e-9));
  for (std::size_t i = 0; i <= nx; ++i) {
    for (std::size_t j = 0; j <= ny; ++j) {
      const Vector2 p(area.x_min + static_cast<double>(i) * grid.spacing,
                      area.y_min + static_cast<double>(j) * grid.spacing);
      bool outside = true;
      for (const auto& c : potential) {
        // Mahalanobis distance under the diagonal potential-danger covariance.
        const Vector2 d = p - Vector2(c.mean);
        const double m2 = d.x() * d.x() / c.covariance(0, 0) + d.y() * d.y() / c.covariance(1, 1);
        if (m2 <= 4.0) {
          outside = false;
          break;
        }
      }
      if (outside) points.push_back(p);
    }
  }
  if (points.empty()) throw std::invalid_argument("no safe grid point survives outside the potential-danger regions");
  std::vector<GaussianComponent> safe;
  const double ws = 1.0 / static_cast<double>(points.size());
  const Matrix cov = (grid.std * grid.std) * Matrix::Identity(2, 2);
  for (const auto& p : points) safe.push_back({ws, p, cov});

  std::vector<GaussianMixture> mixtures;
  mixtures.emplace_back(std::move(safe));
  mixtures.emplace_back(std::move(potential));
  mixtures.emplace_back(std::move(danger));
  return KnowledgeModel(threat_space(), std::move(mixtures), {0, 2}, 4);
}

/// Ground-truth label index for a position: danger inside a region radius, potential
/// danger inside kappa * radius, otherwise safe.
inline std::size_t label_position(const RegionSet& regions, const Vector2& p) {
  std::size_t label = kSafeIndex;
  for (const auto& r : regions.regions()) {
    const double d = (p - r.center).norm();
    if (d <= r.radius) return kDangerIndex;
    if (d <= regions.kappa() * r.radius) label = kPotentialIndex;
  }
  return label;
}

inline std::vector<std::size_t> build_labels(const RegionSet& regions, const std::vector<TargetState>& truth) {
  std::vector<std::size_t> out;
  out.reserve(truth.size());
  for (const auto& s : truth) out.push_back(label_position(regions, s.position()));
  return out;
}

/// Particle initialization from the first bearing/range observation. Positions are
/// drawn around the polar-to-Cartesian image of y with the linearized measurement
/// covariance, standard deviations widened by `widen`; velocities are zero-mean
/// Gaussian with std `velocity_std` per axis.
struct MeasurementAnchoredInit {
  double velocity_std = 10.0;
  double widen = 2.0;
};

inline ParticleSet pf_init(const MeasurementAnchoredInit& spec, const SensorModel& sensor, const Observation& y,
                           std::size_t n, RandomStream& rng) {
  if (n == 0) throw std::invalid_argument("particle count must be >= 1");
  if (!(spec.velocity_std >= 0.0) || !(spec.widen > 0.0)) throw std::invalid_argument("invalid anchored init spec");
  const double c = std::cos(y.bearing);
  const double s = std::sin(y.bearing);
  const Vector2 mean = sensor.position() + y.range * Vector2(c, s);
  Eigen::Matrix2d jac;
  jac << c, -y.range * s, s, y.range * c;  // d(x, y) / d(range, bearing)
  const Eigen::Vector2d noise_var(sensor.range_std() * sensor.range_std(), sensor.bearing_std() * sensor.bearing_std());
  const Eigen::Matrix2d cov = spec.widen * spec.widen * jac * noise_var.asDiagonal() * jac.transpose();
  const Eigen::Matrix2d root = Eigen::LLT<Eigen::Matrix2d>(cov).matrixL();

  Matrix states(4, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d z(rng.normal(), rng.normal());
    const Vector2 p = mean + root * z;
    const auto col = static_cast<Eigen::Index>(i);
    states(0, col) = p.x();
    states(1, col) = spec.velocity_std * rng.normal();
    states(2, col) = p.y();
    states(3, col) = spec.velocity_std * rng.normal();
  }
  return ParticleSet(std::move(states));
}

}  // namespace saw

#endif  // SAW_SCENARIO_HPP
