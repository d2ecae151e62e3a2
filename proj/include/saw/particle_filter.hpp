#ifndef SAW_PARTICLE_FILTER_HPP
#define SAW_PARTICLE_FILTER_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <numeric>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "saw/concepts.hpp"
#include "saw/gaussian_mixture.hpp"
#include "saw/random.hpp"

namespace saw {

/// Weighted sample set approximating p(x_k|y_{1:k}). States are stored column-wise.
class ParticleSet {
 public:
  static constexpr double kWeightTolerance = 1e-9;

  ParticleSet() = default;

  /// Uniform weights 1/N.
  explicit ParticleSet(Matrix states) : states_(std::move(states)) {
    if (states_.cols() == 0 || states_.rows() == 0) throw std::invalid_argument("particle set must be non-empty");
    weights_.assign(static_cast<std::size_t>(states_.cols()), 1.0 / static_cast<double>(states_.cols()));
  }

  ParticleSet(Matrix states, std::vector<double> weights) : states_(std::move(states)), weights_(std::move(weights)) {
    if (states_.cols() == 0 || states_.rows() == 0) throw std::invalid_argument("particle set must be non-empty");
    if (weights_.size() != static_cast<std::size_t>(states_.cols()))
      throw std::invalid_argument("one weight per particle required");
    double sum = 0.0;
    for (double w : weights_) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("particle weights must be non-negative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > kWeightTolerance) throw std::invalid_argument("particle weights must sum to 1");
  }

  [[nodiscard]] std::size_t size() const noexcept { return weights_.size(); }
  [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(states_.rows()); }
  [[nodiscard]] const Matrix& states() const noexcept { return states_; }
  [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }
  [[nodiscard]] auto state(std::size_t i) const { return states_.col(static_cast<Eigen::Index>(i)); }
  [[nodiscard]] std::span<const double> state_span(std::size_t i) const {
    return {states_.data() + i * dim(), dim()};
  }
  [[nodiscard]] double weight(std::size_t i) const { return weights_[i]; }

 private:
  Matrix states_;
  std::vector<double> weights_;
};

/// 1 / sum w_i^2 for normalized weights.
inline double effective_sample_size(std::span<const double> weights) {
  double sq = 0.0;
  for (double w : weights) sq += w * w;
  return 1.0 / sq;
}

struct NormalizedWeights {
  std::vector<double> weights;
  bool diverged = false;
};

/// Max-shifted normalization of log-weights. If every unnormalized weight is below
/// `floor` (default 1e-300) the weights reset to uniform and `diverged` is set.
inline NormalizedWeights normalize_log_weights(std::span<const double> log_weights, double floor = 1e-300) {
  const std::size_t n = log_weights.size();
  if (n == 0) throw std::invalid_argument("no weights to normalize");
  double top = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights) {
    if (std::isnan(lw)) throw std::invalid_argument("log-weight is NaN");
    top = std::max(top, lw);
  }
  NormalizedWeights out;
  if (!std::isfinite(top) || top < std::log(floor)) {
    out.weights.assign(n, 1.0 / static_cast<double>(n));
    out.diverged = true;
    return out;
  }
  out.weights.resize(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.weights[i] = std::exp(log_weights[i] - top);
    sum += out.weights[i];
  }
  for (double& w : out.weights) w /= sum;
  return out;
}

/// Systematic resampling indices: positions (u0 + j) / N against the weight CDF.
/// `u0` must lie in [0, 1).
inline std::vector<std::size_t> systematic_indices(std::span<const double> weights, double u0) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> idx(n);
  const double step = 1.0 / static_cast<double>(n);
  double cdf = weights[0];
  std::size_t i = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double pos = (u0 + static_cast<double>(j)) * step;
    while (pos >= cdf && i + 1 < n) cdf += weights[++i];
    idx[j] = i;
  }
  return idx;
}

/// N draws with expected count N*w_i each; output weights are exactly 1/N.
inline ParticleSet systematic_resample(const ParticleSet& p, RandomStream& rng) {
  const auto idx = systematic_indices(p.weights(), rng.uniform());
  Matrix out(p.states().rows(), p.states().cols());
  for (std::size_t j = 0; j < idx.size(); ++j)
    out.col(static_cast<Eigen::Index>(j)) = p.states().col(static_cast<Eigen::Index>(idx[j]));
  return ParticleSet(std::move(out));
}

/// Weighted posterior mean.
inline Vector state_estimate(const ParticleSet& p) { return p.states() * Eigen::Map<const Vector>(p.weights().data(), static_cast<Eigen::Index>(p.size())); }

/// Weighted posterior covariance about the weighted mean.
inline Matrix state_covariance(const ParticleSet& p) {
  const Vector mean = state_estimate(p);
  Matrix cov = Matrix::Zero(p.states().rows(), p.states().rows());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Vector d = p.state(i) - mean;
    cov.noalias() += p.weight(i) * d * d.transpose();
  }
  return cov;
}

/// Monte-Carlo standard error of the weighted mean of one state component, by the
/// fixed-lag lineage estimator: particles sharing an ancestor `lag` steps back form
/// one group, se^2 = sum_groups (sum_{i in group} w_i (x_i - mean))^2. With every
/// particle its own group this is sum_i w_i^2 (x_i - mean)^2.
inline double mean_standard_error(const ParticleSet& p, std::size_t component, std::span<const std::size_t> lineage) {
  if (lineage.size() != p.size()) throw std::invalid_argument("one lineage id per particle required");
  if (component >= p.dim()) throw std::invalid_argument("state component out of range");
  const auto row = static_cast<Eigen::Index>(component);
  double mean = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) mean += p.weight(i) * p.states()(row, static_cast<Eigen::Index>(i));
  std::vector<double> group(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (lineage[i] >= p.size()) throw std::invalid_argument("lineage id out of range");
    group[lineage[i]] += p.weight(i) * (p.states()(row, static_cast<Eigen::Index>(i)) - mean);
  }
  double var = 0.0;
  for (double g : group) var += g * g;
  return std::sqrt(var);
}

// Initial distributions for pf_init.
struct PointMassInit {
  Vector state;
};

struct GaussianInit {
  Vector mean;
  Matrix covariance;
};

inline ParticleSet pf_init(const PointMassInit& spec, std::size_t n, RandomStream& /*rng*/) {
  if (n == 0) throw std::invalid_argument("particle count must be >= 1");
  if (spec.state.size() == 0) throw std::invalid_argument("point-mass init needs a state");
  return ParticleSet(spec.state.replicate(1, static_cast<Eigen::Index>(n)));
}

inline ParticleSet pf_init(const GaussianInit& spec, std::size_t n, RandomStream& rng) {
  if (n == 0) throw std::invalid_argument("particle count must be >= 1");
  if (spec.mean.size() == 0 || spec.covariance.rows() != spec.mean.size() || spec.covariance.cols() != spec.mean.size())
    throw std::invalid_argument("gaussian init has inconsistent dimensions");
  Eigen::LDLT<Matrix> ldlt(spec.covariance);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw std::invalid_argument("gaussian init covariance must be positive semi-definite");
  // Symmetric square root through the eigendecomposition tolerates PSD covariances.
  Eigen::SelfAdjointEigenSolver<Matrix> es(spec.covariance);
  const Matrix root = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const auto d = spec.mean.size();
  Matrix states(d, static_cast<Eigen::Index>(n));
  Vector z(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) z[j] = rng.normal();
    states.col(static_cast<Eigen::Index>(i)) = spec.mean + root * z;
  }
  return ParticleSet(std::move(states));
}

/// Per-step filter diagnostics.
struct PfDiagnostics {
  std::uint64_t step = 0;
  double ess = 0.0;        ///< ESS of the updated weights, before any resampling
  bool resampled = false;  ///< ESS fell below threshold; the set was resampled
  bool diverged = false;   ///< every unnormalized weight underflowed; weights reset
};

/// Bootstrap particle filter: the transition prior is the proposal and the
/// incremental weight is the measurement likelihood. Weights carry over between
/// steps until systematic resampling is triggered by ESS < threshold * N.
///
/// step() leaves particles() holding the weighted post-update set used for the
/// step's estimates; resampling runs afterwards and is visible through
/// resampled_particles() until the next step.
template <StateMotion Motion, StateSensor Sensor>
class ParticleFilter {
 public:
  using observation_type = typename Sensor::observation_type;

  /// Every incremental likelihood below this counts as filter divergence.
  static constexpr double kDivergenceFloor = 1e-300;

  /// Number of past steps of ancestry kept for lineage().
  static constexpr std::size_t kMaxLineageLag = 16;

  ParticleFilter(Motion motion, Sensor sensor, double ess_threshold, std::uint64_t seed)
      : motion_(std::move(motion)), sensor_(std::move(sensor)), ess_threshold_(ess_threshold), seed_(seed) {
    if (!(ess_threshold_ >= 0.0 && ess_threshold_ <= 1.0))
      throw std::invalid_argument("ESS threshold must be a fraction of N in [0, 1]");
  }

  void initialize(ParticleSet particles) {
    particles_ = std::move(particles);
    next_ = particles_;
    next_parents_.resize(particles_.size());
    std::iota(next_parents_.begin(), next_parents_.end(), std::size_t{0});
    parent_maps_.clear();
    step_ = 1;
    last_ = PfDiagnostics{1, static_cast<double>(particles_.size()), false, false};
  }

  [[nodiscard]] bool initialized() const noexcept { return step_ > 0; }

  /// Propagate, weight with p(y|x), normalize, and resample when degenerate.
  const ParticleSet& step(const observation_type& y) {
    if (!initialized()) throw std::logic_error("particle filter used before initialization");
    ++step_;
    RandomStream rng(derive_seed(seed_, "pf-propagate", {step_}));
    const ParticleSet& src = next_;
    const std::size_t n = src.size();
    Matrix states(src.states().rows(), src.states().cols());
    std::vector<double> log_w(n);
    double max_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const Vector prev = src.state(i);
      Vector x = motion_.propagate(prev, rng);
      const double ll = sensor_.log_likelihood(y, x);
      if (std::isnan(ll)) throw std::domain_error("sensor log-likelihood is NaN");
      max_ll = std::max(max_ll, ll);
      const double lw = src.weight(i) > 0.0 ? std::log(src.weight(i)) : -std::numeric_limits<double>::infinity();
      log_w[i] = lw + ll;
      states.col(static_cast<Eigen::Index>(i)) = x;
    }
    NormalizedWeights nw;
    if (!(max_ll >= std::log(kDivergenceFloor))) {
      nw.weights.assign(n, 1.0 / static_cast<double>(n));
      nw.diverged = true;
    } else {
      nw = normalize_log_weights(log_w, 0.0);
    }
    particles_ = ParticleSet(std::move(states), std::move(nw.weights));
    parent_maps_.push_front(next_parents_);
    if (parent_maps_.size() > kMaxLineageLag) parent_maps_.pop_back();

    last_ = PfDiagnostics{step_, effective_sample_size(particles_.weights()), false, nw.diverged};
    if (last_.ess < ess_threshold_ * static_cast<double>(n)) {
      RandomStream rs(derive_seed(seed_, "pf-resample", {step_}));
      next_parents_ = systematic_indices(particles_.weights(), rs.uniform());
      Matrix out(particles_.states().rows(), particles_.states().cols());
      for (std::size_t j = 0; j < n; ++j)
        out.col(static_cast<Eigen::Index>(j)) = particles_.states().col(static_cast<Eigen::Index>(next_parents_[j]));
      next_ = ParticleSet(std::move(out));
      last_.resampled = true;
    } else {
      next_ = particles_;
      std::iota(next_parents_.begin(), next_parents_.end(), std::size_t{0});
    }
    return particles_;
  }

  /// For each current particle, the index of its ancestor `lag` steps back (capped at
  /// the available history). lag = 0 gives the identity.
  [[nodiscard]] std::vector<std::size_t> lineage(std::size_t lag) const {
    std::vector<std::size_t> ids(particles_.size());
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    const std::size_t depth = std::min(lag, parent_maps_.size());
    for (std::size_t d = 0; d < depth; ++d)
      for (auto& id : ids) id = parent_maps_[d][id];
    return ids;
  }

  /// Standard error of the weighted-mean estimate of one state component.
  [[nodiscard]] double estimate_standard_error(std::size_t component, std::size_t lag = kDefaultLineageLag) const {
    return mean_standard_error(particles_, component, lineage(lag));
  }

  static constexpr std::size_t kDefaultLineageLag = 3;

  [[nodiscard]] const ParticleSet& particles() const noexcept { return particles_; }
  [[nodiscard]] const ParticleSet& resampled_particles() const noexcept { return next_; }
  [[nodiscard]] const PfDiagnostics& diagnostics() const noexcept { return last_; }
  [[nodiscard]] std::uint64_t step_index() const noexcept { return step_; }
  [[nodiscard]] const Motion& motion() const noexcept { return motion_; }
  [[nodiscard]] const Sensor& sensor() const noexcept { return sensor_; }

 private:
  Motion motion_;
  Sensor sensor_;
  double ess_threshold_;
  std::uint64_t seed_;
  ParticleSet particles_;
  ParticleSet next_;
  std::vector<std::size_t> next_parents_;               ///< next_[j] came from particles_[next_parents_[j]]
  std::deque<std::vector<std::size_t>> parent_maps_;  ///< front: step k -> k-1
  std::uint64_t step_ = 0;
  PfDiagnostics last_{};
};

}  // namespace saw

#endif  // SAW_PARTICLE_FILTER_HPP
