#ifndef SAW_GAUSSIAN_MIXTURE_HPP
#define SAW_GAUSSIAN_MIXTURE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "saw/random.hpp"

namespace saw {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One weighted Gaussian term of a mixture.
struct GaussianComponent {
  double weight = 1.0;
  Vector mean;
  Matrix covariance;
};

/// Covariance acceptance rule: symmetric and smallest eigenvalue > 1e-12 * largest.
inline void validate_covariance(const Matrix& cov) {
  if (cov.rows() != cov.cols()) throw std::invalid_argument("covariance must be square");
  if (!cov.allFinite()) throw std::invalid_argument("covariance has non-finite entries");
  const double scale = std::max(cov.cwiseAbs().maxCoeff(), 1.0);
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || !(lo > 1e-12 * hi)) throw std::invalid_argument("covariance must be positive definite");
}

/// Weighted sum of Gaussian densities. Immutable after construction; each component
/// carries a precomputed inverse Cholesky factor and log-normalizer so evaluation is
/// a triangular product plus a log-sum-exp.
class GaussianMixture {
 public:
  static constexpr double kWeightRenormTolerance = 1e-9;

  GaussianMixture() = default;

  explicit GaussianMixture(std::vector<GaussianComponent> components) {
    if (components.empty()) throw std::invalid_argument("mixture needs at least one component");
    dim_ = static_cast<std::size_t>(components.front().mean.size());
    if (dim_ == 0) throw std::invalid_argument("mixture dimension must be positive");

    double total = 0.0;
    for (const auto& c : components) {
      if (!(c.weight > 0.0) || !std::isfinite(c.weight))
        throw std::invalid_argument("component weight must be positive");
      if (static_cast<std::size_t>(c.mean.size()) != dim_ ||
          static_cast<std::size_t>(c.covariance.rows()) != dim_)
        throw std::invalid_argument("component dimensions disagree");
      if (!c.mean.allFinite()) throw std::invalid_argument("component mean has non-finite entries");
      validate_covariance(c.covariance);
      total += c.weight;
    }
    if (std::abs(total - 1.0) > kWeightRenormTolerance)
      throw std::invalid_argument("component weights sum to " + std::to_string(total) + ", expected 1");

    const double log_2pi = std::log(2.0 * std::numbers::pi);
    double cumulative = 0.0;
    for (auto& c : components) {
      c.weight /= total;
      Eigen::LLT<Matrix> llt(0.5 * (c.covariance + c.covariance.transpose()));
      if (llt.info() != Eigen::Success) throw std::invalid_argument("covariance factorization failed");
      Matrix lower = llt.matrixL();
      Term t;
      t.log_weight = std::log(c.weight);
      t.chol = lower;
      t.inv_chol = lower.triangularView<Eigen::Lower>().solve(Matrix::Identity(dim_, dim_));
      t.log_norm = -0.5 * static_cast<double>(dim_) * log_2pi - lower.diagonal().array().log().sum();
      terms_.push_back(std::move(t));
      cumulative += c.weight;
      cumulative_.push_back(cumulative);
    }
    cumulative_.back() = 1.0;
    components_ = std::move(components);
  }

  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t size() const noexcept { return components_.size(); }
  [[nodiscard]] const std::vector<GaussianComponent>& components() const noexcept { return components_; }
  [[nodiscard]] const GaussianComponent& component(std::size_t i) const { return components_.at(i); }

  /// log of one component's Gaussian density (weight excluded).
  [[nodiscard]] double component_log_density(std::size_t i, std::span<const double> x) const {
    check_dim(x.size());
    return term_log_density(i, x);
  }

  [[nodiscard]] double log_density(std::span<const double> x) const {
    check_dim(x.size());
    // Streaming log-sum-exp.
    double top = -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (std::size_t i = 0; i < terms_.size(); ++i) {
      const double v = terms_[i].log_weight + term_log_density(i, x);
      if (std::isnan(v)) return v;
      if (v == -std::numeric_limits<double>::infinity()) continue;
      if (v > top) {
        acc = acc * std::exp(top - v) + 1.0;
        top = v;
      } else {
        acc += std::exp(v - top);
      }
    }
    if (!std::isfinite(top)) return top;
    return top + std::log(acc);
  }

  [[nodiscard]] double density(std::span<const double> x) const { return std::exp(log_density(x)); }

  [[nodiscard]] double log_density(const Vector& x) const { return log_density(std::span<const double>(x.data(), x.size())); }
  [[nodiscard]] double density(const Vector& x) const { return std::exp(log_density(x)); }

  /// Index of the component a uniform draw u in [0,1) selects.
  [[nodiscard]] std::size_t select_component(double u) const noexcept {
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
  }

  /// One draw written into `out` (length dim()). Returns the selected component.
  std::size_t sample_into(RandomStream& rng, std::span<double> out) const {
    check_dim(out.size());
    const std::size_t k = select_component(rng.uniform());
    double z[kMaxStackDim];
    std::vector<double> heap;
    double* zp = z;
    if (dim_ > kMaxStackDim) {
      heap.resize(dim_);
      zp = heap.data();
    }
    for (std::size_t j = 0; j < dim_; ++j) zp[j] = rng.normal();
    const Matrix& l = terms_[k].chol;
    const Vector& mu = components_[k].mean;
    for (std::size_t r = 0; r < dim_; ++r) {
      double v = mu[static_cast<Eigen::Index>(r)];
      for (std::size_t c = 0; c <= r; ++c) v += l(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * zp[c];
      out[r] = v;
    }
    return k;
  }

  [[nodiscard]] Vector sample_one(RandomStream& rng) const {
    Vector v(static_cast<Eigen::Index>(dim_));
    sample_into(rng, std::span<double>(v.data(), dim_));
    return v;
  }

  /// n i.i.d. draws: component by weight, then a Gaussian draw from it.
  [[nodiscard]] std::vector<Vector> sample(std::size_t n, RandomStream& rng) const {
    if (n == 0) throw std::invalid_argument("sample count must be >= 1");
    std::vector<Vector> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(sample_one(rng));
    return out;
  }

 private:
  static constexpr std::size_t kMaxStackDim = 16;

  struct Term {
    double log_weight = 0.0;
    double log_norm = 0.0;
    Matrix chol;
    Matrix inv_chol;
  };

  void check_dim(std::size_t n) const {
    if (n != dim_)
      throw std::invalid_argument("dimension mismatch: got " + std::to_string(n) + ", mixture has " +
                                  std::to_string(dim_));
  }

  [[nodiscard]] double term_log_density(std::size_t i, std::span<const double> x) const noexcept {
    const Term& t = terms_[i];
    const Vector& mu = components_[i].mean;
    double maha = 0.0;
    for (std::size_t r = 0; r < dim_; ++r) {
      double z = 0.0;
      for (std::size_t c = 0; c <= r; ++c)
        z += t.inv_chol(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) *
             (x[c] - mu[static_cast<Eigen::Index>(c)]);
      maha += z * z;
    }
    return t.log_norm - 0.5 * maha;
  }

  std::size_t dim_ = 0;
  std::vector<GaussianComponent> components_;
  std::vector<Term> terms_;
  std::vector<double> cumulative_;
};

}  // namespace saw

#endif  // SAW_GAUSSIAN_MIXTURE_HPP
