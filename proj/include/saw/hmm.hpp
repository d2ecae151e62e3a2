#ifndef SAW_HMM_HPP
#define SAW_HMM_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "saw/concepts.hpp"
#include "saw/knowledge.hpp"
#include "saw/random.hpp"
#include "saw/situation.hpp"

namespace saw {

/// Row-stochastic situation transition matrix; entry (i, j) = p(s_k = j | s_{k-1} = i).
class TransitionMatrix {
 public:
  static constexpr double kTolerance = 1e-12;

  TransitionMatrix() = default;

  explicit TransitionMatrix(std::vector<std::vector<double>> rows) : rows_(std::move(rows)) {
    const std::size_t m = rows_.size();
    if (m == 0) throw std::invalid_argument("transition matrix is empty");
    for (const auto& row : rows_) {
      if (row.size() != m) throw std::invalid_argument("transition matrix must be square");
      double sum = 0.0;
      for (double p : row) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("transition entry outside [0,1]");
        sum += p;
      }
      if (std::abs(sum - 1.0) > kTolerance) throw std::invalid_argument("transition row does not sum to 1");
    }
  }

  static TransitionMatrix identity(std::size_t m) {
    std::vector<std::vector<double>> rows(m, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < m; ++i) rows[i][i] = 1.0;
    return TransitionMatrix(std::move(rows));
  }

  [[nodiscard]] std::size_t size() const noexcept { return rows_.size(); }
  [[nodiscard]] double operator()(std::size_t from, std::size_t to) const { return rows_[from][to]; }
  [[nodiscard]] const std::vector<std::vector<double>>& rows() const noexcept { return rows_; }

 private:
  std::vector<std::vector<double>> rows_;
};

/// Predictive step: out_j = sum_i prior_i * trans(i, j).
inline SituationDistribution hmm_predict(const SituationDistribution& prior, const TransitionMatrix& trans) {
  const std::size_t m = prior.size();
  if (trans.size() != m) throw std::invalid_argument("prior and transition matrix dimensions differ");
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j] += prior[i] * trans(i, j);
  // Row sums are 1 only to 1e-12; renormalize so the output stays a distribution.
  return SituationDistribution::normalized(out);
}

/// Bayes update with likelihood vector L. Zero evidence keeps `pred` and raises the flag.
inline FlaggedDistribution hmm_update(const SituationDistribution& pred, std::span<const double> likelihoods) {
  if (likelihoods.size() != pred.size()) throw std::invalid_argument("likelihood vector has wrong length");
  std::vector<double> joint(pred.size());
  double total = 0.0;
  for (std::size_t i = 0; i < joint.size(); ++i) {
    if (!(likelihoods[i] >= 0.0) || !std::isfinite(likelihoods[i]))
      throw std::invalid_argument("likelihoods must be finite and non-negative");
    joint[i] = pred[i] * likelihoods[i];
    total += joint[i];
  }
  if (!(total > 0.0)) return {pred, true};
  return {SituationDistribution::normalized(joint), false};
}

/// hmm_update with log-likelihoods; same result without underflow.
inline FlaggedDistribution hmm_update_log(const SituationDistribution& pred, std::span<const double> log_likelihoods) {
  if (log_likelihoods.size() != pred.size()) throw std::invalid_argument("likelihood vector has wrong length");
  std::vector<double> joint(pred.size());
  for (std::size_t i = 0; i < joint.size(); ++i) {
    if (std::isnan(log_likelihoods[i])) throw std::invalid_argument("log-likelihood is NaN");
    joint[i] = pred[i] > 0.0 ? std::log(pred[i]) + log_likelihoods[i] : -std::numeric_limits<double>::infinity();
  }
  try {
    return {SituationDistribution::from_log_weights(joint), false};
  } catch (const std::domain_error&) {
    return {pred, true};
  }
}

/// Monte-Carlo estimate of log p(y|s) = log (1/n) sum_i p(y|x_i), x_i ~ p(x|s).
/// `log_lik` maps a full state vector to log p(y|x); sampled knowledge-space vectors
/// are embedded into a zero full state before evaluation.
template <class LogLikelihood>
double mc_log_likelihood(const KnowledgeModel& km, std::size_t label, LogLikelihood&& log_lik, std::size_t n,
                         RandomStream& rng) {
  if (n == 0) throw std::invalid_argument("MC sample count must be >= 1");
  const GaussianMixture& mix = km.mixture(label);
  const auto& proj = km.projection();
  Vector full = Vector::Zero(static_cast<Eigen::Index>(km.state_dim()));
  std::array<double, KnowledgeModel::kMaxProjectedDim> draw{};
  const std::span<double> draw_span(draw.data(), proj.size());

  // Streaming log-mean-exp.
  double top = -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mix.sample_into(rng, draw_span);
    for (std::size_t j = 0; j < proj.size(); ++j) full[static_cast<Eigen::Index>(proj[j])] = draw[j];
    const double v = log_lik(static_cast<const Vector&>(full));
    if (std::isnan(v)) throw std::domain_error("sensor log-likelihood is NaN");
    if (v == -std::numeric_limits<double>::infinity()) continue;
    if (v > top) {
      acc = acc * std::exp(top - v) + 1.0;
      top = v;
    } else {
      acc += std::exp(v - top);
    }
  }
  if (!std::isfinite(top)) return top;
  return top + std::log(acc / static_cast<double>(n));
}

template <class LogLikelihood>
double mc_likelihood(const KnowledgeModel& km, std::size_t label, LogLikelihood&& log_lik, std::size_t n,
                     RandomStream& rng) {
  return std::exp(mc_log_likelihood(km, label, std::forward<LogLikelihood>(log_lik), n, rng));
}

/// Discrete-situation filter: predict with the transition matrix, update with the
/// MC-marginalized likelihood. The first observation only establishes the a-priori
/// posterior p(s_1|y_1); updates start at k = 2.
template <StateSensor Sensor>
class HmmFilter {
 public:
  using observation_type = typename Sensor::observation_type;

  HmmFilter(KnowledgeModel km, TransitionMatrix transition, Sensor sensor, std::size_t mc_samples,
            std::uint64_t seed, SituationDistribution initial)
      : km_(std::move(km)),
        transition_(std::move(transition)),
        sensor_(std::move(sensor)),
        mc_samples_(mc_samples),
        seed_(seed),
        posterior_(std::move(initial)) {
    if (mc_samples_ == 0) throw std::invalid_argument("MC sample count must be >= 1");
    if (transition_.size() != km_.size() || posterior_.size() != km_.size())
      throw std::invalid_argument("transition/initial distribution do not match the situation space");
  }

  HmmFilter(KnowledgeModel km, TransitionMatrix transition, Sensor sensor, std::size_t mc_samples, std::uint64_t seed)
      : HmmFilter(km, std::move(transition), std::move(sensor), mc_samples, seed,
                  SituationDistribution::uniform(km.size())) {}

  /// Consumes y_k and returns p(s_k|y_{1:k}).
  const SituationDistribution& step(const observation_type& y) {
    ++step_;
    last_degenerate_ = false;
    if (step_ == 1) return posterior_;

    const SituationDistribution pred = hmm_predict(posterior_, transition_);
    const std::size_t m = km_.size();
    log_likelihoods_.assign(m, 0.0);
    // Fresh samples per (step, label); combined in label order.
    for (std::size_t s = 0; s < m; ++s) {
      RandomStream rng(derive_seed(seed_, "hmm-mc", {step_, s}));
      log_likelihoods_[s] = mc_log_likelihood(
          km_, s, [&](const Vector& x) { return sensor_.log_likelihood(y, x); }, mc_samples_, rng);
    }
    FlaggedDistribution upd = hmm_update_log(pred, log_likelihoods_);
    posterior_ = std::move(upd.dist);
    last_degenerate_ = upd.degenerate;
    if (upd.degenerate) ++degenerate_steps_;
    return posterior_;
  }

  [[nodiscard]] const SituationDistribution& posterior() const noexcept { return posterior_; }
  [[nodiscard]] std::uint64_t step_index() const noexcept { return step_; }
  [[nodiscard]] bool last_step_degenerate() const noexcept { return last_degenerate_; }
  [[nodiscard]] std::size_t degenerate_steps() const noexcept { return degenerate_steps_; }
  [[nodiscard]] const std::vector<double>& last_log_likelihoods() const noexcept { return log_likelihoods_; }
  [[nodiscard]] const KnowledgeModel& knowledge() const noexcept { return km_; }

 private:
  KnowledgeModel km_;
  TransitionMatrix transition_;
  Sensor sensor_;
  std::size_t mc_samples_;
  std::uint64_t seed_;
  SituationDistribution posterior_;
  std::uint64_t step_ = 0;
  bool last_degenerate_ = false;
  std::size_t degenerate_steps_ = 0;
  std::vector<double> log_likelihoods_;
};

}  // namespace saw

#endif  // SAW_HMM_HPP
