#ifndef SAW_SITUATION_HPP
#define SAW_SITUATION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace saw {

/// Ordered set of situation labels. All probability vectors index against this order.
class SituationSpace {
 public:
  SituationSpace() = default;

  explicit SituationSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
    if (labels_.size() < 2) throw std::invalid_argument("situation space needs at least two labels");
    std::unordered_set<std::string> seen;
    for (const auto& l : labels_) {
      if (l.empty()) throw std::invalid_argument("situation label must be non-empty");
      if (!seen.insert(l).second) throw std::invalid_argument("duplicate situation label '" + l + "'");
    }
  }

  [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }
  [[nodiscard]] const std::string& label(std::size_t i) const { return labels_.at(i); }
  [[nodiscard]] const std::vector<std::string>& labels() const noexcept { return labels_; }

  [[nodiscard]] std::size_t index_of(const std::string& label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) throw std::out_of_range("unknown situation label '" + label + "'");
    return static_cast<std::size_t>(it - labels_.begin());
  }

  [[nodiscard]] bool contains(const std::string& label) const {
    return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
  }

  friend bool operator==(const SituationSpace&, const SituationSpace&) = default;

 private:
  std::vector<std::string> labels_;
};

/// Normalized probability vector over a SituationSpace.
class SituationDistribution {
 public:
  static constexpr double kTolerance = 1e-12;

  SituationDistribution() = default;

  /// Validates that `probs` already is a distribution (entries in [0,1], sum 1 +- 1e-12).
  explicit SituationDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw std::invalid_argument("empty situation distribution");
    double sum = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability outside [0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kTolerance) throw std::invalid_argument("probabilities do not sum to 1");
  }

  static SituationDistribution uniform(std::size_t m) {
    SituationDistribution d;
    d.probs_.assign(m, 1.0 / static_cast<double>(m));
    return d;
  }

  /// Normalizes non-negative finite weights. Throws std::domain_error on zero total
  /// mass; callers decide the degeneracy policy.
  static SituationDistribution normalized(std::span<const double> weights) {
    double sum = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("weights must be finite and non-negative");
      sum += w;
    }
    if (!(sum > 0.0)) throw std::domain_error("cannot normalize zero total mass");
    SituationDistribution d;
    d.probs_.resize(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) d.probs_[i] = weights[i] / sum;
    return d;
  }

  /// Normalizes log-weights with a max shift. Entries of -inf map to probability 0.
  /// Throws std::domain_error when every entry is -inf (or NaN).
  static SituationDistribution from_log_weights(std::span<const double> log_weights) {
    double top = -std::numeric_limits<double>::infinity();
    for (double lw : log_weights) {
      if (std::isnan(lw) || lw == std::numeric_limits<double>::infinity())
        throw std::invalid_argument("log-weights must be finite or -inf");
      top = std::max(top, lw);
    }
    if (!std::isfinite(top)) throw std::domain_error("all log-weights are -inf");
    std::vector<double> w(log_weights.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_weights[i] - top);
    return normalized(w);
  }

  [[nodiscard]] std::size_t size() const noexcept { return probs_.size(); }
  [[nodiscard]] double operator[](std::size_t i) const { return probs_[i]; }
  [[nodiscard]] std::span<const double> probs() const noexcept { return probs_; }

  /// Index of the most probable entry; ties go to the lowest index.
  [[nodiscard]] std::size_t argmax() const noexcept {
    return static_cast<std::size_t>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
  }

  [[nodiscard]] double sum() const noexcept { return std::accumulate(probs_.begin(), probs_.end(), 0.0); }

 private:
  std::vector<double> probs_;
};

/// A distribution plus the degeneracy flag raised by the policies that fall back
/// to a default instead of failing mid-run.
struct FlaggedDistribution {
  SituationDistribution dist;
  bool degenerate = false;
};

}  // namespace saw

#endif  // SAW_SITUATION_HPP
