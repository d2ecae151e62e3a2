#ifndef SAW_KNOWLEDGE_HPP
#define SAW_KNOWLEDGE_HPP

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "saw/gaussian_mixture.hpp"
#include "saw/situation.hpp"

namespace saw {

/// Expert knowledge p(x|s): one Gaussian mixture per situation label, defined over a
/// projection of the full state (by default the position components).
class KnowledgeModel {
 public:
  static constexpr std::size_t kMaxProjectedDim = 8;

  KnowledgeModel() = default;

  KnowledgeModel(SituationSpace space, std::vector<GaussianMixture> mixtures, std::vector<std::size_t> projection,
                 std::size_t state_dim)
      : space_(std::move(space)),
        mixtures_(std::move(mixtures)),
        projection_(std::move(projection)),
        state_dim_(state_dim) {
    if (mixtures_.size() != space_.size())
      throw std::invalid_argument("knowledge model needs exactly one mixture per situation label");
    if (projection_.empty() || projection_.size() > kMaxProjectedDim)
      throw std::invalid_argument("projection length must be in [1, 8]");
    for (std::size_t idx : projection_)
      if (idx >= state_dim_) throw std::invalid_argument("projection index outside the state vector");
    for (const auto& m : mixtures_)
      if (m.dim() != projection_.size())
        throw std::invalid_argument("mixture dimension must equal projection length");
  }

  [[nodiscard]] const SituationSpace& space() const noexcept { return space_; }
  [[nodiscard]] std::size_t size() const noexcept { return mixtures_.size(); }
  [[nodiscard]] const GaussianMixture& mixture(std::size_t label) const { return mixtures_.at(label); }
  [[nodiscard]] const GaussianMixture& mixture(const std::string& label) const {
    return mixtures_.at(space_.index_of(label));
  }
  [[nodiscard]] const std::vector<std::size_t>& projection() const noexcept { return projection_; }
  [[nodiscard]] std::size_t state_dim() const noexcept { return state_dim_; }
  [[nodiscard]] std::size_t knowledge_dim() const noexcept { return projection_.size(); }

  [[nodiscard]] Vector project(std::span<const double> state) const {
    check_state(state.size());
    Vector out(static_cast<Eigen::Index>(projection_.size()));
    for (std::size_t i = 0; i < projection_.size(); ++i) out[static_cast<Eigen::Index>(i)] = state[projection_[i]];
    return out;
  }

  /// Inverse of project(): projected components placed into a zero full state.
  [[nodiscard]] Vector embed(std::span<const double> projected) const {
    if (projected.size() != projection_.size()) throw std::invalid_argument("projected vector has wrong length");
    Vector out = Vector::Zero(static_cast<Eigen::Index>(state_dim_));
    for (std::size_t i = 0; i < projection_.size(); ++i) out[static_cast<Eigen::Index>(projection_[i])] = projected[i];
    return out;
  }

  /// log p(x|s) for one label, with x the full state.
  [[nodiscard]] double log_density(std::size_t label, std::span<const double> state) const {
    check_state(state.size());
    std::array<double, kMaxProjectedDim> buf{};
    for (std::size_t i = 0; i < projection_.size(); ++i) buf[i] = state[projection_[i]];
    return mixtures_[label].log_density(std::span<const double>(buf.data(), projection_.size()));
  }

  /// log p(x|s) for every label, in label order.
  void log_densities(std::span<const double> state, std::span<double> out) const {
    if (out.size() != mixtures_.size()) throw std::invalid_argument("output span has wrong length");
    check_state(state.size());
    std::array<double, kMaxProjectedDim> buf{};
    for (std::size_t i = 0; i < projection_.size(); ++i) buf[i] = state[projection_[i]];
    const std::span<const double> px(buf.data(), projection_.size());
    for (std::size_t s = 0; s < mixtures_.size(); ++s) out[s] = mixtures_[s].log_density(px);
  }

  [[nodiscard]] std::vector<double> log_densities(std::span<const double> state) const {
    std::vector<double> out(mixtures_.size());
    log_densities(state, out);
    return out;
  }

 private:
  void check_state(std::size_t n) const {
    if (n != state_dim_)
      throw std::invalid_argument("state has dimension " + std::to_string(n) + ", expected " +
                                  std::to_string(state_dim_));
  }

  SituationSpace space_;
  std::vector<GaussianMixture> mixtures_;
  std::vector<std::size_t> projection_;
  std::size_t state_dim_ = 0;
};

/// Normalizes per-label log-densities. When every density underflows the result is
/// uniform and flagged.
inline FlaggedDistribution situation_from_log_densities(std::span<const double> log_densities) {
  try {
    return {SituationDistribution::from_log_weights(log_densities), false};
  } catch (const std::domain_error&) {
    return {SituationDistribution::uniform(log_densities.size()), true};
  }
}

/// p(s|x) under a uniform situation prior: proportional to p(x|s).
inline FlaggedDistribution situation_given_state(const KnowledgeModel& km, std::span<const double> state) {
  return situation_from_log_densities(km.log_densities(state));
}

inline FlaggedDistribution situation_given_state(const KnowledgeModel& km, const Vector& state) {
  return situation_given_state(km, std::span<const double>(state.data(), static_cast<std::size_t>(state.size())));
}

}  // namespace saw

#endif  // SAW_KNOWLEDGE_HPP
