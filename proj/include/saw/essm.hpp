#ifndef SAW_ESSM_HPP
#define SAW_ESSM_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "saw/knowledge.hpp"
#include "saw/particle_filter.hpp"
#include "saw/situation.hpp"

namespace saw {

/// p(s|y_{1:k}) proportional to sum_i w_i p(x_i|s), normalized over labels.
/// Accumulated per label in log-space; total underflow gives uniform + flag.
inline FlaggedDistribution essm_situation_posterior(const ParticleSet& p, const KnowledgeModel& km) {
  const std::size_t m = km.size();
  std::vector<double> top(m, -std::numeric_limits<double>::infinity());
  std::vector<double> acc(m, 0.0);
  std::vector<double> ld(m);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double w = p.weight(i);
    if (w <= 0.0) continue;
    const double lw = std::log(w);
    km.log_densities(p.state_span(i), ld);
    for (std::size_t s = 0; s < m; ++s) {
      const double v = lw + ld[s];
      if (v == -std::numeric_limits<double>::infinity()) continue;
      if (v > top[s]) {
        acc[s] = acc[s] * std::exp(top[s] - v) + 1.0;
        top[s] = v;
      } else {
        acc[s] += std::exp(v - top[s]);
      }
    }
  }
  std::vector<double> log_mass(m);
  for (std::size_t s = 0; s < m; ++s)
    log_mass[s] = std::isfinite(top[s]) ? top[s] + std::log(acc[s]) : -std::numeric_limits<double>::infinity();
  return situation_from_log_densities(log_mass);
}

/// Everything the ESSM engine reports for one time step.
struct EssmStep {
  std::uint64_t k = 0;
  FlaggedDistribution situation;
  Vector estimate;
  PfDiagnostics diagnostics;
};

/// Extended state-space model: particle filter over the pivot state, situation
/// posterior assembled from the weighted particles through the knowledge model.
/// The first observation initializes the particle set through `init`.
template <StateMotion Motion, StateSensor Sensor>
class EssmFilter {
 public:
  using observation_type = typename Sensor::observation_type;
  using Initializer = std::function<ParticleSet(const observation_type&, RandomStream&)>;

  EssmFilter(KnowledgeModel km, Motion motion, Sensor sensor, Initializer init, double ess_threshold,
             std::uint64_t seed)
      : km_(std::move(km)),
        pf_(std::move(motion), std::move(sensor), ess_threshold, derive_seed(seed, "essm-pf")),
        init_(std::move(init)),
        seed_(seed) {
    if (!init_) throw std::invalid_argument("ESSM filter needs an initializer");
  }

  EssmStep step(const observation_type& y) {
    if (!pf_.initialized()) {
      RandomStream rng(derive_seed(seed_, "essm-init"));
      ParticleSet initial = init_(y, rng);
      if (initial.dim() != km_.state_dim()) throw std::invalid_argument("initial particles have the wrong dimension");
      pf_.initialize(std::move(initial));
    } else {
      pf_.step(y);
    }
    const ParticleSet& p = pf_.particles();
    return {pf_.step_index(), essm_situation_posterior(p, km_), state_estimate(p), pf_.diagnostics()};
  }

  [[nodiscard]] const ParticleSet& particles() const noexcept { return pf_.particles(); }
  [[nodiscard]] const KnowledgeModel& knowledge() const noexcept { return km_; }
  [[nodiscard]] const ParticleFilter<Motion, Sensor>& filter() const noexcept { return pf_; }

 private:
  KnowledgeModel km_;
  ParticleFilter<Motion, Sensor> pf_;
  Initializer init_;
  std::uint64_t seed_;
};

}  // namespace saw

#endif  // SAW_ESSM_HPP
