#ifndef SAW_CONCEPTS_HPP
#define SAW_CONCEPTS_HPP

#include <concepts>

#include "saw/gaussian_mixture.hpp"
#include "saw/random.hpp"

namespace saw {

/// Measurement model usable by the filters: log p(y|x) for a full state vector x.
template <class S>
concept StateSensor = requires(const S& s, const typename S::observation_type& y, const Vector& x) {
  { s.log_likelihood(y, x) } -> std::convertible_to<double>;
};

/// Markov transition prior p(x_k|x_{k-1}) that can be sampled.
template <class M>
concept StateMotion = requires(const M& m, const Vector& x, RandomStream& rng) {
  { m.propagate(x, rng) } -> std::convertible_to<Vector>;
};

}  // namespace saw

#endif  // SAW_CONCEPTS_HPP
