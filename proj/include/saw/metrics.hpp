#ifndef SAW_METRICS_HPP
#define SAW_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "saw/scenario.hpp"

namespace saw {

/// One contiguous run of ground-truth 'danger' steps.
struct RegionPass {
  std::size_t first = 0;  ///< row index of the first danger step
  std::size_t last = 0;   ///< row index of the last danger step
  double max_danger = 0.0;
  std::optional<std::size_t> detection_lag;  ///< steps from entry until p(danger) > 0.5
};

struct PosteriorMetrics {
  double accuracy = 0.0;
  std::size_t evaluated_steps = 0;
  bool degenerate = false;  ///< every row's argmax was a tie
  std::vector<RegionPass> passes;
};

/// Rows to score: everything except a +-margin window around each label switch.
/// A switch between rows t-1 and t excludes rows [t - margin, t + margin).
inline std::vector<bool> evaluation_mask(const std::vector<std::size_t>& labels, std::size_t margin) {
  std::vector<bool> keep(labels.size(), true);
  for (std::size_t t = 1; t < labels.size(); ++t) {
    if (labels[t] == labels[t - 1]) continue;
    const std::size_t lo = t >= margin ? t - margin : 0;
    const std::size_t hi = std::min(labels.size(), t + margin);
    for (std::size_t i = lo; i < hi; ++i) keep[i] = false;
  }
  return keep;
}

/// Argmax with ties to the lowest index.
inline std::size_t argmax_row(const std::vector<double>& row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

inline bool row_is_tied(const std::vector<double>& row) {
  const std::size_t a = argmax_row(row);
  for (std::size_t i = 0; i < row.size(); ++i)
    if (i != a && std::abs(row[i] - row[a]) <= 1e-12) return true;
  return false;
}

/// Accuracy of the per-step argmax against labels, plus danger-pass statistics.
inline PosteriorMetrics evaluate_posterior(const std::vector<std::vector<double>>& posterior,
                                           const std::vector<std::size_t>& labels, std::size_t danger_index,
                                           std::size_t margin) {
  if (posterior.size() != labels.size()) throw std::invalid_argument("posterior and label row counts differ");
  PosteriorMetrics m;
  const auto keep = evaluation_mask(labels, margin);
  std::size_t hits = 0;
  bool all_tied = !posterior.empty();
  for (std::size_t t = 0; t < posterior.size(); ++t) {
    if (danger_index >= posterior[t].size()) throw std::invalid_argument("danger index outside posterior row");
    all_tied = all_tied && row_is_tied(posterior[t]);
    if (!keep[t]) continue;
    ++m.evaluated_steps;
    if (argmax_row(posterior[t]) == labels[t]) ++hits;
  }
  m.accuracy = m.evaluated_steps ? static_cast<double>(hits) / static_cast<double>(m.evaluated_steps) : 0.0;
  m.degenerate = all_tied;

  for (std::size_t t = 0; t < labels.size();) {
    if (labels[t] != danger_index) {
      ++t;
      continue;
    }
    RegionPass pass;
    pass.first = t;
    while (t < labels.size() && labels[t] == danger_index) {
      const double p = posterior[t][danger_index];
      pass.max_danger = std::max(pass.max_danger, p);
      if (!pass.detection_lag && p > 0.5) pass.detection_lag = t - pass.first;
      ++t;
    }
    pass.last = t - 1;
    m.passes.push_back(pass);
  }
  return m;
}

/// Root-mean-square 2-D position error.
inline double position_rmse(const std::vector<Vector2>& estimate, const std::vector<Vector2>& truth) {
  if (estimate.size() != truth.size() || estimate.empty())
    throw std::invalid_argument("estimate and truth must be non-empty and aligned");
  double acc = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) acc += (estimate[i] - truth[i]).squaredNorm();
  return std::sqrt(acc / static_cast<double>(estimate.size()));
}

}  // namespace saw

#endif  // SAW_METRICS_HPP
