#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "saw/particle_filter.hpp"
#include "test_util.hpp"

using namespace saw;
using test::ScalarMotion;
using test::ScalarSensor;

namespace {

using ScalarFilter = ParticleFilter<ScalarMotion, ScalarSensor>;

ParticleSet scalar_prior(std::size_t n, double var, RandomStream& rng) {
  return pf_init(GaussianInit{Vector::Zero(1), var * Matrix::Identity(1, 1)}, n, rng);
}

ParticleSet ramp_set(const std::vector<double>& weights) {
  Matrix states(1, static_cast<Eigen::Index>(weights.size()));
  for (Eigen::Index i = 0; i < states.cols(); ++i) states(0, i) = static_cast<double>(i);
  return ParticleSet(states, weights);
}

}  // namespace

TEST(PfInit, GaussianInitGivesUniformWeights) {
  RandomStream rng(1);
  const auto p = scalar_prior(5000, 1.0, rng);
  ASSERT_EQ(p.size(), 5000u);
  for (double w : p.weights()) EXPECT_EQ(w, 1.0 / 5000.0);
}

TEST(PfInit, PointMassCopiesTheState) {
  RandomStream rng(1);
  const auto p = pf_init(PointMassInit{Eigen::Vector2d(3.0, -1.0)}, 17, rng);
  EXPECT_EQ(p.size(), 17u);
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_EQ(p.state(i)[0], 3.0);
    EXPECT_EQ(p.state(i)[1], -1.0);
  }
}

TEST(PfInit, RejectsEmptyOrInvalidSpecs) {
  RandomStream rng(1);
  EXPECT_THROW((void)scalar_prior(0, 1.0, rng), std::invalid_argument);
  EXPECT_THROW((void)pf_init(GaussianInit{Vector::Zero(2), -Matrix::Identity(2, 2)}, 10, rng), std::invalid_argument);
}

TEST(ParticleSet, RejectsBadWeights) {
  const Matrix s = Matrix::Zero(1, 3);
  EXPECT_THROW(ParticleSet(s, {0.5, 0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(ParticleSet(s, {1.5, -0.5, 0.0}), std::invalid_argument);
  EXPECT_THROW(ParticleSet(s, {0.5, 0.5}), std::invalid_argument);
}

TEST(SystematicResample, OneHotWeightCopiesThatParticle) {
  RandomStream rng(3);
  const auto out = systematic_resample(ramp_set({0, 0, 1, 0, 0}), rng);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out.state(i)[0], 2.0);
}

TEST(SystematicResample, UniformWeightsKeepEachParticleOnce) {
  RandomStream rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto out = systematic_resample(ramp_set(std::vector<double>(8, 0.125)), rng);
    std::vector<double> xs;
    for (std::size_t i = 0; i < out.size(); ++i) xs.push_back(out.state(i)[0]);
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_EQ(xs[i], static_cast<double>(i));
  }
}

TEST(SystematicResample, CountsAreUnbiased) {
  RandomStream gen(8);
  const std::size_t n = 1000;
  std::vector<double> w(n);
  for (auto& x : w) x = gen.uniform();
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= sum;
  std::vector<double> mean_count(n, 0.0);
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    const auto idx = systematic_indices(w, gen.uniform());
    for (auto i : idx) mean_count[i] += 1.0 / reps;
  }
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(mean_count[i], n * w[i], 0.15);
}

TEST(SystematicResample, CountsStayWithinOneOfExpectation) {
  RandomStream gen(10);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + static_cast<std::size_t>(gen.uniform() * 200);
    std::vector<double> w(n);
    for (auto& x : w) x = std::pow(gen.uniform(), 4);
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= sum;
    const auto idx = systematic_indices(w, gen.uniform());
    ASSERT_EQ(idx.size(), n);
    std::vector<std::size_t> count(n, 0);
    for (auto i : idx) {
      ASSERT_LT(i, n);
      ++count[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_LE(std::abs(static_cast<double>(count[i]) - n * w[i]), 1.0 + 1e-9);
      if (w[i] == 0.0) EXPECT_EQ(count[i], 0u);
    }
  }
}

TEST(SystematicResample, OutputIsSubMultisetWithUniformWeights) {
  RandomStream gen(12);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> w(50);
    for (auto& x : w) x = gen.uniform();
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= sum;
    const auto in = ramp_set(w);
    const auto out = systematic_resample(in, gen);
    EXPECT_EQ(out.size(), in.size());
    EXPECT_NEAR(effective_sample_size(out.weights()), 50.0, 1e-9);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double x = out.state(i)[0];
      EXPECT_EQ(x, std::round(x));
      EXPECT_GE(x, 0.0);
      EXPECT_LT(x, 50.0);
    }
  }
}

TEST(EffectiveSampleSize, BoundedByOneAndN) {
  RandomStream gen(14);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> w(30);
    for (auto& x : w) x = std::pow(gen.uniform(), 6);
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= sum;
    const double ess = effective_sample_size(w);
    EXPECT_GE(ess, 1.0 - 1e-12);
    EXPECT_LE(ess, 30.0 + 1e-12);
  }
  EXPECT_DOUBLE_EQ(effective_sample_size(std::vector<double>{0, 1, 0}), 1.0);
}

TEST(NormalizeLogWeights, ShiftInvariantAndFlagsUnderflow) {
  const std::vector<double> a = {-1000.0, -1001.0, -1002.0};
  const std::vector<double> b = {0.0, -1.0, -2.0};
  const auto na = normalize_log_weights(a, 0.0);
  const auto nb = normalize_log_weights(b, 0.0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(na.weights[i], nb.weights[i], 1e-15);
  EXPECT_FALSE(na.diverged);
  EXPECT_TRUE(normalize_log_weights(a).diverged);
}

TEST(StateEstimate, WeightedMeanExamples) {
  Matrix s(1, 3);
  s << 0.0, 1.0, 2.0;
  EXPECT_NEAR(state_estimate(ParticleSet(s))[0], 1.0, 1e-15);
  EXPECT_NEAR(state_estimate(ParticleSet(s, {0.5, 0.0, 0.5}))[0], 1.0, 1e-15);
  EXPECT_NEAR(state_estimate(ParticleSet(s, {0.0, 0.0, 1.0}))[0], 2.0, 1e-15);
}

TEST(ParticleFilter, ConstantLikelihoodKeepsUniformWeights) {
  ParticleFilter<ScalarMotion, test::ConstantSensor> f(ScalarMotion{1.0}, test::ConstantSensor{-3.0}, 0.5, 5);
  RandomStream rng(1);
  f.initialize(scalar_prior(200, 1.0, rng));
  for (int k = 0; k < 5; ++k) {
    const auto& p = f.step(0.0);
    for (double w : p.weights()) EXPECT_NEAR(w, 1.0 / 200.0, 1e-15);
    EXPECT_FALSE(f.diagnostics().resampled);
  }
}

TEST(ParticleFilter, TracksKalmanMeanWithinThreeStandardErrors) {
  RandomStream data(77);
  const auto ys = test::scalar_measurements(10, 1.0, 1.0, 1.0, data);
  test::ScalarKalman kf;
  ScalarFilter f(ScalarMotion{1.0}, ScalarSensor{1.0}, 0.5, 78);
  RandomStream rng(79);
  f.initialize(scalar_prior(5000, 1.0, rng));
  for (double y : ys) {
    kf.step(y);
    const auto& p = f.step(y);
    const double se = f.estimate_standard_error(0);
    EXPECT_GT(se, 0.0);
    EXPECT_LT(std::abs(state_estimate(p)[0] - kf.mean), 3.0 * se) << "step " << f.step_index();
    EXPECT_NEAR(state_covariance(p)(0, 0), kf.var, 0.1 * kf.var);
  }
}

TEST(ParticleFilter, ZeroProcessNoiseConcentratesOnTruth) {
  // Static state at 2.5 observed with small noise: the posterior collapses near it.
  ScalarFilter f(ScalarMotion{0.0}, ScalarSensor{0.01}, 0.5, 11);
  RandomStream rng(12);
  f.initialize(scalar_prior(2000, 4.0, rng));
  RandomStream noise(13);
  for (int k = 0; k < 30; ++k) f.step(2.5 + 0.1 * noise.normal());
  const auto& p = f.particles();
  EXPECT_NEAR(state_estimate(p)[0], 2.5, 0.1);
  EXPECT_LT(state_covariance(p)(0, 0), 0.05);
}

TEST(ParticleFilter, DivergenceResetsWeightsAndFlags) {
  ScalarFilter f(ScalarMotion{1e-6}, ScalarSensor{1e-4}, 0.5, 21);
  RandomStream rng(22);
  f.initialize(scalar_prior(100, 1e-6, rng));
  f.step(1e6);
  EXPECT_TRUE(f.diagnostics().diverged);
  for (double w : f.particles().weights()) EXPECT_EQ(w, 0.01);
  f.step(0.0);
  EXPECT_FALSE(f.diagnostics().diverged);
}

TEST(ParticleFilter, ResamplesOnlyBelowThreshold) {
  ScalarFilter never(ScalarMotion{1.0}, ScalarSensor{1.0}, 0.0, 1);
  ScalarFilter always(ScalarMotion{1.0}, ScalarSensor{1.0}, 1.0, 1);
  RandomStream rng(2);
  const auto init = scalar_prior(500, 1.0, rng);
  never.initialize(init);
  always.initialize(init);
  for (double y : {0.3, -0.2, 1.5}) {
    never.step(y);
    always.step(y);
    EXPECT_FALSE(never.diagnostics().resampled);
    EXPECT_TRUE(always.diagnostics().resampled);
    EXPECT_NEAR(effective_sample_size(always.resampled_particles().weights()), 500.0, 1e-9);
  }
}

TEST(ParticleFilter, LineageFollowsResampledAncestry) {
  ScalarFilter f(ScalarMotion{1.0}, ScalarSensor{1.0}, 1.0, 4);
  RandomStream rng(5);
  f.initialize(scalar_prior(50, 1.0, rng));
  const auto lag0 = f.lineage(0);
  for (std::size_t i = 0; i < lag0.size(); ++i) EXPECT_EQ(lag0[i], i);
  f.step(0.1);
  const auto resampled_from = f.lineage(1);
  f.step(0.2);
  // One step back from the second update, every particle descends from a resampled slot.
  const auto back = f.lineage(1);
  for (auto id : back) EXPECT_LT(id, 50u);
  EXPECT_EQ(resampled_from.size(), 50u);
}

TEST(ParticleFilter, IdenticalSeedsGiveBitIdenticalRuns) {
  RandomStream data(30);
  const auto ys = test::scalar_measurements(20, 1.0, 1.0, 1.0, data);
  auto run = [&](std::uint64_t seed) {
    ScalarFilter f(ScalarMotion{1.0}, ScalarSensor{1.0}, 0.5, seed);
    RandomStream rng(seed);
    f.initialize(scalar_prior(300, 1.0, rng));
    std::vector<double> means;
    for (double y : ys) means.push_back(state_estimate(f.step(y))[0]);
    return means;
  };
  const auto a = run(9);
  EXPECT_EQ(a, run(9));
  EXPECT_NE(a, run(10));
}

TEST(ParticleFilter, StepBeforeInitializeThrows) {
  ScalarFilter f(ScalarMotion{1.0}, ScalarSensor{1.0}, 0.5, 1);
  EXPECT_THROW(f.step(0.0), std::logic_error);
  EXPECT_THROW(ScalarFilter(ScalarMotion{}, ScalarSensor{}, 1.5, 1), std::invalid_argument);
}
