#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "saw/essm.hpp"
#include "saw/scenario.hpp"
#include "test_util.hpp"

using namespace saw;

namespace {

KnowledgeModel scalar_pair(double var_a, double mean_b, double var_b) {
  return KnowledgeModel(SituationSpace({"a", "b"}),
                        {GaussianMixture({{1.0, Vector::Zero(1), var_a * Matrix::Identity(1, 1)}}),
                         GaussianMixture({{1.0, Vector::Constant(1, mean_b), var_b * Matrix::Identity(1, 1)}})},
                        {0}, 1);
}

ParticleSet scalar_set(const std::vector<double>& xs, const std::vector<double>& ws) {
  Matrix s(1, static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) s(0, static_cast<Eigen::Index>(i)) = xs[i];
  return ParticleSet(s, ws);
}

RegionSet one_region() { return RegionSet({{Vector2(0, 10000), 1000}}, std::sqrt(10.0)); }
Area small_area() { return {-5000, 5000, 5000, 15000}; }

}  // namespace

TEST(EssmPosterior, IdenticalMixturesGiveUniform) {
  const auto km = scalar_pair(1.0, 0.0, 1.0);
  const auto out = essm_situation_posterior(scalar_set({-1, 0.2, 3}, {0.2, 0.5, 0.3}), km);
  EXPECT_FALSE(out.degenerate);
  EXPECT_NEAR(out.dist[0], 0.5, 1e-15);
  EXPECT_NEAR(out.dist[1], 0.5, 1e-15);
}

TEST(EssmPosterior, HandComputedQuarterThreeQuarters) {
  // At x = 0, N(0|0,1) : N(0|0,1/9) = 1 : 3.
  const auto km = scalar_pair(1.0, 0.0, 1.0 / 9.0);
  const auto out = essm_situation_posterior(scalar_set({0.0}, {1.0}), km);
  EXPECT_NEAR(out.dist[0], 0.25, 1e-14);
  EXPECT_NEAR(out.dist[1], 0.75, 1e-14);
}

TEST(EssmPosterior, MatchesDirectWeightedSum) {
  const auto km = scalar_pair(1.0, 2.0, 0.5);
  const std::vector<double> xs = {-0.5, 0.3, 1.1, 2.4};
  const std::vector<double> ws = {0.1, 0.4, 0.3, 0.2};
  double a = 0.0;
  double b = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    a += ws[i] * test::normal_pdf(xs[i], 0.0, 1.0);
    b += ws[i] * test::normal_pdf(xs[i], 2.0, 0.5);
  }
  const auto out = essm_situation_posterior(scalar_set(xs, ws), km);
  EXPECT_NEAR(out.dist[0], a / (a + b), 1e-13);
  EXPECT_NEAR(out.dist[1], b / (a + b), 1e-13);
}

TEST(EssmPosterior, ParticlesAtDangerCenterGiveDanger) {
  const auto km = build_knowledge(one_region(), small_area());
  Matrix s = Matrix::Zero(4, 100);
  s.row(2).setConstant(10000.0);
  const auto out = essm_situation_posterior(ParticleSet(s), km);
  EXPECT_EQ(out.dist.argmax(), kDangerIndex);
  // The potential-danger mixture shares the center with 10x the variance, so the
  // ratio danger : potential danger is 10 : 1 at the center.
  EXPECT_NEAR(out.dist[kDangerIndex], 10.0 / 11.0, 1e-3);
}

TEST(EssmPosterior, FarParticlesResolveWithoutUnderflow) {
  const auto km = scalar_pair(1.0, 1.0, 1.0);
  const auto out = essm_situation_posterior(scalar_set({60.0, 61.0}, {0.5, 0.5}), km);
  EXPECT_FALSE(out.degenerate);
  EXPECT_GT(out.dist[1], 0.999);
}

TEST(EssmPosteriorProperties, InvariantToCommonDensityScale) {
  // Scaling the state axis scales every mixture density by the same Jacobian factor.
  RandomStream gen(17);
  for (int t = 0; t < 100; ++t) {
    const double c = 0.1 + 10.0 * gen.uniform();
    const auto km = scalar_pair(1.0, 1.5, 0.3);
    const auto km_scaled = scalar_pair(c * c, 1.5 * c, 0.3 * c * c);
    std::vector<double> xs(5);
    std::vector<double> xs_scaled(5);
    for (std::size_t i = 0; i < 5; ++i) {
      xs[i] = 3.0 * gen.uniform() - 1.0;
      xs_scaled[i] = c * xs[i];
    }
    const std::vector<double> ws(5, 0.2);
    const auto a = essm_situation_posterior(scalar_set(xs, ws), km).dist;
    const auto b = essm_situation_posterior(scalar_set(xs_scaled, ws), km_scaled).dist;
    EXPECT_NEAR(a[0], b[0], 1e-12);
    EXPECT_NEAR(a.sum(), 1.0, 1e-12);
  }
}

TEST(AnchoredInit, CloudCentersOnMeasurementImage) {
  const SensorModel sensor;
  const Observation y{1, std::atan2(8000.0, 3000.0), std::hypot(3000.0, 8000.0)};
  RandomStream rng(5);
  const MeasurementAnchoredInit spec{25.0, 2.0};
  const auto p = pf_init(spec, sensor, y, 20000, rng);
  const Vector mean = state_estimate(p);
  const Matrix cov = state_covariance(p);
  const double n = 20000.0;
  EXPECT_NEAR(mean[0], 3000.0, 4.0 * std::sqrt(cov(0, 0) / n));
  EXPECT_NEAR(mean[2], 8000.0, 4.0 * std::sqrt(cov(2, 2) / n));
  EXPECT_NEAR(mean[1], 0.0, 4.0 * 25.0 / std::sqrt(n));
  EXPECT_NEAR(std::sqrt(cov(1, 1)), 25.0, 0.5);
  // Widened linearized covariance: along-range std 2 * 50 m, cross-range 2 * r * sigma_theta.
  const Eigen::Vector2d u(3000.0 / y.range, 8000.0 / y.range);
  Eigen::Matrix2d pc;
  pc << cov(0, 0), cov(0, 2), cov(2, 0), cov(2, 2);
  EXPECT_NEAR(std::sqrt(u.dot(pc * u)), 100.0, 2.0);
  const Eigen::Vector2d v(-u.y(), u.x());
  EXPECT_NEAR(std::sqrt(v.dot(pc * v)), 2.0 * y.range * sensor.bearing_std(), 0.03 * 2.0 * y.range * sensor.bearing_std());
}

namespace {

EssmFilter<MotionModel, SensorModel> make_filter(std::uint64_t seed, const KnowledgeModel& km) {
  const SensorModel sensor;
  return EssmFilter<MotionModel, SensorModel>(
      km, MotionModel(1.0), sensor,
      [sensor](const Observation& y, RandomStream& rng) {
        return pf_init(MeasurementAnchoredInit{20.0, 2.0}, sensor, y, 1000, rng);
      },
      0.5, seed);
}

}  // namespace

TEST(EssmFilter, TracksStraightApproachIntoDanger) {
  const auto km = build_knowledge(one_region(), small_area());
  auto f = make_filter(3, km);
  const SensorModel sensor;
  const MotionModel motion(1.0);
  RandomStream noise(4);
  TargetState s(0, 0, 6000, 20);
  EssmStep last;
  for (std::uint64_t k = 1; k <= 201; ++k) {
    last = f.step(sensor.observe(s, k, &noise));
    EXPECT_EQ(last.k, k);
    EXPECT_NEAR(last.situation.dist.sum(), 1.0, 1e-12);
    s = motion.step(s);
  }
  // Truth at k = 201 sits at the region center (0, 10000).
  EXPECT_LT(std::hypot(last.estimate[0], last.estimate[2] - 10000.0), 100.0);
  EXPECT_EQ(last.situation.dist.argmax(), kDangerIndex);
}

TEST(EssmFilter, IdenticalSeedsGiveBitIdenticalRuns) {
  const auto km = build_knowledge(one_region(), small_area());
  auto run = [&](std::uint64_t seed) {
    auto f = make_filter(seed, km);
    const SensorModel sensor;
    RandomStream noise(8);
    std::vector<double> out;
    for (std::uint64_t k = 1; k <= 20; ++k) {
      const auto r = f.step(sensor.observe(TargetState(0, 0, 7000.0 + 20.0 * k, 20), k, &noise));
      out.push_back(r.situation.dist[0]);
      out.push_back(r.estimate[0]);
    }
    return out;
  };
  const auto a = run(1);
  EXPECT_EQ(a, run(1));
  EXPECT_NE(a, run(2));
}

TEST(EssmFilter, RejectsMissingInitializerOrWrongDimension) {
  const auto km = build_knowledge(one_region(), small_area());
  EXPECT_THROW((EssmFilter<MotionModel, SensorModel>(km, MotionModel(), SensorModel(), nullptr, 0.5, 1)),
               std::invalid_argument);
  EssmFilter<MotionModel, SensorModel> f(
      km, MotionModel(), SensorModel(),
      [](const Observation&, RandomStream&) { return ParticleSet(Matrix::Zero(2, 10)); }, 0.5, 1);
  EXPECT_THROW(f.step(Observation{1, 1.0, 1000.0}), std::invalid_argument);
}
