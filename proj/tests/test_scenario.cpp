#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "saw/scenario.hpp"
#include "test_util.hpp"

using namespace saw;

namespace {

ScenarioConfig line_config() {
  ScenarioConfig cfg;
  cfg.area = {-5000, 5000, 0, 10000};
  cfg.regions = RegionSet({{Vector2(0, 5000), 500}}, 3.0);
  cfg.waypoints = {Vector2(-4000, 5000), Vector2(4000, 5000)};
  cfg.segment_steps = {80};
  cfg.steps = 81;
  return cfg;
}

}  // namespace

TEST(MotionStep, ConstantVelocityExample) {
  const auto out = MotionModel(1.0).step(TargetState(0, 1, 0, 1));
  EXPECT_EQ(out.v, Vector4(1, 1, 1, 1));
}

TEST(MotionStep, ZeroVelocityStaysPut) {
  const TargetState s(123, 0, -45, 0);
  EXPECT_EQ(MotionModel(2.0).step(s).v, s.v);
}

TEST(MotionStep, ProcessCovarianceMatchesGainForm) {
  for (bool literal : {false, true}) {
    const MotionModel m(0.5, 10.0, literal);
    const Eigen::Matrix<double, 4, 2> b = m.gain();
    const Eigen::Matrix4d q = b * (10.0 * Eigen::Matrix2d::Identity()) * b.transpose();
    EXPECT_LT((m.process_covariance() - q).norm(), 1e-15);
  }
  const MotionModel std_b(2.0);
  EXPECT_EQ(std_b.gain()(0, 0), 2.0);
  EXPECT_EQ(std_b.gain()(1, 0), 2.0);
  const MotionModel lit_b(2.0, 10.0, true);
  EXPECT_EQ(lit_b.gain()(0, 0), 2.0);
  EXPECT_EQ(lit_b.gain()(2, 0), 2.0);
  EXPECT_EQ(lit_b.gain()(1, 1), 2.0);
}

TEST(MotionStep, SampleCovarianceMatchesQ) {
  const MotionModel m(1.0);
  RandomStream rng(7);
  const TargetState s(10, 2, -3, 1);
  const Vector4 mean = m.step(s).v;
  Eigen::Matrix4d acc = Eigen::Matrix4d::Zero();
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Vector4 d = m.step(s, &rng).v - mean;
    acc += d * d.transpose();
  }
  acc /= n;
  EXPECT_LT((acc - m.process_covariance()).norm(), 0.05 * m.process_covariance().norm());
}

TEST(MotionStepProperties, NoiselessStepIsLinear) {
  RandomStream gen(3);
  const MotionModel m(1.7);
  for (int t = 0; t < 200; ++t) {
    const Vector4 a = Vector4::Random() * 1000;
    const Vector4 b = Vector4::Random() * 1000;
    const double alpha = gen.normal();
    const Vector4 lhs = m.step(TargetState(Vector4(a + alpha * b))).v;
    const Vector4 rhs = m.step(TargetState(a)).v + alpha * m.step(TargetState(b)).v;
    EXPECT_LT((lhs - rhs).norm(), 1e-9 * (1.0 + lhs.norm()));
  }
}

TEST(Observe, NoiselessBearingAndRange) {
  const SensorModel sensor;
  const auto east = sensor.observe(TargetState(1000, 0, 0, 0));
  EXPECT_DOUBLE_EQ(east.bearing, 0.0);
  EXPECT_DOUBLE_EQ(east.range, 1000.0);
  const auto north = sensor.observe(TargetState(0, 0, 1000, 0));
  EXPECT_DOUBLE_EQ(north.bearing, std::numbers::pi / 2.0);
  EXPECT_DOUBLE_EQ(north.range, 1000.0);
}

TEST(Observe, CoincidentTargetThrows) {
  const SensorModel sensor(Vector2(5, 5), 0.01, 1.0);
  EXPECT_THROW((void)sensor.observe(TargetState(5, 0, 5, 0)), std::domain_error);
  EXPECT_TRUE(sensor.evaluate(Observation{0, 0.0, 1.0}, 5.0, 5.0).coincident);
}

TEST(Observe, NoiseStandardDeviationsMatch) {
  const SensorModel sensor;
  RandomStream rng(11);
  const TargetState s(3000, 0, 4000, 0);
  const auto clean = sensor.observe(s);
  double sb = 0.0;
  double sr = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto y = sensor.observe(s, 0, &rng);
    sb += std::pow(wrap_angle(y.bearing - clean.bearing), 2);
    sr += std::pow(y.range - clean.range, 2);
  }
  EXPECT_NEAR(std::sqrt(sb / n), sensor.bearing_std(), 0.02 * sensor.bearing_std());
  EXPECT_NEAR(std::sqrt(sr / n), sensor.range_std(), 0.02 * sensor.range_std());
}

TEST(Likelihood, PeakAndOneSigmaValues) {
  const SensorModel sensor;
  const TargetState s(0, 0, 8000, 0);
  const auto y = sensor.observe(s);
  const double peak = 1.0 / (2.0 * std::numbers::pi * sensor.bearing_std() * sensor.range_std());
  EXPECT_NEAR(sensor.likelihood(y, s), peak, 1e-12 * peak);
  Observation off = y;
  off.range += sensor.range_std();
  EXPECT_NEAR(sensor.likelihood(off, s), peak * std::exp(-0.5), 1e-12 * peak);
}

TEST(Likelihood, BearingResidualWrapsAroundPi) {
  const SensorModel sensor;
  const TargetState s(-1000, 0, 1e-9, 0);  // bearing just below pi
  Observation y = sensor.observe(s);
  const double base = sensor.likelihood(y, s);
  y.bearing -= 2.0 * std::numbers::pi;
  EXPECT_NEAR(sensor.likelihood(y, s), base, 1e-9 * base);
  const TargetState below(-1000, 0, -1e-9, 0);
  EXPECT_NEAR(sensor.likelihood(sensor.observe(s), below), base, 1e-6 * base);
}

TEST(Likelihood, NoiselessObservationIsGridMaximum) {
  const SensorModel sensor;
  const TargetState s(2000, 0, 9000, 0);
  const auto y = sensor.observe(s);
  const double at_truth = sensor.likelihood(y, s);
  for (int i = -10; i <= 10; ++i)
    for (int j = -10; j <= 10; ++j) {
      if (i == 0 && j == 0) continue;
      EXPECT_LT(sensor.likelihood(y, TargetState(2000 + 5.0 * i, 0, 9000 + 5.0 * j, 0)), at_truth);
    }
}

TEST(GenerateTruth, StraightLineWithoutNoise) {
  const auto cfg = line_config();
  RandomStream rng(1);
  const auto truth = generate_truth(cfg, rng);
  ASSERT_EQ(truth.size(), 81u);
  for (std::size_t k = 0; k < truth.size(); ++k) {
    EXPECT_NEAR(truth[k].x(), -4000.0 + 100.0 * static_cast<double>(k), 1e-9);
    EXPECT_EQ(truth[k].y(), 5000.0);
  }
}

TEST(GenerateTruth, DeterministicUnderProcessNoise) {
  auto cfg = line_config();
  cfg.process_noise_on = true;
  RandomStream a(5);
  RandomStream b(5);
  RandomStream c(6);
  const auto ta = generate_truth(cfg, a);
  const auto tb = generate_truth(cfg, b);
  const auto tc = generate_truth(cfg, c);
  bool differs = false;
  for (std::size_t k = 0; k < ta.size(); ++k) {
    EXPECT_EQ(ta[k].v, tb[k].v);
    differs = differs || ta[k].v != tc[k].v;
  }
  EXPECT_TRUE(differs);
}

TEST(GenerateTruth, PathThroughCenterIsLabelledDanger) {
  const auto cfg = line_config();
  RandomStream rng(1);
  const auto labels = build_labels(cfg.regions, generate_truth(cfg, rng));
  EXPECT_EQ(labels.front(), kSafeIndex);
  EXPECT_EQ(labels[40], kDangerIndex);
  EXPECT_EQ(labels.back(), kSafeIndex);
  // 1500 m from the center with radius 500 and kappa 3: potential danger.
  EXPECT_EQ(labels[25], kPotentialIndex);
}

TEST(GenerateTruth, InconsistentStepCountThrows) {
  auto cfg = line_config();
  cfg.steps = 80;
  RandomStream rng(1);
  EXPECT_THROW((void)generate_truth(cfg, rng), std::invalid_argument);
}

TEST(LabelPosition, Boundaries) {
  const RegionSet regions({{Vector2(0, 0), 1000}}, 3.0);
  EXPECT_EQ(label_position(regions, Vector2(1000, 0)), kDangerIndex);
  EXPECT_EQ(label_position(regions, Vector2(1500, 0)), kPotentialIndex);
  EXPECT_EQ(label_position(regions, Vector2(3000, 0)), kPotentialIndex);
  EXPECT_EQ(label_position(regions, Vector2(3001, 0)), kSafeIndex);
}

TEST(BuildKnowledge, DangerAndPotentialComponents) {
  const RegionSet regions({{Vector2(-6000, 14000), 1000}, {Vector2(0, 9000), 1000}, {Vector2(7000, 13000), 1000}},
                          std::sqrt(10.0));
  const Area area{-12000, 12000, 5000, 21000};
  const auto km = build_knowledge(regions, area);
  const auto& danger = km.mixture(kDanger);
  const auto& potential = km.mixture(kPotentialDanger);
  ASSERT_EQ(danger.size(), 3u);
  ASSERT_EQ(potential.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(danger.component(i).weight, 1.0 / 3.0, 1e-15);
    EXPECT_EQ(danger.component(i).covariance(0, 0), 250000.0);
    EXPECT_EQ(danger.component(i).covariance(0, 1), 0.0);
    EXPECT_EQ(potential.component(i).covariance(1, 1), 2500000.0);
    EXPECT_EQ(potential.component(i).mean, danger.component(i).mean);
  }

  // Safe density is suppressed at the region centers relative to the open area.
  const auto& safe = km.mixture(kSafe);
  double far = 0.0;
  for (std::size_t i = 0; i < safe.size(); ++i) {
    const Vector2 p = safe.component(i).mean;
    far = std::max(far, safe.density(std::vector<double>{p.x(), p.y()}));
  }
  for (const auto& r : regions.regions())
    EXPECT_LT(safe.density(std::vector<double>{r.center.x(), r.center.y()}), 0.1 * far);

  double total = 0.0;
  for (std::size_t i = 0; i < safe.size(); ++i) total += safe.component(i).weight;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(BuildKnowledge, RejectsDegenerateInputs) {
  const RegionSet regions({{Vector2(0, 0), 1000}}, 2.0);
  EXPECT_THROW((void)build_knowledge(regions, Area{5000, 6000, 5000, 6000}), std::invalid_argument);
  EXPECT_THROW((void)build_knowledge(regions, Area{-1000, 1000, -1000, 1000}, SafeGrid{-1, 1}), std::invalid_argument);
  EXPECT_THROW(RegionSet({{Vector2(0, 0), 1000}}, 1.0), std::invalid_argument);
}
