#include "rbcv/dumbbell.hpp"
#include "rbcv/estimators.hpp"
#include "rbcv/sde.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rbcv;

namespace {

SdeSpec scalar_spec(double theta, double sigma, double x0, double horizon, int steps) {
  SdeSpec spec;
  spec.dimension = 1;
  spec.horizon = horizon;
  spec.steps = steps;
  spec.initial = Vector::Constant(1, x0);
  spec.drift = [theta](double, const VectorCRef& x, VectorRef out) { out(0) = -theta * x(0); };
  spec.diffusion = [sigma](double, const VectorCRef&, MatrixRef out) { out(0, 0) = sigma; };
  return spec;
}

OutputFunctional identity_output() {
  OutputFunctional out;
  out.terminal = [](const VectorCRef& x) { return x(0); };
  return out;
}

}  // namespace

TEST(Simulate, FrozenDynamics) {
  SdeSpec spec;
  spec.dimension = 2;
  spec.steps = 20;
  spec.initial = Eigen::Vector2d(0.3, -1.7);
  spec.drift = [](double, const VectorCRef&, VectorRef out) { out.setZero(); };
  spec.diffusion = [](double, const VectorCRef&, MatrixRef out) { out.setZero(); };
  OutputFunctional out;
  out.terminal = [](const VectorCRef& x) { return x.sum(); };
  const auto paths = PathBundle::generate(1, 0, 50, 20, 2);
  const auto traj = simulate(spec, paths, out);
  for (Eigen::Index m = 0; m < 50; ++m) {
    EXPECT_EQ(traj.terminal(m, 0), 0.3);
    EXPECT_EQ(traj.terminal(m, 1), -1.7);
  }
}

TEST(Simulate, BrownianVariance) {
  const double horizon = 2.0;
  const auto spec = scalar_spec(0.0, 1.0, 0.0, horizon, 10);
  const auto paths = PathBundle::generate(7, 0, 100000, 10, 1);
  const Vector x = simulate(spec, paths, identity_output()).functional;
  const double var = empirical_var(x);
  // CLT half-width of the variance estimator from the fourth central moment.
  const Vector centered = x.array() - x.mean();
  const double fourth = centered.array().pow(4).mean();
  const double hw = 1.96 * std::sqrt((fourth - var * var) / 1e5);
  EXPECT_NEAR(var, horizon, hw);
}

TEST(Simulate, OrnsteinUhlenbeckMoments) {
  const double dt = 1e-2;
  const auto spec = scalar_spec(1.0, std::sqrt(2.0), 1.0, 1.0, 100);
  const auto paths = PathBundle::generate(3, 0, 100000, 100, 1);
  const auto rep = confidence_interval(simulate(spec, paths, identity_output()).functional);
  const auto exact = ou_exact_moments(1.0, std::sqrt(2.0), 1.0, 1.0);
  EXPECT_NEAR(rep.mean, exact.mean, rep.half_width + 2 * dt);
  EXPECT_NEAR(rep.variance / exact.variance, 1.0, 0.03);
}

TEST(Simulate, CommonRandomNumbersAreBitIdentical) {
  const auto spec = scalar_spec(0.7, 0.4, 1.0, 1.0, 50);
  const auto paths = PathBundle::generate(5, 2, 200, 50, 1);
  const auto a = simulate(spec, paths, identity_output());
  const auto b = simulate(spec, paths, identity_output());
  EXPECT_TRUE((a.functional.array() == b.functional.array()).all());
  const auto regenerated = PathBundle::generate(5, 2, 200, 50, 1);
  EXPECT_TRUE((regenerated.data().array() == paths.data().array()).all());
}

TEST(Simulate, DifferentParametersShareGaussians) {
  // With theta = 0 the terminal value is x0 + sigma * sqrt(dt) * sum G, so two
  // sigmas on one bundle must be exact rescalings of each other.
  const auto paths = PathBundle::generate(5, 0, 100, 25, 1);
  const auto a = simulate(scalar_spec(0.0, 1.0, 0.0, 1.0, 25), paths, identity_output());
  const auto b = simulate(scalar_spec(0.0, 0.5, 0.0, 1.0, 25), paths, identity_output());
  for (Eigen::Index m = 0; m < 100; ++m) EXPECT_NEAR(b.functional(m), 0.5 * a.functional(m), 1e-14);
}

TEST(PathBundle, ChunksMatchWholeBundle) {
  const auto whole = PathBundle::generate(11, 4, 30, 7, 2);
  const auto head = PathBundle::generate(11, 4, 10, 7, 2, 0);
  const auto tail = PathBundle::generate(11, 4, 20, 7, 2, 10);
  EXPECT_TRUE((whole.data().leftCols(10).array() == head.data().array()).all());
  EXPECT_TRUE((whole.data().rightCols(20).array() == tail.data().array()).all());
}

TEST(PathBundle, ShapeMismatchIsRejected) {
  const auto spec = scalar_spec(1.0, 1.0, 0.0, 1.0, 10);
  const auto paths = PathBundle::generate(1, 0, 5, 11, 1);
  EXPECT_THROW(simulate(spec, paths, identity_output()), std::invalid_argument);
}

TEST(Simulate, ZeroIntegrandIsExactlyZero) {
  const auto spec = scalar_spec(1.0, 2.0, 1.0, 1.0, 40);
  const auto paths = PathBundle::generate(9, 0, 300, 40, 1);
  const std::vector<Integrand> integrands{[](double, const VectorCRef&, VectorRef out) { out.setZero(); }};
  const auto traj = simulate(spec, paths, identity_output(), integrands);
  EXPECT_TRUE((traj.integrals.array() == 0.0).all());
}

TEST(Simulate, ItoSumUsesLeftEndpoint) {
  // h(t, x) = x along Brownian motion: the discrete sum is sum B_n dB_n exactly.
  const int steps = 16;
  const auto spec = scalar_spec(0.0, 1.0, 0.0, 1.0, steps);
  const auto paths = PathBundle::generate(21, 0, 4, steps, 1);
  const std::vector<Integrand> integrands{[](double, const VectorCRef& x, VectorRef out) { out = x; }};
  const auto traj = simulate(spec, paths, identity_output(), integrands);
  const double sqrt_dt = std::sqrt(1.0 / steps);
  for (Eigen::Index m = 0; m < 4; ++m) {
    double b = 0.0, sum = 0.0;
    for (int n = 0; n < steps; ++n) {
      const double db = sqrt_dt * paths.increment(m, n)(0);
      sum += b * db;
      b += db;
    }
    EXPECT_NEAR(traj.integrals(m, 0), sum, 1e-14);
  }
}

TEST(Simulate, RunningCostUsesLeftEndpoint) {
  auto spec = scalar_spec(0.0, 0.0, 2.0, 1.0, 4);
  spec.drift = [](double, const VectorCRef&, VectorRef out) { out(0) = 1.0; };
  OutputFunctional out;
  out.terminal = [](const VectorCRef&) { return 0.0; };
  out.running = [](double, const VectorCRef& x) { return x(0); };
  const auto paths = PathBundle::generate(1, 0, 1, 4, 1);
  // X_n = 2 + n/4 at n = 0..3, Z = -(2 + 2.25 + 2.5 + 2.75) / 4.
  EXPECT_NEAR(simulate(spec, paths, out).functional(0), -9.5 / 4.0, 1e-15);
}

TEST(Simulate, NonFiniteStateAborts) {
  SdeSpec spec = scalar_spec(0.0, 0.0, 1e200, 1.0, 10);
  spec.drift = [](double, const VectorCRef& x, VectorRef out) { out(0) = x(0) * x(0); };
  const auto paths = PathBundle::generate(1, 0, 3, 10, 1);
  try {
    simulate(spec, paths, identity_output());
    FAIL() << "expected SimulationError";
  } catch (const SimulationError& e) {
    EXPECT_EQ(e.replicate(), 0);
    EXPECT_EQ(e.step(), 1);
  }
}

TEST(Simulate, WeakOrderOne) {
  // Small noise keeps the statistical error far below the O(dt) bias.
  const double exact = std::exp(-1.0);
  double errors[3];
  const int steps[3] = {50, 100, 200};
  for (int k = 0; k < 3; ++k) {
    const auto spec = scalar_spec(1.0, 0.01, 1.0, 1.0, steps[k]);
    const auto paths = PathBundle::generate(13, 0, 100000, steps[k], 1);
    errors[k] = std::abs(empirical_mean(simulate(spec, paths, identity_output()).functional) - exact);
  }
  EXPECT_NEAR(errors[0] / errors[1], 2.0, 0.4);
  EXPECT_NEAR(errors[1] / errors[2], 2.0, 0.4);
}

TEST(ReflectBall, InteriorUnchanged) {
  const Vector x = Eigen::Vector2d(1.0, 1.0);
  const auto r = reflect_ball(x, 2.0);
  EXPECT_EQ(r.point, x);
  EXPECT_FALSE(r.clamped);
}

TEST(ReflectBall, RadialReflection) {
  const double radius = 3.0;
  const auto r = reflect_ball(Eigen::Vector2d(1.1 * radius, 0.0), radius);
  EXPECT_NEAR(r.point(0), 0.9 * radius, 1e-14);
  EXPECT_EQ(r.point(1), 0.0);
  EXPECT_FALSE(r.clamped);
}

TEST(ReflectBall, BoundaryIsPulledInside) {
  const double radius = 2.0;
  const auto r = reflect_ball(Eigen::Vector2d(0.0, radius), radius);
  EXPECT_NEAR(r.point.norm(), radius * (1.0 - kReflectionMargin), 1e-15);
}

TEST(ReflectBall, PathologicalStepIsClampedAndFlagged) {
  const double radius = 1.0;
  const auto r = reflect_ball(Eigen::Vector2d(-2.5, 0.0), radius);
  EXPECT_TRUE(r.clamped);
  EXPECT_NEAR(r.point(0), -radius * (1.0 - kReflectionMargin), 1e-15);
}

TEST(ReflectBall, IdempotentOnInteriorPoints) {
  const auto once = reflect_ball(Eigen::Vector2d(3.5, 0.0), 3.0);
  const auto twice = reflect_ball(once.point, 3.0);
  EXPECT_EQ(once.point, twice.point);
}

TEST(Simulate, ReflectedStatesStayInsideBall) {
  DumbbellParams p;
  p.spring = Spring::fene;
  p.b_ext = 4.0;
  p.free_entries = Eigen::Vector3d(1.0, 1.0, 1.0);
  const auto spec = dumbbell_sde_spec(p, 100);
  OutputFunctional out;
  out.terminal = [](const VectorCRef& x) { return x.norm(); };
  const auto paths = PathBundle::generate(17, 0, 2000, 100, 2);
  const auto traj = simulate(spec, paths, out, {}, {.store_states = true});
  for (Eigen::Index m = 0; m < 2000; ++m)
    for (int n = 0; n <= 100; ++n)
      ASSERT_LT(traj.states.row(m).segment(2 * n, 2).norm(), 2.0);
}
