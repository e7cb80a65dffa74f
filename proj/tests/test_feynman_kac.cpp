#include "rbcv/dumbbell.hpp"
#include "rbcv/feynman_kac.hpp"
#include "rbcv/kolmogorov.hpp"

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

using namespace rbcv;

namespace {

SdeSpec linear_spec(const Matrix& a, double horizon, int steps) {
  SdeSpec spec;
  spec.dimension = a.rows();
  spec.horizon = horizon;
  spec.steps = steps;
  spec.initial = Vector::Zero(a.rows());
  spec.drift = [a](double, const VectorCRef& x, VectorRef out) { out.noalias() = a * x; };
  spec.diffusion = [](double, const VectorCRef&, MatrixRef out) { out.setIdentity(); };
  return spec;
}

DriftJacobianFn constant_jacobian(const Matrix& a) {
  const Matrix at = a.transpose();
  return [at](double, const VectorCRef&, MatrixRef out) { out = at; };
}

Matrix sample_a() {
  Matrix a(2, 2);
  a << -0.5, 0.8, -0.3, 0.2;
  return a;
}

}  // namespace

TEST(FirstVariation, ZeroJacobianGivesIdentity) {
  const auto spec = linear_spec(Matrix::Zero(3, 3), 1.0, 30);
  const auto state = simulate_first_variation(spec, PathBundle::generate(1, 0, 20, 30, 3),
                                              constant_jacobian(Matrix::Zero(3, 3)));
  for (const auto& phi : state.phi) EXPECT_EQ(phi, Matrix::Identity(3, 3));
}

TEST(FirstVariation, LinearDriftTendsToTransposedExponential) {
  const Matrix a = sample_a();
  const int steps = 2000;
  const auto spec = linear_spec(a, 1.0, steps);
  const auto state = simulate_first_variation(spec, PathBundle::generate(2, 0, 3, steps, 2), constant_jacobian(a));
  Matrix discrete = Matrix::Identity(2, 2);
  const Matrix step = Matrix::Identity(2, 2) + a.transpose() / steps;
  for (int n = 0; n < steps; ++n) discrete = discrete * step;
  const Matrix exact = a.transpose().exp();
  for (const auto& phi : state.phi) {
    EXPECT_LT((phi - discrete).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((phi - exact).cwiseAbs().maxCoeff(), 5.0 * a.squaredNorm() / steps);
  }
}

TEST(FirstVariation, OrnsteinUhlenbeckDecay) {
  const double theta = 1.0;
  Matrix a(1, 1);
  a(0, 0) = -theta;
  const int steps = 1000;
  const auto state = simulate_first_variation(linear_spec(a, 1.0, steps), PathBundle::generate(3, 0, 5, steps, 1),
                                              constant_jacobian(a));
  for (const auto& phi : state.phi) EXPECT_NEAR(phi(0, 0), std::exp(-theta), 1e-3);
}

TEST(FirstVariation, GeometricBrownianChainRule) {
  // dX = r X dt + s X dB is linear in x0, so the first variation is X_n / x0
  // step by step, noise included.
  const double r = 0.05, s = 0.4, x0 = 2.0;
  const int steps = 50;
  SdeSpec spec;
  spec.dimension = 1;
  spec.steps = steps;
  spec.initial = Vector::Constant(1, x0);
  spec.drift = [r](double, const VectorCRef& x, VectorRef out) { out(0) = r * x(0); };
  spec.diffusion = [s](double, const VectorCRef& x, MatrixRef out) { out(0, 0) = s * x(0); };
  const auto grad_b = [r](double, const VectorCRef&, MatrixRef out) { out(0, 0) = r; };
  const auto grad_sigma = [s](double, const VectorCRef&, Eigen::Index, MatrixRef out) { out(0, 0) = s; };
  const auto state = simulate_first_variation(spec, PathBundle::generate(4, 0, 100, steps, 1), grad_b, grad_sigma,
                                              {.store_path = true});
  for (Eigen::Index m = 0; m < 100; ++m) {
    const auto mm = static_cast<std::size_t>(m);
    EXPECT_NEAR(state.phi[mm](0, 0), state.terminal(m, 0) / x0, 1e-12 * std::abs(state.terminal(m, 0)));
    ASSERT_EQ(state.phi_path[mm].size(), static_cast<std::size_t>(steps + 1));
    EXPECT_EQ(state.phi_path[mm].front(), Matrix::Identity(1, 1));
    EXPECT_EQ(state.phi_path[mm].back(), state.phi[mm]);
    for (int n = 0; n <= steps; ++n)
      EXPECT_NEAR(state.phi_path[mm][static_cast<std::size_t>(n)](0, 0), state.states(m, n) / x0,
                  1e-12 * (1.0 + std::abs(state.states(m, n))));
  }
}

TEST(FirstVariation, ReflectingBoundaryIsRejected) {
  DumbbellParams p;
  p.spring = Spring::fene;
  p.b_ext = 9.0;
  const auto spec = dumbbell_sde_spec(p, 10);
  EXPECT_THROW(simulate_first_variation(spec, PathBundle::generate(1, 0, 2, 10, 2), constant_jacobian(Matrix::Zero(2, 2))),
               std::invalid_argument);
}

TEST(GradU, LinearDriftQuadraticPayoff) {
  // u(t, y) = y' P y + c with P = exp(A' tau) Q exp(A tau), so grad u = 2 P y.
  const Matrix a = sample_a();
  Matrix q(2, 2);
  q << 1.0, 0.3, 0.3, 0.5;
  const int steps = 200;
  const auto spec = linear_spec(a, 1.0, steps);
  const Vector y = Eigen::Vector2d(0.7, -0.4);
  const double t = 0.25;
  const auto grad_g = [q](const VectorCRef& x, VectorRef out) { out.noalias() = 2.0 * q * x; };
  const auto est = grad_u_estimate(spec, t, y, constant_jacobian(a), {}, grad_g, {}, 20000, 5);
  const double tau = 1.0 - t;
  const Matrix e = (a * tau).exp();
  const Vector exact = 2.0 * e.transpose() * q * e * y;
  for (Eigen::Index i = 0; i < 2; ++i) {
    const auto& c = est.components[static_cast<std::size_t>(i)];
    EXPECT_EQ(c.mean, est.gradient(i));
    EXPECT_NEAR(est.gradient(i), exact(i), c.half_width + 10.0 / steps) << "component " << i;
  }
}

TEST(GradU, HookeanMatchesRiccatiGradient) {
  DumbbellParams p;
  p.free_entries = Eigen::Vector3d(0.2, 0.6, -0.4);
  const int steps = 200;
  const auto spec = dumbbell_sde_spec(p, steps);
  const Matrix lambda = p.velocity_gradient();
  const Matrix linear = lambda - Matrix::Identity(2, 2);
  const auto grad_g = [](const VectorCRef& x, VectorRef out) {
    out(0) = x(1);
    out(1) = x(0);
  };
  const auto riccati = solve_hookean_kolmogorov(lambda, 0, 1, 1.0, steps);
  const Vector y = Eigen::Vector2d(1.0, 0.5);
  for (double t : {0.0, 0.5}) {
    const auto est = grad_u_estimate(spec, t, y, constant_jacobian(linear), {}, grad_g, {}, 20000, 6);
    Vector exact(2);
    riccati.gradient(t, y, exact);
    for (Eigen::Index i = 0; i < 2; ++i)
      EXPECT_NEAR(est.gradient(i), exact(i), est.components[static_cast<std::size_t>(i)].half_width + 5.0 / steps)
          << "t=" << t << " component " << i;
  }
}

TEST(GradU, RunningCostContribution) {
  // b = 0, f(x) = x: grad u = -(T - t) for every path.
  const auto spec = linear_spec(Matrix::Zero(1, 1), 1.0, 40);
  const auto grad_f = [](double, const VectorCRef&, VectorRef out) { out(0) = 1.0; };
  const auto grad_g = [](const VectorCRef&, VectorRef out) { out.setZero(); };
  const auto est = grad_u_estimate(spec, 0.25, Vector::Zero(1), constant_jacobian(Matrix::Zero(1, 1)), {}, grad_g,
                                   grad_f, 50, 1);
  EXPECT_NEAR(est.gradient(0), -0.75, 1e-14);
  EXPECT_NEAR(est.components[0].variance, 0.0, 1e-28);
}

TEST(GradU, TerminalTimeIsExact) {
  const auto spec = linear_spec(sample_a(), 1.0, 10);
  const Vector y = Eigen::Vector2d(0.3, 1.7);
  const auto grad_g = [](const VectorCRef& x, VectorRef out) { out = x.array().square(); };
  const auto est = grad_u_estimate(spec, 1.0, y, constant_jacobian(sample_a()), {}, grad_g, {}, 10, 1);
  EXPECT_EQ(est.gradient, Vector(y.array().square()));
  EXPECT_EQ(est.components[0].variance, 0.0);
}

TEST(GradU, ZeroPayloadGivesZero) {
  const auto spec = linear_spec(sample_a(), 1.0, 10);
  const auto grad_g = [](const VectorCRef&, VectorRef out) { out.setZero(); };
  const auto est = grad_u_estimate(spec, 0.0, Vector::Ones(2), constant_jacobian(sample_a()), {}, grad_g, {}, 100, 1);
  EXPECT_TRUE((est.gradient.array() == 0.0).all());
}

TEST(GradU, TimeOffGridIsRejected) {
  const auto spec = linear_spec(sample_a(), 1.0, 10);
  const auto grad_g = [](const VectorCRef&, VectorRef out) { out.setZero(); };
  EXPECT_THROW(grad_u_estimate(spec, 0.33, Vector::Ones(2), constant_jacobian(sample_a()), {}, grad_g, {}, 10, 1),
               std::invalid_argument);
  EXPECT_THROW(grad_u_estimate(spec, 1.5, Vector::Ones(2), constant_jacobian(sample_a()), {}, grad_g, {}, 10, 1),
               std::invalid_argument);
}
