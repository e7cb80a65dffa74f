#include "rbcv/dumbbell.hpp"

#include <cmath>
#include <stdexcept>

namespace rbcv {

Matrix DumbbellParams::velocity_gradient() const {
  const Eigen::Index d = dimension;
  if (free_entries.size() != d * d - 1)
    throw std::invalid_argument("DumbbellParams: expected d^2 - 1 free entries");
  Matrix lambda(d, d);
  Eigen::Index k = 0;
  double diagonal_sum = 0.0;
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) {
      if (r == d - 1 && c == d - 1) continue;
      lambda(r, c) = free_entries(k++);
      if (r == c) diagonal_sum += lambda(r, c);
    }
  }
  lambda(d - 1, d - 1) = -diagonal_sum;
  return lambda;
}

Vector DumbbellParams::free_entries_of(const Matrix& lambda) {
  const Eigen::Index d = lambda.rows();
  Vector v(d * d - 1);
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c)
      if (!(r == d - 1 && c == d - 1)) v(k++) = lambda(r, c);
  return v;
}

double DumbbellParams::radius() const { return std::sqrt(b_ext); }

void DumbbellParams::validate() const {
  if (dimension < 1) throw std::invalid_argument("DumbbellParams: dimension must be positive");
  if (free_entries.size() != dimension * dimension - 1)
    throw std::invalid_argument("DumbbellParams: expected d^2 - 1 free entries");
  if (initial.size() != dimension)
    throw std::invalid_argument("DumbbellParams: initial condition has wrong dimension");
  if (component_i < 0 || component_i >= dimension || component_j < 0 || component_j >= dimension)
    throw std::invalid_argument("DumbbellParams: stress component out of range");
  if (!(horizon > 0.0)) throw std::invalid_argument("DumbbellParams: horizon must be > 0");
  if (spring == Spring::fene) {
    if (!(b_ext > 0.0)) throw std::invalid_argument("DumbbellParams: b_ext must be > 0");
    if (initial.norm() >= radius())
      throw std::invalid_argument("DumbbellParams: FENE initial condition outside sqrt(b_ext) ball");
  }
}

void spring_force(const DumbbellParams& params, const VectorCRef& x, VectorRef out) {
  if (params.spring == Spring::hookean) {
    out = x;
    return;
  }
  out = x / (1.0 - x.squaredNorm() / params.b_ext);
}

double kramers_payoff(const DumbbellParams& params, const VectorCRef& x) {
  const double xi = x(params.component_i);
  const double xj = x(params.component_j);
  if (params.spring == Spring::hookean) return xi * xj;
  return xi * xj / (1.0 - x.squaredNorm() / params.b_ext);
}

SdeSpec dumbbell_sde_spec(const DumbbellParams& params, int steps) {
  params.validate();
  SdeSpec spec;
  spec.dimension = params.dimension;
  spec.horizon = params.horizon;
  spec.steps = steps;
  spec.initial = params.initial;
  const Matrix lambda = params.velocity_gradient();
  if (params.spring == Spring::hookean) {
    const Matrix linear = lambda - Matrix::Identity(params.dimension, params.dimension);
    spec.drift = [linear](double, const VectorCRef& x, VectorRef out) { out.noalias() = linear * x; };
  } else {
    const double b_ext = params.b_ext;
    spec.drift = [lambda, b_ext](double, const VectorCRef& x, VectorRef out) {
      out.noalias() = lambda * x;
      out -= x / (1.0 - x.squaredNorm() / b_ext);
    };
    spec.boundary = ReflectingBall{params.radius()};
  }
  spec.diffusion = [](double, const VectorCRef&, MatrixRef out) { out.setIdentity(); };
  return spec;
}

OuMoments ou_exact_moments(double theta, double sigma, double x0, double horizon) {
  const double mean = x0 * std::exp(-theta * horizon);
  // sigma^2 (1 - e^{-2 theta T}) / (2 theta), with the Brownian limit at theta -> 0.
  const double variance = std::abs(theta * horizon) < 1e-12
                              ? sigma * sigma * horizon
                              : sigma * sigma * (-std::expm1(-2.0 * theta * horizon)) / (2.0 * theta);
  return {mean, variance};
}

}  // namespace rbcv
