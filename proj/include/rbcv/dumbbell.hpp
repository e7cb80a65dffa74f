#pragma once

#include "rbcv/sde.hpp"

namespace rbcv {

enum class Spring { hookean, fene };

/// Dumbbell in a homogeneous flow: dX = (lambda X - F(X)) dt + dB.
///
/// The velocity gradient is trace-free and stored through its d^2 - 1 free
/// entries in row-major order with the last diagonal entry omitted, e.g.
/// (l11, l12, l21) in 2D with l22 = -l11.
struct DumbbellParams {
  Eigen::Index dimension = 2;
  Vector free_entries = Vector::Zero(3);
  Spring spring = Spring::hookean;
  double b_ext = 9.0;        ///< FENE extensibility; |X| < sqrt(b_ext).
  int component_i = 0;       ///< Stress component (i, j), zero-based.
  int component_j = 1;
  Vector initial = Vector::Ones(2);
  double horizon = 1.0;

  /// Full d x d velocity gradient; its trace is exactly zero.
  Matrix velocity_gradient() const;
  static Vector free_entries_of(const Matrix& lambda);
  double radius() const;  ///< sqrt(b_ext) for FENE.
  void validate() const;
};

/// F(X) = X (Hookean) or X / (1 - |X|^2 / b_ext) (FENE).
void spring_force(const DumbbellParams& params, const VectorCRef& x, VectorRef out);

/// Kramers stress payoff g(X) = X_i F_j(X).
double kramers_payoff(const DumbbellParams& params, const VectorCRef& x);

/// Euler-ready SDE; FENE gets a reflecting ball of radius sqrt(b_ext).
SdeSpec dumbbell_sde_spec(const DumbbellParams& params, int steps);

/// Closed-form mean and variance of dX = -theta X dt + sigma dB at time T.
struct OuMoments {
  double mean;
  double variance;
};
OuMoments ou_exact_moments(double theta, double sigma, double x0, double horizon);

}  // namespace rbcv
