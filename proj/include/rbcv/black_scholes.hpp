#pragma once

#include "rbcv/sde.hpp"

#include <functional>

namespace rbcv {

/// Local volatility sigma(t, S).
using LocalVolFn = std::function<double(double t, double s)>;

/// The 7-parameter "hyperbolic" local volatility (a, b, c, d, alpha, Gamma, C_min)
/// together with the spot and rate that enter its log-moneyness.
struct HyperbolicVolParams {
  double a = 0.0;
  double b = 1.0;
  double c = 1.0;
  double d = 1.0;
  double alpha = 1.1;
  double gamma = 5.0;
  double c_min = 0.05;
  double s0 = 90.0;
  double rate = 0.04;

  static constexpr Eigen::Index kDimension = 7;

  /// Reads (a, b, c, d, alpha, Gamma, C_min) from a parameter vector.
  static HyperbolicVolParams from_vector(const VectorCRef& lambda, double s0, double rate);
  Vector to_vector() const;
  void validate() const;
};

/// Evaluates the hyperbolic volatility with C(0, S0) and log(alpha S0) cached.
class HyperbolicVol {
 public:
  explicit HyperbolicVol(const HyperbolicVolParams& params);

  double operator()(double t, double s) const;
  /// C(t, S) = (sqrt(C_A^2 + C_min^2) + C_A) / 2.
  double skew(double t, double s) const;
  const HyperbolicVolParams& params() const { return params_; }

 private:
  double skew_from_log_moneyness(double log_moneyness) const;

  HyperbolicVolParams params_;
  double log_forward_base_;
  double inverse_atm_skew_;
};

/// sigma(t, S) = (Gamma + 1) / (1 / C(0, S0) + Gamma / C(t, S)); throws for S <= 0.
double hyperbolic_vol(const HyperbolicVolParams& params, double t, double s);

/// European call: discounted payoff g(S) = exp(-r T) max(S - K, 0).
struct BsOutputSpec {
  double strike = 100.0;
  double horizon = 1.0;
  double rate = 0.04;

  double payoff(double s) const;
  void validate() const;
};

/// dS = r S dt + sigma(t, S) S dB on [0, T] with N steps; S <= 0 is absorbing.
SdeSpec bs_sde_spec(const LocalVolFn& vol, double s0, const BsOutputSpec& output, int steps);
SdeSpec bs_sde_spec(const HyperbolicVolParams& params, const BsOutputSpec& output, int steps);

/// Closed-form Black-Scholes call price at time 0 with constant volatility.
double black_scholes_call(double spot, double strike, double rate, double vol, double horizon);

}  // namespace rbcv
