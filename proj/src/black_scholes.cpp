#include "rbcv/black_scholes.hpp"

#include <cmath>
#include <stdexcept>

namespace rbcv {

HyperbolicVolParams HyperbolicVolParams::from_vector(const VectorCRef& lambda, double s0,
                                                     double rate) {
  if (lambda.size() != kDimension)
    throw std::invalid_argument("HyperbolicVolParams: expected 7 parameters");
  HyperbolicVolParams p;
  p.a = lambda(0);
  p.b = lambda(1);
  p.c = lambda(2);
  p.d = lambda(3);
  p.alpha = lambda(4);
  p.gamma = lambda(5);
  p.c_min = lambda(6);
  p.s0 = s0;
  p.rate = rate;
  return p;
}

Vector HyperbolicVolParams::to_vector() const {
  Vector v(kDimension);
  v << a, b, c, d, alpha, gamma, c_min;
  return v;
}

void HyperbolicVolParams::validate() const {
  if (!(c_min > 0.0)) throw std::invalid_argument("hyperbolic vol: C_min must be > 0");
  if (!(alpha > 0.0)) throw std::invalid_argument("hyperbolic vol: alpha must be > 0");
  if (!(gamma >= 0.0)) throw std::invalid_argument("hyperbolic vol: Gamma must be >= 0");
  if (!(s0 > 0.0)) throw std::invalid_argument("hyperbolic vol: S0 must be > 0");
}

HyperbolicVol::HyperbolicVol(const HyperbolicVolParams& params)
    : params_(params), log_forward_base_(std::log(params.alpha * params.s0)) {
  params_.validate();
  inverse_atm_skew_ = 1.0 / skew(0.0, params_.s0);
}

double HyperbolicVol::skew_from_log_moneyness(double x) const {
  const auto& p = params_;
  const double spread = p.b - p.c;
  const double c_a = p.a + 0.5 * std::sqrt(spread * spread * x * x + 4.0 * p.a * p.a * p.d * p.d) +
                     0.5 * (p.b + p.c) * x;
  return 0.5 * (std::sqrt(c_a * c_a + p.c_min * p.c_min) + c_a);
}

double HyperbolicVol::skew(double t, double s) const {
  if (!(s > 0.0)) throw std::invalid_argument("hyperbolic vol: S must be > 0");
  return skew_from_log_moneyness(std::log(s) - log_forward_base_ - params_.rate * t);
}

double HyperbolicVol::operator()(double t, double s) const {
  const double g = params_.gamma;
  return (g + 1.0) / (inverse_atm_skew_ + g / skew(t, s));
}

double hyperbolic_vol(const HyperbolicVolParams& params, double t, double s) {
  return HyperbolicVol(params)(t, s);
}

double BsOutputSpec::payoff(double s) const {
  return std::exp(-rate * horizon) * std::max(s - strike, 0.0);
}

void BsOutputSpec::validate() const {
  if (!(strike > 0.0)) throw std::invalid_argument("BsOutputSpec: strike must be > 0");
  if (!(horizon > 0.0)) throw std::invalid_argument("BsOutputSpec: horizon must be > 0");
}

SdeSpec bs_sde_spec(const LocalVolFn& vol, double s0, const BsOutputSpec& output, int steps) {
  output.validate();
  SdeSpec spec;
  spec.dimension = 1;
  spec.horizon = output.horizon;
  spec.steps = steps;
  spec.initial = Vector::Constant(1, s0);
  const double rate = output.rate;
  spec.drift = [rate](double, const VectorCRef& x, VectorRef out) { out(0) = rate * x(0); };
  spec.diffusion = [vol](double t, const VectorCRef& x, MatrixRef out) {
    const double s = x(0);
    out(0, 0) = s > 0.0 ? vol(t, s) * s : 0.0;
  };
  return spec;
}

SdeSpec bs_sde_spec(const HyperbolicVolParams& params, const BsOutputSpec& output, int steps) {
  const HyperbolicVol vol(params);
  return bs_sde_spec([vol](double t, double s) { return vol(t, s); }, params.s0, output, steps);
}

double black_scholes_call(double spot, double strike, double rate, double vol, double horizon) {
  const double sd = vol * std::sqrt(horizon);
  const double d1 = (std::log(spot / strike) + (rate + 0.5 * vol * vol) * horizon) / sd;
  const double d2 = d1 - sd;
  const auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  return spot * cdf(d1) - strike * std::exp(-rate * horizon) * cdf(d2);
}

}  // namespace rbcv
