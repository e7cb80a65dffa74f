#include "rbcv/models.hpp"

#include "rbcv/random.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace rbcv {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void Model::check_parameter(const VectorCRef& lambda) const {
  if (lambda.size() != parameter_dimension())
    throw std::invalid_argument(name() + ": expected " + std::to_string(parameter_dimension()) +
                                " parameters, got " + std::to_string(lambda.size()));
  if (!lambda.allFinite()) throw std::invalid_argument(name() + ": non-finite parameter");
}

ModelRun run_model(const Model& model, const VectorCRef& lambda, const PathBundle& paths,
                   std::span<const KolmogorovGradient* const> gradients) {
  model.check_parameter(lambda);
  ModelRun run;
  std::vector<Integrand> integrands;
  integrands.reserve(gradients.size());
  auto* queries = &run.gradient_queries;
  auto* clamps = &run.gradient_clamps;
  for (const KolmogorovGradient* g : gradients) {
    integrands.emplace_back([g, queries, clamps](double t, const VectorCRef& x, VectorRef out) {
      ++*queries;
      if (g->gradient(t, x, out)) ++*clamps;
    });
  }
  auto traj = simulate(model.sde(lambda), paths, model.output(lambda), integrands);
  run.z = std::move(traj.functional);
  run.integrals = std::move(traj.integrals);
  return run;
}

BlackScholesModel::BlackScholesModel(Settings settings) : settings_(settings) {
  output_spec().validate();
  if (!(settings_.s0 > 0.0)) throw std::invalid_argument("bs: S0 must be > 0");
  if (settings_.steps <= 0 || settings_.pde_time_steps < 2 || settings_.pde_space_steps < 2)
    throw std::invalid_argument("bs: invalid step counts");
  if (!(settings_.smax_factor > 1.0)) throw std::invalid_argument("bs: smax_factor must be > 1");
}

Eigen::Index BlackScholesModel::parameter_dimension() const {
  return settings_.vol == Vol::hyperbolic ? HyperbolicVolParams::kDimension : 1;
}

std::vector<std::string> BlackScholesModel::parameter_names() const {
  if (settings_.vol == Vol::constant) return {"sigma"};
  return {"a", "b", "c", "d", "alpha", "gamma", "c_min"};
}

BsOutputSpec BlackScholesModel::output_spec() const {
  return {settings_.strike, settings_.horizon, settings_.rate};
}

void BlackScholesModel::check_parameter(const VectorCRef& lambda) const {
  Model::check_parameter(lambda);
  if (settings_.vol == Vol::constant) {
    if (!(lambda(0) > 0.0)) throw std::invalid_argument("bs: volatility must be > 0");
  } else {
    HyperbolicVolParams::from_vector(lambda, settings_.s0, settings_.rate).validate();
  }
}

LocalVolFn BlackScholesModel::volatility(const VectorCRef& lambda) const {
  if (settings_.vol == Vol::constant) {
    const double sigma = lambda(0);
    return [sigma](double, double) { return sigma; };
  }
  const HyperbolicVol vol(HyperbolicVolParams::from_vector(lambda, settings_.s0, settings_.rate));
  return [vol](double t, double s) { return vol(t, s); };
}

SdeSpec BlackScholesModel::sde(const VectorCRef& lambda) const {
  return bs_sde_spec(volatility(lambda), settings_.s0, output_spec(), settings_.steps);
}

OutputFunctional BlackScholesModel::output(const VectorCRef&) const {
  const BsOutputSpec spec = output_spec();
  OutputFunctional out;
  out.terminal = [spec](const VectorCRef& x) { return spec.payoff(x(0)); };
  return out;
}

std::shared_ptr<const KolmogorovGradient> BlackScholesModel::solve_kolmogorov(
    const VectorCRef& lambda) const {
  check_parameter(lambda);
  auto grid = solve_bs_crank_nicolson(volatility(lambda), output_spec(), settings_.pde_time_steps,
                                      settings_.pde_space_steps,
                                      settings_.smax_factor * settings_.strike);
  return std::make_shared<GridGradient>(std::move(grid), settings_.rate);
}

std::shared_ptr<const KolmogorovGradient> BlackScholesModel::load_gradient(
    const std::filesystem::path& path) const {
  return load_kolmogorov_gradient(path, settings_.rate);
}

std::string BlackScholesModel::fingerprint() const {
  std::ostringstream out;
  out << "model=bs\n"
      << "bs.vol=" << (settings_.vol == Vol::hyperbolic ? "hyperbolic" : "constant") << '\n'
      << "bs.s0=" << fmt(settings_.s0) << '\n'
      << "bs.strike=" << fmt(settings_.strike) << '\n'
      << "bs.rate=" << fmt(settings_.rate) << '\n'
      << "horizon=" << fmt(settings_.horizon) << '\n'
      << "steps=" << settings_.steps << '\n'
      << "pde.L=" << settings_.pde_time_steps << '\n'
      << "pde.J=" << settings_.pde_space_steps << '\n'
      << "pde.smax_factor=" << fmt(settings_.smax_factor) << '\n';
  return out.str();
}

DumbbellModel::DumbbellModel(DumbbellParams base, int steps) : base_(std::move(base)), steps_(steps) {
  base_.validate();
  if (steps_ <= 0) throw std::invalid_argument("dumbbell: steps must be positive");
}

std::string DumbbellModel::name() const {
  return base_.spring == Spring::fene ? "fene" : "hookean";
}

Eigen::Index DumbbellModel::parameter_dimension() const {
  return base_.dimension * base_.dimension - 1;
}

std::vector<std::string> DumbbellModel::parameter_names() const {
  std::vector<std::string> names;
  const Eigen::Index d = base_.dimension;
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c)
      if (!(r == d - 1 && c == d - 1))
        names.push_back("l" + std::to_string(r + 1) + std::to_string(c + 1));
  return names;
}

DumbbellParams DumbbellModel::params(const VectorCRef& lambda) const {
  check_parameter(lambda);
  DumbbellParams p = base_;
  p.free_entries = lambda;
  return p;
}

SdeSpec DumbbellModel::sde(const VectorCRef& lambda) const {
  return dumbbell_sde_spec(params(lambda), steps_);
}

OutputFunctional DumbbellModel::output(const VectorCRef&) const {
  OutputFunctional out;
  const DumbbellParams p = base_;
  out.terminal = [p](const VectorCRef& x) { return kramers_payoff(p, x); };
  return out;
}

std::shared_ptr<const KolmogorovGradient> DumbbellModel::solve_kolmogorov(
    const VectorCRef& lambda) const {
  const Matrix grad_v = params(lambda).velocity_gradient();
  return std::make_shared<HookeanGradient>(solve_hookean_kolmogorov(
      grad_v, base_.component_i, base_.component_j, base_.horizon, steps_));
}

std::shared_ptr<const KolmogorovGradient> DumbbellModel::load_gradient(
    const std::filesystem::path& path) const {
  return load_kolmogorov_gradient(path, 0.0);
}

std::string DumbbellModel::fingerprint() const {
  std::ostringstream out;
  out << "model=" << name() << '\n'
      << "dumbbell.dim=" << base_.dimension << '\n'
      << "dumbbell.component=" << base_.component_i + 1 << ',' << base_.component_j + 1 << '\n'
      << "dumbbell.x0=";
  for (Eigen::Index k = 0; k < base_.initial.size(); ++k)
    out << (k ? "," : "") << fmt(base_.initial(k));
  out << '\n';
  if (base_.spring == Spring::fene) out << "dumbbell.b_ext=" << fmt(base_.b_ext) << '\n';
  out << "horizon=" << fmt(base_.horizon) << '\n' << "steps=" << steps_ << '\n';
  return out.str();
}

OuModel::OuModel(double x0, double horizon, int steps) : x0_(x0), horizon_(horizon), steps_(steps) {
  if (!(horizon > 0.0) || steps <= 0) throw std::invalid_argument("ou: invalid time grid");
}

SdeSpec OuModel::sde(const VectorCRef& lambda) const {
  check_parameter(lambda);
  const double theta = lambda(0);
  const double sigma = lambda(1);
  SdeSpec spec;
  spec.dimension = 1;
  spec.horizon = horizon_;
  spec.steps = steps_;
  spec.initial = Vector::Constant(1, x0_);
  spec.drift = [theta](double, const VectorCRef& x, VectorRef out) { out(0) = -theta * x(0); };
  spec.diffusion = [sigma](double, const VectorCRef&, MatrixRef out) { out(0, 0) = sigma; };
  return spec;
}

OutputFunctional OuModel::output(const VectorCRef&) const {
  OutputFunctional out;
  out.terminal = [](const VectorCRef& x) { return x(0); };
  return out;
}

std::shared_ptr<const KolmogorovGradient> OuModel::solve_kolmogorov(const VectorCRef& lambda) const {
  check_parameter(lambda);
  return std::make_shared<OuGradient>(lambda(0), horizon_);
}

std::shared_ptr<const KolmogorovGradient> OuModel::load_gradient(
    const std::filesystem::path& path) const {
  return load_kolmogorov_gradient(path, 0.0);
}

std::string OuModel::fingerprint() const {
  std::ostringstream out;
  out << "model=ou\n"
      << "ou.x0=" << fmt(x0_) << '\n'
      << "horizon=" << fmt(horizon_) << '\n'
      << "steps=" << steps_ << '\n';
  return out.str();
}

Vector ParameterBox::expand(const VectorCRef& active) const {
  if (active.size() != active_dimension())
    throw std::invalid_argument("ParameterBox: active vector has wrong size");
  Vector full(full_dimension());
  for (Eigen::Index k = 0; k < full_dimension(); ++k) {
    const int a = map[static_cast<std::size_t>(k)];
    full(k) = a >= 0 ? active(a) : frozen(k);
  }
  return full;
}

Vector ParameterBox::contract(const VectorCRef& full) const {
  if (full.size() != full_dimension())
    throw std::invalid_argument("ParameterBox: full vector has wrong size");
  Vector active = Vector::Constant(active_dimension(), std::nan(""));
  for (Eigen::Index k = 0; k < full_dimension(); ++k) {
    const int a = map[static_cast<std::size_t>(k)];
    if (a < 0) continue;
    if (std::isnan(active(a)))
      active(a) = full(k);
    else if (active(a) != full(k))
      throw std::invalid_argument("ParameterBox: tied coordinates disagree");
  }
  return active;
}

bool ParameterBox::contains(const VectorCRef& full, double tolerance) const {
  if (full.size() != full_dimension()) return false;
  for (Eigen::Index k = 0; k < full_dimension(); ++k) {
    const int a = map[static_cast<std::size_t>(k)];
    if (a < 0) {
      if (std::abs(full(k) - frozen(k)) > tolerance) return false;
    } else if (full(k) < lower(a) - tolerance || full(k) > upper(a) + tolerance) {
      return false;
    }
  }
  Vector first = Vector::Constant(active_dimension(), std::nan(""));
  for (Eigen::Index k = 0; k < full_dimension(); ++k) {
    const int a = map[static_cast<std::size_t>(k)];
    if (a < 0) continue;
    if (std::isnan(first(a)))
      first(a) = full(k);
    else if (std::abs(first(a) - full(k)) > tolerance)
      return false;
  }
  return true;
}

ParameterBox ParameterBox::widened(double factor) const {
  ParameterBox wide = *this;
  const Vector center = 0.5 * (lower + upper);
  const Vector half = 0.5 * factor * (upper - lower);
  wide.lower = center - half;
  wide.upper = center + half;
  return wide;
}

std::vector<Vector> ParameterBox::sample(std::size_t count, std::uint64_t seed,
                                         std::uint32_t query) const {
  validate();
  std::vector<Vector> points;
  points.reserve(count);
  Vector active(active_dimension());
  for (std::size_t k = 0; k < count; ++k) {
    const RngStream stream(seed, {query, static_cast<std::uint32_t>(k)});
    for (Eigen::Index a = 0; a < active_dimension(); ++a)
      active(a) = lower(a) + (upper(a) - lower(a)) * stream.uniform(static_cast<std::uint64_t>(a));
    points.push_back(expand(active));
  }
  return points;
}

void ParameterBox::validate() const {
  if (lower.size() != upper.size()) throw std::invalid_argument("box: lower/upper size mismatch");
  if (frozen.size() != full_dimension()) throw std::invalid_argument("box: frozen has wrong size");
  for (Eigen::Index a = 0; a < active_dimension(); ++a)
    if (!(lower(a) <= upper(a))) throw std::invalid_argument("box: bounds must satisfy lower <= upper");
  std::vector<bool> used(static_cast<std::size_t>(active_dimension()), false);
  for (int a : map) {
    if (a >= active_dimension() || a < -1)
      throw std::invalid_argument("box: map refers to a missing active coordinate");
    if (a >= 0) used[static_cast<std::size_t>(a)] = true;
  }
  for (bool u : used)
    if (!u) throw std::invalid_argument("box: an active coordinate is not mapped");
}

}  // namespace rbcv
