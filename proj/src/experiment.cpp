#include "rbcv/experiment.hpp"

#include "rbcv/feynman_kac.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace rbcv {

namespace {

constexpr std::uint32_t kTrialQuery = 0;
constexpr std::uint32_t kTestQuery = 1;

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string suffix(const ExperimentConfig& config) {
  return "alg" + std::to_string(config.algorithm);
}

void write_lambda(std::ostream& out, const VectorCRef& lambda) {
  for (Eigen::Index k = 0; k < lambda.size(); ++k) out << ',' << format_double(lambda(k));
}

void write_stat(std::ostream& out, const SummaryStat& s) {
  out << ',' << format_double(s.min) << ',' << format_double(s.mean) << ',' << format_double(s.max);
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<Vector> trial_sample(const ExperimentConfig& config) {
  return config.box.sample(config.n_trial, config.seed_trial, kTrialQuery);
}

std::vector<Vector> test_sample(const ExperimentConfig& config) {
  const ParameterBox box = config.test_box == "wide" ? config.box.widened(2.0) : config.box;
  return box.sample(config.n_test, config.seed_trial, kTestQuery);
}

std::filesystem::path basis_dir(const ExperimentConfig& config) {
  return config.out / ("basis-" + suffix(config));
}

std::filesystem::path trace_path(const ExperimentConfig& config) {
  return config.out / ("trace-" + suffix(config) + ".csv");
}

std::filesystem::path results_path(const ExperimentConfig& config) {
  return config.out / ("results-" + suffix(config) + "-" + config.test_box + ".csv");
}

std::filesystem::path summary_path(const ExperimentConfig& config) {
  return config.out / ("summary-" + suffix(config) + "-" + config.test_box + ".csv");
}

GreedyConfig greedy_config(const ExperimentConfig& config, std::vector<Vector> trial) {
  GreedyConfig g;
  g.trial = std::move(trial);
  g.algorithm = config.algorithm;
  g.criterion = config.criterion;
  g.epsilon = config.epsilon;
  g.imax = config.imax;
  g.m_small = config.m_small;
  g.m_large = config.m_large;
  g.seed_offline = config.seed_offline;
  g.lambda1_rule = config.lambda1_rule;
  g.small_trial_size = config.n_small_trial;
  g.workers = config.workers;
  g.large_chunk = config.large_chunk;
  return g;
}

OnlineConfig online_config(const ExperimentConfig& config) {
  OnlineConfig o;
  o.m_small = config.m_small;
  o.seed_online = config.seed_online;
  o.paths = config.paths;
  o.reuse_factorization = config.reuse_factorization;
  o.quantile = config.quantile;
  o.workers = config.workers;
  return o;
}

OfflineOutcome run_offline(const ExperimentConfig& config, std::ostream& log) {
  const auto model = make_model(config);
  OfflineOutcome outcome;
  outcome.result = greedy_build(greedy_config(config, trial_sample(config)), *model);
  outcome.result.basis.metadata.seed_trial = config.seed_trial;
  outcome.basis = basis_dir(config);
  outcome.trace = trace_path(config);
  write_basis(outcome.result.basis, *model, outcome.basis);
  write_trace_csv(outcome.result.trace, *model, outcome.trace);
  for (const auto& step : outcome.result.trace.steps)
    log << "I=" << step.basis_size << " selected trial point " << step.selected_index
        << ", max residual " << format_double(step.max_residual) << '\n';
  log << "offline: " << outcome.result.trace.stop_reason << "; basis written to "
      << outcome.basis.string() << '\n';
  return outcome;
}

OnlineOutcome run_online(const ExperimentConfig& config, const std::filesystem::path& basis,
                         std::ostream& log) {
  const auto model = make_model(config);
  const ReducedBasis stored = read_basis(basis, *model);
  if (stored.algorithm != config.algorithm)
    throw std::runtime_error("basis in " + basis.string() + " was built with algorithm " +
                             std::to_string(stored.algorithm) + ", config asks for " +
                             std::to_string(config.algorithm));
  OnlineOutcome outcome;
  const auto test = test_sample(config);
  outcome.evaluation = evaluate_basis(stored, test, *model, online_config(config));
  outcome.results = results_path(config);
  outcome.summary = summary_path(config);
  write_results_csv(outcome.evaluation, *model, outcome.results);
  write_summary_csv(outcome.evaluation, outcome.summary);
  for (const auto& w : outcome.evaluation.warnings) log << "warning: " << w << '\n';
  const auto& last = outcome.evaluation.summary.back();
  log << "online: I=" << last.basis_size << " over " << last.queries
      << " test points, mean raw variance " << format_double(last.raw_variance.mean)
      << ", mean controlled variance " << format_double(last.variance.mean)
      << ", reduction " << format_double(last.reduction_of_means) << '\n';
  return outcome;
}

SingleOutcome run_single(const ExperimentConfig& config, const Vector& lambda_in,
                         const std::optional<std::filesystem::path>& basis, std::ostream& out) {
  const auto model = make_model(config);
  Vector lambda = lambda_in;
  if (lambda.size() == config.box.active_dimension() &&
      lambda.size() != model->parameter_dimension())
    lambda = config.box.expand(lambda);
  model->check_parameter(lambda);

  SingleOutcome outcome;
  outcome.outside_box = !config.box.contains(lambda);
  if (outcome.outside_box) out << "warning: lambda lies outside the experiment box (extrapolation)\n";

  const auto paths = PathBundle::generate(config.seed_online, 0, config.m_small, model->steps(),
                                          model->state_dimension());
  ReducedBasis stored;
  if (basis) {
    stored = read_basis(*basis, *model);
    outcome.with_basis = true;
  }
  outcome.estimate = controlled_estimate(stored, lambda, paths, *model, config.quantile);
  const auto& est = outcome.estimate;
  out << "lambda";
  write_lambda(out, lambda);
  out << '\n';
  out << "raw: mean " << format_double(est.raw.mean) << " variance " << format_double(est.raw.variance)
      << " half_width " << format_double(est.raw.half_width) << " M " << est.raw.replicates << '\n';
  if (outcome.with_basis) {
    out << "controlled: mean " << format_double(est.controlled.mean) << " variance "
        << format_double(est.controlled.variance) << " half_width "
        << format_double(est.controlled.half_width) << '\n';
    out << "mu";
    write_lambda(out, est.mu);
    out << '\n';
    out << "reduction " << format_double(est.reduction_factor()) << " rank " << est.diagnostics.rank
        << " condition " << format_double(est.diagnostics.condition_number) << '\n';
    if (est.clamp_warning)
      out << "warning: " << est.clamp_rate * 100.0 << "% of gradient queries were clamped\n";
  }
  return outcome;
}

int oracle_check(std::ostream& out) {
  int failures = 0;
  const auto report = [&](bool ok, const std::string& name, const std::string& detail) {
    out << (ok ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
    if (!ok) ++failures;
  };

  {
    OuModel ou(1.0, 1.0, 100);
    const Vector lambda = Eigen::Vector2d(1.0, std::sqrt(2.0));
    const auto paths = PathBundle::generate(11, 0, 20000, 100, 1);
    const auto z = run_model(ou, lambda, paths).z;
    const auto rep = confidence_interval(z);
    const auto exact = ou_exact_moments(1.0, std::sqrt(2.0), 1.0, 1.0);
    const bool ok = std::abs(rep.mean - exact.mean) <= rep.half_width + 2e-2 &&
                    std::abs(rep.variance / exact.variance - 1.0) < 0.05;
    report(ok, "ou-moments",
           "mean " + format_double(rep.mean) + " vs " + format_double(exact.mean) + ", variance " +
               format_double(rep.variance) + " vs " + format_double(exact.variance));
  }
  {
    const BsOutputSpec spec{100.0, 1.0, 0.04};
    const auto grid = solve_bs_crank_nicolson([](double, double) { return 0.2; }, spec, 100, 300, 300.0);
    const double price = interpolate(grid, 0.0, 90.0, GridField::value);
    const double exact = black_scholes_call(90.0, 100.0, 0.04, 0.2, 1.0);
    report(std::abs(price / exact - 1.0) < 1e-2, "crank-nicolson",
           "C(0,90) " + format_double(price) + " vs closed form " + format_double(exact));
  }
  {
    Matrix lambda(2, 2);
    lambda << 0.3, -0.7, 0.5, -0.3;
    const auto sol = solve_hookean_kolmogorov(lambda, 0, 1, 1.0, 100);
    const Matrix b = (lambda - Matrix::Identity(2, 2)).eval();
    const Matrix e = b.exp();
    const Matrix exact = e.transpose() * sol.a.back() * e;
    const double err = (sol.a.front() - exact).cwiseAbs().maxCoeff();
    report(err < 1e-8, "hookean-kolmogorov", "max |A(0) - exp oracle| " + format_double(err));
  }
  {
    SdeSpec spec;
    spec.dimension = 1;
    spec.steps = 100;
    spec.horizon = 1.0;
    spec.initial = Vector::Ones(1);
    spec.drift = [](double, const VectorCRef& x, VectorRef o) { o(0) = -x(0); };
    spec.diffusion = [](double, const VectorCRef&, MatrixRef o) { o(0, 0) = 1.0; };
    const auto est = grad_u_estimate(
        spec, 0.0, Vector::Ones(1),
        [](double, const VectorCRef&, MatrixRef o) { o(0, 0) = -1.0; }, {},
        [](const VectorCRef&, VectorRef o) { o(0) = 1.0; }, {}, 1000, 5);
    const double exact = std::exp(-1.0);
    report(std::abs(est.gradient(0) - exact) < 1e-2, "feynman-kac",
           "grad u(0,1) " + format_double(est.gradient(0)) + " vs " + format_double(exact));
  }
  {
    HyperbolicVolParams p;
    p.gamma = 0.0;
    const HyperbolicVol vol(p);
    const double atm = vol.skew(0.0, p.s0);
    const bool ok = std::abs(vol(0.7, 130.0) - atm) < 1e-14 && std::abs(vol(0.0, 50.0) - atm) < 1e-14;
    report(ok, "hyperbolic-vol", "Gamma=0 gives constant " + format_double(atm));
  }
  return failures;
}

void write_trace_csv(const GreedyTrace& trace, const Model& model, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "step,trial_index";
  for (const auto& name : model.parameter_names()) out << ',' << name;
  out << ",selection_value,min_residual,mean_residual,max_residual,remaining\n";
  for (const auto& s : trace.steps) {
    out << s.basis_size << ',' << s.selected_index;
    write_lambda(out, s.lambda);
    out << ',' << format_double(s.selection_value) << ',' << format_double(s.min_residual) << ','
        << format_double(s.mean_residual) << ',' << format_double(s.max_residual) << ','
        << s.remaining << '\n';
  }
}

void write_results_csv(const OnlineEvaluation& eval, const Model& model,
                       const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "basis_size,test_index";
  for (const auto& name : model.parameter_names()) out << ',' << name;
  out << ",raw_mean,raw_variance,mean,variance,relative_variance,half_width,reduction,rank,"
         "condition_number,clamp_rate\n";
  for (const auto& r : eval.rows) {
    out << r.basis_size << ',' << r.test_index;
    write_lambda(out, r.lambda);
    out << ',' << format_double(r.raw_mean) << ',' << format_double(r.raw_variance) << ','
        << format_double(r.mean) << ',' << format_double(r.variance) << ','
        << format_double(r.relative_variance) << ',' << format_double(r.half_width) << ','
        << format_double(r.reduction) << ',' << r.rank << ',' << format_double(r.condition_number)
        << ',' << format_double(r.clamp_rate) << '\n';
  }
}

void write_summary_csv(const OnlineEvaluation& eval, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "basis_size,queries,raw_variance_min,raw_variance_mean,raw_variance_max,variance_min,"
         "variance_mean,variance_max,relative_variance_min,relative_variance_mean,"
         "relative_variance_max,reduction_min,reduction_mean,reduction_max,reduction_of_means\n";
  for (const auto& s : eval.summary) {
    out << s.basis_size << ',' << s.queries;
    write_stat(out, s.raw_variance);
    write_stat(out, s.variance);
    write_stat(out, s.relative_variance);
    write_stat(out, s.reduction);
    out << ',' << format_double(s.reduction_of_means) << '\n';
  }
}

}  // namespace rbcv
