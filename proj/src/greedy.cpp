#include "rbcv/greedy.hpp"

#include "rbcv/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace rbcv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

double relative(double variance, double mean) {
  const double denom = mean * mean;
  if (denom == 0.0) return variance == 0.0 ? 0.0 : kInf;
  return variance / denom;
}

PathBundle bundle_for(const Model& model, std::uint64_t seed, std::uint32_t query,
                      Eigen::Index replicates) {
  return PathBundle::generate(seed, query, replicates, model.steps(), model.state_dimension());
}

}  // namespace

void GreedyConfig::validate() const {
  if (trial.empty()) throw std::invalid_argument("greedy: empty trial sample");
  if (algorithm != 1 && algorithm != 2) throw std::invalid_argument("greedy: algorithm must be 1 or 2");
  if (imax < 1) throw std::invalid_argument("greedy: imax must be >= 1");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("greedy: epsilon must be >= 0");
  if (m_small < 2 || m_large < 1) throw std::invalid_argument("greedy: sample sizes must be positive");
  if (m_large < m_small) throw std::invalid_argument("greedy: M_large must be >= M_small");
  if (imax >= m_small) throw std::invalid_argument("greedy: M_small must exceed imax");
  if (small_trial_size < 1) throw std::invalid_argument("greedy: small trial size must be >= 1");
  if (large_chunk < 1) throw std::invalid_argument("greedy: chunk size must be >= 1");
  for (std::size_t i = 0; i < trial.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (trial[i] == trial[j])
        throw std::invalid_argument("greedy: trial points " + std::to_string(j) + " and " +
                                    std::to_string(i) + " coincide");
}

std::size_t choose_lambda1(const Eigen::Ref<const Matrix>& samples, Lambda1Rule rule,
                           double* score) {
  const Eigen::Index n = samples.cols();
  if (n == 0) throw std::invalid_argument("choose_lambda1: empty sample");
  Vector variance(n);
  for (Eigen::Index k = 0; k < n; ++k) variance(k) = empirical_var(samples.col(k));

  Vector value(n);
  if (rule == Lambda1Rule::max_variance) {
    value = variance;
  } else {
    value.setZero();
    for (Eigen::Index k = 0; k < n; ++k) {
      if (n == 1) break;
      double total = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == k || variance(k) == 0.0 || variance(j) == 0.0) continue;
        total += std::abs(empirical_cov(samples.col(k), samples.col(j)) /
                          std::sqrt(variance(k) * variance(j)));
      }
      value(k) = total / static_cast<double>(n - 1);
    }
  }
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < n; ++k)
    if (value(k) > value(best)) best = k;
  if (score) *score = value(best);
  return static_cast<std::size_t>(best);
}

std::size_t choose_lambda1(std::span<const Vector> small_trial, const Model& model,
                           const PathBundle& paths, Lambda1Rule rule) {
  Matrix samples(paths.replicates(), static_cast<Eigen::Index>(small_trial.size()));
  for (std::size_t k = 0; k < small_trial.size(); ++k)
    samples.col(static_cast<Eigen::Index>(k)) = run_model(model, small_trial[k], paths).z;
  return choose_lambda1(samples, rule);
}

double large_sample_mean(const Model& model, const VectorCRef& lambda, Eigen::Index replicates,
                         std::uint64_t seed, std::uint32_t query, Eigen::Index chunk) {
  double sum = 0.0;
  for (Eigen::Index start = 0; start < replicates; start += chunk) {
    const Eigen::Index count = std::min(chunk, replicates - start);
    const auto paths = PathBundle::generate(seed, query, count, model.steps(),
                                            model.state_dimension(),
                                            static_cast<std::uint32_t>(start));
    sum += run_model(model, lambda, paths).z.sum();
  }
  return sum / static_cast<double>(replicates);
}

GreedyResult greedy_build(const GreedyConfig& config, const Model& model) {
  config.validate();
  for (const auto& lambda : config.trial) model.check_parameter(lambda);

  const std::size_t n = config.trial.size();
  const auto paths = bundle_for(model, config.seed_offline, 0, config.m_small);
  const Eigen::Index m = config.m_small;

  Matrix z(m, static_cast<Eigen::Index>(n));
  parallel_for(n, config.workers, [&](std::size_t k) {
    z.col(static_cast<Eigen::Index>(k)) = run_model(model, config.trial[k], paths).z;
  });

  GreedyResult result;
  ReducedBasis& basis = result.basis;
  basis.algorithm = config.algorithm;
  basis.metadata.criterion = config.criterion == Criterion::absolute ? "abs" : "rel";
  basis.metadata.epsilon = config.epsilon;
  basis.metadata.seed_offline = config.seed_offline;
  basis.metadata.m_small = config.m_small;
  basis.metadata.m_large = config.m_large;
  basis.metadata.trial_size = n;
  basis.metadata.model_fingerprint = model.fingerprint();

  std::vector<std::size_t> selected;
  std::vector<bool> taken(n, false);
  // Algorithm 2: Ito integrals of every basis gradient along every trial trajectory.
  std::vector<Matrix> integrals;
  if (config.algorithm == 2) integrals.assign(n, Matrix(m, config.imax));

  const auto add_element = [&](std::size_t index) {
    BasisElement e;
    e.lambda = config.trial[index];
    if (config.algorithm == 1) {
      e.offline_mean = large_sample_mean(model, e.lambda, config.m_large, config.seed_offline,
                                         static_cast<std::uint32_t>(index + 1), config.large_chunk);
    } else {
      e.gradient = model.solve_kolmogorov(e.lambda);
      const KolmogorovGradient* g = e.gradient.get();
      const Eigen::Index column = static_cast<Eigen::Index>(selected.size());
      parallel_for(n, config.workers, [&](std::size_t k) {
        integrals[k].col(column) = run_model(model, config.trial[k], paths, std::span(&g, 1)).integrals.col(0);
      });
    }
    selected.push_back(index);
    taken[index] = true;
    basis.elements.push_back(std::move(e));
  };

  const std::size_t small = std::min(config.small_trial_size, n);
  double selection_value = 0.0;
  add_element(choose_lambda1(z.leftCols(static_cast<Eigen::Index>(small)), config.lambda1_rule,
                             &selection_value));

  std::vector<Vector> residual_rows;
  for (int i = 1;; ++i) {
    Vector eps = Vector::Zero(static_cast<Eigen::Index>(n));
    const Eigen::Index size = i;
    std::optional<ControlVariateFit> shared_fit;
    if (config.algorithm == 1) {
      Matrix y(m, size);
      for (Eigen::Index c = 0; c < size; ++c)
        y.col(c) = z.col(static_cast<Eigen::Index>(selected[static_cast<std::size_t>(c)]));
      shared_fit.emplace(y);
    }
    parallel_for(n, config.workers, [&](std::size_t k) {
      if (taken[k]) return;
      const auto zk = z.col(static_cast<Eigen::Index>(k));
      double var = 0.0;
      if (shared_fit) {
        var = shared_fit->residual_variance(zk, shared_fit->solve(zk).mu);
      } else {
        const ControlVariateFit fit(integrals[k].leftCols(size));
        var = fit.residual_variance(zk, fit.solve(zk).mu);
      }
      eps(static_cast<Eigen::Index>(k)) =
          config.criterion == Criterion::absolute ? var : relative(var, zk.mean());
    });
    residual_rows.push_back(eps);

    GreedyStep step;
    step.basis_size = i;
    step.selected_index = selected.back();
    step.lambda = config.trial[selected.back()];
    step.selection_value = selection_value;
    std::vector<double> remaining;
    std::size_t best = n;
    for (std::size_t k = 0; k < n; ++k) {
      if (taken[k]) continue;
      remaining.push_back(eps(static_cast<Eigen::Index>(k)));
      if (best == n || eps(static_cast<Eigen::Index>(k)) > eps(static_cast<Eigen::Index>(best)))
        best = k;
    }
    step.remaining = remaining.size();
    const SummaryStat stat = summarize(remaining);
    step.min_residual = stat.min;
    step.mean_residual = stat.mean;
    step.max_residual = stat.max;
    result.trace.steps.push_back(step);

    if (remaining.empty()) {
      result.trace.stop_reason = "trial sample exhausted";
      break;
    }
    if (stat.max <= config.epsilon) {
      result.trace.stop_reason = "tolerance reached";
      break;
    }
    if (i >= config.imax) {
      result.trace.stop_reason = "imax reached";
      break;
    }
    selection_value = eps(static_cast<Eigen::Index>(best));
    add_element(best);
  }

  result.trace.residuals.resize(static_cast<Eigen::Index>(residual_rows.size()),
                                static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < residual_rows.size(); ++r)
    result.trace.residuals.row(static_cast<Eigen::Index>(r)) = residual_rows[r].transpose();
  return result;
}

SummaryStat summarize(std::span<const double> values) {
  SummaryStat s{kNaN, kNaN, kNaN};
  double sum = 0.0;
  std::size_t count = 0;
  for (double v : values) {
    if (std::isnan(v)) continue;
    if (count == 0) {
      s.min = v;
      s.max = v;
    } else {
      s.min = std::min(s.min, v);
      s.max = std::max(s.max, v);
    }
    sum += v;
    ++count;
  }
  if (count > 0) s.mean = sum / static_cast<double>(count);
  return s;
}

OnlineEvaluation evaluate_basis(const ReducedBasis& basis, std::span<const Vector> test,
                                const Model& model, const OnlineConfig& config) {
  basis.validate();
  if (test.empty()) throw std::invalid_argument("evaluate_basis: empty test sample");
  if (config.m_small <= basis.size())
    throw std::invalid_argument("evaluate_basis: M_small must exceed the basis size");
  for (const auto& lambda : test) model.check_parameter(lambda);

  const std::size_t t = test.size();
  const Eigen::Index size = basis.size();
  const bool shared = config.paths == PathsPolicy::shared;

  std::optional<PathBundle> shared_paths;
  Matrix shared_y;
  std::optional<ControlVariateFit> shared_fit;
  if (shared) shared_paths = bundle_for(model, config.seed_online, 0, config.m_small);
  if (shared && basis.algorithm == 1) {
    shared_y = algo1_basis_matrix(basis, *shared_paths, model);
    if (config.reuse_factorization) shared_fit.emplace(shared_y);
  }

  OnlineEvaluation eval;
  eval.rows.resize(static_cast<std::size_t>(size + 1) * t);
  parallel_for(t, config.workers, [&](std::size_t k) {
    const PathBundle local =
        shared ? PathBundle{} : bundle_for(model, config.seed_online,
                                           static_cast<std::uint32_t>(k + 1), config.m_small);
    const PathBundle& paths = shared ? *shared_paths : local;

    BasisSamples samples;
    if (basis.algorithm == 1 && shared) {
      samples.z = run_model(model, test[k], paths).z;
      samples.y = shared_y;
    } else {
      samples = sample_basis(basis, test[k], paths, model);
    }
    std::optional<ControlVariateFit> own_fit;
    if (!shared_fit) own_fit.emplace(samples.y);
    const ControlVariateFit& fit = shared_fit ? *shared_fit : *own_fit;

    for (Eigen::Index p = 0; p <= size; ++p) {
      const auto est = controlled_from_samples(samples.z, fit, samples.y, p, config.quantile);
      OnlineRow& row = eval.rows[static_cast<std::size_t>(p) * t + k];
      row.basis_size = static_cast<int>(p);
      row.test_index = k;
      row.lambda = test[k];
      row.raw_mean = est.raw.mean;
      row.raw_variance = est.raw.variance;
      row.mean = est.controlled.mean;
      row.variance = est.controlled.variance;
      row.relative_variance = relative(est.controlled.variance, est.controlled.mean);
      row.half_width = est.controlled.half_width;
      row.reduction = p == 0 && est.raw.variance != 0.0 ? 1.0 : est.reduction_factor();
      row.rank = est.diagnostics.rank;
      row.condition_number = est.diagnostics.condition_number;
      row.clamp_rate = samples.clamp_rate();
    }
  });

  for (std::size_t k = 0; k < t; ++k) {
    const double rate = eval.rows[k].clamp_rate;
    if (rate > kClampWarningRate) {
      std::ostringstream msg;
      msg << "test point " << k << ": " << rate * 100.0
          << "% of gradient queries were clamped to the PDE grid";
      eval.warnings.push_back(msg.str());
    }
  }

  for (Eigen::Index p = 0; p <= size; ++p) {
    std::vector<double> raw, var, rel, red;
    for (std::size_t k = 0; k < t; ++k) {
      const OnlineRow& row = eval.rows[static_cast<std::size_t>(p) * t + k];
      raw.push_back(row.raw_variance);
      var.push_back(row.variance);
      rel.push_back(row.relative_variance);
      red.push_back(row.reduction);
    }
    OnlineSummary s;
    s.basis_size = static_cast<int>(p);
    s.queries = t;
    s.raw_variance = summarize(raw);
    s.variance = summarize(var);
    s.relative_variance = summarize(rel);
    s.reduction = summarize(red);
    s.reduction_of_means = s.variance.mean == 0.0 ? (s.raw_variance.mean == 0.0 ? kNaN : kInf)
                                                  : s.raw_variance.mean / s.variance.mean;
    eval.summary.push_back(s);
  }
  return eval;
}

}  // namespace rbcv
