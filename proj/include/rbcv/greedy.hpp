#pragma once

#include "rbcv/control_variates.hpp"
#include "rbcv/models.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rbcv {

enum class Criterion { absolute, relative };
enum class Lambda1Rule { max_variance, max_correlation };

struct GreedyConfig {
  std::vector<Vector> trial;
  int algorithm = 1;
  Criterion criterion = Criterion::absolute;
  double epsilon = 0.0;
  int imax = 20;
  Eigen::Index m_small = 1000;
  Eigen::Index m_large = 100000;
  std::uint64_t seed_offline = 2;
  Lambda1Rule lambda1_rule = Lambda1Rule::max_variance;
  /// λ1 is chosen among the first min(n, |trial|) trial points.
  std::size_t small_trial_size = 10;
  unsigned workers = 1;
  /// Replicates per chunk when averaging over M_large.
  Eigen::Index large_chunk = 10000;

  void validate() const;
};

struct GreedyStep {
  int basis_size = 0;
  std::size_t selected_index = 0;  ///< Index of λ_i in the trial sample.
  Vector lambda;
  /// Variance (or correlation) score for i = 1, otherwise ε_{i-1}(λ_i).
  double selection_value = 0.0;
  /// ε_i over Λ_trial minus the i selected points; NaN if nothing remains.
  double min_residual = 0.0;
  double mean_residual = 0.0;
  double max_residual = 0.0;
  std::size_t remaining = 0;
};

struct GreedyTrace {
  std::vector<GreedyStep> steps;
  /// residuals(i-1, k) = ε_i(λ_k) for every trial point (0 for selected points).
  Matrix residuals;
  std::string stop_reason;
};

struct GreedyResult {
  ReducedBasis basis;
  GreedyTrace trace;
};

/// Index of the selected λ1 given samples Z^λ as columns of an M x n matrix.
/// Ties go to the lowest index.
std::size_t choose_lambda1(const Eigen::Ref<const Matrix>& samples, Lambda1Rule rule,
                           double* score = nullptr);
std::size_t choose_lambda1(std::span<const Vector> small_trial, const Model& model,
                           const PathBundle& paths, Lambda1Rule rule);

/// E_{M_large}(Z^λ) on stream (seed, query), generated in chunks.
double large_sample_mean(const Model& model, const VectorCRef& lambda, Eigen::Index replicates,
                         std::uint64_t seed, std::uint32_t query, Eigen::Index chunk);

/// Offline greedy selection for algorithm 1 or 2.
///
/// All trial points share one PathBundle (seed_offline, query 0) for every
/// greedy step, so each ε_i(λ) is non-increasing in i.
GreedyResult greedy_build(const GreedyConfig& config, const Model& model);

enum class PathsPolicy {
  shared,     ///< every query reuses stream (seed_online, query 0)
  per_query,  ///< query k uses stream (seed_online, query k + 1)
};

struct OnlineConfig {
  Eigen::Index m_small = 1000;
  std::uint64_t seed_online = 3;
  PathsPolicy paths = PathsPolicy::shared;
  /// Algorithm 1 with shared paths: factorize the (λ-independent) basis
  /// matrix once instead of once per query. Results are identical.
  bool reuse_factorization = false;
  double quantile = kDefaultQuantile;
  unsigned workers = 1;
};

struct OnlineRow {
  int basis_size = 0;
  std::size_t test_index = 0;
  Vector lambda;
  double raw_mean = 0.0;
  double raw_variance = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double relative_variance = 0.0;
  double half_width = 0.0;
  double reduction = 0.0;
  Eigen::Index rank = 0;
  double condition_number = 0.0;
  double clamp_rate = 0.0;
};

struct SummaryStat {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

struct OnlineSummary {
  int basis_size = 0;
  std::size_t queries = 0;
  SummaryStat raw_variance;
  SummaryStat variance;
  SummaryStat relative_variance;
  SummaryStat reduction;
  /// Mean raw variance over mean controlled variance across the test sample.
  double reduction_of_means = 0.0;
};

struct OnlineEvaluation {
  std::vector<OnlineRow> rows;  ///< Ordered by basis size, then test index.
  std::vector<OnlineSummary> summary;
  std::vector<std::string> warnings;
};

/// Controlled estimates of every test point for every basis prefix I = 0..size.
OnlineEvaluation evaluate_basis(const ReducedBasis& basis, std::span<const Vector> test,
                                const Model& model, const OnlineConfig& config);

SummaryStat summarize(std::span<const double> values);

}  // namespace rbcv
