#pragma once

#include "rbcv/config.hpp"
#include "rbcv/control_variates.hpp"
#include "rbcv/greedy.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace rbcv {

/// Λ_trial: n_trial points on the experiment box, stream (seed_trial, query 0).
std::vector<Vector> trial_sample(const ExperimentConfig& config);
/// Λ_test: n_test points on the paper or widened box, stream (seed_trial, query 1).
std::vector<Vector> test_sample(const ExperimentConfig& config);

/// Output file names inside config.out; they depend on the algorithm and test box.
std::filesystem::path basis_dir(const ExperimentConfig& config);
std::filesystem::path trace_path(const ExperimentConfig& config);
std::filesystem::path results_path(const ExperimentConfig& config);
std::filesystem::path summary_path(const ExperimentConfig& config);

GreedyConfig greedy_config(const ExperimentConfig& config, std::vector<Vector> trial);
OnlineConfig online_config(const ExperimentConfig& config);

struct OfflineOutcome {
  GreedyResult result;
  std::filesystem::path basis;
  std::filesystem::path trace;
};

/// Greedy build; writes the basis directory and the trace CSV.
OfflineOutcome run_offline(const ExperimentConfig& config, std::ostream& log);

struct OnlineOutcome {
  OnlineEvaluation evaluation;
  std::filesystem::path results;
  std::filesystem::path summary;
};

/// Evaluates a stored basis on Λ_test; writes the results and summary CSVs.
OnlineOutcome run_online(const ExperimentConfig& config, const std::filesystem::path& basis,
                         std::ostream& log);

struct SingleOutcome {
  ControlledEstimate estimate;
  bool with_basis = false;
  bool outside_box = false;
};

/// One query at λ (full vector, or active coordinates of the box).
SingleOutcome run_single(const ExperimentConfig& config, const Vector& lambda,
                         const std::optional<std::filesystem::path>& basis, std::ostream& out);

/// Quick closed-form checks of the numerical kernels; returns the failure count.
int oracle_check(std::ostream& out);

void write_trace_csv(const GreedyTrace& trace, const Model& model, const std::filesystem::path& path);
void write_results_csv(const OnlineEvaluation& eval, const Model& model,
                       const std::filesystem::path& path);
void write_summary_csv(const OnlineEvaluation& eval, const std::filesystem::path& path);

/// %.17g, the float format used in every CSV.
std::string format_double(double v);

}  // namespace rbcv
