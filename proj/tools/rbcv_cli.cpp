// rbcv: offline greedy builds, online sweeps and single queries of
// reduced-basis control variates.

#include "rbcv/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

struct Overrides {
  std::string config;
  std::optional<int> algo;
  std::optional<std::string> criterion;
  std::optional<int> imax;
  std::optional<std::uint64_t> seed_trial, seed_offline, seed_online;
  std::optional<std::string> out;
  std::optional<unsigned> workers;
  std::optional<std::string> test_box;
  std::optional<std::string> paths;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "experiment config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--algo", o.algo, "algorithm (1 or 2)")->check(CLI::IsMember({1, 2}));
  cmd->add_option("--criterion", o.criterion, "greedy criterion")->check(CLI::IsMember({"abs", "rel"}));
  cmd->add_option("--imax", o.imax, "maximal basis size")->check(CLI::PositiveNumber);
  cmd->add_option("--seed-trial", o.seed_trial, "seed for sampling trial/test parameters");
  cmd->add_option("--seed-offline", o.seed_offline, "seed for offline paths");
  cmd->add_option("--seed-online", o.seed_online, "seed for online paths");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--workers", o.workers, "worker threads (0 = all cores)");
  cmd->add_option("--test-box", o.test_box, "test box")->check(CLI::IsMember({"paper", "wide"}));
  cmd->add_option("--paths", o.paths, "online paths policy")->check(CLI::IsMember({"shared", "per-query"}));
}

rbcv::ExperimentConfig resolve(const Overrides& o) {
  auto config = rbcv::load_config(o.config);
  if (o.algo) config.set("algorithm", std::to_string(*o.algo));
  if (o.criterion) config.set("criterion", *o.criterion);
  if (o.imax) config.set("imax", std::to_string(*o.imax));
  if (o.seed_trial) config.seed_trial = *o.seed_trial;
  if (o.seed_offline) config.seed_offline = *o.seed_offline;
  if (o.seed_online) config.seed_online = *o.seed_online;
  if (o.out) config.set("out", *o.out);
  if (o.workers) config.workers = *o.workers;
  if (o.test_box) config.set("test_box", *o.test_box);
  if (o.paths) config.set("paths_policy", *o.paths);
  config.finalize();
  return config;
}

rbcv::Vector parse_lambda(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    values.push_back(std::stod(item, &used));
    if (used != item.size()) throw CLI::ValidationError("--lambda", "bad number '" + item + "'");
  }
  return Eigen::Map<rbcv::Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reduced-basis control variates for parametrized SDEs"};
  app.require_subcommand(1);

  Overrides offline_opts, online_opts, single_opts;
  auto* offline = app.add_subcommand("offline", "greedy offline stage: basis + trace CSV");
  add_common(offline, offline_opts);

  auto* online = app.add_subcommand("online", "evaluate a basis on the test sample");
  add_common(online, online_opts);
  std::string online_basis;
  online->add_option("--basis", online_basis, "basis directory (default: <out>/basis-alg<N>)");

  auto* single = app.add_subcommand("single", "one estimate at an explicit parameter");
  add_common(single, single_opts);
  std::string single_basis;
  std::string lambda_text;
  single->add_option("--lambda", lambda_text, "comma-separated parameter vector")->required();
  single->add_option("--basis", single_basis, "basis directory (omit for plain Monte-Carlo)");

  auto* oracle = app.add_subcommand("oracle-check", "closed-form checks of the numerical kernels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*offline) {
      rbcv::run_offline(resolve(offline_opts), std::cout);
    } else if (*online) {
      const auto config = resolve(online_opts);
      const auto basis = online_basis.empty() ? rbcv::basis_dir(config)
                                              : std::filesystem::path(online_basis);
      const auto outcome = rbcv::run_online(config, basis, std::cout);
      std::cout << "wrote " << outcome.results.string() << " and " << outcome.summary.string() << '\n';
    } else if (*single) {
      const auto config = resolve(single_opts);
      std::optional<std::filesystem::path> basis;
      if (!single_basis.empty()) basis = single_basis;
      rbcv::run_single(config, parse_lambda(lambda_text), basis, std::cout);
    } else if (*oracle) {
      return rbcv::oracle_check(std::cout) == 0 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "rbcv: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
