#pragma once

#include "rbcv/greedy.hpp"
#include "rbcv/models.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>

namespace rbcv {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything one experiment needs; read from a flat `key = value` file.
/// See docs/FORMATS.md for the key reference.
struct ExperimentConfig {
  std::string model = "bs";  ///< bs | fene | hookean | ou

  std::string bs_vol = "hyperbolic";  ///< hyperbolic | constant
  double s0 = 90.0;
  double strike = 100.0;
  double rate = 0.04;
  int pde_time_steps = 100;
  int pde_space_steps = 300;
  double smax_factor = 3.0;

  int dumbbell_dim = 2;
  double b_ext = 9.0;
  int component_i = 1;  ///< One-based, as written in the file.
  int component_j = 2;
  Vector dumbbell_x0 = Vector::Ones(2);

  double ou_x0 = 1.0;

  double horizon = 1.0;
  int steps = 100;

  ParameterBox box;  ///< Empty means the model's default box.

  int algorithm = 1;
  Criterion criterion = Criterion::absolute;
  double epsilon = 0.0;
  int imax = 20;
  Eigen::Index m_small = 1000;
  Eigen::Index m_large = 100000;
  std::size_t n_trial = 100;
  std::size_t n_test = 1000;
  std::size_t n_small_trial = 10;
  Lambda1Rule lambda1_rule = Lambda1Rule::max_variance;
  std::uint64_t seed_trial = 1;
  std::uint64_t seed_offline = 2;
  std::uint64_t seed_online = 3;
  unsigned workers = 1;
  PathsPolicy paths = PathsPolicy::shared;
  bool reuse_factorization = false;
  std::string test_box = "paper";  ///< paper | wide
  double quantile = kDefaultQuantile;
  Eigen::Index large_chunk = 10000;
  std::filesystem::path out = "out";

  /// Sets one key from its textual value; throws ConfigError.
  void set(const std::string& key, const std::string& value);
  /// Fills in the model's default box if none was given and checks consistency.
  void finalize();
  void validate() const;
};

ExperimentConfig parse_config(std::istream& in, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

std::unique_ptr<Model> make_model(const ExperimentConfig& config);

/// The default experiment box for a model (the paper boxes for bs and dumbbells).
ParameterBox default_box(const ExperimentConfig& config);

}  // namespace rbcv
