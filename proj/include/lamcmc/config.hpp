#pragma once

#include <string>

#include "lamcmc/chain.hpp"
#include "lamcmc/elliptic_fem.hpp"
#include "lamcmc/harness.hpp"

namespace lamcmc {

// Raised on malformed or out-of-range configuration input; the message names
// the offending key.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ProblemKind { kExpQuartic, kToggleSwitch, kEllipticPde, kGaussianTest };

// One experiment: a problem, a chain configuration, and a chain count.
// Parses from a TOML-style key-value file (sections in brackets, `key =
// value` lines, # comments, numeric arrays in []) or from JSON with the same
// nesting; serializes back to the TOML form losslessly.
struct ExperimentConfig {
  std::string name;  // empty: derived from problem and approximation
  ProblemKind problem = ProblemKind::kExpQuartic;
  int n_chains = 1;
  long chain_length = 1000;
  std::uint64_t master_seed = 1;
  std::string output_dir = "out";
  bool reference_mode = false;
  ApproxKind approx_kind = ApproxKind::kQuadratic;

  std::string proposal_type = "random_walk";  // or adaptive_metropolis
  double proposal_variance = 1.0;             // isotropic: variance * I
  long adaptation_start = 1000;
  double adaptation_epsilon = 1e-6;

  RefinementSchedule schedule;
  int max_refinements_per_step = 2;  // 0: unlimited

  SeedMode seed_mode = SeedMode::kAroundStart;
  double seed_radius = 0.2;
  int seed_count = 0;  // 0: one more than the regression sample count

  int gaussian_dim = 2;
  std::uint64_t data_seed = 2025;
  Vector theta_true;  // synthetic-data parameter; empty: seeded prior draw
  // Low state, four points across the switching transition, and one
  // saturated concentration anchoring the v_ref normalization.
  Vector iptg_list = (Vector(6) << 1e-6, 2e-5, 4e-5, 8e-5, 2e-4, 6e-3).finished();
  Vector obs_sds;  // empty: problem default

  int mesh_nx = 30;
  int kl_modes = 6;
  double kl_lengthscale = 0.2;
  double kl_variance = 1.0;
  double obs_sd = 0.1;

  double burn_in_fraction = 0.10;
  int error_grid_points = 200;
  long refinement_window = 10000;

  std::string effective_name() const;

  bool operator==(const ExperimentConfig& other) const;
};

ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);
std::string serialize_experiment_config(const ExperimentConfig& config);

// Instantiates the configured problem (with synthetic data where needed).
ProblemSpec build_problem(const ExperimentConfig& config);

// Chain configuration for the chain_index-th chain: seed = master + index.
ChainConfig build_chain_config(const ExperimentConfig& config, int chain_index, int dimension);

// Runs n_chains chains, writes per-chain trace.csv/samples.csv, experiment
// level error/cost/refinement CSVs and summary.json under
// <output_dir>/<name>/. Per-chain failures are recorded in the summary
// without aborting the rest. Returns the experiment directory.
std::string run_experiment(const ExperimentConfig& config);

// Recomputes pooled covariance and error traces from the samples.csv files
// of a stored experiment directory and rewrites its metric outputs.
void recompute_report(const std::string& experiment_dir, double burn_in_fraction = 0.10,
                      int grid_points = 200);

}  // namespace lamcmc
