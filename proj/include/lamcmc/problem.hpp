#pragma once

#include <functional>
#include <optional>
#include <stdexcept>

#include "lamcmc/sample_store.hpp"

namespace lamcmc {

// Thrown by forward models that fail to produce an output (e.g. a
// non-convergent solver); the chain rejects the offending proposal.
struct ModelFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Which quantity the local surrogate approximates: the scalar log-posterior
// directly, or the n model outputs with the exact likelihood and prior
// composed on the outside.
enum class TargetMode { kLogPosterior, kForwardModel };

struct GaussianNoiseModel {
  Vector data;
  Vector sds;
};

// Independent Gaussian log-likelihood with additive constants dropped; only
// differences of log-posteriors enter the acceptance ratio, so the same
// convention is used in the true and surrogate paths.
double gaussian_loglike(const Vector& outputs, const GaussianNoiseModel& noise);

// One benchmark inference problem: the (possibly expensive) forward map, the
// prior, and the likelihood over outputs.
struct ProblemSpec {
  std::string name;
  int dimension = 0;
  int output_dim = 0;
  TargetMode target_mode = TargetMode::kForwardModel;
  std::function<Vector(const Vector&)> evaluate;        // theta -> outputs (n-vector)
  std::function<double(const Vector&)> log_prior;       // -inf outside support
  std::function<double(const Vector&)> log_likelihood;  // outputs -> log L

  // Declared bounded support, used to constrain refinement-point selection.
  std::optional<std::pair<Vector, Vector>> support_box;

  // Log-posterior from precomputed outputs (exact likelihood/prior path).
  double log_posterior_from_outputs(const Vector& theta, const Vector& outputs) const;
  // Full evaluation: -inf short-circuit outside the prior support.
  double log_posterior(const Vector& theta) const;
};

// --- exponential-quartic target (2-D, approximated in log-posterior mode) ---

double expquartic_logdensity(const Vector& theta);
ProblemSpec make_exp_quartic_problem();

// --- genetic toggle switch (6-D, uniform prior on [-1,1]^6) ---

// Normalized parameters to physical ones, Z_i = theta_bar_i (1 + zeta_i theta_i).
Vector toggle_denormalize(const Vector& theta);

struct ToggleSteadyState {
  double u, v, w;
};

// Damped fixed-point iteration for the steady state of the toggle-switch
// differential-algebraic system at one IPTG concentration.
ToggleSteadyState toggle_steady_state(const Vector& z, double iptg);

inline constexpr double kToggleVRef = 15.5990;

// Steady-state v/v_ref at each IPTG concentration.
Vector toggle_forward(const Vector& theta, const Vector& iptg_list);

struct ToggleConfig {
  Vector iptg_list;  // experiment concentrations; explicit, no canonical default
  GaussianNoiseModel noise;
};

// Observation-error standard deviations from the experimental setup (first
// observation is the low state).
Vector toggle_default_sds();

// Synthetic-data mode: evaluate the model at theta_true and perturb with
// seeded Gaussian noise at the given sds.
ToggleConfig toggle_synthetic_config(const Vector& theta_true, const Vector& iptg_list,
                                     const Vector& sds, std::uint64_t data_seed);

ProblemSpec make_toggle_problem(const ToggleConfig& config);

// --- synthetic Gaussian target for sanity checks ---

ProblemSpec make_gaussian_test_problem(int d);

}  // namespace lamcmc
