#include "lamcmc/problem.hpp"

#include <cmath>
#include <limits>

#include "lamcmc/rng.hpp"

namespace lamcmc {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double gaussian_loglike(const Vector& outputs, const GaussianNoiseModel& noise) {
  if (outputs.size() != noise.data.size() || outputs.size() != noise.sds.size())
    throw std::invalid_argument("gaussian_loglike: length mismatch");
  double total = 0;
  for (int i = 0; i < outputs.size(); ++i) {
    const double r = (noise.data[i] - outputs[i]) / noise.sds[i];
    total -= 0.5 * r * r;
  }
  return total;
}

double ProblemSpec::log_posterior_from_outputs(const Vector& theta, const Vector& outputs) const {
  const double lp = log_prior(theta);
  if (lp == kNegInf) return kNegInf;
  if (target_mode == TargetMode::kLogPosterior) return outputs[0];
  return log_likelihood(outputs) + lp;
}

double ProblemSpec::log_posterior(const Vector& theta) const {
  const double lp = log_prior(theta);
  if (lp == kNegInf) return kNegInf;
  return log_posterior_from_outputs(theta, evaluate(theta));
}

// --- exponential-quartic ---

double expquartic_logdensity(const Vector& theta) {
  const double t1 = theta[0], t2 = theta[1];
  const double s = 2.0 * t2 - t1 * t1;
  return -0.1 * t1 * t1 * t1 * t1 - 0.5 * s * s;
}

ProblemSpec make_exp_quartic_problem() {
  ProblemSpec p;
  p.name = "exp_quartic";
  p.dimension = 2;
  p.output_dim = 1;
  p.target_mode = TargetMode::kLogPosterior;
  p.evaluate = [](const Vector& theta) {
    return Vector::Constant(1, expquartic_logdensity(theta));
  };
  p.log_prior = [](const Vector&) { return 0.0; };  // flat
  p.log_likelihood = [](const Vector& outputs) { return outputs[0]; };
  return p;
}

// --- genetic toggle switch ---

namespace {
// The published table transposes the last two columns: K is the IPTG
// binding constant (molar scale, comparable to the experimental
// concentrations) and eta is the Hill-type exponent. The corrected order
// is required for the switch to respond to IPTG at all.
const double kToggleTheta_bar[6] = {156.25, 15.6, 2.5, 1.0, 2.9618e-5, 2.0015};
const double kToggleZeta[6] = {0.20, 0.15, 0.15, 0.15, 0.2, 0.30};
}  // namespace

Vector toggle_denormalize(const Vector& theta) {
  Vector z(6);
  for (int i = 0; i < 6; ++i) z[i] = kToggleTheta_bar[i] * (1.0 + kToggleZeta[i] * theta[i]);
  return z;
}

ToggleSteadyState toggle_steady_state(const Vector& z, double iptg) {
  const double alpha1 = z[0], alpha2 = z[1], beta = z[2], gamma = z[3], k = z[4], eta = z[5];
  const double iptg_factor = std::pow(1.0 + iptg / k, eta);
  const int max_iter = 100000;
  for (double damping : {1.0, 0.5}) {
    double u = alpha1 / 2.0, v = alpha2 / 2.0, w = 0.0;
    for (int iter = 0; iter < max_iter; ++iter) {
      u = alpha1 / (1.0 + std::pow(v, beta));
      w = u / iptg_factor;
      const double v_new = alpha2 / (1.0 + std::pow(w, gamma));
      const double v_next = damping * v_new + (1.0 - damping) * v;
      const double change = std::abs(v_next - v) / std::max(1.0, std::abs(v_next));
      v = v_next;
      if (change < 1e-10) {
        u = alpha1 / (1.0 + std::pow(v, beta));
        w = u / iptg_factor;
        return {u, v, w};
      }
    }
  }
  throw ModelFailure("toggle_steady_state: fixed-point iteration did not converge");
}

Vector toggle_forward(const Vector& theta, const Vector& iptg_list) {
  const Vector z = toggle_denormalize(theta);
  Vector out(iptg_list.size());
  for (int i = 0; i < iptg_list.size(); ++i) out[i] = toggle_steady_state(z, iptg_list[i]).v / kToggleVRef;
  return out;
}

Vector toggle_default_sds() {
  Vector sds(6);
  sds << 4.0e-5, 0.005, 0.005, 0.005, 0.005, 0.005;
  return sds;
}

ToggleConfig toggle_synthetic_config(const Vector& theta_true, const Vector& iptg_list,
                                     const Vector& sds, std::uint64_t data_seed) {
  ToggleConfig config;
  config.iptg_list = iptg_list;
  config.noise.sds = sds;
  Vector data = toggle_forward(theta_true, iptg_list);
  RngStream noise_rng = RngStream::derive(data_seed, "toggle-data-noise");
  for (int i = 0; i < data.size(); ++i) data[i] += sds[i] * noise_rng.normal();
  config.noise.data = data;
  return config;
}

ProblemSpec make_toggle_problem(const ToggleConfig& config) {
  ProblemSpec p;
  p.name = "toggle_switch";
  p.dimension = 6;
  p.output_dim = static_cast<int>(config.iptg_list.size());
  p.target_mode = TargetMode::kForwardModel;
  const Vector iptg = config.iptg_list;
  const GaussianNoiseModel noise = config.noise;
  p.evaluate = [iptg](const Vector& theta) { return toggle_forward(theta, iptg); };
  p.log_prior = [](const Vector& theta) {
    for (int i = 0; i < theta.size(); ++i)
      if (theta[i] < -1.0 || theta[i] > 1.0) return kNegInf;
    return 0.0;  // uniform, constant dropped
  };
  p.log_likelihood = [noise](const Vector& outputs) { return gaussian_loglike(outputs, noise); };
  p.support_box = std::make_pair(Vector::Constant(6, -1.0), Vector::Constant(6, 1.0));
  return p;
}

// --- Gaussian sanity target ---

ProblemSpec make_gaussian_test_problem(int d) {
  ProblemSpec p;
  p.name = "gaussian_test";
  p.dimension = d;
  p.output_dim = 1;
  p.target_mode = TargetMode::kLogPosterior;
  p.evaluate = [](const Vector& theta) {
    return Vector::Constant(1, -0.5 * theta.squaredNorm());
  };
  p.log_prior = [](const Vector&) { return 0.0; };
  p.log_likelihood = [](const Vector& outputs) { return outputs[0]; };
  return p;
}

}  // namespace lamcmc
