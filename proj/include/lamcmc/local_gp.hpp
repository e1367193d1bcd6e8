#pragma once

#include <Eigen/Cholesky>
#include <optional>
#include <vector>

#include "lamcmc/rng.hpp"
#include "lamcmc/sample_store.hpp"

namespace lamcmc {

// Weakly-informative hyperpriors at local scale. The variance gets an
// inverse-gamma prior (conjugate, MAP computed analytically); correlation
// lengths and nugget get gamma priors and are optimized numerically.
// Lengthscales are measured in units of the local ball radius.
struct GPHyperPriors {
  double variance_shape = 2.0;
  double variance_scale = 1.0;
  double lengthscale_shape = 2.0;
  double lengthscale_rate = 1.0;
  double nugget_shape = 2.0;
  double nugget_rate = 100.0;  // mode near 0.01
};

struct GPFitOptions {
  GPHyperPriors priors;
  int multistarts = 5;
  int max_evals_per_start = 60;     // objective evaluations per start
  double log_bound = std::log(1e3); // box bounds in log space around the initial scale
  // Warm start: skip the multistart and run one short local search from
  // these values (in raw units). Used by the chain, where hyperparameters
  // drift slowly between steps.
  std::optional<Vector> init_lengthscales;
  std::optional<double> init_nugget;
  // Skip the hyperparameter search entirely and use the warm-start values
  // as-is. Used by the chain between refinements, where the training set is
  // unchanged and re-optimizing at every proposal buys nothing.
  bool reuse_init = false;
};

// Local GP with separable squared-exponential correlation
// k(x,y) = exp(-sum_i (x_i-y_i)^2 / (2 l_i^2)) and covariance
// sigma_j^2 (k + nugget * I). Correlation structure is shared across
// outputs; each output gets its own analytic MAP variance scale. Outputs
// are centered before fitting and the mean is restored in prediction.
class GPModel {
 public:
  struct Prediction {
    Vector mean;      // per output
    Vector variance;  // per output, nonnegative
  };

  Prediction predict(const Vector& point) const;

  // mean + sqrt(variance) * z with independent standard normal z per output.
  Vector draw(const Vector& point, RngStream& rng) const;

  const Vector& lengthscales() const { return lengthscales_; }
  double nugget() const { return nugget_; }
  const Vector& signal_variances() const { return signal_variances_; }
  int size() const { return static_cast<int>(inputs_.rows()); }

 private:
  friend std::optional<GPModel> fit_gp(const SampleSet&, const std::vector<SampleSet::Neighbor>&,
                                       const Vector&, const GPFitOptions&, RngStream&);
  Matrix inputs_;             // N x d
  Vector output_means_;       // n
  Vector lengthscales_;       // d
  Vector signal_variances_;   // n
  double nugget_ = 0.0;
  Eigen::LLT<Matrix> chol_;   // of (corr + nugget I)
  Matrix alpha_;              // C^{-1} (Y - mean), N x n
};

// N = ceil(d^{5/2}) with a floor for very low d.
int gp_sample_count(int d, int floor = 10);

// Gramacy-Apley-style neighbor selection: the first batch is pure nearest
// neighbors; each later batch re-estimates hyperparameters on the current
// subset and then samples additional points without replacement with
// probability proportional to exp(-distance^2) under the lengthscale-scaled
// metric. Deterministic given the rng stream.
std::vector<SampleSet::Neighbor> select_neighbors(const SampleSet& set, const Vector& center,
                                                  int n, int batches, RngStream& rng,
                                                  const GPFitOptions& opts = {});

// Empirical-Bayes fit on the given subset. Numerical failure (after the
// nugget inflation ladder) yields nullopt; the chain treats that as a
// refinement trigger.
std::optional<GPModel> fit_gp(const SampleSet& set, const std::vector<SampleSet::Neighbor>& subset,
                              const Vector& center, const GPFitOptions& opts, RngStream& rng);

}  // namespace lamcmc
