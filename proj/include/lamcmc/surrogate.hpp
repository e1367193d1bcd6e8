#pragma once

#include <cstdint>
#include <deque>
#include <optional>

#include "lamcmc/local_gp.hpp"
#include "lamcmc/local_poly.hpp"
#include "lamcmc/problem.hpp"
#include "lamcmc/rng.hpp"

namespace lamcmc {

enum class ApproxKind { kLinear, kQuadratic, kGaussianProcess };

// Everything the kernel needs from one local fit at a point: the nominal
// log-posterior and the log-posteriors of the perturbed variations
// (leave-one-out refits for polynomials, predictive draws for the GP) that
// feed the cross-validation error indicators.
struct LocalFit {
  double nominal = 0.0;
  std::vector<double> variants;
};

// Builds local approximations of the target at arbitrary points, composing
// the exact likelihood/prior on top when the surrogate models the forward
// outputs rather than the log-posterior itself. Fits are cached per
// (point, sample-set version); the minus side of a Metropolis step repeats
// across iterations, so the cache saves roughly half the fitting work.
class SurrogateEngine {
 public:
  SurrogateEngine(ApproxKind kind, TargetMode mode, const ProblemSpec& problem,
                  GPFitOptions gp_options = {}, int gp_batches = 4);

  // Number of regression samples per fit; also the first-fit seeding floor.
  int sample_count() const { return sample_count_; }

  // nullopt on rank deficiency or optimizer failure, which the kernel treats
  // as an infinite error indicator at that point.
  std::optional<LocalFit> fit_at(const SampleSet& set, const Vector& theta, RngStream& rng);

  ApproxKind kind() const { return kind_; }

 private:
  std::optional<LocalFit> fit_poly(const SampleSet& set, const Vector& theta);
  std::optional<LocalFit> fit_gaussian_process(const SampleSet& set, const Vector& theta,
                                               RngStream& rng);
  double compose(const Vector& theta, const Vector& outputs) const;

  ApproxKind kind_;
  TargetMode mode_;
  const ProblemSpec* problem_;
  GPFitOptions gp_options_;
  int gp_batches_;
  int sample_count_;

  struct CacheEntry {
    Vector theta;
    std::uint64_t version;
    std::optional<LocalFit> fit;
  };
  std::deque<CacheEntry> cache_;

  // Warm start carried between GP fits; hyperparameters drift slowly along
  // the chain, so the previous optimum is a good initial point.
  std::optional<Vector> last_lengthscales_;
  std::optional<double> last_nugget_;
  std::uint64_t last_gp_version_ = 0;
};

}  // namespace lamcmc
