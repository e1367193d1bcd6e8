#pragma once

#include <optional>
#include <vector>

#include "lamcmc/sample_store.hpp"

namespace lamcmc {

enum class PolyOrder { kLinear, kQuadratic };

// Sample-count bookkeeping for a local fit: the minimum number of points that
// defines a polynomial of the given order (N_def) and the inflated regression
// count N actually used.
struct FitSpec {
  int n_def;
  int n_regression;
};

// N_def = d+1 (linear) or (d+1)(d+2)/2 (quadratic); N = ceil(m * N_def) with
// m = max(sqrt(d), low_d_floor). The floor keeps a usable surplus of samples
// in very low dimensions, where sqrt(d) alone adds almost nothing.
FitSpec sample_counts(int d, PolyOrder order, double low_d_floor = 1.5);

// Number of monomial basis columns: 1 + d (linear) or (d+1)(d+2)/2 (quadratic).
int basis_size(int d, PolyOrder order);

// Tricube regression weight: 1 on [0, R_def], 0 beyond R, and
// (1 - ((dist - R_def)/(R - R_def))^3)^3 in between. Degenerate plateau when
// R == R_def: 1 up to R, 0 beyond.
double tricube_weight(double dist, double r_def, double r);

// Local polynomial regressor centered at a point. Coefficients are stored in
// the rescaled coordinates theta_hat = (theta - center)/radius; evaluate()
// applies the rescaling internally and accepts raw coordinates.
struct PolyModel {
  PolyOrder order;
  Vector center;
  double radius;       // distance to the farthest included neighbor
  Vector constants;    // a_j, one per output; also the value at the center
  Matrix linear_terms; // n x d
  std::vector<Matrix> hessians;  // n symmetric d x d matrices (quadratic only)

  Vector evaluate(const Vector& point) const;
};

// Weighted local least-squares fit over a sorted neighbor list.
//
// Neighbors must be sorted by increasing distance from `center` (the order
// produced by SampleSet::nearest). The design matrix is factorized with a
// column-pivoted QR of sqrt(W)*Phi; a trailing R diagonal smaller than
// rank_tolerance times the leading one signals rank deficiency and returns
// nullopt, which callers treat as a mandatory refinement trigger.
//
// omit_index (into `neighbors`) drops that row from both sides, the
// leave-one-out variation used by the cross-validation error indicators.
std::optional<PolyModel> fit(const SampleSet& set, const std::vector<SampleSet::Neighbor>& neighbors,
                             const Vector& center, PolyOrder order,
                             std::optional<int> omit_index = std::nullopt,
                             double rank_tolerance = 1e-10);

// Values at the fit center of the nominal model and of every leave-one-out
// variation, computed from a single factorization.
struct LooCenterValues {
  Vector nominal;        // n-vector: full-fit value at the center
  Matrix leave_one_out;  // N x n: row j = value at center of the fit omitting j
};

// Fast path used by the chain's error indicators. The leave-one-out center
// values come from the downdating identity on the full weighted normal
// matrix (Sherman-Morrison on the QR factors), which matches the naive
// per-j refit exactly in exact arithmetic; rows where the identity is
// ill-conditioned fall back to a refit. Returns nullopt on rank deficiency.
std::optional<LooCenterValues> loo_center_values(const SampleSet& set,
                                                 const std::vector<SampleSet::Neighbor>& neighbors,
                                                 const Vector& center, PolyOrder order,
                                                 double rank_tolerance = 1e-10);

}  // namespace lamcmc
