#pragma once

#include <iosfwd>

#include "lamcmc/chain.hpp"

namespace lamcmc {

// Pooled sample covariance of the post-burn-in rows of several chains
// (denominator: pooled count - 1). Throws when fewer than d+2 samples
// survive the burn-in.
Matrix pooled_reference(const std::vector<Matrix>& chains, double burn_in_fraction = 0.10);

// How many leading rows a given burn-in fraction removes.
long burn_in_steps(long chain_length, double burn_in_fraction);

struct ErrorTracePoint {
  long step;     // number of post-burn-in samples included
  double error;  // ||cov_hat - ref||_F / ||ref||_F
};

// Relative covariance error of the running post-burn-in sample covariance
// against a reference, evaluated on a geometric grid of about `grid_points`
// steps (0 evaluates every step). Running moments are accumulated in a
// single stable pass.
std::vector<ErrorTracePoint> relative_cov_error_trace(const Matrix& chain,
                                                      const Matrix& reference_cov,
                                                      double burn_in_fraction = 0.10,
                                                      int grid_points = 200);

struct RefinementWindow {
  long begin;        // first step of the window (1-based, inclusive)
  long end;          // last step (inclusive)
  long total;        // refinements in the window
  long random;       // of which random-cause
  // Undefined (not zero) when the window saw no refinements.
  std::optional<double> random_share() const;
};

// Windowed share of random-cause refinements over a chain's refinement log.
std::vector<RefinementWindow> refinement_breakdown(const std::vector<RefinementEvent>& log,
                                                   long chain_length, long window = 10000);

// CSV emitters used by the experiment reports. Each takes per-chain series;
// rows are (chain, step, value).
void write_error_trace_csv(std::ostream& os,
                           const std::vector<std::vector<ErrorTracePoint>>& traces);
void write_cost_trace_csv(std::ostream& os, const std::vector<std::vector<StepRecord>>& records,
                          int grid_points = 200);
void write_refinements_csv(std::ostream& os,
                           const std::vector<std::vector<RefinementWindow>>& breakdowns);

}  // namespace lamcmc
