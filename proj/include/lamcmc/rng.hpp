#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace lamcmc {

// Deterministic random stream. Every stochastic component of the library owns
// a named stream derived from the master seed, so that independent components
// never share state and runs are exactly reproducible.
//
// normal() uses Box-Muller without caching the second variate, so the number
// of underlying engine draws per call is fixed. This keeps paired-run
// experiments (true chain vs surrogate chain on the same stream) aligned.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  // Derives an independent child stream from a label. Uses splitmix-style
  // mixing of the parent seed with a hash of the label.
  static RngStream derive(std::uint64_t master_seed, const std::string& label);

  double uniform();                         // U(0,1)
  double uniform(double lo, double hi);     // U(lo,hi)
  double normal();                          // N(0,1)
  std::uint64_t integer(std::uint64_t n);   // uniform in {0,...,n-1}

 private:
  std::mt19937_64 engine_;
};

}  // namespace lamcmc
