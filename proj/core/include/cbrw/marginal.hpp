#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cbrw/lattice.hpp"

namespace cbrw {

// Dense probability table on an axis-aligned box of Z^d.
struct BoxTable {
  int dim = 0;
  Site lo;                      // smallest corner
  std::vector<int> extent;      // per-axis size
  std::vector<double> prob;     // row-major, last axis fastest

  std::size_t size() const { return prob.size(); }
  std::optional<std::size_t> index(const Site& x) const;
  double at(const Site& x) const;  // 0 outside the box
  Site site_of(std::size_t flat) const;
  double total_mass() const;
  std::vector<double> mean() const;
  std::vector<double> covariance() const;  // dim x dim row-major
};

struct MarginalOptions {
  double tail_eps = 1e-12;          // dropped Poisson mass
  std::size_t max_table_size = 1u << 26;
};

// Law of S(t) - S(0): Poisson(q t) mixture of n-fold jump-law convolutions,
// truncated when the remaining Poisson mass drops below tail_eps. Entries are
// exact up to that truncation (all-positive sums, no cancellation).
BoxTable exact_marginal(const JumpKernel& kernel, double t, const MarginalOptions& opts = {});

// log Poisson pmf, safe for large means
double log_poisson_pmf(std::uint64_t n, double mean);

// Smallest N with P(Poisson(mean) > N) <= eps.
std::uint64_t poisson_upper_quantile(double mean, double eps);

// d=1 helper used by the renewal oracle: P(<S(t),e1> > u) for every t on a
// uniform grid, from one set of jump-count convolutions shared across t.
class WalkTailTable {
public:
  WalkTailTable(const JumpKernel& kernel, double t_max, double tail_eps = 1e-13);
  // strict tail P(S(t) > u) for the scalar walk (dim 1 kernels)
  double tail(double t, double u) const;

private:
  double q_;
  std::uint64_t n_max_;
  int halfwidth_;
  std::vector<std::vector<double>> tail_by_n_;  // [n][k+halfwidth] = P(sum_n Y > k - 1)
};

}  // namespace cbrw
