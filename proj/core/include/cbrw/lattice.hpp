#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cbrw/errors.hpp"
#include "cbrw/rng.hpp"

namespace cbrw {

// Lattice site / integer offset on Z^d.
using Site = std::vector<std::int32_t>;

std::string site_to_string(const Site& s);
double dot(const Site& s, std::span<const double> v);

struct JumpEntry {
  Site offset;
  double rate;
};

struct CumulantReport {
  std::vector<double> s;
  double value = 0.0;            // H(s), units 1/time
  std::vector<double> grad;      // nabla H
  std::vector<double> hess;      // d x d, row-major; symmetric positive-definite
};

// One row of the homogeneous rate matrix Q: finite-support jump rates q(0,y)
// with total rate q. Offsets must span Z^d so the chain is irreducible.
class JumpKernel {
public:
  static JumpKernel validate(int dim, std::vector<JumpEntry> jumps, double total_rate);

  int dim() const { return dim_; }
  double total_rate() const { return total_rate_; }
  const std::vector<JumpEntry>& jumps() const { return jumps_; }
  std::span<const double> cum_probs() const { return cum_probs_; }
  bool symmetric() const { return symmetric_; }
  int max_abs_offset() const { return max_abs_offset_; }

  // mean jump E[Y] (per jump, not per unit time)
  std::vector<double> mean_jump() const;

  // H(s) = sum_y (e^{<s,y>}-1) q(0,y) with gradient and Hessian
  CumulantReport cumulant(std::span<const double> s) const;

  // directional cumulant H_r(s) = H(s r) and its first two s-derivatives
  void cumulant_dir(std::span<const double> r, double s,
                    double& h, double& dh, double& d2h) const;

  // one jump offset sampled from p(y) = q(0,y)/q
  const Site& sample_jump(RngStream& rng) const {
    return jumps_[rng.pick(cum_probs_)].offset;
  }

private:
  JumpKernel() = default;
  int dim_ = 0;
  double total_rate_ = 0.0;
  std::vector<JumpEntry> jumps_;
  std::vector<double> cum_probs_;
  bool symmetric_ = false;
  int max_abs_offset_ = 0;
};

// Piecewise-constant path of the walk: state i holds on [times[i], times[i+1]).
struct WalkPath {
  std::vector<double> times;      // times[0] == 0
  std::vector<Site> positions;    // positions[0] == start
};

WalkPath sample_path(const JumpKernel& kernel, const Site& start, double horizon,
                     RngStream rng);

}  // namespace cbrw
