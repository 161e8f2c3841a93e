#pragma once

#include <vector>

#include "cbrw/lattice.hpp"

namespace cbrw {

// Resolvent-type solve on a box of Z^d around `center` with absorbing data:
//   (lambda + q) u(y) = sum_off rate(off) u(y + off)
// u(target)=1, u=0 on taboo sites and outside the box (certified lower bound).
// Gauss-Seidel for general kernels (strictly diagonally dominant for
// lambda > 0), conjugate gradients for symmetric ones.
class BoxResolvent {
public:
  BoxResolvent(const JumpKernel& kernel, Site center, int radius, double lambda,
               const Site& target, const std::vector<Site>& taboo);

  void solve(double tol, int max_iterations);
  double value_at(const Site& x) const;  // 1 at target, 0 on taboo/outside
  bool converged() const { return converged_; }
  int radius() const { return radius_; }

private:
  const JumpKernel& kernel_;
  Site center_;
  int radius_;
  double lambda_;
  std::vector<int> extent_;
  std::vector<double> u_;
  std::vector<std::int8_t> fixed_;  // 0 free, 1 target, -1 taboo
  bool converged_ = false;

  std::size_t flat(const Site& x, bool& inside) const;
  void gauss_seidel(double tol, int max_iterations);
  void conjugate_gradient(double tol, int max_iterations);
};

}  // namespace cbrw
