#pragma once

#include <optional>
#include <vector>

#include "cbrw/lattice.hpp"

namespace cbrw {

// Direction-indexed rate function data for the projected walk <S(t), r>:
// H_r(s) = H(s r), Lambda_r = Fenchel conjugate, lambda_r(theta) = Lambda_r',
// D_r(theta) = H_r''(lambda_r(theta)).
struct RateFunctionPoint {
  double theta = 0.0;
  double lambda = 0.0;   // tilt solving H_r'(lambda) = theta
  double rate = 0.0;     // Lambda_r(theta)
  double variance = 0.0; // D_r(theta)
};

struct DirectionalRate {
  std::vector<double> r;       // H(r) = nu
  double nu = 0.0;
  double theta0 = 0.0;         // H_r'(1) > nu
  double mean_speed = 0.0;     // q E<Y, r> = H_r'(0)
  std::optional<double> lattice_span;  // r* when <x, r> is lattice-valued
};

// s* > 0 with H(s* n) = nu on the unit ray n; unique by convexity and H(0)=0.
std::vector<double> solve_r_on_ray(const JumpKernel& kernel, double nu,
                                   std::span<const double> direction, double tol = 1e-12);

// z(r) = nu grad H(r) / <grad H(r), r>, the limit-shape point touched by r.
std::vector<double> limit_shape_point(const JumpKernel& kernel, double nu,
                                      std::span<const double> r);

RateFunctionPoint rate_function(const JumpKernel& kernel, std::span<const double> r,
                                double theta, double tol = 1e-12);

// e^{-t Lambda_r(x/t)} >= P(<S(t), r> >= x) for x/t at or above the mean drift.
double chernoff_bound(const JumpKernel& kernel, std::span<const double> r, double t, double x);

// Bahadur-Rao-type refinement of the tail. Lattice form (span h):
//   h e^{-t Lambda} / ((1 - e^{-h lambda}) sqrt(2 pi t D)),
// non-lattice form: e^{-t Lambda} / (lambda sqrt(2 pi t D)).
double tail_asymptotic(const JumpKernel& kernel, std::span<const double> r, double t, double x,
                       std::optional<double> lattice_span);

// Rational-ratio detection for the span r* of <x, r>, x in Z^d: continued
// fractions with denominator cap; users may override via config.
std::optional<double> detect_lattice_span(std::span<const double> r, double tol = 1e-9,
                                          long den_cap = 1000000);

DirectionalRate directional_rate(const JumpKernel& kernel, double nu,
                                 std::span<const double> r);

// Unit directions: d=1 {+1,-1}; d=2 uniform angles; d>=3 Fibonacci sphere.
std::vector<std::vector<double>> sample_directions(int dim, int n = 0);

struct ShapePoint {
  std::vector<double> direction;  // unit n
  std::vector<double> r;          // r(n) on R
  std::vector<double> z;          // z(r) on P
  std::optional<double> lattice_span;
};

struct FrontShape {
  double nu = 0.0;
  std::vector<ShapePoint> points;
};

FrontShape build_front_shape(const JumpKernel& kernel, double nu, int n_directions = 0);

enum class Membership { InO, InQ, BoundaryBand };

// Classification of x against O_eps / Q_eps by the sampled directions:
// max_i <x, r_i> > nu + eps -> O_eps; < nu - eps for all -> Q_eps.
Membership membership(const FrontShape& shape, std::span<const double> x, double eps);

}  // namespace cbrw
