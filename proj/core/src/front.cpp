#include "cbrw/front.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace cbrw {

namespace {

std::vector<double> scaled(std::span<const double> v, double c) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = c * v[i];
  return out;
}

}  // namespace

std::vector<double> solve_r_on_ray(const JumpKernel& kernel, double nu,
                                   std::span<const double> direction, double tol) {
  if (!(nu > 0.0)) throw ModelError("solve_r_on_ray: nu must be > 0");
  double h, dh, d2h;
  // bracket: H(s n) - nu changes sign on the increasing branch
  double s_hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    kernel.cumulant_dir(direction, s_hi, h, dh, d2h);
    if (h > nu) break;
    s_hi *= 2.0;
  }
  kernel.cumulant_dir(direction, s_hi, h, dh, d2h);
  if (h <= nu) throw NumericalError("solve_r_on_ray: no bracket (degenerate direction)");
  double s_lo = 0.0;
  double s = 0.5 * s_hi;
  for (int it = 0; it < 200; ++it) {
    kernel.cumulant_dir(direction, s, h, dh, d2h);
    const double f = h - nu;
    if (f > 0.0) s_hi = s; else s_lo = s;
    double step = (dh > 0.0) ? f / dh : 0.0;
    double snew = s - step;
    if (!(snew > s_lo && snew < s_hi)) snew = 0.5 * (s_lo + s_hi);
    if (std::abs(snew - s) < tol * std::max(1.0, s)) { s = snew; break; }
    s = snew;
  }
  return scaled(direction, s);
}

std::vector<double> limit_shape_point(const JumpKernel& kernel, double nu,
                                      std::span<const double> r) {
  const auto rep = kernel.cumulant(r);
  double denom = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) denom += rep.grad[i] * r[i];
  if (!(denom > 0.0))
    throw NumericalError("limit_shape_point: <grad H(r), r> <= 0 (invalid r)");
  return scaled(rep.grad, nu / denom);
}

RateFunctionPoint rate_function(const JumpKernel& kernel, std::span<const double> r,
                                double theta, double tol) {
  double h, dh, d2h;
  kernel.cumulant_dir(r, 0.0, h, dh, d2h);
  const double mean = dh;  // q E<Y, r>
  RateFunctionPoint p;
  p.theta = theta;
  if (theta < mean - 1e-12 * std::max(1.0, std::abs(mean)))
    throw ModelError("rate_function: theta below the mean drift (invalid strict branch)");
  if (std::abs(theta - mean) <= 1e-12 * std::max(1.0, std::abs(mean))) {
    p.lambda = 0.0;
    p.rate = 0.0;
    p.variance = d2h;
    return p;
  }
  // solve H_r'(s) = theta; H_r' is increasing
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 300; ++i) {
    kernel.cumulant_dir(r, hi, h, dh, d2h);
    if (dh > theta) break;
    lo = hi;
    hi *= 2.0;
  }
  double s = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    kernel.cumulant_dir(r, s, h, dh, d2h);
    const double f = dh - theta;
    if (f > 0.0) hi = s; else lo = s;
    double snew = s - f / d2h;
    if (!(snew > lo && snew < hi)) snew = 0.5 * (lo + hi);
    if (std::abs(snew - s) < tol * std::max(1.0, std::abs(s))) { s = snew; break; }
    s = snew;
  }
  kernel.cumulant_dir(r, s, h, dh, d2h);
  p.lambda = s;
  p.rate = theta * s - h;
  p.variance = d2h;
  return p;
}

double chernoff_bound(const JumpKernel& kernel, std::span<const double> r, double t, double x) {
  if (t < 0.0) throw ModelError("chernoff_bound: t must be >= 0");
  if (t == 0.0) return x <= 0.0 ? 1.0 : 0.0;
  const auto p = rate_function(kernel, r, x / t);
  return std::exp(-t * p.rate);
}

double tail_asymptotic(const JumpKernel& kernel, std::span<const double> r, double t, double x,
                       std::optional<double> lattice_span) {
  double h, dh, d2h;
  kernel.cumulant_dir(r, 0.0, h, dh, d2h);
  if (!(x / t > dh))
    throw ModelError("tail_asymptotic: theta must be strictly above the mean drift");
  const auto p = rate_function(kernel, r, x / t);
  const double body = std::exp(-t * p.rate) / std::sqrt(2.0 * std::numbers::pi * t * p.variance);
  if (lattice_span) {
    const double span = *lattice_span;
    return body * span / (1.0 - std::exp(-span * p.lambda));
  }
  return body / p.lambda;
}

std::optional<double> detect_lattice_span(std::span<const double> r, double tol, long den_cap) {
  // continued-fraction rational reconstruction of each ratio r_i / r_ref
  std::size_t ref = 0;
  double best = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i)
    if (std::abs(r[i]) > best) { best = std::abs(r[i]); ref = i; }
  if (best == 0.0) return std::nullopt;

  auto to_rational = [&](double x, long& num, long& den) {
    long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    double v = x;
    for (int it = 0; it < 64; ++it) {
      const double a = std::floor(v);
      const long ai = static_cast<long>(a);
      const long p2 = ai * p1 + p0, q2 = ai * q1 + q0;
      if (q2 > den_cap) return false;
      p0 = p1; q0 = q1; p1 = p2; q1 = q2;
      if (std::abs(x - static_cast<double>(p1) / q1) <= tol * std::max(1.0, std::abs(x))) {
        num = p1; den = q1;
        return true;
      }
      const double frac = v - a;
      if (frac < 1e-15) break;
      v = 1.0 / frac;
    }
    num = p1; den = q1;
    return std::abs(x - static_cast<double>(p1) / q1) <= tol * std::max(1.0, std::abs(x));
  };

  std::vector<long> nums(r.size()), dens(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] == 0.0) { nums[i] = 0; dens[i] = 1; continue; }
    if (!to_rational(r[i] / r[ref], nums[i], dens[i])) return std::nullopt;
    if (nums[i] < 0) { /* sign kept in nums */ }
  }
  long lcm = 1;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const long g = std::gcd(lcm, dens[i]);
    lcm = lcm / g * dens[i];
    if (lcm > den_cap) return std::nullopt;
  }
  // r_i = rbar_i * span with rbar_i = nums_i * (lcm / dens_i), gcd(rbar) = 1
  long g = 0;
  for (std::size_t i = 0; i < r.size(); ++i) g = std::gcd(g, std::labs(nums[i] * (lcm / dens[i])));
  if (g == 0) return std::nullopt;
  return std::abs(r[ref]) * static_cast<double>(g) / static_cast<double>(lcm);
}

DirectionalRate directional_rate(const JumpKernel& kernel, double nu,
                                 std::span<const double> r) {
  DirectionalRate d;
  d.r.assign(r.begin(), r.end());
  d.nu = nu;
  double h, dh, d2h;
  kernel.cumulant_dir(r, 1.0, h, dh, d2h);
  if (std::abs(h - nu) > 1e-10 * std::max(1.0, nu))
    throw ModelError("directional_rate: H(r) != nu");
  d.theta0 = dh;
  kernel.cumulant_dir(r, 0.0, h, dh, d2h);
  d.mean_speed = dh;
  d.lattice_span = detect_lattice_span(r);
  return d;
}

std::vector<std::vector<double>> sample_directions(int dim, int n) {
  std::vector<std::vector<double>> out;
  if (dim == 1) {
    out.push_back({1.0});
    out.push_back({-1.0});
    return out;
  }
  if (dim == 2) {
    const int m = n > 0 ? n : 720;
    out.reserve(m);
    for (int i = 0; i < m; ++i) {
      const double a = 2.0 * std::numbers::pi * i / m;
      out.push_back({std::cos(a), std::sin(a)});
    }
    return out;
  }
  // Fibonacci sphere for d = 3; for d > 3 a deterministic low-discrepancy set
  const int m = n > 0 ? n : 2000;
  if (dim == 3) {
    const double ga = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < m; ++i) {
      const double z = 1.0 - 2.0 * (i + 0.5) / m;
      const double rad = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double a = ga * i;
      out.push_back({rad * std::cos(a), rad * std::sin(a), z});
    }
    return out;
  }
  RngStream rng(0xFEEDFACEULL + dim);
  for (int i = 0; i < m; ++i) {
    std::vector<double> v(dim);
    double norm = 0.0;
    for (int a = 0; a < dim; ++a) {
      // Box-Muller from the deterministic stream
      const double u1 = std::max(1e-300, rng.next_double());
      const double u2 = rng.next_double();
      v[a] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
      norm += v[a] * v[a];
    }
    norm = std::sqrt(norm);
    for (auto& c : v) c /= norm;
    out.push_back(std::move(v));
  }
  return out;
}

FrontShape build_front_shape(const JumpKernel& kernel, double nu, int n_directions) {
  FrontShape shape;
  shape.nu = nu;
  for (auto& n : sample_directions(kernel.dim(), n_directions)) {
    ShapePoint p;
    p.direction = n;
    p.r = solve_r_on_ray(kernel, nu, n);
    p.z = limit_shape_point(kernel, nu, p.r);
    p.lattice_span = detect_lattice_span(p.r);
    shape.points.push_back(std::move(p));
  }
  return shape;
}

Membership membership(const FrontShape& shape, std::span<const double> x, double eps) {
  if (shape.points.empty()) throw ModelError("membership: empty direction sample");
  if (eps < 0.0) throw ModelError("membership: eps must be >= 0");
  double m = -HUGE_VAL;
  for (const auto& p : shape.points) {
    double s = 0.0;
    for (std::size_t a = 0; a < x.size(); ++a) s += x[a] * p.r[a];
    m = std::max(m, s);
  }
  if (m > shape.nu + eps) return Membership::InO;
  if (m < shape.nu - eps) return Membership::InQ;
  return Membership::BoundaryBand;
}

}  // namespace cbrw
