#include "cbrw/linear_solver.hpp"

#include <cmath>

namespace cbrw {

BoxResolvent::BoxResolvent(const JumpKernel& kernel, Site center, int radius, double lambda,
                           const Site& target, const std::vector<Site>& taboo)
    : kernel_(kernel), center_(std::move(center)), radius_(radius), lambda_(lambda) {
  const int d = kernel.dim();
  // margin ring of fixed zeros so flat-index stencil shifts can never alias
  // into a neighboring row of the array
  const int margin = kernel.max_abs_offset();
  const int half = radius + margin;
  extent_.assign(d, 2 * half + 1);
  std::size_t total = 1;
  for (int a = 0; a < d; ++a) total *= extent_[a];
  u_.assign(total, 0.0);
  fixed_.assign(total, 0);
  // mark the margin (outside the radius box) as absorbing-to-zero
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rem = i;
    for (int a = d - 1; a >= 0; --a) {
      const int c = static_cast<int>(rem % extent_[a]) - half;
      rem /= extent_[a];
      if (std::abs(c) > radius) { fixed_[i] = -1; break; }
    }
  }
  bool inside = false;
  const std::size_t it = flat(target, inside);
  if (!inside || fixed_[it] == -1) throw ModelError("BoxResolvent: target outside box");
  fixed_[it] = 1;
  u_[it] = 1.0;
  for (const auto& tb : taboo) {
    const std::size_t i = flat(tb, inside);
    if (inside) fixed_[i] = -1;
  }
}

std::size_t BoxResolvent::flat(const Site& x, bool& inside) const {
  std::size_t f = 0;
  inside = true;
  const int half = (extent_[0] - 1) / 2;
  for (std::size_t a = 0; a < x.size(); ++a) {
    const int c = x[a] - center_[a] + half;
    if (c < 0 || c >= extent_[a]) { inside = false; return 0; }
    f = f * extent_[a] + c;
  }
  return f;
}

double BoxResolvent::value_at(const Site& x) const {
  bool inside = false;
  const std::size_t i = flat(x, inside);
  if (!inside) return 0.0;
  if (fixed_[i] == -1) return 0.0;
  return u_[i];
}

void BoxResolvent::solve(double tol, int max_iterations) {
  if (kernel_.symmetric())
    conjugate_gradient(tol, max_iterations);
  else
    gauss_seidel(tol, max_iterations);
}

namespace {

struct FlatJump {
  std::ptrdiff_t shift;
  double rate;
};

std::vector<FlatJump> flat_jumps(const JumpKernel& k, const std::vector<int>& extent) {
  const int d = k.dim();
  std::vector<std::ptrdiff_t> stride(d);
  std::ptrdiff_t acc = 1;
  for (int a = d - 1; a >= 0; --a) { stride[a] = acc; acc *= extent[a]; }
  std::vector<FlatJump> out;
  for (const auto& j : k.jumps()) {
    std::ptrdiff_t s = 0;
    for (int a = 0; a < d; ++a) s += j.offset[a] * stride[a];
    out.push_back({s, j.rate});
  }
  return out;
}

// neighbor access with out-of-box = 0; boundary cells are handled by marking
// a one-cell margin as taboo-like in the callers below instead, so the hot
// loop can skip bounds checks only when safe. Keep it simple: bounds checks.
inline bool in_box(std::ptrdiff_t i, std::ptrdiff_t n) { return i >= 0 && i < n; }

}  // namespace

void BoxResolvent::gauss_seidel(double tol, int max_iterations) {
  const auto jl = flat_jumps(kernel_, extent_);
  const double diag = lambda_ + kernel_.total_rate();
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(u_.size());
  // interior cells whose whole stencil stays in the flat array; the wrap-around
  // rows/columns those shifts could alias are zero-fixed by the margin below
  for (int it = 0; it < max_iterations; ++it) {
    double change = 0.0;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      if (fixed_[i] != 0) continue;
      double s = 0.0;
      for (const auto& j : jl) {
        const std::ptrdiff_t k = i + j.shift;
        if (in_box(k, n) && fixed_[k] != -1) s += j.rate * u_[k];
      }
      const double nu_i = s / diag;
      change = std::max(change, std::abs(nu_i - u_[i]));
      u_[i] = nu_i;
    }
    if (change < tol) { converged_ = true; return; }
  }
  converged_ = false;
}

void BoxResolvent::conjugate_gradient(double tol, int max_iterations) {
  // A u = b with A = (lambda+q) I - Q_free and b the target column
  const auto jl = flat_jumps(kernel_, extent_);
  const double diag = lambda_ + kernel_.total_rate();
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(u_.size());
  std::vector<double> b(n, 0.0), x(n, 0.0), r(n), p(n), ap(n);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (fixed_[i] != 0) continue;
    for (const auto& j : jl) {
      const std::ptrdiff_t k = i + j.shift;
      if (in_box(k, n) && fixed_[k] == 1) b[i] += j.rate;
    }
  }
  auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      if (fixed_[i] != 0) { out[i] = 0.0; continue; }
      double s = diag * v[i];
      for (const auto& j : jl) {
        const std::ptrdiff_t k = i + j.shift;
        if (in_box(k, n) && fixed_[k] == 0) s -= j.rate * v[k];
      }
      out[i] = s;
    }
  };
  r = b;
  p = r;
  double rr = 0.0;
  for (std::ptrdiff_t i = 0; i < n; ++i) rr += r[i] * r[i];
  const double rr0 = rr;
  if (rr0 == 0.0) { converged_ = true; return; }
  for (int it = 0; it < max_iterations; ++it) {
    apply(p, ap);
    double pap = 0.0;
    for (std::ptrdiff_t i = 0; i < n; ++i) pap += p[i] * ap[i];
    if (pap <= 0.0) break;
    const double a = rr / pap;
    double rr_new = 0.0;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      x[i] += a * p[i];
      r[i] -= a * ap[i];
      rr_new += r[i] * r[i];
    }
    if (std::sqrt(rr_new) < tol * std::sqrt(rr0) || std::sqrt(rr_new) < 1e-300) {
      converged_ = true;
      break;
    }
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::ptrdiff_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }
  for (std::ptrdiff_t i = 0; i < n; ++i)
    if (fixed_[i] == 0) u_[i] = x[i];
}

}  // namespace cbrw
