#include "cbrw/hitting.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "cbrw/linear_solver.hpp"
#include "cbrw/marginal.hpp"

namespace cbrw {

double TabooHittingSamples::hit_fraction() const {
  std::size_t h = 0;
  for (const auto& o : outcomes) h += o.status == HitStatus::Hit;
  return outcomes.empty() ? 0.0 : static_cast<double>(h) / outcomes.size();
}

double TabooHittingSamples::censored_fraction() const {
  std::size_t c = 0;
  for (const auto& o : outcomes) c += o.status == HitStatus::Censored;
  return outcomes.empty() ? 0.0 : static_cast<double>(c) / outcomes.size();
}

namespace {

bool member(const std::vector<Site>& set, const Site& x) {
  return std::find(set.begin(), set.end(), x) != set.end();
}

HitOutcome one_sample(const JumpKernel& kernel, const Site& from, const Site& target,
                      const std::vector<Site>& taboo, bool after_exit, double horizon,
                      RngStream rng) {
  const double q = kernel.total_rate();
  Site x = from;
  double t = 0.0;
  if (after_exit) {
    const Site& off = kernel.sample_jump(rng);
    for (std::size_t a = 0; a < x.size(); ++a) x[a] += off[a];
    if (x == target) return {HitStatus::Hit, 0.0};
    if (member(taboo, x)) return {HitStatus::TabooAbsorbed, 0.0};
  } else {
    if (x == target) return {HitStatus::Hit, 0.0};
    if (member(taboo, x)) return {HitStatus::TabooAbsorbed, 0.0};
  }
  for (;;) {
    t += rng.exponential(q);
    if (t > horizon) return {HitStatus::Censored, horizon};
    const Site& off = kernel.sample_jump(rng);
    for (std::size_t a = 0; a < x.size(); ++a) x[a] += off[a];
    if (x == target) return {HitStatus::Hit, t};
    if (member(taboo, x)) return {HitStatus::TabooAbsorbed, t};
  }
}

}  // namespace

TabooHittingSamples sample_taboo_hitting(const JumpKernel& kernel, const Site& from,
                                         const Site& target, const std::vector<Site>& taboo,
                                         bool after_exit, double horizon, std::size_t n,
                                         std::uint64_t seed, int threads) {
  if (member(taboo, target)) throw ModelError("taboo hitting: taboo contains the target");
  if (!(horizon > 0.0)) throw ModelError("taboo hitting: horizon must be > 0");
  TabooHittingSamples s;
  s.from = from;
  s.target = target;
  s.taboo = taboo;
  s.after_exit = after_exit;
  s.horizon = horizon;
  s.outcomes.resize(n);
  // per-sample streams keyed by index: identical results for any thread count
  auto worker = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i)
      s.outcomes[i] = one_sample(kernel, from, target, taboo, after_exit, horizon,
                                 RngStream::substream(seed, i));
  };
  if (threads <= 1 || n < 1024) {
    worker(0, n);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
      if (lo < hi) pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  return s;
}

HittingTransform laplace_mc(const TabooHittingSamples& samples, double lambda) {
  if (lambda < 0.0) throw ModelError("laplace_mc: lambda must be >= 0");
  if (lambda == 0.0 && samples.censored_fraction() > 0.0)
    throw NumericalError("laplace_mc: lambda = 0 with censored samples has unbounded bias");
  double sum = 0.0, sum2 = 0.0;
  for (const auto& o : samples.outcomes) {
    if (o.status != HitStatus::Hit) continue;
    const double v = std::exp(-lambda * o.tau);
    sum += v;
    sum2 += v * v;
  }
  const double n = static_cast<double>(samples.n());
  HittingTransform t;
  t.lambda = lambda;
  t.method = TransformMethod::Mc;
  t.value = sum / n;
  t.std_err = std::sqrt(std::max(0.0, sum2 / n - t.value * t.value) / n);
  t.bias_bound = std::exp(-lambda * samples.horizon) * samples.censored_fraction();
  return t;
}

HittingTransform laplace_linear_system(const JumpKernel& kernel, const Site& from,
                                       const Site& target, const std::vector<Site>& taboo,
                                       bool after_exit, double lambda,
                                       const LinearSystemOptions& opts) {
  if (member(taboo, target)) throw ModelError("laplace_linear_system: taboo contains target");
  if (!(lambda > 0.0)) throw ModelError("laplace_linear_system: lambda must be > 0");
  const double q = kernel.total_rate();
  const bool first_return = (from == target) && !after_exit;

  int reach = 0;
  for (std::size_t a = 0; a < from.size(); ++a)
    reach = std::max(reach, std::abs(from[a] - target[a]));
  int radius = std::max(opts.initial_radius, reach + kernel.max_abs_offset() + 1);

  auto evaluate = [&](int R) {
    BoxResolvent box(kernel, target, R, lambda, target, taboo);
    box.solve(opts.inner_tol, opts.max_iterations);
    if (!box.converged())
      throw NumericalError("laplace_linear_system: inner iteration did not converge");
    if (after_exit || first_return) {
      double v = 0.0;
      for (const auto& j : kernel.jumps()) {
        Site y = from;
        for (std::size_t a = 0; a < y.size(); ++a) y[a] += j.offset[a];
        v += (j.rate / q) * box.value_at(y);
      }
      return first_return ? v * q / (lambda + q) : v;
    }
    return box.value_at(from);
  };

  double prev = evaluate(radius);
  for (;;) {
    if (2 * radius > opts.radius_cap)
      throw NumericalError("laplace_linear_system: radius cap reached without convergence");
    radius *= 2;
    const double cur = evaluate(radius);
    if (std::abs(cur - prev) < opts.tol) {
      HittingTransform t;
      t.lambda = lambda;
      t.method = TransformMethod::LinearSystem;
      t.value = cur;
      t.std_err = 0.0;
      t.bias_bound = std::abs(cur - prev);
      t.radius = radius;
      return t;
    }
    prev = cur;
  }
}

double HittingCdf::at(double t) const {
  if (t <= 0.0) return value.empty() ? 0.0 : value.front();
  const double s = t / h;
  const std::size_t i = static_cast<std::size_t>(s);
  if (i + 1 >= value.size()) return value.back();
  const double w = s - static_cast<double>(i);
  return value[i] * (1.0 - w) + value[i + 1] * w;
}

HittingCdf tabulate_hitting_cdf(const JumpKernel& kernel, const Site& from, const Site& target,
                                const std::vector<Site>& taboo, bool after_exit,
                                bool first_return, double h, double horizon,
                                const UniformizationOptions& opts) {
  if (member(taboo, target)) throw ModelError("tabulate_hitting_cdf: taboo contains target");
  if (first_return && from != target)
    throw ModelError("tabulate_hitting_cdf: first_return requires from == target");
  if (first_return) after_exit = true;
  const double q = kernel.total_rate();
  const int d = kernel.dim();
  const std::uint64_t n_max = poisson_upper_quantile(q * horizon, opts.tail_eps);
  const int mo = kernel.max_abs_offset();
  int radius = opts.box_radius.value_or(static_cast<int>(n_max + 1) * mo);
  for (std::size_t a = 0; a < from.size(); ++a)
    radius = std::max(radius, std::abs(from[a] - target[a]) + mo + 1);
  // states on a margin-padded box around the target
  const int margin = mo;
  const int half = radius + margin;
  std::vector<int> extent(d, 2 * half + 1);
  std::size_t total = 1;
  for (int a = 0; a < d; ++a) total *= extent[a];
  if (total > opts.max_states)
    throw NumericalError("tabulate_hitting_cdf: state box of " + std::to_string(total) +
                         " states exceeds cap; set box_radius or use the MC path");

  std::vector<std::int8_t> kind(total, 0);  // 0 free, 1 target, -1 dead (taboo/margin)
  auto flat = [&](const Site& x, bool& inside) {
    std::size_t f = 0;
    inside = true;
    for (int a = 0; a < d; ++a) {
      const int c = x[a] - target[a] + half;
      if (c < 0 || c >= extent[a]) { inside = false; return std::size_t{0}; }
      f = f * extent[a] + c;
    }
    return f;
  };
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rem = i;
    for (int a = d - 1; a >= 0; --a) {
      const int c = static_cast<int>(rem % extent[a]) - half;
      rem /= extent[a];
      if (std::abs(c) > radius) { kind[i] = -1; break; }
    }
  }
  bool inside = false;
  kind[flat(target, inside)] = 1;
  for (const auto& tb : taboo) {
    const std::size_t i = flat(tb, inside);
    if (inside) kind[i] = -1;
  }

  std::vector<std::ptrdiff_t> stride(d);
  std::ptrdiff_t acc = 1;
  for (int a = d - 1; a >= 0; --a) { stride[a] = acc; acc *= extent[a]; }
  struct Jmp { std::ptrdiff_t shift; double p; };
  std::vector<Jmp> jl;
  for (const auto& j : kernel.jumps()) {
    std::ptrdiff_t s = 0;
    for (int a = 0; a < d; ++a) s += j.offset[a] * stride[a];
    jl.push_back({s, j.rate / q});
  }

  // absorbed-by-step-n mass a_n and boundary leak
  std::vector<double> a(n_max + 1, 0.0), leak(n_max + 1, 0.0);
  std::vector<double> cur(total, 0.0), nxt(total, 0.0);
  if (after_exit) {
    for (const auto& j : kernel.jumps()) {
      Site y = from;
      for (int ax = 0; ax < d; ++ax) y[ax] += j.offset[ax];
      const std::size_t i = flat(y, inside);
      const double p = j.rate / q;
      if (!inside)
        leak[0] += p;
      else if (kind[i] == -1)
        leak[0] += p;
      else if (kind[i] == 1)
        a[0] += p;
      else
        cur[i] += p;
    }
  } else {
    const std::size_t i0 = flat(from, inside);
    if (!inside) throw ModelError("tabulate_hitting_cdf: from outside the box");
    if (kind[i0] == 1)
      a[0] = 1.0;
    else if (kind[i0] == -1)
      leak[0] = 1.0;
    else
      cur[i0] = 1.0;
  }
  for (std::uint64_t n = 1; n <= n_max; ++n) {
    a[n] = a[n - 1];
    leak[n] = leak[n - 1];
    std::fill(nxt.begin(), nxt.end(), 0.0);
    for (std::size_t i = 0; i < total; ++i) {
      const double c = cur[i];
      if (c == 0.0) continue;
      for (const auto& j : jl) {
        const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(i) + j.shift;
        const double m = c * j.p;
        if (k < 0 || k >= static_cast<std::ptrdiff_t>(total) || kind[k] == -1)
          leak[n] += m;
        else if (kind[k] == 1)
          a[n] += m;
        else
          nxt[static_cast<std::size_t>(k)] += m;
      }
    }
    cur.swap(nxt);
  }

  HittingCdf cdf;
  cdf.h = h;
  cdf.horizon = horizon;
  cdf.leak = leak[n_max];
  const std::size_t ngrid = static_cast<std::size_t>(std::floor(horizon / h + 0.5)) + 1;
  cdf.value.assign(ngrid, 0.0);
  // Poisson mixing; first_return shifts the jump index by one (the initial
  // Exp(q) holding is the first jump of the composed law)
  for (std::size_t i = 0; i < ngrid; ++i) {
    const double t = static_cast<double>(i) * h;
    if (t == 0.0) {
      // pois(0;0) = 1: only the step-0 atom contributes; the composed
      // first-return law has no atom at 0
      cdf.value[i] = first_return ? 0.0 : a[0];
      continue;
    }
    const double mean = q * t;
    double v = 0.0;
    for (std::uint64_t n = 0; n <= n_max; ++n) {
      const std::uint64_t jumps = first_return ? n + 1 : n;
      const double lw = log_poisson_pmf(jumps, mean);
      if (lw < -760.0) continue;
      v += std::exp(lw) * a[n];
    }
    cdf.value[i] = std::min(1.0, v);
  }
  cdf.mass_at_horizon = cdf.value.back();
  return cdf;
}

Extrapolation extrapolate_to_zero(const std::vector<double>& lambdas,
                                  const std::vector<double>& values) {
  if (lambdas.size() < 3 || lambdas.size() != values.size())
    throw ModelError("extrapolate_to_zero: need >= 3 (lambda, value) pairs");
  // assumes lambdas form a geometric sequence ratio rho < 1 (e.g. /4 steps):
  // v_k = v0 - b lambda_k^p; estimate p from successive differences
  const std::size_t m = lambdas.size();
  const double rho = lambdas[1] / lambdas[0];
  const double d1 = values[m - 2] - values[m - 3];
  const double d2 = values[m - 1] - values[m - 2];
  Extrapolation ex;
  if (d1 == 0.0 || d2 == 0.0 || d2 / d1 <= 0.0) {
    ex.value = values.back();
    ex.est_order = 0.0;
    ex.residual = std::abs(d2);
    return ex;
  }
  const double p = std::log(d2 / d1) / std::log(rho);
  const double f = std::pow(rho, p);
  ex.est_order = p;
  ex.value = values.back() + d2 * f / (1.0 - f);
  ex.residual = std::abs(d2 * f / (1.0 - f));
  return ex;
}

}  // namespace cbrw
