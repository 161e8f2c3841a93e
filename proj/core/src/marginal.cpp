#include "cbrw/marginal.hpp"

#include <algorithm>
#include <cmath>

namespace cbrw {

std::optional<std::size_t> BoxTable::index(const Site& x) const {
  std::size_t flat = 0;
  for (int a = 0; a < dim; ++a) {
    const int c = x[a] - lo[a];
    if (c < 0 || c >= extent[a]) return std::nullopt;
    flat = flat * extent[a] + c;
  }
  return flat;
}

double BoxTable::at(const Site& x) const {
  const auto i = index(x);
  return i ? prob[*i] : 0.0;
}

Site BoxTable::site_of(std::size_t flat) const {
  Site x(dim);
  for (int a = dim - 1; a >= 0; --a) {
    x[a] = lo[a] + static_cast<int>(flat % extent[a]);
    flat /= extent[a];
  }
  return x;
}

double BoxTable::total_mass() const {
  double s = 0.0;
  for (double p : prob) s += p;
  return s;
}

std::vector<double> BoxTable::mean() const {
  std::vector<double> m(dim, 0.0);
  for (std::size_t i = 0; i < prob.size(); ++i) {
    if (prob[i] == 0.0) continue;
    const Site x = site_of(i);
    for (int a = 0; a < dim; ++a) m[a] += prob[i] * x[a];
  }
  return m;
}

std::vector<double> BoxTable::covariance() const {
  const auto m = mean();
  std::vector<double> c(static_cast<std::size_t>(dim) * dim, 0.0);
  for (std::size_t i = 0; i < prob.size(); ++i) {
    if (prob[i] == 0.0) continue;
    const Site x = site_of(i);
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b)
        c[static_cast<std::size_t>(a) * dim + b] += prob[i] * (x[a] - m[a]) * (x[b] - m[b]);
  }
  return c;
}

double log_poisson_pmf(std::uint64_t n, double mean) {
  if (mean == 0.0) return n == 0 ? 0.0 : -HUGE_VAL;
  return -mean + static_cast<double>(n) * std::log(mean) - std::lgamma(static_cast<double>(n) + 1.0);
}

std::uint64_t poisson_upper_quantile(double mean, double eps) {
  // walk right from the mode until the remaining tail is below eps
  std::uint64_t n = static_cast<std::uint64_t>(std::ceil(mean));
  double logp = log_poisson_pmf(n, mean);
  // tail(n) <= pmf(n) / (1 - mean/(n+1)) once n > mean (geometric domination)
  for (;;) {
    ++n;
    logp += std::log(mean) - std::log(static_cast<double>(n));
    const double ratio = mean / static_cast<double>(n + 1);
    if (ratio < 0.9) {
      const double log_tail_bound = logp - std::log1p(-ratio);
      if (log_tail_bound < std::log(eps)) return n;
    }
  }
}

BoxTable exact_marginal(const JumpKernel& kernel, double t, const MarginalOptions& opts) {
  if (t < 0.0) throw ModelError("exact_marginal: t must be >= 0");
  if (!(opts.tail_eps > 0.0 && opts.tail_eps < 1.0))
    throw ModelError("exact_marginal: tail_eps must be in (0,1)");
  const int d = kernel.dim();
  const double mean = kernel.total_rate() * t;
  const std::uint64_t n_max = (t == 0.0) ? 0 : poisson_upper_quantile(mean, opts.tail_eps);

  BoxTable box;
  box.dim = d;
  box.lo.assign(d, 0);
  box.extent.assign(d, 1);
  std::size_t total = 1;
  const int reach = static_cast<int>(n_max) * kernel.max_abs_offset();
  for (int a = 0; a < d; ++a) {
    box.lo[a] = -reach;
    box.extent[a] = 2 * reach + 1;
    total *= box.extent[a];
  }
  if (total > opts.max_table_size)
    throw NumericalError("exact_marginal: table size " + std::to_string(total) +
                         " exceeds cap " + std::to_string(opts.max_table_size));
  box.prob.assign(total, 0.0);

  // flat strides and jump displacements in flat index space
  std::vector<std::ptrdiff_t> stride(d);
  std::ptrdiff_t acc = 1;
  for (int a = d - 1; a >= 0; --a) { stride[a] = acc; acc *= box.extent[a]; }
  struct Jmp { std::ptrdiff_t shift; double p; };
  std::vector<Jmp> jl;
  for (const auto& j : kernel.jumps()) {
    std::ptrdiff_t s = 0;
    for (int a = 0; a < d; ++a) s += j.offset[a] * stride[a];
    jl.push_back({s, j.rate / kernel.total_rate()});
  }

  Site origin(d, 0);
  const std::size_t center = *box.index(origin);
  std::vector<double> cur(total, 0.0), nxt(total, 0.0);
  cur[center] = 1.0;
  box.prob[center] = std::exp(log_poisson_pmf(0, mean));
  for (std::uint64_t n = 1; n <= n_max; ++n) {
    std::fill(nxt.begin(), nxt.end(), 0.0);
    for (std::size_t i = 0; i < total; ++i) {
      const double c = cur[i];
      if (c == 0.0) continue;
      for (const auto& j : jl) nxt[static_cast<std::size_t>(i + j.shift)] += c * j.p;
    }
    cur.swap(nxt);
    const double w = std::exp(log_poisson_pmf(n, mean));
    if (w > 0.0)
      for (std::size_t i = 0; i < total; ++i) box.prob[i] += w * cur[i];
  }
  return box;
}

WalkTailTable::WalkTailTable(const JumpKernel& kernel, double t_max, double tail_eps)
    : q_(kernel.total_rate()) {
  if (kernel.dim() != 1) throw ModelError("WalkTailTable: dim 1 kernels only");
  n_max_ = poisson_upper_quantile(q_ * t_max, tail_eps);
  halfwidth_ = static_cast<int>(n_max_) * kernel.max_abs_offset() + 1;
  const std::size_t w = 2 * static_cast<std::size_t>(halfwidth_) + 1;
  std::vector<double> cur(w, 0.0), nxt(w, 0.0);
  cur[halfwidth_] = 1.0;
  struct Jmp { int shift; double p; };
  std::vector<Jmp> jl;
  for (const auto& j : kernel.jumps()) jl.push_back({j.offset[0], j.rate / q_});

  tail_by_n_.resize(n_max_ + 1);
  auto record = [&](std::uint64_t n, const std::vector<double>& pmf) {
    auto& tl = tail_by_n_[n];
    tl.assign(w + 1, 0.0);  // tl[i] = P(sum >= i - halfwidth)
    double s = 0.0;
    for (std::size_t i = w; i-- > 0;) { s += pmf[i]; tl[i] = s; }
  };
  record(0, cur);
  for (std::uint64_t n = 1; n <= n_max_; ++n) {
    std::fill(nxt.begin(), nxt.end(), 0.0);
    for (std::size_t i = 0; i < w; ++i) {
      const double c = cur[i];
      if (c == 0.0) continue;
      for (const auto& j : jl) nxt[i + j.shift] += c * j.p;
    }
    cur.swap(nxt);
    record(n, cur);
  }
}

double WalkTailTable::tail(double t, double u) const {
  // strict: P(S(t) > u) = P(S(t) >= floor(u) + 1)
  const int k = static_cast<int>(std::floor(u)) + 1;
  const int idx = k + halfwidth_;
  if (idx < 0) return 1.0;
  if (idx > 2 * halfwidth_ + 1) return 0.0;
  const double mean = q_ * t;
  double s = 0.0;
  for (std::uint64_t n = 0; n <= n_max_; ++n) {
    const double lw = log_poisson_pmf(n, mean);
    if (lw < -760.0) continue;
    s += std::exp(lw) * tail_by_n_[n][idx];
  }
  return std::min(1.0, s);
}

}  // namespace cbrw
