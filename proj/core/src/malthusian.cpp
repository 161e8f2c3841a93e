#include "cbrw/malthusian.hpp"

#include <algorithm>
#include <cmath>

namespace cbrw {

namespace {
std::vector<std::vector<Site>> taboo_sets(const CbrwModel& model) {
  const int n = model.n_catalysts();
  std::vector<std::vector<Site>> t(n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      if (k != j) t[j].push_back(model.catalysts()[k].position);
  return t;
}
}  // namespace

ExactTransformProvider::ExactTransformProvider(const CbrwModel& model, LinearSystemOptions opts)
    : model_(model), opts_(opts), taboo_(taboo_sets(model)) {}

double ExactTransformProvider::fbar_star(int i, int j, double lambda) const {
  return laplace_linear_system(model_.kernel(), model_.catalysts()[i].position,
                               model_.catalysts()[j].position, taboo_[j],
                               /*after_exit=*/true, lambda, opts_)
      .value;
}

Extrapolation ExactTransformProvider::fbar_infinity(int i, int j) const {
  const double l0 = 0.02 * model_.q();
  std::vector<double> ls, vs;
  for (int k = 0; k < 4; ++k) {
    ls.push_back(l0 * std::pow(0.25, k));
    vs.push_back(fbar_star(i, j, ls.back()));
  }
  return extrapolate_to_zero(ls, vs);
}

McTransformProvider::McTransformProvider(const CbrwModel& model, std::size_t n, double horizon,
                                         std::uint64_t seed, int threads)
    : model_(model), n_(n), horizon_(horizon), seed_(seed), threads_(threads) {
  const int nc = model.n_catalysts();
  cache_.resize(static_cast<std::size_t>(nc) * nc);
}

const TabooHittingSamples& McTransformProvider::samples(int i, int j) const {
  const int nc = model_.n_catalysts();
  auto& slot = cache_[static_cast<std::size_t>(i) * nc + j];
  if (!slot) {
    const auto taboo = taboo_sets(model_);
    slot = std::make_unique<TabooHittingSamples>(sample_taboo_hitting(
        model_.kernel(), model_.catalysts()[i].position, model_.catalysts()[j].position,
        taboo[j], /*after_exit=*/true, horizon_, n_,
        RngStream::mix(seed_ ^ (0x517CC1B727220A95ULL + i * 0x2545F4914F6CDD1DULL + j)),
        threads_));
  }
  return *slot;
}

double McTransformProvider::fbar_star(int i, int j, double lambda) const {
  return laplace_mc(samples(i, j), lambda).value;
}

Extrapolation McTransformProvider::fbar_infinity(int i, int j) const {
  const auto& s = samples(i, j);
  Extrapolation ex;
  ex.value = s.hit_fraction();
  ex.est_order = 0.0;
  ex.residual = s.censored_fraction();  // hit fraction is a lower bound
  ex.extrapolated = false;
  return ex;
}

std::vector<double> criticality_matrix(const CbrwModel& model,
                                       const TransformProvider& transforms, double lambda) {
  const int n = model.n_catalysts();
  std::vector<double> d(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto& cat = model.catalysts()[i];
    const double beta = model.beta(i);
    const double gs = beta / (lambda + beta);
    for (int j = 0; j < n; ++j) {
      double v = (1.0 - cat.alpha) * gs * transforms.fbar_star(i, j, lambda);
      if (i == j) v += cat.alpha * cat.offspring.mean() * gs;
      d[static_cast<std::size_t>(i) * n + j] = v;
    }
  }
  return d;
}

double perron_root(const std::vector<double>& matrix, int n, double rel_tol,
                   int max_iterations) {
  if (n <= 0 || matrix.size() != static_cast<std::size_t>(n) * n)
    throw ModelError("perron_root: bad dimensions");
  for (double v : matrix)
    if (v < 0.0) throw ModelError("perron_root: matrix must be nonnegative");
  if (n == 1) return matrix[0];
  // power iteration on A + I: aperiodic, eigenvalues shift by exactly 1
  std::vector<double> v(n, 1.0 / n), w(n);
  double rho_prev = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    double norm = 0.0;
    for (int i = 0; i < n; ++i) {
      double s = v[i];
      for (int j = 0; j < n; ++j) s += matrix[static_cast<std::size_t>(i) * n + j] * v[j];
      w[i] = s;
      norm += s;
    }
    if (norm == 0.0) return 0.0;  // nilpotent
    for (int i = 0; i < n; ++i) w[i] /= norm;
    // growth factor of the 1-normalized nonnegative iterate -> rho(A + I)
    const double rho = norm;
    v.swap(w);
    if (it > 2 && std::abs(rho - rho_prev) <= rel_tol * std::max(1.0, std::abs(rho))) {
      return rho - 1.0;
    }
    rho_prev = rho;
  }
  throw NumericalError("perron_root: power iteration did not converge");
}

SupercriticalityReport is_supercritical(const CbrwModel& model,
                                        const TransformProvider& transforms) {
  const int n = model.n_catalysts();
  std::vector<double> lo(static_cast<std::size_t>(n) * n, 0.0), hi = lo;
  bool any_extrapolated = false;
  for (int i = 0; i < n; ++i) {
    const auto& cat = model.catalysts()[i];
    for (int j = 0; j < n; ++j) {
      const auto ex = transforms.fbar_infinity(i, j);
      any_extrapolated = any_extrapolated || ex.extrapolated;
      double base = (1.0 - cat.alpha) * std::clamp(ex.value, 0.0, 1.0);
      double err = (1.0 - cat.alpha) * std::abs(ex.residual);
      if (i == j) base += cat.alpha * cat.offspring.mean();
      const std::size_t idx = static_cast<std::size_t>(i) * n + j;
      lo[idx] = std::max(0.0, base - err);
      hi[idx] = base + err;
    }
  }
  SupercriticalityReport rep;
  const double rho_lo = perron_root(lo, n);
  const double rho_hi = perron_root(hi, n);
  rep.perron_at_zero = 0.5 * (rho_lo + rho_hi);
  rep.uncertainty = 0.5 * (rho_hi - rho_lo);
  rep.margin = rep.perron_at_zero - 1.0;
  rep.extrapolated = any_extrapolated;
  if (rho_lo <= 1.0 && rho_hi >= 1.0)
    throw NumericalError("is_supercritical: margin indistinguishable from criticality (Perron in [" +
                         std::to_string(rho_lo) + ", " + std::to_string(rho_hi) + "])");
  rep.supercritical = rho_lo > 1.0;
  return rep;
}

MalthusianResult malthusian_parameter(const CbrwModel& model,
                                      const TransformProvider& transforms,
                                      const MalthusianOptions& opts) {
  MalthusianResult res;
  res.supercritical = is_supercritical(model, transforms);
  if (!res.supercritical.supercritical)
    throw NumericalError("malthusian_parameter: model is not supercritical");

  const int n = model.n_catalysts();
  auto perron_at = [&](double lambda) {
    const double p = perron_root(criticality_matrix(model, transforms, lambda), n);
    res.trace.emplace_back(lambda, p);
    return p;
  };

  const double cap = opts.lambda_cap_factor * model.q();
  double lo = 0.0, hi = model.q() / 8.0;
  double p_hi = perron_at(hi);
  while (p_hi > 1.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > cap)
      throw NumericalError("malthusian_parameter: no bracket below lambda cap");
    p_hi = perron_at(hi);
  }
  if (lo == 0.0) lo = 1e-12 * model.q();  // transforms need lambda > 0
  double p_lo = perron_at(lo);
  if (p_lo < 1.0)
    throw NumericalError("malthusian_parameter: Perron < 1 at the lower bracket end");
  while (hi - lo > opts.tol) {
    const double mid = 0.5 * (lo + hi);
    if (perron_at(mid) >= 1.0) lo = mid; else hi = mid;
  }
  res.nu = 0.5 * (lo + hi);
  res.perron_at_nu = perron_at(res.nu);
  res.bracket_lo = lo;
  res.bracket_hi = hi;
  std::sort(res.trace.begin(), res.trace.end());
  return res;
}

}  // namespace cbrw
