#include "cbrw/renewal.hpp"

#include <algorithm>
#include <cmath>

#include "cbrw/hitting.hpp"

namespace cbrw {

namespace {

void require_scalar_single_catalyst(const CbrwModel& model, const char* who) {
  if (model.kernel().dim() != 1)
    throw ModelError(std::string(who) + ": d = 1 only");
  if (model.n_catalysts() != 1)
    throw ModelError(std::string(who) + ": single-catalyst models only");
  if (model.start() != model.catalysts()[0].position)
    throw ModelError(std::string(who) + ": start must coincide with the catalyst");
}

// (A * dB)(t_i) = sum_{j<=i} A(t_i - s_{j-1/2}) (B_j - B_{j-1}), A given at
// cell midpoints by averaging its grid values
std::vector<double> stieltjes_convolution(const std::vector<double>& a,
                                          const std::vector<double>& b) {
  const std::size_t n = a.size();
  std::vector<double> amid(n - 1), db(n - 1), out(n, 0.0);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    amid[j] = 0.5 * (a[j] + a[j + 1]);
    db[j] = b[j + 1] - b[j];
  }
  for (std::size_t i = 1; i < n; ++i) {
    // lag k cell center pairs A(t_i - s_{j+1/2}) with j = i-1-k
    double s = 0.0;
    const double* am = amid.data();
    const double* w = db.data();
    for (std::size_t j = 0; j < i; ++j) s += am[i - 1 - j] * w[j];
    out[i] = s;
  }
  return out;
}

}  // namespace

VolterraGrid build_volterra_grid(const CbrwModel& model, double h, double horizon) {
  require_scalar_single_catalyst(model, "build_volterra_grid");
  if (!(h > 0.0 && horizon > h)) throw ModelError("build_volterra_grid: bad grid");
  VolterraGrid g;
  g.h = h;
  g.horizon = horizon;
  const std::size_t n = static_cast<std::size_t>(std::floor(horizon / h + 0.5)) + 1;
  const double beta = model.beta(0);
  const Site& w = model.catalysts()[0].position;

  g.g1.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.g1[i] = 1.0 - std::exp(-beta * (i * h));

  const auto fbar = tabulate_hitting_cdf(model.kernel(), w, w, {}, /*after_exit=*/true,
                                         /*first_return=*/false, h, horizon);
  const auto f00 = tabulate_hitting_cdf(model.kernel(), w, w, {}, /*after_exit=*/false,
                                        /*first_return=*/true, h, horizon);
  g.fbar00 = fbar.value;
  g.f00 = f00.value;
  g.g11 = stieltjes_convolution(g.g1, g.fbar00);
  g.g1f00 = stieltjes_convolution(g.g1, g.f00);
  g.walk_tails = std::make_shared<WalkTailTable>(model.kernel(), horizon);
  return g;
}

std::vector<double> inhomogeneous_vector(const VolterraGrid& grid, const CbrwModel& model,
                                         double u) {
  require_scalar_single_catalyst(model, "inhomogeneous_vector");
  const std::size_t n = grid.n();
  const double alpha = model.catalysts()[0].alpha;
  const std::int64_t w0 = model.catalysts()[0].position[0];
  std::vector<double> ps(n);
  for (std::size_t i = 0; i < n; ++i)
    ps[i] = grid.walk_tails->tail(grid.t_at(i), u - static_cast<double>(w0));

  const auto conv_f00 = stieltjes_convolution(ps, grid.f00);
  const auto conv_g1 = stieltjes_convolution(ps, grid.g1);
  const auto conv_g1f = stieltjes_convolution(ps, grid.g1f00);
  std::vector<double> I(n);
  for (std::size_t i = 0; i < n; ++i)
    I[i] = ps[i] - conv_f00[i] - alpha * (conv_g1[i] - conv_g1f[i]);
  return I;
}

double inhomogeneous_term(const VolterraGrid& grid, const CbrwModel& model, double t,
                          double u) {
  if (t > grid.horizon + 0.5 * grid.h)
    throw ModelError("inhomogeneous_term: t beyond the tabulated horizon");
  const auto I = inhomogeneous_vector(grid, model, u);
  const std::size_t i =
      std::min(I.size() - 1, static_cast<std::size_t>(std::floor(t / grid.h + 0.5)));
  return I[i];
}

FrontCdfSolution solve_front_cdf(const VolterraGrid& grid, const CbrwModel& model, double u) {
  require_scalar_single_catalyst(model, "solve_front_cdf");
  if (u < 0.0) throw ModelError("solve_front_cdf: u must be >= 0");
  const double alpha = model.catalysts()[0].alpha;
  const auto& law = model.catalysts()[0].offspring;
  const double beta = model.beta(0);
  if (grid.h * beta * law.mean() >= 1.0)
    throw NumericalError("solve_front_cdf: step too large for the fixed-point contraction");

  FrontCdfSolution sol;
  sol.u = u;
  sol.I = inhomogeneous_vector(grid, model, u);
  const std::size_t n = grid.n();
  sol.E.assign(n, 0.0);
  std::vector<double> A(n, 0.0);  // 1 - f(1 - E)
  std::vector<double> dg1(n - 1), dg11(n - 1);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    dg1[j] = grid.g1[j + 1] - grid.g1[j];
    dg11[j] = grid.g11[j + 1] - grid.g11[j];
  }
  for (std::size_t i = 1; i < n; ++i) {
    // trapezoidal Stieltjes: cell j uses the average of the integrand at the
    // cell's two ends; the i-th end carries the unknown E_i
    double base = sol.I[i];
    for (std::size_t j = 0; j < i; ++j) {
      const std::size_t hi = i - j, lo = i - j - 1;
      base += alpha * 0.5 * (A[hi] + A[lo]) * dg1[j];
      base += (1.0 - alpha) * 0.5 * (sol.E[hi] + sol.E[lo]) * dg11[j];
    }
    // subtract the provisional self terms (A[i] = E[i] = 0 still), then solve
    double e = std::clamp(base, 0.0, 1.0);
    for (int it = 0; it < 200; ++it) {
      const double a_i = 1.0 - law.pgf(1.0 - e);
      const double e_new = std::clamp(
          base + alpha * 0.5 * dg1[0] * a_i + (1.0 - alpha) * 0.5 * dg11[0] * e, 0.0, 1.0);
      if (std::abs(e_new - e) < 1e-14) { e = e_new; break; }
      e = e_new;
    }
    sol.E[i] = e;
    A[i] = 1.0 - law.pgf(1.0 - e);
  }
  return sol;
}

}  // namespace cbrw
