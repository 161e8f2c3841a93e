#include "cbrw/phi.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cbrw/malthusian.hpp"

namespace cbrw {

// ---------------------------------------------------------------------------
// monotone cubic (Fritsch-Carlson) on a uniform grid
// ---------------------------------------------------------------------------

namespace {

inline double fc_slope(double dm, double dp) {
  if (dm * dp <= 0.0) return 0.0;
  return 2.0 * dm * dp / (dm + dp);  // harmonic mean, monotone on uniform grids
}

inline double hermite(double t, double y0, double y1, double m0, double m1, double dx) {
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * dx * m0 +
         (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * dx * m1;
}

inline double hermite_deriv(double t, double y0, double y1, double m0, double m1,
                            double dx) {
  const double t2 = t * t;
  return (6 * t2 - 6 * t) * (y0 - y1) / dx + (3 * t2 - 4 * t + 1) * m0 +
         (3 * t2 - 2 * t) * m1;
}

}  // namespace

MonotoneCubic::MonotoneCubic(double x0, double dx, std::vector<double> y)
    : x0_(x0), dx_(dx), y_(std::move(y)) {
  fit_slopes();
}

void MonotoneCubic::rebuild(std::vector<double> y) {
  y_ = std::move(y);
  fit_slopes();
}

void MonotoneCubic::fit_slopes() {
  const std::size_t n = y_.size();
  m_.assign(n, 0.0);
  if (n < 2) return;
  auto secant = [&](std::size_t i) { return (y_[i + 1] - y_[i]) / dx_; };
  m_[0] = secant(0);
  m_[n - 1] = secant(n - 2);
  for (std::size_t i = 1; i + 1 < n; ++i) m_[i] = fc_slope(secant(i - 1), secant(i));
}

double MonotoneCubic::operator()(double x) const {
  const double s = (x - x0_) / dx_;
  if (s <= 0.0) return y_.front();
  if (s >= static_cast<double>(y_.size() - 1)) return y_.back();
  const std::size_t i = static_cast<std::size_t>(s);
  return hermite(s - i, y_[i], y_[i + 1], m_[i], m_[i + 1], dx_);
}

double MonotoneCubic::derivative(double x) const {
  const double s = (x - x0_) / dx_;
  if (s <= 0.0 || s >= static_cast<double>(y_.size() - 1)) return 0.0;
  const std::size_t i = static_cast<std::size_t>(s);
  return hermite_deriv(s - i, y_[i], y_[i + 1], m_[i], m_[i + 1], dx_);
}

// ---------------------------------------------------------------------------
// solver internals
// ---------------------------------------------------------------------------

namespace {

constexpr double kLogTailMargin = 21.0;  // e^{-21} ~ 7.6e-10 below-grid slack

struct Gauss {
  std::vector<double> x, w;  // on [0,1]
};

Gauss gauss_rule(int n) {
  Gauss g;
  g.x.resize(n);
  g.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double p1 = 0.0, dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double a = 1.0, b = t;
      for (int k = 2; k <= n; ++k) {
        const double c = ((2 * k - 1) * t * b - (k - 1) * a) / k;
        a = b;
        b = c;
      }
      p1 = b;
      dp = n * (t * b - a) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    g.x[i] = 0.5 * (1.0 - t);
    g.w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
  }
  return g;
}

// one site's curve with on-the-fly limited slopes; below the grid the gauge
// asymptote 1 - slope0 e^x applies
struct CurveView {
  const double* y = nullptr;
  std::size_t n = 0;  // usable prefix length (march) or full size
  double x0 = 0.0, dx = 1.0;
  double slope0 = 0.0;

  double node_slope(std::size_t i) const {
    auto sec = [&](std::size_t k) { return (y[k + 1] - y[k]) / dx; };
    if (i == 0) {
      const double bnd = (y[0] - (1.0 - slope0 * std::exp(x0 - dx))) / dx;
      return fc_slope(bnd, sec(0));
    }
    if (i + 1 >= n) return sec(i - 1);
    return fc_slope(sec(i - 1), sec(i));
  }

  double operator()(double x) const {
    if (x < x0) return 1.0 - slope0 * std::exp(x);
    const double s = (x - x0) / dx;
    std::size_t i = static_cast<std::size_t>(s);
    if (i + 1 >= n) return y[n - 1];
    return hermite(s - i, y[i], y[i + 1], node_slope(i), node_slope(i + 1), dx);
  }

  double deriv(double x) const {
    if (x < x0) return -slope0 * std::exp(x);
    const double s = (x - x0) / dx;
    std::size_t i = static_cast<std::size_t>(s);
    if (i + 1 >= n) return 0.0;
    return hermite_deriv(s - i, y[i], y[i + 1], node_slope(i), node_slope(i + 1), dx);
  }
};

// int_0^inf g(x_i - nu a) beta e^{-beta a} da with grid-aligned cells and an
// affine analytic tail g(x) ~ 1 - tail_coeff e^x below the grid
struct ExpMeasure {
  double beta = 0.0, nu = 0.0;

  template <typename G>
  double integrate(double xi, double x_min, double dx, const G& g, double tail_coeff,
                   const Gauss& gl) const {
    const double da = dx / nu;
    const double a_stop = std::min(46.0 / beta, std::max(0.0, (xi - x_min) / nu));
    const std::size_t cells = static_cast<std::size_t>(std::ceil(a_stop / da - 1e-12));
    double acc = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
      const double a0 = static_cast<double>(c) * da;
      const double a1 = std::min(a_stop, a0 + da);
      const double w = a1 - a0;
      double cell = 0.0;
      for (std::size_t k = 0; k < gl.x.size(); ++k) {
        const double a = a0 + w * gl.x[k];
        cell += gl.w[k] * g(xi - nu * a) * std::exp(-beta * a);
      }
      acc += beta * cell * w;
    }
    acc += std::exp(-beta * a_stop) - tail_coeff * std::exp(xi) * (beta / (beta + nu)) *
                                          std::exp(-(beta + nu) * a_stop);
    return acc;
  }
};

// int_[0,T] g(x_i - nu b) dF(b) by parts: g(x_i - nu T) F(T) +
// nu int_0^T g'(x_i - nu b) F(b) db, cells aligned to the lambda grid
struct CdfMeasure {
  const MonotoneCubic* cdf = nullptr;
  double horizon = 0.0;
  double mass_at_horizon = 0.0;
  double nu = 0.0;

  template <typename G, typename Gp>
  double integrate(double xi, double x_min, double dx, const G& g, const Gp& gprime,
                   double tail_coeff, const Gauss& gl) const {
    const double db = dx / nu;
    const double b_grid = std::max(0.0, (xi - x_min) / nu);
    const double b_stop = std::min(horizon, b_grid);
    const std::size_t cells = static_cast<std::size_t>(std::ceil(b_stop / db - 1e-12));
    double acc = g(xi - nu * horizon) * mass_at_horizon;
    for (std::size_t c = 0; c < cells; ++c) {
      const double b0 = static_cast<double>(c) * db;
      const double b1 = std::min(b_stop, b0 + db);
      const double w = b1 - b0;
      double cell = 0.0;
      for (std::size_t k = 0; k < gl.x.size(); ++k) {
        const double b = b0 + w * gl.x[k];
        cell += gl.w[k] * gprime(xi - nu * b) * (*cdf)(b);
      }
      acc += nu * cell * w;
    }
    if (b_stop < horizon && tail_coeff != 0.0) {
      // analytic below-grid stretch: g' = -tail_coeff e^x; F is smooth, use
      // coarse cells of the same width
      const std::size_t m =
          static_cast<std::size_t>(std::ceil((horizon - b_stop) / db - 1e-12));
      double cell = 0.0;
      for (std::size_t c = 0; c < m; ++c) {
        const double b0 = b_stop + static_cast<double>(c) * db;
        const double b1 = std::min(horizon, b0 + db);
        const double w = b1 - b0;
        double sub = 0.0;
        for (std::size_t k = 0; k < gl.x.size(); ++k) {
          const double b = b0 + w * gl.x[k];
          sub += gl.w[k] * (-tail_coeff * std::exp(xi - nu * b)) * (*cdf)(b);
        }
        cell += sub * w;
      }
      acc += nu * cell;
    }
    return acc;
  }
};

struct McPairs {
  std::vector<std::vector<double>> u;  // per target catalyst: a + tau over hits
  std::vector<double> hit_fraction;
  std::size_t n = 0;
};

struct SolverContext {
  const CbrwModel* model = nullptr;
  double nu = 0.0;
  std::vector<double> theta;
  double x_min = 0.0, dx = 0.0;
  std::size_t nodes = 0;
  PhiQuadrature quadrature = PhiQuadrature::Tabulated;
  std::vector<MonotoneCubic> fbar;  // (j,k) row-major
  std::vector<double> fbar_mass;
  double tab_horizon = 0.0;
  std::vector<McPairs> pairs;  // per j
  Gauss gl_exp, gl_cdf;

  double x_at(std::size_t i) const { return x_min + dx * static_cast<double>(i); }
};

SolverContext make_context(const CbrwModel& model, double nu,
                           const std::vector<double>& theta, const PhiSolveOptions& opts,
                           bool fresh_for_residual) {
  SolverContext ctx;
  ctx.model = &model;
  ctx.nu = nu;
  ctx.theta = theta;
  ctx.dx = std::numbers::ln10 / opts.grid.points_per_decade;
  ctx.x_min = std::log(opts.grid.lambda_min);
  const double x_max = std::log(opts.grid.lambda_max);
  ctx.nodes = static_cast<std::size_t>(std::round((x_max - ctx.x_min) / ctx.dx)) + 1;
  ctx.quadrature = opts.quadrature;
  ctx.gl_exp = gauss_rule(fresh_for_residual ? 8 : 6);
  ctx.gl_cdf = gauss_rule(fresh_for_residual ? 6 : 4);

  const int n = model.n_catalysts();
  if (opts.quadrature == PhiQuadrature::Tabulated) {
    const double span = (x_max - ctx.x_min) + kLogTailMargin;
    ctx.tab_horizon = span / nu;
    const double h = fresh_for_residual ? opts.tab_step * 0.6 : opts.tab_step;
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        std::vector<Site> taboo;
        for (int l = 0; l < n; ++l)
          if (l != k) taboo.push_back(model.catalysts()[l].position);
        auto cdf = tabulate_hitting_cdf(model.kernel(), model.catalysts()[j].position,
                                        model.catalysts()[k].position, taboo,
                                        /*after_exit=*/true, /*first_return=*/false, h,
                                        ctx.tab_horizon);
        ctx.fbar_mass.push_back(cdf.mass_at_horizon);
        ctx.fbar.emplace_back(0.0, h, std::move(cdf.value));
      }
    }
  } else {
    const double horizon = (x_max - ctx.x_min + kLogTailMargin) / nu;
    for (int j = 0; j < n; ++j) {
      McPairs mp;
      mp.n = opts.mc_pairs;
      const double beta = model.beta(j);
      for (int k = 0; k < n; ++k) {
        std::vector<Site> taboo;
        for (int l = 0; l < n; ++l)
          if (l != k) taboo.push_back(model.catalysts()[l].position);
        const std::uint64_t seed = RngStream::mix(
            opts.mc_seed + (fresh_for_residual ? 0x5bd1e995ULL : 0) +
            0x9E3779B9ULL * (static_cast<std::uint64_t>(j) * n + k + 1));
        auto s = sample_taboo_hitting(model.kernel(), model.catalysts()[j].position,
                                      model.catalysts()[k].position, taboo,
                                      /*after_exit=*/true, horizon, opts.mc_pairs, seed,
                                      opts.threads);
        RngStream rng(RngStream::mix(seed ^ 0xABCDEF12345ULL));
        std::vector<double> u;
        std::size_t hits = 0;
        for (const auto& o : s.outcomes) {
          const double e = rng.exponential(beta);
          if (o.status == HitStatus::Hit) {
            u.push_back(e + o.tau);
            ++hits;
          }
        }
        mp.u.push_back(std::move(u));
        mp.hit_fraction.push_back(static_cast<double>(hits) / opts.mc_pairs);
      }
      ctx.pairs.push_back(std::move(mp));
    }
  }
  return ctx;
}

// equation j right-hand side at x = xi given phi views (all sites) and, for
// the tabulated path, Phi views (Phi_{jk}(x) = int phi_k(x - nu a) dG_j(a))
double assemble_rhs(const SolverContext& ctx, int j, double xi,
                    const std::vector<CurveView>& phi, const std::vector<CurveView>& Phi) {
  const auto& model = *ctx.model;
  const int n = model.n_catalysts();
  const auto& cat = model.catalysts()[j];
  const double beta = model.beta(j);
  const ExpMeasure em{beta, ctx.nu};
  const double branch = em.integrate(
      xi, ctx.x_min, ctx.dx, [&](double x) { return cat.offspring.pgf(phi[j](x)); },
      cat.offspring.mean() * ctx.theta[j], ctx.gl_exp);

  double walk = 0.0, mass = 0.0;
  if (ctx.quadrature == PhiQuadrature::Tabulated) {
    for (int k = 0; k < n; ++k) {
      const std::size_t jk = static_cast<std::size_t>(j) * n + k;
      const CdfMeasure cm{&ctx.fbar[jk], ctx.tab_horizon, ctx.fbar_mass[jk], ctx.nu};
      const auto& Pv = Phi[jk];
      walk += cm.integrate(
          xi, ctx.x_min, ctx.dx, [&](double x) { return Pv(x); },
          [&](double x) { return Pv.deriv(x); }, ctx.theta[k] * beta / (beta + ctx.nu),
          ctx.gl_cdf);
      mass += ctx.fbar_mass[jk];
    }
  } else {
    for (int k = 0; k < n; ++k) {
      const auto& u = ctx.pairs[j].u[k];
      double s = 0.0;
      for (const double uu : u) s += phi[k](xi - ctx.nu * uu);
      walk += s / static_cast<double>(ctx.pairs[j].n);
      mass += ctx.pairs[j].hit_fraction[k];
    }
  }
  return cat.alpha * branch + (1.0 - cat.alpha) * (walk + (1.0 - mass));
}

}  // namespace

// ---------------------------------------------------------------------------
// public API
// ---------------------------------------------------------------------------

double PhiTable::eval(std::size_t site, double lambda) const {
  if (lambda < 0.0) throw ModelError("phi: lambda must be >= 0");
  if (lambda == 0.0) return 1.0;
  const double x = std::log(lambda);
  if (x < log_lambda_min) return 1.0 - theta[site] * lambda;
  const auto& c = values[site];
  const double x_top = log_lambda_min + dlog * static_cast<double>(c.n() - 1);
  if (x > x_top + 1e-12)
    throw NumericalError("phi: lambda above the solved grid; widen the grid");
  return c(x);
}

double PhiTable::lambda_max() const {
  return std::exp(log_lambda_min + dlog * static_cast<double>(n_nodes() - 1));
}

PhiTable solve_phi_system(const CbrwModel& model, double nu, std::vector<double> theta,
                          const PhiSolveOptions& opts) {
  const int n = model.n_catalysts();
  if (static_cast<int>(theta.size()) != n)
    throw ModelError("solve_phi_system: theta size must match the catalyst count");
  for (double t : theta)
    if (!(t > 0.0)) throw ModelError("solve_phi_system: theta entries must be positive");
  if (!(nu > 0.0)) throw ModelError("solve_phi_system: nu must be positive");

  SolverContext ctx = make_context(model, nu, theta, opts, /*fresh_for_residual=*/false);
  const std::size_t nodes = ctx.nodes;

  std::vector<std::vector<double>> v(n, std::vector<double>(nodes, 1.0));
  std::vector<std::vector<double>> PhiT(static_cast<std::size_t>(n) * n,
                                        std::vector<double>(nodes, 1.0));

  auto make_views = [&](std::size_t valid) {
    std::vector<CurveView> pv(n), Pv(static_cast<std::size_t>(n) * n);
    for (int k = 0; k < n; ++k)
      pv[k] = CurveView{v[k].data(), valid, ctx.x_min, ctx.dx, ctx.theta[k]};
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const std::size_t jk = static_cast<std::size_t>(j) * n + k;
        Pv[jk] = CurveView{PhiT[jk].data(), valid, ctx.x_min, ctx.dx,
                           ctx.theta[k] * model.beta(j) / (model.beta(j) + nu)};
      }
    return std::pair{std::move(pv), std::move(Pv)};
  };

  double sup_change = HUGE_VAL;
  int sweep = 0;
  for (; sweep < opts.max_sweeps && sup_change > opts.sweep_tol; ++sweep) {
    sup_change = 0.0;
    for (std::size_t i = 0; i < nodes; ++i) {
      const double xi = ctx.x_at(i);
      auto [pv, Pv] = make_views(i + 1);
      std::vector<double> cur(n), nxt(n);
      for (int j = 0; j < n; ++j) cur[j] = (sweep == 0 && i > 0) ? v[j][i - 1] : v[j][i];
      for (int inner = 0; inner < 100; ++inner) {
        for (int j = 0; j < n; ++j) v[j][i] = cur[j];
        // refresh the Phi caches at this node from the current guesses
        for (int j = 0; j < n; ++j) {
          const ExpMeasure em{model.beta(j), nu};
          for (int k = 0; k < n; ++k) {
            PhiT[static_cast<std::size_t>(j) * n + k][i] =
                em.integrate(xi, ctx.x_min, ctx.dx, [&](double x) { return pv[k](x); },
                             ctx.theta[k], ctx.gl_exp);
          }
        }
        double delta = 0.0;
        for (int j = 0; j < n; ++j) {
          nxt[j] = std::clamp(assemble_rhs(ctx, j, xi, pv, Pv), 1e-12, 1.0);
          delta = std::max(delta, std::abs(nxt[j] - cur[j]));
        }
        cur = nxt;
        if (delta < 1e-13) break;
      }
      for (int j = 0; j < n; ++j) {
        sup_change = std::max(sup_change, std::abs(cur[j] - v[j][i]));
        v[j][i] = cur[j];
      }
      // finalize Phi at this node with the solved values
      auto [pv2, Pv2] = make_views(i + 1);
      for (int j = 0; j < n; ++j) {
        const ExpMeasure em{model.beta(j), nu};
        for (int k = 0; k < n; ++k)
          PhiT[static_cast<std::size_t>(j) * n + k][i] =
              em.integrate(xi, ctx.x_min, ctx.dx, [&](double x) { return pv2[k](x); },
                           ctx.theta[k], ctx.gl_exp);
      }
    }
  }
  if (sup_change > opts.sweep_tol)
    throw NumericalError("solve_phi_system: sweeps did not converge (last change " +
                         std::to_string(sup_change) + ")");

  PhiTable table;
  table.nu = nu;
  table.theta = ctx.theta;
  table.log_lambda_min = ctx.x_min;
  table.dlog = ctx.dx;
  for (int j = 0; j < n; ++j) {
    table.sites.push_back(model.catalysts()[j].position);
    table.values.emplace_back(ctx.x_min, ctx.dx, v[j]);
  }
  // the small-lambda boundary pins the gauge; report the measured slope so the
  // class-C_theta membership is visible (rescaling would be a no-op here)
  table.measured_slope = (1.0 - v[0][0]) / std::exp(ctx.x_min);

  // lambda -> infinity limit: minimal fixed point of
  // s_j = a_j f_j(s_j) + (1-a_j)(sum_k Fbar_jk(inf) s_k + 1 - sum_k Fbar_jk(inf))
  {
    ExactTransformProvider prov(model);
    std::vector<double> finf(static_cast<std::size_t>(n) * n, 0.0);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        finf[static_cast<std::size_t>(j) * n + k] =
            std::clamp(prov.fbar_infinity(j, k).value, 0.0, 1.0);
    std::vector<double> s(n, 0.0), snew(n, 0.0);
    for (int it = 0; it < 200000; ++it) {
      double d = 0.0;
      for (int j = 0; j < n; ++j) {
        const auto& cat = model.catalysts()[j];
        double acc = 0.0, m = 0.0;
        for (int k = 0; k < n; ++k) {
          acc += finf[static_cast<std::size_t>(j) * n + k] * s[k];
          m += finf[static_cast<std::size_t>(j) * n + k];
        }
        snew[j] = cat.alpha * cat.offspring.pgf(s[j]) + (1.0 - cat.alpha) * (acc + 1.0 - m);
        d = std::max(d, std::abs(snew[j] - s[j]));
      }
      s = snew;
      if (d < 1e-14) break;
    }
    table.extinction_limit.assign(s.begin(), s.end());
  }

  table.residual = phi_residual(model, table, opts);
  return table;
}

PhiResidualReport phi_residual(const CbrwModel& model, const PhiTable& table,
                               const PhiSolveOptions& opts) {
  PhiSolveOptions fresh = opts;
  fresh.mc_seed = RngStream::mix(opts.mc_seed + 0x1234567ULL);
  SolverContext ctx =
      make_context(model, table.nu, table.theta, fresh, /*fresh_for_residual=*/true);
  const int n = model.n_catalysts();
  const std::size_t nodes = table.n_nodes();

  std::vector<CurveView> phi(n);
  for (int k = 0; k < n; ++k)
    phi[k] = CurveView{table.values[k].values().data(), nodes, table.log_lambda_min,
                       table.dlog, table.theta[k]};

  // fresh Phi tables from the final values
  std::vector<std::vector<double>> PhiT(static_cast<std::size_t>(n) * n,
                                        std::vector<double>(nodes, 1.0));
  std::vector<CurveView> Pv(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    const ExpMeasure em{model.beta(j), table.nu};
    for (int k = 0; k < n; ++k) {
      const std::size_t jk = static_cast<std::size_t>(j) * n + k;
      for (std::size_t i = 0; i < nodes; ++i)
        PhiT[jk][i] = em.integrate(table.log_lambda_min + table.dlog * i, ctx.x_min, ctx.dx,
                                   [&](double x) { return phi[k](x); }, ctx.theta[k],
                                   ctx.gl_exp);
      Pv[jk] = CurveView{PhiT[jk].data(), nodes, ctx.x_min, ctx.dx,
                         ctx.theta[k] * model.beta(j) / (model.beta(j) + table.nu)};
    }
  }

  PhiResidualReport rep;
  for (std::size_t i = 0; i < nodes; ++i) {
    const double xi = table.log_lambda_min + table.dlog * static_cast<double>(i);
    for (int j = 0; j < n; ++j) {
      const double r = std::abs(assemble_rhs(ctx, j, xi, phi, Pv) -
                                table.values[j].values()[i]);
      if (r > rep.sup) {
        rep.sup = r;
        rep.at_lambda = std::exp(xi);
      }
    }
  }
  return rep;
}

void extend_phi(const CbrwModel& model, PhiTable& table, const Site& x,
                const PhiSolveOptions& opts) {
  const int n = model.n_catalysts();
  if (model.catalyst_at(x) >= 0)
    throw ModelError("extend_phi: site is a catalyst; already in the table");
  const double nu = table.nu;
  const std::size_t nodes = table.n_nodes();
  std::vector<double> vals(nodes, 1.0);
  std::vector<CurveView> phi(n);
  for (int k = 0; k < n; ++k)
    phi[k] = CurveView{table.values[k].values().data(), nodes, table.log_lambda_min,
                       table.dlog, table.theta[k]};

  const Gauss gl = gauss_rule(4);
  const double span = table.dlog * static_cast<double>(nodes - 1) + kLogTailMargin;
  const double horizon = span / nu;
  double theta_x = 0.0;

  if (opts.quadrature == PhiQuadrature::Tabulated) {
    std::vector<MonotoneCubic> cdfs;
    std::vector<double> masses;
    for (int k = 0; k < n; ++k) {
      std::vector<Site> taboo;
      for (int l = 0; l < n; ++l)
        if (l != k) taboo.push_back(model.catalysts()[l].position);
      auto cdf = tabulate_hitting_cdf(model.kernel(), x, model.catalysts()[k].position,
                                      taboo, /*after_exit=*/false, /*first_return=*/false,
                                      opts.tab_step, horizon);
      masses.push_back(cdf.mass_at_horizon);
      cdfs.emplace_back(0.0, opts.tab_step, std::move(cdf.value));
      // theta_x += theta_k F*_{x,w_k}(nu), integrating e^{-nu b} dF by parts
      double acc = std::exp(-nu * horizon) * masses.back();
      const std::size_t m = static_cast<std::size_t>(std::ceil(horizon / 0.25));
      const double w = horizon / static_cast<double>(m);
      for (std::size_t c = 0; c < m; ++c) {
        const double b0 = static_cast<double>(c) * w;
        for (std::size_t g = 0; g < gl.x.size(); ++g) {
          const double b = b0 + w * gl.x[g];
          acc += nu * gl.w[g] * std::exp(-nu * b) * cdfs.back()(b) * w;
        }
      }
      theta_x += table.theta[k] * acc;
    }
    double mass_total = 0.0;
    for (double m : masses) mass_total += m;
    for (std::size_t i = 0; i < nodes; ++i) {
      const double xi = table.log_lambda_min + table.dlog * static_cast<double>(i);
      double acc = 1.0 - mass_total;
      for (int k = 0; k < n; ++k) {
        CdfMeasure cm{&cdfs[k], horizon, masses[k], nu};
        acc += cm.integrate(
            xi, table.log_lambda_min, table.dlog, [&](double z) { return phi[k](z); },
            [&](double z) { return phi[k].deriv(z); }, table.theta[k], gl);
      }
      vals[i] = std::clamp(acc, 0.0, 1.0);
    }
  } else {
    double mass_total = 0.0;
    std::vector<std::vector<double>> us(n);
    for (int k = 0; k < n; ++k) {
      std::vector<Site> taboo;
      for (int l = 0; l < n; ++l)
        if (l != k) taboo.push_back(model.catalysts()[l].position);
      auto s = sample_taboo_hitting(model.kernel(), x, model.catalysts()[k].position, taboo,
                                    /*after_exit=*/false, horizon, opts.mc_pairs,
                                    RngStream::mix(opts.mc_seed + 77 + k), opts.threads);
      double fr = 0.0;
      for (const auto& o : s.outcomes)
        if (o.status == HitStatus::Hit) {
          us[k].push_back(o.tau);
          fr += 1.0;
          theta_x += table.theta[k] * std::exp(-nu * o.tau) / opts.mc_pairs;
        }
      mass_total += fr / opts.mc_pairs;
    }
    for (std::size_t i = 0; i < nodes; ++i) {
      const double xi = table.log_lambda_min + table.dlog * static_cast<double>(i);
      double acc = 1.0 - mass_total;
      for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (const double uu : us[k]) s += phi[k](xi - nu * uu);
        acc += s / static_cast<double>(opts.mc_pairs);
      }
      vals[i] = std::clamp(acc, 0.0, 1.0);
    }
  }

  table.sites.push_back(x);
  table.theta.push_back(theta_x);
  table.values.emplace_back(table.log_lambda_min, table.dlog, std::move(vals));
  // extinction limit seen from x
  {
    double acc = 0.0, mass = 0.0;
    for (int k = 0; k < n; ++k) {
      std::vector<Site> taboo;
      for (int l = 0; l < n; ++l)
        if (l != k) taboo.push_back(model.catalysts()[l].position);
      std::vector<double> ls, vs;
      const double l0 = 0.02 * model.q();
      for (int kk = 0; kk < 4; ++kk) {
        ls.push_back(l0 * std::pow(0.25, kk));
        vs.push_back(laplace_linear_system(model.kernel(), x, model.catalysts()[k].position,
                                           taboo, /*after_exit=*/false, ls.back())
                         .value);
      }
      const double finf = std::clamp(extrapolate_to_zero(ls, vs).value, 0.0, 1.0);
      acc += finf * table.extinction_limit[k];
      mass += finf;
    }
    table.extinction_limit.push_back(acc + 1.0 - mass);
  }
}

CStar c_star(const CbrwModel& model, double nu, double r, std::size_t mc_samples,
             std::uint64_t mc_seed) {
  if (model.kernel().dim() != 1 || model.n_catalysts() != 1)
    throw ModelError("c_star: defined for d = 1, single-catalyst models");
  const auto& cat = model.catalysts()[0];
  const double q = model.q();
  const double beta = model.beta(0);
  const double alpha = cat.alpha;
  const double m1 = cat.offspring.mean();
  const Site& w = cat.position;

  auto fbar_star = [&](double lambda) {
    return laplace_linear_system(model.kernel(), w, w, {}, /*after_exit=*/true, lambda)
        .value;
  };
  CStar cs;
  cs.g1_star_nu = beta / (nu + beta);
  cs.f_star_nu = (q / (nu + q)) * fbar_star(nu);
  const std::vector<double> rv{r};
  double h, dh, d2h;
  model.kernel().cumulant_dir(rv, 1.0, h, dh, d2h);
  cs.h_prime_r = dh;

  auto gstar = [&](double lambda) {
    return (beta / (lambda + beta)) * (alpha * m1 + (1.0 - alpha) * fbar_star(lambda));
  };
  // int s e^{-nu s} dG(s) = -dG*/dlambda|_nu, central differences with one
  // Richardson step at h = 1e-5
  const double step = 1e-5;
  const double d_h = (gstar(nu + step) - gstar(nu - step)) / (2.0 * step);
  const double d_h2 = (gstar(nu + step / 2) - gstar(nu - step / 2)) / step;
  cs.renewal_integral = -(4.0 * d_h2 - d_h) / 3.0;
  cs.c3 = 1.0 / cs.renewal_integral;

  {
    auto s = sample_taboo_hitting(model.kernel(), w, w, {}, /*after_exit=*/true,
                                  /*horizon=*/50.0 / nu, mc_samples, RngStream::mix(mc_seed),
                                  1);
    RngStream rng(RngStream::mix(mc_seed ^ 0xC0FFEEULL));
    double acc = 0.0;
    for (const auto& o : s.outcomes) {
      const double e1 = rng.exponential(beta);
      acc += alpha * m1 * (e1 * std::exp(-nu * e1));
      if (o.status == HitStatus::Hit) {
        const double e2 = rng.exponential(beta);
        const double u = e2 + o.tau;
        acc += (1.0 - alpha) * (u * std::exp(-nu * u));
      }
    }
    cs.renewal_integral_mc = acc / static_cast<double>(mc_samples);
  }

  const double er = std::exp(-r);
  cs.value = er * (1.0 - cs.f_star_nu) * (1.0 - alpha * cs.g1_star_nu) /
             (std::sqrt(2.0) * (1.0 - er) * cs.h_prime_r * cs.renewal_integral);
  return cs;
}

double chi(const ChiCorrection& corr, double t, double y) {
  if (t < 0.0) throw ModelError("chi: t must be >= 0");
  if (!corr.lattice) return 0.0;
  const double s = corr.nu * t / corr.span + y / corr.span;
  const double frac = s - std::floor(s);
  return corr.span * frac;
}

std::vector<double> predicted_cdf(const PhiTable& table, std::size_t site,
                                  const ChiCorrection& corr, double t,
                                  std::span<const double> y_grid) {
  std::vector<double> out;
  out.reserve(y_grid.size());
  for (const double y : y_grid) {
    const double lam = std::exp(-y + chi(corr, t, y));
    out.push_back(table.eval(site, lam));
  }
  return out;
}

}  // namespace cbrw
