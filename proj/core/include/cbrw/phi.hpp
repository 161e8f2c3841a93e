#pragma once

#include <optional>
#include <vector>

#include "cbrw/branching.hpp"
#include "cbrw/hitting.hpp"

namespace cbrw {

// Monotone piecewise-cubic interpolant on a uniform x-grid (Fritsch-Carlson
// slopes); used for phi(log lambda) and for tabulated CDFs.
class MonotoneCubic {
public:
  MonotoneCubic() = default;
  MonotoneCubic(double x0, double dx, std::vector<double> y);
  void rebuild(std::vector<double> y);  // same grid, new values
  double operator()(double x) const;
  double derivative(double x) const;    // dy/dx
  double x0() const { return x0_; }
  double dx() const { return dx_; }
  std::size_t n() const { return y_.size(); }
  const std::vector<double>& values() const { return y_; }

private:
  double x0_ = 0.0, dx_ = 1.0;
  std::vector<double> y_, m_;  // values and endpoint slopes per node
  void fit_slopes();
};

struct PhiGridSpec {
  double lambda_min = 1e-8;
  double lambda_max = 1e8;
  int points_per_decade = 64;
};

enum class PhiQuadrature {
  Tabulated,  // exact uniformized hitting CDFs, deterministic quadrature
  Mc          // sampled (Exp(beta_j), taboo-hitting) pairs per the general path
};

struct PhiSolveOptions {
  PhiGridSpec grid;
  PhiQuadrature quadrature = PhiQuadrature::Tabulated;
  double sweep_tol = 1e-9;
  int max_sweeps = 60;
  double tab_step = 0.005;          // hitting-CDF tabulation step (Tabulated)
  std::size_t mc_pairs = 100000;    // samples per (j,k) pair (Mc)
  std::uint64_t mc_seed = 1;
  int threads = 1;
};

struct PhiResidualReport {
  double sup = 0.0;      // max |phi - RHS[phi]| over sites and grid nodes
  double at_lambda = 0.0;
};

struct PhiTable {
  double nu = 0.0;
  std::vector<double> theta;             // gauge slopes, one per site
  std::vector<Site> sites;               // catalysts first, extensions appended
  double log_lambda_min = 0.0, dlog = 0.0;
  std::vector<MonotoneCubic> values;     // phi(log lambda) per site
  std::vector<double> extinction_limit;  // lim_{lambda->inf} phi per site
  PhiResidualReport residual;
  double measured_slope = 0.0;           // (1-phi)/lambda at the smallest grid nodes, site 0

  // phi(lambda; site): exact 1 at lambda = 0, gauge asymptote below the grid
  double eval(std::size_t site, double lambda) const;
  double lambda_min() const { return std::exp(log_lambda_min); }
  double lambda_max() const;
  std::size_t n_nodes() const { return values.empty() ? 0 : values.front().n(); }
  double lambda_at(std::size_t node) const { return std::exp(log_lambda_min + dlog * node); }
};

// Solve the phi fixed-point system on the lambda grid for all catalyst sites.
// theta fixes the scaling gauge (class C_theta); theta[0] is enforced by the
// small-lambda boundary and the per-sweep slope measurement.
PhiTable solve_phi_system(const CbrwModel& model, double nu, std::vector<double> theta,
                          const PhiSolveOptions& opts = {});

// Append phi(.; x) for x outside the catalyst set (direct quadrature against
// the taboo hitting laws from x; no fixed point needed).
void extend_phi(const CbrwModel& model, PhiTable& table, const Site& x,
                const PhiSolveOptions& opts = {});

// Fresh-quadrature residual of the system the table was solved for
// (independent tabulation step / Gauss orders, or fresh MC samples).
PhiResidualReport phi_residual(const CbrwModel& model, const PhiTable& table,
                               const PhiSolveOptions& opts);

struct CStar {
  double value = 0.0;
  double f_star_nu = 0.0;       // F*_{0,0}(nu)
  double g1_star_nu = 0.0;      // G_1*(nu)
  double h_prime_r = 0.0;       // H'(r)
  double renewal_integral = 0.0;  // int s e^{-nu s} dG(s) = -dG*/dlambda at nu
  double renewal_integral_mc = 0.0;  // independent MC quadrature of the same
  double c3 = 0.0;              // renewal-density constant 1 / renewal_integral
};

// Lemma-3 constant for d=1, N=1 models: all components exposed so the value
// can be recomputed from them exactly.
CStar c_star(const CbrwModel& model, double nu, double r,
             std::size_t mc_samples = 200000, std::uint64_t mc_seed = 7);

struct ChiCorrection {
  bool lattice = false;
  double span = 0.0;  // r*
  double nu = 0.0;
};

// chi(t;y) = r* frac(nu t / r* + y / r*) in the lattice case, else 0.
double chi(const ChiCorrection& corr, double t, double y);

// Theorem-scale predicted CDF: y -> phi(e^{-y + chi(t;y)}; x).
std::vector<double> predicted_cdf(const PhiTable& table, std::size_t site,
                                  const ChiCorrection& corr, double t,
                                  std::span<const double> y_grid);

}  // namespace cbrw
