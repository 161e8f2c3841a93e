#pragma once

#include <memory>
#include <vector>

#include "cbrw/branching.hpp"
#include "cbrw/marginal.hpp"

namespace cbrw {

// Tabulated ingredients of the d=1, N=1 renewal equation for
// E(t;u) = P_0(M_t > u): exact-to-truncation hitting CDFs from the
// uniformization path plus walk tail probabilities on a uniform grid.
struct VolterraGrid {
  double h = 0.0, horizon = 0.0;
  std::vector<double> g1;      // G_1(t) = 1 - e^{-beta t}
  std::vector<double> f00;     // first-return CDF F_{0,0} = Exp(q) * Fbar_{0,0}
  std::vector<double> fbar00;  // after-exit CDF
  std::vector<double> g11;     // (G_1 * Fbar_{0,0})(t)
  std::vector<double> g1f00;   // (G_1 * F_{0,0})(t)
  std::shared_ptr<WalkTailTable> walk_tails;

  std::size_t n() const { return g1.size(); }
  double t_at(std::size_t i) const { return static_cast<double>(i) * h; }
};

VolterraGrid build_volterra_grid(const CbrwModel& model, double h, double horizon);

// I(t;u) of the renewal equation: the walk term minus its F_{0,0} and
// (G_1 - G_1*F_{0,0}) convolutions, the two signed pieces integrated
// separately.
std::vector<double> inhomogeneous_vector(const VolterraGrid& grid, const CbrwModel& model,
                                         double u);
double inhomogeneous_term(const VolterraGrid& grid, const CbrwModel& model, double t,
                          double u);

struct FrontCdfSolution {
  double u = 0.0;
  std::vector<double> E;  // E(t_i; u), nondecreasing in t for u >= 0
  std::vector<double> I;
};

// Forward time-stepping; the scalar equation at each node is solved by fixed
// point (contraction requires h beta m < 1).
FrontCdfSolution solve_front_cdf(const VolterraGrid& grid, const CbrwModel& model, double u);

}  // namespace cbrw
