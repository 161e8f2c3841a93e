#pragma once

#include <span>
#include <vector>

#include "cbrw/front.hpp"
#include "cbrw/simulator.hpp"

namespace cbrw {

// Empirical law of M_t(r) - nu t over an ensemble. Extinct (or filtered-out
// dead) runs sit at -infinity, so the unconditional CDF keeps the extinction
// atom that Theorem-style limits carry at y -> -inf.
struct EmpiricalCdf {
  double t = 0.0;
  double nu = 0.0;
  std::vector<double> values;    // sorted, finite entries only
  std::size_t n_total = 0;       // includes the runs counted at -infinity
  std::size_t n_below = 0;       // runs at -infinity (extinct / filtered dead)
  bool conditional = false;      // true: restricted to proxy-surviving runs

  double operator()(double y) const;  // CDF at y
  std::size_t n() const { return conditional ? values.size() : n_total; }
};

// checkpoint_index selects the checkpoint; direction_index the projection
// vector handed to the simulator. survival_filter restricts to the
// finite-horizon non-extinction proxy (conditional CDF); otherwise all runs
// enter and dead ones sit at -infinity.
EmpiricalCdf empirical_front_cdf(const std::vector<RunRecord>& records,
                                 std::size_t checkpoint_index, std::size_t direction_index,
                                 double nu, bool survival_filter, double horizon);

struct ComparisonReport {
  double sup_distance = 0.0;          // max |empirical - predicted| on the grid
  double best_shift_distance = 0.0;   // after the optimal horizontal shift
  double shift = 0.0;                 // gauge-shift estimate
  std::size_t n = 0;
  double t = 0.0;
};

// predicted must be evaluated on y_grid. The best-shift search compensates
// the N > 1 gauge ambiguity; with theta = c* the raw distance is the
// headline number.
ComparisonReport compare_to_theorem(const EmpiricalCdf& ecdf,
                                    const std::function<std::vector<double>(std::span<const double>)>& predicted,
                                    std::span<const double> y_grid);

struct StrongLawReport {
  double t = 0.0;
  std::size_t n = 0;
  // quantiles of |M_t(r)/t - nu| over surviving runs: 50/80/90/95%
  double q50 = 0.0, q80 = 0.0, q90 = 0.0, q95 = 0.0;
};

StrongLawReport strong_law_check(const std::vector<RunRecord>& records,
                                 std::size_t checkpoint_index, std::size_t direction_index,
                                 double nu, double horizon);

struct CloudShapeReport {
  double t = 0.0;
  double eps = 0.0;
  std::size_t runs = 0, surviving_runs = 0;
  std::size_t particles = 0;
  std::size_t particles_in_o = 0;        // beyond the outer eps-shell: target -> 0
  std::size_t runs_escaping_q = 0;       // surviving runs with a particle outside Q_eps
  double particle_fraction_in_o() const {
    return particles ? static_cast<double>(particles_in_o) / particles : 0.0;
  }
  double escape_fraction() const {
    return surviving_runs ? static_cast<double>(runs_escaping_q) / surviving_runs : 0.0;
  }
};

// Consumes final-position snapshots (SimOptions::snapshot_final); positions are
// classified against the sampled shape at x / t.
class CloudShapeAccumulator {
public:
  CloudShapeAccumulator(const FrontShape& shape, double eps, double t, double horizon);
  void consume(const RunRecord& rec);
  CloudShapeReport report() const { return rep_; }

private:
  const FrontShape& shape_;
  double t_;
  double horizon_;
  CloudShapeReport rep_;
};

}  // namespace cbrw
