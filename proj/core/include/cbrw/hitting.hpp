#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cbrw/lattice.hpp"

namespace cbrw {

enum class HitStatus : std::uint8_t { Hit = 0, TabooAbsorbed = 1, Censored = 2 };

struct HitOutcome {
  HitStatus status;
  double tau;  // hit/taboo time; == horizon for censored
};

// Monte Carlo draws of the taboo hitting time of `target` from `from`.
// after_exit starts the clock at the first jump (the pre-exit holding time is
// excluded), following the convention F_{0,0} = Exp(q) * Fbar_{0,0}.
struct TabooHittingSamples {
  Site from, target;
  std::vector<Site> taboo;
  bool after_exit = false;
  double horizon = 0.0;
  std::vector<HitOutcome> outcomes;

  std::size_t n() const { return outcomes.size(); }
  double hit_fraction() const;
  double censored_fraction() const;
};

TabooHittingSamples sample_taboo_hitting(const JumpKernel& kernel, const Site& from,
                                         const Site& target, const std::vector<Site>& taboo,
                                         bool after_exit, double horizon, std::size_t n,
                                         std::uint64_t seed, int threads = 1);

enum class TransformMethod : std::uint8_t { Mc = 0, LinearSystem = 1 };

struct HittingTransform {
  double lambda = 0.0;
  double value = 0.0;      // in [0,1]
  double std_err = 0.0;    // 0 for the linear-system path
  double bias_bound = 0.0; // censoring (MC) / truncation (linear system) bound
  TransformMethod method = TransformMethod::Mc;
  int radius = 0;          // converged box radius (linear system)
};

// Discounted estimator mean(e^{-lambda tau}; hit). Refuses lambda == 0 when
// censored outcomes are present (unbounded bias).
HittingTransform laplace_mc(const TabooHittingSamples& samples, double lambda);

struct LinearSystemOptions {
  int initial_radius = 16;
  int radius_cap = 1 << 15;
  double tol = 1e-8;        // doubling stops when the value moves less than this
  double inner_tol = 1e-12;
  int max_iterations = 2000000;
};

// Laplace transform by the absorbing box resolvent; value is a certified
// lower bound, converged under radius doubling. from == target with
// after_exit == false returns the first-return transform (q/(lambda+q)) *
// Fbar*(lambda).
HittingTransform laplace_linear_system(const JumpKernel& kernel, const Site& from,
                                       const Site& target, const std::vector<Site>& taboo,
                                       bool after_exit, double lambda,
                                       const LinearSystemOptions& opts = {});

// Exact-to-truncation CDF of the taboo hitting time on a uniform time grid,
// by uniformization: F(t_i) = sum_n pois(n; q t_i) a_n with a_n the mass
// absorbed at `target` within n jumps. `first_return` composes the after-exit
// law with one Exp(q) holding (weights shift by one jump).
struct HittingCdf {
  double h = 0.0, horizon = 0.0;
  std::vector<double> value;   // value[i] = F(i h)
  double mass_at_horizon = 0.0;
  double leak = 0.0;           // probability lost to the box boundary (lower bound if > 0)

  double at(double t) const;   // linear interpolation on the grid
};

struct UniformizationOptions {
  double tail_eps = 1e-13;
  std::optional<int> box_radius;      // default: exact reach (n_max * max offset)
  std::size_t max_states = 1u << 24;
};

HittingCdf tabulate_hitting_cdf(const JumpKernel& kernel, const Site& from, const Site& target,
                                const std::vector<Site>& taboo, bool after_exit,
                                bool first_return, double h, double horizon,
                                const UniformizationOptions& opts = {});

// lambda -> 0+ limit by Richardson extrapolation on a lambda/4 sequence with
// empirically estimated order; flagged so downstream reports can disclose it.
struct Extrapolation {
  double value = 0.0;
  double est_order = 0.0;
  double residual = 0.0;  // last correction magnitude
  bool extrapolated = true;
};

Extrapolation extrapolate_to_zero(const std::vector<double>& lambdas,
                                  const std::vector<double>& values);

}  // namespace cbrw
