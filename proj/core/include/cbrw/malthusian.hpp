#pragma once

#include <memory>
#include <vector>

#include "cbrw/branching.hpp"
#include "cbrw/hitting.hpp"

namespace cbrw {

// Source of the after-exit taboo transforms Fbar*_{ij}(lambda) with taboo
// W_j = W \ {w_j}. The exact (linear-system) implementation backs tight
// tolerances; the MC one reuses one frozen sample set per (i,j) pair, so a
// bisection over lambda sees a smooth deterministic function.
class TransformProvider {
public:
  virtual ~TransformProvider() = default;
  virtual double fbar_star(int i, int j, double lambda) const = 0;
  virtual Extrapolation fbar_infinity(int i, int j) const = 0;
};

class ExactTransformProvider : public TransformProvider {
public:
  ExactTransformProvider(const CbrwModel& model, LinearSystemOptions opts = {});
  double fbar_star(int i, int j, double lambda) const override;
  Extrapolation fbar_infinity(int i, int j) const override;

private:
  const CbrwModel& model_;
  LinearSystemOptions opts_;
  std::vector<std::vector<Site>> taboo_;  // taboo_[j] = W \ {w_j}
};

class McTransformProvider : public TransformProvider {
public:
  McTransformProvider(const CbrwModel& model, std::size_t n, double horizon,
                      std::uint64_t seed, int threads = 1);
  double fbar_star(int i, int j, double lambda) const override;
  Extrapolation fbar_infinity(int i, int j) const override;
  const TabooHittingSamples& samples(int i, int j) const;

private:
  const CbrwModel& model_;
  std::size_t n_;
  double horizon_;
  std::uint64_t seed_;
  int threads_;
  mutable std::vector<std::unique_ptr<TabooHittingSamples>> cache_;
};

// d_ij(lambda) = delta_ij alpha_i m_i G_i*(lambda)
//              + (1-alpha_i) G_i*(lambda) Fbar*_{ij}(lambda),
// G_i*(lambda) = beta_i / (lambda + beta_i). Row-major N x N.
std::vector<double> criticality_matrix(const CbrwModel& model,
                                       const TransformProvider& transforms, double lambda);

// Dominant eigenvalue of a nonnegative square matrix by shifted power
// iteration (A + I is aperiodic whenever A is irreducible).
double perron_root(const std::vector<double>& matrix, int n, double rel_tol = 1e-12,
                   int max_iterations = 200000);

struct SupercriticalityReport {
  bool supercritical = false;
  double perron_at_zero = 0.0;   // Perron(D(0+)) via extrapolated transforms
  double margin = 0.0;           // perron_at_zero - 1
  double uncertainty = 0.0;      // Perron bracket halfwidth from transform residuals
  bool extrapolated = true;
};

// Throws NumericalError when the margin is indistinguishable from 0
// (near-critical models are rejected, not silently classified).
SupercriticalityReport is_supercritical(const CbrwModel& model,
                                        const TransformProvider& transforms);

struct MalthusianResult {
  double nu = 0.0;
  double perron_at_nu = 0.0;
  double bracket_lo = 0.0, bracket_hi = 0.0;
  SupercriticalityReport supercritical;
  std::vector<std::pair<double, double>> trace;  // (lambda, Perron(D(lambda)))
};

struct MalthusianOptions {
  double tol = 1e-8;
  double lambda_cap_factor = 10.0;  // bracket search stops at 10 q
};

// nu solves Perron(D(lambda)) = 1 (N = 1: G*(nu) = 1); bisection on the
// strictly decreasing Perron trace.
MalthusianResult malthusian_parameter(const CbrwModel& model,
                                      const TransformProvider& transforms,
                                      const MalthusianOptions& opts = {});

}  // namespace cbrw
