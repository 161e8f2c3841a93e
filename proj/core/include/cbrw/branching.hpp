#pragma once

#include <string>
#include <vector>

#include "cbrw/lattice.hpp"
#include "cbrw/rng.hpp"

namespace cbrw {

// Finite-support offspring pmf p_0..p_K. Finite support makes the logarithmic
// moment condition automatic.
class OffspringLaw {
public:
  static OffspringLaw validate(std::vector<double> pmf);

  const std::vector<double>& pmf() const { return pmf_; }
  double pgf(double s) const;             // f(s) = sum p_k s^k, s in [0,1]
  double pgf_derivative(double s) const;  // f'(s)
  double mean() const { return mean_; }   // m = f'(1)
  int sample(RngStream& rng) const { return static_cast<int>(rng.pick(cum_)); }

  // minimal root of f(s) = s on [0,1] (extinction probability of the embedded
  // Galton-Watson process when the walk returns with probability ret_prob;
  // the general fixed point is s = a f(s) + (1-a)(ret*s + 1-ret) scaled out
  // by callers; here just f(s)=s)
  double minimal_pgf_fixed_point() const;

private:
  std::vector<double> pmf_;
  std::vector<double> cum_;
  double mean_ = 0.0;
};

struct Catalyst {
  Site position;        // w_k
  double alpha = 0.0;   // branching probability in [0,1)
  OffspringLaw offspring;

  double beta(double q) const { return q / (1.0 - alpha); }
};

struct ModelReport {
  bool valid = false;
  std::vector<std::string> notes;
};

// Kernel + catalysts + start point. Immutable after validation.
class CbrwModel {
public:
  CbrwModel(JumpKernel kernel, std::vector<Catalyst> catalysts, Site start);

  const JumpKernel& kernel() const { return kernel_; }
  const std::vector<Catalyst>& catalysts() const { return catalysts_; }
  const Site& start() const { return start_; }
  int n_catalysts() const { return static_cast<int>(catalysts_.size()); }
  double q() const { return kernel_.total_rate(); }
  double beta(int k) const { return catalysts_[k].beta(q()); }
  // index of the catalyst at x, or -1
  int catalyst_at(const Site& x) const;

  ModelReport validate() const;

private:
  JumpKernel kernel_;
  std::vector<Catalyst> catalysts_;
  Site start_;
};

ModelReport validate_model(const CbrwModel& model);

namespace presets {
// d=1 NN q=1 kernel, single catalyst at 0 with alpha=1/2; start 0.
CbrwModel model_a();  // offspring {2: 1.0},          nu = sqrt(2)-1
CbrwModel model_b();  // offspring {0: 0.2, 2: 0.8},  nu = sqrt(1.36)-1
// d=2 NN q=1 symmetric kernel, catalyst at the origin, alpha = 0.6 with the
// model_b offspring law; supercritical with nu ~ 0.19.
CbrwModel model_2d();
}  // namespace presets

}  // namespace cbrw
