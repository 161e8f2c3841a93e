#include "cbrw/branching.hpp"

#include <algorithm>
#include <cmath>

namespace cbrw {

OffspringLaw OffspringLaw::validate(std::vector<double> pmf) {
  if (pmf.empty()) throw ModelError("offspring: empty pmf");
  double sum = 0.0;
  for (double p : pmf) {
    if (p < 0.0) throw ModelError("offspring: negative pmf entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw ModelError("offspring: pmf sums to " + std::to_string(sum) + ", expected 1");
  OffspringLaw law;
  law.pmf_ = std::move(pmf);
  law.cum_.resize(law.pmf_.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < law.pmf_.size(); ++k) {
    acc += law.pmf_[k];
    law.cum_[k] = acc;
  }
  law.cum_.back() = 1.0;
  for (std::size_t k = 1; k < law.pmf_.size(); ++k) law.mean_ += k * law.pmf_[k];
  return law;
}

double OffspringLaw::pgf(double s) const {
  if (s < 0.0 || s > 1.0) throw ModelError("pgf: s outside [0,1]");
  double v = 0.0;
  for (std::size_t k = pmf_.size(); k-- > 0;) v = v * s + pmf_[k];
  return v;
}

double OffspringLaw::pgf_derivative(double s) const {
  double v = 0.0;
  for (std::size_t k = pmf_.size(); k-- > 1;) v = v * s + k * pmf_[k];
  return v;
}

double OffspringLaw::minimal_pgf_fixed_point() const {
  // f is convex on [0,1] with f(1)=1; the minimal root of f(s)=s is reached
  // by iterating from 0
  double s = 0.0;
  for (int it = 0; it < 100000; ++it) {
    const double n = pgf(s);
    if (std::abs(n - s) < 1e-15) return n;
    s = n;
  }
  return s;
}

CbrwModel::CbrwModel(JumpKernel kernel, std::vector<Catalyst> catalysts, Site start)
    : kernel_(std::move(kernel)), catalysts_(std::move(catalysts)), start_(std::move(start)) {
  const auto rep = validate();
  if (!rep.valid) throw ModelError(rep.notes.empty() ? "invalid model" : rep.notes.front());
}

int CbrwModel::catalyst_at(const Site& x) const {
  for (std::size_t k = 0; k < catalysts_.size(); ++k)
    if (catalysts_[k].position == x) return static_cast<int>(k);
  return -1;
}

ModelReport CbrwModel::validate() const { return validate_model(*this); }

ModelReport validate_model(const CbrwModel& model) {
  ModelReport rep;
  const int d = model.kernel().dim();
  if (model.catalysts().empty()) {
    rep.notes.push_back("model: at least one catalyst required");
    return rep;
  }
  if (static_cast<int>(model.start().size()) != d) {
    rep.notes.push_back("model: start point dimension mismatch");
    return rep;
  }
  for (std::size_t k = 0; k < model.catalysts().size(); ++k) {
    const auto& c = model.catalysts()[k];
    if (static_cast<int>(c.position.size()) != d) {
      rep.notes.push_back("catalyst " + std::to_string(k) + ": position dimension mismatch");
      return rep;
    }
    if (!(c.alpha >= 0.0 && c.alpha < 1.0)) {
      rep.notes.push_back("catalyst " + std::to_string(k) + " at " +
                          site_to_string(c.position) + ": alpha must be in [0,1)");
      return rep;
    }
    for (std::size_t j = k + 1; j < model.catalysts().size(); ++j) {
      if (model.catalysts()[j].position == c.position) {
        rep.notes.push_back("duplicate catalyst position " + site_to_string(c.position));
        return rep;
      }
    }
  }
  rep.valid = true;
  rep.notes.push_back("kernel and catalysts valid");
  rep.notes.push_back("finite jump support: moment condition on H holds for all s");
  rep.notes.push_back("finite offspring support: E xi log(xi+1) finite");
  return rep;
}

namespace presets {

static JumpKernel nn1d() {
  return JumpKernel::validate(1, {{{+1}, 0.5}, {{-1}, 0.5}}, 1.0);
}

CbrwModel model_a() {
  Catalyst c{{0}, 0.5, OffspringLaw::validate({0.0, 0.0, 1.0})};
  return CbrwModel(nn1d(), {c}, {0});
}

CbrwModel model_b() {
  Catalyst c{{0}, 0.5, OffspringLaw::validate({0.2, 0.0, 0.8})};
  return CbrwModel(nn1d(), {c}, {0});
}

CbrwModel model_2d() {
  JumpKernel k = JumpKernel::validate(
      2, {{{+1, 0}, 0.25}, {{-1, 0}, 0.25}, {{0, +1}, 0.25}, {{0, -1}, 0.25}}, 1.0);
  Catalyst c{{0, 0}, 0.6, OffspringLaw::validate({0.2, 0.0, 0.8})};
  return CbrwModel(std::move(k), {c}, {0, 0});
}

}  // namespace presets
}  // namespace cbrw
