#include "cbrw/verification.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace cbrw {

double EmpiricalCdf::operator()(double y) const {
  const std::size_t below =
      std::upper_bound(values.begin(), values.end(), y) - values.begin();
  const double num = static_cast<double>(below) + (conditional ? 0.0 : n_below);
  const double den = static_cast<double>(n());
  return den > 0 ? num / den : 0.0;
}

EmpiricalCdf empirical_front_cdf(const std::vector<RunRecord>& records,
                                 std::size_t checkpoint_index, std::size_t direction_index,
                                 double nu, bool survival_filter, double horizon) {
  EmpiricalCdf e;
  e.nu = nu;
  e.conditional = survival_filter;
  std::size_t usable = 0;
  for (const auto& rec : records) {
    if (rec.truncated) continue;
    if (checkpoint_index >= rec.checkpoints.size()) continue;
    ++usable;
    const auto& cp = rec.checkpoints[checkpoint_index];
    e.t = cp.t;
    const bool survives = rec.survives_proxy(horizon);
    if (survival_filter && !survives) continue;
    const double m = cp.m_alive.at(direction_index);
    if (std::isfinite(m))
      e.values.push_back(m - nu * cp.t);
    else
      ++e.n_below;  // extinct by the checkpoint
  }
  e.n_total = usable;
  if (e.values.empty() && e.n_below == 0)
    throw ModelError("empirical_front_cdf: no usable runs at this checkpoint");
  std::sort(e.values.begin(), e.values.end());
  if (survival_filter) e.n_total = e.values.size() + e.n_below;
  return e;
}

ComparisonReport compare_to_theorem(
    const EmpiricalCdf& ecdf,
    const std::function<std::vector<double>(std::span<const double>)>& predicted,
    std::span<const double> y_grid) {
  ComparisonReport rep;
  rep.n = ecdf.n();
  rep.t = ecdf.t;
  const auto p0 = predicted(y_grid);
  auto sup_at_shift = [&](double delta) {
    // shift the predicted curve horizontally by delta (evaluate at y - delta)
    std::vector<double> ys(y_grid.begin(), y_grid.end());
    for (auto& y : ys) y -= delta;
    const auto p = predicted(ys);
    double s = 0.0;
    for (std::size_t i = 0; i < ys.size(); ++i)
      s = std::max(s, std::abs(ecdf(y_grid[i]) - p[i]));
    return s;
  };
  double sup = 0.0;
  for (std::size_t i = 0; i < y_grid.size(); ++i)
    sup = std::max(sup, std::abs(ecdf(y_grid[i]) - p0[i]));
  rep.sup_distance = sup;

  // golden-section on the shift; the sup-distance is unimodal in practice
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = -3.0, b = 3.0;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = sup_at_shift(c), fd = sup_at_shift(d);
  for (int it = 0; it < 60; ++it) {
    if (fc < fd) {
      b = d; d = c; fd = fc;
      c = b - gr * (b - a);
      fc = sup_at_shift(c);
    } else {
      a = c; c = d; fc = fd;
      d = a + gr * (b - a);
      fd = sup_at_shift(d);
    }
    if (b - a < 1e-6) break;
  }
  const double delta = 0.5 * (a + b);
  const double fbest = sup_at_shift(delta);
  if (fbest <= rep.sup_distance) {
    rep.best_shift_distance = fbest;
    rep.shift = delta;
  } else {
    rep.best_shift_distance = rep.sup_distance;
    rep.shift = 0.0;
  }
  return rep;
}

StrongLawReport strong_law_check(const std::vector<RunRecord>& records,
                                 std::size_t checkpoint_index, std::size_t direction_index,
                                 double nu, double horizon) {
  std::vector<double> dev;
  StrongLawReport rep;
  for (const auto& rec : records) {
    if (rec.truncated || checkpoint_index >= rec.checkpoints.size()) continue;
    if (!rec.survives_proxy(horizon)) continue;
    const auto& cp = rec.checkpoints[checkpoint_index];
    rep.t = cp.t;
    const double m = cp.m_alive.at(direction_index);
    if (!std::isfinite(m)) continue;
    dev.push_back(std::abs(m / cp.t - nu));
  }
  if (dev.size() < 2) throw ModelError("strong_law_check: need >= 2 surviving runs");
  std::sort(dev.begin(), dev.end());
  auto q = [&](double p) {
    const double idx = p * (dev.size() - 1);
    const std::size_t i = static_cast<std::size_t>(idx);
    const double w = idx - i;
    return i + 1 < dev.size() ? dev[i] * (1 - w) + dev[i + 1] * w : dev.back();
  };
  rep.n = dev.size();
  rep.q50 = q(0.50);
  rep.q80 = q(0.80);
  rep.q90 = q(0.90);
  rep.q95 = q(0.95);
  return rep;
}

CloudShapeAccumulator::CloudShapeAccumulator(const FrontShape& shape, double eps, double t,
                                             double horizon)
    : shape_(shape), t_(t), horizon_(horizon) {
  rep_.t = t;
  rep_.eps = eps;
}

void CloudShapeAccumulator::consume(const RunRecord& rec) {
  if (rec.truncated) return;
  ++rep_.runs;
  if (!rec.survives_proxy(horizon_)) return;
  ++rep_.surviving_runs;
  bool escaped = false;
  std::vector<double> xt(shape_.points.empty() ? 0 : shape_.points.front().r.size());
  for (const auto& p : rec.final_positions) {
    ++rep_.particles;
    for (std::size_t a = 0; a < xt.size(); ++a) xt[a] = p[a] / t_;
    const Membership m = membership(shape_, xt, rep_.eps);
    if (m == Membership::InO) ++rep_.particles_in_o;
    if (m != Membership::InQ) escaped = true;  // outside Q_eps (boundary or O side)
  }
  if (escaped) ++rep_.runs_escaping_q;
}

}  // namespace cbrw
