#include "cbrw/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>

namespace cbrw {

std::string site_to_string(const Site& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ')';
  return os.str();
}

double dot(const Site& s, std::span<const double> v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) acc += s[i] * v[i];
  return acc;
}

namespace {

// The subgroup of Z^d generated by the offsets equals Z^d iff the row-style
// Hermite form of the offset matrix is unimodular. Gaussian elimination over
// the integers with gcd pivoting; offsets are small so int64 never overflows.
bool offsets_span_lattice(const std::vector<JumpEntry>& jumps, int d) {
  std::vector<std::vector<std::int64_t>> rows;
  rows.reserve(jumps.size());
  for (const auto& j : jumps) rows.emplace_back(j.offset.begin(), j.offset.end());

  int rank = 0;
  std::int64_t det = 1;
  for (int col = 0; col < d; ++col) {
    int piv = -1;
    for (std::size_t r = rank; r < rows.size(); ++r) {
      if (rows[r][col] != 0) { piv = static_cast<int>(r); break; }
    }
    if (piv < 0) return false;  // offsets confined to a hyperplane
    std::swap(rows[rank], rows[piv]);
    for (std::size_t r = rank + 1; r < rows.size(); ++r) {
      // gcd step: zero out rows[r][col] against the pivot row
      while (rows[r][col] != 0) {
        const std::int64_t q = rows[rank][col] / rows[r][col];
        for (int c = col; c < d; ++c) rows[rank][c] -= q * rows[r][c];
        std::swap(rows[rank], rows[r]);
      }
    }
    det *= rows[rank][col];
    ++rank;
  }
  return std::llabs(det) == 1;
}

}  // namespace

JumpKernel JumpKernel::validate(int dim, std::vector<JumpEntry> jumps, double total_rate) {
  if (dim < 1) throw ModelError("kernel: dimension must be >= 1");
  if (!(total_rate > 0.0)) throw ModelError("kernel: total rate q must be > 0");
  if (jumps.empty()) throw ModelError("kernel: no jump entries");

  double sum = 0.0;
  for (const auto& j : jumps) {
    if (static_cast<int>(j.offset.size()) != dim)
      throw ModelError("kernel: offset dimension mismatch at " + site_to_string(j.offset));
    if (std::all_of(j.offset.begin(), j.offset.end(), [](int v) { return v == 0; }))
      throw ModelError("kernel: zero offset entry is not allowed");
    if (!(j.rate > 0.0))
      throw ModelError("kernel: non-positive rate at offset " + site_to_string(j.offset));
    sum += j.rate;
  }
  if (std::abs(sum - total_rate) > 1e-12 * std::max(1.0, total_rate))
    throw ModelError("kernel: jump rates sum to " + std::to_string(sum) +
                     ", expected q = " + std::to_string(total_rate));
  if (!offsets_span_lattice(jumps, dim))
    throw ModelError("kernel: offsets do not span Z^d (chain not irreducible)");

  JumpKernel k;
  k.dim_ = dim;
  k.total_rate_ = total_rate;
  std::sort(jumps.begin(), jumps.end(),
            [](const JumpEntry& a, const JumpEntry& b) { return a.offset < b.offset; });
  k.jumps_ = std::move(jumps);
  k.cum_probs_.resize(k.jumps_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < k.jumps_.size(); ++i) {
    acc += k.jumps_[i].rate / total_rate;
    k.cum_probs_[i] = acc;
  }
  k.cum_probs_.back() = 1.0;

  k.symmetric_ = true;
  for (const auto& j : k.jumps_) {
    Site neg(j.offset.size());
    for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -j.offset[i];
    const auto it = std::lower_bound(
        k.jumps_.begin(), k.jumps_.end(), neg,
        [](const JumpEntry& a, const Site& s) { return a.offset < s; });
    if (it == k.jumps_.end() || it->offset != neg ||
        std::abs(it->rate - j.rate) > 1e-12 * total_rate) {
      k.symmetric_ = false;
      break;
    }
  }
  for (const auto& j : k.jumps_)
    for (int v : j.offset) k.max_abs_offset_ = std::max(k.max_abs_offset_, std::abs(v));
  return k;
}

std::vector<double> JumpKernel::mean_jump() const {
  std::vector<double> m(dim_, 0.0);
  for (const auto& j : jumps_) {
    const double p = j.rate / total_rate_;
    for (int i = 0; i < dim_; ++i) m[i] += p * j.offset[i];
  }
  return m;
}

CumulantReport JumpKernel::cumulant(std::span<const double> s) const {
  CumulantReport rep;
  rep.s.assign(s.begin(), s.end());
  rep.grad.assign(dim_, 0.0);
  rep.hess.assign(static_cast<std::size_t>(dim_) * dim_, 0.0);
  for (const auto& j : jumps_) {
    const double e = std::exp(dot(j.offset, s)) * j.rate;
    rep.value += e - j.rate;
    for (int a = 0; a < dim_; ++a) {
      rep.grad[a] += e * j.offset[a];
      for (int b = 0; b < dim_; ++b)
        rep.hess[static_cast<std::size_t>(a) * dim_ + b] += e * j.offset[a] * j.offset[b];
    }
  }
  return rep;
}

void JumpKernel::cumulant_dir(std::span<const double> r, double s,
                              double& h, double& dh, double& d2h) const {
  h = dh = d2h = 0.0;
  for (const auto& j : jumps_) {
    const double yr = dot(j.offset, r);
    const double e = std::exp(s * yr) * j.rate;
    h += e - j.rate;
    dh += e * yr;
    d2h += e * yr * yr;
  }
}

WalkPath sample_path(const JumpKernel& kernel, const Site& start, double horizon,
                     RngStream rng) {
  if (horizon < 0.0) throw ModelError("sample_path: horizon must be >= 0");
  WalkPath p;
  p.times.push_back(0.0);
  p.positions.push_back(start);
  double t = 0.0;
  Site x = start;
  const double q = kernel.total_rate();
  for (;;) {
    t += rng.exponential(q);
    if (t > horizon) break;
    const Site& off = kernel.sample_jump(rng);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += off[i];
    p.times.push_back(t);
    p.positions.push_back(x);
  }
  return p;
}

}  // namespace cbrw
