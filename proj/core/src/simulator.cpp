#include "cbrw/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <mutex>
#include <thread>

namespace cbrw {

namespace {

struct Ev {
  double t;
  std::uint32_t slot;
};

class EventHeap {
public:
  bool empty() const { return v_.empty(); }
  std::size_t size() const { return v_.size(); }
  double min_time() const { return v_.front().t; }

  void push(double t, std::uint32_t slot) {
    v_.push_back({t, slot});
    std::size_t i = v_.size() - 1;
    while (i > 0) {
      const std::size_t p = (i - 1) / 2;
      if (v_[p].t <= v_[i].t) break;
      std::swap(v_[p], v_[i]);
      i = p;
    }
  }

  Ev pop() {
    const Ev top = v_.front();
    v_.front() = v_.back();
    v_.pop_back();
    std::size_t i = 0;
    const std::size_t n = v_.size();
    for (;;) {
      const std::size_t l = 2 * i + 1, r = l + 1;
      std::size_t m = i;
      if (l < n && v_[l].t < v_[m].t) m = l;
      if (r < n && v_[r].t < v_[m].t) m = r;
      if (m == i) break;
      std::swap(v_[i], v_[m]);
      i = m;
    }
    return top;
  }

private:
  std::vector<Ev> v_;
};

struct Directions {
  int dim = 0;
  int n = 0;
  std::vector<double> flat;  // n x dim
  double proj(const std::int32_t* pos, int k) const {
    const double* d = flat.data() + static_cast<std::size_t>(k) * dim;
    double s = 0.0;
    for (int a = 0; a < dim; ++a) s += d[a] * pos[a];
    return s;
  }
};

}  // namespace

RunRecord run(const CbrwModel& model, const SimOptions& opts, std::uint64_t master_seed,
              std::uint64_t run_index) {
  const int d = model.kernel().dim();
  const double q = model.q();
  RngStream rng = RngStream::substream(master_seed, run_index);

  Directions dirs;
  dirs.dim = d;
  dirs.n = static_cast<int>(opts.directions.size());
  for (const auto& v : opts.directions) {
    if (static_cast<int>(v.size()) != d) throw ModelError("run: direction dimension mismatch");
    dirs.flat.insert(dirs.flat.end(), v.begin(), v.end());
  }

  const int nc = model.n_catalysts();
  std::vector<std::int32_t> cat_pos(static_cast<std::size_t>(nc) * d);
  std::vector<double> cat_beta(nc);
  for (int k = 0; k < nc; ++k) {
    std::memcpy(cat_pos.data() + static_cast<std::size_t>(k) * d,
                model.catalysts()[k].position.data(), sizeof(std::int32_t) * d);
    cat_beta[k] = model.beta(k);
  }
  auto catalyst_index = [&](const std::int32_t* x) -> int {
    for (int k = 0; k < nc; ++k) {
      const std::int32_t* w = cat_pos.data() + static_cast<std::size_t>(k) * d;
      bool eq = true;
      for (int a = 0; a < d; ++a)
        if (x[a] != w[a]) { eq = false; break; }
      if (eq) return k;
    }
    return -1;
  };

  std::vector<std::int32_t> pos;     // slot-strided positions
  std::vector<std::uint8_t> alive;   // slot occupancy
  std::vector<std::uint32_t> free_slots;
  auto alloc_slot = [&]() -> std::uint32_t {
    if (!free_slots.empty()) {
      const std::uint32_t s = free_slots.back();
      free_slots.pop_back();
      alive[s] = 1;
      return s;
    }
    const std::uint32_t s = static_cast<std::uint32_t>(alive.size());
    alive.push_back(1);
    pos.resize(pos.size() + d);
    return s;
  };

  RunRecord rec;
  rec.run_index = run_index;
  std::vector<double> running_max(dirs.n, -std::numeric_limits<double>::infinity());

  EventHeap heap;
  std::int64_t population = 1;
  {
    const std::uint32_t s0 = alloc_slot();
    std::memcpy(pos.data(), model.start().data(), sizeof(std::int32_t) * d);
    const int k0 = catalyst_index(pos.data());
    if (k0 >= 0) rec.last_catalyst_visit = 0.0;
    const double rate = k0 >= 0 ? cat_beta[k0] : q;
    heap.push(rng.exponential(rate), s0);
    for (int k = 0; k < dirs.n; ++k) running_max[k] = dirs.proj(pos.data(), k);
  }

  std::size_t next_cp = 0;
  auto record_checkpoints_before = [&](double t_next) {
    while (next_cp < opts.checkpoints.size() && opts.checkpoints[next_cp] < t_next) {
      Checkpoint cp;
      cp.t = opts.checkpoints[next_cp];
      cp.population = population;
      cp.m_alive.assign(dirs.n, -std::numeric_limits<double>::infinity());
      cp.m_running = running_max;
      for (std::size_t s = 0; s < alive.size(); ++s) {
        if (!alive[s]) continue;
        const std::int32_t* x = pos.data() + s * d;
        for (int k = 0; k < dirs.n; ++k)
          cp.m_alive[k] = std::max(cp.m_alive[k], dirs.proj(x, k));
        if (catalyst_index(x) >= 0) ++cp.catalyst_occupancy;
      }
      rec.checkpoints.push_back(std::move(cp));
      ++next_cp;
    }
  };

  const auto& cum = model.kernel().cum_probs();
  const auto& jumps = model.kernel().jumps();
  double now = 0.0;
  while (!heap.empty()) {
    const double t_next = heap.min_time();
    if (t_next > opts.horizon) break;
    record_checkpoints_before(t_next);
    const Ev ev = heap.pop();
    now = ev.t;
    std::int32_t* x = pos.data() + static_cast<std::size_t>(ev.slot) * d;
    const int k = catalyst_index(x);
    if (k >= 0) {
      ++rec.catalyst_events;
      rec.last_catalyst_visit = now;
      if (rng.next_double() < model.catalysts()[k].alpha) {
        // branch: parent dies, xi offspring at the catalyst
        const int xi = model.catalysts()[k].offspring.sample(rng);
        ++rec.deaths;
        rec.births += xi;
        population += xi - 1;
        if (xi == 0) {
          alive[ev.slot] = 0;
          free_slots.push_back(ev.slot);
          if (population == 0) {
            rec.extinct = true;
            rec.extinction_time = now;
            break;
          }
        } else {
          heap.push(now + rng.exponential(cat_beta[k]), ev.slot);
          for (int c = 1; c < xi; ++c) {
            const std::uint32_t s = alloc_slot();
            std::memcpy(pos.data() + static_cast<std::size_t>(s) * d,
                        cat_pos.data() + static_cast<std::size_t>(k) * d,
                        sizeof(std::int32_t) * d);
            heap.push(now + rng.exponential(cat_beta[k]), s);
          }
          if (population > opts.pop_cap) {
            rec.truncated = true;
            break;
          }
        }
        continue;
      }
      // leaves the catalyst: fall through to a walk jump
    }
    const auto& off = jumps[rng.pick(cum)].offset;
    for (int a = 0; a < d; ++a) x[a] += off[a];
    for (int c = 0; c < dirs.n; ++c)
      running_max[c] = std::max(running_max[c], dirs.proj(x, c));
    const int k2 = catalyst_index(x);
    if (k2 >= 0) rec.last_catalyst_visit = now;
    heap.push(now + rng.exponential(k2 >= 0 ? cat_beta[k2] : q), ev.slot);
  }

  // extinct runs keep their remaining checkpoints (population 0, empty max);
  // truncated runs keep only what was recorded before the cap
  if (!rec.truncated)
    record_checkpoints_before(std::nextafter(opts.horizon, HUGE_VAL));

  if (opts.snapshot_final && !rec.extinct && !rec.truncated) {
    for (std::size_t s = 0; s < alive.size(); ++s) {
      if (!alive[s]) continue;
      rec.final_positions.emplace_back(pos.begin() + s * d, pos.begin() + (s + 1) * d);
    }
  }
  return rec;
}

std::vector<RunRecord> run_ensemble(const CbrwModel& model, const SimOptions& opts,
                                    std::size_t n, std::uint64_t master_seed, int threads,
                                    const std::function<void(RunRecord&)>& consumer) {
  std::vector<RunRecord> out(n);
  std::mutex consumer_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      RunRecord rec = run(model, opts, master_seed, i);
      if (consumer) {
        std::lock_guard<std::mutex> lk(consumer_mutex);
        consumer(rec);
        if (!rec.final_positions.empty()) rec.final_positions.clear();
      }
      out[i] = std::move(rec);
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return out;
}

ExtinctionEstimate extinction_probe(const CbrwModel& model, std::size_t n,
                                    std::int64_t pop_cap, std::uint64_t master_seed,
                                    int threads) {
  bool branching = false;
  for (const auto& c : model.catalysts())
    if (c.alpha > 0.0) branching = true;

  SimOptions opts;
  opts.horizon = 2e4;  // doomed lineages die long before this; cap-stability tested
  opts.pop_cap = pop_cap;
  std::atomic<std::size_t> n_extinct{0};
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      const RunRecord rec = run(model, opts, master_seed, i);
      if (rec.extinct) n_extinct.fetch_add(1);
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ExtinctionEstimate est;
  est.n = n;
  est.n_extinct = n_extinct.load();
  est.branching = branching;
  est.fraction = n ? static_cast<double>(est.n_extinct) / n : 0.0;
  const double z = 1.959963984540054;
  const double nn = static_cast<double>(n);
  const double p = est.fraction;
  const double den = 1.0 + z * z / nn;
  const double center = (p + z * z / (2 * nn)) / den;
  const double half = z * std::sqrt(p * (1 - p) / nn + z * z / (4 * nn * nn)) / den;
  est.wilson_lo = std::max(0.0, center - half);
  est.wilson_hi = std::min(1.0, center + half);
  return est;
}

}  // namespace cbrw
