#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cbrw/branching.hpp"

namespace cbrw {

struct Checkpoint {
  double t = 0.0;
  std::int64_t population = 0;
  std::vector<double> m_alive;    // per direction: max over currently alive particles
  std::vector<double> m_running;  // per direction: running max over the whole history
  std::int64_t catalyst_occupancy = 0;
};

struct RunRecord {
  std::uint64_t run_index = 0;
  std::vector<Checkpoint> checkpoints;
  bool extinct = false;
  bool truncated = false;          // population cap hit; checkpoints kept up to truncation
  double extinction_time = -1.0;
  double last_catalyst_visit = -1.0;
  std::int64_t births = 0, deaths = 0, catalyst_events = 0;
  std::vector<Site> final_positions;  // only when SimOptions::snapshot_final

  // finite-horizon proxy for the non-degeneracy set: alive at the horizon and
  // a catalyst visit in the second half of the run
  bool survives_proxy(double horizon) const {
    return !extinct && last_catalyst_visit >= 0.5 * horizon;
  }
};

struct SimOptions {
  double horizon = 10.0;
  std::int64_t pop_cap = 200000;
  std::vector<double> checkpoints;                 // ascending
  std::vector<std::vector<double>> directions;     // projection vectors for M_t(r)
  bool snapshot_final = false;                     // keep particle positions at the horizon
};

RunRecord run(const CbrwModel& model, const SimOptions& opts, std::uint64_t master_seed,
              std::uint64_t run_index);

// n independent runs with per-index streams; the consumer (if any) sees each
// record exactly once, in unspecified order, under an internal lock. Results
// are identical for any thread count.
std::vector<RunRecord> run_ensemble(const CbrwModel& model, const SimOptions& opts,
                                    std::size_t n, std::uint64_t master_seed, int threads = 1,
                                    const std::function<void(RunRecord&)>& consumer = {});

struct ExtinctionEstimate {
  double fraction = 0.0;
  double wilson_lo = 0.0, wilson_hi = 0.0;  // 95% Wilson interval
  std::size_t n = 0;
  std::size_t n_extinct = 0;
  bool branching = true;  // false flags an alpha = 0 (pure walk) model
};

// Runs until extinction or population >= pop_cap (classified surviving).
ExtinctionEstimate extinction_probe(const CbrwModel& model, std::size_t n,
                                    std::int64_t pop_cap, std::uint64_t master_seed,
                                    int threads = 1);

}  // namespace cbrw
