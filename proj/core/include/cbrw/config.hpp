#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cbrw/branching.hpp"
#include "cbrw/phi.hpp"

namespace cbrw {

// Config-file surface of the CLI: everything needed to rebuild a validated
// model plus the numeric knobs of each pipeline stage.
struct ExperimentConfig {
  struct CatalystSpec {
    Site position;
    double alpha = 0.0;
    std::vector<double> offspring_pmf;
  };

  std::string name = "experiment";
  int dimension = 1;
  double total_rate = 1.0;
  std::vector<JumpEntry> jumps;
  std::vector<CatalystSpec> catalysts;
  Site start;

  // directions: "auto:<n>" samples the unit sphere; explicit vectors otherwise
  std::string directions = "auto:0";
  std::vector<std::vector<double>> explicit_directions;

  double horizon = 60.0;
  std::vector<double> checkpoints{30.0, 60.0};
  std::uint64_t ensemble_n = 1000;
  std::int64_t pop_cap = 200000;
  std::uint64_t extinction_n = 10000;
  std::int64_t extinction_pop_cap = 500;

  PhiGridSpec lambda_grid;
  std::string phi_quadrature = "tabulated";  // or "mc"
  std::uint64_t phi_mc_pairs = 100000;
  double y_min = -8.0, y_max = 8.0, y_step = 0.05;
  double volterra_h = 0.01, volterra_horizon = 12.0;
  std::vector<double> oracle_levels{2.0, 3.0, 5.0};

  double malthusian_tol = 1e-8;
  std::uint64_t mc_transform_samples = 1000000;

  std::uint64_t seed = 20260810;
  int threads = 0;  // 0: hardware concurrency
  std::string out_dir = "out";

  CbrwModel build_model() const;
  std::vector<std::vector<double>> unit_directions() const;
  std::vector<double> y_grid() const;
  int resolved_threads() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& json_text);

// Canonical re-emission: stable key order and number formatting, so
// canon(canon(x)) == canon(x) byte-for-byte.
std::string canonical_config(const ExperimentConfig& cfg);

}  // namespace cbrw
