#include "cbrw/config.hpp"

#include <fstream>
#include <thread>

#include "json.hpp"

#include "cbrw/front.hpp"

namespace cbrw {

using nlohmann::json;

namespace {

Site to_site(const json& j) {
  Site s;
  for (const auto& v : j) s.push_back(v.get<std::int32_t>());
  return s;
}

json from_site(const Site& s) {
  json j = json::array();
  for (auto v : s) j.push_back(v);
  return j;
}

}  // namespace

CbrwModel ExperimentConfig::build_model() const {
  auto kernel = JumpKernel::validate(dimension, jumps, total_rate);
  std::vector<Catalyst> cats;
  for (const auto& c : catalysts) {
    if (static_cast<int>(c.position.size()) != dimension)
      throw ModelError("config: catalyst position dimension mismatch");
    Catalyst cat{c.position, c.alpha, OffspringLaw::validate(c.offspring_pmf)};
    cats.push_back(std::move(cat));
  }
  return CbrwModel(std::move(kernel), std::move(cats), start);
}

std::vector<std::vector<double>> ExperimentConfig::unit_directions() const {
  if (directions.rfind("auto:", 0) == 0) {
    const int n = std::stoi(directions.substr(5));
    return sample_directions(dimension, n);
  }
  if (explicit_directions.empty())
    throw ModelError("config: directions must be auto:<n> or an explicit list");
  return explicit_directions;
}

std::vector<double> ExperimentConfig::y_grid() const {
  std::vector<double> g;
  for (double y = y_min; y <= y_max + 1e-12; y += y_step) g.push_back(y);
  return g;
}

int ExperimentConfig::resolved_threads() const {
  if (threads > 0) return threads;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ModelError(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    c.name = j.value("name", c.name);
    const auto& model = j.at("model");
    c.dimension = model.at("dimension").get<int>();
    const auto& kernel = model.at("kernel");
    c.total_rate = kernel.at("total_rate").get<double>();
    for (const auto& e : kernel.at("jumps"))
      c.jumps.push_back({to_site(e.at("offset")), e.at("rate").get<double>()});
    for (const auto& e : model.at("catalysts")) {
      ExperimentConfig::CatalystSpec cs;
      cs.position = to_site(e.at("position"));
      cs.alpha = e.at("alpha").get<double>();
      cs.offspring_pmf = e.at("offspring_pmf").get<std::vector<double>>();
      c.catalysts.push_back(std::move(cs));
    }
    c.start = to_site(model.at("start"));

    if (j.contains("directions")) {
      if (j["directions"].is_string()) {
        c.directions = j["directions"].get<std::string>();
      } else {
        c.directions = "explicit";
        for (const auto& d : j["directions"])
          c.explicit_directions.push_back(d.get<std::vector<double>>());
      }
    }
    if (j.contains("run")) {
      const auto& r = j["run"];
      c.horizon = r.value("horizon", c.horizon);
      if (r.contains("checkpoints")) c.checkpoints = r["checkpoints"].get<std::vector<double>>();
      c.ensemble_n = r.value("ensemble_n", c.ensemble_n);
      c.pop_cap = r.value("pop_cap", c.pop_cap);
      c.extinction_n = r.value("extinction_n", c.extinction_n);
      c.extinction_pop_cap = r.value("extinction_pop_cap", c.extinction_pop_cap);
    }
    if (j.contains("grids")) {
      const auto& g = j["grids"];
      c.lambda_grid.lambda_min = g.value("lambda_min", c.lambda_grid.lambda_min);
      c.lambda_grid.lambda_max = g.value("lambda_max", c.lambda_grid.lambda_max);
      c.lambda_grid.points_per_decade =
          g.value("points_per_decade", c.lambda_grid.points_per_decade);
      c.y_min = g.value("y_min", c.y_min);
      c.y_max = g.value("y_max", c.y_max);
      c.y_step = g.value("y_step", c.y_step);
      c.volterra_h = g.value("volterra_h", c.volterra_h);
      c.volterra_horizon = g.value("volterra_horizon", c.volterra_horizon);
      if (g.contains("oracle_levels"))
        c.oracle_levels = g["oracle_levels"].get<std::vector<double>>();
    }
    if (j.contains("phi")) {
      c.phi_quadrature = j["phi"].value("quadrature", c.phi_quadrature);
      c.phi_mc_pairs = j["phi"].value("mc_pairs", c.phi_mc_pairs);
    }
    if (j.contains("tolerances")) {
      c.malthusian_tol = j["tolerances"].value("malthusian", c.malthusian_tol);
    }
    c.mc_transform_samples = j.value("mc_transform_samples", c.mc_transform_samples);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.out_dir = j.value("out", c.out_dir);
  } catch (const json::exception& e) {
    throw ModelError(std::string("config: ") + e.what());
  }
  if (c.phi_quadrature != "tabulated" && c.phi_quadrature != "mc")
    throw ModelError("config: phi.quadrature must be 'tabulated' or 'mc'");
  for (double t : c.checkpoints)
    if (t <= 0.0 || t > c.horizon) throw ModelError("config: checkpoints must lie in (0, horizon]");
  if (!(c.y_step > 0.0) || !(c.volterra_h > 0.0))
    throw ModelError("config: grid steps must be positive");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("config file not found: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::string canonical_config(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  json kernel;
  kernel["total_rate"] = c.total_rate;
  kernel["jumps"] = json::array();
  for (const auto& e : c.jumps)
    kernel["jumps"].push_back({{"offset", from_site(e.offset)}, {"rate", e.rate}});
  json model;
  model["dimension"] = c.dimension;
  model["kernel"] = kernel;
  model["catalysts"] = json::array();
  for (const auto& e : c.catalysts)
    model["catalysts"].push_back({{"position", from_site(e.position)},
                                  {"alpha", e.alpha},
                                  {"offspring_pmf", e.offspring_pmf}});
  model["start"] = from_site(c.start);
  j["model"] = model;
  if (c.directions == "explicit")
    j["directions"] = c.explicit_directions;
  else
    j["directions"] = c.directions;
  j["run"] = {{"horizon", c.horizon},
              {"checkpoints", c.checkpoints},
              {"ensemble_n", c.ensemble_n},
              {"pop_cap", c.pop_cap},
              {"extinction_n", c.extinction_n},
              {"extinction_pop_cap", c.extinction_pop_cap}};
  j["grids"] = {{"lambda_min", c.lambda_grid.lambda_min},
                {"lambda_max", c.lambda_grid.lambda_max},
                {"points_per_decade", c.lambda_grid.points_per_decade},
                {"y_min", c.y_min},
                {"y_max", c.y_max},
                {"y_step", c.y_step},
                {"volterra_h", c.volterra_h},
                {"volterra_horizon", c.volterra_horizon},
                {"oracle_levels", c.oracle_levels}};
  j["phi"] = {{"quadrature", c.phi_quadrature}, {"mc_pairs", c.phi_mc_pairs}};
  j["tolerances"] = {{"malthusian", c.malthusian_tol}};
  j["mc_transform_samples"] = c.mc_transform_samples;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["out"] = c.out_dir;
  return j.dump(2) + "\n";
}

}  // namespace cbrw
