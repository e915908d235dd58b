#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "hybkit/errors.hpp"
#include "hybkit/fit.hpp"
#include "hybkit/grid.hpp"
#include "hybkit/vehicle.hpp"
#include "json.hpp"

namespace hybkit {

struct GridSpec {
  std::string id;
  char type = 'R';            // U R S T B C
  std::string domain = "full";  // "full" or "feasible"
  int n_samp = 0;
  std::size_t n_rand = 0;
  int n_sim = 0;
  int n_step = 0;
  double eps_b = 0.1;
  double dedup_radius = 0.0;
  double dt = 0.01;                  // rollout step for S/T
  std::vector<double> delta_u_star;  // empty = 5% of range per step
  std::vector<std::string> members;  // for combined grids
  std::uint64_t seed_offset = 0;     // grid stream index under the master seed
};

struct ModelFitConfig {
  std::string id;
  int component = 0;
  int p_plus = 1;
  int p_minus = 1;
  std::string grid;
  std::vector<std::string> validate_on;
  double gamma_m = 1e-6;
  double eps0 = 0.0;  // 0 = 1% of peak |target|
  double dt = 0.01;
  int starts = 50;
  int max_iter = 250;
};

struct ConstraintFitConfig {
  std::string id;
  std::string family = "mmps";      // mmps | ellipsoid | cone
  std::string approach = "boundary";  // boundary | region
  int p_plus = 1;
  int p_minus = 1;
  int n_e = 1;
  int n_c = 1;
  std::string grid;
  std::vector<std::string> validate_on;
  double gamma_c = 0.4;
  double eps0 = 1e-3;
  int starts = 12;
  int max_iter = 120;
  int pso_iters = 150;
  int pso_runs = 3;
};

struct SweepConfig {
  std::string id;
  std::string kind = "model";  // model | constraint
  // model sweeps
  int component = 0;
  // constraint sweeps
  std::string family = "mmps";
  std::string approach = "boundary";
  double violation_cap = 0.06;
  std::string grid;
  std::vector<std::string> validate_on;
  std::string select_grid;
  std::vector<std::pair<int, int>> complexities;
  ModelFitConfig model_base;            // starts/gamma/eps0/dt defaults
  ConstraintFitConfig constraint_base;  // starts/pso defaults
};

struct RunConfig {
  std::uint64_t seed = 1;
  int workers = 0;
  std::filesystem::path out = "runs/out";
  VehicleParams params;
  Bounds bounds = vehicle_bounds();
  std::vector<GridSpec> grids;
  std::vector<ModelFitConfig> model_fits;
  std::vector<ConstraintFitConfig> constraint_fits;
  std::vector<SweepConfig> sweeps;
};

namespace detail {

inline GridSpec grid_spec_from_json(const nlohmann::json& j) {
  GridSpec g;
  g.id = j.at("id").get<std::string>();
  std::string t = j.at("type").get<std::string>();
  if (t.size() != 1 || std::string("URSTBC").find(t) == std::string::npos)
    throw IoError("grid type must be one of U R S T B C");
  g.type = t[0];
  g.domain = j.value("domain", std::string("full"));
  g.n_samp = j.value("n_samp", 0);
  g.n_rand = j.value("n_rand", std::size_t{0});
  g.n_sim = j.value("n_sim", 0);
  g.n_step = j.value("n_step", 0);
  g.eps_b = j.value("eps_b", 0.1);
  g.dedup_radius = j.value("dedup_radius", 0.0);
  g.dt = j.value("dt", 0.01);
  if (j.contains("delta_u_star"))
    g.delta_u_star = j.at("delta_u_star").get<std::vector<double>>();
  if (j.contains("members"))
    g.members = j.at("members").get<std::vector<std::string>>();
  g.seed_offset = j.value("seed_offset", std::uint64_t{0});
  return g;
}

inline ModelFitConfig model_fit_from_json(const nlohmann::json& j) {
  ModelFitConfig f;
  f.id = j.value("id", std::string{});
  f.component = j.value("component", 0);
  if (f.component < 0 || f.component > 2)
    throw IoError("model component must be 0, 1 or 2");
  f.p_plus = j.value("p_plus", 1);
  f.p_minus = j.value("p_minus", 1);
  f.grid = j.value("grid", std::string{});
  if (j.contains("validate_on"))
    f.validate_on = j.at("validate_on").get<std::vector<std::string>>();
  f.gamma_m = j.value("gamma_m", 1e-6);
  f.eps0 = j.value("eps0", 0.0);
  f.dt = j.value("dt", 0.01);
  f.starts = j.value("starts", 50);
  f.max_iter = j.value("max_iter", 250);
  return f;
}

inline ConstraintFitConfig constraint_fit_from_json(const nlohmann::json& j) {
  ConstraintFitConfig f;
  f.id = j.value("id", std::string{});
  f.family = j.value("family", std::string("mmps"));
  f.approach = j.value("approach", std::string("boundary"));
  f.p_plus = j.value("p_plus", 1);
  f.p_minus = j.value("p_minus", 1);
  f.n_e = j.value("n_e", 1);
  f.n_c = j.value("n_c", 1);
  f.grid = j.value("grid", std::string{});
  if (j.contains("validate_on"))
    f.validate_on = j.at("validate_on").get<std::vector<std::string>>();
  f.gamma_c = j.value("gamma_c", 0.4);
  f.eps0 = j.value("eps0", 1e-3);
  f.starts = j.value("starts", 12);
  f.max_iter = j.value("max_iter", 120);
  f.pso_iters = j.value("pso_iters", 150);
  f.pso_runs = j.value("pso_runs", 3);
  return f;
}

inline SweepConfig sweep_from_json(const nlohmann::json& j) {
  SweepConfig s;
  s.id = j.at("id").get<std::string>();
  s.kind = j.value("kind", std::string("model"));
  s.component = j.value("component", 0);
  s.family = j.value("family", std::string("mmps"));
  s.approach = j.value("approach", std::string("boundary"));
  s.violation_cap = j.value("violation_cap", 0.06);
  s.grid = j.at("grid").get<std::string>();
  if (j.contains("validate_on"))
    s.validate_on = j.at("validate_on").get<std::vector<std::string>>();
  s.select_grid = j.value("select_grid",
                          s.validate_on.empty() ? std::string{} : s.validate_on.back());
  for (const auto& c : j.at("complexities")) {
    if (c.is_array()) {
      auto v = c.get<std::vector<int>>();
      s.complexities.emplace_back(v.at(0), v.size() > 1 ? v.at(1) : 0);
    } else {
      s.complexities.emplace_back(c.get<int>(), 0);
    }
  }
  s.model_base = model_fit_from_json(j);
  s.constraint_base = constraint_fit_from_json(j);
  return s;
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j,
                                      const std::filesystem::path& base_dir = ".") {
  RunConfig cfg;
  cfg.seed = j.value("seed", std::uint64_t{1});
  cfg.workers = j.value("workers", 0);
  if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
  if (j.contains("vehicle")) {
    const auto& v = j.at("vehicle");
    if (v.contains("params_path")) {
      std::ifstream in(base_dir / v.at("params_path").get<std::string>());
      if (!in) throw IoError("cannot open vehicle params file");
      nlohmann::json pj;
      in >> pj;
      cfg.params = vehicle_params_from_json(pj);
    } else if (v.contains("params")) {
      cfg.params = vehicle_params_from_json(v.at("params"));
    }
    if (v.contains("bounds")) cfg.bounds = bounds_from_json(v.at("bounds"));
  }
  if (j.contains("grids"))
    for (const auto& g : j.at("grids"))
      cfg.grids.push_back(detail::grid_spec_from_json(g));
  if (j.contains("model_fits"))
    for (const auto& f : j.at("model_fits"))
      cfg.model_fits.push_back(detail::model_fit_from_json(f));
  if (j.contains("constraint_fits"))
    for (const auto& f : j.at("constraint_fits"))
      cfg.constraint_fits.push_back(detail::constraint_fit_from_json(f));
  if (j.contains("sweeps"))
    for (const auto& s : j.at("sweeps"))
      cfg.sweeps.push_back(detail::sweep_from_json(s));
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("config parse error: " + std::string(e.what()));
  }
  return run_config_from_json(j, path.parent_path());
}

inline RegionFamily family_from_string(const std::string& s) {
  if (s == "mmps") return RegionFamily::Mmps;
  if (s == "ellipsoid") return RegionFamily::Ellipsoid;
  if (s == "cone") return RegionFamily::Cone;
  throw IoError("unknown region family: " + s);
}

inline FitApproach approach_from_string(const std::string& s) {
  if (s == "region") return FitApproach::Region;
  if (s == "boundary") return FitApproach::Boundary;
  throw IoError("unknown fit approach: " + s);
}

}  // namespace hybkit
