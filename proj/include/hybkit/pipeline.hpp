#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hybkit/config.hpp"
#include "hybkit/fit.hpp"
#include "hybkit/gridgen.hpp"
#include "hybkit/report.hpp"
#include "json.hpp"

namespace hybkit {

// ---- grid construction ------------------------------------------------------

// Builds one grid from its spec. Every grid leaves fully annotated.
// Combined grids are resolved by the caller (they need the member grids).
inline Grid build_basic_grid(const GridSpec& spec, const VehicleParams& params,
                             const Bounds& bounds, std::uint64_t master_seed,
                             int workers) {
  const std::uint64_t seed = derive_seed(master_seed, 0x6772, spec.seed_offset);
  Grid g;
  switch (spec.type) {
    case 'U':
      g = uniform_grid(bounds, spec.n_samp);
      break;
    case 'R':
      g = spec.domain == "feasible"
              ? feasible_random_grid(params, bounds, spec.n_rand, seed, workers)
              : random_grid(bounds, spec.n_rand, seed);
      break;
    case 'S':
    case 'T': {
      GridGenConfig tc;
      tc.n_sim = spec.n_sim;
      tc.n_step = spec.n_step;
      tc.dt = spec.dt;
      tc.seed = seed;
      tc.workers = workers;
      if (spec.delta_u_star.size() == 3)
        tc.delta_u_star = Eigen::Map<const Eigen::VectorXd>(spec.delta_u_star.data(), 3);
      g = trajectory_grid(params, bounds, tc, spec.type);
      break;
    }
    case 'B':
      g = boundary_grid(params, bounds, spec.n_rand, spec.eps_b, seed, workers);
      break;
    default:
      throw Error("combined grids are assembled from their members");
  }
  if (spec.dedup_radius > 0.0) g = deduplicate(g, bounds, spec.dedup_radius);
  annotate_constraints(g, params, bounds, workers);
  if (spec.domain == "feasible") g = filter_feasible(g, params, bounds, workers);
  return g;
}

struct GridSet {
  std::map<std::string, Grid> grids;

  const Grid& at(const std::string& id) const {
    auto it = grids.find(id);
    if (it == grids.end()) throw IoError("unknown grid id: " + id);
    return it->second;
  }

  std::vector<std::pair<std::string, const Grid*>> view(
      const std::vector<std::string>& ids) const {
    std::vector<std::pair<std::string, const Grid*>> v;
    for (const auto& id : ids) v.emplace_back(id, &at(id));
    return v;
  }
};

inline GridSet build_grids(const RunConfig& cfg) {
  GridSet set;
  // two passes: basic grids first, then combinations
  for (const auto& spec : cfg.grids)
    if (spec.type != 'C')
      set.grids[spec.id] =
          build_basic_grid(spec, cfg.params, cfg.bounds, cfg.seed, cfg.workers);
  for (const auto& spec : cfg.grids) {
    if (spec.type != 'C') continue;
    std::vector<Grid> members;
    for (const auto& id : spec.members) members.push_back(set.at(id));
    set.grids[spec.id] = combine_grids(members);
  }
  return set;
}

// ---- table presets ----------------------------------------------------------

// Grid presets named after the published benchmark tables. The "desk" family
// is a scaled-down set suitable for a laptop run; "table3" matches the full
// published sizes.
inline std::vector<GridSpec> grid_profile(const std::string& name) {
  auto mk = [](std::string id, char type, std::string domain) {
    GridSpec g;
    g.id = std::move(id);
    g.type = type;
    g.domain = std::move(domain);
    return g;
  };
  static std::uint64_t offset = 0;
  offset = 0;
  auto next_offset = [&]() { return offset++; };

  if (name == "table3-train-U") {
    GridSpec g = mk("train-U", 'U', "feasible");
    g.n_samp = 6;
    return {g};
  }
  if (name == "table3-train-R") {
    GridSpec g = mk("train-R", 'R', "feasible");
    g.n_rand = 7000;
    g.seed_offset = 1;
    return {g};
  }
  if (name == "table3-train-S" || name == "table3-train-T") {
    bool s = name.back() == 'S';
    GridSpec g = mk(s ? "train-S" : "train-T", s ? 'S' : 'T', "feasible");
    g.n_sim = s ? 500 : 300;
    g.n_step = 1000;
    g.dt = 0.05;
    g.dedup_radius = 0.01;
    g.seed_offset = s ? 2 : 3;
    return {g};
  }
  if (name == "table3-ctrain") {
    GridSpec u = mk("ctrain-U", 'U', "full");
    u.n_samp = 5;
    GridSpec b = mk("ctrain-B", 'B', "full");
    b.n_rand = 15000;
    b.eps_b = 0.1;
    b.seed_offset = 4;
    GridSpec c = mk("ctrain", 'C', "full");
    c.members = {"ctrain-U", "ctrain-B"};
    return {u, b, c};
  }
  if (name == "table3-cval") {
    GridSpec u = mk("cval-U", 'U', "full");
    u.n_samp = 6;
    GridSpec b = mk("cval-B", 'B', "full");
    b.n_rand = 45000;
    b.eps_b = 0.2;
    b.seed_offset = 5;
    GridSpec c = mk("cval", 'C', "full");
    c.members = {"cval-U", "cval-B"};
    return {u, b, c};
  }
  (void)next_offset;
  throw IoError("unknown grid profile: " + name);
}

// desk-scale grid family used by the reproduction run and the acceptance
// experiments: roughly 2000-point training grids, 6000-point constraint grid
inline std::vector<GridSpec> desk_grid_specs() {
  std::vector<GridSpec> specs;
  {
    GridSpec g;
    g.id = "train-R";
    g.type = 'R';
    g.domain = "feasible";
    g.n_rand = 2000;
    g.seed_offset = 1;
    specs.push_back(g);
  }
  {
    GridSpec g;
    g.id = "train-U";
    g.type = 'U';
    g.domain = "feasible";
    g.n_samp = 5;
    specs.push_back(g);
  }
  for (char k : {'S', 'T'}) {
    GridSpec g;
    g.id = k == 'S' ? "train-S" : "train-T";
    g.type = k;
    g.domain = "feasible";
    g.n_sim = k == 'S' ? 160 : 120;
    g.n_step = 120;
    g.dt = 0.05;
    g.dedup_radius = 0.01;
    g.seed_offset = k == 'S' ? 2 : 3;
    specs.push_back(g);
  }
  for (char k : {'U', 'R', 'S', 'T'}) {
    GridSpec g;
    g.id = std::string("val-") + k;
    g.domain = "feasible";
    switch (k) {
      case 'U':
        g.type = 'U';
        g.n_samp = 6;
        break;
      case 'R':
        g.type = 'R';
        g.n_rand = 2500;
        g.seed_offset = 11;
        break;
      case 'S':
        g.type = 'S';
        g.n_sim = 200;
        g.n_step = 120;
        g.dt = 0.05;
        g.dedup_radius = 0.01;
        g.seed_offset = 12;
        break;
      default:
        g.type = 'T';
        g.n_sim = 150;
        g.n_step = 120;
        g.dt = 0.05;
        g.dedup_radius = 0.01;
        g.seed_offset = 13;
        break;
    }
    specs.push_back(g);
  }
  {
    GridSpec c;
    c.id = "val-C";
    c.type = 'C';
    c.members = {"val-U", "val-R", "val-S", "val-T"};
    specs.push_back(c);
  }
  {
    GridSpec u;
    u.id = "ctrain-U";
    u.type = 'U';
    u.n_samp = 4;
    specs.push_back(u);
    GridSpec b;
    b.id = "ctrain-B";
    b.type = 'B';
    b.n_rand = 2000;
    b.eps_b = 0.1;
    b.seed_offset = 4;
    specs.push_back(b);
    GridSpec c;
    c.id = "ctrain";
    c.type = 'C';
    c.members = {"ctrain-U", "ctrain-B"};
    specs.push_back(c);
  }
  {
    GridSpec u;
    u.id = "cval-U";
    u.type = 'U';
    u.n_samp = 5;
    specs.push_back(u);
    GridSpec b;
    b.id = "cval-B";
    b.type = 'B';
    b.n_rand = 3000;
    b.eps_b = 0.2;
    b.seed_offset = 5;
    specs.push_back(b);
    GridSpec c;
    c.id = "cval";
    c.type = 'C';
    c.members = {"cval-U", "cval-B"};
    specs.push_back(c);
  }
  return specs;
}

// ---- run directory helpers --------------------------------------------------

inline void write_json_file(const nlohmann::json& j,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed for " + path.string());
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  return j;
}

inline void save_grids(const GridSet& set, const RunConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out / "grids");
  nlohmann::json manifest;
  for (const auto& [id, grid] : set.grids) {
    fs::path file = cfg.out / "grids" / (id + ".csv");
    write_grid_csv(grid, file);
    std::size_t feas = grid.count_feasible();
    manifest[id] = {
        {"kind", std::string(1, grid.kind)},
        {"file", std::string("grids/") + id + ".csv"},
        {"count", grid.size()},
        {"feasible", feas},
        {"feasible_ratio",
         grid.size() ? static_cast<double>(feas) / static_cast<double>(grid.size()) : 0.0},
        {"meta", grid.meta},
        {"seed", grid.seed}};
  }
  write_json_file(manifest, cfg.out / "grids" / "manifest.json");
}

inline GridSet load_grids(const RunConfig& cfg,
                          const std::vector<std::string>& ids) {
  GridSet set;
  for (const auto& id : ids) {
    if (set.grids.count(id)) continue;
    set.grids[id] = read_grid_csv(cfg.out / "grids" / (id + ".csv"));
  }
  return set;
}

// collects every grid id a config references
inline std::vector<std::string> referenced_grid_ids(const RunConfig& cfg) {
  std::vector<std::string> ids;
  auto add = [&](const std::string& id) {
    if (!id.empty() &&
        std::find(ids.begin(), ids.end(), id) == ids.end())
      ids.push_back(id);
  };
  for (const auto& f : cfg.model_fits) {
    add(f.grid);
    for (const auto& v : f.validate_on) add(v);
  }
  for (const auto& f : cfg.constraint_fits) {
    add(f.grid);
    for (const auto& v : f.validate_on) add(v);
  }
  for (const auto& s : cfg.sweeps) {
    add(s.grid);
    for (const auto& v : s.validate_on) add(v);
    add(s.select_grid);
  }
  return ids;
}

// ---- spec assembly ----------------------------------------------------------

inline ModelFitSpec to_model_spec(const ModelFitConfig& f, const RunConfig& cfg) {
  ModelFitSpec s;
  s.component = f.component;
  s.p_plus = f.p_plus;
  s.p_minus = f.p_minus;
  s.gamma_m = f.gamma_m;
  s.eps_0 = f.eps0;
  s.dt = f.dt;
  s.training_grid_id = f.grid;
  s.multistart.n_starts = f.starts;
  s.multistart.seed = derive_seed(cfg.seed, 0xF17, std::hash<std::string>{}(f.id));
  s.multistart.workers = cfg.workers;
  s.multistart.lsq.max_iter = f.max_iter;
  return s;
}

inline ConstraintFitSpec to_constraint_spec(const ConstraintFitConfig& f,
                                            const RunConfig& cfg) {
  ConstraintFitSpec s;
  s.family = family_from_string(f.family);
  s.approach = approach_from_string(f.approach);
  s.p_plus = f.p_plus;
  s.p_minus = f.p_minus;
  s.n_e = f.n_e;
  s.n_c = f.n_c;
  s.gamma_c = f.gamma_c;
  s.eps_0 = f.eps0;
  s.training_grid_id = f.grid;
  s.multistart.n_starts = f.starts;
  s.multistart.seed = derive_seed(cfg.seed, 0xC17, std::hash<std::string>{}(f.id));
  s.multistart.workers = cfg.workers;
  s.multistart.lsq.max_iter = f.max_iter;
  s.pso.max_iter = f.pso_iters;
  s.pso.seed = s.multistart.seed;
  s.pso.workers = cfg.workers;
  s.pso_runs = f.pso_runs;
  return s;
}

// ---- commands ---------------------------------------------------------------

inline int cmd_grid(const RunConfig& cfg, const std::string& profile = {}) {
  RunConfig effective = cfg;
  if (!profile.empty()) effective.grids = grid_profile(profile);
  if (effective.grids.empty()) throw Error("no grids configured");
  GridSet set = build_grids(effective);
  save_grids(set, effective);
  return 0;
}

// persisted job store: {out}/jobs/{job_id}.json holds the report plus the
// fitted artifact, which makes sweeps resumable
inline std::filesystem::path job_file(const RunConfig& cfg, const std::string& job_id) {
  return cfg.out / "jobs" / (job_id + ".json");
}

inline void save_model_job(const RunConfig& cfg, const FitJobReport& report,
                           const MmpsFunction& f) {
  std::filesystem::create_directories(cfg.out / "jobs");
  nlohmann::json j;
  j["report"] = report_to_json(report);
  j["model"] = mmps_to_json(f);
  write_json_file(j, job_file(cfg, report.job_id));
}

inline void save_constraint_job(const RunConfig& cfg, const FitJobReport& report,
                                const Region& region) {
  std::filesystem::create_directories(cfg.out / "jobs");
  nlohmann::json j;
  j["report"] = report_to_json(report);
  j["region"] = region_to_json(region, 3, 3);
  write_json_file(j, job_file(cfg, report.job_id));
}

inline std::optional<std::pair<FitJobReport, MmpsFunction>> load_model_job(
    const RunConfig& cfg, const std::string& job_id) {
  auto path = job_file(cfg, job_id);
  if (!std::filesystem::exists(path)) return std::nullopt;
  nlohmann::json j = read_json_file(path);
  return std::make_pair(report_from_json(j.at("report")),
                        mmps_from_json(j.at("model"), 3, 3));
}

inline std::optional<std::pair<FitJobReport, Region>> load_constraint_job(
    const RunConfig& cfg, const std::string& job_id) {
  auto path = job_file(cfg, job_id);
  if (!std::filesystem::exists(path)) return std::nullopt;
  nlohmann::json j = read_json_file(path);
  return std::make_pair(report_from_json(j.at("report")),
                        region_from_json(j.at("region")));
}

inline int cmd_fit_model(const RunConfig& cfg, GridSet* prebuilt = nullptr) {
  if (cfg.model_fits.empty()) throw Error("no model fits configured");
  GridSet local;
  const GridSet& grids = prebuilt ? *prebuilt : (local = load_grids(cfg, referenced_grid_ids(cfg)), local);
  std::filesystem::create_directories(cfg.out / "jobs");
  for (const auto& f : cfg.model_fits) {
    ModelFitSpec spec = to_model_spec(f, cfg);
    const Grid& train = grids.at(f.grid);
    auto t0 = std::chrono::steady_clock::now();
    ModelFitResult fit = fit_model(spec, train, cfg.params, cfg.bounds, 3, 3);
    FitJobReport report;
    report.job_id = f.id;
    report.family = "model";
    const char* comp_names[] = {"dvx", "dvy", "dr"};
    report.approach = comp_names[f.component];
    report.p_plus = f.p_plus;
    report.p_minus = f.p_minus;
    report.training_grid = f.grid;
    report.training_error = fit.training_error;
    report.gamma_m = f.gamma_m;
    report.eps0 = fit.eps0;
    report.seed = spec.multistart.seed;
    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& vid : f.validate_on)
      report.validation_error[vid] = relative_model_error(
          fit.f, grids.at(vid), cfg.params, f.dt, f.component, fit.eps0);
    save_model_job(cfg, report, fit.f);
    write_start_log_csv(fit.multistart.log, cfg.out / "jobs" / (f.id + "-starts.csv"));
  }
  return 0;
}

inline int cmd_fit_constraint(const RunConfig& cfg, GridSet* prebuilt = nullptr) {
  if (cfg.constraint_fits.empty()) throw Error("no constraint fits configured");
  GridSet local;
  const GridSet& grids = prebuilt ? *prebuilt : (local = load_grids(cfg, referenced_grid_ids(cfg)), local);
  std::filesystem::create_directories(cfg.out / "jobs");
  for (const auto& f : cfg.constraint_fits) {
    ConstraintFitSpec spec = to_constraint_spec(f, cfg);
    const Grid& train = grids.at(f.grid);
    auto t0 = std::chrono::steady_clock::now();
    ConstraintFitResult fit = fit_constraint(spec, train, cfg.bounds, 3, 3);
    FitJobReport report;
    report.job_id = f.id;
    report.family = f.family;
    report.approach = f.approach;
    report.p_plus = spec.family == RegionFamily::Mmps ? spec.p_plus : 0;
    report.p_minus = spec.family == RegionFamily::Mmps ? spec.p_minus : 0;
    report.n_e = spec.family == RegionFamily::Ellipsoid ? spec.n_e : 0;
    report.n_c = spec.family == RegionFamily::Cone ? spec.n_c : 0;
    report.training_grid = f.grid;
    report.training_error = fit.boundary_error;
    report.eps0 = f.eps0;
    report.seed = spec.multistart.seed;
    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.misclassification["train"] = fit.train;
    for (const auto& vid : f.validate_on)
      report.misclassification[vid] = misclassification(fit.region, grids.at(vid));
    save_constraint_job(cfg, report, fit.region);
    if (!fit.log.empty())
      write_start_log_csv(fit.log, cfg.out / "jobs" / (f.id + "-starts.csv"));
  }
  return 0;
}

inline int cmd_validate(const RunConfig& cfg, const std::filesystem::path& model_file,
                        const std::vector<std::string>& grid_ids) {
  MmpsVectorFunction model = model_from_json(read_json_file(model_file));
  GridSet grids = load_grids(cfg, grid_ids);
  std::vector<double> eps0(model.components.size(), 1e-3);
  nlohmann::json out;
  for (const auto& id : grid_ids) {
    const Grid& g = grids.at(id);
    nlohmann::json errs = nlohmann::json::array();
    for (std::size_t c = 0; c < model.components.size(); ++c)
      errs.push_back(relative_model_error(model.components[c], g, cfg.params,
                                          0.01, static_cast<int>(c), eps0[c]));
    out[id] = errs;
  }
  std::filesystem::create_directories(cfg.out);
  write_json_file(out, cfg.out / "validation.json");
  return 0;
}

inline int cmd_sweep(const RunConfig& cfg, GridSet* prebuilt = nullptr) {
  if (cfg.sweeps.empty()) throw Error("no sweeps configured");
  GridSet local;
  const GridSet& grids = prebuilt ? *prebuilt : (local = load_grids(cfg, referenced_grid_ids(cfg)), local);
  std::filesystem::create_directories(cfg.out / "jobs");

  std::vector<FitJobReport> all_jobs;
  nlohmann::json best;
  for (const auto& sw : cfg.sweeps) {
    auto validation = grids.view(sw.validate_on);
    if (sw.kind == "model") {
      ModelSweepConfig mc;
      mc.sweep_id = sw.id;
      mc.base = to_model_spec(sw.model_base, cfg);
      mc.base.training_grid_id = sw.grid;
      mc.base.component = sw.component;
      mc.complexities = sw.complexities;
      mc.select_grid = sw.select_grid;
      ModelSweepResult res = sweep_model(
          mc, grids.at(sw.grid), validation, cfg.params, cfg.bounds,
          [&](const std::string& id) { return load_model_job(cfg, id); },
          [&](const FitJobReport& r, const MmpsFunction& f) {
            save_model_job(cfg, r, f);
          });
      for (const auto& j : res.jobs) all_jobs.push_back(j);
      best[sw.id] = {{"best_job_id", res.best_job_id},
                     {"select_grid", mc.select_grid}};
    } else {
      ConstraintSweepConfig cc;
      cc.sweep_id = sw.id;
      cc.base = to_constraint_spec(sw.constraint_base, cfg);
      cc.base.family = family_from_string(sw.family);
      cc.base.approach = approach_from_string(sw.approach);
      cc.base.training_grid_id = sw.grid;
      cc.complexities = sw.complexities;
      cc.violation_cap = sw.violation_cap;
      cc.select_grid = sw.select_grid;
      ConstraintSweepResult res = sweep_constraint(
          cc, grids.at(sw.grid), validation, cfg.bounds,
          [&](const std::string& id) { return load_constraint_job(cfg, id); },
          [&](const FitJobReport& r, const Region& reg) {
            save_constraint_job(cfg, r, reg);
          });
      for (const auto& j : res.jobs) all_jobs.push_back(j);
      best[sw.id] = {{"best_job_id", res.best_job_id},
                     {"select_grid", cc.select_grid},
                     {"violation_cap_satisfiable", res.cap_satisfiable}};
    }
  }
  emit_report_csv(all_jobs, cfg.out / "report.csv");
  write_json_file(best, cfg.out / "best.json");
  return 0;
}

// ---- full reproduction ------------------------------------------------------

// Assembles the full run plan at the requested scale. Desk scale fits in
// tens of minutes on a laptop; paper scale uses the published grid sizes and
// start counts and is orders of magnitude more expensive.
inline RunConfig reproduce_config(const std::string& scale, std::uint64_t seed,
                                  const std::filesystem::path& out, int workers) {
  if (scale != "desk" && scale != "paper")
    throw Error("scale must be 'desk' or 'paper'");
  const bool desk = scale == "desk";
  RunConfig cfg;
  cfg.seed = seed;
  cfg.workers = workers;
  cfg.out = out;

  if (desk) {
    cfg.grids = desk_grid_specs();
  } else {
    for (const auto& name :
         {"table3-train-U", "table3-train-R", "table3-train-S", "table3-train-T",
          "table3-ctrain", "table3-cval"})
      for (auto& g : grid_profile(name)) cfg.grids.push_back(g);
    // paper-scale validation grids for the model
    GridSpec vu;
    vu.id = "val-U";
    vu.type = 'U';
    vu.domain = "feasible";
    vu.n_samp = 7;
    cfg.grids.push_back(vu);
    GridSpec vr;
    vr.id = "val-R";
    vr.type = 'R';
    vr.domain = "feasible";
    vr.n_rand = 21000;
    vr.seed_offset = 11;
    cfg.grids.push_back(vr);
    for (char k : {'S', 'T'}) {
      GridSpec g;
      g.id = std::string("val-") + k;
      g.type = k;
      g.domain = "feasible";
      g.n_sim = k == 'S' ? 3000 : 1200;
      g.n_step = 1000;
      g.dt = 0.05;
      g.dedup_radius = 0.01;
      g.seed_offset = k == 'S' ? 12 : 13;
      cfg.grids.push_back(g);
    }
    GridSpec vc;
    vc.id = "val-C";
    vc.type = 'C';
    vc.members = {"val-U", "val-R", "val-S", "val-T"};
    cfg.grids.push_back(vc);
  }

  const int model_starts = desk ? 50 : 1000;
  const int constraint_starts = desk ? 12 : 1000;
  const std::vector<std::pair<int, int>> model_ladder =
      desk ? std::vector<std::pair<int, int>>{{1, 1}, {2, 1}, {2, 2}, {3, 2},
                                              {3, 3}, {4, 4}, {5, 5}, {6, 6},
                                              {7, 7}, {7, 8}}
           : [] {
               std::vector<std::pair<int, int>> v;
               for (int pp = 1; pp <= 8; ++pp)
                 for (int pm = 1; pm <= 8; ++pm) v.emplace_back(pp, pm);
               return v;
             }();

  const std::vector<std::string> model_train_grids =
      desk ? std::vector<std::string>{"train-R"}
           : std::vector<std::string>{"train-U", "train-R", "train-S", "train-T"};
  for (const auto& tg : model_train_grids) {
    for (int comp = 0; comp < 3; ++comp) {
      SweepConfig s;
      const char* comp_names[] = {"dvx", "dvy", "dr"};
      s.id = std::string("model-") + comp_names[comp] + "-" + tg;
      s.kind = "model";
      s.component = comp;
      s.grid = tg;
      s.validate_on = {"val-U", "val-R", "val-S", "val-T", "val-C"};
      s.select_grid = "val-C";
      s.complexities = model_ladder;
      s.model_base.id = s.id;
      s.model_base.component = comp;
      s.model_base.starts = model_starts;
      s.model_base.max_iter = desk ? 250 : 400;
      cfg.sweeps.push_back(s);
    }
  }

  auto constraint_sweep = [&](std::string id, std::string family,
                              std::string approach,
                              std::vector<std::pair<int, int>> cx) {
    SweepConfig s;
    s.id = std::move(id);
    s.kind = "constraint";
    s.family = std::move(family);
    s.approach = std::move(approach);
    s.grid = "ctrain";
    s.validate_on = {"cval"};
    s.select_grid = "cval";
    s.complexities = std::move(cx);
    s.constraint_base.id = s.id;
    s.constraint_base.family = s.family;
    s.constraint_base.approach = s.approach;
    s.constraint_base.starts = constraint_starts;
    s.constraint_base.max_iter = desk ? 120 : 300;
    s.constraint_base.pso_iters = desk ? 150 : 300;
    s.constraint_base.pso_runs = desk ? 3 : 1000;
    return s;
  };

  std::vector<std::pair<int, int>> mmps_cx;
  std::vector<std::pair<int, int>> count_cx;
  if (desk) {
    mmps_cx = {{1, 1}, {2, 2}, {3, 3}, {4, 4}};
    count_cx = {{1, 0}, {2, 0}, {3, 0}, {4, 0}, {5, 0}, {6, 0}};
  } else {
    for (int pp = 1; pp <= 8; ++pp)
      for (int pm = 1; pm <= 8; ++pm) mmps_cx.emplace_back(pp, pm);
    for (int k = 1; k <= 8; ++k) count_cx.emplace_back(k, 0);
  }
  cfg.sweeps.push_back(constraint_sweep("cone-boundary", "cone", "boundary", count_cx));
  cfg.sweeps.push_back(constraint_sweep("mmps-boundary", "mmps", "boundary", mmps_cx));
  cfg.sweeps.push_back(
      constraint_sweep("ellipsoid-boundary", "ellipsoid", "boundary",
                       desk ? std::vector<std::pair<int, int>>{{1, 0}, {2, 0}, {3, 0}, {4, 0}, {5, 0}}
                            : count_cx));
  cfg.sweeps.push_back(constraint_sweep(
      "mmps-region", "mmps", "region",
      desk ? std::vector<std::pair<int, int>>{{3, 2}} : mmps_cx));
  cfg.sweeps.push_back(constraint_sweep(
      "ellipsoid-region", "ellipsoid", "region",
      desk ? std::vector<std::pair<int, int>>{{2, 0}} : count_cx));
  return cfg;
}

inline int cmd_reproduce(const RunConfig& base, const std::string& scale) {
  RunConfig cfg = reproduce_config(scale, base.seed, base.out, base.workers);
  std::filesystem::create_directories(cfg.out);
  GridSet grids = build_grids(cfg);
  save_grids(grids, cfg);
  cmd_sweep(cfg, &grids);
  return 0;
}

}  // namespace hybkit
