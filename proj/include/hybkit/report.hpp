#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hybkit/fit.hpp"
#include "hybkit/grid.hpp"
#include "hybkit/mmps.hpp"
#include "hybkit/regions.hpp"
#include "hybkit/vehicle.hpp"
#include "json.hpp"

namespace hybkit {

// One fitted job with its training and validation metrics. Model jobs carry
// per-grid relative errors; constraint jobs carry per-grid inclusion and
// violation fractions.
struct FitJobReport {
  std::string job_id;
  std::string family;    // "model", "mmps", "ellipsoid", "cone"
  std::string approach;  // component name for models, region/boundary else
  int p_plus = 0;
  int p_minus = 0;
  int n_e = 0;
  int n_c = 0;
  std::string training_grid;
  double training_error = std::numeric_limits<double>::quiet_NaN();
  double gamma_m = 0.0;
  double eps0 = 0.0;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
  bool overfit = false;
  std::map<std::string, double> validation_error;            // model jobs
  std::map<std::string, Misclassification> misclassification;  // constraint jobs

  int complexity() const {
    if (family == "model" || family == "mmps") return p_plus + p_minus;
    return family == "ellipsoid" ? n_e : n_c;
  }
};

// mean of |target - f| / (|target| + eps0) for one component over one grid
inline double relative_model_error(const MmpsFunction& f, const Grid& grid,
                                   const VehicleParams& params, double dt,
                                   int component, double eps0) {
  Eigen::VectorXd target = model_targets(grid, params, dt, component);
  double acc = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double fi = f.eval(grid.point(i));
    acc += std::abs(target[static_cast<Eigen::Index>(i)] - fi) /
           (std::abs(target[static_cast<Eigen::Index>(i)]) + eps0);
  }
  return acc / static_cast<double>(grid.size());
}

// per-component, per-grid validation errors for a full vector model
inline std::map<std::string, std::vector<double>> validate_model(
    const MmpsVectorFunction& model,
    const std::vector<std::pair<std::string, const Grid*>>& grids,
    const VehicleParams& params, double dt, const std::vector<double>& eps0) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& [id, grid] : grids) {
    std::vector<double> errs;
    for (std::size_t c = 0; c < model.components.size(); ++c)
      errs.push_back(relative_model_error(model.components[c], *grid, params,
                                          dt, static_cast<int>(c), eps0[c]));
    out[id] = std::move(errs);
  }
  return out;
}

// flags jobs whose selection-grid error exceeds 1.5x the best error seen at
// any lower complexity (informational)
inline void flag_overfit(std::vector<FitJobReport>& jobs,
                         const std::function<double(const FitJobReport&)>& err) {
  std::vector<std::size_t> order(jobs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return jobs[a].complexity() < jobs[b].complexity();
  });
  double best = std::numeric_limits<double>::infinity();
  int best_complexity = -1;
  for (std::size_t i : order) {
    double e = err(jobs[i]);
    if (best_complexity >= 0 && jobs[i].complexity() > best_complexity &&
        e > 1.5 * best) {
      jobs[i].overfit = true;
    }
    if (e < best) {
      best = e;
      best_complexity = jobs[i].complexity();
    }
  }
}

// best model fit: minimum error on the selection grid
inline int select_best_model(const std::vector<FitJobReport>& jobs,
                             const std::string& select_grid) {
  int best_index = -1;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto it = jobs[i].validation_error.find(select_grid);
    if (it == jobs[i].validation_error.end()) continue;
    if (it->second < best) {
      best = it->second;
      best_index = static_cast<int>(i);
    }
  }
  return best_index;
}

// Best constraint fit: minimum inclusion+violation on the selection grid
// among fits whose violation stays under the cap. When no fit satisfies the
// cap the plain minimum-sum fit wins and the flag reports it.
inline std::pair<int, bool> select_best_constraint(
    const std::vector<FitJobReport>& jobs, const std::string& select_grid,
    double violation_cap) {
  int best_index = -1;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto it = jobs[i].misclassification.find(select_grid);
    if (it == jobs[i].misclassification.end()) continue;
    if (it->second.violation <= violation_cap && it->second.sum() < best) {
      best = it->second.sum();
      best_index = static_cast<int>(i);
    }
  }
  if (best_index >= 0) return {best_index, true};
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto it = jobs[i].misclassification.find(select_grid);
    if (it == jobs[i].misclassification.end()) continue;
    if (it->second.sum() < best) {
      best = it->second.sum();
      best_index = static_cast<int>(i);
    }
  }
  return {best_index, false};
}

// ---- sweeps -----------------------------------------------------------------

struct ModelSweepConfig {
  std::string sweep_id;
  ModelFitSpec base;
  std::vector<std::pair<int, int>> complexities;
  std::string select_grid;  // validation grid driving best-fit selection
  bool warm_chain = true;   // thread nested warm starts through the ladder
  int n_state = 3;
  int n_input = 3;
};

struct ModelSweepResult {
  std::vector<FitJobReport> jobs;
  std::vector<MmpsFunction> fits;  // parallel to jobs
  std::string best_job_id;
  int best_index = -1;
};

inline std::string model_job_id(const std::string& sweep_id, int pp, int pm) {
  return sweep_id + "-P" + std::to_string(pp) + "M" + std::to_string(pm);
}

// Fits the ladder of complexities for one component, validates each fit and
// selects the minimum error on the chosen validation grid.
inline ModelSweepResult sweep_model(
    const ModelSweepConfig& cfg, const Grid& training,
    const std::vector<std::pair<std::string, const Grid*>>& validation,
    const VehicleParams& params, const Bounds& bounds,
    const std::function<std::optional<std::pair<FitJobReport, MmpsFunction>>(
        const std::string&)>& load_done = {},
    const std::function<void(const FitJobReport&, const MmpsFunction&)>& on_done = {}) {
  ModelSweepResult out;
  std::optional<MmpsFunction> prev_raw;
  const char* comp_names[] = {"dvx", "dvy", "dr"};

  for (auto [pp, pm] : cfg.complexities) {
    ModelFitSpec spec = cfg.base;
    spec.p_plus = pp;
    spec.p_minus = pm;
    const std::string job_id = model_job_id(cfg.sweep_id, pp, pm);

    FitJobReport report;
    MmpsFunction fitted;
    if (auto done = load_done ? load_done(job_id) : std::nullopt) {
      report = done->first;
      fitted = done->second;
    } else {
      std::vector<Eigen::VectorXd> warm;
      if (cfg.warm_chain && prev_raw && prev_raw->p_plus() <= pp &&
          prev_raw->p_minus() <= pm) {
        MmpsFunction padded = nested_warm_start(
            rescale_to_normalized(*prev_raw, bounds), pp, pm, spec.multistart.seed);
        warm.push_back(padded.flatten());
      }
      auto t0 = std::chrono::steady_clock::now();
      ModelFitResult fit =
          fit_model(spec, training, params, bounds, cfg.n_state, cfg.n_input, warm);
      report.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      report.job_id = job_id;
      report.family = "model";
      report.approach = comp_names[spec.component];
      report.p_plus = pp;
      report.p_minus = pm;
      report.training_grid = spec.training_grid_id;
      report.training_error = fit.training_error;
      report.gamma_m = spec.gamma_m;
      report.eps0 = fit.eps0;
      report.seed = spec.multistart.seed;
      for (const auto& [grid_id, grid] : validation)
        report.validation_error[grid_id] = relative_model_error(
            fit.f, *grid, params, spec.dt, spec.component, fit.eps0);
      fitted = fit.f;
      if (on_done) on_done(report, fitted);
    }
    prev_raw = fitted;
    out.jobs.push_back(std::move(report));
    out.fits.push_back(std::move(fitted));
  }

  flag_overfit(out.jobs, [&](const FitJobReport& j) {
    auto it = j.validation_error.find(cfg.select_grid);
    return it != j.validation_error.end() ? it->second
                                          : std::numeric_limits<double>::infinity();
  });
  out.best_index = select_best_model(out.jobs, cfg.select_grid);
  if (out.best_index >= 0) out.best_job_id = out.jobs[static_cast<std::size_t>(out.best_index)].job_id;
  return out;
}

struct ConstraintSweepConfig {
  std::string sweep_id;
  ConstraintFitSpec base;
  std::vector<std::pair<int, int>> complexities;  // (p+,p-) or (n_e,0) / (n_c,0)
  double violation_cap = 0.06;
  std::string select_grid;
  bool warm_chain = true;
  int n_state = 3;
  int n_input = 3;
};

struct ConstraintSweepResult {
  std::vector<FitJobReport> jobs;
  std::vector<Region> regions;
  std::string best_job_id;
  int best_index = -1;
  bool cap_satisfiable = true;
};

inline std::string constraint_job_id(const std::string& sweep_id,
                                     const ConstraintFitSpec& spec) {
  std::string id = sweep_id + "-";
  if (spec.family == RegionFamily::Mmps)
    id += "P" + std::to_string(spec.p_plus) + "M" + std::to_string(spec.p_minus);
  else if (spec.family == RegionFamily::Ellipsoid)
    id += "E" + std::to_string(spec.n_e);
  else
    id += "C" + std::to_string(spec.n_c);
  return id;
}

// Sweeps a constraint family over its complexity ladder. The best fit is the
// minimum inclusion+violation on the selection grid among fits whose
// violation stays under the cap; if no fit satisfies the cap the minimum sum
// wins and the result is marked accordingly.
inline ConstraintSweepResult sweep_constraint(
    const ConstraintSweepConfig& cfg, const Grid& training,
    const std::vector<std::pair<std::string, const Grid*>>& validation,
    const Bounds& bounds,
    const std::function<std::optional<std::pair<FitJobReport, Region>>(
        const std::string&)>& load_done = {},
    const std::function<void(const FitJobReport&, const Region&)>& on_done = {}) {
  ConstraintSweepResult out;
  std::optional<Eigen::VectorXd> prev_theta;
  std::optional<std::pair<int, int>> prev_cx;

  for (auto cx : cfg.complexities) {
    ConstraintFitSpec spec = cfg.base;
    if (spec.family == RegionFamily::Mmps) {
      spec.p_plus = cx.first;
      spec.p_minus = cx.second;
    } else if (spec.family == RegionFamily::Ellipsoid) {
      spec.n_e = cx.first;
    } else {
      spec.n_c = cx.first;
    }
    const std::string job_id = constraint_job_id(cfg.sweep_id, spec);

    FitJobReport report;
    Region region;
    bool fitted_now = false;
    if (auto done = load_done ? load_done(job_id) : std::nullopt) {
      report = done->first;
      region = done->second;
    } else {
      std::vector<Eigen::VectorXd> warm;
      if (cfg.warm_chain && prev_theta)
        warm = grow_warm_start(cfg.base, *prev_theta, *prev_cx, cx,
                               cfg.n_state, cfg.n_input);
      auto t0 = std::chrono::steady_clock::now();
      ConstraintFitResult fit =
          fit_constraint(spec, training, bounds, cfg.n_state, cfg.n_input, warm);
      report.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      report.job_id = job_id;
      report.family = to_string(spec.family);
      report.approach = to_string(spec.approach);
      report.p_plus = spec.family == RegionFamily::Mmps ? spec.p_plus : 0;
      report.p_minus = spec.family == RegionFamily::Mmps ? spec.p_minus : 0;
      report.n_e = spec.family == RegionFamily::Ellipsoid ? spec.n_e : 0;
      report.n_c = spec.family == RegionFamily::Cone ? spec.n_c : 0;
      report.training_grid = spec.training_grid_id;
      report.training_error = fit.boundary_error;
      report.eps0 = spec.eps_0;
      report.seed = spec.multistart.seed;
      report.misclassification["train"] = fit.train;
      for (const auto& [grid_id, grid] : validation)
        report.misclassification[grid_id] = misclassification(fit.region, *grid);
      region = fit.region;
      prev_theta = fit.theta;
      prev_cx = cx;
      fitted_now = true;
      if (on_done) on_done(report, region);
    }
    if (!fitted_now) {
      prev_theta.reset();  // resumed jobs do not carry normalized parameters
      prev_cx.reset();
    }
    out.jobs.push_back(std::move(report));
    out.regions.push_back(std::move(region));
  }

  flag_overfit(out.jobs, [&](const FitJobReport& j) {
    auto it = j.misclassification.find(cfg.select_grid);
    return it != j.misclassification.end()
               ? it->second.sum()
               : std::numeric_limits<double>::infinity();
  });
  auto [idx, satisfiable] =
      select_best_constraint(out.jobs, cfg.select_grid, cfg.violation_cap);
  out.best_index = idx;
  out.cap_satisfiable = satisfiable;
  if (out.best_index >= 0)
    out.best_job_id = out.jobs[static_cast<std::size_t>(out.best_index)].job_id;
  return out;
}

// ---- emission ---------------------------------------------------------------

inline void emit_report_csv(const std::vector<FitJobReport>& jobs,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "job_id,family,approach,Pp,Pm,ne,nc,grid,metric,value\n";
  auto row = [&](const FitJobReport& j, const std::string& grid,
                 const std::string& metric, double value) {
    out << j.job_id << ',' << j.family << ',' << j.approach << ',' << j.p_plus
        << ',' << j.p_minus << ',' << j.n_e << ',' << j.n_c << ',' << grid
        << ',' << metric << ',' << detail::format_double(value) << "\n";
  };
  for (const auto& j : jobs) {
    if (!std::isnan(j.training_error))
      row(j, j.training_grid, "training_error", j.training_error);
    for (const auto& [grid, err] : j.validation_error)
      row(j, grid, "validation_error", err);
    for (const auto& [grid, mis] : j.misclassification) {
      row(j, grid, "inclusion_error", mis.inclusion);
      row(j, grid, "violation_error", mis.violation);
    }
    row(j, "", "overfit", j.overfit ? 1.0 : 0.0);
    row(j, "", "wall_time_s", j.wall_time_s);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

inline nlohmann::json report_to_json(const FitJobReport& j) {
  nlohmann::json v;
  v["job_id"] = j.job_id;
  v["family"] = j.family;
  v["approach"] = j.approach;
  v["p_plus"] = j.p_plus;
  v["p_minus"] = j.p_minus;
  v["n_e"] = j.n_e;
  v["n_c"] = j.n_c;
  v["training_grid"] = j.training_grid;
  if (!std::isnan(j.training_error)) v["training_error"] = j.training_error;
  v["gamma_m"] = j.gamma_m;
  v["eps0"] = j.eps0;
  v["seed"] = j.seed;
  v["wall_time_s"] = j.wall_time_s;
  v["overfit"] = j.overfit;
  for (const auto& [grid, err] : j.validation_error)
    v["validation_error"][grid] = err;
  for (const auto& [grid, mis] : j.misclassification)
    v["misclassification"][grid] = {{"inclusion", mis.inclusion},
                                    {"violation", mis.violation}};
  return v;
}

inline FitJobReport report_from_json(const nlohmann::json& v) {
  FitJobReport j;
  j.job_id = v.at("job_id").get<std::string>();
  j.family = v.at("family").get<std::string>();
  j.approach = v.at("approach").get<std::string>();
  j.p_plus = v.at("p_plus").get<int>();
  j.p_minus = v.at("p_minus").get<int>();
  j.n_e = v.at("n_e").get<int>();
  j.n_c = v.at("n_c").get<int>();
  j.training_grid = v.at("training_grid").get<std::string>();
  if (v.contains("training_error")) j.training_error = v.at("training_error").get<double>();
  j.gamma_m = v.value("gamma_m", 0.0);
  j.eps0 = v.value("eps0", 0.0);
  j.seed = v.value("seed", std::uint64_t{0});
  j.wall_time_s = v.value("wall_time_s", 0.0);
  j.overfit = v.value("overfit", false);
  if (v.contains("validation_error"))
    for (auto it = v["validation_error"].begin(); it != v["validation_error"].end(); ++it)
      j.validation_error[it.key()] = it.value().get<double>();
  if (v.contains("misclassification"))
    for (auto it = v["misclassification"].begin(); it != v["misclassification"].end(); ++it)
      j.misclassification[it.key()] = {it.value().at("inclusion").get<double>(),
                                       it.value().at("violation").get<double>()};
  return j;
}

}  // namespace hybkit
