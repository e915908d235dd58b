#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hybkit/pipeline.hpp"
#include "json.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required) {
  auto* c = cmd->add_option("--config", opts.config_path, "run configuration (json)");
  if (config_required) c->required();
  cmd->add_option("--out", opts.out, "output directory (overrides config)");
  cmd->add_option("--seed", opts.seed, "master seed (overrides config)");
  cmd->add_option("--workers", opts.workers, "worker threads, 0 = all cores");
}

hybkit::RunConfig resolve(const CommonOpts& opts) {
  hybkit::RunConfig cfg;
  if (!opts.config_path.empty()) cfg = hybkit::load_run_config(opts.config_path);
  if (!opts.out.empty()) cfg.out = opts.out;
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.workers) cfg.workers = *opts.workers;
  return cfg;
}

void copy_config_in(const hybkit::RunConfig& cfg, const std::string& config_path) {
  if (config_path.empty()) return;
  std::filesystem::create_directories(cfg.out);
  std::error_code ec;
  std::filesystem::copy_file(config_path, cfg.out / "config.json",
                             std::filesystem::copy_options::overwrite_existing, ec);
}

int fail(const std::exception& e) {
  nlohmann::json err = {{"error", "run_failed"}, {"message", e.what()}};
  std::cerr << err.dump() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MMPS hybridization toolbox: grid generation, model and "
               "constraint approximation for a single-track vehicle model"};
  app.require_subcommand(1);

  CommonOpts grid_opts, fitm_opts, fitc_opts, val_opts, sweep_opts, rep_opts;
  std::string grid_profile_name;
  std::string model_file;
  std::vector<std::string> val_grids;
  std::string scale = "desk";

  auto* cmd_grid = app.add_subcommand("grid", "generate sample grids");
  add_common(cmd_grid, grid_opts, false);
  cmd_grid->add_option("--profile", grid_profile_name,
                       "named grid preset (e.g. table3-train-U)");

  auto* cmd_fit_model = app.add_subcommand("fit-model", "fit model components");
  add_common(cmd_fit_model, fitm_opts, true);

  auto* cmd_fit_constraint =
      app.add_subcommand("fit-constraint", "fit constraint approximations");
  add_common(cmd_fit_constraint, fitc_opts, true);

  auto* cmd_validate = app.add_subcommand("validate", "validate a fitted model");
  add_common(cmd_validate, val_opts, false);
  cmd_validate->add_option("--model", model_file, "fitted model json")->required();
  cmd_validate->add_option("--grids", val_grids, "grid ids to evaluate")->required();

  auto* cmd_sweep = app.add_subcommand("sweep", "run complexity sweeps");
  add_common(cmd_sweep, sweep_opts, true);

  auto* cmd_reproduce =
      app.add_subcommand("reproduce", "full benchmark reproduction run");
  add_common(cmd_reproduce, rep_opts, false);
  cmd_reproduce->add_option("--scale", scale, "desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_grid->parsed()) {
      auto cfg = resolve(grid_opts);
      copy_config_in(cfg, grid_opts.config_path);
      return hybkit::cmd_grid(cfg, grid_profile_name);
    }
    if (cmd_fit_model->parsed()) {
      auto cfg = resolve(fitm_opts);
      copy_config_in(cfg, fitm_opts.config_path);
      return hybkit::cmd_fit_model(cfg);
    }
    if (cmd_fit_constraint->parsed()) {
      auto cfg = resolve(fitc_opts);
      copy_config_in(cfg, fitc_opts.config_path);
      return hybkit::cmd_fit_constraint(cfg);
    }
    if (cmd_validate->parsed()) {
      auto cfg = resolve(val_opts);
      return hybkit::cmd_validate(cfg, model_file, val_grids);
    }
    if (cmd_sweep->parsed()) {
      auto cfg = resolve(sweep_opts);
      copy_config_in(cfg, sweep_opts.config_path);
      return hybkit::cmd_sweep(cfg);
    }
    if (cmd_reproduce->parsed()) {
      auto cfg = resolve(rep_opts);
      return hybkit::cmd_reproduce(cfg, scale);
    }
  } catch (const std::exception& e) {
    return fail(e);
  }
  return 0;
}
