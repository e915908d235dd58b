#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "hybkit/errors.hpp"
#include "hybkit/parallel.hpp"
#include "hybkit/rng.hpp"

namespace hybkit {

// Nonlinear least-squares problem in residual form. The Jacobian is sparse
// row-wise: piecewise-affine fits touch only the active pieces' parameters,
// so normal equations assemble in O(sum of row nnz^2).
struct LsqProblem {
  int dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> residual;
  std::function<Eigen::SparseMatrix<double>(const Eigen::VectorXd&)> jacobian;
};

struct LsqOptions {
  int max_iter = 200;
  double tol_grad = 1e-10;
  double tol_step = 1e-12;
  double lambda_init = 1e-3;
};

struct LsqResult {
  Eigen::VectorXd x;
  double cost = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

// Levenberg-Marquardt with multiplicative damping on diag(J'J). Accepted
// iterates strictly decrease the cost.
inline LsqResult solve_lsq(const LsqProblem& problem, const Eigen::VectorXd& x0,
                           const LsqOptions& opt = {}) {
  if (!x0.allFinite()) throw NumericalBreakdown("non-finite initial point");
  Eigen::VectorXd x = x0;
  Eigen::VectorXd r = problem.residual(x);
  if (!r.allFinite()) throw NumericalBreakdown("non-finite residual at start");
  double cost = 0.5 * r.squaredNorm();
  double lambda = opt.lambda_init;

  LsqResult res;
  res.x = x;
  res.cost = cost;

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    res.iterations = iter;
    Eigen::SparseMatrix<double> jac = problem.jacobian(x);
    Eigen::VectorXd grad = jac.transpose() * r;
    if (grad.lpNorm<Eigen::Infinity>() <= opt.tol_grad) {
      res.converged = true;
      break;
    }
    Eigen::MatrixXd jtj =
        Eigen::MatrixXd(Eigen::SparseMatrix<double>(jac.transpose() * jac));
    Eigen::VectorXd diag = jtj.diagonal().cwiseMax(1e-12);

    bool accepted = false;
    for (int attempt = 0; attempt < 40; ++attempt) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * diag;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
      if (ldlt.info() != Eigen::Success) {
        lambda = std::min(lambda * 10.0, 1e14);
        continue;
      }
      Eigen::VectorXd step = ldlt.solve(-grad);
      if (!step.allFinite()) {
        lambda = std::min(lambda * 10.0, 1e14);
        continue;
      }
      if (step.norm() <= opt.tol_step * (x.norm() + opt.tol_step)) {
        res.converged = true;
        accepted = false;
        break;
      }
      Eigen::VectorXd x_new = x + step;
      Eigen::VectorXd r_new = problem.residual(x_new);
      double cost_new = r_new.allFinite()
                            ? 0.5 * r_new.squaredNorm()
                            : std::numeric_limits<double>::infinity();
      if (cost_new < cost) {
        x = std::move(x_new);
        r = std::move(r_new);
        cost = cost_new;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        break;
      }
      lambda = std::min(lambda * 5.0, 1e14);
    }
    res.x = x;
    res.cost = cost;
    if (!accepted) break;  // converged flag already set when the step stalled
  }
  res.x = x;
  res.cost = cost;
  return res;
}

struct MultiStartConfig {
  int n_starts = 50;
  std::uint64_t seed = 0;
  double init_scale = 1.0;
  LsqOptions lsq;
  int workers = 0;  // 0 = hardware concurrency
};

struct StartLogEntry {
  int start_idx = 0;
  std::uint64_t seed = 0;
  int iterations = 0;
  double final_cost = std::numeric_limits<double>::infinity();
  bool converged = false;
};

struct MultiStartResult {
  LsqResult best;
  int best_start = -1;
  std::vector<StartLogEntry> log;
};

// Independent solves from random initializations (plus any caller-provided
// warm starts, which occupy the leading indices). The winner is the
// lexicographic (cost, start index) minimum, so results do not depend on the
// worker count.
inline MultiStartResult multi_start_lsq(
    const LsqProblem& problem, const MultiStartConfig& cfg,
    const std::vector<Eigen::VectorXd>& warm_starts = {}) {
  const std::size_t n_warm = warm_starts.size();
  const std::size_t total = n_warm + static_cast<std::size_t>(cfg.n_starts);
  if (total == 0) throw AllStartsFailed("no starts configured");

  std::vector<std::optional<LsqResult>> results(total);
  std::vector<StartLogEntry> log(total);

  parallel_for(total, cfg.workers, [&](std::size_t i) {
    StartLogEntry entry;
    entry.start_idx = static_cast<int>(i);
    Eigen::VectorXd x0;
    if (i < n_warm) {
      x0 = warm_starts[i];
    } else {
      entry.seed = derive_seed(cfg.seed, 0x5742, i - n_warm);
      Rng rng(entry.seed);
      x0.resize(problem.dim);
      for (int d = 0; d < problem.dim; ++d)
        x0[d] = rng.uniform(-cfg.init_scale, cfg.init_scale);
    }
    try {
      LsqResult r = solve_lsq(problem, x0, cfg.lsq);
      entry.iterations = r.iterations;
      entry.final_cost = r.cost;
      entry.converged = r.converged;
      results[i] = std::move(r);
    } catch (const Error&) {
      // failed start; logged with infinite cost
    }
    log[i] = entry;
  });

  MultiStartResult out;
  out.log = std::move(log);
  for (std::size_t i = 0; i < total; ++i) {
    if (!results[i]) continue;
    if (out.best_start < 0 || results[i]->cost < out.best.cost) {
      out.best = *results[i];
      out.best_start = static_cast<int>(i);
    }
  }
  if (out.best_start < 0) throw AllStartsFailed("every start failed");
  return out;
}

inline void write_start_log_csv(const std::vector<StartLogEntry>& log,
                                const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "start_idx,seed,iterations,final_cost,converged\n";
  for (const auto& e : log) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", e.final_cost);
    out << e.start_idx << ',' << e.seed << ',' << e.iterations << ',' << buf
        << ',' << (e.converged ? 1 : 0) << "\n";
  }
}

// ---- particle swarm --------------------------------------------------------

struct PsoProblem {
  int dim = 0;
  std::function<double(const Eigen::VectorXd&)> objective;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct PsoOptions {
  int swarm_size = 0;  // 0 = 10 * dim
  int max_iter = 300;
  double omega = 0.729;
  double c1 = 1.49445;
  double c2 = 1.49445;
  std::uint64_t seed = 0;
  int workers = 0;
};

struct PsoResult {
  Eigen::VectorXd x;
  double cost = std::numeric_limits<double>::infinity();
};

// Synchronous global-best PSO. Every particle owns a seeded random stream
// and writes to its own slot, so the trajectory is reproducible for a fixed
// seed regardless of the worker count. The global best is monotone.
inline PsoResult solve_pso(const PsoProblem& problem, const PsoOptions& opt,
                           const std::vector<Eigen::VectorXd>& warm_starts = {}) {
  const int dim = problem.dim;
  const int swarm = opt.swarm_size > 0 ? opt.swarm_size : 10 * dim;
  const Eigen::VectorXd width = problem.upper - problem.lower;

  std::vector<Rng> streams;
  streams.reserve(static_cast<std::size_t>(swarm));
  for (int i = 0; i < swarm; ++i)
    streams.emplace_back(derive_seed(opt.seed, 0x9501, static_cast<std::uint64_t>(i)));

  Eigen::MatrixXd pos(dim, swarm), vel(dim, swarm), pbest(dim, swarm);
  Eigen::VectorXd pcost(swarm), cost(swarm);
  for (int i = 0; i < swarm; ++i) {
    for (int d = 0; d < dim; ++d)
      pos(d, i) = problem.lower[d] + width[d] * streams[static_cast<std::size_t>(i)].uniform();
    if (i < static_cast<int>(warm_starts.size()))
      pos.col(i) = warm_starts[static_cast<std::size_t>(i)]
                       .cwiseMax(problem.lower)
                       .cwiseMin(problem.upper);
    vel.col(i).setZero();
  }

  auto evaluate = [&](const Eigen::MatrixXd& p, Eigen::VectorXd& out) {
    parallel_for(static_cast<std::size_t>(swarm), opt.workers, [&](std::size_t i) {
      double v = problem.objective(p.col(static_cast<Eigen::Index>(i)));
      out[static_cast<Eigen::Index>(i)] = std::isfinite(v)
                                              ? v
                                              : std::numeric_limits<double>::infinity();
    });
  };

  evaluate(pos, cost);
  pbest = pos;
  pcost = cost;
  int gbest = 0;
  for (int i = 1; i < swarm; ++i)
    if (pcost[i] < pcost[gbest]) gbest = i;
  Eigen::VectorXd gbest_x = pbest.col(gbest);
  double gbest_cost = pcost[gbest];

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    for (int i = 0; i < swarm; ++i) {
      auto& rng = streams[static_cast<std::size_t>(i)];
      for (int d = 0; d < dim; ++d) {
        double r1 = rng.uniform();
        double r2 = rng.uniform();
        double v = opt.omega * vel(d, i) +
                   opt.c1 * r1 * (pbest(d, i) - pos(d, i)) +
                   opt.c2 * r2 * (gbest_x[d] - pos(d, i));
        v = std::clamp(v, -width[d], width[d]);
        double x = pos(d, i) + v;
        if (x < problem.lower[d]) {
          x = problem.lower[d];
          v = 0.0;
        } else if (x > problem.upper[d]) {
          x = problem.upper[d];
          v = 0.0;
        }
        vel(d, i) = v;
        pos(d, i) = x;
      }
    }
    evaluate(pos, cost);
    for (int i = 0; i < swarm; ++i) {
      if (cost[i] < pcost[i]) {
        pcost[i] = cost[i];
        pbest.col(i) = pos.col(i);
      }
      if (cost[i] < gbest_cost) {
        gbest_cost = cost[i];
        gbest_x = pos.col(i);
      }
    }
  }
  return {gbest_x, gbest_cost};
}

}  // namespace hybkit
