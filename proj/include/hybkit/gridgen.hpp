#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <unordered_map>
#include <vector>

#include "hybkit/errors.hpp"
#include "hybkit/grid.hpp"
#include "hybkit/optim.hpp"
#include "hybkit/parallel.hpp"
#include "hybkit/rng.hpp"
#include "hybkit/vehicle.hpp"

namespace hybkit {

struct GridGenConfig {
  int n_samp = 2;
  std::size_t n_rand = 1;
  int n_sim = 1;
  int n_step = 1;
  Eigen::VectorXd delta_u_star;  // per-input rate bound; empty = 5% of range
  double eps_b = 0.1;
  double dedup_radius = 0.0;
  std::uint64_t seed = 0;
  double dt = 0.01;              // rollout step for trajectory grids
  std::size_t size_cap = 10'000'000;
  int workers = 0;
};

// Fills per-point constraint values and feasibility labels. A point is
// feasible when it lies in the box, G <= 0, and the dynamics is evaluable
// there (the slip-ratio inversion succeeds).
inline void annotate_constraints(Grid& grid, const VehicleParams& params,
                                 const Bounds& bounds, int workers = 0) {
  grid.g_value.resize(static_cast<Eigen::Index>(grid.size()));
  grid.feasible.assign(grid.size(), 0);
  parallel_for(grid.size(), workers, [&](std::size_t i) {
    Eigen::VectorXd z = grid.point(i);
    double g;
    try {
      g = constraint_value(params, z);
    } catch (const Error&) {
      g = std::numeric_limits<double>::infinity();
    }
    grid.g_value[static_cast<Eigen::Index>(i)] = g;
    grid.feasible[i] = (bounds.contains(z) && g <= 0.0 &&
                        is_feasible(params, z, bounds))
                           ? 1
                           : 0;
  });
}

// Cartesian product of n_samp uniformly spaced samples per axis, endpoints
// included.
inline Grid uniform_grid(const Bounds& bounds, int n_samp,
                         std::size_t size_cap = 10'000'000) {
  if (n_samp < 2) throw Error("uniform grid needs n_samp >= 2");
  const int d = bounds.dim();
  double total_d = std::pow(static_cast<double>(n_samp), d);
  if (total_d > static_cast<double>(size_cap))
    throw SizeOverflow("uniform grid would exceed the configured size cap");
  const std::size_t total = static_cast<std::size_t>(std::llround(total_d));

  Grid g;
  g.kind = 'U';
  g.points.resize(static_cast<Eigen::Index>(total), d);
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  for (std::size_t row = 0; row < total; ++row) {
    for (int c = 0; c < d; ++c) {
      double t = static_cast<double>(idx[static_cast<std::size_t>(c)]) /
                 static_cast<double>(n_samp - 1);
      g.points(static_cast<Eigen::Index>(row), c) =
          bounds.lower[c] + t * (bounds.upper[c] - bounds.lower[c]);
    }
    for (int c = d - 1; c >= 0; --c) {
      if (++idx[static_cast<std::size_t>(c)] < n_samp) break;
      idx[static_cast<std::size_t>(c)] = 0;
    }
  }
  std::ostringstream meta;
  meta << "n_samp=" << n_samp;
  g.meta = meta.str();
  g.reserve_labels();
  return g;
}

// n_rand i.i.d. uniform points in the box.
inline Grid random_grid(const Bounds& bounds, std::size_t n_rand,
                        std::uint64_t seed) {
  if (n_rand < 1) throw Error("random grid needs n_rand >= 1");
  const int d = bounds.dim();
  Grid g;
  g.kind = 'R';
  g.seed = seed;
  g.points.resize(static_cast<Eigen::Index>(n_rand), d);
  Rng rng(derive_seed(seed, 0x7261));
  for (std::size_t i = 0; i < n_rand; ++i)
    for (int c = 0; c < d; ++c)
      g.points(static_cast<Eigen::Index>(i), c) =
          rng.uniform(bounds.lower[c], bounds.upper[c]);
  std::ostringstream meta;
  meta << "n_rand=" << n_rand;
  g.meta = meta.str();
  g.reserve_labels();
  return g;
}

namespace detail {

// Damped Newton on F(x, u) = 0 over the state, finite-difference Jacobian,
// with a Levenberg-Marquardt polish as fallback.
inline std::optional<State> solve_steady_state(const VehicleParams& params,
                                               const ControlInput& u,
                                               const Bounds& bounds,
                                               double tol = 1e-8) {
  auto residual = [&](const Eigen::Vector3d& s) -> Eigen::Vector3d {
    StateDerivative d = dynamics(params, State{s[0], s[1], s[2]}, u);
    return {d.vx_dot, d.vy_dot, d.r_dot};
  };

  Eigen::Vector3d x;
  x << 0.5 * (bounds.lower[0] + bounds.upper[0]), 0.0, 0.0;
  const double vx_floor = 0.5;

  try {
    Eigen::Vector3d f = residual(x);
    for (int iter = 0; iter < 60 && f.norm() > tol; ++iter) {
      Eigen::Matrix3d jac;
      for (int c = 0; c < 3; ++c) {
        double h = 1e-6 * std::max(1.0, std::abs(x[c]));
        Eigen::Vector3d xp = x, xm = x;
        xp[c] += h;
        xm[c] -= h;
        jac.col(c) = (residual(xp) - residual(xm)) / (2.0 * h);
      }
      Eigen::Vector3d dx = jac.fullPivLu().solve(-f);
      if (!dx.allFinite()) break;
      double t = 1.0;
      bool improved = false;
      for (int ls = 0; ls < 12; ++ls, t *= 0.5) {
        Eigen::Vector3d cand = x + t * dx;
        if (cand[0] < vx_floor) continue;
        Eigen::Vector3d fc;
        try {
          fc = residual(cand);
        } catch (const Error&) {
          continue;
        }
        if (fc.norm() < f.norm()) {
          x = cand;
          f = fc;
          improved = true;
          break;
        }
      }
      if (!improved) break;
    }
    if (f.norm() <= tol) return State{x[0], x[1], x[2]};
  } catch (const Error&) {
    // fall through to least squares
  }

  LsqProblem lsq;
  lsq.dim = 3;
  lsq.residual = [&](const Eigen::VectorXd& s) -> Eigen::VectorXd {
    State st{std::max(s[0], vx_floor), s[1], s[2]};
    StateDerivative d = dynamics(params, st, u);
    return Eigen::Vector3d{d.vx_dot, d.vy_dot, d.r_dot};
  };
  lsq.jacobian = [&](const Eigen::VectorXd& s) {
    Eigen::SparseMatrix<double> jac(3, 3);
    std::vector<Eigen::Triplet<double>> trip;
    for (int c = 0; c < 3; ++c) {
      double h = 1e-6 * std::max(1.0, std::abs(s[c]));
      Eigen::VectorXd sp = s, sm = s;
      sp[c] += h;
      sm[c] -= h;
      Eigen::VectorXd col = (lsq.residual(sp) - lsq.residual(sm)) / (2.0 * h);
      for (int rw = 0; rw < 3; ++rw) trip.emplace_back(rw, c, col[rw]);
    }
    jac.setFromTriplets(trip.begin(), trip.end());
    return jac;
  };
  try {
    Eigen::Vector3d x0;
    x0 << 0.5 * (bounds.lower[0] + bounds.upper[0]), 0.0, 0.0;
    LsqOptions opt;
    opt.max_iter = 120;
    LsqResult res = solve_lsq(lsq, x0, opt);
    State st{std::max(res.x[0], vx_floor), res.x[1], res.x[2]};
    StateDerivative d = dynamics(params, st, u);
    if (Eigen::Vector3d(d.vx_dot, d.vy_dot, d.r_dot).norm() <= tol) return st;
  } catch (const Error&) {
  }
  return std::nullopt;
}

inline Eigen::VectorXd default_rate_bound(const Bounds& bounds) {
  // 5% of each input's range per step
  return 0.05 * (bounds.upper.tail(3) - bounds.lower.tail(3));
}

}  // namespace detail

// Open-loop rollouts of the vehicle model driven by a bounded random input
// walk. Kind 'S' starts each rollout on a steady state of the drawn initial
// input, kind 'T' at a random state. A rollout stops at the first point that
// leaves the box; only in-box points are kept. Rollouts draw from per-index
// seed streams and are concatenated in rollout order, so the grid is
// reproducible regardless of the worker count.
inline Grid trajectory_grid(const VehicleParams& params, const Bounds& bounds,
                            const GridGenConfig& cfg, char kind) {
  if (kind != 'S' && kind != 'T') throw Error("trajectory grid kind must be S or T");
  if (cfg.n_sim < 1 || cfg.n_step < 1)
    throw Error("trajectory grid needs n_sim >= 1 and n_step >= 1");
  Eigen::VectorXd du = cfg.delta_u_star.size() == 3
                           ? cfg.delta_u_star
                           : detail::default_rate_bound(bounds);
  for (int c = 0; c < 3; ++c)
    if (!(du[c] > 0.0)) throw Error("input rate bound must be positive");

  const int max_redraw = 64;
  std::vector<std::vector<Eigen::VectorXd>> rollouts(
      static_cast<std::size_t>(cfg.n_sim));
  std::vector<std::uint64_t> rollout_seed(static_cast<std::size_t>(cfg.n_sim));

  parallel_for(static_cast<std::size_t>(cfg.n_sim), cfg.workers, [&](std::size_t s) {
    rollout_seed[s] = derive_seed(cfg.seed, kind == 'S' ? 0x5353 : 0x5454, s);
    Rng rng(rollout_seed[s]);
    auto draw_input = [&]() {
      ControlInput u;
      u.fxf = rng.uniform(bounds.lower[3], bounds.upper[3]);
      u.fxr = rng.uniform(bounds.lower[4], bounds.upper[4]);
      u.delta = rng.uniform(bounds.lower[5], bounds.upper[5]);
      return u;
    };

    State x;
    ControlInput u;
    bool initialized = false;
    for (int attempt = 0; attempt < max_redraw && !initialized; ++attempt) {
      u = draw_input();
      if (kind == 'T') {
        x.vx = rng.uniform(bounds.lower[0], bounds.upper[0]);
        x.vy = rng.uniform(bounds.lower[1], bounds.upper[1]);
        x.r = rng.uniform(bounds.lower[2], bounds.upper[2]);
        initialized = true;
      } else {
        auto ss = detail::solve_steady_state(params, u, bounds);
        // an out-of-box steady state cannot seed an in-box rollout; redraw
        if (ss && bounds.contains(pack_point(*ss, u))) {
          x = *ss;
          initialized = true;
        }
      }
    }
    if (!initialized)
      throw SteadyStateNotFound(
          "no in-box steady state found after bounded redraws");

    auto& out = rollouts[s];
    Eigen::VectorXd z = pack_point(x, u);
    if (!bounds.contains(z)) return;  // random initial point may sit on no-go corner
    out.push_back(z);
    for (int k = 1; k < cfg.n_step; ++k) {
      State x_next;
      try {
        x_next = step(params, x, u, cfg.dt);
      } catch (const Error&) {
        break;  // dynamics undefined; stop this rollout
      }
      ControlInput u_next = u;
      double* uf[3] = {&u_next.fxf, &u_next.fxr, &u_next.delta};
      for (int c = 0; c < 3; ++c) {
        double w = rng.uniform(-du[c], du[c]);
        *uf[c] = std::clamp(*uf[c] + w, bounds.lower[3 + c], bounds.upper[3 + c]);
      }
      x = x_next;
      u = u_next;
      z = pack_point(x, u);
      if (!bounds.contains(z)) break;
      out.push_back(z);
    }
  });

  std::size_t total = 0;
  for (const auto& ro : rollouts) total += ro.size();
  Grid g;
  g.kind = kind;
  g.seed = cfg.seed;
  g.points.resize(static_cast<Eigen::Index>(total), bounds.dim());
  Eigen::Index row = 0;
  for (const auto& ro : rollouts)
    for (const auto& z : ro) g.points.row(row++) = z.transpose();
  std::ostringstream meta;
  meta << "n_sim=" << cfg.n_sim << ";n_step=" << cfg.n_step << ";dt=" << cfg.dt;
  g.meta = meta.str();
  g.reserve_labels();
  // per-point rollout provenance
  std::size_t at = 0;
  for (std::size_t s = 0; s < rollouts.size(); ++s)
    for (std::size_t k = 0; k < rollouts[s].size(); ++k) g.point_seed[at++] = rollout_seed[s];
  return g;
}

// Rejection-samples n_rand points from the box with |G| <= eps_b. Workers
// draw fixed-size batches from per-batch seed streams; accepted points are
// consumed in batch order, so the result is worker-count independent.
inline Grid boundary_grid(const VehicleParams& params, const Bounds& bounds,
                          std::size_t n_rand, double eps_b, std::uint64_t seed,
                          int workers = 0) {
  if (!(eps_b > 0.0)) throw Error("boundary grid needs eps_b > 0");
  if (n_rand < 1) throw Error("boundary grid needs n_rand >= 1");
  const int d = bounds.dim();
  const std::size_t batch_size = 4096;
  const std::size_t stall_window = 1'000'000;

  std::vector<Eigen::VectorXd> accepted;
  std::vector<double> g_acc;
  accepted.reserve(n_rand);
  std::size_t rejected_run = 0;
  std::uint64_t batch_idx = 0;

  while (accepted.size() < n_rand) {
    const int n_batches = std::max(1, resolve_workers(workers));
    std::vector<std::vector<std::pair<Eigen::VectorXd, double>>> found(
        static_cast<std::size_t>(n_batches));
    parallel_for(static_cast<std::size_t>(n_batches), workers, [&](std::size_t b) {
      Rng rng(derive_seed(seed, 0x4242, batch_idx + b));
      auto& out = found[b];
      Eigen::VectorXd z(d);
      for (std::size_t i = 0; i < batch_size; ++i) {
        for (int c = 0; c < d; ++c)
          z[c] = rng.uniform(bounds.lower[c], bounds.upper[c]);
        double g;
        try {
          g = constraint_value(params, z);
        } catch (const Error&) {
          continue;
        }
        if (std::abs(g) <= eps_b) out.emplace_back(z, g);
      }
    });
    batch_idx += static_cast<std::uint64_t>(n_batches);
    std::size_t got = 0;
    for (const auto& out : found) {
      got += out.size();
      for (const auto& [z, g] : out) {
        if (accepted.size() >= n_rand) break;
        accepted.push_back(z);
        g_acc.push_back(g);
      }
    }
    if (got == 0) {
      rejected_run += batch_size * static_cast<std::size_t>(n_batches);
      if (rejected_run >= stall_window)
        throw RejectionStalled("boundary grid acceptance rate below 1e-5");
    } else {
      rejected_run = 0;
    }
  }

  Grid g;
  g.kind = 'B';
  g.seed = seed;
  g.points.resize(static_cast<Eigen::Index>(n_rand), d);
  g.reserve_labels();
  for (std::size_t i = 0; i < n_rand; ++i) {
    g.points.row(static_cast<Eigen::Index>(i)) = accepted[i].transpose();
    g.g_value[static_cast<Eigen::Index>(i)] = g_acc[i];
    g.feasible[i] = g_acc[i] <= 0.0 ? 1 : 0;
  }
  std::ostringstream meta;
  meta << "n_rand=" << n_rand << ";eps_b=" << eps_b;
  g.meta = meta.str();
  return g;
}

// Rejection-samples uniform points until n_points feasible ones are found.
// Same deterministic batching scheme as the boundary grid.
inline Grid feasible_random_grid(const VehicleParams& params, const Bounds& bounds,
                                 std::size_t n_points, std::uint64_t seed,
                                 int workers = 0) {
  if (n_points < 1) throw Error("feasible random grid needs n >= 1");
  const int d = bounds.dim();
  const std::size_t batch_size = 2048;
  const std::size_t stall_window = 1'000'000;

  std::vector<Eigen::VectorXd> accepted;
  std::vector<double> g_acc;
  accepted.reserve(n_points);
  std::size_t rejected_run = 0;
  std::uint64_t batch_idx = 0;
  while (accepted.size() < n_points) {
    const int n_batches = std::max(1, resolve_workers(workers));
    std::vector<std::vector<std::pair<Eigen::VectorXd, double>>> found(
        static_cast<std::size_t>(n_batches));
    parallel_for(static_cast<std::size_t>(n_batches), workers, [&](std::size_t b) {
      Rng rng(derive_seed(seed, 0x4643, batch_idx + b));
      Eigen::VectorXd z(d);
      for (std::size_t i = 0; i < batch_size; ++i) {
        for (int c = 0; c < d; ++c)
          z[c] = rng.uniform(bounds.lower[c], bounds.upper[c]);
        try {
          double g = constraint_value(params, z);
          if (g <= 0.0 && is_feasible(params, z, bounds))
            found[b].emplace_back(z, g);
        } catch (const Error&) {
        }
      }
    });
    batch_idx += static_cast<std::uint64_t>(n_batches);
    std::size_t got = 0;
    for (const auto& out : found) {
      got += out.size();
      for (const auto& [z, g] : out) {
        if (accepted.size() >= n_points) break;
        accepted.push_back(z);
        g_acc.push_back(g);
      }
    }
    if (got == 0) {
      rejected_run += batch_size * static_cast<std::size_t>(n_batches);
      if (rejected_run >= stall_window)
        throw RejectionStalled("feasible sampling acceptance rate below 1e-5");
    } else {
      rejected_run = 0;
    }
  }

  Grid g;
  g.kind = 'R';
  g.seed = seed;
  g.points.resize(static_cast<Eigen::Index>(n_points), d);
  g.reserve_labels();
  for (std::size_t i = 0; i < n_points; ++i) {
    g.points.row(static_cast<Eigen::Index>(i)) = accepted[i].transpose();
    g.g_value[static_cast<Eigen::Index>(i)] = g_acc[i];
    g.feasible[i] = 1;
  }
  std::ostringstream meta;
  meta << "n_rand=" << n_points << ";feasible_only=1";
  g.meta = meta.str();
  return g;
}

// Keeps feasible points only and reports the survival ratio in the metadata.
inline Grid filter_feasible(const Grid& grid, const VehicleParams& params,
                            const Bounds& bounds, int workers = 0) {
  Grid labeled = grid;
  // NaN marks an unlabeled point (+inf is a legitimate "undefined tire
  // state" label)
  if (!labeled.has_labels() || labeled.g_value.hasNaN())
    annotate_constraints(labeled, params, bounds, workers);
  Grid out = labeled.select(labeled.feasible);
  if (out.size() == 0) throw EmptyResult("no feasible points survive the filter");
  std::ostringstream meta;
  meta << labeled.meta << ";survival="
       << static_cast<double>(out.size()) / static_cast<double>(grid.size());
  out.meta = meta.str();
  return out;
}

// Greedy pass in point order: a point is kept only if its normalized
// Euclidean distance to every kept point exceeds the radius. Radius zero is
// the identity. A uniform hash grid with cell size = radius keeps the scan
// near-linear.
inline Grid deduplicate(const Grid& grid, const Bounds& bounds, double radius) {
  if (radius < 0.0) throw Error("dedup radius must be >= 0");
  if (radius == 0.0 || grid.size() <= 1) return grid;
  const int d = grid.dim();
  const double r2 = radius * radius;

  Eigen::MatrixXd zn(grid.points.rows(), d);
  for (std::size_t i = 0; i < grid.size(); ++i)
    zn.row(static_cast<Eigen::Index>(i)) =
        bounds.normalize(grid.point(i)).transpose();

  auto cell_of = [&](const Eigen::VectorXd& p) {
    std::vector<std::int64_t> c(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k)
      c[static_cast<std::size_t>(k)] =
          static_cast<std::int64_t>(std::floor(p[k] / radius));
    return c;
  };
  auto hash_cell = [](const std::vector<std::int64_t>& c) {
    std::uint64_t h = 1469598103934665603ULL;
    for (auto k : c)
      h ^= static_cast<std::uint64_t>(k) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  };

  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells;
  std::vector<std::uint8_t> keep(grid.size(), 0);

  for (std::size_t i = 0; i < grid.size(); ++i) {
    Eigen::VectorXd p = zn.row(static_cast<Eigen::Index>(i)).transpose();
    auto base = cell_of(p);
    bool ok = true;
    // visit all 3^d neighbor cells
    std::vector<int> off(static_cast<std::size_t>(d), -1);
    for (bool done = false; !done && ok;) {
      auto cell = base;
      for (int c = 0; c < d; ++c) cell[static_cast<std::size_t>(c)] += off[static_cast<std::size_t>(c)];
      auto it = cells.find(hash_cell(cell));
      if (it != cells.end()) {
        for (std::size_t j : it->second) {
          if ((zn.row(static_cast<Eigen::Index>(j)).transpose() - p).squaredNorm() <= r2) {
            ok = false;
            break;
          }
        }
      }
      done = true;
      for (int c = 0; c < d && done; ++c) {
        if (++off[static_cast<std::size_t>(c)] <= 1) {
          done = false;
        } else {
          off[static_cast<std::size_t>(c)] = -1;
        }
      }
    }
    if (ok) {
      keep[i] = 1;
      cells[hash_cell(base)].push_back(i);
    }
  }
  Grid out = grid.select(keep);
  out.meta = grid.meta;
  return out;
}

}  // namespace hybkit
