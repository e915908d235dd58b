#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "hybkit/errors.hpp"
#include "hybkit/grid.hpp"
#include "hybkit/mmps.hpp"
#include "hybkit/optim.hpp"
#include "hybkit/regions.hpp"
#include "hybkit/vehicle.hpp"

namespace hybkit {

// ---- model fitting ----------------------------------------------------------

struct ModelFitSpec {
  int component = 0;  // 0: dv_x, 1: dv_y, 2: dr
  int p_plus = 1;
  int p_minus = 1;
  double gamma_m = 1e-6;  // 1-norm regularization weight
  double eps_0 = 0.0;     // residual floor; 0 = 1% of the peak |target|
  double dt = 0.01;       // discretization step for the delta targets
  std::string training_grid_id;
  MultiStartConfig multistart;
};

// Least-squares formulation of one component fit over normalized
// coordinates. Data residuals are (target - f) / (|target| + eps0); the
// 1-norm penalty enters as one residual sqrt(gamma_m)*sqrt(|theta_j|) per
// parameter so that the summed squares reproduce gamma_m*||theta||_1.
class ModelFitProblem {
 public:
  ModelFitProblem(Eigen::MatrixXd zn, Eigen::VectorXd target, int n, int m,
                  int p_plus, int p_minus, double gamma_m, double eps_0)
      : zn_(std::move(zn)),
        target_(std::move(target)),
        n_(n),
        m_(m),
        p_plus_(p_plus),
        p_minus_(p_minus),
        gamma_m_(gamma_m) {
    if (p_plus_ < 1 || p_minus_ < 1)
      throw Error("model fit needs at least one term per max");
    if (!(eps_0 >= 0.0)) throw Error("eps_0 must be non-negative");
    eps0_ = eps_0 > 0.0
                ? eps_0
                : 0.01 * std::max(1e-12, target_.cwiseAbs().maxCoeff());
    denom_ = target_.cwiseAbs().array() + eps0_;
  }

  int dim() const { return (p_plus_ + p_minus_) * (n_ + m_ + 1); }
  int n_points() const { return static_cast<int>(zn_.rows()); }
  double eps0() const { return eps0_; }

  // evaluates f and the active pair at one point from the flat parameters
  double eval_point(const Eigen::VectorXd& theta, Eigen::Index i, int* act_p = nullptr,
                    int* act_q = nullptr) const {
    const int d = n_ + m_;
    const int stride = d + 1;
    auto term = [&](int t) {
      double v = theta[t * stride + d];
      for (int c = 0; c < d; ++c) v += theta[t * stride + c] * zn_(i, c);
      return v;
    };
    int pi = 0, qi = 0;
    double bp = term(0);
    for (int t = 1; t < p_plus_; ++t) {
      double v = term(t);
      if (v > bp) {
        bp = v;
        pi = t;
      }
    }
    double bq = term(p_plus_);
    for (int t = 1; t < p_minus_; ++t) {
      double v = term(p_plus_ + t);
      if (v > bq) {
        bq = v;
        qi = t;
      }
    }
    if (act_p) *act_p = pi;
    if (act_q) *act_q = qi;
    return bp - bq;
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& theta) const {
    const Eigen::Index n_pts = zn_.rows();
    const bool penalized = gamma_m_ > 0.0;
    Eigen::VectorXd r(n_pts + (penalized ? dim() : 0));
    for (Eigen::Index i = 0; i < n_pts; ++i)
      r[i] = (target_[i] - eval_point(theta, i)) / denom_[i];
    if (penalized) {
      const double sg = std::sqrt(gamma_m_);
      for (int j = 0; j < dim(); ++j)
        r[n_pts + j] = sg * std::sqrt(std::abs(theta[j]));
    }
    return r;
  }

  Eigen::SparseMatrix<double> jacobian(const Eigen::VectorXd& theta) const {
    const Eigen::Index n_pts = zn_.rows();
    const int d = n_ + m_;
    const int stride = d + 1;
    const bool penalized = gamma_m_ > 0.0;
    Eigen::SparseMatrix<double> jac(n_pts + (penalized ? dim() : 0), dim());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n_pts) * 2 * static_cast<std::size_t>(stride) +
                 static_cast<std::size_t>(penalized ? dim() : 0));
    for (Eigen::Index i = 0; i < n_pts; ++i) {
      int pi, qi;
      (void)eval_point(theta, i, &pi, &qi);
      const double s = 1.0 / denom_[i];
      const int off_p = pi * stride;
      const int off_q = (p_plus_ + qi) * stride;
      for (int c = 0; c < d; ++c) {
        trip.emplace_back(i, off_p + c, -zn_(i, c) * s);
        trip.emplace_back(i, off_q + c, zn_(i, c) * s);
      }
      trip.emplace_back(i, off_p + d, -s);
      trip.emplace_back(i, off_q + d, s);
    }
    if (penalized) {
      const double sg = std::sqrt(gamma_m_);
      for (int j = 0; j < dim(); ++j) {
        double a = std::abs(theta[j]);
        if (a > 0.0)
          trip.emplace_back(n_pts + j, j,
                            sg * (theta[j] > 0 ? 1.0 : -1.0) /
                                (2.0 * std::sqrt(std::max(a, 1e-12))));
        // subgradient 0 at theta_j = 0
      }
    }
    jac.setFromTriplets(trip.begin(), trip.end());
    return jac;
  }

  // mean relative error, penalty excluded
  double training_error(const Eigen::VectorXd& theta) const {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < zn_.rows(); ++i)
      acc += std::abs(target_[i] - eval_point(theta, i)) / denom_[i];
    return acc / static_cast<double>(zn_.rows());
  }

  LsqProblem as_lsq() const {
    LsqProblem p;
    p.dim = dim();
    p.residual = [this](const Eigen::VectorXd& t) { return residual(t); };
    p.jacobian = [this](const Eigen::VectorXd& t) { return jacobian(t); };
    return p;
  }

 private:
  Eigen::MatrixXd zn_;
  Eigen::VectorXd target_;
  Eigen::VectorXd denom_;
  int n_, m_, p_plus_, p_minus_;
  double gamma_m_, eps0_ = 0.0;
};

// step targets dx = dt * F(x, u) for one component over a feasible grid
inline Eigen::VectorXd model_targets(const Grid& grid, const VehicleParams& params,
                                     double dt, int component) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Eigen::VectorXd z = grid.point(i);
    StateDerivative d = dynamics(params, unpack_state(z), unpack_input(z));
    const double v = component == 0 ? d.vx_dot : component == 1 ? d.vy_dot : d.r_dot;
    t[static_cast<Eigen::Index>(i)] = dt * v;
  }
  return t;
}

inline Eigen::MatrixXd normalized_points(const Grid& grid, const Bounds& bounds) {
  Eigen::MatrixXd zn(grid.points.rows(), grid.points.cols());
  for (Eigen::Index i = 0; i < grid.points.rows(); ++i)
    zn.row(i) = bounds.normalize(grid.points.row(i).transpose()).transpose();
  return zn;
}

struct ModelFitResult {
  MmpsFunction f;              // over raw coordinates
  Eigen::VectorXd theta;       // normalized-space parameters (warm-start seed)
  double training_error = 0.0;
  double cost = 0.0;
  double eps0 = 0.0;
  MultiStartResult multistart;
};

inline ModelFitResult fit_model(const ModelFitSpec& spec, const Grid& grid,
                                const VehicleParams& params, const Bounds& bounds,
                                int n_state, int n_input,
                                const std::vector<Eigen::VectorXd>& warm_starts = {}) {
  if (grid.size() == 0) throw EmptyResult("model fit needs a nonempty grid");
  ModelFitProblem problem(normalized_points(grid, bounds),
                          model_targets(grid, params, spec.dt, spec.component),
                          n_state, n_input, spec.p_plus, spec.p_minus,
                          spec.gamma_m, spec.eps_0);
  MultiStartResult ms = multi_start_lsq(problem.as_lsq(), spec.multistart, warm_starts);
  ModelFitResult out;
  out.theta = ms.best.x;
  out.cost = ms.best.cost;
  out.eps0 = problem.eps0();
  out.training_error = problem.training_error(ms.best.x);
  out.f = rescale_to_raw(MmpsFunction::unflatten(ms.best.x, spec.p_plus,
                                                 spec.p_minus, n_state, n_input),
                         bounds);
  out.multistart = std::move(ms);
  return out;
}

// Pads a previously fitted function to a larger term count: new terms are
// near-duplicates of the last term (1e-6 noise breaks the argmax ties), so
// the padded function evaluates like the original and a sweep can reuse it
// as a warm start.
inline MmpsFunction nested_warm_start(const MmpsFunction& prev, int p_plus,
                                      int p_minus, std::uint64_t seed = 0) {
  if (p_plus < prev.p_plus() || p_minus < prev.p_minus())
    throw SizeShrink("warm start cannot shrink the term counts");
  Rng rng(derive_seed(seed, 0x7761));
  auto pad = [&](std::vector<AffineTerm> terms, int count) {
    while (static_cast<int>(terms.size()) < count) {
      AffineTerm t = terms.back();
      for (Eigen::Index c = 0; c < t.a.size(); ++c) t.a[c] += rng.uniform(-1e-6, 1e-6);
      for (Eigen::Index c = 0; c < t.b.size(); ++c) t.b[c] += rng.uniform(-1e-6, 1e-6);
      t.h += rng.uniform(-1e-6, 1e-6);
      terms.push_back(std::move(t));
    }
    return terms;
  };
  MmpsFunction out;
  out.plus = pad(prev.plus, p_plus);
  out.minus = pad(prev.minus, p_minus);
  return out;
}

// ---- constraint fitting -----------------------------------------------------

enum class RegionFamily { Mmps, Ellipsoid, Cone };
enum class FitApproach { Region, Boundary };

inline const char* to_string(RegionFamily f) {
  switch (f) {
    case RegionFamily::Mmps: return "mmps";
    case RegionFamily::Ellipsoid: return "ellipsoid";
    default: return "cone";
  }
}
inline const char* to_string(FitApproach a) {
  return a == FitApproach::Region ? "region" : "boundary";
}

struct ConstraintFitSpec {
  RegionFamily family = RegionFamily::Mmps;
  FitApproach approach = FitApproach::Boundary;
  int p_plus = 1;
  int p_minus = 1;
  int n_e = 1;
  int n_c = 1;
  double gamma_c = 0.4;
  double eps_0 = 1e-3;
  std::string training_grid_id;
  MultiStartConfig multistart;  // boundary approach
  PsoOptions pso;               // region approach
  int pso_runs = 3;

  void validate() const {
    if (family == RegionFamily::Cone && approach != FitApproach::Boundary)
      throw Error("the cone family is a boundary-based baseline only");
    if (p_plus < 1 || p_minus < 1 || n_e < 1 || n_c < 1)
      throw Error("constraint fit complexity must be >= 1");
    if (gamma_c < 0.0 || gamma_c > 1.0) throw Error("gamma_c must be in [0,1]");
  }
};

namespace detail {

// parameter packing for ellipsoid unions: per member the center followed by
// the lower triangle of L in column-major order
struct EllipsoidCoder {
  int d;
  int n_e;

  int tril() const { return d * (d + 1) / 2; }
  int per_member() const { return d + tril(); }
  int dim() const { return n_e * per_member(); }

  EllipsoidUnion unpack(const Eigen::VectorXd& theta) const {
    EllipsoidUnion u;
    for (int e = 0; e < n_e; ++e) {
      const int off = e * per_member();
      Ellipsoid el;
      el.center = theta.segment(off, d);
      el.chol = Eigen::MatrixXd::Zero(d, d);
      int at = off + d;
      for (int c = 0; c < d; ++c)
        for (int r = c; r < d; ++r) el.chol(r, c) = theta[at++];
      // canonicalize: Q = LL' is invariant under column sign flips, and a
      // zero diagonal is nudged to keep Q positive definite
      for (int c = 0; c < d; ++c) {
        if (el.chol(c, c) < 0.0) el.chol.col(c) = -el.chol.col(c);
        if (el.chol(c, c) < 1e-12) el.chol(c, c) = 1e-12;
      }
      u.members.push_back(std::move(el));
    }
    return u;
  }

  Eigen::VectorXd pack(const EllipsoidUnion& u) const {
    Eigen::VectorXd theta(dim());
    for (int e = 0; e < n_e; ++e) {
      const int off = e * per_member();
      theta.segment(off, d) = u.members[static_cast<std::size_t>(e)].center;
      int at = off + d;
      for (int c = 0; c < d; ++c)
        for (int r = c; r < d; ++r)
          theta[at++] = u.members[static_cast<std::size_t>(e)].chol(r, c);
    }
    return theta;
  }
};

// parameter packing for cone sets: per cone P (row-major), vertex, q, offset
struct ConeCoder {
  int d;
  int n_c;

  int per_cone() const { return d * d + 2 * d + 1; }
  int dim() const { return n_c * per_cone(); }

  ConeSet unpack(const Eigen::VectorXd& theta) const {
    ConeSet cs;
    for (int c = 0; c < n_c; ++c) {
      const int off = c * per_cone();
      Cone cone;
      cone.p = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                              Eigen::RowMajor>>(
          theta.data() + off, d, d);
      cone.vertex = theta.segment(off + d * d, d);
      cone.q = theta.segment(off + d * d + d, d);
      cone.r = theta[off + d * d + 2 * d];
      cs.cones.push_back(std::move(cone));
    }
    return cs;
  }

  Eigen::VectorXd pack(const ConeSet& cs) const {
    Eigen::VectorXd theta(dim());
    for (int c = 0; c < n_c; ++c) {
      const int off = c * per_cone();
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          theta.data() + off, d, d) = cs.cones[static_cast<std::size_t>(c)].p;
      theta.segment(off + d * d, d) = cs.cones[static_cast<std::size_t>(c)].vertex;
      theta.segment(off + d * d + d, d) = cs.cones[static_cast<std::size_t>(c)].q;
      theta[off + d * d + 2 * d] = cs.cones[static_cast<std::size_t>(c)].r;
    }
    return theta;
  }
};

}  // namespace detail

// converts a region fitted over normalized coordinates to raw coordinates
inline Region region_to_raw(const Region& region, const Bounds& bounds) {
  const Eigen::VectorXd range = bounds.range();
  if (const auto* mm = std::get_if<MmpsRegion>(&region))
    return MmpsRegion{rescale_to_raw(mm->boundary, bounds)};
  if (const auto* eu = std::get_if<EllipsoidUnion>(&region)) {
    EllipsoidUnion out;
    for (const auto& e : eu->members) {
      Ellipsoid raw;
      raw.center = bounds.denormalize(e.center);
      raw.chol = e.chol;
      for (Eigen::Index i = 0; i < raw.chol.rows(); ++i)
        raw.chol.row(i) /= range[i];
      out.members.push_back(std::move(raw));
    }
    return out;
  }
  const auto& cs = std::get<ConeSet>(region);
  ConeSet out;
  for (const auto& c : cs.cones) {
    Cone raw;
    raw.p = c.p;
    for (Eigen::Index j = 0; j < raw.p.cols(); ++j) raw.p.col(j) /= range[j];
    raw.vertex = bounds.denormalize(c.vertex);
    raw.q = c.q.cwiseQuotient(range);
    raw.r = c.r - c.q.dot(bounds.lower.cwiseQuotient(range));
    out.cones.push_back(std::move(raw));
  }
  return out;
}

// Boundary-approach least squares: residuals (G_i - g(z_i)) / (|G_i| + eps0)
// over the labeled points with finite G.
class BoundaryFitProblem {
 public:
  BoundaryFitProblem(const Grid& grid, const Bounds& bounds,
                     const ConstraintFitSpec& spec, int n_state, int n_input)
      : spec_(spec), n_(n_state), m_(n_input), d_(n_state + n_input) {
    Eigen::MatrixXd zn = normalized_points(grid, bounds);
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < zn.rows(); ++i)
      if (std::isfinite(grid.g_value[i])) rows.push_back(i);
    if (rows.empty()) throw DegenerateGrid("no finite constraint labels");
    zn_.resize(static_cast<Eigen::Index>(rows.size()), d_);
    g_.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      zn_.row(static_cast<Eigen::Index>(k)) = zn.row(rows[k]);
      g_[static_cast<Eigen::Index>(k)] = grid.g_value[rows[k]];
    }
    denom_ = g_.cwiseAbs().array() + spec.eps_0;
  }

  int dim() const {
    switch (spec_.family) {
      case RegionFamily::Mmps:
        return (spec_.p_plus + spec_.p_minus) * (d_ + 1);
      case RegionFamily::Ellipsoid:
        return detail::EllipsoidCoder{d_, spec_.n_e}.dim();
      default:
        return detail::ConeCoder{d_, spec_.n_c}.dim();
    }
  }

  const Eigen::MatrixXd& points() const { return zn_; }
  const Eigen::VectorXd& labels() const { return g_; }

  Region region_normalized(const Eigen::VectorXd& theta) const {
    switch (spec_.family) {
      case RegionFamily::Mmps:
        return MmpsRegion{MmpsFunction::unflatten(theta, spec_.p_plus,
                                                  spec_.p_minus, n_, m_)};
      case RegionFamily::Ellipsoid:
        return detail::EllipsoidCoder{d_, spec_.n_e}.unpack(theta);
      default:
        return detail::ConeCoder{d_, spec_.n_c}.unpack(theta);
    }
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& theta) const {
    Region reg = region_normalized(theta);
    Eigen::VectorXd r(zn_.rows());
    for (Eigen::Index i = 0; i < zn_.rows(); ++i)
      r[i] = (g_[i] - region_boundary_value(reg, zn_.row(i).transpose())) / denom_[i];
    return r;
  }

  Eigen::SparseMatrix<double> jacobian(const Eigen::VectorXd& theta) const {
    std::vector<Eigen::Triplet<double>> trip;
    switch (spec_.family) {
      case RegionFamily::Mmps:
        jacobian_mmps(theta, trip);
        break;
      case RegionFamily::Ellipsoid:
        jacobian_ellipsoid(theta, trip);
        break;
      default:
        jacobian_cone(theta, trip);
        break;
    }
    Eigen::SparseMatrix<double> jac(zn_.rows(), dim());
    jac.setFromTriplets(trip.begin(), trip.end());
    return jac;
  }

  double boundary_error(const Eigen::VectorXd& theta) const {
    Region reg = region_normalized(theta);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < zn_.rows(); ++i)
      acc += std::abs(g_[i] - region_boundary_value(reg, zn_.row(i).transpose())) /
             denom_[i];
    return acc / static_cast<double>(zn_.rows());
  }

  LsqProblem as_lsq() const {
    LsqProblem p;
    p.dim = dim();
    p.residual = [this](const Eigen::VectorXd& t) { return residual(t); };
    p.jacobian = [this](const Eigen::VectorXd& t) { return jacobian(t); };
    return p;
  }

 private:
  void jacobian_mmps(const Eigen::VectorXd& theta,
                     std::vector<Eigen::Triplet<double>>& trip) const {
    MmpsFunction f = MmpsFunction::unflatten(theta, spec_.p_plus, spec_.p_minus,
                                             n_, m_);
    const int stride = d_ + 1;
    for (Eigen::Index i = 0; i < zn_.rows(); ++i) {
      Eigen::VectorXd z = zn_.row(i).transpose();
      auto [pi, qi] = f.active_indices(z);
      const double s = 1.0 / denom_[i];
      const int off_p = pi * stride;
      const int off_q = (spec_.p_plus + qi) * stride;
      for (int c = 0; c < d_; ++c) {
        trip.emplace_back(i, off_p + c, -z[c] * s);
        trip.emplace_back(i, off_q + c, z[c] * s);
      }
      trip.emplace_back(i, off_p + d_, -s);
      trip.emplace_back(i, off_q + d_, s);
    }
  }

  void jacobian_ellipsoid(const Eigen::VectorXd& theta,
                          std::vector<Eigen::Triplet<double>>& trip) const {
    detail::EllipsoidCoder coder{d_, spec_.n_e};
    EllipsoidUnion u = coder.unpack(theta);
    for (Eigen::Index i = 0; i < zn_.rows(); ++i) {
      Eigen::VectorXd z = zn_.row(i).transpose();
      int active = 0;
      double best = u.members[0].value(z);
      for (int e = 1; e < spec_.n_e; ++e) {
        double v = u.members[static_cast<std::size_t>(e)].value(z);
        if (v < best) {
          best = v;
          active = e;
        }
      }
      const auto& el = u.members[static_cast<std::size_t>(active)];
      const Eigen::VectorXd dvec = z - el.center;
      const Eigen::VectorXd w = el.chol.transpose() * dvec;  // L'd
      const Eigen::VectorXd dc = -2.0 * (el.chol * w);       // d val / d center
      const double s = -1.0 / denom_[i];  // residual = (g - val)/denom
      const int off = active * coder.per_member();
      for (int c = 0; c < d_; ++c) trip.emplace_back(i, off + c, s * dc[c]);
      int at = off + d_;
      for (int c = 0; c < d_; ++c)
        for (int r = c; r < d_; ++r)
          trip.emplace_back(i, at++, s * 2.0 * dvec[r] * w[c]);
    }
  }

  void jacobian_cone(const Eigen::VectorXd& theta,
                     std::vector<Eigen::Triplet<double>>& trip) const {
    detail::ConeCoder coder{d_, spec_.n_c};
    ConeSet cs = coder.unpack(theta);
    for (Eigen::Index i = 0; i < zn_.rows(); ++i) {
      Eigen::VectorXd z = zn_.row(i).transpose();
      int active = 0;
      double best = cs.cones[0].value(z);
      for (int c = 1; c < spec_.n_c; ++c) {
        double v = cs.cones[static_cast<std::size_t>(c)].value(z);
        if (v > best) {
          best = v;
          active = c;
        }
      }
      const auto& cone = cs.cones[static_cast<std::size_t>(active)];
      const Eigen::VectorXd dvec = z - cone.vertex;
      const Eigen::VectorXd v = cone.p * dvec;
      const double nv = std::max(v.norm(), 1e-12);
      const double s = -1.0 / denom_[i];
      const int off = active * coder.per_cone();
      for (int a = 0; a < d_; ++a)
        for (int b = 0; b < d_; ++b)
          trip.emplace_back(i, off + a * d_ + b, s * v[a] * dvec[b] / nv);
      const Eigen::VectorXd dz0 = -(cone.p.transpose() * v) / nv;
      for (int c = 0; c < d_; ++c) {
        trip.emplace_back(i, off + d_ * d_ + c, s * dz0[c]);
        trip.emplace_back(i, off + d_ * d_ + d_ + c, s * -z[c]);
      }
      trip.emplace_back(i, off + d_ * d_ + 2 * d_, s * -1.0);
    }
  }

  ConstraintFitSpec spec_;
  int n_, m_, d_;
  Eigen::MatrixXd zn_;
  Eigen::VectorXd g_;
  Eigen::VectorXd denom_;
};

// Region-approach objective: misclassification fractions evaluated over the
// normalized grid in one pass, suitable for the swarm optimizer.
class RegionFitObjective {
 public:
  RegionFitObjective(const Grid& grid, const Bounds& bounds,
                     const ConstraintFitSpec& spec, int n_state, int n_input)
      : spec_(spec), n_(n_state), m_(n_input), d_(n_state + n_input) {
    zn_ = normalized_points(grid, bounds);
    feasible_ = grid.feasible;
    n_feas_ = 0;
    for (auto f : feasible_) n_feas_ += (f != 0);
    n_infeas_ = feasible_.size() - n_feas_;
    if (n_feas_ == 0 || n_infeas_ == 0)
      throw DegenerateGrid("region fitting needs both classes on the grid");
  }

  Misclassification misclassification(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd vals = boundary_values(theta);
    std::size_t missed = 0, covered = 0;
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
      bool inside = vals[i] <= 0.0;
      if (feasible_[static_cast<std::size_t>(i)]) {
        missed += !inside;
      } else {
        covered += inside;
      }
    }
    return {static_cast<double>(missed) / static_cast<double>(n_feas_),
            static_cast<double>(covered) / static_cast<double>(n_infeas_)};
  }

  double operator()(const Eigen::VectorXd& theta) const {
    Misclassification mis = misclassification(theta);
    return spec_.gamma_c * mis.inclusion + (1.0 - spec_.gamma_c) * mis.violation;
  }

  int dim() const {
    return spec_.family == RegionFamily::Mmps
               ? (spec_.p_plus + spec_.p_minus) * (d_ + 1)
               : detail::EllipsoidCoder{d_, spec_.n_e}.dim();
  }

  Region region_normalized(const Eigen::VectorXd& theta) const {
    if (spec_.family == RegionFamily::Mmps)
      return MmpsRegion{MmpsFunction::unflatten(theta, spec_.p_plus,
                                                spec_.p_minus, n_, m_)};
    return detail::EllipsoidCoder{d_, spec_.n_e}.unpack(theta);
  }

  // parameter box for the swarm: centers stay inside the unit box, Cholesky
  // diagonals in [1e-2, 1e2], everything else in [-10, 10]
  void parameter_box(Eigen::VectorXd& lower, Eigen::VectorXd& upper) const {
    lower = Eigen::VectorXd::Constant(dim(), -10.0);
    upper = Eigen::VectorXd::Constant(dim(), 10.0);
    if (spec_.family == RegionFamily::Ellipsoid) {
      detail::EllipsoidCoder coder{d_, spec_.n_e};
      for (int e = 0; e < spec_.n_e; ++e) {
        const int off = e * coder.per_member();
        for (int c = 0; c < d_; ++c) {
          lower[off + c] = 0.0;
          upper[off + c] = 1.0;
        }
        int at = off + d_;
        for (int c = 0; c < d_; ++c)
          for (int r = c; r < d_; ++r) {
            if (r == c) {
              lower[at] = 1e-2;
              upper[at] = 1e2;
            }
            ++at;
          }
      }
    }
  }

 private:
  Eigen::VectorXd boundary_values(const Eigen::VectorXd& theta) const {
    if (spec_.family == RegionFamily::Mmps) {
      const int stride = d_ + 1;
      Eigen::MatrixXd tp(d_ + 1, spec_.p_plus);
      Eigen::MatrixXd tm(d_ + 1, spec_.p_minus);
      for (int t = 0; t < spec_.p_plus; ++t)
        tp.col(t) = theta.segment(t * stride, stride);
      for (int t = 0; t < spec_.p_minus; ++t)
        tm.col(t) = theta.segment((spec_.p_plus + t) * stride, stride);
      Eigen::MatrixXd vp = zn_ * tp.topRows(d_);
      vp.rowwise() += tp.row(d_);
      Eigen::MatrixXd vm = zn_ * tm.topRows(d_);
      vm.rowwise() += tm.row(d_);
      return vp.rowwise().maxCoeff() - vm.rowwise().maxCoeff();
    }
    detail::EllipsoidCoder coder{d_, spec_.n_e};
    EllipsoidUnion u = coder.unpack(theta);
    Eigen::VectorXd best =
        Eigen::VectorXd::Constant(zn_.rows(), std::numeric_limits<double>::infinity());
    for (const auto& el : u.members) {
      Eigen::MatrixXd dmat = zn_.rowwise() - el.center.transpose();
      Eigen::VectorXd v = (dmat * el.chol).rowwise().squaredNorm();
      v.array() -= 1.0;
      best = best.cwiseMin(v);
    }
    return best;
  }

  ConstraintFitSpec spec_;
  int n_, m_, d_;
  Eigen::MatrixXd zn_;
  std::vector<std::uint8_t> feasible_;
  std::size_t n_feas_ = 0, n_infeas_ = 0;
};

struct ConstraintFitResult {
  Region region;          // over raw coordinates
  Eigen::VectorXd theta;  // normalized parameters (warm-start seed)
  Misclassification train;
  double boundary_error = std::numeric_limits<double>::quiet_NaN();
  double cost = 0.0;
  std::vector<StartLogEntry> log;
};

namespace detail {

// structured random starts; generic uniform parameter draws rarely describe
// a useful ellipsoid or cone, so seed members around the unit box instead
inline std::vector<Eigen::VectorXd> structured_starts(const ConstraintFitSpec& spec,
                                                      int d, int count) {
  std::vector<Eigen::VectorXd> starts;
  if (spec.family == RegionFamily::Mmps) return starts;
  for (int s = 0; s < count; ++s) {
    Rng rng(derive_seed(spec.multistart.seed, 0xC0DE, static_cast<std::uint64_t>(s)));
    if (spec.family == RegionFamily::Ellipsoid) {
      EllipsoidCoder coder{d, spec.n_e};
      EllipsoidUnion u;
      for (int e = 0; e < spec.n_e; ++e) {
        Ellipsoid el;
        el.center.resize(d);
        for (int c = 0; c < d; ++c) el.center[c] = rng.uniform(0.15, 0.85);
        el.chol = Eigen::MatrixXd::Zero(d, d);
        for (int c = 0; c < d; ++c) el.chol(c, c) = rng.uniform(1.0, 4.0);
        u.members.push_back(std::move(el));
      }
      starts.push_back(coder.pack(u));
    } else {
      ConeCoder coder{d, spec.n_c};
      ConeSet cs;
      for (int c = 0; c < spec.n_c; ++c) {
        Cone cone;
        cone.p = Eigen::MatrixXd::Zero(d, d);
        for (int k = 0; k < d; ++k) cone.p(k, k) = rng.uniform(0.5, 2.0);
        cone.vertex.resize(d);
        for (int k = 0; k < d; ++k) cone.vertex[k] = rng.uniform(0.3, 0.7);
        cone.q = Eigen::VectorXd::Zero(d);
        cone.r = rng.uniform(0.5, 1.5);
        cs.cones.push_back(std::move(cone));
      }
      starts.push_back(coder.pack(cs));
    }
  }
  return starts;
}

}  // namespace detail

// Grows a previously fitted parameter vector to a larger complexity for the
// next rung of a sweep: duplicated last member/term with small perturbation.
inline std::vector<Eigen::VectorXd> grow_warm_start(
    const ConstraintFitSpec& base, const Eigen::VectorXd& prev_theta,
    std::pair<int, int> prev_cx, std::pair<int, int> new_cx, int n_state,
    int n_input) {
  const int d = n_state + n_input;
  Rng rng(derive_seed(base.multistart.seed, 0x6777));
  if (base.family == RegionFamily::Mmps) {
    if (new_cx.first < prev_cx.first || new_cx.second < prev_cx.second) return {};
    MmpsFunction prev = MmpsFunction::unflatten(prev_theta, prev_cx.first,
                                                prev_cx.second, n_state, n_input);
    return {nested_warm_start(prev, new_cx.first, new_cx.second,
                              base.multistart.seed)
                .flatten()};
  }
  if (new_cx.first < prev_cx.first) return {};
  const int per = base.family == RegionFamily::Ellipsoid
                      ? detail::EllipsoidCoder{d, 1}.per_member()
                      : detail::ConeCoder{d, 1}.per_cone();
  Eigen::VectorXd theta(new_cx.first * per);
  theta.head(prev_theta.size()) = prev_theta;
  for (int e = prev_cx.first; e < new_cx.first; ++e) {
    Eigen::VectorXd dup = prev_theta.tail(per);
    for (Eigen::Index k = 0; k < dup.size(); ++k) dup[k] += rng.uniform(-1e-3, 1e-3);
    theta.segment(e * per, per) = dup;
  }
  return {theta};
}

inline ConstraintFitResult fit_constraint(
    const ConstraintFitSpec& spec, const Grid& grid, const Bounds& bounds,
    int n_state, int n_input,
    const std::vector<Eigen::VectorXd>& warm_starts = {}) {
  spec.validate();
  const int d = n_state + n_input;
  ConstraintFitResult out;

  if (spec.approach == FitApproach::Boundary) {
    BoundaryFitProblem problem(grid, bounds, spec, n_state, n_input);
    std::vector<Eigen::VectorXd> starts = warm_starts;
    const int structured = spec.family == RegionFamily::Mmps ? 0 : spec.multistart.n_starts;
    for (auto& s : detail::structured_starts(spec, d, structured))
      starts.push_back(std::move(s));
    MultiStartConfig cfg = spec.multistart;
    if (spec.family != RegionFamily::Mmps)
      cfg.n_starts = std::max(1, cfg.n_starts / 4);  // plus the structured ones
    MultiStartResult ms = multi_start_lsq(problem.as_lsq(), cfg, starts);
    out.theta = ms.best.x;
    out.cost = ms.best.cost;
    out.boundary_error = problem.boundary_error(ms.best.x);
    out.log = std::move(ms.log);
    Region reg_n = problem.region_normalized(out.theta);
    RegionFitObjective metric(grid, bounds, spec, n_state, n_input);
    out.train = metric.misclassification(out.theta);
    out.region = region_to_raw(reg_n, bounds);
    return out;
  }

  RegionFitObjective objective(grid, bounds, spec, n_state, n_input);
  PsoProblem pso;
  pso.dim = objective.dim();
  pso.objective = [&objective](const Eigen::VectorXd& t) { return objective(t); };
  objective.parameter_box(pso.lower, pso.upper);

  PsoResult best;
  for (int run = 0; run < std::max(1, spec.pso_runs); ++run) {
    PsoOptions opt = spec.pso;
    opt.seed = derive_seed(spec.pso.seed, 0x9502, static_cast<std::uint64_t>(run));
    PsoResult r = solve_pso(pso, opt, run == 0 ? warm_starts : std::vector<Eigen::VectorXd>{});
    if (r.cost < best.cost) best = std::move(r);
  }
  out.theta = best.x;
  out.cost = best.cost;
  out.train = objective.misclassification(best.x);
  out.region = region_to_raw(objective.region_normalized(best.x), bounds);
  return out;
}

}  // namespace hybkit
