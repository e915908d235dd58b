#pragma once

#include <Eigen/Core>
#include <functional>
#include <variant>
#include <vector>

#include "hybkit/errors.hpp"
#include "hybkit/grid.hpp"
#include "hybkit/mmps.hpp"
#include "json.hpp"

namespace hybkit {

// Quadratic subregion (z - c)' Q (z - c) <= 1 with Q = L L', L lower
// triangular with positive diagonal.
struct Ellipsoid {
  Eigen::VectorXd center;
  Eigen::MatrixXd chol;  // lower triangular

  // negative inside, zero on the boundary
  double value(const Eigen::VectorXd& z) const {
    return (chol.transpose() * (z - center)).squaredNorm() - 1.0;
  }
};

struct EllipsoidUnion {
  std::vector<Ellipsoid> members;

  double value(const Eigen::VectorXd& z) const {
    double best = members.front().value(z);
    for (std::size_t i = 1; i < members.size(); ++i)
      best = std::min(best, members[i].value(z));
    return best;
  }
};

// Sublevel set of an MMPS boundary function.
struct MmpsRegion {
  MmpsFunction boundary;

  double value(const Eigen::VectorXd& z) const { return boundary.eval(z); }
};

// One second-order cone constraint ||P (z - z0)|| <= q'z + r.
struct Cone {
  Eigen::MatrixXd p;
  Eigen::VectorXd vertex;
  Eigen::VectorXd q;
  double r = 0.0;

  double value(const Eigen::VectorXd& z) const {
    return (p * (z - vertex)).norm() - q.dot(z) - r;
  }
};

// Convex intersection of cones; the region is convex by construction, which
// is exactly why it serves as the envelope baseline.
struct ConeSet {
  std::vector<Cone> cones;

  double value(const Eigen::VectorXd& z) const {
    double worst = cones.front().value(z);
    for (std::size_t i = 1; i < cones.size(); ++i)
      worst = std::max(worst, cones[i].value(z));
    return worst;
  }
};

using Region = std::variant<MmpsRegion, EllipsoidUnion, ConeSet>;

// negative inside, zero on the boundary, positive outside
inline double region_boundary_value(const Region& region,
                                    const Eigen::VectorXd& z) {
  return std::visit([&](const auto& r) { return r.value(z); }, region);
}

inline bool contains(const Region& region, const Eigen::VectorXd& z) {
  return region_boundary_value(region, z) <= 0.0;
}

struct Misclassification {
  double inclusion = 0.0;  // feasible points missed by the region
  double violation = 0.0;  // infeasible points covered by the region

  double sum() const { return inclusion + violation; }
};

// Volume ratios estimated as grid-point fractions.
inline Misclassification misclassification(const Region& region,
                                           const Grid& grid) {
  std::size_t n_feas = 0, n_infeas = 0, missed = 0, covered = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    bool inside = contains(region, grid.point(i));
    if (grid.feasible[i]) {
      ++n_feas;
      missed += !inside;
    } else {
      ++n_infeas;
      covered += inside;
    }
  }
  if (n_feas == 0 || n_infeas == 0)
    throw DegenerateGrid("misclassification needs feasible and infeasible points");
  return {static_cast<double>(missed) / static_cast<double>(n_feas),
          static_cast<double>(covered) / static_cast<double>(n_infeas)};
}

// gamma_c * inclusion + (1 - gamma_c) * violation
inline double region_objective(const Region& region, const Grid& grid,
                               double gamma_c) {
  Misclassification mis = misclassification(region, grid);
  return gamma_c * mis.inclusion + (1.0 - gamma_c) * mis.violation;
}

// Mean relative distance between the labeled constraint values and a fitted
// boundary function. Points with undefined G (non-finite) are skipped.
inline double boundary_objective(
    const std::function<double(const Eigen::VectorXd&)>& boundary_fn,
    const Grid& grid, double eps_0) {
  if (!(eps_0 > 0.0)) throw Error("boundary objective requires eps_0 > 0");
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double g_true = grid.g_value[static_cast<Eigen::Index>(i)];
    if (!std::isfinite(g_true)) continue;
    acc += std::abs(g_true - boundary_fn(grid.point(i))) /
           (std::abs(g_true) + eps_0);
    ++n;
  }
  if (n == 0) throw DegenerateGrid("no labeled points for boundary objective");
  return acc / static_cast<double>(n);
}

// ---- JSON interchange ------------------------------------------------------

namespace detail {

inline nlohmann::json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline nlohmann::json mat_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

inline Eigen::VectorXd vec_from_json(const nlohmann::json& j) {
  auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Eigen::MatrixXd mat_from_json(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j2 = 0; j2 < rows[i].size(); ++j2)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j2)) = rows[i][j2];
  return m;
}

}  // namespace detail

inline nlohmann::json region_to_json(const Region& region, int n, int m) {
  nlohmann::json j;
  if (const auto* mm = std::get_if<MmpsRegion>(&region)) {
    j["kind"] = "mmps";
    j["n"] = n;
    j["m"] = m;
    j["boundary"] = mmps_to_json(mm->boundary);
  } else if (const auto* eu = std::get_if<EllipsoidUnion>(&region)) {
    j["kind"] = "ellipsoid_union";
    nlohmann::json members = nlohmann::json::array();
    for (const auto& e : eu->members)
      members.push_back({{"center", detail::vec_json(e.center)},
                         {"chol", detail::mat_json(e.chol)}});
    j["members"] = members;
  } else {
    const auto& cs = std::get<ConeSet>(region);
    j["kind"] = "cone_set";
    nlohmann::json cones = nlohmann::json::array();
    for (const auto& c : cs.cones)
      cones.push_back({{"P", detail::mat_json(c.p)},
                       {"z0", detail::vec_json(c.vertex)},
                       {"q", detail::vec_json(c.q)},
                       {"r", c.r}});
    j["cones"] = cones;
  }
  return j;
}

inline Region region_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "mmps") {
    return MmpsRegion{mmps_from_json(j.at("boundary"), j.at("n").get<int>(),
                                     j.at("m").get<int>())};
  }
  if (kind == "ellipsoid_union") {
    EllipsoidUnion u;
    for (const auto& e : j.at("members"))
      u.members.push_back(Ellipsoid{detail::vec_from_json(e.at("center")),
                                    detail::mat_from_json(e.at("chol"))});
    return u;
  }
  if (kind == "cone_set") {
    ConeSet cs;
    for (const auto& c : j.at("cones"))
      cs.cones.push_back(Cone{detail::mat_from_json(c.at("P")),
                              detail::vec_from_json(c.at("z0")),
                              detail::vec_from_json(c.at("q")),
                              c.at("r").get<double>()});
    return cs;
  }
  throw IoError("unknown region kind: " + kind);
}

}  // namespace hybkit
