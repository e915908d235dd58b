#pragma once

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "hybkit/errors.hpp"

namespace hybkit {

// Box domain over joint points z = (x, u).
struct Bounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int dim() const { return static_cast<int>(lower.size()); }

  void validate() const {
    if (lower.size() != upper.size())
      throw LengthMismatch("bounds lower/upper length mismatch");
    for (int i = 0; i < dim(); ++i)
      if (!(lower[i] < upper[i]))
        throw Error("bounds must satisfy lower < upper componentwise");
  }

  bool contains(const Eigen::VectorXd& z) const {
    for (int i = 0; i < dim(); ++i)
      if (z[i] < lower[i] || z[i] > upper[i]) return false;
    return true;
  }

  Eigen::VectorXd range() const { return upper - lower; }

  // affine map onto the unit box; all distance computations and fitting
  // parameterizations work in these coordinates (raw axes span five orders
  // of magnitude)
  Eigen::VectorXd normalize(const Eigen::VectorXd& z) const {
    return (z - lower).cwiseQuotient(range());
  }

  Eigen::VectorXd denormalize(const Eigen::VectorXd& zn) const {
    return lower + zn.cwiseProduct(range());
  }
};

// Sample grid over the joint input/state box. Rows of `points` are samples
// z = (x, u); `point_kind`/`point_seed` keep per-point provenance so that
// combined grids remain traceable to their members.
struct Grid {
  Eigen::MatrixXd points;  // N x dim
  char kind = 'R';         // U, R, S, T, B, or C for combined
  std::uint64_t seed = 0;

  std::vector<char> point_kind;
  std::vector<std::uint64_t> point_seed;
  Eigen::VectorXd g_value;             // constraint value; +inf if undefined
  std::vector<std::uint8_t> feasible;  // 1 = inside bounds and g <= 0

  // generation parameters, free-form (n_samp, n_rand, n_sim, ...)
  std::string meta;

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }

  Eigen::VectorXd point(std::size_t i) const {
    return points.row(static_cast<Eigen::Index>(i)).transpose();
  }

  bool has_labels() const {
    return feasible.size() == size() &&
           g_value.size() == static_cast<Eigen::Index>(size());
  }

  std::size_t count_feasible() const {
    std::size_t c = 0;
    for (auto f : feasible) c += (f != 0);
    return c;
  }

  void reserve_labels() {
    point_kind.assign(size(), kind);
    point_seed.assign(size(), seed);
    g_value = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(size()),
                                        std::numeric_limits<double>::quiet_NaN());
    feasible.assign(size(), 0);
  }

  // keeps rows with mask[i] != 0
  Grid select(const std::vector<std::uint8_t>& mask) const {
    std::size_t n = 0;
    for (auto m : mask) n += (m != 0);
    Grid out;
    out.kind = kind;
    out.seed = seed;
    out.meta = meta;
    out.points.resize(static_cast<Eigen::Index>(n), points.cols());
    out.point_kind.reserve(n);
    out.point_seed.reserve(n);
    out.g_value.resize(static_cast<Eigen::Index>(n));
    out.feasible.reserve(n);
    Eigen::Index j = 0;
    for (std::size_t i = 0; i < size(); ++i) {
      if (!mask[i]) continue;
      out.points.row(j) = points.row(static_cast<Eigen::Index>(i));
      out.point_kind.push_back(point_kind[i]);
      out.point_seed.push_back(point_seed[i]);
      out.g_value[j] = g_value[static_cast<Eigen::Index>(i)];
      out.feasible.push_back(feasible[i]);
      ++j;
    }
    return out;
  }
};

inline Grid combine_grids(const std::vector<Grid>& members) {
  if (members.empty()) throw EmptyResult("combine_grids: no member grids");
  const int d = members.front().dim();
  std::size_t total = 0;
  for (const auto& g : members) {
    if (g.dim() != d) throw LengthMismatch("combine_grids: dimension mismatch");
    total += g.size();
  }
  Grid out;
  out.kind = 'C';
  out.seed = members.front().seed;
  out.points.resize(static_cast<Eigen::Index>(total), d);
  out.g_value.resize(static_cast<Eigen::Index>(total));
  out.point_kind.reserve(total);
  out.point_seed.reserve(total);
  out.feasible.reserve(total);
  Eigen::Index row = 0;
  for (const auto& g : members) {
    for (std::size_t i = 0; i < g.size(); ++i, ++row) {
      out.points.row(row) = g.points.row(static_cast<Eigen::Index>(i));
      out.point_kind.push_back(g.point_kind[i]);
      out.point_seed.push_back(g.point_seed[i]);
      out.g_value[row] = g.g_value[static_cast<Eigen::Index>(i)];
      out.feasible.push_back(g.feasible[i]);
    }
  }
  return out;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline const char* grid_csv_header() {
  return "kind,seed,idx,v_x,v_y,r,F_xf,F_xr,delta,G,feasible";
}

// CSV export for vehicle-domain grids (6 coordinate columns). Floats carry
// 17 significant digits so the export is lossless and byte-stable per seed.
inline void write_grid_csv(const Grid& grid, const std::filesystem::path& path) {
  if (grid.dim() != 6)
    throw IoError("grid csv export expects 6-dimensional vehicle grids");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << grid_csv_header() << "\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out << grid.point_kind[i] << ',' << grid.point_seed[i] << ',' << i;
    for (int c = 0; c < 6; ++c)
      out << ',' << detail::format_double(grid.points(static_cast<Eigen::Index>(i), c));
    out << ',' << detail::format_double(grid.g_value[static_cast<Eigen::Index>(i)]);
    out << ',' << int(grid.feasible[i]) << "\n";
  }
  if (!out) throw IoError("write failed for " + path.string());
}

inline Grid read_grid_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty grid file " + path.string());
  if (line != grid_csv_header())
    throw IoError("unexpected grid csv header in " + path.string());

  std::vector<std::array<double, 7>> values;  // 6 coords + G
  std::vector<char> kinds;
  std::vector<std::uint64_t> seeds;
  std::vector<std::uint8_t> feas;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');
    kinds.push_back(field.empty() ? '?' : field[0]);
    std::getline(ss, field, ',');
    seeds.push_back(std::stoull(field));
    std::getline(ss, field, ',');  // idx, redundant
    std::array<double, 7> row{};
    for (int c = 0; c < 7; ++c) {
      std::getline(ss, field, ',');
      row[static_cast<std::size_t>(c)] = std::strtod(field.c_str(), nullptr);
    }
    values.push_back(row);
    std::getline(ss, field, ',');
    feas.push_back(static_cast<std::uint8_t>(field == "1"));
  }

  Grid g;
  g.kind = kinds.empty() ? 'R' : kinds.front();
  bool mixed = false;
  for (char k : kinds) mixed |= (k != g.kind);
  if (mixed) g.kind = 'C';
  g.seed = seeds.empty() ? 0 : seeds.front();
  g.points.resize(static_cast<Eigen::Index>(values.size()), 6);
  g.g_value.resize(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (int c = 0; c < 6; ++c)
      g.points(static_cast<Eigen::Index>(i), c) = values[i][static_cast<std::size_t>(c)];
    g.g_value[static_cast<Eigen::Index>(i)] = values[i][6];
  }
  g.point_kind = std::move(kinds);
  g.point_seed = std::move(seeds);
  g.feasible = std::move(feas);
  return g;
}

}  // namespace hybkit
