#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include "hybkit/grid.hpp"
#include "hybkit/gridgen.hpp"
#include "hybkit/vehicle.hpp"

using namespace hybkit;

TEST_CASE("bounds validation and mapping", "[grid]") {
  Bounds b = vehicle_bounds();
  b.validate();
  CHECK(b.dim() == 6);

  Eigen::VectorXd z(6);
  z << 5.0, -10.0, -0.6, -5000.0, -5000.0, -0.5;
  CHECK(b.contains(z));
  CHECK(b.normalize(z).isZero());
  CHECK(b.normalize(b.upper).isApproxToConstant(1.0));
  CHECK(b.denormalize(b.normalize(z)).isApprox(z, 1e-12));

  z[0] = 4.9;
  CHECK_FALSE(b.contains(z));

  Bounds bad;
  bad.lower = Eigen::VectorXd::Zero(2);
  bad.upper = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("grid selection and combination", "[grid]") {
  Bounds b = vehicle_bounds();
  Grid g1 = random_grid(b, 10, 1);
  Grid g2 = random_grid(b, 15, 2);
  VehicleParams p;
  annotate_constraints(g1, p, b, 1);
  annotate_constraints(g2, p, b, 1);

  Grid c = combine_grids({g1, g2});
  CHECK(c.size() == 25);
  CHECK(c.kind == 'C');
  CHECK(c.point_seed[0] == g1.point_seed[0]);
  CHECK(c.point_seed[12] == g2.point_seed[2]);
  CHECK(c.point(12) == g2.point(2));

  std::vector<std::uint8_t> mask(25, 0);
  mask[3] = mask[20] = 1;
  Grid sel = c.select(mask);
  CHECK(sel.size() == 2);
  CHECK(sel.point(0) == c.point(3));
  CHECK(sel.g_value[1] == c.g_value[20]);
}

TEST_CASE("grid csv round trip", "[grid][io]") {
  namespace fs = std::filesystem;
  Bounds b = vehicle_bounds();
  VehicleParams p;
  Grid g = random_grid(b, 50, 77);
  annotate_constraints(g, p, b, 1);

  fs::path dir = fs::temp_directory_path() / "hybkit_grid_test";
  fs::create_directories(dir);
  fs::path file = dir / "g.csv";
  write_grid_csv(g, file);

  Grid r = read_grid_csv(file);
  REQUIRE(r.size() == g.size());
  CHECK(r.points == g.points);  // 17 significant digits are lossless
  CHECK(r.g_value == g.g_value);
  CHECK(r.feasible == g.feasible);
  CHECK(r.kind == g.kind);

  SECTION("export is byte-stable") {
    fs::path file2 = dir / "g2.csv";
    write_grid_csv(g, file2);
    std::ifstream a(file), b2(file2);
    std::string sa((std::istreambuf_iterator<char>(a)), {});
    std::string sb((std::istreambuf_iterator<char>(b2)), {});
    CHECK(sa == sb);
  }
  SECTION("header is checked") {
    std::ofstream bad(dir / "bad.csv");
    bad << "oops\n";
    bad.close();
    CHECK_THROWS_AS(read_grid_csv(dir / "bad.csv"), IoError);
  }
}
