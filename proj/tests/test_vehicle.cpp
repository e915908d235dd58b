#include <catch2/catch_amalgamated.hpp>

#include "hybkit/rng.hpp"
#include "hybkit/vehicle.hpp"
#include "oracles.hpp"

using namespace hybkit;

namespace {

Eigen::VectorXd random_point(const Bounds& b, Rng& rng) {
  Eigen::VectorXd z(b.dim());
  for (int c = 0; c < b.dim(); ++c) z[c] = rng.uniform(b.lower[c], b.upper[c]);
  return z;
}

}  // namespace

TEST_CASE("default parameters match the benchmark vehicle", "[vehicle]") {
  VehicleParams p;
  p.validate();
  CHECK(p.m == 1970.0);
  CHECK(p.i_zz == 3498.0);
  CHECK(p.l_f == 1.4778);
  CHECK(p.l_r == 1.4102);
  CHECK(p.c_alpha_f == 126784.0);
  CHECK(p.c_alpha_r == 213983.0);
  CHECK(p.c_kappa_f == 315000.0);
  CHECK(p.c_kappa_r == 286700.0);
  CHECK(p.mu_0 == 1.076);
  CHECK(p.e_r == 0.01);
  CHECK(p.g_grav == 9.81);
}

TEST_CASE("static load split", "[vehicle]") {
  VehicleParams p;
  // m*g*l_r/(l_f+l_r) and m*g*l_f/(l_f+l_r), evaluated once by hand
  CHECK(p.fz_front() == Catch::Approx(9436.669716066483).epsilon(1e-14));
  CHECK(p.fz_rear() == Catch::Approx(9889.030283933518).epsilon(1e-14));
  CHECK(p.fz_front() + p.fz_rear() == Catch::Approx(p.m * p.g_grav).epsilon(1e-14));
}

TEST_CASE("straight rolling has zero slip and full friction", "[vehicle]") {
  VehicleParams p;
  State x{20.0, 0.0, 0.0};
  ControlInput u{0.0, 0.0, 0.0};
  TireQuantities tq = tire_quantities(p, x, u);
  CHECK(tq.front.alpha == 0.0);
  CHECK(tq.rear.alpha == 0.0);
  CHECK(tq.front.kappa == 0.0);
  CHECK(tq.rear.kappa == 0.0);
  CHECK(tq.front.fy == 0.0);
  CHECK(tq.rear.fy == 0.0);
  CHECK(tq.front.mu == Catch::Approx(1.076).epsilon(1e-14));
  CHECK(tq.rear.mu == Catch::Approx(1.076).epsilon(1e-14));
}

TEST_CASE("friction at zero slip is mu_0 independent of speed", "[vehicle]") {
  VehicleParams p;
  for (double vx : {5.0, 20.0, 50.0}) {
    TireQuantities tq = tire_quantities(p, State{vx, 0.0, 0.0}, ControlInput{});
    CHECK(tq.front.mu == 1.076);
    CHECK(tq.rear.mu == 1.076);
  }
}

TEST_CASE("friction never exceeds mu_0", "[vehicle]") {
  VehicleParams p;
  Bounds b = vehicle_bounds();
  Rng rng(321);
  for (int i = 0; i < 2000; ++i) {
    Eigen::VectorXd z = random_point(b, rng);
    try {
      TireQuantities tq = tire_quantities(p, unpack_state(z), unpack_input(z));
      CHECK(tq.front.mu <= p.mu_0);
      CHECK(tq.rear.mu <= p.mu_0);
      CHECK(tq.front.lambda_w >= 0.0);
      CHECK(tq.rear.lambda_w >= 0.0);
      CHECK(tq.front.fz > 0.0);
      CHECK(tq.rear.fz > 0.0);
    } catch (const SaturatedInversion&) {
      // fine, the commanded force is not transmissible there
    }
  }
}

TEST_CASE("slip ratio inversion reproduces the commanded force", "[vehicle]") {
  VehicleParams p;
  Bounds b = vehicle_bounds();
  Rng rng(17);
  int checked = 0;
  for (int i = 0; i < 2000; ++i) {
    Eigen::VectorXd z = random_point(b, rng);
    State x = unpack_state(z);
    ControlInput u = unpack_input(z);
    try {
      TireQuantities tq = tire_quantities(p, x, u);
      auto ctx_f = detail::front_context(p, x, u);
      auto ctx_r = detail::rear_context(p, x);
      CHECK(detail::axle_fx(ctx_f, tq.front.kappa) ==
            Catch::Approx(u.fxf).margin(1e-3));
      CHECK(detail::axle_fx(ctx_r, tq.rear.kappa) ==
            Catch::Approx(u.fxr).margin(1e-3));
      ++checked;
    } catch (const SaturatedInversion&) {
    }
  }
  CHECK(checked > 500);
}

TEST_CASE("non-positive speed is rejected", "[vehicle]") {
  VehicleParams p;
  CHECK_THROWS_AS(tire_quantities(p, State{0.0, 0.0, 0.0}, ControlInput{}),
                  NonPositiveSpeed);
  CHECK_THROWS_AS(tire_quantities(p, State{-5.0, 0.0, 0.0}, ControlInput{}),
                  NonPositiveSpeed);
}

TEST_CASE("saturated braking force is rejected", "[vehicle]") {
  VehicleParams p;
  // at v_x = 50 with heavy combined slip the transmissible force shrinks
  State x{50.0, 10.0, 0.6};
  ControlInput u{-5000.0, 0.0, -0.5};
  CHECK_THROWS_AS(tire_quantities(p, x, u), SaturatedInversion);
}

TEST_CASE("straight rolling dynamics vanish", "[vehicle][dynamics]") {
  VehicleParams p;
  for (double vx : {5.0, 27.0, 50.0}) {
    StateDerivative d = dynamics(p, State{vx, 0.0, 0.0}, ControlInput{});
    CHECK(d.vx_dot == 0.0);
    CHECK(d.vy_dot == 0.0);
    CHECK(d.r_dot == 0.0);
  }
}

TEST_CASE("pure braking at zero slip", "[vehicle][dynamics]") {
  VehicleParams p;
  StateDerivative d =
      dynamics(p, State{20.0, 0.0, 0.0}, ControlInput{-1000.0, 0.0, 0.0});
  CHECK(d.vx_dot == Catch::Approx(-0.5076142131979695).epsilon(1e-14));
  CHECK(d.vy_dot == 0.0);
  CHECK(d.r_dot == 0.0);
}

TEST_CASE("dynamics agrees with an independent transcription", "[vehicle][dynamics]") {
  VehicleParams p;
  Bounds b = vehicle_bounds();
  Rng rng(2024);
  int checked = 0;
  while (checked < 1000) {
    Eigen::VectorXd z = random_point(b, rng);
    State x = unpack_state(z);
    ControlInput u = unpack_input(z);
    try {
      TireQuantities tq = tire_quantities(p, x, u);
      StateDerivative d = dynamics(p, x, u);
      oracle::Derivative od =
          oracle::derivative(p, x, u, tq.front.kappa, tq.rear.kappa);
      double scale = std::max({1.0, std::abs(od.vx_dot), std::abs(od.vy_dot),
                               std::abs(od.r_dot)});
      CHECK(std::abs(d.vx_dot - od.vx_dot) <= 1e-12 * scale);
      CHECK(std::abs(d.vy_dot - od.vy_dot) <= 1e-12 * scale);
      CHECK(std::abs(d.r_dot - od.r_dot) <= 1e-12 * scale);
      ++checked;
    } catch (const SaturatedInversion&) {
    }
  }
}

TEST_CASE("euler step", "[vehicle]") {
  VehicleParams p;
  State x{20.0, 0.0, 0.0};
  ControlInput u{-1000.0, 0.0, 0.0};

  SECTION("zero derivative is a fixed point") {
    State x2 = step(p, x, ControlInput{}, 0.5);
    CHECK(x2.vx == x.vx);
    CHECK(x2.vy == x.vy);
    CHECK(x2.r == x.r);
  }
  SECTION("braking decrement") {
    State x2 = step(p, x, u, 0.01);
    CHECK(x2.vx == Catch::Approx(20.0 - 0.005076142131979695).epsilon(1e-13));
  }
  SECTION("half steps vs full step differ at second order") {
    State xb{30.0, 1.0, 0.1};
    ControlInput ub{-500.0, 200.0, 0.05};
    double dt = 0.02;
    State full = step(p, xb, ub, dt);
    State half = step(p, step(p, xb, ub, dt / 2), ub, dt / 2);
    double diff = std::abs(full.vx - half.vx) + std::abs(full.vy - half.vy) +
                  std::abs(full.r - half.r);
    CHECK(diff > 0.0);
    CHECK(diff < 10.0 * dt * dt);
  }
  SECTION("dt must be positive") {
    CHECK_THROWS_AS(step(p, x, u, 0.0), Error);
  }
}

TEST_CASE("constraint value components", "[vehicle][constraint]") {
  VehicleParams p;

  SECTION("straight rolling with zero forces") {
    // the g-g term is exactly -1 (zero acceleration) and both Kamm terms
    // are exactly -1 (zero forces), so G = -1
    double g = constraint_value(p, State{20.0, 0.0, 0.0}, ControlInput{});
    CHECK(g == -1.0);
  }
  SECTION("force on the Kamm circle gives G = 0") {
    // straight line: F_yf = 0 and mu = mu_0; command the front wheel cap
    State x{20.0, 0.0, 0.0};
    double cap = p.mu_0 * 0.5 * p.fz_front();
    double g = constraint_value(p, x, ControlInput{-cap, 0.0, 0.0});
    CHECK(g == 0.0);
  }
  SECTION("clearly violating point is positive") {
    // strong rear drive while steering hard at speed
    double g = constraint_value(p, State{45.0, -8.0, 0.5},
                                ControlInput{-4000.0, 5000.0, 0.5});
    CHECK(g > 0.0);
  }
  SECTION("sign agrees with the raw inequalities") {
    Bounds b = vehicle_bounds();
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
      Eigen::VectorXd z = random_point(b, rng);
      State x = unpack_state(z);
      ControlInput u = unpack_input(z);
      double g = constraint_value(p, x, u);
      if (std::abs(g) <= 1e-12) continue;  // skip exact-boundary ties
      CHECK((g <= 0.0) == oracle::inequalities_hold(p, x, u));
    }
  }
}

TEST_CASE("constraint symmetry under mirrored maneuvers", "[vehicle][constraint]") {
  VehicleParams p;
  Bounds b = vehicle_bounds();
  Rng rng(88);
  for (int i = 0; i < 500; ++i) {
    Eigen::VectorXd z = random_point(b, rng);
    State x = unpack_state(z);
    ControlInput u = unpack_input(z);
    double g1 = constraint_value(p, x, u);
    double g2 = constraint_value(p, State{x.vx, -x.vy, -x.r},
                                 ControlInput{u.fxf, u.fxr, -u.delta});
    CHECK(std::abs(g1 - g2) <= 1e-9 * std::max(1.0, std::abs(g1)));
  }
}

TEST_CASE("constraint is continuous along segments", "[vehicle][constraint]") {
  VehicleParams p;
  Bounds b = vehicle_bounds();
  Rng rng(99);
  for (int seg = 0; seg < 30; ++seg) {
    Eigen::VectorXd z1 = random_point(b, rng);
    Eigen::VectorXd z2 = random_point(b, rng);
    std::vector<double> vals;
    for (int k = 0; k <= 400; ++k)
      vals.push_back(constraint_value(p, z1 + (z2 - z1) * (k / 400.0)));
    double max_jump = 0.0;
    for (std::size_t k = 1; k < vals.size(); ++k)
      max_jump = std::max(max_jump, std::abs(vals[k] - vals[k - 1]));
    // crude continuity bound for steps of 1/400 along an in-box segment
    CHECK(max_jump < 0.5);
  }
}

TEST_CASE("feasibility rules", "[vehicle][constraint]") {
  VehicleParams p;
  Bounds b = vehicle_bounds();
  CHECK(is_feasible(p, State{20.0, 0.0, 0.0}, ControlInput{}, b));
  // outside the velocity bound
  CHECK_FALSE(is_feasible(p, State{60.0, 0.0, 0.0}, ControlInput{}, b));
  // positive constraint value
  CHECK_FALSE(is_feasible(p, State{45.0, -8.0, 0.5},
                          ControlInput{-4000.0, 5000.0, 0.5}, b));
}

TEST_CASE("feasible points always admit dynamics evaluation", "[vehicle][constraint]") {
  VehicleParams p;
  Bounds b = vehicle_bounds();
  Rng rng(7321);
  int feasible_seen = 0;
  for (int i = 0; i < 5000 && feasible_seen < 400; ++i) {
    Eigen::VectorXd z = random_point(b, rng);
    if (!is_feasible(p, z, b)) continue;
    ++feasible_seen;
    CHECK_NOTHROW(dynamics(p, unpack_state(z), unpack_input(z)));
  }
  CHECK(feasible_seen >= 400);
}

TEST_CASE("vehicle params and bounds round-trip through json", "[vehicle][io]") {
  VehicleParams p;
  p.mu_0 = 0.9;
  auto j = vehicle_params_to_json(p);
  VehicleParams q = vehicle_params_from_json(j);
  CHECK(q.mu_0 == 0.9);
  CHECK(q.c_alpha_r == p.c_alpha_r);

  nlohmann::json partial = {{"m", 1500.0}};
  VehicleParams r = vehicle_params_from_json(partial);
  CHECK(r.m == 1500.0);
  CHECK(r.i_zz == 3498.0);

  Bounds b = vehicle_bounds();
  Bounds b2 = bounds_from_json(bounds_to_json(b));
  CHECK(b2.lower == b.lower);
  CHECK(b2.upper == b.upper);

  nlohmann::json bad = {{"lower", {0.0, 1.0}}, {"upper", {1.0, 0.5}}};
  CHECK_THROWS_AS(bounds_from_json(bad), Error);
}
