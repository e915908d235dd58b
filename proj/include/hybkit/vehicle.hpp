#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "hybkit/errors.hpp"
#include "hybkit/grid.hpp"
#include "json.hpp"

namespace hybkit {

// Single-track model parameters; defaults are the IPG CarMaker BMW set.
struct VehicleParams {
  double m = 1970.0;          // mass [kg]
  double i_zz = 3498.0;       // yaw inertia [kg m^2]
  double l_f = 1.4778;        // CoG to front axle [m]
  double l_r = 1.4102;        // CoG to rear axle [m]
  double c_alpha_f = 126784.0;  // front cornering stiffness [N]
  double c_alpha_r = 213983.0;  // rear cornering stiffness [N]
  double c_kappa_f = 315000.0;  // front longitudinal stiffness [N]
  double c_kappa_r = 286700.0;  // rear longitudinal stiffness [N]
  double mu_0 = 1.076;        // zero-velocity friction [-]
  double e_r = 0.01;          // friction slope [-]
  double g_grav = 9.81;       // gravitational acceleration [m/s^2]

  void validate() const {
    const double vals[] = {m,         i_zz,      l_f,       l_r,
                           c_alpha_f, c_alpha_r, c_kappa_f, c_kappa_r,
                           mu_0,      e_r,       g_grav};
    for (double v : vals)
      if (!(v > 0.0) || !std::isfinite(v))
        throw Error("vehicle parameters must be strictly positive and finite");
  }

  // static axle load split, no load transfer
  double fz_front() const { return m * g_grav * l_r / (l_f + l_r); }
  double fz_rear() const { return m * g_grav * l_f / (l_f + l_r); }
};

struct State {
  double vx = 0.0;  // longitudinal velocity [m/s]
  double vy = 0.0;  // lateral velocity [m/s]
  double r = 0.0;   // yaw rate [rad/s]
};

struct ControlInput {
  double fxf = 0.0;    // front longitudinal force [N]
  double fxr = 0.0;    // rear longitudinal force [N]
  double delta = 0.0;  // road steering angle [rad]
};

struct StateDerivative {
  double vx_dot = 0.0;
  double vy_dot = 0.0;
  double r_dot = 0.0;
};

struct AxleQuantities {
  double alpha = 0.0;     // slip angle [rad]
  double kappa = 0.0;     // slip ratio [-]
  double mu = 0.0;        // friction coefficient [-]
  double lambda_w = 0.0;  // Dugoff weighting coefficient [-]
  double fy = 0.0;        // lateral force [N]
  double fz = 0.0;        // normal load [N]
};

struct TireQuantities {
  AxleQuantities front;
  AxleQuantities rear;
};

inline Eigen::VectorXd pack_point(const State& x, const ControlInput& u) {
  Eigen::VectorXd z(6);
  z << x.vx, x.vy, x.r, u.fxf, u.fxr, u.delta;
  return z;
}

inline State unpack_state(const Eigen::VectorXd& z) {
  return State{z[0], z[1], z[2]};
}

inline ControlInput unpack_input(const Eigen::VectorXd& z) {
  return ControlInput{z[3], z[4], z[5]};
}

// grid-generation bounds from the benchmark definition:
// v_x [5,50], v_y [-10,10], r [-0.6,0.6], F_xf [-5000,0],
// F_xr [-5000,5000], delta [-0.5,0.5]
inline Bounds vehicle_bounds() {
  Bounds b;
  b.lower.resize(6);
  b.upper.resize(6);
  b.lower << 5.0, -10.0, -0.6, -5000.0, -5000.0, -0.5;
  b.upper << 50.0, 10.0, 0.6, 0.0, 5000.0, 0.5;
  return b;
}

namespace detail {

inline double f_lambda(double lw) { return lw < 1.0 ? lw * (2.0 - lw) : 1.0; }

// scalar quantities of one axle needed by the Dugoff relations
struct AxleContext {
  double c_alpha;
  double c_kappa;
  double fz;
  double mu_0;
  double e_r;
  double vx;
  double alpha;
  double tan_alpha;
};

// friction falls off with speed and combined slip; clamped at zero so that
// the Kamm budget cannot re-enter through the square of a negative value
inline double axle_friction(const AxleContext& c, double kappa) {
  double slip = std::sqrt(kappa * kappa + c.tan_alpha * c.tan_alpha);
  return std::max(0.0, c.mu_0 * (1.0 - c.e_r * c.vx * slip));
}

inline double axle_weighting(const AxleContext& c, double kappa, double mu) {
  double denom = 2.0 * std::hypot(c.c_kappa * kappa, c.c_alpha * c.tan_alpha);
  if (denom < 1e-300) return std::numeric_limits<double>::infinity();
  return mu * c.fz * (1.0 - kappa) / denom;
}

inline double axle_fx(const AxleContext& c, double kappa) {
  double mu = axle_friction(c, kappa);
  double lw = axle_weighting(c, kappa, mu);
  return c.c_kappa * kappa / (1.0 - kappa) * f_lambda(lw);
}

// Inverts the longitudinal Dugoff relation for the slip ratio given the
// commanded axle force. The first sign change away from zero is bracketed
// (geometric expansion, then a fine scan as fallback) and refined by
// bisection, which selects the low-slip branch of the force curve.
inline double invert_slip_ratio(const AxleContext& c, double fx_target) {
  if (fx_target == 0.0) return 0.0;
  const double kappa_tol = 1e-10;
  const double dir = fx_target > 0.0 ? 1.0 : -1.0;
  const double limit = dir * (1.0 - 1e-9);

  auto h = [&](double k) { return axle_fx(c, k) - fx_target; };
  const double h0 = -fx_target;

  double lo = 0.0, hi = 0.0;
  bool bracketed = false;
  double prev = 0.0, hprev = h0;
  double step = std::min(std::abs(fx_target) / c.c_kappa, 0.05);
  for (double k = dir * step; !bracketed; k *= 2.0) {
    bool last = std::abs(k) >= std::abs(limit);
    if (last) k = limit;
    double hk = h(k);
    if (hk == 0.0) return k;
    if (hk * hprev < 0.0) {
      lo = prev;
      hi = k;
      bracketed = true;
      break;
    }
    prev = k;
    hprev = hk;
    if (last) break;
  }
  if (!bracketed) {
    // a narrow window between two crossings can slip through the doubling
    // sequence near the force peak; rescan uniformly before giving up
    const int n_scan = 256;
    prev = 0.0;
    hprev = h0;
    for (int i = 1; i <= n_scan; ++i) {
      double k = limit * static_cast<double>(i) / n_scan;
      double hk = h(k);
      if (hk == 0.0) return k;
      if (hk * hprev < 0.0) {
        lo = prev;
        hi = k;
        bracketed = true;
        break;
      }
      prev = k;
      hprev = hk;
    }
  }
  if (!bracketed)
    throw SaturatedInversion("axle force exceeds the transmissible limit");

  double hlo = h(lo);
  for (int it = 0; it < 200 && std::abs(hi - lo) > kappa_tol; ++it) {
    double mid = 0.5 * (lo + hi);
    double hm = h(mid);
    if (hm == 0.0) return mid;
    if (hm * hlo < 0.0) {
      hi = mid;
    } else {
      lo = mid;
      hlo = hm;
    }
  }
  return 0.5 * (lo + hi);
}

inline AxleContext front_context(const VehicleParams& p, const State& x,
                                 const ControlInput& u) {
  double alpha = u.delta - std::atan((x.vy + p.l_f * x.r) / x.vx);
  return AxleContext{p.c_alpha_f, p.c_kappa_f, p.fz_front(), p.mu_0,
                     p.e_r,       x.vx,        alpha,        std::tan(alpha)};
}

inline AxleContext rear_context(const VehicleParams& p, const State& x) {
  double alpha = -std::atan((x.vy - p.l_r * x.r) / x.vx);
  return AxleContext{p.c_alpha_r, p.c_kappa_r, p.fz_rear(), p.mu_0,
                     p.e_r,       x.vx,        alpha,       std::tan(alpha)};
}

inline AxleQuantities solve_axle(const AxleContext& c, double fx) {
  AxleQuantities q;
  q.alpha = c.alpha;
  q.fz = c.fz;
  q.kappa = invert_slip_ratio(c, fx);
  q.mu = axle_friction(c, q.kappa);
  q.lambda_w = axle_weighting(c, q.kappa, q.mu);
  q.fy = c.c_alpha / (1.0 - q.kappa) * f_lambda(q.lambda_w) * q.alpha;
  return q;
}

}  // namespace detail

inline TireQuantities tire_quantities(const VehicleParams& p, const State& x,
                                      const ControlInput& u) {
  if (!(x.vx > 0.0))
    throw NonPositiveSpeed("slip angles are undefined for v_x <= 0");
  TireQuantities tq;
  tq.front = detail::solve_axle(detail::front_context(p, x, u), u.fxf);
  tq.rear = detail::solve_axle(detail::rear_context(p, x), u.fxr);
  return tq;
}

inline StateDerivative dynamics(const VehicleParams& p, const State& x,
                                const ControlInput& u) {
  TireQuantities tq = tire_quantities(p, x, u);
  const double cd = std::cos(u.delta);
  const double sd = std::sin(u.delta);
  StateDerivative d;
  d.vx_dot = (u.fxf * cd - tq.front.fy * sd + u.fxr) / p.m + x.vy * x.r;
  d.vy_dot = (u.fxf * sd + tq.front.fy * cd + tq.rear.fy) / p.m - x.vx * x.r;
  d.r_dot = (u.fxf * sd * p.l_f + tq.front.fy * cd * p.l_f -
             tq.rear.fy * p.l_r) /
            p.i_zz;
  return d;
}

// forward-Euler step x+ = x + dt*F(x,u)
inline State step(const VehicleParams& p, const State& x, const ControlInput& u,
                  double dt) {
  if (!(dt > 0.0)) throw Error("step requires dt > 0");
  StateDerivative d = dynamics(p, x, u);
  return State{x.vx + dt * d.vx_dot, x.vy + dt * d.vy_dot, x.r + dt * d.r_dot};
}

namespace detail {

// Tire quantities entering the feasibility envelope. The commanded
// longitudinal force is treated as an external demand against the friction
// budget of one wheel, and the lateral force follows the zero-slip-ratio
// Dugoff curve. This keeps G defined on the whole box (no force inversion
// involved) and gives the envelope its characteristic non-convex shape.
struct EnvelopeAxle {
  double mu;
  double fy;
  double fz;  // per-wheel share of the axle load
};

inline EnvelopeAxle envelope_axle(double c_alpha, double fz_axle, double mu_0,
                                  double e_r, double vx, double alpha) {
  const double ta = std::tan(alpha);
  const double mu = std::max(0.0, mu_0 * (1.0 - e_r * vx * std::abs(ta)));
  const double fz = 0.5 * fz_axle;
  const double denom = 2.0 * std::abs(c_alpha * ta);
  const double lw = denom < 1e-300 ? std::numeric_limits<double>::infinity()
                                   : mu * fz / denom;
  return {mu, c_alpha * f_lambda(lw) * alpha, fz};
}

}  // namespace detail

// Signed feasibility function: G <= 0 inside the feasible region, G = 0 on
// its boundary. Each member constraint is normalized as lhs/rhs - 1 before
// taking the max, so the components share a common scale.
inline double constraint_value(const VehicleParams& p, const State& x,
                               const ControlInput& u) {
  if (!(x.vx > 0.0))
    throw NonPositiveSpeed("slip angles are undefined for v_x <= 0");
  const double alpha_f = u.delta - std::atan((x.vy + p.l_f * x.r) / x.vx);
  const double alpha_r = -std::atan((x.vy - p.l_r * x.r) / x.vx);
  const detail::EnvelopeAxle front = detail::envelope_axle(
      p.c_alpha_f, p.fz_front(), p.mu_0, p.e_r, x.vx, alpha_f);
  const detail::EnvelopeAxle rear = detail::envelope_axle(
      p.c_alpha_r, p.fz_rear(), p.mu_0, p.e_r, x.vx, alpha_r);
  const double cd = std::cos(u.delta);
  const double sd = std::sin(u.delta);

  auto ratio = [](double lhs, double rhs) {
    return lhs / std::max(rhs, 1e-300) - 1.0;
  };

  // acceleration envelope (g-g diagram)
  const double ax = (u.fxf * cd - front.fy * sd + u.fxr) / p.m;
  const double ay = (u.fxf * sd + front.fy * cd + rear.fy) / p.m;
  const double mu_min = std::min(front.mu, rear.mu);
  const double a_lim = mu_min * p.g_grav;
  const double g_gg = ratio(ax * ax + ay * ay, a_lim * a_lim);

  // per-wheel force saturation (Kamm circle)
  auto kamm = [&](const detail::EnvelopeAxle& q, double fx) {
    double cap = q.mu * q.fz;
    return ratio(fx * fx + q.fy * q.fy, cap * cap);
  };

  return std::max({g_gg, kamm(front, u.fxf), kamm(rear, u.fxr)});
}

inline double constraint_value(const VehicleParams& p, const Eigen::VectorXd& z) {
  return constraint_value(p, unpack_state(z), unpack_input(z));
}

inline bool is_feasible(const VehicleParams& p, const State& x,
                        const ControlInput& u, const Bounds& bounds) {
  if (!bounds.contains(pack_point(x, u))) return false;
  try {
    if (constraint_value(p, x, u) > 0.0) return false;
    // the dynamics must be evaluable too: a failed slip-ratio inversion
    // marks the point infeasible
    (void)tire_quantities(p, x, u);
    return true;
  } catch (const Error&) {
    return false;
  }
}

inline bool is_feasible(const VehicleParams& p, const Eigen::VectorXd& z,
                        const Bounds& bounds) {
  return is_feasible(p, unpack_state(z), unpack_input(z), bounds);
}

// ---- JSON config ----------------------------------------------------------

inline VehicleParams vehicle_params_from_json(const nlohmann::json& j) {
  VehicleParams p;
  auto get = [&](const char* key, double& field) {
    if (j.contains(key)) field = j.at(key).get<double>();
  };
  get("m", p.m);
  get("I_zz", p.i_zz);
  get("l_f", p.l_f);
  get("l_r", p.l_r);
  get("C_alpha_f", p.c_alpha_f);
  get("C_alpha_r", p.c_alpha_r);
  get("C_kappa_f", p.c_kappa_f);
  get("C_kappa_r", p.c_kappa_r);
  get("mu_0", p.mu_0);
  get("e_r", p.e_r);
  get("g_grav", p.g_grav);
  p.validate();
  return p;
}

inline nlohmann::json vehicle_params_to_json(const VehicleParams& p) {
  return nlohmann::json{{"m", p.m},
                        {"I_zz", p.i_zz},
                        {"l_f", p.l_f},
                        {"l_r", p.l_r},
                        {"C_alpha_f", p.c_alpha_f},
                        {"C_alpha_r", p.c_alpha_r},
                        {"C_kappa_f", p.c_kappa_f},
                        {"C_kappa_r", p.c_kappa_r},
                        {"mu_0", p.mu_0},
                        {"e_r", p.e_r},
                        {"g_grav", p.g_grav}};
}

inline Bounds bounds_from_json(const nlohmann::json& j) {
  Bounds b;
  auto lo = j.at("lower").get<std::vector<double>>();
  auto hi = j.at("upper").get<std::vector<double>>();
  b.lower = Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size()));
  b.upper = Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size()));
  b.validate();
  return b;
}

inline nlohmann::json bounds_to_json(const Bounds& b) {
  std::vector<double> lo(b.lower.data(), b.lower.data() + b.lower.size());
  std::vector<double> hi(b.upper.data(), b.upper.data() + b.upper.size());
  return nlohmann::json{{"lower", lo}, {"upper", hi}};
}

}  // namespace hybkit
