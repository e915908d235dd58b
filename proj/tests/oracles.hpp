#pragma once

// Independent re-transcriptions used as test oracles. These deliberately
// duplicate the model equations in a straight-line style, separate from the
// library implementation, so that transcription errors on either side show
// up as disagreements.

#include <Eigen/Core>
#include <cmath>

#include "hybkit/vehicle.hpp"

namespace oracle {

struct Derivative {
  double vx_dot, vy_dot, r_dot;
};

// Dugoff lateral force of one axle from explicit slip quantities.
inline double dugoff_fy(double c_alpha, double c_kappa, double fz, double mu_0,
                        double e_r, double vx, double alpha, double kappa) {
  double mu = mu_0 * (1.0 - e_r * vx * std::sqrt(kappa * kappa +
                                                 std::tan(alpha) * std::tan(alpha)));
  if (mu < 0.0) mu = 0.0;
  double denom = 2.0 * std::sqrt(std::pow(c_kappa * kappa, 2) +
                                 std::pow(c_alpha * std::tan(alpha), 2));
  double lw = denom > 0.0 ? mu * fz * (1.0 - kappa) / denom : 1e308;
  double fl = lw < 1.0 ? lw * (2.0 - lw) : 1.0;
  return c_alpha / (1.0 - kappa) * fl * alpha;
}

// Body-frame accelerations from the planar force balance, taking the slip
// ratios as given (the library's inversion closure is checked separately).
inline Derivative derivative(const hybkit::VehicleParams& p,
                             const hybkit::State& x, const hybkit::ControlInput& u,
                             double kappa_f, double kappa_r) {
  double alpha_f = u.delta - std::atan((x.vy + p.l_f * x.r) / x.vx);
  double alpha_r = -std::atan((x.vy - p.l_r * x.r) / x.vx);
  double fzf = p.m * p.g_grav * p.l_r / (p.l_f + p.l_r);
  double fzr = p.m * p.g_grav * p.l_f / (p.l_f + p.l_r);
  double fyf = dugoff_fy(p.c_alpha_f, p.c_kappa_f, fzf, p.mu_0, p.e_r, x.vx,
                         alpha_f, kappa_f);
  double fyr = dugoff_fy(p.c_alpha_r, p.c_kappa_r, fzr, p.mu_0, p.e_r, x.vx,
                         alpha_r, kappa_r);
  Derivative d;
  d.vx_dot = (u.fxf * std::cos(u.delta) - fyf * std::sin(u.delta) + u.fxr) / p.m +
             x.vy * x.r;
  d.vy_dot = (u.fxf * std::sin(u.delta) + fyf * std::cos(u.delta) + fyr) / p.m -
             x.vx * x.r;
  d.r_dot = (u.fxf * std::sin(u.delta) * p.l_f + fyf * std::cos(u.delta) * p.l_f -
             fyr * p.l_r) /
            p.i_zz;
  return d;
}

// Sign of the feasibility test written as the raw inequalities, not as a
// normalized max. Uses the same envelope closure as the implementation
// (pure-slip lateral forces, per-wheel friction budget), re-transcribed.
inline bool inequalities_hold(const hybkit::VehicleParams& p,
                              const hybkit::State& x,
                              const hybkit::ControlInput& u) {
  auto wheel = [&](double c_alpha, double fz_axle, double alpha) {
    double ta = std::tan(alpha);
    double mu = p.mu_0 * (1.0 - p.e_r * x.vx * std::abs(ta));
    if (mu < 0.0) mu = 0.0;
    double fz = fz_axle / 2.0;
    double fy;
    if (std::abs(c_alpha * ta) > 0.0) {
      double lw = mu * fz / (2.0 * std::abs(c_alpha * ta));
      double fl = lw < 1.0 ? lw * (2.0 - lw) : 1.0;
      fy = c_alpha * fl * alpha;
    } else {
      fy = c_alpha * alpha;
    }
    struct W {
      double mu, fy, fz;
    };
    return W{mu, fy, fz};
  };
  double alpha_f = u.delta - std::atan((x.vy + p.l_f * x.r) / x.vx);
  double alpha_r = -std::atan((x.vy - p.l_r * x.r) / x.vx);
  auto wf = wheel(p.c_alpha_f, p.m * p.g_grav * p.l_r / (p.l_f + p.l_r), alpha_f);
  auto wr = wheel(p.c_alpha_r, p.m * p.g_grav * p.l_f / (p.l_f + p.l_r), alpha_r);
  double cd = std::cos(u.delta), sd = std::sin(u.delta);
  double ax = (u.fxf * cd - wf.fy * sd + u.fxr) / p.m;
  double ay = (u.fxf * sd + wf.fy * cd + wr.fy) / p.m;
  double mu_min = std::min(wf.mu, wr.mu);
  bool gg = ax * ax + ay * ay <= std::pow(mu_min * p.g_grav, 2);
  bool kf = u.fxf * u.fxf + wf.fy * wf.fy <= std::pow(wf.mu * wf.fz, 2);
  bool kr = u.fxr * u.fxr + wr.fy * wr.fy <= std::pow(wr.mu * wr.fz, 2);
  return gg && kf && kr;
}

}  // namespace oracle
