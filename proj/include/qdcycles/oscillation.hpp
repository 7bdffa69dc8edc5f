#pragma once

// Reduced occupation-number dynamics
//   N_w'' + kappa N_w' + omega^2 N_w = -A N_h + B
//   N_h'  + Gamma_H N_h              = -C N_w + D
// and the reality of its characteristic roots.

#include <algorithm>
#include <array>
#include <complex>
#include <cstdint>

#include <Eigen/Dense>

#include "qdcycles/engine_model.hpp"
#include "qdcycles/optimizers.hpp"
#include "qdcycles/random.hpp"

namespace qdc {

struct OscCoefficients {
  double kappa = 0.0;
  double omega_sq = 0.0;
  double drive_a = 0.0;
  double const_b = 0.0;
  double coupling_c = 0.0;
  double const_d = 0.0;
};

/// Coefficients of the reduced system. drive_a = G_W1 W+_W0 - G_W0 W+_W1 is
/// the sign for which the displayed second-order equation holds exactly.
inline OscCoefficients reduced_coefficients(const EngineParams& p) {
  const TransitionRates r = rates(p);
  const double gw0 = coupling(p, Reservoir::L, 0) + coupling(p, Reservoir::R, 0);
  const double gw1 = coupling(p, Reservoir::L, 1) + coupling(p, Reservoir::R, 1);
  const double gh = p.gamma_h;
  const double dw = r.work_in(0) - r.work_in(1);
  const double dh = r.in(Reservoir::H, 0) - r.in(Reservoir::H, 1);

  OscCoefficients c;
  c.kappa = gw0 + gw1 + gh;
  c.omega_sq = -dw * dh + (gw1 + gh) * gw0 - (gw0 - gw1) * r.in(Reservoir::H, 1);
  c.drive_a = gw1 * r.work_in(0) - gw0 * r.work_in(1);
  c.const_b = (gw1 + gh) * r.work_in(0) - dw * r.in(Reservoir::H, 0);
  c.coupling_c = dh;
  c.const_d = r.in(Reservoir::H, 0);
  return c;
}

/// Matrix L of y' = L y + K for y = (N_w, N_w', N_h).
inline Eigen::Matrix3d reduced_system_matrix(const OscCoefficients& c, double gamma_h) {
  Eigen::Matrix3d m;
  m << 0.0, 1.0, 0.0,
      -c.omega_sq, -c.kappa, -c.drive_a,
      -c.coupling_c, 0.0, -gamma_h;
  return m;
}

/// a l^3 + b l^2 + c l + d.
struct CubicPoly {
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
};

/// det(l I - L) for the reduced system.
inline CubicPoly characteristic_cubic(const OscCoefficients& k, double gamma_h) {
  return CubicPoly{1.0, k.kappa + gamma_h, k.kappa * gamma_h + k.omega_sq,
                   gamma_h * k.omega_sq - k.drive_a * k.coupling_c};
}

/// b^2 c^2 - 4 a c^3 - 4 b^3 d - 27 a^2 d^2 + 18 a b c d; >= 0 iff all roots are real.
inline double cubic_discriminant(const CubicPoly& p) {
  if (p.a == 0.0) throw PreconditionError("cubic_discriminant: leading coefficient is zero");
  const double a = p.a, b = p.b, c = p.c, d = p.d;
  return b * b * c * c - 4.0 * a * c * c * c - 4.0 * b * b * b * d - 27.0 * a * a * d * d +
         18.0 * a * b * c * d;
}

/// Roots from the eigenvalues of the companion matrix.
inline std::array<std::complex<double>, 3> cubic_roots(const CubicPoly& p) {
  if (p.a == 0.0) throw PreconditionError("cubic_roots: leading coefficient is zero");
  Eigen::Matrix3d comp = Eigen::Matrix3d::Zero();
  comp(0, 0) = -p.b / p.a;
  comp(0, 1) = -p.c / p.a;
  comp(0, 2) = -p.d / p.a;
  comp(1, 0) = 1.0;
  comp(2, 1) = 1.0;
  Eigen::EigenSolver<Eigen::Matrix3d> es(comp, false);
  std::array<std::complex<double>, 3> out;
  for (int i = 0; i < 3; ++i) out[i] = es.eigenvalues()(i);
  std::sort(out.begin(), out.end(),
            [](auto x, auto y) { return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag(); });
  return out;
}

inline double discriminant_at(const EngineParams& p) {
  return cubic_discriminant(characteristic_cubic(reduced_coefficients(p), p.gamma_h));
}

/// Search box over (U, T_W, T_H, delta_mu). Feasible points additionally satisfy
/// T_H > T_W and 0 < delta_mu < U (1 - T_W / T_H).
struct ParameterBox {
  std::pair<double, double> coulomb_u{0.1, 50.0};
  std::pair<double, double> temp_w{0.1, 50.0};
  std::pair<double, double> temp_h{0.1, 50.0};
  std::pair<double, double> delta_mu{0.0, 50.0};
  /// Fixed part of the parameter set (eps_w, eps_h, x, couplings).
  EngineParams base = [] {
    EngineParams p;
    p.eps_w = 0.0;
    p.eps_h = 0.0;
    p.x = 0.9;
    return p;
  }();

  EngineParams at(const opt::Point<4>& z) const {
    EngineParams p = base;
    p.coulomb_u = z[0];
    p.temp_w = z[1];
    p.temp_h = z[2];
    p.delta_mu = z[3];
    return p;
  }

  static bool feasible(const opt::Point<4>& z) {
    const double u = z[0], tw = z[1], th = z[2], dmu = z[3];
    return th > tw && dmu > 0.0 && dmu < u * (1.0 - tw / th);
  }
};

struct DiscriminantMinimum {
  opt::Method method = opt::Method::RandomSearch;
  EngineParams params;
  double delta_min = 0.0;
  std::size_t evaluations = 0;
};

namespace detail {
struct BoxFeasible {
  bool operator()(const opt::Point<4>& z) const { return ParameterBox::feasible(z); }
};
}  // namespace detail

/// Minimizes the cubic discriminant over the feasible part of `box`.
inline DiscriminantMinimum minimize_discriminant(const ParameterBox& box, opt::Method method,
                                                 std::uint64_t seed,
                                                 const opt::Settings& settings = {}) {
  const opt::Domain<4, detail::BoxFeasible> dom{
      {box.coulomb_u, box.temp_w, box.temp_h, box.delta_mu}, {}};
  // Cheap emptiness test: the loosest corner of the constraint.
  const double dmu_cap = box.coulomb_u.second * (1.0 - box.temp_w.first / box.temp_h.second);
  if (box.temp_w.first >= box.temp_h.second || box.delta_mu.second <= 0.0 ||
      box.delta_mu.first >= dmu_cap)
    throw ConfigError("bounds", 0, "feasible region is empty");

  auto objective = [&](const opt::Point<4>& z) { return discriminant_at(box.at(z)); };
  RandomStream rng(seed);
  const auto r = opt::minimize(method, objective, dom, rng, settings);
  return DiscriminantMinimum{method, box.at(r.best), r.value, r.evaluations};
}

}  // namespace qdc
