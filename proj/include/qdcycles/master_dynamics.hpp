#pragma once

// Ensemble description: transient and stationary solutions of
// d rho / dt = W rho and the averaged currents they carry.

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "qdcycles/engine_model.hpp"
#include "qdcycles/errors.hpp"
#include "qdcycles/numerics.hpp"

namespace qdc {

/// Occupation probabilities (p00, p01, p10, p11).
struct Distribution {
  Eigen::Vector4d p = Eigen::Vector4d::Zero();

  double operator[](State s) const { return p(index(s)); }

  /// N_w = p10 + p11.
  double work_occupation() const { return p(2) + p(3); }
  /// N_h = p01 + p11.
  double hot_occupation() const { return p(1) + p(3); }

  static Distribution pure(State s) {
    Distribution d;
    d.p(index(s)) = 1.0;
    return d;
  }

  void validate(double tol = 1e-10) const {
    if ((p.array() < -tol).any()) throw PreconditionError("distribution has negative entries");
    if (std::abs(p.sum() - 1.0) > tol) throw PreconditionError("distribution is not normalized");
  }
};

/// Normalized null vector of the generator, from its singular value decomposition.
inline Distribution steady_state(const Generator& gen) {
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(gen.entries, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();  // descending
  const double scale = std::max(sv(0), 1e-300);
  if (sv(2) <= 1e-12 * scale) throw DegeneracyError("steady_state: null space dimension > 1");
  Eigen::Vector4d v = svd.matrixV().col(3);
  v /= v.sum();
  // Round-off can leave entries at -1e-17; they are zero.
  v = v.cwiseMax(0.0);
  Distribution d;
  d.p = v / v.sum();
  return d;
}

/// exp(W t) rho0.
inline Distribution evolve(const Generator& gen, const Distribution& rho0, double t) {
  if (!(t >= 0.0)) throw PreconditionError("evolve: time must be >= 0");
  if (t == 0.0) return rho0;
  const Eigen::Matrix4d prop = (gen.entries * t).exp();
  Distribution out;
  out.p = prop * rho0.p;
  return out;
}

struct SteadyObservables {
  double current_l = 0.0;     ///< particles per time into L
  double heat_h = 0.0;        ///< energy per time drawn from H
  double power = 0.0;         ///< delta_mu * current_l
  std::optional<double> efficiency;  ///< power / heat_h; empty when heat_h == 0
  double entropy_rate = 0.0;  ///< (beta_W - beta_H) J_H - beta_W P
};

/// Particle current into L carried by `rho`.
inline double current_into_left(const TransitionRates& r, const Distribution& rho) {
  double i = 0.0;
  for (int n = 0; n < 2; ++n)
    i += r.out(Reservoir::L, n) * rho[make_state(1, n)] - r.in(Reservoir::L, n) * rho[make_state(0, n)];
  return i;
}

/// Heat current from H; each H jump carries eps_h + U n_w.
inline double heat_from_hot(const EngineParams& p, const TransitionRates& r, const Distribution& rho) {
  double j = 0.0;
  for (int n = 0; n < 2; ++n) {
    const double quantum = p.eps_h + p.coulomb_u * n;
    j += quantum * (r.in(Reservoir::H, n) * rho[make_state(n, 0)] -
                    r.out(Reservoir::H, n) * rho[make_state(n, 1)]);
  }
  return j;
}

inline SteadyObservables observables(const EngineParams& p, const Distribution& rho_bar) {
  const TransitionRates r = rates(p);
  SteadyObservables o;
  o.current_l = current_into_left(r, rho_bar);
  o.heat_h = heat_from_hot(p, r, rho_bar);
  o.power = p.delta_mu * o.current_l;
  if (o.heat_h != 0.0) o.efficiency = o.power / o.heat_h;
  o.entropy_rate = (p.beta_w() - p.beta_h()) * o.heat_h - p.beta_w() * o.power;
  return o;
}

inline SteadyObservables steady_observables(const EngineParams& p) {
  return observables(p, steady_state(generator(p)));
}

/// Steady-state Ibar_L as a function of the bias, other parameters fixed.
inline double steady_current(const EngineParams& p, double delta_mu) {
  const EngineParams q = p.with_delta_mu(delta_mu);
  const TransitionRates r = rates(q);
  return current_into_left(r, steady_state(generator(r)));
}

/// Bias at which Ibar_L changes sign on (0, U eta_Carnot).
inline double stall_bias(const EngineParams& p, double tol = 1e-4) {
  p.validate();
  const double hi = p.coulomb_u * p.carnot();
  if (!(hi > 0.0)) throw NoStallError("stall_bias: U eta_Carnot <= 0, no engine regime");
  const double lo = 1e-9 * hi;
  auto current = [&](double dmu) { return steady_current(p, dmu); };
  if (!(current(lo) > 0.0)) throw NoStallError("stall_bias: no engine regime at small bias");
  if (!(current(hi) < 0.0)) throw NoStallError("stall_bias: current does not change sign");
  return numerics::bisect(current, lo, hi, tol);
}

struct SweepRow {
  double delta_mu = 0.0;
  SteadyObservables obs;
};

inline std::vector<SweepRow> sweep(const EngineParams& p, const std::vector<double>& biases) {
  std::vector<SweepRow> rows;
  rows.reserve(biases.size());
  for (double dmu : biases) rows.push_back({dmu, steady_observables(p.with_delta_mu(dmu))});
  return rows;
}

}  // namespace qdc
