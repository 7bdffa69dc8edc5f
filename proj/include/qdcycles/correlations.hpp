#pragma once

// Steady-state two-time jump correlations, as products of probability rates
// (units rate^2): g(tau) = pi(second, tau | first) * pi(first).

#include <algorithm>
#include <array>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "qdcycles/engine_model.hpp"
#include "qdcycles/master_dynamics.hpp"
#include "qdcycles/numerics.hpp"

namespace qdc {

struct CorrelationCurve {
  std::vector<double> tau;
  std::vector<double> values;
  /// Long-delay limit pi(second) * pi(first).
  double decorrelated = 0.0;
};

/// tau = 0 followed by `n` log-spaced delays on [lo, hi].
inline std::vector<double> default_tau_grid(std::size_t n = 400, double lo = 1e-2, double hi = 200.0) {
  std::vector<double> grid{0.0};
  const auto logs = numerics::logspace(lo, hi, n);
  grid.insert(grid.end(), logs.begin(), logs.end());
  return grid;
}

namespace detail {

/// Rate of L- events in `rho`: sum_n W-_{L,n} p_{1n}.
inline double left_exit_rate(const TransitionRates& r, const Distribution& rho) {
  return r.out(Reservoir::L, 0) * rho[State::s10] + r.out(Reservoir::L, 1) * rho[State::s11];
}

inline CorrelationCurve propagate_after_jump(const Generator& gen, const TransitionRates& r,
                                             const Distribution& post_jump, double first_rate,
                                             double steady_left_rate, const std::vector<double>& taus) {
  CorrelationCurve c;
  c.tau = taus;
  c.values.reserve(taus.size());
  for (double t : taus) {
    if (t < 0.0) throw PreconditionError("correlation: delays must be >= 0");
    c.values.push_back(left_exit_rate(r, evolve(gen, post_jump, t)) * first_rate);
  }
  c.decorrelated = steady_left_rate * first_rate;
  return c;
}

}  // namespace detail

/// Correlation of two consecutive L- jumps.
inline CorrelationCurve g_ll(const EngineParams& p, const std::vector<double>& taus) {
  const TransitionRates r = rates(p);
  const Generator gen = generator(r);
  const Distribution rho = steady_state(gen);
  const double first = detail::left_exit_rate(r, rho);
  if (!(first > 0.0)) throw DegeneracyError("g_ll: steady L- rate vanishes");
  Distribution post;
  post.p << r.out(Reservoir::L, 0) * rho[State::s10], r.out(Reservoir::L, 1) * rho[State::s11], 0.0, 0.0;
  post.p /= first;
  return detail::propagate_after_jump(gen, r, post, first, first, taus);
}

/// Correlation of an H+ jump followed by an L- jump.
inline CorrelationCurve g_hl(const EngineParams& p, const std::vector<double>& taus) {
  const TransitionRates r = rates(p);
  const Generator gen = generator(r);
  const Distribution rho = steady_state(gen);
  const double first = r.in(Reservoir::H, 0) * rho[State::s00] + r.in(Reservoir::H, 1) * rho[State::s10];
  if (!(first > 0.0)) throw DegeneracyError("g_hl: steady H+ rate vanishes");
  Distribution post;
  post.p << 0.0, r.in(Reservoir::H, 0) * rho[State::s00], 0.0, r.in(Reservoir::H, 1) * rho[State::s10];
  post.p /= first;
  return detail::propagate_after_jump(gen, r, post, first, detail::left_exit_rate(r, rho), taus);
}

struct SpectrumCheck {
  std::array<std::complex<double>, 4> eigenvalues{};  ///< sorted by decreasing real part
  bool all_real = false;
};

inline SpectrumCheck spectrum_is_real(const Generator& gen, double imag_tol = 1e-9) {
  Eigen::EigenSolver<Eigen::Matrix4d> es(gen.entries, false);
  SpectrumCheck s;
  for (int i = 0; i < 4; ++i) s.eigenvalues[i] = es.eigenvalues()(i);
  std::sort(s.eigenvalues.begin(), s.eigenvalues.end(),
            [](auto a, auto b) { return a.real() > b.real(); });
  s.all_real = std::all_of(s.eigenvalues.begin(), s.eigenvalues.end(),
                           [&](auto z) { return std::abs(z.imag()) < imag_tol; });
  return s;
}

/// Slowest nonzero relaxation rate, -Re of the second eigenvalue.
inline double spectral_gap(const Generator& gen) { return -spectrum_is_real(gen).eigenvalues[1].real(); }

}  // namespace qdc
