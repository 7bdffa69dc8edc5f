#pragma once

// Full counting statistics. The rate matrix is dressed with a counting field
// lambda for electrons taken from L and xi for energy taken from H; the
// dominant eigenvalue S(lambda, xi) is the scaled cumulant generating
// function of the two counts.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qdcycles/engine_model.hpp"
#include "qdcycles/errors.hpp"
#include "qdcycles/parallel.hpp"
#include "qdcycles/random.hpp"

namespace qdc {

/// Energy attached to an H jump in the dressing.
enum class HeatCounting {
  OccupationResolved,  ///< eps_h + U n_w, the energy actually exchanged
  UniformLevel,        ///< eps_h for every H jump
};

/// L+ entries carry e^{+lambda}, L- entries e^{-lambda}; H+ entries carry
/// e^{-xi q}, H- entries e^{+xi q}. At (0, 0) this is the plain generator.
inline Eigen::Matrix4d counting_generator(const TransitionRates& r, const EngineParams& p, double lambda, double xi,
                                          HeatCounting conv = HeatCounting::OccupationResolved) {
  using R = Reservoir;
  Eigen::Matrix4d m = generator(r).entries;  // diagonal is left undressed
  const double up = std::exp(lambda), down = std::exp(-lambda);
  for (int n = 0; n < 2; ++n) {
    const State empty = make_state(0, n), full = make_state(1, n);
    m(index(full), index(empty)) = r.in(R::L, n) * up + r.in(R::R, n);
    m(index(empty), index(full)) = r.out(R::L, n) * down + r.out(R::R, n);
    const double q = conv == HeatCounting::OccupationResolved ? p.eps_h + p.coulomb_u * n : p.eps_h;
    const State cold = make_state(n, 0), hot = make_state(n, 1);
    m(index(hot), index(cold)) = r.in(R::H, n) * std::exp(-xi * q);
    m(index(cold), index(hot)) = r.out(R::H, n) * std::exp(xi * q);
  }
  return m;
}

inline Eigen::Matrix4d counting_generator(const EngineParams& p, double lambda, double xi,
                                          HeatCounting conv = HeatCounting::OccupationResolved) {
  return counting_generator(rates(p), p, lambda, xi, conv);
}

struct CgfValue {
  double value = 0.0;  ///< S(lambda, xi)
  double gap = 0.0;    ///< distance in real part to the next eigenvalue
  bool degenerate = false;  ///< gap below 1e-10: the dominant eigenvalue is not simple
};

/// Eigenvalue of largest real part of a 4x4 tilted generator.
inline CgfValue dominant_eigenvalue(const Eigen::Matrix4d& m) {
  Eigen::EigenSolver<Eigen::Matrix4d> es(m, false);
  std::array<std::complex<double>, 4> ev;
  for (int i = 0; i < 4; ++i) ev[i] = es.eigenvalues()(i);
  std::sort(ev.begin(), ev.end(), [](auto a, auto b) { return a.real() > b.real(); });
  CgfValue out;
  out.value = ev[0].real();
  out.gap = ev[0].real() - ev[1].real();
  out.degenerate = out.gap < 1e-10;
  return out;
}

inline CgfValue cgf(const EngineParams& p, double lambda, double xi,
                    HeatCounting conv = HeatCounting::OccupationResolved) {
  return dominant_eigenvalue(counting_generator(p, lambda, xi, conv));
}

/// Fields (lambda', xi') at which S takes the same value as at (lambda, xi):
/// time reversal maps the counts to minus themselves weighted by the entropy
/// (beta_W - beta_H) q_H - beta_W delta_mu n_L.
inline std::pair<double, double> conjugate_fields(const EngineParams& p, double lambda, double xi) {
  return {-lambda - p.beta_w() * p.delta_mu, (p.beta_w() - p.beta_h()) - xi};
}

struct LdfPoint {
  double lambda = 0.0;
  double xi = 0.0;
  double s = 0.0;
  double current = 0.0;  ///< I = dS/dlambda: electrons taken from L per time
  double heat = 0.0;     ///< J = -dS/dxi: energy taken from H per time
  double rate = 0.0;     ///< R = S - lambda I + xi J (<= 0)
};

struct LdfSurface {
  std::vector<LdfPoint> points;
  std::vector<std::string> diagnostics;  ///< skipped points and degeneracy notes
  /// Largest |central difference - Richardson extrapolation| over the sampled points.
  double richardson_deviation = 0.0;

  const LdfPoint& peak() const {
    if (points.empty()) throw PreconditionError("ldf surface is empty");
    return *std::max_element(points.begin(), points.end(),
                             [](const LdfPoint& a, const LdfPoint& b) { return a.rate < b.rate; });
  }
};

struct LdfOptions {
  double step = 1e-4;
  HeatCounting convention = HeatCounting::OccupationResolved;
  std::size_t richardson_samples = 5;
  std::uint64_t seed = 1;  ///< picks the Richardson sample points
  unsigned threads = 1;
};

namespace detail {

struct Gradient {
  double d_lambda = 0.0;
  double d_xi = 0.0;
};

inline Gradient central_gradient(const TransitionRates& r, const EngineParams& p, double lambda, double xi,
                                 double h, HeatCounting conv) {
  auto s = [&](double l, double x) { return dominant_eigenvalue(counting_generator(r, p, l, x, conv)).value; };
  return {(s(lambda + h, xi) - s(lambda - h, xi)) / (2.0 * h), (s(lambda, xi + h) - s(lambda, xi - h)) / (2.0 * h)};
}

}  // namespace detail

/// Legendre transform of S over the product grid, by central differences.
inline LdfSurface ldf_surface(const EngineParams& p, const std::vector<double>& lambda_grid,
                              const std::vector<double>& xi_grid, const LdfOptions& opts = {}) {
  if (lambda_grid.empty() || xi_grid.empty()) throw PreconditionError("ldf_surface: empty grid");
  const auto [lmin, lmax] = std::minmax_element(lambda_grid.begin(), lambda_grid.end());
  const auto [xmin, xmax] = std::minmax_element(xi_grid.begin(), xi_grid.end());
  if (*lmin > 0.0 || *lmax < 0.0 || *xmin > 0.0 || *xmax < 0.0)
    throw PreconditionError("ldf_surface: grids must bracket (0, 0)");
  const TransitionRates r = rates(p);
  const std::size_t nl = lambda_grid.size(), nx = xi_grid.size();

  struct Slot {
    LdfPoint point;
    bool ok = false;
    bool degenerate = false;
  };
  auto slots = parallel_map(nl * nx, std::max(1u, opts.threads), [&](std::size_t k) {
    Slot slot;
    const double l = lambda_grid[k / nx], x = xi_grid[k % nx];
    const CgfValue s = dominant_eigenvalue(counting_generator(r, p, l, x, opts.convention));
    const auto g = detail::central_gradient(r, p, l, x, opts.step, opts.convention);
    slot.point = {l, x, s.value, g.d_lambda, -g.d_xi, s.value - l * g.d_lambda - x * g.d_xi};
    slot.ok = std::isfinite(slot.point.s) && std::isfinite(slot.point.current) && std::isfinite(slot.point.heat);
    slot.degenerate = s.degenerate;
    return slot;
  });

  LdfSurface out;
  out.points.reserve(slots.size());
  char buf[160];
  for (const auto& slot : slots) {
    if (!slot.ok) {
      std::snprintf(buf, sizeof buf, "skipped non-finite point lambda=%.17g xi=%.17g", slot.point.lambda,
                    slot.point.xi);
      out.diagnostics.emplace_back(buf);
      continue;
    }
    if (slot.degenerate) {
      std::snprintf(buf, sizeof buf, "dominant eigenvalue not simple at lambda=%.17g xi=%.17g", slot.point.lambda,
                    slot.point.xi);
      out.diagnostics.emplace_back(buf);
    }
    out.points.push_back(slot.point);
  }

  RandomStream rng(opts.seed);
  for (std::size_t i = 0; i < opts.richardson_samples; ++i) {
    const double l = lambda_grid[rng.index(nl)], x = xi_grid[rng.index(nx)];
    const auto coarse = detail::central_gradient(r, p, l, x, opts.step, opts.convention);
    const auto fine = detail::central_gradient(r, p, l, x, 0.5 * opts.step, opts.convention);
    const double rl = (4.0 * fine.d_lambda - coarse.d_lambda) / 3.0;
    const double rx = (4.0 * fine.d_xi - coarse.d_xi) / 3.0;
    out.richardson_deviation =
        std::max({out.richardson_deviation, std::abs(coarse.d_lambda - rl), std::abs(coarse.d_xi - rx)});
  }
  return out;
}

/// n points h * (-(n/2 - 1) .. n/2), which includes 0 exactly.
inline std::vector<double> centered_grid(std::size_t n, double h) {
  std::vector<double> g(n);
  const auto offset = static_cast<long>(n / 2) - 1;
  for (std::size_t i = 0; i < n; ++i) g[i] = h * static_cast<double>(static_cast<long>(i) - offset);
  return g;
}

}  // namespace qdc
