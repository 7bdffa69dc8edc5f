#pragma once

// Derivative-free minimizers over a box with an extra feasibility predicate.
// Infeasible candidates are rejected outright (never evaluated); there is no
// penalty term.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "qdcycles/errors.hpp"
#include "qdcycles/random.hpp"

namespace qdc::opt {

enum class Method { NelderMead, DifferentialEvolution, SimulatedAnnealing, RandomSearch };

inline constexpr std::array<Method, 4> kAllMethods{Method::NelderMead, Method::DifferentialEvolution,
                                                   Method::SimulatedAnnealing, Method::RandomSearch};

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::NelderMead: return "nelder_mead";
    case Method::DifferentialEvolution: return "differential_evolution";
    case Method::SimulatedAnnealing: return "simulated_annealing";
    case Method::RandomSearch: return "random_search";
  }
  return "unknown";
}

struct Settings {
  int nm_restarts = 16;
  int nm_max_evaluations = 3000;  // per restart
  double nm_tolerance = 1e-15;    // spread of simplex values
  int de_population = 40;
  int de_generations = 300;
  double de_weight = 0.8;
  double de_crossover = 0.9;
  int sa_steps = 10000;
  double sa_step_fraction = 0.05;  // Gaussian proposal sigma as a fraction of box width
  double sa_final_temperature_ratio = 1e-6;
  int random_samples = 10000;
  int max_sampling_attempts = 1000000;
};

template <std::size_t N>
using Point = std::array<double, N>;

template <std::size_t N>
struct Result {
  Method method = Method::RandomSearch;
  Point<N> best{};
  double value = std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
};

/// Box [lo_i, hi_i] plus an arbitrary feasibility predicate.
template <std::size_t N, class Feasible>
struct Domain {
  std::array<std::pair<double, double>, N> bounds;
  Feasible feasible;

  bool inside(const Point<N>& z) const {
    for (std::size_t i = 0; i < N; ++i)
      if (!(z[i] >= bounds[i].first && z[i] <= bounds[i].second)) return false;
    return feasible(z);
  }

  double width(std::size_t i) const { return bounds[i].second - bounds[i].first; }
};

template <std::size_t N, class Feasible>
Point<N> sample_feasible(const Domain<N, Feasible>& dom, RandomStream& rng, int max_attempts) {
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Point<N> z;
    for (std::size_t i = 0; i < N; ++i) z[i] = rng.uniform(dom.bounds[i].first, dom.bounds[i].second);
    if (dom.inside(z)) return z;
  }
  throw ConfigError("bounds", 0, "no feasible point found inside the parameter box");
}

namespace detail {

template <std::size_t N, class F, class Feasible>
class Counted {
 public:
  Counted(F& f, const Domain<N, Feasible>& dom) : f_(f), dom_(dom) {}

  /// +inf for infeasible points, which are not passed to the objective.
  double operator()(const Point<N>& z) {
    if (!dom_.inside(z)) return std::numeric_limits<double>::infinity();
    ++count;
    return f_(z);
  }

  std::size_t count = 0;

 private:
  F& f_;
  const Domain<N, Feasible>& dom_;
};

template <std::size_t N>
void keep_best(Result<N>& r, const Point<N>& z, double v) {
  if (v < r.value) {
    r.value = v;
    r.best = z;
  }
}

}  // namespace detail

template <std::size_t N, class F, class Feasible>
Result<N> nelder_mead(F&& f, const Domain<N, Feasible>& dom, RandomStream& rng, const Settings& s) {
  Result<N> res;
  res.method = Method::NelderMead;
  detail::Counted<N, std::remove_reference_t<F>, Feasible> obj(f, dom);
  constexpr std::size_t M = N + 1;

  for (int restart = 0; restart < s.nm_restarts; ++restart) {
    // Random feasible simplex: a feasible anchor plus feasible perturbations.
    std::array<Point<N>, M> x;
    std::array<double, M> fx;
    x[0] = sample_feasible(dom, rng, s.max_sampling_attempts);
    for (std::size_t k = 1; k < M; ++k) {
      Point<N> z = x[0];
      double step = 0.05;
      for (int attempt = 0; attempt < 64; ++attempt) {
        z = x[0];
        z[k - 1] += step * dom.width(k - 1) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        if (dom.inside(z)) break;
        step *= 0.5;
      }
      x[k] = z;
    }
    for (std::size_t k = 0; k < M; ++k) fx[k] = obj(x[k]);

    const std::size_t budget = obj.count + static_cast<std::size_t>(s.nm_max_evaluations);
    std::array<std::size_t, M> order;
    // Rejected points are free, so iterations are capped separately.
    for (int iter = 0; iter < s.nm_max_evaluations && obj.count < budget; ++iter) {
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](auto a, auto b) { return fx[a] < fx[b]; });
      const std::size_t best = order[0], worst = order[N], second = order[N - 1];
      if (std::isfinite(fx[worst]) && fx[worst] - fx[best] <= s.nm_tolerance) break;

      Point<N> centroid{};
      for (std::size_t k = 0; k < M; ++k) {
        if (k == worst) continue;
        for (std::size_t i = 0; i < N; ++i) centroid[i] += x[k][i] / static_cast<double>(N);
      }
      auto along = [&](double t) {
        Point<N> z;
        for (std::size_t i = 0; i < N; ++i) z[i] = centroid[i] + t * (x[worst][i] - centroid[i]);
        return z;
      };

      const Point<N> xr = along(-1.0);
      const double fr = obj(xr);
      if (fr < fx[best]) {
        const Point<N> xe = along(-2.0);
        const double fe = obj(xe);
        if (fe < fr) {
          x[worst] = xe;
          fx[worst] = fe;
        } else {
          x[worst] = xr;
          fx[worst] = fr;
        }
        continue;
      }
      if (fr < fx[second]) {
        x[worst] = xr;
        fx[worst] = fr;
        continue;
      }
      const bool outside = fr < fx[worst];
      const Point<N> xc = along(outside ? -0.5 : 0.5);
      const double fc = obj(xc);
      if (fc < (outside ? fr : fx[worst])) {
        x[worst] = xc;
        fx[worst] = fc;
        continue;
      }
      // Shrink towards the best vertex; the box and feasible set are not convex
      // in general, so shrunk vertices are re-evaluated like any other point.
      for (std::size_t k = 0; k < M; ++k) {
        if (k == best) continue;
        for (std::size_t i = 0; i < N; ++i) x[k][i] = x[best][i] + 0.5 * (x[k][i] - x[best][i]);
        fx[k] = obj(x[k]);
      }
    }
    for (std::size_t k = 0; k < M; ++k)
      if (std::isfinite(fx[k])) detail::keep_best(res, x[k], fx[k]);
  }
  res.evaluations = obj.count;
  return res;
}

/// DE/rand/1/bin. A trial vector that leaves the feasible set is discarded.
template <std::size_t N, class F, class Feasible>
Result<N> differential_evolution(F&& f, const Domain<N, Feasible>& dom, RandomStream& rng,
                                 const Settings& s) {
  Result<N> res;
  res.method = Method::DifferentialEvolution;
  detail::Counted<N, std::remove_reference_t<F>, Feasible> obj(f, dom);
  const auto np = static_cast<std::size_t>(std::max(s.de_population, 4));

  std::vector<Point<N>> pop(np);
  std::vector<double> fit(np);
  for (std::size_t k = 0; k < np; ++k) {
    pop[k] = sample_feasible(dom, rng, s.max_sampling_attempts);
    fit[k] = obj(pop[k]);
  }
  for (int gen = 0; gen < s.de_generations; ++gen) {
    for (std::size_t k = 0; k < np; ++k) {
      std::size_t a, b, c;
      do a = rng.index(np); while (a == k);
      do b = rng.index(np); while (b == k || b == a);
      do c = rng.index(np); while (c == k || c == a || c == b);
      const std::size_t forced = rng.index(N);
      Point<N> trial = pop[k];
      for (std::size_t i = 0; i < N; ++i)
        if (i == forced || rng.uniform() < s.de_crossover)
          trial[i] = pop[a][i] + s.de_weight * (pop[b][i] - pop[c][i]);
      if (!dom.inside(trial)) continue;
      const double ft = obj(trial);
      if (ft <= fit[k]) {
        pop[k] = trial;
        fit[k] = ft;
      }
    }
  }
  for (std::size_t k = 0; k < np; ++k) detail::keep_best(res, pop[k], fit[k]);
  res.evaluations = obj.count;
  return res;
}

/// Metropolis walk with Gaussian proposals and geometric cooling.
template <std::size_t N, class F, class Feasible>
Result<N> simulated_annealing(F&& f, const Domain<N, Feasible>& dom, RandomStream& rng,
                              const Settings& s) {
  Result<N> res;
  res.method = Method::SimulatedAnnealing;
  detail::Counted<N, std::remove_reference_t<F>, Feasible> obj(f, dom);

  Point<N> x = sample_feasible(dom, rng, s.max_sampling_attempts);
  double fx = obj(x);
  detail::keep_best(res, x, fx);
  const double t0 = std::max(std::abs(fx), 1e-12);
  const int steps = std::max(s.sa_steps, 1);
  const double cooling = std::pow(s.sa_final_temperature_ratio, 1.0 / steps);
  double temperature = t0;

  for (int step = 0; step < steps; ++step, temperature *= cooling) {
    Point<N> y = x;
    for (std::size_t i = 0; i < N; ++i) y[i] += s.sa_step_fraction * dom.width(i) * rng.normal();
    if (!dom.inside(y)) continue;
    const double fy = obj(y);
    if (fy <= fx || rng.uniform() < std::exp(-(fy - fx) / temperature)) {
      x = y;
      fx = fy;
      detail::keep_best(res, x, fx);
    }
  }
  res.evaluations = obj.count;
  return res;
}

template <std::size_t N, class F, class Feasible>
Result<N> random_search(F&& f, const Domain<N, Feasible>& dom, RandomStream& rng, const Settings& s) {
  Result<N> res;
  res.method = Method::RandomSearch;
  detail::Counted<N, std::remove_reference_t<F>, Feasible> obj(f, dom);
  for (int k = 0; k < s.random_samples; ++k) {
    const Point<N> z = sample_feasible(dom, rng, s.max_sampling_attempts);
    detail::keep_best(res, z, obj(z));
  }
  res.evaluations = obj.count;
  return res;
}

template <std::size_t N, class F, class Feasible>
Result<N> minimize(Method m, F&& f, const Domain<N, Feasible>& dom, RandomStream& rng,
                   const Settings& s) {
  switch (m) {
    case Method::NelderMead: return nelder_mead(f, dom, rng, s);
    case Method::DifferentialEvolution: return differential_evolution(f, dom, rng, s);
    case Method::SimulatedAnnealing: return simulated_annealing(f, dom, rng, s);
    case Method::RandomSearch: return random_search(f, dom, rng, s);
  }
  throw PreconditionError("minimize: unknown method");
}

}  // namespace qdc::opt
