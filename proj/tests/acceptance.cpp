// Acceptance suite: one PASS/FAIL line per criterion, sub-checks indented
// above it. Exit status is the number of failed criteria (0 = all pass).
// Every ensemble uses base seed 1.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "qdcycles/correlations.hpp"
#include "qdcycles/counting.hpp"
#include "qdcycles/cycles.hpp"
#include "qdcycles/master_dynamics.hpp"
#include "qdcycles/oscillation.hpp"
#include "qdcycles/parallel.hpp"
#include "qdcycles/semi_stochastic.hpp"

namespace {

using namespace qdc;

class Criterion {
 public:
  Criterion(int number, std::string title)
      : number_(number), title_(std::move(title)), start_(std::chrono::steady_clock::now()) {}

  /// Records a sub-check; `detail` is printf-formatted.
  template <class... Args>
  void check(bool ok, const char* detail, Args... args) {
    std::printf("    [%s] ", ok ? "ok" : "FAIL");
    std::printf(detail, args...);
    std::printf("\n");
    ok_ = ok_ && ok;
  }

  template <class... Args>
  void note(const char* detail, Args... args) {
    std::printf("    [info] ");
    std::printf(detail, args...);
    std::printf("\n");
  }

  bool finish() const {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::printf("CRITERION %2d %s: %s (%.1f s)\n\n", number_, ok_ ? "PASS" : "FAIL", title_.c_str(), secs);
    std::fflush(stdout);
    return ok_;
  }

 private:
  int number_;
  std::string title_;
  std::chrono::steady_clock::time_point start_;
  bool ok_ = true;
};

bool within(double value, double target, double tol) { return std::abs(value - target) <= tol; }

bool stall_bias_criterion() {
  Criterion c(1, "stall bias and its cycle estimates");
  const EngineParams p = presets::cycles();
  const double numeric = stall_bias(p, 1e-10);
  const double two = stall_bias_cycle_estimate(p, StallEstimate::TwoCycle, 1e-10);
  const double ext = stall_bias_cycle_estimate(p, StallEstimate::Extended, 1e-10);
  const double nec = stall_bias_cycle_estimate(p, StallEstimate::Necessary);
  c.check(within(numeric, 0.57, 0.02), "root of I_L: %.6f (0.57 +- 0.02)", numeric);
  c.check(within(two, 0.69, 0.01), "two-cycle estimate: %.6f (0.69 +- 0.01)", two);
  c.check(within(ext, 0.62, 0.01), "extended estimate: %.6f (0.62 +- 0.01)", ext);
  c.check(within(nec, 3.33, 0.01), "necessary bound U eta_C: %.6f (3.33 +- 0.01)", nec);
  return c.finish();
}

bool ldf_criterion(unsigned threads) {
  Criterion c(2, "large deviation surface peak");
  const EngineParams p = presets::ldf();
  LdfOptions opts;
  opts.threads = threads;
  opts.seed = 1;
  const auto lambda = centered_grid(100, 0.1);
  const auto xi = centered_grid(100, 0.01);
  const auto t0 = std::chrono::steady_clock::now();
  const auto surface = ldf_surface(p, lambda, xi, opts);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto& peak = surface.peak();
  const double j_scaled = peak.heat / p.coulomb_u;
  c.check(surface.points.size() == 10000, "grid points evaluated: %zu of 10000", surface.points.size());
  c.check(std::abs(peak.current / -2.5e-3 - 1.0) <= 0.05, "I* = %.6e (-2.5e-3 within 5%%)", peak.current);
  c.check(std::abs(j_scaled / 1.6e-2 - 1.0) <= 0.05, "J*/U = %.6e (1.6e-2 within 5%%)", j_scaled);
  c.check(std::abs(peak.rate) <= 1e-8, "R(peak) = %.3e (|R| <= 1e-8)", peak.rate);
  c.check(secs < 60.0, "100x100 surface in %.2f s (< 60 s)", secs);
  c.note("peak at lambda = %g, xi = %g; Richardson deviation %.2e", peak.lambda, peak.xi,
         surface.richardson_deviation);
  return c.finish();
}

/// Rates of C1..C5 and C6 at `x`, 200 trajectories of 2000 time units.
bool histogram_structure_criterion(unsigned threads) {
  Criterion c(3, "cycle histogram structure (200 x 2000)");
  const EnsembleSpec spec{200, 2000.0, 1, State::s00, 0.0};
  constexpr std::array<CycleClass, 5> first_five{CycleClass::C1, CycleClass::C2, CycleClass::C3, CycleClass::C4,
                                                 CycleClass::C5};

  EngineParams p0 = presets::cycles();
  p0.x = 0.0;
  const CycleStats s0 = cycle_stats(p0, spec, threads);
  double worst_z = 0.0;
  std::pair<CycleClass, CycleClass> worst_pair{CycleClass::C1, CycleClass::C1};
  for (std::size_t i = 0; i < first_five.size(); ++i) {
    for (std::size_t j = i + 1; j < first_five.size(); ++j) {
      const CycleClass a = first_five[i], b = first_five[j];
      const double z = std::abs(s0.rate(a) - s0.rate(b)) / std::hypot(s0.rate_error(a), s0.rate_error(b));
      if (z > worst_z) worst_z = z, worst_pair = {a, b};
    }
  }
  for (CycleClass k : first_five) c.note("x = 0: %s rate %.5e +- %.2e", to_string(k).data(), s0.rate(k), s0.rate_error(k));
  c.check(worst_z < 3.0, "x = 0: C1..C5 mutually within 3 SE (worst pair %s/%s at %.2f SE)",
          to_string(worst_pair.first).data(), to_string(worst_pair.second).data(), worst_z);
  double largest = 0.0;
  for (CycleClass k : first_five) largest = std::max(largest, s0.rate(k));
  c.check(s0.rate(CycleClass::C6) > 3.0 * largest, "x = 0: C6 rate %.5e exceeds 3 x %.5e",
          s0.rate(CycleClass::C6), largest);

  const EngineParams p9 = presets::cycles();
  const CycleStats s9 = cycle_stats(p9, spec, threads);
  const double r4 = s9.rate(CycleClass::C4);
  for (CycleClass k : {CycleClass::C1, CycleClass::C2, CycleClass::C5})
    c.check(s9.rate(k) < 0.2 * r4, "x = 0.9: %s rate %.5e < 0.2 r_C4 = %.5e", to_string(k).data(), s9.rate(k),
            0.2 * r4);
  std::vector<std::pair<double, CycleClass>> ranked;
  for (std::size_t i = 0; i < kCycleClassCount; ++i) {
    const auto k = static_cast<CycleClass>(i);
    if (k != CycleClass::Null) ranked.emplace_back(s9.rate(k), k);
  }
  std::sort(ranked.rbegin(), ranked.rend());
  for (std::size_t i = 0; i < 4; ++i)
    c.note("x = 0.9: rank %zu %s rate %.5e", i + 1, to_string(ranked[i].second).data(), ranked[i].first);
  const bool top_two = (ranked[0].second == CycleClass::C6 && ranked[1].second == CycleClass::C4) ||
                       (ranked[0].second == CycleClass::C4 && ranked[1].second == CycleClass::C6);
  c.check(top_two, "x = 0.9: C6 and C4 are the two largest non-null classes (found %s, %s)",
          to_string(ranked[0].second).data(), to_string(ranked[1].second).data());
  return c.finish();
}

bool dft_criterion(const CycleStats& stats) {
  Criterion c(4, "detailed fluctuation theorem per cycle class");
  std::size_t tested = 0;
  for (const auto& row : dft_check(stats, 50)) {
    if (!row.sufficient) {
      c.note("%s: %zu / %zu events, below 50 in a direction", to_string(row.cls).data(), row.forward, row.reverse);
      continue;
    }
    ++tested;
    const double z = std::abs(row.log_ratio - row.dsigma) / row.standard_error;
    c.check(z < 3.0, "%s: ln(r/r_R) = %.4f vs dsigma = %.4f (%.2f SE, n = %zu / %zu)", to_string(row.cls).data(),
            row.log_ratio, row.dsigma, z, row.forward, row.reverse);
  }
  c.check(tested > 0, "%zu classes tested", tested);
  return c.finish();
}

bool ift_criterion(const CycleStats& stats) {
  Criterion c(5, "integral fluctuation theorem");
  const auto ift = ift_check(stats);
  c.check(std::abs(ift.matched.value - 1.0) < 3.0 * ift.matched.error, "<exp(-dsigma)> = %.5f +- %.5f",
          ift.matched.value, ift.matched.error);
  const double hill = ift_hill(stats.params());
  c.check(std::abs(hill - 1.0) < 1e-12, "from Hill rates: %.15f", hill);
  c.note("over every excursion from 00: %.5f +- %.5f", ift.all_segments.value, ift.all_segments.error);
  return c.finish();
}

bool c4_duration_criterion(const CycleStats& stats) {
  Criterion c(6, "C4 duration density and inter-cycle gaps");
  const C4DurationModel model(stats.params());
  c.check(within(model.mode(), 3.0, 0.5), "analytic mode %.4f (3 +- 0.5)", model.mode());

  const auto& h = stats.plain_c4_histogram();
  const auto n = static_cast<double>(h.total());
  double worst = 0.0, worst_left = 0.0;
  std::size_t bins = 0;
  for (std::size_t i = 0; i < h.bins() && h.left(i) + h.width() <= 15.0 + 1e-12; ++i) {
    const double q = model.cdf(h.left(i) + h.width()) - model.cdf(h.left(i));
    const double z = (static_cast<double>(h.count(i)) - n * q) / std::sqrt(n * q * (1.0 - q));
    if (std::abs(z) > std::abs(worst)) worst = z, worst_left = h.left(i);
    ++bins;
  }
  c.check(std::abs(worst) < 3.0, "histogram vs analytic over [0, 15]: %zu bins, worst %.2f SE at tau = %g", bins,
          worst, worst_left);

  const double mean = stats.c4_durations().mean();
  c.check(within(mean, 4.4, 0.3), "mean C4 duration %.4f +- %.4f (4.4 +- 0.3)", mean,
          stats.c4_durations().standard_error());
  c.note("without removed back-and-forth jumps: mean %.4f, analytic %.4f", stats.plain_c4_durations().mean(),
         model.mean());

  const auto& gaps = stats.c4_start_gaps();
  numerics::RunningStats g;
  for (double v : gaps) g.add(v);
  const auto fit = intercycle_gap_stats(gaps, g.mean());
  c.check(std::abs(fit.half_life / 38.0 - 1.0) <= 0.15, "gap half-life %.3f +- %.3f (38 within 15%%)", fit.half_life,
          fit.half_life_error);
  return c.finish();
}

bool hill_criterion(const CycleStats& stats) {
  Criterion c(7, "Hill rate ratio r_C4 / r_C6");
  const double hill = hill_cycle_rates(stats.params()).ratio_c4_c6();
  const auto sim = stats.graph_count_ratio(GraphCycle::C4, GraphCycle::C6);
  c.check(std::abs(sim.value - hill) < 3.0 * sim.error, "loop-erased ratio %.5f +- %.5f vs Hill %.5f (%.2f SE)",
          sim.value, sim.error, hill, std::abs(sim.value - hill) / sim.error);
  const auto anchored = stats.count_ratio(CycleClass::C4, CycleClass::C6);
  c.note("00-anchored class ratio %.5f +- %.5f (diagnostic)", anchored.value, anchored.error);
  return c.finish();
}

bool oscillation_criterion() {
  Criterion c(8, "no coherent oscillations");
  const EngineParams p = presets::cycles();
  const auto spec = spectrum_is_real(generator(rates(p)), 1e-9);
  double max_imag = 0.0;
  for (auto z : spec.eigenvalues) max_imag = std::max(max_imag, std::abs(z.imag()));
  c.check(spec.all_real, "rate-matrix eigenvalues real at the reference point (max |imag| %.2e)", max_imag);

  const ParameterBox box;
  const opt::Domain<4, detail::BoxFeasible> dom{{box.coulomb_u, box.temp_w, box.temp_h, box.delta_mu}, {}};
  RandomStream rng(1);
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 10000; ++k) worst = std::min(worst, discriminant_at(box.at(opt::sample_feasible(dom, rng, 1000000))));
  c.check(worst >= -1e-9, "discriminant over 10^4 feasible draws: min %.6e (>= -1e-9)", worst);

  for (std::size_t i = 0; i < opt::kAllMethods.size(); ++i) {
    const auto m = minimize_discriminant(box, opt::kAllMethods[i], stream_seed(1, i));
    c.check(m.delta_min >= -1e-9, "%s minimum %.6e", opt::to_string(m.method).data(), m.delta_min);
  }

  const auto taus = default_tau_grid();
  const auto ll = g_ll(p, taus);
  const auto hl = g_hl(p, taus);
  c.check(ll.values.front() == 0.0, "g_LL(0) = %.3e", ll.values.front());
  const double ll_dev = std::abs(ll.values.back() / ll.decorrelated - 1.0);
  const double hl_dev = std::abs(hl.values.back() / hl.decorrelated - 1.0);
  c.check(ll_dev < 1e-8, "g_LL(%g) / decorrelated - 1 = %.2e", taus.back(), ll_dev);
  c.check(hl_dev < 1e-8, "g_HL(%g) / decorrelated - 1 = %.2e", taus.back(), hl_dev);
  return c.finish();
}

bool semi_criterion(unsigned threads) {
  Criterion c(9, "semi-stochastic telegraph engine");
  const EngineParams p = presets::semi_stochastic();
  const double bound = max_qin(p);
  c.check(within(bound, 1.14, 0.01), "max q_in = %.6f (1.14 +- 0.01)", bound);
  const SemiEnsemble e = semi_ensemble(p, SemiEnsembleSpec{}, threads);
  c.check(e.qin.mode_bin() == e.qin.bins() - 1, "q_in mode in bin %zu of %zu", e.qin.mode_bin() + 1, e.qin.bins());
  c.check(e.observed_max_qin <= bound + 1e-9, "largest simulated q_in %.9f <= %.9f", e.observed_max_qin, bound);

  const auto master = master_work_occupation(p, e.times, SemiEnsembleSpec{}.hot_rates);
  double worst = 0.0, worst_t = 0.0;
  bool ok = std::abs(e.mean_n_w.front() - master.front()) < 1e-12;  // both start at the same fixed point
  for (std::size_t i = 1; i < e.times.size(); ++i) {
    const double z = std::abs(e.mean_n_w[i] - master[i]) / e.se_n_w[i];
    if (z > worst) worst = z, worst_t = e.times[i];
  }
  ok = ok && worst < 3.0;
  c.check(ok, "ensemble N_w(t) vs 4-state master: %zu times, worst %.2f SE at t = %g", e.times.size(), worst,
          worst_t);
  c.note("%zu cycles; mean power %.5e +- %.1e", e.cycles, e.power.value, e.power.error);
  return c.finish();
}

bool closure_criterion(const CycleStats& stats) {
  Criterion c(10, "cross-oracle closure of current, power and entropy");
  const EngineParams p = presets::cycles();
  const auto o = steady_observables(p);
  const auto intensity = stats.intensity();
  const ValueWithError p_int{p.delta_mu * intensity.value, p.delta_mu * intensity.error};
  const auto p_cyc = stats.power_cycles_with_error();
  c.check(std::abs(p_int.value - o.power) < 3.0 * p_int.error, "delta_mu x intensity %.5e +- %.1e vs master %.5e",
          p_int.value, p_int.error, o.power);
  c.check(std::abs(p_cyc.value - o.power) < 3.0 * p_cyc.error, "cycle power %.5e +- %.1e vs master %.5e",
          p_cyc.value, p_cyc.error, o.power);
  const double combined = std::hypot(p_int.error, p_cyc.error);
  c.check(std::abs(p_int.value - p_cyc.value) < 3.0 * combined, "intensity vs cycle power differ by %.2f SE",
          std::abs(p_int.value - p_cyc.value) / combined);

  // Entropy production over the presets, a bias sweep and random feasible points.
  std::vector<EngineParams> sets{presets::cycles(), presets::ldf(), presets::semi_stochastic()};
  EngineParams x0 = presets::cycles();
  x0.x = 0.0;
  sets.push_back(x0);
  for (double dmu = 0.0; dmu <= 4.0 + 1e-12; dmu += 0.05) sets.push_back(presets::cycles().with_delta_mu(dmu));
  const ParameterBox box;
  const opt::Domain<4, detail::BoxFeasible> dom{{box.coulomb_u, box.temp_w, box.temp_h, box.delta_mu}, {}};
  RandomStream rng(1);
  for (int k = 0; k < 1000; ++k) sets.push_back(box.at(opt::sample_feasible(dom, rng, 1000000)));
  double min_sigma = std::numeric_limits<double>::infinity();
  for (const auto& q : sets) min_sigma = std::min(min_sigma, steady_observables(q).entropy_rate);
  c.check(min_sigma >= 0.0, "entropy production >= 0 on %zu parameter sets (min %.3e)", sets.size(), min_sigma);
  return c.finish();
}

}  // namespace

int main() {
  const unsigned threads = resolve_threads();
  std::printf("acceptance suite, %u threads, seed 1\n\n", threads);
  int failed = 0;
  failed += !stall_bias_criterion();
  failed += !ldf_criterion(threads);
  failed += !histogram_structure_criterion(threads);

  // Criteria 4-7 and 10 share one reference ensemble.
  const CycleStats stats = cycle_stats(presets::cycles(), EnsembleSpec{200, 5000.0, 1, State::s00, 0.0}, threads);
  failed += !dft_criterion(stats);
  failed += !ift_criterion(stats);
  failed += !c4_duration_criterion(stats);
  failed += !hill_criterion(stats);
  failed += !oscillation_criterion();
  failed += !semi_criterion(threads);
  failed += !closure_criterion(stats);
  std::printf("%d of 10 criteria failed\n", failed);
  return failed;
}
