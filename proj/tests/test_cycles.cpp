#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "qdcycles/cycles.hpp"
#include "qdcycles/master_dynamics.hpp"

namespace {

using namespace qdc;
using J = Jump;

EngineParams equilibrium() {
  EngineParams p;
  p.delta_mu = 0.0;
  p.temp_h = p.temp_w;
  return p;
}

Segment segment_of(const std::vector<JumpEvent>& ev, double start = 0.0) { return {start, ev}; }

std::vector<JumpEvent> timed(std::initializer_list<Jump> labels) {
  std::vector<JumpEvent> ev;
  double t = 0.0;
  for (Jump j : labels) ev.push_back({t += 1.0, j});
  return ev;
}

/// Shared ensemble for the statistical checks (P*, seed 1).
const CycleStats& reference_stats() {
  static const CycleStats s = cycle_stats(presets::cycles(), EnsembleSpec{200, 5000.0, 1, State::s00, 0.0}, 4);
  return s;
}

TEST(Classify, CanonicalSequencesAreClosedAndMatchThemselves) {
  for (std::size_t i = 0; i < 12; ++i) {
    const auto c = static_cast<CycleClass>(i);
    const auto seq = canonical_sequence(c);
    State s = State::s00;
    for (Jump j : seq) s = *apply(j, s);
    EXPECT_EQ(s, State::s00) << to_string(c);
    EXPECT_EQ(classify_reduced(seq), c);
    EXPECT_EQ(reverse_of(reverse_of(c)), c);
  }
  EXPECT_EQ(reverse_of(CycleClass::Null), CycleClass::Null);
  EXPECT_THROW(canonical_sequence(CycleClass::Primed), PreconditionError);
}

TEST(Classify, EngineCycleThermodynamics) {
  const EngineParams p = presets::cycles();
  const auto ev = timed({J::Rp, J::Hp, J::Lm, J::Hm});
  const CycleRecord r = classify_segment(p, segment_of(ev));
  EXPECT_EQ(r.cls, CycleClass::C4);
  EXPECT_TRUE(r.plain);
  EXPECT_EQ(r.dn_l, 1);
  EXPECT_DOUBLE_EQ(r.q_h, p.coulomb_u);
  EXPECT_NEAR(r.dsigma, (p.beta_w() - p.beta_h()) * p.coulomb_u - p.beta_w() * p.delta_mu, 1e-15);
  EXPECT_DOUBLE_EQ(r.duration, 4.0);
}

TEST(Classify, BackAndForthJumpsCancel) {
  const EngineParams p = presets::cycles();
  const auto ev = timed({J::Rp, J::Hp, J::Hm, J::Hp, J::Lm, J::Lp, J::Lm, J::Hm});
  const CycleRecord r = classify_segment(p, segment_of(ev));
  EXPECT_EQ(r.cls, CycleClass::C4);
  EXPECT_FALSE(r.plain);
  EXPECT_EQ(r.dn_l, 1);
  EXPECT_DOUBLE_EQ(r.q_h, p.coulomb_u);
}

TEST(Classify, NullAndTransportCycles) {
  const EngineParams p = presets::cycles();
  const auto null_ev = timed({J::Lp, J::Lm});
  const auto rn = classify_segment(p, segment_of(null_ev));
  EXPECT_EQ(rn.cls, CycleClass::Null);
  EXPECT_EQ(rn.dn_l, 0);
  EXPECT_DOUBLE_EQ(rn.dsigma, 0.0);

  const auto c6_ev = timed({J::Lp, J::Rm});
  const auto r6 = classify_segment(p, segment_of(c6_ev));
  EXPECT_EQ(r6.cls, CycleClass::C6);
  EXPECT_EQ(r6.dn_l, -1);
  EXPECT_DOUBLE_EQ(r6.q_h, 0.0);
  EXPECT_NEAR(r6.dsigma, p.beta_w() * p.delta_mu, 1e-15);
}

TEST(Classify, PrimedAndOther) {
  const std::vector<Jump> primed{J::Lp, J::Hp, J::Rm, J::Lp, J::Rm, J::Hm};
  EXPECT_EQ(classify_reduced(primed), CycleClass::Primed);
  const auto t = thermo_of(presets::cycles(), primed);
  EXPECT_EQ(t.dn_l, -2);
  const std::vector<Jump> two_transport{J::Lp, J::Rm, J::Lp, J::Rm};
  EXPECT_EQ(classify_reduced(two_transport), CycleClass::Other);
  EXPECT_EQ(classify_reduced(std::vector<Jump>{}), CycleClass::Null);
}

TEST(Classify, RejectsSegmentsNotAnchoredAtEmptyState) {
  const auto ev = timed({J::Lm, J::Lp});
  EXPECT_THROW(classify_segment(presets::cycles(), segment_of(ev)), PreconditionError);
  const auto open = timed({J::Lp, J::Hp});
  EXPECT_THROW(classify_segment(presets::cycles(), segment_of(open)), PreconditionError);
}

TEST(Thermo, ReverseCyclesNegateAllTallies) {
  const EngineParams p = presets::cycles();
  for (CycleClass c : kCoreCycles) {
    const auto f = canonical_thermo(p, c), r = canonical_thermo(p, reverse_of(c));
    EXPECT_EQ(f.dn_l, -r.dn_l) << to_string(c);
    EXPECT_NEAR(f.q_h, -r.q_h, 1e-15);
    EXPECT_NEAR(f.dsigma, -r.dsigma, 1e-15);
  }
}

TEST(Thermo, EntropyIsLogRatioOfPathWeights) {
  // Local detailed balance: for any closed path, ln(forward / reversed rate
  // products) equals the entropy tally. Checked on random closed walks.
  for (EngineParams p : {presets::cycles(), presets::ldf()}) {
    p.eps_h = 0.3;
    const TransitionRates r = rates(p);
    RandomStream rng(99);
    for (int k = 0; k < 200; ++k) {
      std::vector<Jump> path;
      State s = State::s00;
      do {
        Jump j;
        do j = kAllJumps[rng.index(6)];
        while (!apply(j, s));
        path.push_back(j);
        s = *apply(j, s);
      } while (s != State::s00 || path.size() < 2);
      std::vector<Jump> back;
      for (auto it = path.rbegin(); it != path.rend(); ++it) back.push_back(inverse(*it));
      const double lr = std::log(path_product(r, path, State::s00) / path_product(r, back, State::s00));
      EXPECT_NEAR(lr, thermo_of(p, path).dsigma, 1e-10);
    }
  }
}

TEST(Dft, LogRatiosMatchEntropyWithinThreeStandardErrors) {
  const auto rows = dft_check(reference_stats(), 50);
  ASSERT_EQ(rows.size(), 6u);
  for (const auto& row : rows) {
    ASSERT_TRUE(row.sufficient) << to_string(row.cls);
    EXPECT_LT(std::abs(row.log_ratio - row.dsigma), 3.0 * row.standard_error) << to_string(row.cls);
  }
}

TEST(Ift, EnsembleAverageIsOne) {
  const auto r = ift_check(reference_stats());
  EXPECT_LT(std::abs(r.matched.value - 1.0), 3.0 * r.matched.error);
  EXPECT_LT(std::abs(r.all_segments.value - 1.0), 3.0 * r.all_segments.error);
}

TEST(Ift, ExactForAnalyticRates) {
  EXPECT_NEAR(ift_hill(presets::cycles()), 1.0, 1e-12);
  EXPECT_NEAR(ift_hill(presets::ldf()), 1.0, 1e-12);
}

TEST(Hill, CycleFluxesReproduceSteadyCurrents) {
  for (EngineParams p : {presets::cycles(), presets::ldf(), equilibrium()}) {
    double il = 0.0, jh = 0.0, sigma = 0.0;
    for (const auto& c : hill_cycles(p)) {
      il += c.rate * static_cast<double>(c.thermo.dn_l);
      jh += c.rate * c.thermo.q_h;
      sigma += c.rate * c.thermo.dsigma;
    }
    const auto o = steady_observables(p);
    EXPECT_NEAR(il, o.current_l, 1e-14);
    EXPECT_NEAR(jh, o.heat_h, 1e-14);
    EXPECT_NEAR(sigma, o.entropy_rate, 1e-13);
  }
}

TEST(Hill, SteadyStateFromSpanningTrees) {
  const Generator g = generator(presets::cycles());
  const Eigen::Matrix4d lap = -g.entries;
  const double total = spanning_tree_total(g);
  const Distribution rho = steady_state(g);
  for (int k = 0; k < 4; ++k) {
    Eigen::Matrix3d minor;
    for (int i = 0, a = 0; i < 4; ++i) {
      if (i == k) continue;
      for (int j = 0, b = 0; j < 4; ++j)
        if (j != k) minor(a, b++) = lap(i, j);
      ++a;
    }
    EXPECT_NEAR(minor.determinant() / total, rho.p(k), 1e-14);
  }
}

TEST(Hill, ForwardAndReverseBalanceAtEquilibrium) {
  const auto cycles = hill_cycles(equilibrium());
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(cycles[i].rate / cycles[i + 4].rate, 1.0, 1e-12);
  for (std::size_t i = 8; i < 12; i += 2) EXPECT_NEAR(cycles[i].rate / cycles[i + 1].rate, 1.0, 1e-12);
}

TEST(Hill, LoopErasedCountsMatchAnalyticRates) {
  const auto& s = reference_stats();
  const auto cycles = hill_cycles(presets::cycles());
  for (std::size_t i = 0; i < kGraphCycleCount; ++i) {
    const auto g = static_cast<GraphCycle>(i);
    EXPECT_EQ(cycles[i].name, to_string(g));
    const double n = static_cast<double>(s.graph_count(g));
    const double expected = cycles[i].rate * s.total_time();
    EXPECT_LT(std::abs(n - expected), 4.0 * std::sqrt(expected)) << to_string(g);
  }
  const auto r = s.graph_count_ratio(GraphCycle::C4, GraphCycle::C6);
  EXPECT_LT(std::abs(r.value - hill_cycle_rates(presets::cycles()).ratio_c4_c6()), 3.0 * r.error);
}

TEST(Hill, LoopErasureOnHandMadePath) {
  Trajectory t;
  t.duration = 20.0;
  t.events = timed({J::Rp, J::Hp, J::Lm, J::Hm,   // C4
                    J::Lp, J::Lm,                 // backtrack: no cycle
                    J::Lp, J::Rm,                 // C6
                    J::Hp, J::Rp, J::Lm, J::Hm}); // C*R inside an excursion, then H- backtrack
  const auto counts = loop_erased_counts(t);
  EXPECT_EQ(counts[static_cast<std::size_t>(GraphCycle::C4)], 1u);
  EXPECT_EQ(counts[static_cast<std::size_t>(GraphCycle::C6)], 1u);
  EXPECT_EQ(counts[static_cast<std::size_t>(GraphCycle::CstarR)], 1u);
  std::size_t total = 0;
  for (auto c : counts) total += c;
  EXPECT_EQ(total, 3u);
}

TEST(Stats, IndependentOfThreadCount) {
  const EnsembleSpec spec{12, 500.0, 7, State::s00, 0.0};
  const auto a = cycle_stats(presets::cycles(), spec, 1);
  const auto b = cycle_stats(presets::cycles(), spec, 4);
  for (std::size_t i = 0; i < kCycleClassCount; ++i) {
    const auto c = static_cast<CycleClass>(i);
    EXPECT_EQ(a.count(c), b.count(c));
  }
  EXPECT_EQ(a.c4_start_gaps(), b.c4_start_gaps());
}

TEST(Stats, CyclePlusRemainderIsTheWholePath) {
  const auto& s = reference_stats();
  const auto o = steady_observables(presets::cycles());
  const auto in = s.intensity();
  EXPECT_NEAR(s.power_cycles() + s.power_remainder(), presets::cycles().delta_mu * in.value, 1e-15);
  EXPECT_LT(std::abs(in.value - o.current_l), 3.0 * in.error);
}

TEST(StallEstimates, ReferenceValues) {
  const EngineParams p = presets::cycles();
  // mpmath, 40 digits (tests/oracles/reference_values.py)
  EXPECT_NEAR(stall_bias_cycle_estimate(p, StallEstimate::TwoCycle, 1e-12), 0.69423580911275619181, 1e-10);
  EXPECT_NEAR(stall_bias_cycle_estimate(p, StallEstimate::Extended, 1e-12), 0.62380071953093259514, 1e-10);
  EXPECT_NEAR(stall_bias_cycle_estimate(p, StallEstimate::Necessary), 10.0 / 3.0, 1e-12);
  // Ordering: the exact stall bias lies below both cycle estimates.
  EXPECT_LT(stall_bias(p), stall_bias_cycle_estimate(p, StallEstimate::Extended, 1e-12));
}

TEST(StallEstimates, NoEngineRegime) {
  EngineParams p = presets::cycles();
  p.temp_h = p.temp_w;
  EXPECT_THROW(stall_bias_cycle_estimate(p, StallEstimate::TwoCycle), NoStallError);
}

TEST(C4Duration, MatchesQuadratureOracle) {
  const C4DurationModel m(presets::cycles());
  // mpmath nested quadrature at 15 digits (tests/oracles/reference_values.py)
  EXPECT_NEAR(m.joint_density(1.0) / 0.00353227496907042, 1.0, 1e-12);
  EXPECT_NEAR(m.joint_density(3.0) / 0.00796206481590567, 1.0, 1e-12);
  EXPECT_NEAR(m.joint_density(8.0) / 0.000430489459965063, 1.0, 1e-12);
}

TEST(C4Duration, NormalizedWithConsistentMomentsAndMode) {
  const C4DurationModel m(presets::cycles());
  const int n = 20000;
  const double hi = 200.0, h = hi / n;
  double norm = 0.0, first = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double t = h * i, w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    norm += w * m.density(t);
    first += w * t * m.density(t);
  }
  EXPECT_NEAR(norm * h / 3.0, 1.0, 1e-9);
  EXPECT_NEAR(first * h / 3.0, m.mean(), 1e-8);
  EXPECT_NEAR(m.cdf(5.0), [&] {
    double s = 0.0;
    const int k = 2000;
    for (int i = 0; i <= k; ++i) s += ((i == 0 || i == k) ? 1.0 : (i % 2 ? 4.0 : 2.0)) * m.density(5.0 * i / k);
    return s * 5.0 / k / 3.0;
  }(), 1e-10);
  const double mode = m.mode();
  EXPECT_GT(m.density(mode), m.density(mode - 1e-3));
  EXPECT_GT(m.density(mode), m.density(mode + 1e-3));
  EXPECT_EQ(m.density(-1.0), 0.0);
  EXPECT_THROW(c4_duration_analytic(presets::cycles(), 0.0), PreconditionError);
}

TEST(C4Duration, OccurrenceProbabilityMatchesSimulation) {
  const auto& s = reference_stats();
  const double n = static_cast<double>(s.plain_c4_durations().count());
  const double segments = static_cast<double>(s.segments());
  const double p = C4DurationModel(presets::cycles()).occurrence_probability();
  EXPECT_LT(std::abs(n / segments - p), 4.0 * std::sqrt(p * (1.0 - p) / segments));
  EXPECT_LT(std::abs(s.plain_c4_durations().mean() - C4DurationModel(presets::cycles()).mean()),
            3.0 * s.plain_c4_durations().standard_error());
}

TEST(Gaps, FitRecoversExponentialRate) {
  RandomStream rng(4);
  std::vector<double> gaps;
  for (int i = 0; i < 20000; ++i) gaps.push_back(rng.exponential(0.02));
  const auto g = intercycle_gap_stats(gaps, 0.0);
  EXPECT_LT(std::abs(g.decay_rate - 0.02), 3.0 * g.decay_rate_error);
  EXPECT_NEAR(g.half_life, std::log(2.0) / 0.02, 3.0 * g.half_life_error);
  EXPECT_GE(g.fitted_bins, 3u);
  EXPECT_THROW(intercycle_gap_stats({1.0}, 0.0), PreconditionError);
}

}  // namespace
