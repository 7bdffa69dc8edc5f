#pragma once

// Cycle decomposition of trajectories anchored at the empty state 00:
// classification, ensemble statistics, fluctuation relations, analytic
// cycle rates from spanning-tree sums and the C4 duration law.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "qdcycles/engine_model.hpp"
#include "qdcycles/errors.hpp"
#include "qdcycles/numerics.hpp"
#include "qdcycles/parallel.hpp"
#include "qdcycles/trajectory.hpp"

namespace qdc {

enum class CycleClass : std::uint8_t {
  C1, C2, C3, C4, C5, C6,
  C1R, C2R, C3R, C4R, C5R, C6R,
  Primed, Null, Other
};

inline constexpr std::size_t kCycleClassCount = 15;

inline constexpr std::array<CycleClass, 6> kCoreCycles{CycleClass::C1, CycleClass::C2, CycleClass::C3,
                                                       CycleClass::C4, CycleClass::C5, CycleClass::C6};

inline constexpr std::size_t class_index(CycleClass c) noexcept { return static_cast<std::size_t>(c); }

inline std::string_view to_string(CycleClass c) noexcept {
  constexpr std::array<std::string_view, kCycleClassCount> names{
      "C1", "C2", "C3", "C4", "C5", "C6", "C1R", "C2R", "C3R", "C4R", "C5R", "C6R",
      "primed", "null", "other"};
  return names[class_index(c)];
}

inline constexpr bool is_canonical(CycleClass c) noexcept { return class_index(c) < 12; }

/// C1 <-> C1R etc.; classes without a canonical sequence map to themselves.
inline constexpr CycleClass reverse_of(CycleClass c) noexcept {
  const auto i = class_index(c);
  if (i >= 12) return c;
  return static_cast<CycleClass>(i < 6 ? i + 6 : i - 6);
}

/// Jump sequence of a canonical class, starting and ending in 00.
inline std::span<const Jump> canonical_sequence(CycleClass c) {
  using J = Jump;
  static const std::array<std::array<J, 4>, 10> four{{
      {J::Lp, J::Hp, J::Rm, J::Hm},  // C1
      {J::Rp, J::Hp, J::Rm, J::Hm},  // C2
      {J::Lp, J::Hp, J::Lm, J::Hm},  // C3
      {J::Rp, J::Hp, J::Lm, J::Hm},  // C4
      {J::Hp, J::Lp, J::Rm, J::Hm},  // C5
      {J::Hp, J::Rp, J::Hm, J::Lm},  // C1R
      {J::Hp, J::Rp, J::Hm, J::Rm},  // C2R
      {J::Hp, J::Lp, J::Hm, J::Lm},  // C3R
      {J::Hp, J::Lp, J::Hm, J::Rm},  // C4R
      {J::Hp, J::Rp, J::Lm, J::Hm},  // C5R
  }};
  static const std::array<J, 2> c6{J::Lp, J::Rm};
  static const std::array<J, 2> c6r{J::Rp, J::Lm};
  const auto i = class_index(c);
  if (i < 5) return four[i];
  if (i == 5) return c6;
  if (i >= 6 && i < 11) return four[i - 1];
  if (i == 11) return c6r;
  throw PreconditionError("canonical_sequence: class has no canonical sequence");
}

struct CycleThermo {
  long dn_l = 0;       ///< electrons into L
  double q_h = 0.0;    ///< heat drawn from H
  double dsigma = 0.0; ///< (beta_W - beta_H) q_H - beta_W delta_mu dn_L
};

/// Tallies along a jump sequence started in `start`. Each H jump carries
/// eps_h + U n_w with n_w taken at the jump.
template <class Labels>
CycleThermo thermo_of(const EngineParams& p, const Labels& labels, State start = State::s00) {
  CycleThermo t;
  State s = start;
  for (Jump j : labels) {
    if (j == Jump::Lm) ++t.dn_l;
    if (j == Jump::Lp) --t.dn_l;
    if (reservoir(j) == Reservoir::H) {
      const double quantum = p.eps_h + p.coulomb_u * work_occupation(s);
      t.q_h += is_entering(j) ? quantum : -quantum;
    }
    const auto next = apply(j, s);
    if (!next) throw PreconditionError("thermo_of: illegal jump sequence");
    s = *next;
  }
  t.dsigma = (p.beta_w() - p.beta_h()) * t.q_h - p.beta_w() * p.delta_mu * static_cast<double>(t.dn_l);
  return t;
}

inline CycleThermo canonical_thermo(const EngineParams& p, CycleClass c) {
  return thermo_of(p, canonical_sequence(c));
}

/// Removes adjacent mutually inverse jumps until none remain.
inline std::vector<Jump> cancel_back_and_forth(std::span<const Jump> labels) {
  std::vector<Jump> out;
  out.reserve(labels.size());
  for (Jump j : labels) {
    if (!out.empty() && out.back() == inverse(j))
      out.pop_back();
    else
      out.push_back(j);
  }
  return out;
}

/// Class of a reduced 00-anchored sequence. Every rotation of a canonical
/// cycle other than the identity starts outside 00, so a direct comparison
/// is the cyclic match.
inline CycleClass classify_reduced(std::span<const Jump> reduced) {
  if (reduced.empty()) return CycleClass::Null;
  for (std::size_t i = 0; i < 12; ++i) {
    const auto c = static_cast<CycleClass>(i);
    const auto seq = canonical_sequence(c);
    if (std::equal(reduced.begin(), reduced.end(), seq.begin(), seq.end())) return c;
  }
  const auto hp = std::count(reduced.begin(), reduced.end(), Jump::Hp);
  const auto hm = std::count(reduced.begin(), reduced.end(), Jump::Hm);
  if (hp == 1 && hm == 1 && reduced.size() > 4) return CycleClass::Primed;
  return CycleClass::Other;
}

struct CycleRecord {
  CycleClass cls = CycleClass::Null;
  double start_time = 0.0;
  double duration = 0.0;
  long dn_l = 0;
  double q_h = 0.0;
  double dsigma = 0.0;
  bool plain = true;  ///< no back-and-forth jumps were removed
};

/// Classifies one excursion 00 -> ... -> 00. Tallies use the raw jumps.
inline CycleRecord classify_segment(const EngineParams& p, const Segment& seg) {
  if (seg.events.empty()) throw PreconditionError("classify_segment: empty segment");
  std::vector<Jump> labels;
  labels.reserve(seg.events.size());
  State s = State::s00;
  for (const auto& e : seg.events) {
    const auto next = apply(e.label, s);
    if (!next) throw PreconditionError("classify_segment: segment does not start in 00");
    s = *next;
    labels.push_back(e.label);
  }
  if (s != State::s00) throw PreconditionError("classify_segment: segment does not end in 00");

  const auto reduced = cancel_back_and_forth(labels);
  const CycleThermo t = thermo_of(p, labels);
  CycleRecord rec;
  rec.cls = classify_reduced(reduced);
  rec.start_time = seg.start_time;
  rec.duration = seg.duration();
  rec.dn_l = t.dn_l;
  rec.q_h = t.q_h;
  rec.dsigma = t.dsigma;
  rec.plain = reduced.size() == labels.size();
  return rec;
}

/// Directed cycles of the rate graph. The four-state loops reuse the class
/// names; C6 and C* are the L+R- loops with the hot dot empty and occupied.
enum class GraphCycle : std::uint8_t { C1, C2, C3, C4, C1R, C2R, C3R, C4R, C6, C6R, Cstar, CstarR };

inline constexpr std::size_t kGraphCycleCount = 12;

inline std::string_view to_string(GraphCycle c) noexcept {
  constexpr std::array<std::string_view, kGraphCycleCount> names{"C1",  "C2",  "C3", "C4",  "C1R", "C2R",
                                                                 "C3R", "C4R", "C6", "C6R", "C*",  "C*R"};
  return names[static_cast<std::size_t>(c)];
}

namespace detail {

/// Identifies a closed loop of distinct states by its orientation and the
/// lead (L or R) used on each work-dot edge.
inline GraphCycle identify_loop(std::span<const Jump> loop, State start) {
  int channel[2] = {-1, -1};  // per hot-dot occupation: 0 = L, 1 = R
  bool forward = false;
  bool entering_at[2] = {false, false};
  State s = start;
  for (Jump j : loop) {
    if (reservoir(j) != Reservoir::H) {
      const int nh = hot_occupation(s);
      if (loop.size() == 2) {
        // L+R- or R+L- on one edge: the loop is named by the entering lead.
        if (is_entering(j)) channel[nh] = reservoir(j) == Reservoir::L ? 0 : 1;
      } else {
        channel[nh] = reservoir(j) == Reservoir::L ? 0 : 1;
        entering_at[nh] = is_entering(j);
      }
    }
    s = *apply(j, s);
  }
  if (loop.size() == 2) {
    const bool occupied = channel[1] >= 0;
    const bool l_first = (occupied ? channel[1] : channel[0]) == 0;
    if (occupied) return l_first ? GraphCycle::Cstar : GraphCycle::CstarR;
    return l_first ? GraphCycle::C6 : GraphCycle::C6R;
  }
  // Forward loops fill the work dot while the hot dot is empty.
  forward = entering_at[0];
  const int a = channel[0], b = channel[1];
  int k = 0;
  if (a == 0 && b == 1) k = 0;       // C1
  else if (a == 1 && b == 1) k = 1;  // C2
  else if (a == 0 && b == 0) k = 2;  // C3
  else k = 3;                        // C4
  return static_cast<GraphCycle>(forward ? k : k + 4);
}

}  // namespace detail

/// Counts of completed graph cycles by loop erasure: the chronological path
/// is kept free of repeated states, and every return to a state already on
/// it closes the loop in between. Immediate reversals along the same
/// channel close no cycle.
inline std::array<std::size_t, kGraphCycleCount> loop_erased_counts(const Trajectory& traj) {
  std::array<std::size_t, kGraphCycleCount> counts{};
  std::vector<State> states{traj.initial_state};
  std::vector<Jump> jumps;
  for (const auto& e : traj.events) {
    const State to = *apply(e.label, states.back());
    const auto it = std::find(states.begin(), states.end(), to);
    if (it == states.end()) {
      states.push_back(to);
      jumps.push_back(e.label);
      continue;
    }
    const auto k = static_cast<std::size_t>(it - states.begin());
    const bool backtrack = k + 2 == states.size() && jumps.back() == inverse(e.label);
    if (!backtrack) {
      std::vector<Jump> loop(jumps.begin() + static_cast<std::ptrdiff_t>(k), jumps.end());
      loop.push_back(e.label);
      ++counts[static_cast<std::size_t>(detail::identify_loop(loop, states[k]))];
    }
    states.resize(k + 1);
    jumps.resize(k);
  }
  return counts;
}

/// Cycle content of a single trajectory.
struct TrajectoryCycles {
  double duration = 0.0;
  std::array<std::size_t, kCycleClassCount> counts{};
  std::array<double, kCycleClassCount> duration_sums{};
  long dn_l_cycles = 0;
  long dn_l_remainder = 0;
  double q_h_cycles = 0.0;
  double q_h_remainder = 0.0;
  double sigma_cycles = 0.0;
  double sigma_remainder = 0.0;
  std::vector<CycleRecord> records;
  std::array<std::size_t, kGraphCycleCount> graph_counts{};
};

inline TrajectoryCycles analyze_trajectory(const EngineParams& p, const Trajectory& traj) {
  TrajectoryCycles out;
  out.duration = traj.duration;
  const Segmentation seg = segment_at_00(traj);
  out.records.reserve(seg.segments.size());
  for (const auto& s : seg.segments) {
    const CycleRecord rec = classify_segment(p, s);
    ++out.counts[class_index(rec.cls)];
    out.duration_sums[class_index(rec.cls)] += rec.duration;
    out.dn_l_cycles += rec.dn_l;
    out.q_h_cycles += rec.q_h;
    out.sigma_cycles += rec.dsigma;
    out.records.push_back(rec);
  }
  auto add_remainder = [&](std::span<const JumpEvent> ev, State start) {
    std::vector<Jump> labels;
    labels.reserve(ev.size());
    for (const auto& e : ev) labels.push_back(e.label);
    const CycleThermo t = thermo_of(p, labels, start);
    out.dn_l_remainder += t.dn_l;
    out.q_h_remainder += t.q_h;
    out.sigma_remainder += t.dsigma;
  };
  add_remainder(seg.leading, traj.initial_state);
  // A non-empty trailing piece always starts from an arrival in 00.
  add_remainder(seg.trailing, State::s00);
  out.graph_counts = loop_erased_counts(traj);
  return out;
}

struct CycleStatsOptions {
  double histogram_bin = 0.25;
  double histogram_max = 50.0;
};

/// Ensemble cycle statistics, merged trajectory by trajectory.
class CycleStats {
 public:
  explicit CycleStats(const EngineParams& p, const CycleStatsOptions& opts = {})
      : params_(p), opts_(opts) {
    const auto bins = static_cast<std::size_t>(std::ceil(opts.histogram_max / opts.histogram_bin));
    for (auto& h : histograms_) h = numerics::Histogram(0.0, opts.histogram_bin, bins);
    plain_c4_histogram_ = numerics::Histogram(0.0, opts.histogram_bin, bins);
  }

  void add(const TrajectoryCycles& t) {
    if (!(t.duration > 0.0)) throw PreconditionError("cycle_stats: trajectory duration must be > 0");
    total_time_ += t.duration;
    per_traj_.push_back({t.duration, t.counts, t.graph_counts, t.dn_l_cycles, t.dn_l_remainder,
                         t.q_h_cycles, t.q_h_remainder, t.sigma_cycles});
    for (std::size_t c = 0; c < kGraphCycleCount; ++c) graph_counts_[c] += t.graph_counts[c];
    for (std::size_t c = 0; c < kCycleClassCount; ++c) {
      counts_[c] += t.counts[c];
      duration_sums_[c] += t.duration_sums[c];
    }
    dn_l_cycles_ += t.dn_l_cycles;
    dn_l_remainder_ += t.dn_l_remainder;
    q_h_cycles_ += t.q_h_cycles;
    q_h_remainder_ += t.q_h_remainder;
    sigma_cycles_ += t.sigma_cycles;
    sigma_remainder_ += t.sigma_remainder;

    const double c4_start_unset = -1.0;
    double last_c4_start = c4_start_unset;
    for (const auto& rec : t.records) {
      histograms_[class_index(rec.cls)].add(rec.duration);
      const double w = std::exp(-rec.dsigma);
      all_segments_ift_.add(w);
      if (is_canonical(rec.cls)) matched_ift_.add(w);
      if (rec.cls == CycleClass::C4) {
        c4_durations_.add(rec.duration);
        if (rec.plain) {
          plain_c4_histogram_.add(rec.duration);
          plain_c4_durations_.add(rec.duration);
        }
        if (last_c4_start != c4_start_unset) c4_gaps_.push_back(rec.start_time - last_c4_start);
        last_c4_start = rec.start_time;
      }
    }
  }

  const EngineParams& params() const { return params_; }
  std::size_t trajectories() const { return per_traj_.size(); }
  double total_time() const { return total_time_; }

  std::size_t count(CycleClass c) const { return counts_[class_index(c)]; }
  std::size_t segments() const {
    std::size_t n = 0;
    for (auto v : counts_) n += v;
    return n;
  }

  double rate(CycleClass c) const { return static_cast<double>(count(c)) / total_time_; }

  /// Standard error of the rate from the spread of per-trajectory counts.
  double rate_error(CycleClass c) const {
    const double r = rate(c);
    const double n = static_cast<double>(per_traj_.size());
    if (n < 2) return 0.0;
    double ss = 0.0;
    for (const auto& s : per_traj_) {
      const double d = static_cast<double>(s.counts[class_index(c)]) - r * s.duration;
      ss += d * d;
    }
    return std::sqrt(n / (n - 1.0) * ss) / total_time_;
  }

  double mean_duration(CycleClass c) const {
    const auto n = count(c);
    return n ? duration_sums_[class_index(c)] / static_cast<double>(n) : 0.0;
  }

  /// count(a) / count(b) with a ratio-estimator error over trajectories.
  ValueWithError count_ratio(CycleClass a, CycleClass b) const {
    return ratio([a](const TrajSummary& s) { return s.counts[class_index(a)]; },
                 [b](const TrajSummary& s) { return s.counts[class_index(b)]; });
  }

  /// Loop-erased completions of a graph cycle.
  std::size_t graph_count(GraphCycle c) const { return graph_counts_[static_cast<std::size_t>(c)]; }
  double graph_rate(GraphCycle c) const { return static_cast<double>(graph_count(c)) / total_time_; }

  ValueWithError graph_count_ratio(GraphCycle a, GraphCycle b) const {
    const auto ia = static_cast<std::size_t>(a), ib = static_cast<std::size_t>(b);
    return ratio([ia](const TrajSummary& s) { return s.graph_counts[ia]; },
                 [ib](const TrajSummary& s) { return s.graph_counts[ib]; });
  }

  /// delta_mu x (electrons into L in closed cycles) per time.
  double power_cycles() const { return params_.delta_mu * static_cast<double>(dn_l_cycles_) / total_time_; }
  double power_remainder() const {
    return params_.delta_mu * static_cast<double>(dn_l_remainder_) / total_time_;
  }
  double entropy_rate_cycles() const { return sigma_cycles_ / total_time_; }
  double entropy_rate_remainder() const { return sigma_remainder_ / total_time_; }
  double heat_rate_cycles() const { return q_h_cycles_ / total_time_; }
  double heat_rate_remainder() const { return q_h_remainder_ / total_time_; }

  /// Ensemble mean of the stochastic intensity with its standard error.
  ValueWithError intensity() const {
    const auto st = per_trajectory([](const TrajSummary& s) {
      return static_cast<double>(s.dn_l_cycles + s.dn_l_remainder) / s.duration;
    });
    return {st.mean(), st.standard_error()};
  }

  ValueWithError power_cycles_with_error() const {
    const double dmu = params_.delta_mu;
    const auto st = per_trajectory(
        [dmu](const TrajSummary& s) { return dmu * static_cast<double>(s.dn_l_cycles) / s.duration; });
    return {power_cycles(), st.standard_error()};
  }

  ValueWithError heat_rate() const {
    const auto st = per_trajectory(
        [](const TrajSummary& s) { return (s.q_h_cycles + s.q_h_remainder) / s.duration; });
    return {st.mean(), st.standard_error()};
  }

  const numerics::Histogram& duration_histogram(CycleClass c) const { return histograms_[class_index(c)]; }
  const numerics::Histogram& plain_c4_histogram() const { return plain_c4_histogram_; }
  const numerics::RunningStats& c4_durations() const { return c4_durations_; }
  const numerics::RunningStats& plain_c4_durations() const { return plain_c4_durations_; }
  const std::vector<double>& c4_start_gaps() const { return c4_gaps_; }
  const numerics::RunningStats& matched_ift_samples() const { return matched_ift_; }
  const numerics::RunningStats& all_segments_ift_samples() const { return all_segments_ift_; }

 private:
  struct TrajSummary {
    double duration;
    std::array<std::size_t, kCycleClassCount> counts;
    std::array<std::size_t, kGraphCycleCount> graph_counts;
    long dn_l_cycles;
    long dn_l_remainder;
    double q_h_cycles;
    double q_h_remainder;
    double sigma_cycles;
  };

  /// Ratio of summed per-trajectory counts; the error is the usual
  /// ratio-estimator one, n/(n-1) sum (a_i - R b_i)^2 / (sum b)^2.
  template <class A, class B>
  ValueWithError ratio(A&& num, B&& den) const {
    double sa = 0.0, sb = 0.0;
    for (const auto& s : per_traj_) {
      sa += static_cast<double>(num(s));
      sb += static_cast<double>(den(s));
    }
    if (sb == 0.0) throw DegeneracyError("count ratio: denominator never observed");
    const double r = sa / sb;
    const double n = static_cast<double>(per_traj_.size());
    double ss = 0.0;
    for (const auto& s : per_traj_) {
      const double d = static_cast<double>(num(s)) - r * static_cast<double>(den(s));
      ss += d * d;
    }
    const double var = n > 1 ? n / (n - 1.0) * ss / (sb * sb) : 0.0;
    return {r, std::sqrt(var)};
  }

  template <class F>
  numerics::RunningStats per_trajectory(F&& f) const {
    numerics::RunningStats st;
    for (const auto& s : per_traj_) st.add(f(s));
    return st;
  }

  EngineParams params_;
  CycleStatsOptions opts_;
  double total_time_ = 0.0;
  std::vector<TrajSummary> per_traj_;
  std::array<std::size_t, kCycleClassCount> counts_{};
  std::array<std::size_t, kGraphCycleCount> graph_counts_{};
  std::array<double, kCycleClassCount> duration_sums_{};
  long dn_l_cycles_ = 0;
  long dn_l_remainder_ = 0;
  double q_h_cycles_ = 0.0;
  double q_h_remainder_ = 0.0;
  double sigma_cycles_ = 0.0;
  double sigma_remainder_ = 0.0;
  std::array<numerics::Histogram, kCycleClassCount> histograms_;
  numerics::Histogram plain_c4_histogram_;
  numerics::RunningStats c4_durations_;
  numerics::RunningStats plain_c4_durations_;
  std::vector<double> c4_gaps_;
  numerics::RunningStats matched_ift_;
  numerics::RunningStats all_segments_ift_;
};

/// Simulates and classifies an ensemble; results are independent of `threads`.
inline CycleStats cycle_stats(const EngineParams& p, const EnsembleSpec& spec, unsigned threads = 1,
                              const CycleStatsOptions& opts = {}) {
  spec.validate();
  const TransitionRates r = rates(p);
  auto per_traj = parallel_map(spec.n_traj, threads, [&](std::size_t i) {
    return analyze_trajectory(p, spec.simulate_one(r, i));
  });
  CycleStats stats(p, opts);
  for (const auto& t : per_traj) stats.add(t);
  return stats;
}

struct DftRow {
  CycleClass cls = CycleClass::C1;
  std::size_t forward = 0;
  std::size_t reverse = 0;
  double log_ratio = std::numeric_limits<double>::quiet_NaN();
  double standard_error = std::numeric_limits<double>::quiet_NaN();  ///< sqrt(1/N + 1/N_R)
  double dsigma = 0.0;
  bool sufficient = false;
};

/// ln(r_C / r_CR) against the cycle entropy for C1..C6. Classes with fewer
/// than `min_count` events in either direction are flagged insufficient.
inline std::vector<DftRow> dft_check(const CycleStats& stats, std::size_t min_count = 1) {
  std::vector<DftRow> rows;
  for (CycleClass c : kCoreCycles) {
    DftRow row;
    row.cls = c;
    row.forward = stats.count(c);
    row.reverse = stats.count(reverse_of(c));
    row.dsigma = canonical_thermo(stats.params(), c).dsigma;
    const std::size_t need = std::max<std::size_t>(min_count, 1);
    row.sufficient = row.forward >= need && row.reverse >= need;
    if (row.forward > 0 && row.reverse > 0) {
      const double nf = static_cast<double>(row.forward), nr = static_cast<double>(row.reverse);
      row.log_ratio = std::log(nf / nr);
      row.standard_error = std::sqrt(1.0 / nf + 1.0 / nr);
    }
    rows.push_back(row);
  }
  return rows;
}

struct IftResult {
  ValueWithError matched;       ///< over the twelve canonical classes
  ValueWithError all_segments;  ///< over every excursion from 00
};

/// Cycle-ensemble average of exp(-dsigma). Excursions from 00 are independent,
/// so the standard error is the sample one.
inline IftResult ift_check(const CycleStats& stats) {
  const auto& m = stats.matched_ift_samples();
  const auto& a = stats.all_segments_ift_samples();
  if (m.count() == 0) throw PreconditionError("ift_check: no canonical cycles observed");
  return {{m.mean(), m.standard_error()}, {a.mean(), a.standard_error()}};
}

// ---------------------------------------------------------------------------
// Analytic cycle rates: r_C = Pi_C Sigma_C / Sigma.

/// Product of rates along `labels` starting from `start`.
inline double path_product(const TransitionRates& r, std::span<const Jump> labels, State start) {
  double prod = 1.0;
  State s = start;
  for (Jump j : labels) {
    prod *= r.rate(j, s);
    const auto next = apply(j, s);
    if (!next) throw PreconditionError("path_product: illegal jump sequence");
    s = *next;
  }
  return prod;
}

/// Sum over all spanning trees directed to any state: the sum of the
/// principal 3x3 minors of -W.
inline double spanning_tree_total(const Generator& gen) {
  const Eigen::Matrix4d lap = -gen.entries;
  double total = 0.0;
  for (int k = 0; k < 4; ++k) {
    Eigen::Matrix3d minor;
    for (int i = 0, a = 0; i < 4; ++i) {
      if (i == k) continue;
      for (int j = 0, b = 0; j < 4; ++j) {
        if (j == k) continue;
        minor(a, b++) = lap(i, j);
      }
      ++a;
    }
    total += minor.determinant();
  }
  return total;
}

struct HillCycleRates {
  double pi_c1 = 0.0;
  double pi_c4 = 0.0;
  double pi_c6 = 0.0;
  double pi_cstar = 0.0;  ///< L+ R- while the hot dot is occupied
  double sigma_c6 = 0.0;
  double sigma_cstar = 0.0;
  double sigma_total = 0.0;

  double ratio_c4_c6() const { return pi_c4 / (pi_c6 * sigma_c6); }
  /// r_C4 / (r_C1 + r_C6 + r_C*).
  double extended_ratio() const { return pi_c4 / (pi_c1 + pi_c6 * sigma_c6 + pi_cstar * sigma_cstar); }
};

inline HillCycleRates hill_cycle_rates(const EngineParams& p) {
  const TransitionRates r = rates(p);
  using R = Reservoir;
  HillCycleRates h;
  h.pi_c1 = r.in(R::L, 0) * r.in(R::H, 1) * r.out(R::R, 1) * r.out(R::H, 0);
  h.pi_c4 = r.in(R::R, 0) * r.in(R::H, 1) * r.out(R::L, 1) * r.out(R::H, 0);
  h.pi_c6 = r.in(R::L, 0) * r.out(R::R, 0);
  h.pi_cstar = r.in(R::L, 1) * r.out(R::R, 1);
  h.sigma_c6 = r.out(R::H, 0) * r.out(R::H, 1) + r.work_out(1) * r.out(R::H, 0) + r.work_in(1) * r.out(R::H, 1);
  h.sigma_cstar = r.in(R::H, 0) * r.in(R::H, 1) + r.work_out(0) * r.in(R::H, 0) + r.work_in(0) * r.in(R::H, 1);
  h.sigma_total = spanning_tree_total(generator(r));
  return h;
}

/// One directed cycle of the rate graph with its stationary completion rate.
struct HillCycle {
  std::string_view name;
  State start = State::s00;
  std::vector<Jump> labels;
  double rate = 0.0;
  CycleThermo thermo;
};

/// All directed cycles of the graph: the four-state loops C1..C4, the
/// two-state loops C6 (hot dot empty) and C* (hot dot occupied), and reverses.
inline std::vector<HillCycle> hill_cycles(const EngineParams& p) {
  const TransitionRates r = rates(p);
  const HillCycleRates h = hill_cycle_rates(p);
  std::vector<HillCycle> out;
  for (CycleClass c : {CycleClass::C1, CycleClass::C2, CycleClass::C3, CycleClass::C4, CycleClass::C1R,
                       CycleClass::C2R, CycleClass::C3R, CycleClass::C4R}) {
    const auto seq = canonical_sequence(c);
    HillCycle hc{to_string(c), State::s00, {seq.begin(), seq.end()}, 0.0, {}};
    hc.rate = path_product(r, seq, State::s00) / h.sigma_total;
    hc.thermo = thermo_of(p, seq);
    out.push_back(std::move(hc));
  }
  auto two_state = [&](std::string_view name, State start, Jump a, Jump b, double sigma_c) {
    const std::array<Jump, 2> seq{a, b};
    HillCycle hc{name, start, {a, b}, path_product(r, seq, start) * sigma_c / h.sigma_total, {}};
    hc.thermo = thermo_of(p, seq, start);
    out.push_back(std::move(hc));
  };
  two_state("C6", State::s00, Jump::Lp, Jump::Rm, h.sigma_c6);
  two_state("C6R", State::s00, Jump::Rp, Jump::Lm, h.sigma_c6);
  two_state("C*", State::s01, Jump::Lp, Jump::Rm, h.sigma_cstar);
  two_state("C*R", State::s01, Jump::Rp, Jump::Lm, h.sigma_cstar);
  return out;
}

/// sum_C r_C exp(-dsigma_C) / sum_C r_C over the analytic cycle rates.
inline double ift_hill(const EngineParams& p) {
  double num = 0.0, den = 0.0;
  for (const auto& c : hill_cycles(p)) {
    num += c.rate * std::exp(-c.thermo.dsigma);
    den += c.rate;
  }
  return num / den;
}

enum class StallEstimate { Necessary, TwoCycle, Extended };

/// Bias below which the engine cycle outweighs the detrimental ones.
inline double stall_bias_cycle_estimate(const EngineParams& p, StallEstimate mode, double tol = 1e-3) {
  p.validate();
  const double necessary = p.coulomb_u * p.carnot();
  if (!(necessary > 0.0)) throw NoStallError("stall estimate: U eta_Carnot <= 0, no engine regime");
  if (mode == StallEstimate::Necessary) return necessary;

  const double bw = p.beta_w(), bh = p.beta_h();
  auto balance = [&](double dmu) {
    const HillCycleRates h = hill_cycle_rates(p.with_delta_mu(dmu));
    const double lhs = mode == StallEstimate::TwoCycle ? h.ratio_c4_c6() : h.extended_ratio();
    const double rhs = -std::expm1(-bw * dmu) / -std::expm1(bw * dmu - (bw - bh) * p.coulomb_u);
    return lhs - rhs;
  };
  const double lo = 1e-9 * necessary;
  const double hi = necessary * (1.0 - 1e-9);
  if (!(balance(lo) > 0.0) || !(balance(hi) < 0.0))
    throw NoStallError("stall estimate: no root in (0, U eta_Carnot)");
  return numerics::bisect(balance, lo, hi, tol);
}

// ---------------------------------------------------------------------------
// Duration of a C4 cycle without back-and-forth jumps, measured from the
// arrival in 00: a sum of four exponential holding times.

class C4DurationModel {
 public:
  explicit C4DurationModel(const EngineParams& p) {
    const TransitionRates r = rates(p);
    using R = Reservoir;
    exit_ = {r.in(R::H, 0) + r.work_in(0), r.in(R::H, 1) + r.work_out(0), r.out(R::H, 1) + r.work_out(1),
             r.out(R::H, 0) + r.work_in(1)};
    const std::array<double, 4> taken{r.in(R::R, 0), r.in(R::H, 1), r.out(R::L, 1), r.out(R::H, 0)};
    weight_ = 1.0;
    for (int i = 0; i < 4; ++i) weight_ *= taken[i] / exit_[i];
    phases_ = Eigen::Matrix4d::Zero();
    for (int i = 0; i < 4; ++i) {
      phases_(i, i) = -exit_[i];
      if (i > 0) phases_(i, i - 1) = exit_[i - 1];
    }
  }

  /// Holding-time rates in 00, 10, 11, 01.
  const std::array<double, 4>& exit_rates() const { return exit_; }

  /// Probability that an excursion from 00 is a C4 cycle without extra jumps.
  double occurrence_probability() const { return weight_; }

  /// Normalized density of the duration.
  double density(double tau) const {
    if (tau < 0.0) return 0.0;
    return exit_[3] * phase_occupation(tau)(3);
  }

  /// Un-normalized density, integrating to occurrence_probability().
  double joint_density(double tau) const { return weight_ * density(tau); }

  double cdf(double tau) const {
    if (tau <= 0.0) return 0.0;
    return 1.0 - phase_occupation(tau).sum();
  }

  double mean() const {
    double m = 0.0;
    for (double k : exit_) m += 1.0 / k;
    return m;
  }

  /// Maximum of the density, by grid search and golden-section refinement.
  double mode() const {
    const double hi = 10.0 * mean();
    const int n = 2000;
    int best = 0;
    double best_v = -1.0;
    for (int i = 0; i <= n; ++i) {
      const double v = density(hi * i / n);
      if (v > best_v) {
        best_v = v;
        best = i;
      }
    }
    double a = hi * std::max(best - 1, 0) / n, b = hi * std::min(best + 1, n) / n;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
      const double c = b - g * (b - a), d = a + g * (b - a);
      if (density(c) > density(d))
        b = d;
      else
        a = c;
    }
    return 0.5 * (a + b);
  }

 private:
  Eigen::Vector4d phase_occupation(double tau) const {
    const Eigen::Matrix4d prop = (phases_ * tau).exp();
    return prop.col(0);
  }

  std::array<double, 4> exit_{};
  double weight_ = 0.0;
  Eigen::Matrix4d phases_;
};

inline double c4_duration_analytic(const EngineParams& p, double tau) {
  if (!(tau > 0.0)) throw PreconditionError("c4_duration_analytic: tau must be > 0");
  return C4DurationModel(p).density(tau);
}

struct GapStats {
  numerics::Histogram histogram;
  double fit_from = 0.0;    ///< only gaps beyond this enter the fit
  double decay_rate = 0.0;  ///< fitted exponential rate
  double decay_rate_error = 0.0;
  double half_life = 0.0;
  double half_life_error = 0.0;
  std::size_t fitted_bins = 0;
};

/// Histogram of gaps and a weighted least-squares line through log counts
/// of the bins that lie entirely beyond `fit_from` and hold >= `min_bin_count`.
inline GapStats intercycle_gap_stats(const std::vector<double>& gaps, double fit_from, double bin_width = 2.0,
                                     std::size_t min_bin_count = 5) {
  if (gaps.size() < 2) throw PreconditionError("intercycle_gap_stats: need at least two gaps");
  if (!(bin_width > 0.0)) throw PreconditionError("intercycle_gap_stats: bin width must be > 0");
  const double top = *std::max_element(gaps.begin(), gaps.end());
  GapStats out;
  out.fit_from = fit_from;
  out.histogram = numerics::Histogram(0.0, bin_width, static_cast<std::size_t>(top / bin_width) + 1);
  for (double g : gaps) out.histogram.add(g);

  double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < out.histogram.bins(); ++i) {
    const auto n = out.histogram.count(i);
    if (out.histogram.left(i) < fit_from || n < min_bin_count) continue;
    const double w = static_cast<double>(n);  // var(log n) ~ 1/n
    const double x = out.histogram.center(i), y = std::log(static_cast<double>(n));
    sw += w;
    sx += w * x;
    sy += w * y;
    sxx += w * x * x;
    sxy += w * x * y;
    ++out.fitted_bins;
  }
  if (out.fitted_bins < 3) throw PreconditionError("intercycle_gap_stats: too few populated bins to fit");
  const double det = sw * sxx - sx * sx;
  const double slope = (sw * sxy - sx * sy) / det;
  out.decay_rate = -slope;
  out.decay_rate_error = std::sqrt(sw / det);
  out.half_life = std::log(2.0) / out.decay_rate;
  out.half_life_error = out.half_life * out.decay_rate_error / out.decay_rate;
  return out;
}

}  // namespace qdc
