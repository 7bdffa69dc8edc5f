#pragma once

// Exact continuous-time unraveling of the four-state Markov chain.

#include <array>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <vector>

#include "qdcycles/engine_model.hpp"
#include "qdcycles/errors.hpp"
#include "qdcycles/random.hpp"

namespace qdc {

struct JumpEvent {
  double time = 0.0;
  Jump label = Jump::Lp;

  friend bool operator==(const JumpEvent&, const JumpEvent&) = default;
};

struct Trajectory {
  State initial_state = State::s00;
  std::vector<JumpEvent> events;
  double duration = 0.0;
  std::uint64_t seed = 0;

  /// Throws PreconditionError if times are not increasing or a jump is illegal.
  void validate() const {
    State s = initial_state;
    double last = 0.0;
    for (const auto& e : events) {
      if (!(e.time > last || (last == 0.0 && e.time >= 0.0)) || e.time > duration)
        throw PreconditionError("trajectory: event times must increase within the duration");
      const auto next = apply(e.label, s);
      if (!next) throw PreconditionError("trajectory: illegal jump");
      s = *next;
      last = e.time;
    }
  }

  State final_state() const {
    State s = initial_state;
    for (const auto& e : events) s = *apply(e.label, s);
    return s;
  }
};

/// Per-state jump table built once from the rates.
class JumpTable {
 public:
  explicit JumpTable(const TransitionRates& r) {
    for (int s = 0; s < 4; ++s) {
      double total = 0.0;
      for (std::size_t k = 0; k < kAllJumps.size(); ++k) {
        total += r.rate(kAllJumps[k], static_cast<State>(s));
        cumulative_[s][k] = total;
      }
      exit_[s] = total;
    }
  }

  double exit_rate(State s) const { return exit_[index(s)]; }

  /// Channel for a uniform draw u in (0, 1), proportional to its rate.
  Jump pick(State s, double u) const {
    const double target = u * exit_[index(s)];
    const auto& cum = cumulative_[index(s)];
    for (std::size_t k = 0; k < kAllJumps.size(); ++k)
      if (target < cum[k] && (k == 0 || cum[k] > cum[k - 1])) return kAllJumps[k];
    // target == total up to round-off: last channel with positive rate
    for (std::size_t k = kAllJumps.size(); k-- > 0;)
      if (k == 0 || cum[k] > cum[k - 1]) return kAllJumps[k];
    return kAllJumps[0];
  }

 private:
  std::array<std::array<double, 6>, 4> cumulative_{};
  std::array<double, 4> exit_{};
};

struct SimulationOptions {
  /// Time simulated and discarded before recording starts; the recorded
  /// trajectory then starts from whatever state the burn-in reached.
  double burn_in = 0.0;
};

/// Gillespie sampling up to `duration`, deterministic in `seed`.
inline Trajectory simulate(const TransitionRates& r, State initial, double duration, std::uint64_t seed,
                           const SimulationOptions& opts = {}) {
  if (!(duration > 0.0)) throw PreconditionError("simulate: duration must be > 0");
  const JumpTable table(r);
  RandomStream rng(seed);

  State s = initial;
  for (double t = 0.0;;) {
    if (!(opts.burn_in > 0.0)) break;
    const double k = table.exit_rate(s);
    if (!(k > 0.0)) break;
    t += rng.exponential(k);
    if (t > opts.burn_in) break;
    s = *apply(table.pick(s, rng.uniform()), s);
  }

  Trajectory traj;
  traj.initial_state = s;
  traj.duration = duration;
  traj.seed = seed;
  traj.events.reserve(static_cast<std::size_t>(duration * 2.0) + 16);
  double t = 0.0;
  for (;;) {
    const double k = table.exit_rate(s);
    if (!(k > 0.0)) break;
    t += rng.exponential(k);
    if (t > duration) break;
    const Jump j = table.pick(s, rng.uniform());
    traj.events.push_back({t, j});
    s = *apply(j, s);
  }
  return traj;
}

inline Trajectory simulate(const EngineParams& p, State initial, double duration, std::uint64_t seed,
                           const SimulationOptions& opts = {}) {
  return simulate(rates(p), initial, duration, seed, opts);
}

/// Independent trajectories of equal length; trajectory i uses stream_seed(base_seed, i).
struct EnsembleSpec {
  std::size_t n_traj = 200;
  double duration = 2000.0;
  std::uint64_t base_seed = 1;
  State initial_state = State::s00;
  double burn_in = 0.0;

  void validate() const {
    if (n_traj < 1) throw PreconditionError("ensemble: n_traj must be >= 1");
    if (!(duration > 0.0)) throw PreconditionError("ensemble: duration must be > 0");
    if (!(burn_in >= 0.0)) throw PreconditionError("ensemble: burn_in must be >= 0");
  }

  Trajectory simulate_one(const TransitionRates& r, std::size_t i) const {
    return simulate(r, initial_state, duration, stream_seed(base_seed, i), SimulationOptions{burn_in});
  }
};

/// Net electrons delivered to L per unit time, (#L- - #L+) / duration.
inline double stochastic_intensity(const Trajectory& traj) {
  long net = 0;
  for (const auto& e : traj.events) {
    if (e.label == Jump::Lm) ++net;
    if (e.label == Jump::Lp) --net;
  }
  return static_cast<double>(net) / traj.duration;
}

/// Total time spent in each state.
inline std::array<double, 4> residence_times(const Trajectory& traj) {
  std::array<double, 4> out{};
  State s = traj.initial_state;
  double last = 0.0;
  for (const auto& e : traj.events) {
    out[index(s)] += e.time - last;
    last = e.time;
    s = *apply(e.label, s);
  }
  out[index(s)] += traj.duration - last;
  return out;
}

/// Closed excursion 00 -> ... -> 00.
struct Segment {
  double start_time = 0.0;  ///< time the excursion leaves 00 is events.front().time
  std::span<const JumpEvent> events;

  double end_time() const { return events.back().time; }
  /// Duration measured from the arrival in 00 to the return to 00.
  double duration() const { return end_time() - start_time; }
};

struct Segmentation {
  std::span<const JumpEvent> leading;   ///< jumps before the first arrival in 00
  std::vector<Segment> segments;
  std::span<const JumpEvent> trailing;  ///< jumps after the last arrival in 00
};

/// Splits the path at every arrival in state 00. Views point into `traj`.
/// A segment starts when the chain sits in 00 (time of arrival, or 0 for a
/// trajectory that starts there) and ends at the next arrival in 00.
inline Segmentation segment_at_00(const Trajectory& traj) {
  Segmentation out;
  const auto& ev = traj.events;
  std::vector<std::size_t> arrivals;  // event index after which the state is 00
  State s = traj.initial_state;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    s = *apply(ev[i].label, s);
    if (s == State::s00) arrivals.push_back(i);
  }
  const std::span<const JumpEvent> all(ev);
  if (traj.initial_state != State::s00 && arrivals.empty()) {
    out.leading = all;
    return out;
  }
  std::size_t begin = 0;  // first event of the current excursion
  double anchor = 0.0;
  if (traj.initial_state != State::s00) {
    out.leading = all.subspan(0, arrivals.front() + 1);
    begin = arrivals.front() + 1;
    anchor = ev[arrivals.front()].time;
  }
  for (std::size_t a : arrivals) {
    if (a < begin) continue;
    out.segments.push_back({anchor, all.subspan(begin, a + 1 - begin)});
    begin = a + 1;
    anchor = ev[a].time;
  }
  out.trailing = all.subspan(begin);
  return out;
}

/// One line per jump: "<time> <label>".
inline void write_event_log(std::ostream& os, const Trajectory& traj) {
  char buf[64];
  for (const auto& e : traj.events) {
    std::snprintf(buf, sizeof buf, "%.17g", e.time);
    os << buf << ' ' << to_string(e.label) << '\n';
  }
}

}  // namespace qdc
