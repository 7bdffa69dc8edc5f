#pragma once

// Backaction-free telegraph piston. The hot-dot occupation n_h(t) is an
// autonomous two-state process; the work-dot occupation N_w(t) follows a
// deterministic rate equation whose rates depend on n_h(t).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qdcycles/engine_model.hpp"
#include "qdcycles/errors.hpp"
#include "qdcycles/master_dynamics.hpp"
#include "qdcycles/numerics.hpp"
#include "qdcycles/parallel.hpp"
#include "qdcycles/random.hpp"

namespace qdc {

/// Which golden-rule rates stand in for W_H^+/- once backaction is dropped.
enum class HotRateChoice {
  Midpoint,       ///< mean of the n_w = 0 and n_w = 1 rates
  EmptyWorkDot,   ///< W_{H,0}^+/-
};

struct TelegraphRates {
  double up = 0.0;    ///< 0 -> 1
  double down = 0.0;  ///< 1 -> 0
  double total() const { return up + down; }
  double occupation() const { return up / total(); }
};

inline TelegraphRates telegraph_rates(const EngineParams& p, HotRateChoice choice = HotRateChoice::Midpoint) {
  const TransitionRates r = rates(p);
  if (choice == HotRateChoice::EmptyWorkDot) return {r.in(Reservoir::H, 0), r.out(Reservoir::H, 0)};
  return {0.5 * (r.in(Reservoir::H, 0) + r.in(Reservoir::H, 1)), 0.5 * (r.out(Reservoir::H, 0) + r.out(Reservoir::H, 1))};
}

/// Golden-rule rates with the hot-dot rates replaced by the telegraph ones:
/// the four-state model without backaction.
inline TransitionRates backaction_free_rates(const EngineParams& p, HotRateChoice choice = HotRateChoice::Midpoint) {
  TransitionRates r = rates(p);
  const TelegraphRates t = telegraph_rates(p, choice);
  const int h = static_cast<int>(Reservoir::H);
  for (int n = 0; n < 2; ++n) {
    r.plus[h][n] = t.up;
    r.minus[h][n] = t.down;
  }
  return r;
}

/// The telegraph description assumes T_H >> U.
inline bool backaction_negligible(const EngineParams& p) { return p.coulomb_u / p.temp_h <= 0.2; }

struct TelegraphTrace {
  int initial_n_h = 0;
  std::vector<double> switch_times;  ///< strictly increasing, all in (0, duration)
  double duration = 0.0;
  TelegraphRates rates;

  int occupation_at(double t) const {
    const auto k = std::upper_bound(switch_times.begin(), switch_times.end(), t) - switch_times.begin();
    return (initial_n_h + static_cast<int>(k)) % 2;
  }

  /// Occupation after the k-th switch (k = 0 is the initial one).
  int occupation_after(std::size_t k) const { return (initial_n_h + static_cast<int>(k)) % 2; }

  void validate() const {
    if (initial_n_h != 0 && initial_n_h != 1) throw PreconditionError("telegraph trace: n_h must be 0 or 1");
    if (!(duration > 0.0)) throw PreconditionError("telegraph trace: duration must be > 0");
    double prev = 0.0;
    for (double t : switch_times) {
      if (!(t > prev) || t >= duration) throw PreconditionError("telegraph trace: switch times out of order");
      prev = t;
    }
  }
};

/// Alternating exponential waiting times. `initial_n_h` < 0 draws the
/// starting occupation from the stationary telegraph distribution.
inline TelegraphTrace telegraph_trace(const TelegraphRates& rt, double duration, std::uint64_t seed,
                                      int initial_n_h = -1) {
  if (!(duration > 0.0)) throw PreconditionError("telegraph_trace: duration must be > 0");
  if (!(rt.up > 0.0) || !(rt.down > 0.0)) throw PreconditionError("telegraph_trace: rates must be > 0");
  RandomStream rng(seed);
  TelegraphTrace tr;
  tr.duration = duration;
  tr.rates = rt;
  tr.initial_n_h = initial_n_h >= 0 ? initial_n_h % 2 : (rng.uniform() < rt.occupation() ? 1 : 0);
  int n = tr.initial_n_h;
  double t = 0.0;
  for (;;) {
    t += rng.exponential(n == 0 ? rt.up : rt.down);
    if (t >= duration) break;
    tr.switch_times.push_back(t);
    n ^= 1;
  }
  return tr;
}

inline TelegraphTrace telegraph_trace(const EngineParams& p, double duration, std::uint64_t seed,
                                      HotRateChoice choice = HotRateChoice::Midpoint, int initial_n_h = -1) {
  return telegraph_trace(telegraph_rates(p, choice), duration, seed, initial_n_h);
}

/// Per hot-dot occupation: relaxation rate Gamma_{W,n}, fixed point
/// W+_{W,n} / Gamma_{W,n}, and the L-lead rates entering the power.
struct WorkDotRates {
  std::array<double, 2> relax{};
  std::array<double, 2> fixed_point{};
  std::array<double, 2> gamma_l{};
  std::array<double, 2> l_in{};
};

inline WorkDotRates work_dot_rates(const EngineParams& p) {
  const TransitionRates r = rates(p);
  WorkDotRates w;
  for (int n = 0; n < 2; ++n) {
    w.relax[n] = r.work_in(n) + r.work_out(n);
    if (!(w.relax[n] > 0.0)) throw DegeneracyError("work_dot_rates: work dot decoupled");
    w.fixed_point[n] = r.work_in(n) / w.relax[n];
    w.gamma_l[n] = r.in(Reservoir::L, n) + r.out(Reservoir::L, n);
    w.l_in[n] = r.in(Reservoir::L, n);
  }
  return w;
}

/// U (N_w|_{n_h=0} - N_w|_{n_h=1}): the largest heat one cycle can carry.
inline double max_qin(const EngineParams& p) {
  const WorkDotRates w = work_dot_rates(p);
  return p.coulomb_u * (w.fixed_point[0] - w.fixed_point[1]);
}

/// Piecewise exponential N_w(t); knot k holds N_w at the start of interval k.
class WorkDotResponse {
 public:
  WorkDotResponse(const WorkDotRates& rates, const TelegraphTrace& trace, double initial_n_w)
      : rates_(rates), trace_(&trace) {
    trace.validate();
    if (!(initial_n_w >= 0.0 && initial_n_w <= 1.0)) throw PreconditionError("work_dot_response: N_w(0) outside [0, 1]");
    knots_.reserve(trace.switch_times.size() + 1);
    knots_.push_back(initial_n_w);
    double t0 = 0.0;
    for (std::size_t k = 0; k < trace.switch_times.size(); ++k) {
      const double t1 = trace.switch_times[k];
      knots_.push_back(relax(knots_.back(), trace.occupation_after(k), t1 - t0));
      t0 = t1;
    }
  }

  double operator()(double t) const {
    const auto& s = trace_->switch_times;
    const auto k = static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), t) - s.begin());
    const double start = k == 0 ? 0.0 : s[k - 1];
    return relax(knots_[k], trace_->occupation_after(k), t - start);
  }

  /// N_w at the k-th switch instant.
  double at_switch(std::size_t k) const { return knots_.at(k + 1); }
  const WorkDotRates& rates() const { return rates_; }
  const TelegraphTrace& trace() const { return *trace_; }

 private:
  double relax(double n0, int n_h, double dt) const {
    const double fp = rates_.fixed_point[n_h];
    return fp + (n0 - fp) * std::exp(-rates_.relax[n_h] * dt);
  }

  WorkDotRates rates_;
  const TelegraphTrace* trace_;
  std::vector<double> knots_;
};

/// Starts from the n_h = 0 fixed point unless `initial_n_w` is given.
inline WorkDotResponse work_dot_response(const EngineParams& p, const TelegraphTrace& trace,
                                         std::optional<double> initial_n_w = std::nullopt) {
  const WorkDotRates w = work_dot_rates(p);
  return WorkDotResponse(w, trace, initial_n_w.value_or(w.fixed_point[0]));
}

struct SemiCycle {
  double t_start = 0.0;  ///< H- instant that empties the hot dot
  double t_up = 0.0;
  double t_down = 0.0;
  double amplitude = 0.0;  ///< N_w(t_up) - N_w(t_down)
  double q_in = 0.0;
  double w_out = 0.0;
};

/// Cycles start at an emptying of the hot dot; the stretch before the first
/// one is discarded, as is an unfinished cycle at the end.
inline std::vector<SemiCycle> semi_cycles(const EngineParams& p, const WorkDotResponse& resp) {
  const TelegraphTrace& tr = resp.trace();
  const WorkDotRates& w = resp.rates();
  const auto& s = tr.switch_times;
  // Work delivered to L while n_h = j between two instants.
  auto work = [&](int j, double ta, double na, double tb, double nb) {
    return p.delta_mu *
           (w.gamma_l[j] / w.relax[j] * (na - nb) + (tb - ta) * (w.gamma_l[j] * w.fixed_point[j] - w.l_in[j]));
  };
  std::vector<SemiCycle> out;
  std::size_t k = 0;
  while (k < s.size() && tr.occupation_after(k + 1) != 0) ++k;  // first emptying
  for (; k + 2 < s.size(); k += 2) {
    SemiCycle c;
    c.t_start = s[k];
    c.t_up = s[k + 1];
    c.t_down = s[k + 2];
    const double n0 = resp.at_switch(k), n1 = resp.at_switch(k + 1), n2 = resp.at_switch(k + 2);
    c.amplitude = n1 - n2;
    c.q_in = p.coulomb_u * c.amplitude;
    c.w_out = work(0, c.t_start, n0, c.t_up, n1) + work(1, c.t_up, n1, c.t_down, n2);
    out.push_back(c);
  }
  return out;
}

struct TraceSample {
  double t = 0.0;
  int n_h = 0;
  double n_w = 0.0;
};

inline std::vector<TraceSample> sample_trace(const WorkDotResponse& resp, double dt) {
  if (!(dt > 0.0)) throw PreconditionError("sample_trace: dt must be > 0");
  std::vector<TraceSample> out;
  const double duration = resp.trace().duration;
  for (std::size_t i = 0;; ++i) {
    const double t = dt * static_cast<double>(i);
    if (t > duration) break;
    out.push_back({t, resp.trace().occupation_at(t), resp(t)});
  }
  return out;
}

struct SemiEnsembleSpec {
  std::size_t n_traces = 1000;
  double duration = 2000.0;
  std::uint64_t base_seed = 1;
  HotRateChoice hot_rates = HotRateChoice::Midpoint;
  double sample_t_max = 50.0;     ///< N_w(t) averaged on [0, sample_t_max]
  std::size_t sample_points = 101;
  std::size_t qin_bins = 50;
  std::size_t wout_bins = 50;

  void validate() const {
    if (n_traces < 2) throw PreconditionError("semi ensemble: need at least two traces");
    if (!(duration > 0.0)) throw PreconditionError("semi ensemble: duration must be > 0");
    if (!(sample_t_max >= 0.0) || sample_t_max > duration)
      throw PreconditionError("semi ensemble: sample window outside the trace");
    if (sample_points < 2 || qin_bins == 0 || wout_bins == 0)
      throw PreconditionError("semi ensemble: empty grid");
  }
};

struct SemiEnsemble {
  double max_qin = 0.0;
  double observed_max_qin = -std::numeric_limits<double>::infinity();
  std::size_t cycles = 0;
  numerics::Histogram qin;   ///< [0, max_qin], values at the bound land in the top bin
  numerics::Histogram wout;  ///< symmetric about 0
  ValueWithError power;  ///< mean w_out per unit time, SE across traces
  std::vector<double> times;
  std::vector<double> mean_n_w;
  std::vector<double> se_n_w;
  std::vector<std::string> warnings;
};

struct SemiTraceResult {
  std::vector<SemiCycle> cycles;
  std::vector<double> n_w;  ///< on the sample grid
  double power = 0.0;
  bool has_cycles = false;
};

inline SemiEnsemble semi_ensemble(const EngineParams& p, const SemiEnsembleSpec& spec, unsigned threads = 1) {
  spec.validate();
  const TelegraphRates rt = telegraph_rates(p, spec.hot_rates);
  SemiEnsemble out;
  if (!backaction_negligible(p)) out.warnings.emplace_back("U / T_H > 0.2: backaction on the hot dot is not negligible");
  out.max_qin = max_qin(p);
  out.times.resize(spec.sample_points);
  for (std::size_t i = 0; i < spec.sample_points; ++i)
    out.times[i] = spec.sample_t_max * static_cast<double>(i) / static_cast<double>(spec.sample_points - 1);

  auto per_trace = parallel_map(spec.n_traces, std::max(1u, threads), [&](std::size_t i) {
    const TelegraphTrace tr = telegraph_trace(rt, spec.duration, stream_seed(spec.base_seed, i));
    const WorkDotResponse resp = work_dot_response(p, tr);
    SemiTraceResult res;
    res.cycles = semi_cycles(p, resp);
    res.n_w.reserve(out.times.size());
    for (double t : out.times) res.n_w.push_back(resp(t));
    if (!res.cycles.empty()) {
      double w = 0.0;
      for (const auto& c : res.cycles) w += c.w_out;
      res.power = w / (res.cycles.back().t_down - res.cycles.front().t_start);
      res.has_cycles = true;
    }
    return res;
  });

  double wmax = 0.0;
  for (const auto& res : per_trace)
    for (const auto& c : res.cycles) wmax = std::max(wmax, std::abs(c.w_out));
  if (wmax == 0.0) wmax = 1.0;
  const double qwidth = out.max_qin > 0.0 ? out.max_qin / static_cast<double>(spec.qin_bins) : 1.0;
  out.qin = numerics::Histogram(0.0, qwidth, spec.qin_bins);
  // Widened by half a bin so the extreme value is not on the upper edge.
  const double wwidth = 2.0 * wmax / (static_cast<double>(spec.wout_bins) - 0.5);
  out.wout = numerics::Histogram(-0.5 * wwidth * static_cast<double>(spec.wout_bins), wwidth, spec.wout_bins);

  numerics::RunningStats powers;
  for (const auto& res : per_trace) {
    for (const auto& c : res.cycles) {
      ++out.cycles;
      out.observed_max_qin = std::max(out.observed_max_qin, c.q_in);
      // Rounding can put the exact bound one ulp past the top edge.
      out.qin.add(c.q_in >= out.max_qin && c.q_in <= out.max_qin + 1e-12 ? std::nextafter(out.max_qin, 0.0) : c.q_in);
      out.wout.add(c.w_out);
    }
    if (res.has_cycles) powers.add(res.power);
  }
  out.power = {powers.mean(), powers.standard_error()};

  const double n = static_cast<double>(per_trace.size());
  out.mean_n_w.assign(out.times.size(), 0.0);
  out.se_n_w.assign(out.times.size(), 0.0);
  for (std::size_t i = 0; i < out.times.size(); ++i) {
    double s = 0.0, s2 = 0.0;
    for (const auto& res : per_trace) {
      s += res.n_w[i];
      s2 += res.n_w[i] * res.n_w[i];
    }
    const double m = s / n;
    out.mean_n_w[i] = m;
    out.se_n_w[i] = std::sqrt(std::max(0.0, (s2 / n - m * m) * n / (n - 1.0)) / n);
  }
  return out;
}

/// N_w(t) = p10 + p11 from the four-state master equation, started from the
/// product state matching the ensemble: N_w(0) at the n_h = 0 fixed point and
/// n_h stationary under the telegraph rates.
inline std::vector<double> master_work_occupation(const EngineParams& p, const std::vector<double>& times,
                                                  HotRateChoice choice = HotRateChoice::Midpoint) {
  const double n0 = work_dot_rates(p).fixed_point[0];
  const double h = telegraph_rates(p, choice).occupation();
  Distribution rho0;
  rho0.p << (1.0 - n0) * (1.0 - h), (1.0 - n0) * h, n0 * (1.0 - h), n0 * h;
  const Generator g = generator(p);
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) {
    const Distribution rho = evolve(g, rho0, t);
    out.push_back(rho[State::s10] + rho[State::s11]);
  }
  return out;
}

}  // namespace qdc
