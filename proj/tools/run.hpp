#pragma once

// Command dispatch for the driver. Every command writes its CSV tables and a
// summary.json into the output directory; those files depend only on the
// configuration. manifest.json adds the wall time and a timestamp.

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "qdcycles/config.hpp"
#include "qdcycles/correlations.hpp"
#include "qdcycles/counting.hpp"
#include "qdcycles/csv.hpp"
#include "qdcycles/cycles.hpp"
#include "qdcycles/master_dynamics.hpp"
#include "qdcycles/numerics.hpp"
#include "qdcycles/oscillation.hpp"
#include "qdcycles/parallel.hpp"
#include "qdcycles/semi_stochastic.hpp"
#include "qdcycles/trajectory.hpp"
#include "qdcycles/version.hpp"

namespace qdc::cli {

using nlohmann::json;
namespace fs = std::filesystem;

inline json to_json(const EngineParams& p) {
  json j{{"eps_w", p.eps_w},   {"eps_h", p.eps_h},   {"coulomb_u", p.coulomb_u}, {"delta_mu", p.delta_mu},
         {"temp_w", p.temp_w}, {"temp_h", p.temp_h}, {"gamma", p.gamma_base},    {"gamma_h", p.gamma_h},
         {"x", p.x}};
  if (p.explicit_couplings) {
    const auto& c = *p.explicit_couplings;
    j["couplings"] = {c.left0, c.left1, c.right0, c.right1};
  }
  return j;
}

/// The resolved configuration, every default included.
inline json to_json(const RunConfig& c) {
  json methods = json::array();
  for (auto m : c.oscillation.methods) methods.push_back(opt::to_string(m));
  const auto& b = c.oscillation.box;
  return {
      {"run", {{"command", to_string(c.command)}, {"output_dir", c.output_dir}, {"threads", c.threads}}},
      {"params", [&] {
         json j = to_json(c.params);
         j["preset"] = c.preset;
         return j;
       }()},
      {"ensemble",
       {{"n_traj", c.ensemble.n_traj},
        {"duration", c.ensemble.duration},
        {"base_seed", c.ensemble.base_seed},
        {"burn_in", c.ensemble.burn_in},
        {"initial_state", to_string(c.ensemble.initial_state)}}},
      {"sweep", {{"delta_mu_min", c.sweep.delta_mu_min}, {"delta_mu_max", c.sweep.delta_mu_max},
                 {"points", c.sweep.points}}},
      {"correlations", {{"tau_min", c.correlations.tau_min}, {"tau_max", c.correlations.tau_max},
                        {"points", c.correlations.points}}},
      {"oscillation",
       {{"methods", methods},
        {"u", {b.coulomb_u.first, b.coulomb_u.second}},
        {"temp_w", {b.temp_w.first, b.temp_w.second}},
        {"temp_h", {b.temp_h.first, b.temp_h.second}},
        {"delta_mu", {b.delta_mu.first, b.delta_mu.second}},
        {"nm_restarts", c.oscillation.settings.nm_restarts},
        {"de_generations", c.oscillation.settings.de_generations},
        {"sa_steps", c.oscillation.settings.sa_steps},
        {"random_samples", c.oscillation.settings.random_samples}}},
      {"trajectories", {{"event_logs", c.trajectories.event_logs}}},
      {"cycles",
       {{"histogram_bin", c.cycles.histogram_bin},
        {"histogram_max", c.cycles.histogram_max},
        {"min_count", c.cycles.min_count},
        {"gap_bin", c.cycles.gap_bin},
        {"gap_fit_from", c.cycles.gap_fit_from ? json(*c.cycles.gap_fit_from) : json(nullptr)}}},
      {"ldf",
       {{"lambda_points", c.ldf.lambda_points},
        {"lambda_step", c.ldf.lambda_step},
        {"xi_points", c.ldf.xi_points},
        {"xi_step", c.ldf.xi_step},
        {"step", c.ldf.options.step},
        {"heat_counting", to_string(c.ldf.options.convention)},
        {"richardson_samples", c.ldf.options.richardson_samples}}},
      {"semistoch",
       {{"n_traces", c.semistoch.spec.n_traces},
        {"duration", c.semistoch.spec.duration},
        {"hot_rates", to_string(c.semistoch.spec.hot_rates)},
        {"sample_t_max", c.semistoch.spec.sample_t_max},
        {"sample_points", c.semistoch.spec.sample_points},
        {"qin_bins", c.semistoch.spec.qin_bins},
        {"wout_bins", c.semistoch.spec.wout_bins},
        {"trace_dt", c.semistoch.trace_dt},
        {"trace_duration", c.semistoch.trace_duration}}},
  };
}

/// Non-finite numbers become null so the JSON stays valid.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const ValueWithError& v) { return {{"value", number(v.value)}, {"error", number(v.error)}}; }

class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  CsvWriter csv(const std::string& name, std::vector<std::string> columns) {
    files_.push_back(name);
    return CsvWriter(dir_ / name, std::move(columns));
  }

  std::ofstream text(const std::string& name) {
    files_.push_back(name);
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw PreconditionError("cannot open " + (dir_ / name).string() + " for writing");
    return out;
  }

  void histogram(const std::string& name, const numerics::Histogram& h) {
    auto w = csv(name, {"bin_left", "density"});
    for (std::size_t i = 0; i < h.bins(); ++i) w.row({h.left(i), h.density(i)});
  }

  const fs::path& dir() const { return dir_; }
  const std::vector<std::string>& files() const { return files_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

inline const std::vector<std::string> kObservableColumns{"delta_mu", "I_L", "J_H", "P", "eta", "sigma_dot"};

inline std::vector<CsvCell> observable_row(double dmu, const SteadyObservables& o) {
  return {dmu, o.current_l, o.heat_h, o.power, o.efficiency.value_or(std::nan("")), o.entropy_rate};
}

inline json run_steady(const RunConfig& c, Outputs& out) {
  const auto o = steady_observables(c.params);
  out.csv("steady.csv", kObservableColumns).row(observable_row(c.params.delta_mu, o));
  const auto rho = steady_state(generator(rates(c.params)));
  auto w = out.csv("steady_state.csv", {"state", "probability"});
  for (int s = 0; s < 4; ++s) w.row({std::string(to_string(static_cast<State>(s))), rho.p(s)});
  return {{"power", o.power}, {"heat_h", o.heat_h}, {"entropy_rate", o.entropy_rate}};
}

inline json run_sweep(const RunConfig& c, Outputs& out) {
  const auto biases = numerics::linspace(c.sweep.delta_mu_min, c.sweep.delta_mu_max, c.sweep.points);
  auto w = out.csv("sweep.csv", kObservableColumns);
  for (const auto& row : sweep(c.params, biases)) w.row(observable_row(row.delta_mu, row.obs));
  json summary;
  try {
    summary["stall_bias"] = stall_bias(c.params);
  } catch (const NoStallError& e) {
    summary["stall_bias"] = nullptr;
    summary["warnings"] = {e.what()};
  }
  return summary;
}

inline json run_correlations(const RunConfig& c, Outputs& out) {
  const auto taus = default_tau_grid(c.correlations.points, c.correlations.tau_min, c.correlations.tau_max);
  const auto ll = g_ll(c.params, taus);
  const auto hl = g_hl(c.params, taus);
  auto w = out.csv("correlations.csv", {"tau", "g_ll", "g_hl"});
  for (std::size_t i = 0; i < taus.size(); ++i) w.row({taus[i], ll.values[i], hl.values[i]});
  return {{"g_ll_decorrelated", ll.decorrelated},
          {"g_hl_decorrelated", hl.decorrelated},
          {"spectral_gap", spectral_gap(generator(rates(c.params)))}};
}

inline json run_oscillation(const RunConfig& c, Outputs& out, unsigned threads) {
  const auto& methods = c.oscillation.methods;
  const auto minima = parallel_map(methods.size(), threads, [&](std::size_t i) {
    return minimize_discriminant(c.oscillation.box, methods[i], stream_seed(c.ensemble.base_seed, i),
                                 c.oscillation.settings);
  });
  auto w = out.csv("oscillation.csv", {"method", "coulomb_u", "temp_w", "temp_h", "delta_mu", "delta_min",
                                       "evaluations"});
  double best = std::numeric_limits<double>::infinity();
  for (const auto& m : minima) {
    w.row({std::string(opt::to_string(m.method)), m.params.coulomb_u, m.params.temp_w, m.params.temp_h,
           m.params.delta_mu, m.delta_min, CsvWriter::integer(m.evaluations)});
    best = std::min(best, m.delta_min);
  }
  return {{"delta_min", best}, {"oscillation_found", best < 0.0}};
}

inline json run_trajectories(const RunConfig& c, Outputs& out, unsigned threads) {
  c.ensemble.validate();
  const TransitionRates r = rates(c.params);
  struct Row {
    std::uint64_t seed;
    std::size_t events;
    double intensity;
    std::array<double, 4> residence;
  };
  const auto rows = parallel_map(c.ensemble.n_traj, threads, [&](std::size_t i) {
    const Trajectory t = c.ensemble.simulate_one(r, i);
    return Row{t.seed, t.events.size(), stochastic_intensity(t), residence_times(t)};
  });
  auto w = out.csv("trajectories.csv",
                   {"trajectory", "seed", "events", "intensity", "time_00", "time_01", "time_10", "time_11"});
  numerics::RunningStats intensity;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    w.row({CsvWriter::integer(i), std::to_string(row.seed), CsvWriter::integer(row.events), row.intensity,
           row.residence[0], row.residence[1], row.residence[2], row.residence[3]});
    intensity.add(row.intensity);
  }
  for (std::size_t i = 0; i < std::min(c.trajectories.event_logs, c.ensemble.n_traj); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "events_%04zu.txt", i);
    auto log = out.text(name);
    log << "# columns: time label\n";
    write_event_log(log, c.ensemble.simulate_one(r, i));
  }
  return {{"intensity", to_json(ValueWithError{intensity.mean(), intensity.standard_error()})},
          {"current_l_master", steady_observables(c.params).current_l}};
}

inline json run_cycles(const RunConfig& c, Outputs& out, unsigned threads) {
  const CycleStats stats =
      cycle_stats(c.params, c.ensemble, threads, CycleStatsOptions{c.cycles.histogram_bin, c.cycles.histogram_max});

  auto rates_csv = out.csv("cycle_rates.csv", {"class", "count", "rate", "mean_duration"});
  for (std::size_t i = 0; i < kCycleClassCount; ++i) {
    const auto cls = static_cast<CycleClass>(i);
    rates_csv.row({std::string(to_string(cls)), CsvWriter::integer(stats.count(cls)), stats.rate(cls),
                   stats.count(cls) ? stats.mean_duration(cls) : std::nan("")});
  }
  for (CycleClass cls : kCoreCycles)
    out.histogram("duration_" + std::string(to_string(cls)) + ".csv", stats.duration_histogram(cls));

  const C4DurationModel c4(c.params);
  const auto& h4 = stats.duration_histogram(CycleClass::C4);
  auto c4_csv = out.csv("c4_duration.csv", {"bin_left", "density", "analytic_density"});
  for (std::size_t i = 0; i < h4.bins(); ++i) c4_csv.row({h4.left(i), h4.density(i), c4.density(h4.center(i))});

  auto ft = out.csv("fluctuation.csv",
                    {"class", "forward", "reverse", "log_ratio", "standard_error", "dsigma_analytic", "sufficient"});
  for (const auto& row : dft_check(stats, c.cycles.min_count))
    ft.row({std::string(to_string(row.cls)), CsvWriter::integer(row.forward), CsvWriter::integer(row.reverse),
            row.log_ratio, row.standard_error, row.dsigma, CsvWriter::integer(row.sufficient)});

  auto loops = out.csv("loop_erased.csv", {"cycle", "count", "rate", "hill_rate"});
  const auto hill = hill_cycles(c.params);
  for (std::size_t i = 0; i < kGraphCycleCount; ++i) {
    const auto g = static_cast<GraphCycle>(i);
    double analytic = std::nan("");
    for (const auto& h : hill)
      if (h.name == to_string(g)) analytic = h.rate;
    loops.row({std::string(to_string(g)), CsvWriter::integer(stats.graph_count(g)), stats.graph_rate(g), analytic});
  }

  json summary{
      {"intensity", to_json(stats.intensity())},
      {"power_cycles", to_json(stats.power_cycles_with_error())},
      {"power_remainder", stats.power_remainder()},
      {"heat_rate", to_json(stats.heat_rate())},
      {"c4_c6_ratio", to_json(stats.count_ratio(CycleClass::C4, CycleClass::C6))},
      {"c4_c6_ratio_loop_erased", to_json(stats.graph_count_ratio(GraphCycle::C4, GraphCycle::C6))},
      {"c4_c6_ratio_hill", hill_cycle_rates(c.params).ratio_c4_c6()},
      {"c4_mode_analytic", c4.mode()},
      {"c4_mean_analytic", c4.mean()},
      {"c4_mean_observed", number(stats.c4_durations().mean())},
  };
  try {
    const auto ift = ift_check(stats);
    summary["ift"] = to_json(ift.matched);
    summary["ift_all_segments"] = to_json(ift.all_segments);
  } catch (const PreconditionError& e) {
    summary["warnings"].push_back(e.what());
  }

  const auto& gaps = stats.c4_start_gaps();
  try {
    double from = 0.0;
    if (c.cycles.gap_fit_from) {
      from = *c.cycles.gap_fit_from;
    } else {
      numerics::RunningStats g;
      for (double v : gaps) g.add(v);
      from = g.mean();
    }
    const auto fit = intercycle_gap_stats(gaps, from, c.cycles.gap_bin);
    out.histogram("c4_gaps.csv", fit.histogram);
    summary["gap_fit"] = {{"fit_from", fit.fit_from},
                          {"decay_rate", to_json(ValueWithError{fit.decay_rate, fit.decay_rate_error})},
                          {"half_life", to_json(ValueWithError{fit.half_life, fit.half_life_error})},
                          {"fitted_bins", fit.fitted_bins}};
  } catch (const PreconditionError& e) {
    summary["gap_fit"] = nullptr;
    summary["warnings"].push_back(e.what());
  }
  return summary;
}

inline json run_ldf(const RunConfig& c, Outputs& out, unsigned threads) {
  LdfOptions opts = c.ldf.options;
  opts.seed = c.ensemble.base_seed;
  opts.threads = threads;
  const auto surface = ldf_surface(c.params, centered_grid(c.ldf.lambda_points, c.ldf.lambda_step),
                                   centered_grid(c.ldf.xi_points, c.ldf.xi_step), opts);
  auto w = out.csv("ldf.csv", {"lambda", "xi", "S", "I", "J", "R"});
  for (const auto& pt : surface.points) w.row({pt.lambda, pt.xi, pt.s, pt.current, pt.heat, pt.rate});
  const auto& peak = surface.peak();
  return {{"peak", {{"lambda", peak.lambda}, {"xi", peak.xi}, {"I", peak.current}, {"J", peak.heat},
                    {"R", peak.rate}}},
          {"richardson_deviation", surface.richardson_deviation},
          {"diagnostics", surface.diagnostics}};
}

inline json run_semistoch(const RunConfig& c, Outputs& out, unsigned threads) {
  SemiEnsembleSpec spec = c.semistoch.spec;
  spec.base_seed = c.ensemble.base_seed;
  const auto ens = semi_ensemble(c.params, spec, threads);

  const auto trace = telegraph_trace(c.params, c.semistoch.trace_duration, stream_seed(spec.base_seed, 0),
                                     spec.hot_rates);
  const auto resp = work_dot_response(c.params, trace);
  auto tw = out.csv("semistoch_trace.csv", {"t", "n_h", "N_w"});
  for (const auto& s : sample_trace(resp, c.semistoch.trace_dt))
    tw.row({s.t, CsvWriter::integer(static_cast<std::size_t>(s.n_h)), s.n_w});

  out.histogram("qin_hist.csv", ens.qin);
  out.histogram("wout_hist.csv", ens.wout);

  const auto master = master_work_occupation(c.params, ens.times, spec.hot_rates);
  auto ow = out.csv("work_occupation.csv", {"t", "mean_n_w", "se_n_w", "master_n_w"});
  for (std::size_t i = 0; i < ens.times.size(); ++i)
    ow.row({ens.times[i], ens.mean_n_w[i], ens.se_n_w[i], master[i]});

  return {{"max_qin", ens.max_qin},
          {"observed_max_qin", ens.observed_max_qin},
          {"cycles", ens.cycles},
          {"power", to_json(ens.power)},
          {"power_master_backaction_free",
           observables(c.params, steady_state(generator(backaction_free_rates(c.params, spec.hot_rates)))).power},
          {"warnings", ens.warnings}};
}

struct RunResult {
  std::vector<std::string> files;
  double wall_seconds = 0.0;
};

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Runs `c`. `source` is the configuration text, echoed into the manifest.
inline RunResult run(const RunConfig& c, const std::string& source = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const unsigned threads = resolve_threads(c.threads);
  Outputs out(c.output_dir);
  json summary;
  switch (c.command) {
    case Command::Steady: summary = run_steady(c, out); break;
    case Command::Sweep: summary = run_sweep(c, out); break;
    case Command::Correlations: summary = run_correlations(c, out); break;
    case Command::OscillationSearch: summary = run_oscillation(c, out, threads); break;
    case Command::Trajectories: summary = run_trajectories(c, out, threads); break;
    case Command::Cycles: summary = run_cycles(c, out, threads); break;
    case Command::Ldf: summary = run_ldf(c, out, threads); break;
    case Command::Semistoch: summary = run_semistoch(c, out, threads); break;
  }
  out.text("summary.json") << summary.dump(2) << '\n';

  RunResult result;
  result.files = out.files();
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const json manifest{
      {"command", to_string(c.command)},
      {"seed", c.ensemble.base_seed},
      {"threads", threads},
      {"config", to_json(c)},
      {"config_source", source},
      {"versions",
       {{"qdcycles", kVersion},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
        {"compiler", __VERSION__}}},
      {"wall_time_s", result.wall_seconds},
      {"timestamp", utc_timestamp()},
      {"files", result.files},
  };
  std::ofstream(out.dir() / "manifest.json", std::ios::binary) << manifest.dump(2) << '\n';
  return result;
}

}  // namespace qdc::cli
