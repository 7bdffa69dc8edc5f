#pragma once

// Run configuration: "key = value" lines grouped in [sections], '#' or ';'
// comments. Keys are case-insensitive. Unknown sections or keys, malformed
// values and domain violations raise ConfigError with the key and line.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qdcycles/counting.hpp"
#include "qdcycles/engine_model.hpp"
#include "qdcycles/errors.hpp"
#include "qdcycles/optimizers.hpp"
#include "qdcycles/oscillation.hpp"
#include "qdcycles/semi_stochastic.hpp"
#include "qdcycles/trajectory.hpp"

namespace qdc {

enum class Command { Steady, Sweep, Correlations, OscillationSearch, Trajectories, Cycles, Ldf, Semistoch };

inline constexpr std::array<std::pair<Command, std::string_view>, 8> kCommandNames{{
    {Command::Steady, "steady"},
    {Command::Sweep, "sweep"},
    {Command::Correlations, "correlations"},
    {Command::OscillationSearch, "oscillation-search"},
    {Command::Trajectories, "trajectories"},
    {Command::Cycles, "cycles"},
    {Command::Ldf, "ldf"},
    {Command::Semistoch, "semistoch"},
}};

inline std::string_view to_string(Command c) {
  for (auto [k, name] : kCommandNames)
    if (k == c) return name;
  return "?";
}

inline std::optional<Command> parse_command(std::string_view s) {
  for (auto [k, name] : kCommandNames)
    if (name == s) return k;
  return std::nullopt;
}

struct SweepConfig {
  double delta_mu_min = 0.0;
  double delta_mu_max = 1.0;
  std::size_t points = 101;
};

struct CorrelationConfig {
  double tau_min = 1e-2;
  double tau_max = 200.0;
  std::size_t points = 400;
};

struct OscillationConfig {
  std::vector<opt::Method> methods{opt::kAllMethods.begin(), opt::kAllMethods.end()};
  ParameterBox box;
  opt::Settings settings;
};

struct TrajectoryConfig {
  std::size_t event_logs = 1;  ///< trajectories whose full jump record is written
};

struct CycleConfig {
  double histogram_bin = 0.25;
  double histogram_max = 50.0;
  std::size_t min_count = 50;  ///< per direction, for the fluctuation-theorem table
  double gap_bin = 2.0;
  std::optional<double> gap_fit_from;  ///< defaults to the mean gap
};

struct LdfConfig {
  std::size_t lambda_points = 100;
  double lambda_step = 0.1;
  std::size_t xi_points = 100;
  double xi_step = 0.01;
  LdfOptions options;
};

struct SemiConfig {
  SemiEnsembleSpec spec;
  double trace_dt = 0.05;
  double trace_duration = 100.0;
};

struct RunConfig {
  Command command = Command::Steady;
  std::string output_dir = "out";
  int threads = 0;  ///< 0: QDCYCLES_THREADS or hardware concurrency
  std::string preset = "cycles";
  EngineParams params;
  EnsembleSpec ensemble;
  SweepConfig sweep;
  CorrelationConfig correlations;
  OscillationConfig oscillation;
  TrajectoryConfig trajectories;
  CycleConfig cycles;
  LdfConfig ldf;
  SemiConfig semistoch;
};

inline std::string_view to_string(HeatCounting h) {
  return h == HeatCounting::OccupationResolved ? "resolved" : "uniform";
}
inline std::string_view to_string(HotRateChoice h) { return h == HotRateChoice::Midpoint ? "midpoint" : "empty"; }

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

struct Entry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
};

/// Splits the text into entries; keys before any section belong to [run].
inline std::vector<Entry> tokenize(std::string_view text) {
  std::vector<Entry> out;
  std::string section = "run";
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto cut = raw.find_first_of("#;");
    const std::string s = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("", line, "unterminated section header");
      section = lower(trim(std::string_view(s).substr(1, s.size() - 2)));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("", line, "expected 'key = value'");
    Entry e{section, lower(trim(std::string_view(s).substr(0, eq))), trim(std::string_view(s).substr(eq + 1)), line};
    if (e.key.empty()) throw ConfigError("", line, "empty key");
    if (e.value.empty()) throw ConfigError(e.key, line, "missing value");
    out.push_back(std::move(e));
  }
  return out;
}

class Reader {
 public:
  explicit Reader(const Entry& e) : e_(e) {}

  std::string name() const { return e_.section + "." + e_.key; }

  double number() const {
    const char* begin = e_.value.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0' || !std::isfinite(v)) fail("expected a finite number, got '" + e_.value + "'");
    return v;
  }

  double positive() const {
    const double v = number();
    if (!(v > 0.0)) fail("must be > 0");
    return v;
  }

  double non_negative() const {
    const double v = number();
    if (v < 0.0) fail("must be >= 0");
    return v;
  }

  std::uint64_t unsigned_integer() const {
    std::uint64_t v = 0;
    const auto* first = e_.value.data();
    const auto* last = first + e_.value.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) fail("expected a non-negative integer, got '" + e_.value + "'");
    return v;
  }

  std::size_t count(std::size_t min = 1) const {
    const auto v = unsigned_integer();
    if (v < min) fail("must be >= " + std::to_string(min));
    return static_cast<std::size_t>(v);
  }

  std::vector<std::string> list() const {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(e_.value);
    while (std::getline(in, item, ',')) out.push_back(trim(item));
    return out;
  }

  const std::string& text() const { return e_.value; }

  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(name(), e_.line, what); }

 private:
  const Entry& e_;
};

inline EngineParams preset_params(const Reader& r) {
  const std::string v = lower(r.text());
  if (v == "cycles") return presets::cycles();
  if (v == "ldf") return presets::ldf();
  if (v == "semi" || v == "semistoch") return presets::semi_stochastic();
  r.fail("unknown preset '" + r.text() + "' (cycles, ldf, semi)");
}

inline State parse_state(const Reader& r) {
  for (int s = 0; s < 4; ++s)
    if (to_string(static_cast<State>(s)) == r.text()) return static_cast<State>(s);
  r.fail("expected one of 00, 01, 10, 11");
}

inline opt::Method parse_method(const Reader& r, const std::string& name) {
  for (opt::Method m : opt::kAllMethods)
    if (opt::to_string(m) == name) return m;
  r.fail("unknown optimizer '" + name + "'");
}

using Setter = void (*)(RunConfig&, const Reader&);

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      // [run]
      {"run.command",
       [](RunConfig& c, const Reader& r) {
         const auto cmd = parse_command(lower(r.text()));
         if (!cmd) r.fail("unknown command '" + r.text() + "'");
         c.command = *cmd;
       }},
      {"run.output_dir", [](RunConfig& c, const Reader& r) { c.output_dir = r.text(); }},
      {"run.threads", [](RunConfig& c, const Reader& r) { c.threads = static_cast<int>(r.unsigned_integer()); }},
      // [params]; the preset is applied before any other key.
      {"params.preset", [](RunConfig& c, const Reader& r) { c.preset = lower(r.text()); }},
      {"params.eps_w", [](RunConfig& c, const Reader& r) { c.params.eps_w = r.number(); }},
      {"params.eps_h", [](RunConfig& c, const Reader& r) { c.params.eps_h = r.number(); }},
      {"params.coulomb_u", [](RunConfig& c, const Reader& r) { c.params.coulomb_u = r.non_negative(); }},
      {"params.delta_mu", [](RunConfig& c, const Reader& r) { c.params.delta_mu = r.number(); }},
      {"params.temp_w", [](RunConfig& c, const Reader& r) { c.params.temp_w = r.positive(); }},
      {"params.temp_h", [](RunConfig& c, const Reader& r) { c.params.temp_h = r.positive(); }},
      {"params.gamma", [](RunConfig& c, const Reader& r) { c.params.gamma_base = r.positive(); }},
      {"params.gamma_h", [](RunConfig& c, const Reader& r) { c.params.gamma_h = r.positive(); }},
      {"params.x",
       [](RunConfig& c, const Reader& r) {
         const double v = r.number();
         if (v < 0.0 || v > 1.0) r.fail("must lie in [0, 1]");
         c.params.x = v;
       }},
      {"params.couplings",
       [](RunConfig& c, const Reader& r) {
         const auto items = r.list();
         if (items.size() != 4) r.fail("expected four values: left0, left1, right0, right1");
         std::array<double, 4> g{};
         for (int i = 0; i < 4; ++i) {
           char* end = nullptr;
           g[i] = std::strtod(items[i].c_str(), &end);
           if (items[i].empty() || *end != '\0' || !(g[i] >= 0.0) || !std::isfinite(g[i]))
             r.fail("couplings must be finite numbers >= 0");
         }
         c.params.explicit_couplings = Couplings{g[0], g[1], g[2], g[3]};
       }},
      // [ensemble]
      {"ensemble.n_traj", [](RunConfig& c, const Reader& r) { c.ensemble.n_traj = r.count(1); }},
      {"ensemble.duration", [](RunConfig& c, const Reader& r) { c.ensemble.duration = r.positive(); }},
      {"ensemble.base_seed", [](RunConfig& c, const Reader& r) { c.ensemble.base_seed = r.unsigned_integer(); }},
      {"ensemble.burn_in", [](RunConfig& c, const Reader& r) { c.ensemble.burn_in = r.non_negative(); }},
      {"ensemble.initial_state", [](RunConfig& c, const Reader& r) { c.ensemble.initial_state = parse_state(r); }},
      // [sweep]
      {"sweep.delta_mu_min", [](RunConfig& c, const Reader& r) { c.sweep.delta_mu_min = r.number(); }},
      {"sweep.delta_mu_max", [](RunConfig& c, const Reader& r) { c.sweep.delta_mu_max = r.number(); }},
      {"sweep.points", [](RunConfig& c, const Reader& r) { c.sweep.points = r.count(1); }},
      // [correlations]
      {"correlations.tau_min", [](RunConfig& c, const Reader& r) { c.correlations.tau_min = r.positive(); }},
      {"correlations.tau_max", [](RunConfig& c, const Reader& r) { c.correlations.tau_max = r.positive(); }},
      {"correlations.points", [](RunConfig& c, const Reader& r) { c.correlations.points = r.count(2); }},
      // [oscillation]
      {"oscillation.methods",
       [](RunConfig& c, const Reader& r) {
         c.oscillation.methods.clear();
         for (const auto& name : r.list()) {
           if (name == "all") {
             c.oscillation.methods.assign(opt::kAllMethods.begin(), opt::kAllMethods.end());
             continue;
           }
           c.oscillation.methods.push_back(parse_method(r, name));
         }
         if (c.oscillation.methods.empty()) r.fail("no optimizer selected");
       }},
      {"oscillation.u_min", [](RunConfig& c, const Reader& r) { c.oscillation.box.coulomb_u.first = r.positive(); }},
      {"oscillation.u_max", [](RunConfig& c, const Reader& r) { c.oscillation.box.coulomb_u.second = r.positive(); }},
      {"oscillation.temp_w_min", [](RunConfig& c, const Reader& r) { c.oscillation.box.temp_w.first = r.positive(); }},
      {"oscillation.temp_w_max", [](RunConfig& c, const Reader& r) { c.oscillation.box.temp_w.second = r.positive(); }},
      {"oscillation.temp_h_min", [](RunConfig& c, const Reader& r) { c.oscillation.box.temp_h.first = r.positive(); }},
      {"oscillation.temp_h_max", [](RunConfig& c, const Reader& r) { c.oscillation.box.temp_h.second = r.positive(); }},
      {"oscillation.delta_mu_min",
       [](RunConfig& c, const Reader& r) { c.oscillation.box.delta_mu.first = r.non_negative(); }},
      {"oscillation.delta_mu_max",
       [](RunConfig& c, const Reader& r) { c.oscillation.box.delta_mu.second = r.positive(); }},
      {"oscillation.nm_restarts",
       [](RunConfig& c, const Reader& r) { c.oscillation.settings.nm_restarts = static_cast<int>(r.count(1)); }},
      {"oscillation.de_generations",
       [](RunConfig& c, const Reader& r) { c.oscillation.settings.de_generations = static_cast<int>(r.count(1)); }},
      {"oscillation.sa_steps",
       [](RunConfig& c, const Reader& r) { c.oscillation.settings.sa_steps = static_cast<int>(r.count(1)); }},
      {"oscillation.random_samples",
       [](RunConfig& c, const Reader& r) { c.oscillation.settings.random_samples = static_cast<int>(r.count(1)); }},
      // [trajectories]
      {"trajectories.event_logs", [](RunConfig& c, const Reader& r) { c.trajectories.event_logs = r.count(0); }},
      // [cycles]
      {"cycles.histogram_bin", [](RunConfig& c, const Reader& r) { c.cycles.histogram_bin = r.positive(); }},
      {"cycles.histogram_max", [](RunConfig& c, const Reader& r) { c.cycles.histogram_max = r.positive(); }},
      {"cycles.min_count", [](RunConfig& c, const Reader& r) { c.cycles.min_count = r.count(1); }},
      {"cycles.gap_bin", [](RunConfig& c, const Reader& r) { c.cycles.gap_bin = r.positive(); }},
      {"cycles.gap_fit_from", [](RunConfig& c, const Reader& r) { c.cycles.gap_fit_from = r.non_negative(); }},
      // [ldf]
      {"ldf.lambda_points", [](RunConfig& c, const Reader& r) { c.ldf.lambda_points = r.count(2); }},
      {"ldf.lambda_step", [](RunConfig& c, const Reader& r) { c.ldf.lambda_step = r.positive(); }},
      {"ldf.xi_points", [](RunConfig& c, const Reader& r) { c.ldf.xi_points = r.count(2); }},
      {"ldf.xi_step", [](RunConfig& c, const Reader& r) { c.ldf.xi_step = r.positive(); }},
      {"ldf.step", [](RunConfig& c, const Reader& r) { c.ldf.options.step = r.positive(); }},
      {"ldf.richardson_samples", [](RunConfig& c, const Reader& r) { c.ldf.options.richardson_samples = r.count(0); }},
      {"ldf.heat_counting",
       [](RunConfig& c, const Reader& r) {
         const std::string v = lower(r.text());
         if (v == "resolved") c.ldf.options.convention = HeatCounting::OccupationResolved;
         else if (v == "uniform") c.ldf.options.convention = HeatCounting::UniformLevel;
         else r.fail("expected 'resolved' or 'uniform'");
       }},
      // [semistoch]
      {"semistoch.n_traces", [](RunConfig& c, const Reader& r) { c.semistoch.spec.n_traces = r.count(2); }},
      {"semistoch.duration", [](RunConfig& c, const Reader& r) { c.semistoch.spec.duration = r.positive(); }},
      {"semistoch.hot_rates",
       [](RunConfig& c, const Reader& r) {
         const std::string v = lower(r.text());
         if (v == "midpoint") c.semistoch.spec.hot_rates = HotRateChoice::Midpoint;
         else if (v == "empty") c.semistoch.spec.hot_rates = HotRateChoice::EmptyWorkDot;
         else r.fail("expected 'midpoint' or 'empty'");
       }},
      {"semistoch.sample_t_max", [](RunConfig& c, const Reader& r) { c.semistoch.spec.sample_t_max = r.non_negative(); }},
      {"semistoch.sample_points", [](RunConfig& c, const Reader& r) { c.semistoch.spec.sample_points = r.count(2); }},
      {"semistoch.qin_bins", [](RunConfig& c, const Reader& r) { c.semistoch.spec.qin_bins = r.count(1); }},
      {"semistoch.wout_bins", [](RunConfig& c, const Reader& r) { c.semistoch.spec.wout_bins = r.count(1); }},
      {"semistoch.trace_dt", [](RunConfig& c, const Reader& r) { c.semistoch.trace_dt = r.positive(); }},
      {"semistoch.trace_duration", [](RunConfig& c, const Reader& r) { c.semistoch.trace_duration = r.positive(); }},
  };
  return table;
}

}  // namespace detail

/// Cross-key checks that cannot be made one key at a time.
inline void validate(const RunConfig& c) {
  try {
    c.params.validate();
  } catch (const ParameterError& e) {
    throw ConfigError("params", 0, e.what());
  }
  try {
    c.ensemble.validate();
    c.semistoch.spec.validate();
  } catch (const PreconditionError& e) {
    throw ConfigError("", 0, e.what());
  }
  if (c.sweep.delta_mu_max < c.sweep.delta_mu_min)
    throw ConfigError("sweep.delta_mu_max", 0, "must be >= sweep.delta_mu_min");
  if (c.correlations.tau_max <= c.correlations.tau_min)
    throw ConfigError("correlations.tau_max", 0, "must be > correlations.tau_min");
  const auto& b = c.oscillation.box;
  for (auto [name, range] : {std::pair{"u", b.coulomb_u}, std::pair{"temp_w", b.temp_w},
                             std::pair{"temp_h", b.temp_h}, std::pair{"delta_mu", b.delta_mu}})
    if (!(range.second > range.first))
      throw ConfigError(std::string("oscillation.") + name + "_max", 0, "must exceed the matching _min");
  if (c.semistoch.trace_duration > c.semistoch.spec.duration)
    throw ConfigError("semistoch.trace_duration", 0, "must not exceed semistoch.duration");
}

inline RunConfig parse_config(std::string_view text) {
  const auto entries = detail::tokenize(text);
  RunConfig c;
  std::map<std::string, int> seen;
  bool have_command = false;
  // The preset goes first so that explicit keys override it wherever they appear.
  for (const auto& e : entries) {
    if (e.section == "params" && e.key == "preset") {
      c.params = detail::preset_params(detail::Reader(e));
      c.preset = detail::lower(e.value);
    }
  }
  for (const auto& e : entries) {
    const detail::Reader r(e);
    const auto& table = detail::setters();
    const auto it = table.find(r.name());
    if (it == table.end()) throw ConfigError(r.name(), e.line, "unknown key");
    if (const auto [pos, fresh] = seen.emplace(r.name(), e.line); !fresh)
      throw ConfigError(r.name(), e.line, "duplicate key (first set on line " + std::to_string(pos->second) + ")");
    it->second(c, r);
    if (r.name() == "run.command") have_command = true;
  }
  if (!have_command) throw ConfigError("run.command", 0, "missing required key");
  validate(c);
  return c;
}

}  // namespace qdc
