// qdcycles <command> --config FILE [--out DIR] [--seed N] [--threads N]
//
// Exit codes: 0 ok, 1 unexpected error, 2 configuration or usage error,
// 3 parameter or precondition error, 4 degenerate spectrum or no stall bias.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "run.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw qdc::ConfigError("", 0, "cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic thermodynamics of a quantum-dot engine"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  for (const auto& [cmd, name] : qdc::kCommandNames) {
    auto* sub = app.add_subcommand(std::string(name));
    sub->add_option("--config,-c", config_path, "INI run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out,-o", out_dir, "output directory (overrides run.output_dir)");
    sub->add_option("--seed", seed, "base seed (overrides ensemble.base_seed)");
    sub->add_option("--threads,-j", threads, "worker threads (overrides run.threads)")->check(CLI::NonNegativeNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;  // usage errors count as configuration errors
  }

  const std::string command = app.get_subcommands().front()->get_name();
  const auto* sub = app.get_subcommands().front();
  try {
    // A config is optional; without one the command runs at the default parameters.
    const std::string source = config_path.empty() ? "command = " + command + "\n" : read_file(config_path);
    qdc::RunConfig cfg = qdc::parse_config(source);
    if (qdc::to_string(cfg.command) != command)
      throw qdc::ConfigError("run.command", 0,
                             "config names '" + std::string(qdc::to_string(cfg.command)) + "' but '" + command +
                                 "' was requested");
    if (sub->count("--out")) cfg.output_dir = out_dir;
    if (sub->count("--seed")) cfg.ensemble.base_seed = seed;
    if (sub->count("--threads")) cfg.threads = threads;
    const auto result = qdc::cli::run(cfg, source);
    std::cerr << "wrote " << result.files.size() << " files to " << cfg.output_dir << " in " << result.wall_seconds
              << " s\n";
    return 0;
  } catch (const qdc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const qdc::ParameterError& e) {
    std::cerr << "parameter error: " << e.what() << '\n';
    return 3;
  } catch (const qdc::PreconditionError& e) {
    std::cerr << "precondition failed: " << e.what() << '\n';
    return 3;
  } catch (const qdc::DegeneracyError& e) {
    std::cerr << "degenerate: " << e.what() << '\n';
    return 4;
  } catch (const qdc::NoStallError& e) {
    std::cerr << "no stall: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
