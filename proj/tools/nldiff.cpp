#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nldiff/config.hpp"
#include "nldiff/error.hpp"
#include "nldiff/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Lattice experiments for nonlocal diffusion on exterior domains"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  std::string threads;
  const char* commands[][2] = {
      {"stationary", "solve for phi; writes phi.nldf, radial_psi.csv, stationary.json"},
      {"simulate", "evolve the initial data; writes metrics.csv, errors.csv, snapshots"},
      {"omega", "tabulate the regular part of the fundamental solution"},
      {"verify", "run the full pipeline and every acceptance check"},
      {"report", "rebuild report.csv and margins.csv from verify artifacts"},
      {"selftest", "run the oracle-scale checks"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "flat key = value configuration file");
    sub->add_option("--output", output_dir, "output directory (overrides output_dir)");
    sub->add_option("--threads", threads, "thread count or 'auto'");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  nldiff::RunConfig config;
  try {
    if (!config_path.empty()) {
      config = nldiff::parse_config(config_path);
    }
    if (!output_dir.empty()) config.output_dir = output_dir;
    if (!threads.empty()) {
      if (threads == "auto") {
        config.threads = 0;
      } else {
        config.threads = std::stoi(threads);
        if (config.threads <= 0) throw std::invalid_argument(threads);
      }
    }
  } catch (const nldiff::Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception&) {
    std::cerr << "configuration error: --threads expects 'auto' or a positive integer\n";
    return 2;
  }
  return nldiff::dispatch(command, config, std::cout, std::cerr);
}
