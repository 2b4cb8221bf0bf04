#include <iostream>

#include <CLI11.hpp>

#include "rbmcda/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Rao-Blackwellized data association filtering and particle MCMC"};
  app.require_subcommand(0, 1);
  rbmcda::CliOptions opts;
  for (int i = 0; i < argc; ++i) opts.argv.emplace_back(argv[i]);
  bool print_defaults = false;
  app.add_flag("--print-defaults", print_defaults, "Print the default configuration and exit");

  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  int chains = 0;
  int threads = 0;
  std::vector<std::string> inputs;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--chains", chains, "Number of chains")->check(CLI::PositiveNumber);
    sub->add_option("--threads", threads, "OpenMP threads")->check(CLI::PositiveNumber);
    sub->add_option("inputs", inputs, "Scenario CSV (filter, sample) or run manifest (diagnose)");
    sub->add_flag("--print-defaults", print_defaults, "Print the default configuration and exit");
  };
  for (const char* name : {"simulate", "filter", "sample", "diagnose"}) add_common(app.add_subcommand(name));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : rbmcda::kExitValidation;
  }
  if (print_defaults) {
    std::cout << rbmcda::default_config_text() << '\n';
    return rbmcda::kExitOk;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return rbmcda::kExitValidation;
  }
  const CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--config")) opts.config_path = config;
  if (sub->count("--seed")) opts.seed = seed;
  if (sub->count("--out")) opts.out_dir = out;
  if (sub->count("--chains")) opts.chains = chains;
  if (sub->count("--threads")) opts.threads = threads;
  opts.inputs = inputs;
  return rbmcda::run_command(sub->get_name(), opts, std::cerr);
}
