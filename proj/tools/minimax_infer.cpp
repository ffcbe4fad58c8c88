#include "minimax/cli.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"stochastic minimax estimation and asymptotics"};
  app.require_subcommand(1);

  struct SubArgs {
    std::string config;
    std::string out;
    int threads = 0;
    bool force = false;
  };
  SubArgs args;
  std::string chosen;

  const std::pair<const char*, const char*> commands[] = {
      {"solve", "solve the population or sample minimax problem"},
      {"reduce", "active-set reduction and assumption certificates at gamma*"},
      {"limit", "construct and sample the limiting laws"},
      {"value-deriv", "directional derivative of the optimal value: formula vs finite differences"},
      {"validate", "Monte Carlo comparison of scaled errors against the limit laws"},
      {"report", "render tables from a previous run directory"},
  };
  for (const auto& [name, desc] : commands) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", args.config, "path to the JSON run configuration")->required();
    sub->add_option("--out", args.out, "output directory (overrides the config)");
    sub->add_option("--threads", args.threads, "worker thread count (overrides the config)");
    sub->add_flag("--force", args.force, "overwrite existing artifacts");
    sub->callback([&chosen, name = std::string(name)]() { chosen = name; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    minimax::RunConfig cfg = minimax::parse_config(args.config);
    if (cfg.command != chosen)
      throw minimax::ConfigError("/command: config requests '" + cfg.command +
                                 "' but the '" + chosen + "' subcommand was invoked");
    if (!args.out.empty()) cfg.out = args.out;
    if (args.threads > 0) cfg.threads = args.threads;
    cfg.force = args.force;
    minimax::run_command(cfg);
    return 0;
  } catch (const minimax::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
