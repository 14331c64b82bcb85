#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lqr_rpi/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Exact, robust and data-driven policy iteration for continuous-time LQR"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  const char* commands[][2] = {
      {"are", "Solve the algebraic Riccati equation (P*, K*, residual)"},
      {"pi-exact", "Exact Kleinman policy iteration trace"},
      {"pi-robust", "Policy iteration with injected evaluation disturbances"},
      {"pi-data", "Off-policy data-driven policy iteration"},
      {"fig1", "Four-cell near/far x small/large disturbance comparison"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "JSON experiment config")->required();
    sub->add_option("--out", out, "Output path prefix");
    sub->add_option("--seed", seed, "Master seed override");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return lqr_rpi::cli::kExitConfigError;
  }

  const CLI::App* sub = app.get_subcommands().front();
  std::optional<std::string> out_opt;
  if (sub->count("--out")) out_opt = out;
  std::optional<std::uint64_t> seed_opt;
  if (sub->count("--seed")) seed_opt = seed;
  return lqr_rpi::cli::run_cli(sub->get_name(), config, out_opt, seed_opt,
                               std::cout, std::cerr);
}
