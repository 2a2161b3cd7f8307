#include "dbm/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace dbm::cli;
  CLI::App app{"Deep Boltzmann machine on the Nishimori line: variational solution, phase diagram and "
               "finite-N simulation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  Overrides over;
  app.add_option("--config", config_path, "JSON run config (defaults are used when omitted)")->envname("DBM_CONFIG");
  app.add_option("--seed", over.seed, "base seed for disorder and spin streams")->envname("DBM_SEED");
  app.add_option("--threads", over.threads, "worker threads (0 = all cores)")
      ->envname("DBM_THREADS")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--out", over.out, "output directory")->envname("DBM_OUT");
  app.add_option("--tol", over.tol, "solver tolerance (solve and phase-scan)")
      ->envname("DBM_TOL")
      ->check(CLI::PositiveNumber);

  const char* help[] = {"solve the variational principle with every applicable method",
                        "scan one parameter axis and classify the phase of each point",
                        "maximise rho([M^2]^(oo)) over the form factors",
                        "quenched finite-N simulation (block Gibbs or enumeration)",
                        "exact enumeration at several N: magnetisations, overlaps, pressure",
                        "run the invariant suite of every module",
                        "check the one-body Nishimori identities and psi derivatives"};
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < command_names().size(); ++i) subs.push_back(app.add_subcommand(command_names()[i], help[i]));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalidInput;
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_config_file(config_path);
    apply_overrides(cfg, over);
  } catch (const std::exception& e) {
    std::cerr << "error: invalid input: " << e.what() << '\n';
    return kInvalidInput;
  }
  for (auto* s : subs) {
    if (s->parsed()) return run_command(s->get_name(), cfg, std::cout, std::cerr);
  }
  return kInvalidInput;
}
