#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "nanoflood/io.hpp"

namespace nanoflood {

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"nanoflood: two-phase flow with suspended-particle transport and "
               "formation damage in porous media"};
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "Run a simulation from a config file");
  std::string config_path;
  std::string out_dir;
  std::string capillary_mode;
  double until_pvi = -1.0;
  double snapshot_every = -1.0;
  std::uint64_t seed = 0;
  run->add_option("--config", config_path, "Path to the config document")->required();
  run->add_option("--out", out_dir, "Output directory (created if missing)")->required();
  run->add_option("--until-pvi", until_pvi, "Override the target pore volumes injected");
  CLI::Option* seed_opt =
      run->add_option("--seed", seed, "Override the permeability scenario seed");
  run->add_option("--capillary-mode", capillary_mode,
                  "Capillary handling in the pressure solve")
      ->check(CLI::IsMember({"linearized", "lagged"}));
  run->add_option("--snapshot-every-pvi", snapshot_every, "Override the snapshot cadence");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    SimulationConfig cfg = parse_config(config_path);
    if (until_pvi >= 0.0) {
      cfg.target_pvi = until_pvi;
      cfg.end_time = 0.0;
    }
    if (seed_opt->count() > 0) cfg.perm.seed = seed;
    if (capillary_mode == "linearized") {
      cfg.iteration.capillary = CapillaryMode::linearized_coupled;
    } else if (capillary_mode == "lagged") {
      cfg.iteration.capillary = CapillaryMode::lagged_explicit;
    }
    if (snapshot_every >= 0.0) cfg.snapshot_every_pvi = snapshot_every;
    cfg.validate();

    Simulator sim(std::move(cfg));
    OutputWriter writer(out_dir, sim.config());
    log_info("run " + writer.run_id() + " -> " + writer.dir().string());

    bool clean = false;
    try {
      clean = sim.run(
          [&](const Simulator& s, const StepReport& rep) {
            writer.record_step(s, rep);
            if (!rep.converged) {
              writer.write_failed_step(rep, "outer iteration did not converge within " +
                                                std::to_string(s.config().iteration.max_outer) +
                                                " iterations");
            }
          },
          [&](const Simulator& s, bool) {
            writer.write_snapshot(s);
            log_info("step " + std::to_string(s.state().step) + ", pvi " +
                     std::to_string(s.state().pvi) + ", water residual " +
                     std::to_string(s.ledger().water_residual_rel()));
          });
    } catch (const SolverError& e) {
      StepReport rep;
      rep.step = sim.state().step + 1;
      rep.time = sim.state().time;
      rep.pvi = sim.state().pvi;
      writer.write_failed_step(rep, std::string("linear solver failure: ") + e.what(),
                               e.residual_history);
      writer.finalize(sim, false);
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }

    writer.finalize(sim, clean);
    if (!clean) {
      std::cerr << "error: step " << sim.state().step + 1
                << " did not converge; aborted (see failed_step.json)\n";
      return 2;
    }
    log_info("completed " + std::to_string(sim.state().step) + " steps, final pvi " +
             std::to_string(sim.state().pvi));
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace nanoflood
