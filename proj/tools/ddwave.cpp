// Command-line front-end for delay-Doppler waveform design experiments.
//
// Subcommands (each driven by a JSON experiment file):
//   bcrlb     Bayesian CRLB diagonal vs SNR for a chosen spectrum.
//             Columns: snr_db,bcrlb_tau_s2,bcrlb_nu_hz2,bcrlb_tau_norm,bcrlb_nu_norm
//   pareto    Pareto sweep of optimized waveforms against the full-rate
//             rectangular reference.
//             Columns: rho_or_kappa,alpha,chi_tau_db,chi_nu_db,objective
//             (designs land in pareto_spectra.csv: rho_or_kappa,alpha,harmonic_k,re,im)
//   simulate  Monte-Carlo NMSE of the hybrid ML-MAP estimator for the
//             optimized and reference systems.
//             Columns: snr_db,system,nmse_tau,nmse_nu,bcrlb_tau_norm,bcrlb_nu_norm
//   optimize  Single-weighting design emission (spectrum.csv: harmonic_k,re,im).
//
// Exit codes: 0 success, 2 config error, 3 numerical failure.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ddwave/ddwave.hpp"

namespace {

struct CliArgs {
  std::string config;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CliArgs& args) {
  cmd->add_option("--config", args.config, "experiment config file (JSON)")
      ->required();
  cmd->add_option("--out", args.out_dir, "output directory (overrides config output_dir)");
  cmd->add_option("--seed", args.seed, "seed override for randomized commands")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--threads", args.threads, "worker threads (0 = all cores)");
  cmd->add_flag("--quiet", args.quiet, "suppress progress output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ddwave: transmit waveform design for undersampled delay-Doppler estimation"};
  app.require_subcommand(1);

  CliArgs args;
  CLI::App* cmd_bcrlb = app.add_subcommand("bcrlb", "evaluate the BCRLB over an SNR sweep");
  CLI::App* cmd_pareto = app.add_subcommand("pareto", "sweep Pareto-optimal designs");
  CLI::App* cmd_simulate = app.add_subcommand("simulate", "Monte-Carlo NMSE verification");
  CLI::App* cmd_optimize = app.add_subcommand("optimize", "emit a single optimized design");
  for (CLI::App* c : {cmd_bcrlb, cmd_pareto, cmd_simulate, cmd_optimize}) {
    add_common(c, args);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  ddwave::RunOptions opts;
  opts.out_dir = args.out_dir;
  if (args.seed_set) opts.seed = args.seed;
  opts.threads = args.threads;
  opts.quiet = args.quiet;

  try {
    const ddwave::ordered_json cfg = ddwave::expcfg::load_config_file(args.config);
    if (cmd_bcrlb->parsed()) ddwave::run_bcrlb(cfg, opts);
    if (cmd_pareto->parsed()) ddwave::run_pareto(cfg, opts);
    if (cmd_simulate->parsed()) ddwave::run_simulate(cfg, opts);
    if (cmd_optimize->parsed()) ddwave::run_optimize(cfg, opts);
  } catch (const ddwave::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ddwave::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
