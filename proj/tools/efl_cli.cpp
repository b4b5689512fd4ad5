// efl: command-line driver for federated experiments.
//
//   efl run    --config FILE [--seed N] [--algo NAME|all] [--out DIR] [--threads N]
//   efl sweep  --config FILE --seeds a,b,c [--algo NAME|all] [--out DIR] [--threads N]
//   efl theory --eta X --mu X --epochs E --rounds K --lsmooth L

#include <cstdint>
#include <exception>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "efl/efl.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string algo;
  std::string out;
  std::optional<std::size_t> threads;
};

std::vector<efl::Algorithm> resolve_algos(const std::string& name, efl::Algorithm fallback) {
  if (name.empty()) return {fallback};
  if (name == "all") return {std::begin(efl::kAllAlgorithms), std::end(efl::kAllAlgorithms)};
  return {efl::parse_algorithm(name)};
}

efl::ExperimentConfig load_with_overrides(const CommonArgs& a) {
  efl::ExperimentConfig c = efl::load_config(a.config);
  if (!a.out.empty()) c.output_dir = a.out;
  if (a.threads) c.threads = *a.threads;
  return c;
}

void print_summary(const efl::RunSummary& s, const efl::ExperimentConfig& c) {
  std::cout << std::setprecision(6) << efl::to_string(c.hp.algorithm) << " seed=" << c.seed
            << " records=" << s.records.size() << " initial_acc=" << s.initial_accuracy
            << " final_acc=" << s.final_accuracy << " cd_final=" << s.mean_cd_final
            << " sigma_acc_final=" << s.mean_sigma_acc_final;
  if (s.mean_nmi) std::cout << " mean_nmi=" << *s.mean_nmi;
  std::cout << " runtime=" << s.total_runtime << "s";
  if (!s.csv_path.empty()) std::cout << " csv=" << s.csv_path.string();
  std::cout << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator with equitable cluster weighting"};
  app.require_subcommand(1);

  CommonArgs run_args;
  std::optional<std::uint64_t> run_seed;
  auto* run = app.add_subcommand("run", "Run one experiment from a config file");
  run->add_option("--config", run_args.config, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", run_seed, "Override the config seed");
  run->add_option("--algo", run_args.algo, "fedavg|fedprox|equitable|fedprox_powd|all");
  run->add_option("--out", run_args.out, "Output directory");
  run->add_option("--threads", run_args.threads, "Worker threads for client updates");

  CommonArgs sweep_args;
  std::vector<std::uint64_t> seeds;
  auto* sweep = app.add_subcommand("sweep", "Run several seeds and report mean and std");
  sweep->add_option("--config", sweep_args.config, "Config file")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--seeds", seeds, "Comma-separated seeds")->required()->delimiter(',');
  sweep->add_option("--algo", sweep_args.algo, "fedavg|fedprox|equitable|fedprox_powd|all");
  sweep->add_option("--out", sweep_args.out, "Output directory");
  sweep->add_option("--threads", sweep_args.threads, "Worker threads for client updates");

  double eta = 0, mu = 0, lsmooth = 0;
  std::size_t epochs = 0, rounds = 0;
  auto* theory = app.add_subcommand("theory", "Check convergence-theorem conditions");
  theory->add_option("--eta", eta, "Learning rate (0: use 1/(4E sqrt(3LK)))")->required();
  theory->add_option("--mu", mu, "Proximal coefficient")->required();
  theory->add_option("--epochs", epochs, "Local epochs E")->required();
  theory->add_option("--rounds", rounds, "Communication rounds K")->required();
  theory->add_option("--lsmooth", lsmooth, "Smoothness constant L")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      efl::ExperimentConfig base = load_with_overrides(run_args);
      if (run_seed) base.seed = *run_seed;
      for (efl::Algorithm a : resolve_algos(run_args.algo, base.hp.algorithm)) {
        efl::ExperimentConfig c = base;
        c.hp.algorithm = a;
        print_summary(efl::run_experiment(c), c);
      }
    } else if (*sweep) {
      efl::ExperimentConfig base = load_with_overrides(sweep_args);
      const auto rows = efl::run_sweep(base, seeds, resolve_algos(sweep_args.algo,
                                                                  base.hp.algorithm));
      std::cout << efl::kSweepHeader << "\n";
      for (const auto& r : rows) {
        std::cout << efl::to_string(r.algorithm) << "," << r.runs << "," << r.final_acc.mean
                  << "," << r.final_acc.std << "," << r.cd.mean << "," << r.cd.std << ","
                  << r.sigma_acc.mean << "," << r.sigma_acc.std << ",";
        if (r.nmi) std::cout << r.nmi->mean << "," << r.nmi->std;
        else std::cout << ",";
        std::cout << "\n";
      }
    } else if (*theory) {
      if (eta == 0.0 && epochs >= 1 && rounds >= 1 && lsmooth > 0.0)
        eta = efl::theorem_eta(epochs, rounds, lsmooth);
      std::cout << efl::validate_theorem_conditions(eta, mu, epochs, rounds, lsmooth);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
