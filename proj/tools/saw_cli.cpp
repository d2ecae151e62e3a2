// Command-line front end: simulate | run | eval.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "saw/config.hpp"
#include "saw/errors.hpp"
#include "saw/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitDegenerate = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian situation-awareness toolkit: HMM and particle-filter situation inference"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool no_noise = false;
  auto* simulate = app.add_subcommand("simulate", "Generate truth, measurements and labels");
  simulate->add_option("--config", config_path, "Scenario/model config (JSON)")->required();
  simulate->add_option("--out", out_dir, "Output directory")->required();
  simulate->add_option("--seed", seed, "Override the config seed");
  simulate->add_flag("--no-noise", no_noise, "Noiseless measurements and truth");

  std::string data_dir;
  std::string run_out;
  std::string engine = "both";
  std::size_t replicates = 1;
  auto* run = app.add_subcommand("run", "Run the inference engines over a measurement set");
  run->add_option("--config", config_path, "Scenario/model config (JSON)")->required();
  run->add_option("--data", data_dir, "Directory holding measurements.csv (labels.csv, truth.csv optional)")
      ->required();
  run->add_option("--engine", engine, "hmm, essm or both")->check(CLI::IsMember({"hmm", "essm", "both"}));
  run->add_option("--replicates", replicates, "Number of seed-derived replicate runs")->check(CLI::PositiveNumber);
  run->add_option("--out", run_out, "Output directory (default: <data>/run)");
  run->add_option("--seed", seed, "Override the config master seed");

  std::string run_dir;
  std::string labels_path;
  std::string truth_path;
  std::size_t margin = 2;
  auto* eval = app.add_subcommand("eval", "Compute metrics from run outputs");
  eval->add_option("--run", run_dir, "Run output directory")->required();
  eval->add_option("--labels", labels_path, "Ground-truth labels CSV (k,label)")->required();
  eval->add_option("--truth", truth_path, "Truth CSV (default: truth.csv next to the labels file)");
  eval->add_option("--margin", margin, "Steps excluded on each side of a label switch");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*simulate) {
      const saw::Config cfg = saw::load_config(config_path);
      const auto sim = saw::cmd_simulate(cfg, out_dir, seed, no_noise);
      std::cout << "wrote " << sim.truth.size() << " steps to " << out_dir << '\n';
    } else if (*run) {
      const saw::Config cfg = saw::load_config(config_path);
      const std::filesystem::path out = run_out.empty() ? std::filesystem::path(data_dir) / "run" : std::filesystem::path(run_out);
      const auto summary = saw::cmd_run(cfg, data_dir, out, {saw::parse_engine(engine), replicates, seed});
      std::cout << summary.dump(2) << '\n';
    } else if (*eval) {
      std::optional<std::filesystem::path> truth;
      if (!truth_path.empty()) truth = truth_path;
      const auto metrics = saw::cmd_eval(run_dir, labels_path, truth, margin);
      std::cout << metrics.dump(2) << '\n';
    }
  } catch (const saw::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const saw::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const saw::DegeneracyError& e) {
    std::cerr << "degeneracy: " << e.what() << '\n';
    return kExitDegenerate;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}
