// fput: simulate FPUT chains, analyze trajectories, and emit CSV tables.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fput/errors.hpp"
#include "fput/experiment.hpp"

namespace {

namespace fs = std::filesystem;

constexpr int kExitFailure = 1;
constexpr int kExitPartial = 3;

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const fput::ChecksumError*>(&e)) return "checksum";
  if (dynamic_cast<const fput::FormatError*>(&e)) return "format";
  if (dynamic_cast<const fput::IoError*>(&e)) return "io";
  if (dynamic_cast<const fput::DomainError*>(&e)) return "domain";
  if (dynamic_cast<const fput::IntegrationBlowup*>(&e)) return "integration";
  if (dynamic_cast<const fput::DegenerateColumn*>(&e)) return "degenerate";
  if (dynamic_cast<const fput::NumericalError*>(&e)) return "numerical";
  if (dynamic_cast<const fput::OptimizationBlowup*>(&e)) return "optimization";
  return "internal";
}

struct PcaFlags {
  std::string standardize = "correlation";
  double kaiser = fput::kJolliffeThreshold;
  double sensitivity = 1.0;

  void add(CLI::App* cmd) {
    cmd->add_option("--standardize", standardize,
                    "correlation or center-only")
        ->check(CLI::IsMember({"correlation", "center-only"}))
        ->capture_default_str();
    cmd->add_option("--kaiser-threshold", kaiser, "KC eigenvalue threshold")
        ->capture_default_str();
    cmd->add_option("--sensitivity", sensitivity, "Kneedle sensitivity s")
        ->capture_default_str();
  }
  fput::PcaOptions pca() const {
    fput::PcaOptions o;
    o.standardization = fput::parse_standardization(standardize);
    return o;
  }
  fput::EstimatorOptions estimators() const {
    return {kaiser, sensitivity};
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FPUT beta-chain simulation and intrinsic-dimension analysis"};
  // --h is the integration step, so help keeps only its long form.
  app.set_help_flag("--help", "print this help and exit");
  app.set_version_flag("--version", std::string(FPUT_VERSION));
  app.set_config("--config", "", "INI config file; [command] sections")
      ->check(CLI::ExistingFile);
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "integrate one chain per beta");
  fput::SimulateOptions so;
  std::optional<double> beta;
  std::string grid;
  std::string sim_out;
  bool no_store = false;
  PcaFlags sim_pca;
  auto* beta_opt = sim->add_option("--beta", beta, "quartic coupling");
  auto* grid_opt =
      sim->add_option("--beta-grid", grid, "start:stop:step, e.g. 0.1:3:0.1");
  beta_opt->excludes(grid_opt);
  sim->add_option("--k", so.ic.mode, "excited mode")->capture_default_str();
  sim->add_option("--A", so.ic.amplitude, "amplitude")->capture_default_str();
  sim->add_option("--n-samples", so.n_samples, "recorded samples")
      ->capture_default_str();
  sim->add_option("--h", so.model.h, "integration step")->capture_default_str();
  sim->add_option("--N", so.model.n_oscillators, "oscillators")
      ->capture_default_str();
  sim->add_option("--stride", so.model.stride, "steps between samples")
      ->capture_default_str();
  sim->add_option("--out", sim_out, "output directory (env FPUT_OUTPUT_DIR)");
  sim->add_option("--jobs", so.jobs, "concurrent trajectories")
      ->capture_default_str();
  sim->add_flag("--analyze", so.analyze, "run PCA and estimators after each run");
  sim->add_flag("--no-store", no_store,
                "skip the binary file; analysis re-integrates (needs --analyze)");
  sim_pca.add(sim);

  // analyze
  auto* ana = app.add_subcommand("analyze", "PCA spectrum, J_m curve, m* estimates");
  fput::AnalyzeOptions ao;
  std::string ana_out;
  PcaFlags ana_pca;
  ana->add_option("trajectory", ao.trajectory, "trajectory file")
      ->required()
      ->check(CLI::ExistingFile);
  ana->add_option("--out", ana_out, "output directory");
  ana_pca.add(ana);

  // sweep-report
  auto* rep = app.add_subcommand("sweep-report", "consolidate m*(beta) tables");
  std::string rep_dir;
  std::string rep_table;
  rep->add_option("dir", rep_dir, "directory with manifests and estimates")
      ->required();
  rep->add_option("--table", rep_table,
                  "output CSV (default <dir>/sweep_report.csv)");

  // tsne
  auto* ts = app.add_subcommand("tsne", "exact t-SNE of a trajectory prefix");
  fput::TsneOptions to;
  std::optional<std::uint64_t> take;
  std::string metric = "euclidean";
  std::optional<double> learning_rate;
  std::string ts_out;
  ts->add_option("trajectory", to.trajectory, "trajectory file")
      ->required()
      ->check(CLI::ExistingFile);
  ts->add_option("--take", take, "embed the first N rows");
  ts->add_option("--perplexity", to.config.perplexity)->capture_default_str();
  ts->add_option("--metric", metric)
      ->check(CLI::IsMember({"euclidean", "cosine"}))
      ->capture_default_str();
  ts->add_option("--iterations", to.config.iterations)->capture_default_str();
  ts->add_option("--exaggeration", to.config.early_exaggeration)
      ->capture_default_str();
  ts->add_option("--exaggeration-iterations", to.config.exaggeration_iterations)
      ->capture_default_str();
  ts->add_option("--learning-rate", learning_rate,
                 "default max(n/exaggeration, 50)");
  ts->add_option("--seed", to.config.seed)->capture_default_str();
  ts->add_option("--out", ts_out, "output directory");

  // mode-energies
  auto* me = app.add_subcommand("mode-energies", "E_k(t) time series");
  fput::ModeEnergiesOptions mo;
  std::string modes = "1";
  std::string me_out;
  me->add_option("trajectory", mo.trajectory, "trajectory file")
      ->required()
      ->check(CLI::ExistingFile);
  me->add_option("--modes", modes, "e.g. 1,3,5 or 1..5")->capture_default_str();
  me->add_option("--stride", mo.stride, "keep every n-th sample")
      ->capture_default_str();
  me->add_option("--out", me_out, "output CSV (default <stem>.modes.csv)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      if (beta) {
        so.betas = {*beta};
      } else if (!grid.empty()) {
        so.betas = fput::parse_beta_grid(grid);
      } else {
        throw fput::DomainError("one of --beta or --beta-grid is required");
      }
      so.out_dir = sim_out.empty() ? fput::default_output_dir(".")
                                   : fs::path(sim_out);
      so.store = !no_store;
      so.pca = sim_pca.pca();
      so.estimators = sim_pca.estimators();
      const auto runs = fput::cmd_simulate(so, std::cout);
      std::size_t failed = 0;
      for (const auto& r : runs) failed += r.ok ? 0 : 1;
      if (failed == runs.size()) return kExitFailure;
      return failed ? kExitPartial : 0;
    }
    if (ana->parsed()) {
      if (!ana_out.empty()) ao.out_dir = fs::path(ana_out);
      ao.pca = ana_pca.pca();
      ao.estimators = ana_pca.estimators();
      const auto res = fput::cmd_analyze(ao);
      for (const auto& e : res.estimates.estimates) {
        std::cout << fput::method_tag(e.method) << " m*=" << e.m_star
                  << " raw=" << fput::format_double(e.raw) << "\n";
      }
      for (const auto& [method, reason] : res.estimates.failures) {
        std::cout << fput::method_tag(method) << " failed: " << reason << "\n";
      }
      std::cout << "wrote " << res.estimates_csv.string() << "\n";
      return 0;
    }
    if (rep->parsed()) {
      const fs::path table = rep_table.empty()
                                 ? fs::path(rep_dir) / "sweep_report.csv"
                                 : fs::path(rep_table);
      const auto report = fput::cmd_sweep_report(rep_dir, table, std::cerr);
      std::cout << "wrote " << report.rows.size() << " rows to "
                << table.string() << "\n";
      return 0;
    }
    if (ts->parsed()) {
      to.take = take;
      to.config.metric = fput::parse_metric(metric);
      to.config.learning_rate = learning_rate;
      if (!ts_out.empty()) to.out_dir = fs::path(ts_out);
      const auto res = fput::cmd_tsne(to);
      std::cout << "wrote " << res.embedding_csv.string() << " and "
                << res.kl_csv.string() << "\n";
      return 0;
    }
    if (me->parsed()) {
      mo.modes = fput::parse_mode_list(modes);
      mo.out = me_out.empty()
                   ? mo.trajectory.parent_path() /
                         (mo.trajectory.stem().string() + ".modes.csv")
                   : fs::path(me_out);
      const auto rows = fput::cmd_mode_energies(mo);
      std::cout << "wrote " << rows << " rows to " << mo.out.string() << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << error_kind(e) << ": " << e.what() << "\n";
    return kExitFailure;
  }
  return 0;
}
