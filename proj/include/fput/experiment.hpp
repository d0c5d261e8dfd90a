#pragma once

// Command implementations behind the `fput` executable. Each command is a
// plain function so the test suite can drive it without a subprocess.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fput/chain.hpp"
#include "fput/estimators.hpp"
#include "fput/pca.hpp"
#include "fput/report.hpp"
#include "fput/trajectory.hpp"
#include "fput/tsne.hpp"

namespace fput {

/// "start:stop:step", inclusive of stop up to rounding. Values are rounded
/// to 10 decimals so 0.1:3:0.1 yields exactly 0.1, 0.2, ..., 3.
std::vector<double> parse_beta_grid(const std::string& text);

/// "1,3,5", "1..5" or a mix such as "1..3,7".
std::vector<int> parse_mode_list(const std::string& text);

/// File stem shared by every artifact of one run, e.g. fput_k1_beta0.30.
std::string run_stem(int k, double beta);

/// Output directory from FPUT_OUTPUT_DIR when set, otherwise `fallback`.
std::filesystem::path default_output_dir(const std::filesystem::path& fallback);

struct AnalysisOutputs {
  PcaResult pca;
  EstimateSet estimates;
  std::filesystem::path spectrum_csv;
  std::filesystem::path curve_csv;
  std::filesystem::path estimates_csv;
};

/// PCA + estimators on `source`, writing <stem>.spectrum.csv, <stem>.curve.csv
/// and <stem>.estimates.csv into `out_dir`. A center-only spectrum gets the
/// extra stem suffix ".center-only".
AnalysisOutputs analyze_and_report(const RowSource& source,
                                   const TrajectoryHeader& meta,
                                   const std::filesystem::path& out_dir,
                                   const std::string& stem,
                                   const PcaOptions& pca = {},
                                   const EstimatorOptions& estimators = {});

struct SimulateOptions {
  ModelParams model;
  InitialCondition ic;
  std::uint64_t n_samples = 4'000'000;
  std::vector<double> betas;
  std::filesystem::path out_dir = ".";
  int jobs = 1;
  /// Run PCA and the estimators after each trajectory.
  bool analyze = false;
  /// Write the binary trajectory. With store off, analysis re-integrates.
  bool store = true;
  PcaOptions pca;
  EstimatorOptions estimators;
};

struct BetaRun {
  double beta = 0.0;
  std::string stem;
  std::filesystem::path trajectory;
  std::filesystem::path manifest;
  IntegrationSummary summary;
  bool ok = false;
  std::string error;
};

/// One trajectory (and manifest) per beta. Failures are recorded per beta
/// and do not stop the sweep. Throws IoError when out_dir does not exist.
std::vector<BetaRun> cmd_simulate(const SimulateOptions& options,
                                  std::ostream& log);

struct AnalyzeOptions {
  std::filesystem::path trajectory;
  /// Defaults to the trajectory's directory.
  std::optional<std::filesystem::path> out_dir;
  PcaOptions pca;
  EstimatorOptions estimators;
};

AnalysisOutputs cmd_analyze(const AnalyzeOptions& options);

struct SweepReport {
  std::vector<EstimateRow> rows;
  /// Manifests without a matching estimates file.
  std::vector<std::string> missing;
  std::filesystem::path table;
};

/// Consolidates every *.estimates.csv in `dir` into one table sorted by
/// (k, method, beta). Runs with a manifest but no analysis are listed in
/// `missing` and reported on `log`.
SweepReport cmd_sweep_report(const std::filesystem::path& dir,
                             const std::filesystem::path& table,
                             std::ostream& log);

struct TsneOptions {
  std::filesystem::path trajectory;
  /// Leading rows to embed; all rows when unset.
  std::optional<std::uint64_t> take;
  TsneConfig config;
  std::optional<std::filesystem::path> out_dir;
};

struct TsneOutputs {
  Embedding embedding;
  std::filesystem::path embedding_csv;
  std::filesystem::path kl_csv;
};

TsneOutputs cmd_tsne(const TsneOptions& options);

struct ModeEnergiesOptions {
  std::filesystem::path trajectory;
  std::vector<int> modes;
  std::uint64_t stride = 1;
  std::filesystem::path out;
};

/// Returns the number of rows written.
std::uint64_t cmd_mode_energies(const ModeEnergiesOptions& options);

}  // namespace fput
