#include "fput/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fput/errors.hpp"
#include "fput/modes.hpp"

namespace fput {

namespace fs = std::filesystem;

namespace {

double parse_number(const std::string& text, const std::string& what) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw DomainError("invalid " + what + " '" + text + "'");
  }
  return value;
}

int parse_int(const std::string& text, const std::string& what) {
  int value = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw DomainError("invalid " + what + " '" + text + "'");
  }
  return value;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void close_output(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Provenance run_provenance(const std::string& command,
                          const TrajectoryHeader& meta) {
  Provenance p(command);
  p.set("beta", meta.beta)
      .set("k", static_cast<std::int64_t>(meta.mode))
      .set("A", meta.amplitude)
      .set("N", static_cast<std::int64_t>(meta.n_columns / 2))
      .set("h", meta.h)
      .set("stride", static_cast<std::int64_t>(meta.stride))
      .set("n_samples", static_cast<std::int64_t>(meta.n_samples));
  return p;
}

constexpr const char* kTrajectoryExt = ".traj";
constexpr const char* kManifestExt = ".manifest.json";
constexpr const char* kEstimatesExt = ".estimates.csv";

}  // namespace

std::vector<double> parse_beta_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  if (parts.size() != 3) {
    throw DomainError("beta grid must be start:stop:step, got '" + text + "'");
  }
  const double start = parse_number(parts[0], "grid start");
  const double stop = parse_number(parts[1], "grid stop");
  const double step = parse_number(parts[2], "grid step");
  if (!(step > 0.0) || stop < start) {
    throw DomainError("beta grid needs step > 0 and stop >= start");
  }
  const auto count =
      static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> betas(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double raw = start + static_cast<double>(i) * step;
    betas[i] = std::round(raw * 1e10) / 1e10;
  }
  return betas;
}

std::vector<int> parse_mode_list(const std::string& text) {
  std::vector<int> modes;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      modes.push_back(parse_int(item, "mode"));
      continue;
    }
    const int lo = parse_int(item.substr(0, dots), "mode range");
    const int hi = parse_int(item.substr(dots + 2), "mode range");
    if (hi < lo) throw DomainError("empty mode range '" + item + "'");
    for (int k = lo; k <= hi; ++k) modes.push_back(k);
  }
  return modes;
}

std::string run_stem(int k, double beta) {
  char buf[64];
  const double cents = beta * 100.0;
  if (std::abs(cents - std::round(cents)) < 1e-9) {
    std::snprintf(buf, sizeof buf, "fput_k%d_beta%.2f", k, beta);
  } else {
    std::snprintf(buf, sizeof buf, "fput_k%d_beta%.10g", k, beta);
  }
  return buf;
}

fs::path default_output_dir(const fs::path& fallback) {
  if (const char* env = std::getenv("FPUT_OUTPUT_DIR"); env && *env) {
    return env;
  }
  return fallback;
}

AnalysisOutputs analyze_and_report(const RowSource& source,
                                   const TrajectoryHeader& meta,
                                   const fs::path& out_dir,
                                   const std::string& stem,
                                   const PcaOptions& pca,
                                   const EstimatorOptions& estimators) {
  AnalysisOutputs out;
  out.pca = analyze(source, pca);
  out.estimates = estimate_all(out.pca.spectrum, out.pca.curve, estimators);

  std::string base = stem;
  if (pca.standardization == Standardization::center_only) {
    base += ".center-only";
  }
  Provenance prov = run_provenance("analyze", meta);
  prov.set("standardize", to_string(pca.standardization))
      .set("kaiser_threshold", estimators.kaiser_threshold)
      .set("kneedle_sensitivity", estimators.kneedle_sensitivity);

  out.spectrum_csv = out_dir / (base + ".spectrum.csv");
  out.curve_csv = out_dir / (base + ".curve.csv");
  out.estimates_csv = out_dir / (base + kEstimatesExt);

  auto spectrum_file = open_output(out.spectrum_csv);
  write_spectrum_csv(spectrum_file, out.pca.spectrum, prov);
  close_output(spectrum_file, out.spectrum_csv);

  auto curve_file = open_output(out.curve_csv);
  write_curve_csv(curve_file, out.pca.curve, prov);
  close_output(curve_file, out.curve_csv);

  std::vector<std::string> notes;
  for (const auto& [method, reason] : out.estimates.failures) {
    notes.push_back(method_tag(method) + " failed: " + reason);
  }
  auto est_file = open_output(out.estimates_csv);
  write_estimates_csv(
      est_file,
      estimate_rows(meta.beta, static_cast<int>(meta.mode), out.estimates),
      prov, notes);
  close_output(est_file, out.estimates_csv);
  return out;
}

namespace {

void write_manifest(const BetaRun& run, const SimulateOptions& options,
                    const ModelParams& params, const TrajectoryHeader& meta) {
  nlohmann::ordered_json j;
  const Provenance prov = run_provenance("simulate", meta);
  j["version"] = FPUT_VERSION;
  j["config_hash"] = prov.hash_hex();
  j["stem"] = run.stem;
  j["status"] = run.ok ? "ok" : "failed";
  if (!run.ok) j["error"] = run.error;
  j["beta"] = params.beta;
  j["k"] = options.ic.mode;
  j["A"] = options.ic.amplitude;
  j["N"] = params.n_oscillators;
  j["h"] = params.h;
  j["stride"] = params.stride;
  j["n_samples"] = options.n_samples;
  j["stored"] = options.store;
  if (run.ok) {
    if (options.store) j["trajectory"] = run.trajectory.filename().string();
    j["initial_energy"] = run.summary.initial_energy;
    j["final_energy"] = run.summary.final_energy;
    j["energy_density"] =
        energy_density(run.summary.initial_energy, params.n_oscillators);
    j["max_relative_drift"] = run.summary.max_relative_drift;
    j["steps"] = run.summary.steps;
  }
  auto out = open_output(run.manifest);
  out << j.dump(2) << "\n";
  close_output(out, run.manifest);
}

BetaRun run_one(const SimulateOptions& options, double beta) {
  BetaRun run;
  run.beta = beta;
  run.stem = run_stem(options.ic.mode, beta);
  run.trajectory = options.out_dir / (run.stem + kTrajectoryExt);
  run.manifest = options.out_dir / (run.stem + kManifestExt);
  ModelParams params = options.model;
  params.beta = beta;
  const TrajectoryHeader meta =
      TrajectoryHeader::from_run(params, options.ic, options.n_samples);
  try {
    params.validate();
    if (options.store) {
      TrajectoryWriter writer(run.trajectory, meta);
      run.summary = integrate(options.ic, params, options.n_samples,
                              [&](std::span<const double> row, double) {
                                writer.append(row);
                              });
      writer.finalize();
      if (options.analyze) {
        const FileSource source(run.trajectory);
        analyze_and_report(source, meta, options.out_dir, run.stem,
                           options.pca, options.estimators);
      }
    } else {
      const SimulationSource source(options.ic, params, options.n_samples);
      analyze_and_report(source, meta, options.out_dir, run.stem, options.pca,
                         options.estimators);
      run.summary = source.last_summary();
    }
    run.ok = true;
  } catch (const std::exception& e) {
    run.ok = false;
    run.error = e.what();
  }
  write_manifest(run, options, params, meta);
  return run;
}

}  // namespace

std::vector<BetaRun> cmd_simulate(const SimulateOptions& options,
                                  std::ostream& log) {
  if (options.betas.empty()) throw DomainError("beta grid is empty");
  for (double b : options.betas) {
    if (!(b > 0.0)) {
      throw DomainError("every beta must be > 0, got " + format_double(b));
    }
  }
  if (options.n_samples < 2) throw DomainError("n_samples must be >= 2");
  if (!options.store && !options.analyze) {
    throw DomainError("--no-store without --analyze produces no output");
  }
  if (options.jobs < 1) throw DomainError("jobs must be >= 1");
  {
    ModelParams check = options.model;
    check.beta = options.betas.front();
    check.validate();
    if (options.ic.mode < 1 || options.ic.mode > check.n_oscillators) {
      throw DomainError("mode k must lie in [1, N]");
    }
  }
  std::error_code ec;
  if (!fs::is_directory(options.out_dir, ec)) {
    throw IoError("output directory does not exist: " +
                  options.out_dir.string());
  }

  std::vector<BetaRun> runs(options.betas.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      runs[i] = run_one(options, options.betas[i]);
    }
  };
  const auto n_threads = std::min<std::size_t>(
      static_cast<std::size_t>(options.jobs), runs.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (const auto& run : runs) {
    if (run.ok) {
      log << run.stem << ": ok, E=" << format_double(run.summary.initial_energy)
          << ", drift=" << format_double(run.summary.max_relative_drift)
          << "\n";
    } else {
      log << run.stem << ": FAILED: " << run.error << "\n";
    }
  }
  return runs;
}

AnalysisOutputs cmd_analyze(const AnalyzeOptions& options) {
  const FileSource source(options.trajectory);
  const fs::path out_dir =
      options.out_dir ? *options.out_dir : options.trajectory.parent_path();
  const std::string stem = options.trajectory.stem().string();
  try {
    return analyze_and_report(source, source.header(),
                              out_dir.empty() ? fs::path(".") : out_dir, stem,
                              options.pca, options.estimators);
  } catch (const DegenerateColumn& e) {
    throw DegenerateColumn(options.trajectory.string() + ": " + e.what(),
                           e.column());
  } catch (const NumericalError& e) {
    throw NumericalError(options.trajectory.string() + ": " + e.what());
  }
}

SweepReport cmd_sweep_report(const fs::path& dir, const fs::path& table,
                             std::ostream& log) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw IoError("not a directory: " + dir.string());
  }
  std::vector<fs::path> entries;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) entries.push_back(entry.path());
  }
  std::sort(entries.begin(), entries.end());

  SweepReport report;
  report.table = table;
  std::map<std::string, bool> analysed;
  for (const auto& path : entries) {
    const std::string name = path.filename().string();
    if (ends_with(name, kEstimatesExt)) {
      std::ifstream in(path);
      if (!in) throw IoError("cannot read " + path.string());
      auto rows = read_estimates_csv(in);
      report.rows.insert(report.rows.end(), rows.begin(), rows.end());
      analysed[name.substr(0, name.size() - std::string(kEstimatesExt).size())] =
          true;
    }
  }
  for (const auto& path : entries) {
    const std::string name = path.filename().string();
    if (!ends_with(name, kManifestExt)) continue;
    const std::string stem =
        name.substr(0, name.size() - std::string(kManifestExt).size());
    if (!analysed.count(stem)) report.missing.push_back(stem);
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const EstimateRow& a, const EstimateRow& b) {
                     if (a.k != b.k) return a.k < b.k;
                     if (a.method != b.method) return a.method < b.method;
                     return a.beta < b.beta;
                   });

  Provenance prov("sweep-report");
  prov.set("rows", static_cast<std::int64_t>(report.rows.size()));
  std::vector<std::string> notes;
  for (const auto& m : report.missing) notes.push_back("missing analysis: " + m);
  auto out = open_output(table);
  write_estimates_csv(out, report.rows, prov, notes);
  close_output(out, table);

  if (report.rows.empty()) {
    log << "warning: no estimates found in " << dir.string() << "\n";
  }
  for (const auto& m : report.missing) {
    log << "warning: missing analysis for " << m << "\n";
  }
  return report;
}

TsneOutputs cmd_tsne(const TsneOptions& options) {
  const TrajectoryReader reader(options.trajectory);
  const std::uint64_t available = reader.header().n_samples;
  const std::uint64_t n = options.take ? *options.take : available;
  if (n > kTsneMaxPoints) {
    throw DomainError("exact t-SNE is capped at " +
                      std::to_string(kTsneMaxPoints) + " points but " +
                      std::to_string(n) +
                      " were requested; use --take N with N <= " +
                      std::to_string(kTsneMaxPoints) +
                      " to embed a leading prefix");
  }
  if (n > available) {
    throw DomainError("--take " + std::to_string(n) + " exceeds the " +
                      std::to_string(available) + " rows in " +
                      options.trajectory.string());
  }
  const std::size_t cols = reader.header().n_columns;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n),
                    static_cast<Eigen::Index>(cols));
  auto stream = reader.stream_rows(kDefaultChunkRows);
  std::uint64_t filled = 0;
  while (filled < n) {
    const auto block = stream.next();
    if (!block) break;
    for (std::size_t r = 0; r < block->rows && filled < n; ++r, ++filled) {
      const auto row = block->row(r);
      for (std::size_t c = 0; c < cols; ++c) {
        x(static_cast<Eigen::Index>(filled), static_cast<Eigen::Index>(c)) =
            row[c];
      }
    }
  }

  TsneOutputs out;
  out.embedding = embed(x, options.config);

  const auto& meta = reader.header();
  Provenance prov = run_provenance("tsne", meta);
  prov.set("take", static_cast<std::int64_t>(n))
      .set("perplexity", options.config.perplexity)
      .set("metric", to_string(options.config.metric))
      .set("iterations", static_cast<std::int64_t>(options.config.iterations))
      .set("early_exaggeration", options.config.early_exaggeration)
      .set("seed", static_cast<std::int64_t>(options.config.seed));
  if (options.config.learning_rate) {
    prov.set("learning_rate", *options.config.learning_rate);
  }
  const fs::path dir = options.out_dir ? *options.out_dir
                                       : options.trajectory.parent_path();
  const std::string base = options.trajectory.stem().string() + ".tsne_" +
                           to_string(options.config.metric);
  out.embedding_csv = (dir.empty() ? fs::path(".") : dir) / (base + ".csv");
  out.kl_csv = (dir.empty() ? fs::path(".") : dir) / (base + ".kl.csv");

  auto emb = open_output(out.embedding_csv);
  write_embedding_csv(emb, out.embedding, meta.sample_interval(), prov);
  close_output(emb, out.embedding_csv);
  auto kl = open_output(out.kl_csv);
  write_kl_csv(kl, out.embedding, prov);
  close_output(kl, out.kl_csv);
  return out;
}

std::uint64_t cmd_mode_energies(const ModeEnergiesOptions& options) {
  const FileSource source(options.trajectory);
  const int n_osc = static_cast<int>(source.columns() / 2);
  for (int k : options.modes) {
    if (k < 1 || k > n_osc) {
      throw DomainError("mode " + std::to_string(k) + " outside [1, " +
                        std::to_string(n_osc) + "]");
    }
  }
  if (options.stride < 1) throw DomainError("stride must be >= 1");
  Provenance prov = run_provenance("mode-energies", source.header());
  std::string list;
  for (int k : options.modes) list += (list.empty() ? "" : ",") + std::to_string(k);
  prov.set("modes", list).set("row_stride",
                               static_cast<std::int64_t>(options.stride));
  auto out = open_output(options.out);
  prov.write(out);
  const auto rows =
      mode_energy_series(source, source.header().sample_interval(),
                         options.modes, options.stride, out);
  close_output(out, options.out);
  return rows;
}

}  // namespace fput
