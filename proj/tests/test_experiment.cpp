#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include <json.hpp>

#include "fput/errors.hpp"
#include "fput/experiment.hpp"

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class ExperimentTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fput_exp_" + std::string(::testing::UnitTest::GetInstance()
                                          ->current_test_info()
                                          ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fput::SimulateOptions small_run(std::vector<double> betas) const {
    fput::SimulateOptions o;
    o.betas = std::move(betas);
    o.n_samples = 3000;
    o.out_dir = dir_;
    return o;
  }

  int run_cli(const std::string& args, const std::string& env = "") const {
    const std::string cmd = env + " " + std::string(FPUT_CLI_PATH) + " " + args +
                            " > " + (dir_ / "stdout.txt").string() + " 2> " +
                            (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path dir_;
};

TEST(BetaGrid, FullSweepGrid) {
  const auto b = fput::parse_beta_grid("0.1:3:0.1");
  ASSERT_EQ(b.size(), 30u);
  EXPECT_EQ(b.front(), 0.1);
  EXPECT_EQ(b[2], 0.3);
  EXPECT_EQ(b[6], 0.7);
  EXPECT_EQ(b.back(), 3.0);
}

TEST(BetaGrid, Invalid) {
  EXPECT_THROW(fput::parse_beta_grid("0.1:3"), fput::DomainError);
  EXPECT_THROW(fput::parse_beta_grid("0.1:3:0"), fput::DomainError);
  EXPECT_THROW(fput::parse_beta_grid("3:0.1:0.1"), fput::DomainError);
  EXPECT_THROW(fput::parse_beta_grid("a:b:c"), fput::DomainError);
}

TEST(ModeList, Parse) {
  EXPECT_EQ(fput::parse_mode_list("1,3,5"), (std::vector<int>{1, 3, 5}));
  EXPECT_EQ(fput::parse_mode_list("1..4"), (std::vector<int>{1, 2, 3, 4}));
  EXPECT_EQ(fput::parse_mode_list("2..3,7"), (std::vector<int>{2, 3, 7}));
  EXPECT_THROW(fput::parse_mode_list("x"), fput::DomainError);
  EXPECT_THROW(fput::parse_mode_list("5..2"), fput::DomainError);
}

TEST(RunStem, Format) {
  EXPECT_EQ(fput::run_stem(1, 0.3), "fput_k1_beta0.30");
  EXPECT_EQ(fput::run_stem(2, 3.0), "fput_k2_beta3.00");
  EXPECT_EQ(fput::run_stem(1, 0.125), "fput_k1_beta0.125");
}

TEST_F(ExperimentTest, SimulateWritesFilesAndManifests) {
  auto opts = small_run({0.3, 0.5});
  opts.jobs = 2;
  std::ostringstream log;
  const auto runs = fput::cmd_simulate(opts, log);
  ASSERT_EQ(runs.size(), 2u);
  for (const auto& r : runs) {
    EXPECT_TRUE(r.ok) << r.error;
    EXPECT_TRUE(fs::exists(r.trajectory));
    EXPECT_EQ(fs::file_size(r.trajectory), 56u + 3000u * 64u * 8u + 8u);
    const auto j = nlohmann::json::parse(slurp(r.manifest));
    EXPECT_EQ(j["status"], "ok");
    EXPECT_EQ(j["beta"].get<double>(), r.beta);
    EXPECT_LT(j["max_relative_drift"].get<double>(), 1e-3);
    EXPECT_NEAR(j["energy_density"].get<double>(),
                j["initial_energy"].get<double>() / 32.0, 1e-15);
  }
  EXPECT_NE(log.str().find("fput_k1_beta0.30: ok"), std::string::npos);
}

TEST_F(ExperimentTest, MissingOutputDirFailsBeforeIntegration) {
  auto opts = small_run({0.3});
  opts.out_dir = dir_ / "does_not_exist";
  std::ostringstream log;
  EXPECT_THROW(fput::cmd_simulate(opts, log), fput::IoError);
  EXPECT_FALSE(fs::exists(opts.out_dir));
}

TEST_F(ExperimentTest, RejectsNonPositiveBeta) {
  auto opts = small_run({0.3, 0.0});
  std::ostringstream log;
  EXPECT_THROW(fput::cmd_simulate(opts, log), fput::DomainError);
}

TEST_F(ExperimentTest, BlowupRecordedAndSweepContinues) {
  auto opts = small_run({0.3, 50.0});
  opts.ic.amplitude = 200.0;
  opts.model.h = 0.5;
  std::ostringstream log;
  const auto runs = fput::cmd_simulate(opts, log);
  ASSERT_EQ(runs.size(), 2u);
  EXPECT_FALSE(runs[1].ok);
  const auto j = nlohmann::json::parse(slurp(runs[1].manifest));
  EXPECT_EQ(j["status"], "failed");
  EXPECT_FALSE(fs::exists(runs[1].trajectory));
  EXPECT_NE(log.str().find("FAILED"), std::string::npos);
}

TEST_F(ExperimentTest, AnalyzeEmitsTables) {
  std::ostringstream log;
  const auto runs = fput::cmd_simulate(small_run({0.1}), log);
  fput::AnalyzeOptions ao;
  ao.trajectory = runs[0].trajectory;
  const auto res = fput::cmd_analyze(ao);
  EXPECT_TRUE(fs::exists(res.spectrum_csv));
  EXPECT_TRUE(fs::exists(res.curve_csv));
  const std::string est = slurp(res.estimates_csv);
  EXPECT_EQ(est.rfind("# fput ", 0), 0u);
  EXPECT_NE(est.find("config_hash="), std::string::npos);
  EXPECT_NE(est.find("beta,k,method,m_star,raw\n"), std::string::npos);
  std::istringstream in(est);
  const auto rows = fput::read_estimates_csv(in);
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(rows[0].method, fput::IdMethod::participation_ratio);
  EXPECT_EQ(rows[0].beta, 0.1);

  const std::string spec = slurp(res.spectrum_csv);
  EXPECT_NE(spec.find("component,lambda,explained_cum\n1,"), std::string::npos);
  const std::string curve = slurp(res.curve_csv);
  EXPECT_NE(curve.find("m,J_m_percent\n0,100\n"), std::string::npos);

  ao.pca.standardization = fput::Standardization::center_only;
  const auto alt = fput::cmd_analyze(ao);
  EXPECT_NE(alt.spectrum_csv.filename().string().find("center-only"), std::string::npos);
  EXPECT_NE(slurp(alt.spectrum_csv).find("standardize=center-only"), std::string::npos);
}

TEST_F(ExperimentTest, OutputsAreByteIdenticalAcrossRuns) {
  std::ostringstream log;
  auto opts = small_run({0.4});
  opts.analyze = true;
  fput::cmd_simulate(opts, log);
  const auto stem = fput::run_stem(1, 0.4);
  const std::string first = slurp(dir_ / (stem + ".estimates.csv")) +
                            slurp(dir_ / (stem + ".spectrum.csv")) +
                            slurp(dir_ / (stem + ".manifest.json"));
  opts.store = false;
  fput::cmd_simulate(opts, log);
  const std::string second = slurp(dir_ / (stem + ".estimates.csv")) +
                             slurp(dir_ / (stem + ".spectrum.csv"));
  EXPECT_EQ(first.substr(0, second.size()), second);
}

TEST_F(ExperimentTest, SweepReportConsolidates) {
  auto opts = small_run({0.2, 0.1});
  opts.analyze = true;
  std::ostringstream log;
  fput::cmd_simulate(opts, log);
  auto more = small_run({0.3});
  fput::cmd_simulate(more, log);  // no analysis

  std::ostringstream warn;
  const auto rep = fput::cmd_sweep_report(dir_, dir_ / "table.csv", warn);
  ASSERT_EQ(rep.missing.size(), 1u);
  EXPECT_EQ(rep.missing[0], "fput_k1_beta0.30");
  EXPECT_NE(warn.str().find("missing analysis for fput_k1_beta0.30"), std::string::npos);
  ASSERT_GE(rep.rows.size(), 4u);
  EXPECT_EQ(rep.rows[0].method, fput::IdMethod::participation_ratio);
  EXPECT_EQ(rep.rows[0].beta, 0.1);
  EXPECT_EQ(rep.rows[1].beta, 0.2);
  std::ifstream in(dir_ / "table.csv");
  EXPECT_EQ(fput::read_estimates_csv(in).size(), rep.rows.size());
}

TEST_F(ExperimentTest, SweepReportOnEmptyDir) {
  fs::create_directories(dir_ / "empty");
  std::ostringstream warn;
  const auto rep = fput::cmd_sweep_report(dir_ / "empty", dir_ / "t.csv", warn);
  EXPECT_TRUE(rep.rows.empty());
  EXPECT_NE(warn.str().find("warning"), std::string::npos);
  const std::string table = slurp(dir_ / "t.csv");
  EXPECT_NE(table.find("beta,k,method,m_star,raw\n"), std::string::npos);
  EXPECT_EQ(table.substr(table.size() - 25), "beta,k,method,m_star,raw\n");
}

TEST_F(ExperimentTest, TsneCapAndOutput) {
  std::ostringstream log;
  const auto runs = fput::cmd_simulate(small_run({1.0}), log);
  fput::TsneOptions to;
  to.trajectory = runs[0].trajectory;
  to.take = 30000;
  try {
    fput::cmd_tsne(to);
    FAIL() << "expected cap error";
  } catch (const fput::DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("--take"), std::string::npos);
  }
  to.take = 200;
  to.config.perplexity = 10;
  to.config.iterations = 300;
  to.config.metric = fput::Metric::cosine;
  const auto res = fput::cmd_tsne(to);
  EXPECT_EQ(res.embedding.y.rows(), 200);
  const std::string emb = slurp(res.embedding_csv);
  EXPECT_NE(emb.find("index,t,y1,y2\n0,0,"), std::string::npos);
  EXPECT_NE(emb.find("\n1,0.050000000000000003,"), std::string::npos);
  EXPECT_NE(slurp(res.kl_csv).find("iter,kl\n50,"), std::string::npos);
}

TEST_F(ExperimentTest, ModeEnergies) {
  std::ostringstream log;
  const auto runs = fput::cmd_simulate(small_run({0.3}), log);
  fput::ModeEnergiesOptions mo;
  mo.trajectory = runs[0].trajectory;
  mo.modes = {1, 3, 5};
  mo.stride = 100;
  mo.out = dir_ / "modes.csv";
  EXPECT_EQ(fput::cmd_mode_energies(mo), 30u);
  EXPECT_NE(slurp(mo.out).find("t,E_1,E_3,E_5\n"), std::string::npos);
  mo.modes = {40};
  EXPECT_THROW(fput::cmd_mode_energies(mo), fput::DomainError);
}

TEST_F(ExperimentTest, CliEndToEnd) {
  const std::string out = dir_.string();
  EXPECT_EQ(run_cli("simulate --beta 0.3 --n-samples 2000 --out " + out), 0);
  const auto traj = dir_ / "fput_k1_beta0.30.traj";
  ASSERT_TRUE(fs::exists(traj));
  EXPECT_EQ(run_cli("analyze " + traj.string()), 0);
  EXPECT_NE(slurp(dir_ / "stdout.txt").find("PR m*="), std::string::npos);
  EXPECT_EQ(run_cli("mode-energies " + traj.string() + " --modes 1..4 --stride 10"), 0);
  EXPECT_TRUE(fs::exists(dir_ / "fput_k1_beta0.30.modes.csv"));
  EXPECT_EQ(run_cli("sweep-report " + out), 0);
  EXPECT_TRUE(fs::exists(dir_ / "sweep_report.csv"));
}

TEST_F(ExperimentTest, CliErrors) {
  EXPECT_NE(run_cli("simulate --beta 0.3 --out " + (dir_ / "missing").string()), 0);
  EXPECT_NE(slurp(dir_ / "stderr.txt").find("error: io:"), std::string::npos);
  EXPECT_NE(run_cli("frobnicate"), 0);

  EXPECT_EQ(run_cli("simulate --beta 0.3 --n-samples 500 --out " + dir_.string()), 0);
  const auto traj = dir_ / "fput_k1_beta0.30.traj";
  {
    std::fstream f(traj, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(200);
    f.put('\x7f');
  }
  EXPECT_NE(run_cli("analyze " + traj.string()), 0);
  EXPECT_NE(slurp(dir_ / "stderr.txt").find("error: checksum:"), std::string::npos);
  EXPECT_NE(run_cli("tsne " + traj.string() + " --take 30000"), 0);
}

TEST_F(ExperimentTest, CliConfigFileAndEnvOverride) {
  const auto cfg = dir_ / "run.ini";
  std::ofstream(cfg) << "[simulate]\nbeta=0.2\nn-samples=400\nk=2\n";
  fs::create_directories(dir_ / "env_out");
  EXPECT_EQ(run_cli("--config " + cfg.string() + " simulate",
                    "FPUT_OUTPUT_DIR=" + (dir_ / "env_out").string()),
            0)
      << slurp(dir_ / "stderr.txt");
  EXPECT_TRUE(fs::exists(dir_ / "env_out" / "fput_k2_beta0.20.traj"));

  // Flags override file values.
  EXPECT_EQ(run_cli("--config " + cfg.string() + " simulate --beta 0.7 --out " +
                    dir_.string()),
            0);
  EXPECT_TRUE(fs::exists(dir_ / "fput_k2_beta0.70.traj"));
  const auto j = nlohmann::json::parse(slurp(dir_ / "fput_k2_beta0.70.manifest.json"));
  EXPECT_EQ(j["n_samples"].get<int>(), 400);
}

}  // namespace
