#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fput/errors.hpp"
#include "fput/trajectory.hpp"

namespace {

namespace fs = std::filesystem;

class TrajectoryTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fput_traj_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path dir_;
};

fput::TrajectoryMatrix random_matrix(std::uint64_t rows, std::size_t cols,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  fput::TrajectoryMatrix m(rows, cols);
  for (double& v : m.values) v = g(rng);
  m.meta.beta = 0.3;
  m.meta.mode = 1;
  m.meta.amplitude = 10.0;
  m.meta.h = 0.05;
  return m;
}

TEST(TrajectoryHeader, EncodeDecodeRoundTrip) {
  fput::TrajectoryHeader h;
  h.n_samples = 4'000'000;
  h.n_columns = 64;
  h.beta = 0.3;
  h.mode = 2;
  h.amplitude = 10.0;
  h.h = 0.05;
  h.stride = 3;
  const auto bytes = h.encode();
  ASSERT_EQ(bytes.size(), 56u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "FPUTTRAJ");
  // Little-endian u32 version at offset 8.
  EXPECT_EQ(bytes[8], 1);
  EXPECT_EQ(bytes[9], 0);
  const auto back = fput::TrajectoryHeader::decode(bytes);
  EXPECT_EQ(back.n_samples, h.n_samples);
  EXPECT_EQ(back.n_columns, h.n_columns);
  EXPECT_EQ(back.beta, h.beta);
  EXPECT_EQ(back.mode, h.mode);
  EXPECT_EQ(back.amplitude, h.amplitude);
  EXPECT_EQ(back.h, h.h);
  EXPECT_EQ(back.stride, h.stride);
  EXPECT_DOUBLE_EQ(back.sample_interval(), 0.15);
}

TEST(Fnv1a, KnownVectors) {
  const std::string empty;
  const std::string a = "a";
  const std::string foobar = "foobar";
  auto hash = [](const std::string& s) {
    return fput::fnv1a64(std::span<const unsigned char>(
        reinterpret_cast<const unsigned char*>(s.data()), s.size()));
  };
  EXPECT_EQ(hash(empty), 0xcbf29ce484222325ull);
  EXPECT_EQ(hash(a), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(hash(foobar), 0x85944171f73967e8ull);
}

TEST_F(TrajectoryTest, FileSizeArithmetic) {
  const auto m = random_matrix(3, 4, 1);
  const auto path = dir_ / "small.traj";
  const auto summary = fput::write_trajectory(path, m);
  EXPECT_EQ(summary.rows, 3u);
  EXPECT_EQ(fs::file_size(path), 56u + 96u + 8u);
  EXPECT_EQ(summary.bytes, 56u + 96u + 8u);
}

TEST(TrajectorySize, FullScalePayload) {
  const std::uint64_t payload = 4'000'000ull * 64ull * 8ull;
  EXPECT_EQ(payload, 2'048'000'000ull);
}

TEST_F(TrajectoryTest, EmptyTrajectoryRejected) {
  fput::TrajectoryHeader meta;
  meta.n_columns = 4;
  fput::TrajectoryWriter w(dir_ / "empty.traj", meta);
  try {
    w.finalize();
    FAIL() << "expected error";
  } catch (const fput::DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("empty trajectory"), std::string::npos);
  }
}

TEST_F(TrajectoryTest, DeclaredLengthMismatch) {
  fput::TrajectoryHeader meta;
  meta.n_columns = 2;
  meta.n_samples = 5;
  fput::TrajectoryWriter w(dir_ / "short.traj", meta);
  const std::vector<double> row{1.0, 2.0};
  w.append(row);
  EXPECT_THROW(w.finalize(), fput::FormatError);
}

TEST_F(TrajectoryTest, RejectsBadRows) {
  fput::TrajectoryHeader meta;
  meta.n_columns = 2;
  fput::TrajectoryWriter w(dir_ / "bad.traj", meta);
  const std::vector<double> wrong{1.0};
  EXPECT_THROW(w.append(wrong), fput::DomainError);
  const std::vector<double> nan{1.0, std::nan("")};
  EXPECT_THROW(w.append(nan), fput::DomainError);
}

TEST_F(TrajectoryTest, UnfinalizedFileIsRemoved) {
  const auto path = dir_ / "partial.traj";
  {
    fput::TrajectoryHeader meta;
    meta.n_columns = 2;
    fput::TrajectoryWriter w(path, meta);
    const std::vector<double> row{1.0, 2.0};
    w.append(row);
  }
  EXPECT_FALSE(fs::exists(path));
}

TEST_F(TrajectoryTest, BitExactRoundTrip) {
  const auto m = random_matrix(1234, 64, 2);
  const auto path = dir_ / "rt.traj";
  const auto summary = fput::write_trajectory(path, m);
  const fput::TrajectoryReader reader(path);
  EXPECT_EQ(reader.checksum(), summary.checksum);
  EXPECT_EQ(reader.header().n_samples, 1234u);
  EXPECT_EQ(reader.header().beta, 0.3);
  const auto back = reader.read_all();
  EXPECT_EQ(back.values, m.values);
}

TEST_F(TrajectoryTest, CorruptedPayloadFailsChecksum) {
  const auto m = random_matrix(50, 8, 3);
  const auto path = dir_ / "corrupt.traj";
  fput::write_trajectory(path, m);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(56 + 100);
    char c = 0;
    f.seekg(56 + 100);
    f.read(&c, 1);
    c = static_cast<char>(c ^ 0x01);
    f.seekp(56 + 100);
    f.write(&c, 1);
  }
  EXPECT_THROW(fput::TrajectoryReader{path}, fput::ChecksumError);
}

TEST_F(TrajectoryTest, TruncatedFileRejected) {
  const auto m = random_matrix(50, 8, 4);
  const auto path = dir_ / "trunc.traj";
  fput::write_trajectory(path, m);
  fs::resize_file(path, fs::file_size(path) - 9);
  EXPECT_THROW(fput::TrajectoryReader{path}, fput::FormatError);
}

TEST_F(TrajectoryTest, BadMagicRejected) {
  const auto path = dir_ / "magic.traj";
  std::ofstream(path, std::ios::binary) << std::string(80, 'x');
  EXPECT_THROW(fput::TrajectoryReader{path}, fput::FormatError);
}

TEST_F(TrajectoryTest, MissingFileIsIoError) {
  EXPECT_THROW(fput::TrajectoryReader{dir_ / "nope.traj"}, fput::IoError);
}

TEST_F(TrajectoryTest, ChunksPartitionRowsInOrder) {
  const auto m = random_matrix(1000, 4, 5);
  const auto path = dir_ / "chunks.traj";
  fput::write_trajectory(path, m);
  const fput::FileSource src(path);
  for (std::size_t chunk : {1u, 7u, 100u, 999u, 1000u, 5000u}) {
    std::uint64_t next = 0;
    std::size_t blocks = 0;
    std::vector<double> seen;
    src.for_each_block(chunk, [&](const fput::RowBlock& b) {
      EXPECT_EQ(b.first_row, next);
      EXPECT_LE(b.rows, chunk);
      next += b.rows;
      ++blocks;
      seen.insert(seen.end(), b.values.begin(), b.values.end());
    });
    EXPECT_EQ(next, 1000u);
    EXPECT_EQ(blocks, (1000 + chunk - 1) / chunk);
    EXPECT_EQ(seen, m.values);
  }
  const fput::TrajectoryReader reader(path);
  auto stream = reader.stream_rows(100);
  std::size_t n_blocks = 0;
  while (stream.next()) ++n_blocks;
  EXPECT_EQ(n_blocks, 10u);
}

// Oracle: column means from the whole in-memory matrix.
TEST_F(TrajectoryTest, ChunkedMeansMatchWholeFile) {
  const auto m = random_matrix(10007, 6, 6);
  const auto path = dir_ / "means.traj";
  fput::write_trajectory(path, m);
  std::vector<double> whole(6, 0.0);
  for (std::uint64_t r = 0; r < m.n_samples; ++r) {
    for (std::size_t c = 0; c < 6; ++c) whole[c] += m.row(r)[c];
  }
  for (double& v : whole) v /= static_cast<double>(m.n_samples);
  const fput::FileSource src(path);
  std::vector<double> chunked(6, 0.0);
  src.for_each_block(333, [&](const fput::RowBlock& b) {
    std::vector<double> part(6, 0.0);
    for (std::size_t r = 0; r < b.rows; ++r) {
      for (std::size_t c = 0; c < 6; ++c) part[c] += b.row(r)[c];
    }
    for (std::size_t c = 0; c < 6; ++c) chunked[c] += part[c];
  });
  for (std::size_t c = 0; c < 6; ++c) {
    EXPECT_NEAR(chunked[c] / static_cast<double>(m.n_samples), whole[c], 1e-12);
  }
}

TEST_F(TrajectoryTest, CsvExportStride) {
  const auto m = random_matrix(10, 4, 7);
  const fput::MatrixSource src(m);
  std::ostringstream all;
  EXPECT_EQ(fput::export_csv(src, all, 1), 10u);
  std::istringstream in(all.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "q1,q2,p1,p2");
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 10);

  std::ostringstream some;
  EXPECT_EQ(fput::export_csv(src, some, 4), 3u);  // rows 0, 4, 8
}

TEST(TrajectoryCsv, StrideAtFullScaleCount) {
  // 4M rows at stride 4000 keep exactly 1000 rows.
  std::uint64_t kept = 0;
  for (std::uint64_t i = 0; i < 4'000'000; i += 4000) ++kept;
  EXPECT_EQ(kept, 1000u);
}

TEST_F(TrajectoryTest, CsvRoundTripIsExact) {
  const auto m = random_matrix(200, 6, 8);
  const fput::MatrixSource src(m);
  std::stringstream csv;
  fput::export_csv(src, csv);
  const auto path = dir_ / "from_csv.traj";
  fput::import_csv(csv, path, m.meta);
  const fput::FileSource back(path);
  EXPECT_EQ(back.rows(), 200u);
  std::ostringstream again;
  fput::export_csv(back, again);
  EXPECT_EQ(again.str(), csv.str());
  EXPECT_EQ(fput::TrajectoryReader(path).read_all().values, m.values);
}

TEST(SimulationSource, PassesAreIdentical) {
  fput::ModelParams p;
  p.beta = 1.0;
  const fput::SimulationSource src({1, 10.0}, p, 500);
  std::vector<double> first;
  std::vector<double> second;
  src.for_each_block(64, [&](const fput::RowBlock& b) {
    first.insert(first.end(), b.values.begin(), b.values.end());
  });
  src.for_each_block(100, [&](const fput::RowBlock& b) {
    second.insert(second.end(), b.values.begin(), b.values.end());
  });
  EXPECT_EQ(first.size(), 500u * 64u);
  EXPECT_EQ(first, second);
  const auto mem = fput::simulate_to_matrix({1, 10.0}, p, 500);
  EXPECT_EQ(mem.values, first);
}

}  // namespace
