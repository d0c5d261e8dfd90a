#pragma once

// Trajectory storage: an n_s x n row-major matrix of phase points.
//
// Binary layout (little-endian, no padding):
//
//   offset  size  field
//        0     8  magic "FPUTTRAJ"
//        8     4  u32 version (1)
//       12     8  u64 n_s (rows)
//       20     4  u32 n (columns, 2N)
//       24     8  f64 beta
//       32     4  u32 k (excited mode)
//       36     8  f64 A (amplitude)
//       44     8  f64 h
//       52     4  u32 stride
//       56  8n_sn f64 payload, row-major
//      end     8  u64 FNV-1a checksum of the payload bytes

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "fput/chain.hpp"

namespace fput {

inline constexpr std::array<char, 8> kTrajectoryMagic = {'F', 'P', 'U', 'T',
                                                         'T', 'R', 'A', 'J'};
inline constexpr std::uint32_t kTrajectoryVersion = 1;
inline constexpr std::size_t kTrajectoryHeaderBytes = 56;
inline constexpr std::size_t kTrajectoryFooterBytes = 8;

/// Provenance carried in the file header.
struct TrajectoryHeader {
  std::uint32_t version = kTrajectoryVersion;
  std::uint64_t n_samples = 0;
  std::uint32_t n_columns = 0;
  double beta = 0.0;
  std::uint32_t mode = 0;
  double amplitude = 0.0;
  double h = 0.0;
  std::uint32_t stride = 1;

  static TrajectoryHeader from_run(const ModelParams& params,
                                   const InitialCondition& ic,
                                   std::uint64_t n_samples);

  /// Time between consecutive rows.
  double sample_interval() const noexcept { return h * stride; }

  std::array<unsigned char, kTrajectoryHeaderBytes> encode() const;
  static TrajectoryHeader decode(
      std::span<const unsigned char, kTrajectoryHeaderBytes> bytes);
};

/// 64-bit FNV-1a.
class Fnv1a64 {
 public:
  static constexpr std::uint64_t kOffsetBasis = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

  void update(std::span<const unsigned char> bytes) noexcept;
  std::uint64_t value() const noexcept { return hash_; }

 private:
  std::uint64_t hash_ = kOffsetBasis;
};

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) noexcept;

/// Contiguous block of rows handed out by a RowSource.
struct RowBlock {
  std::uint64_t first_row = 0;
  std::size_t rows = 0;
  std::size_t columns = 0;
  std::span<const double> values;

  std::span<const double> row(std::size_t r) const {
    return values.subspan(r * columns, columns);
  }
};

using BlockVisitor = std::function<void(const RowBlock&)>;

/// Replayable sequence of phase-point rows. Every pass visits all rows in
/// order, partitioned into blocks of at most `chunk_rows` rows.
class RowSource {
 public:
  virtual ~RowSource() = default;
  virtual std::size_t columns() const = 0;
  virtual std::uint64_t rows() const = 0;
  virtual void for_each_block(std::size_t chunk_rows,
                              const BlockVisitor& visit) const = 0;
};

/// In-memory trajectory matrix.
struct TrajectoryMatrix {
  std::uint64_t n_samples = 0;
  std::size_t n_columns = 0;
  std::vector<double> values;
  TrajectoryHeader meta;

  TrajectoryMatrix() = default;
  TrajectoryMatrix(std::uint64_t rows, std::size_t columns)
      : n_samples(rows), n_columns(columns), values(rows * columns, 0.0) {
    meta.n_samples = rows;
    meta.n_columns = static_cast<std::uint32_t>(columns);
  }

  std::span<double> row(std::uint64_t i) {
    return std::span<double>(values).subspan(i * n_columns, n_columns);
  }
  std::span<const double> row(std::uint64_t i) const {
    return std::span<const double>(values).subspan(i * n_columns, n_columns);
  }
};

class MatrixSource final : public RowSource {
 public:
  explicit MatrixSource(const TrajectoryMatrix& matrix) : matrix_(matrix) {}
  std::size_t columns() const override { return matrix_.n_columns; }
  std::uint64_t rows() const override { return matrix_.n_samples; }
  void for_each_block(std::size_t chunk_rows,
                      const BlockVisitor& visit) const override;

 private:
  const TrajectoryMatrix& matrix_;
};

/// Runs the integrator once into memory.
TrajectoryMatrix simulate_to_matrix(const InitialCondition& ic,
                                    const ModelParams& params,
                                    std::uint64_t n_samples);

/// Re-integrates the chain on every pass instead of storing it. Integration
/// is deterministic, so every pass sees bit-identical rows.
class SimulationSource final : public RowSource {
 public:
  SimulationSource(InitialCondition ic, ModelParams params,
                   std::uint64_t n_samples);
  std::size_t columns() const override;
  std::uint64_t rows() const override { return n_samples_; }
  void for_each_block(std::size_t chunk_rows,
                      const BlockVisitor& visit) const override;

  /// Optional observer invoked for each row during the first pass only,
  /// for diagnostics that ride along with the analysis.
  void set_first_pass_observer(SampleSink observer) {
    observer_ = std::move(observer);
  }
  /// Summary of the most recent pass.
  const IntegrationSummary& last_summary() const { return summary_; }

 private:
  InitialCondition ic_;
  ModelParams params_;
  std::uint64_t n_samples_;
  SampleSink observer_;
  mutable IntegrationSummary summary_;
  mutable int passes_ = 0;
};

struct WriteSummary {
  std::uint64_t rows = 0;
  std::uint64_t checksum = 0;
  std::uint64_t bytes = 0;
};

/// Streams rows into a trajectory file. The header is written up front and
/// patched with the final row count by finalize(); a writer destroyed
/// without finalize() removes its partial file.
class TrajectoryWriter {
 public:
  /// `meta.n_samples` is the expected row count, or 0 if not known up front.
  TrajectoryWriter(std::filesystem::path path, TrajectoryHeader meta);
  ~TrajectoryWriter();
  TrajectoryWriter(const TrajectoryWriter&) = delete;
  TrajectoryWriter& operator=(const TrajectoryWriter&) = delete;

  void append(std::span<const double> row);
  WriteSummary finalize();

  std::uint64_t rows_written() const noexcept { return rows_; }

 private:
  void flush_buffer();

  std::filesystem::path path_;
  TrajectoryHeader meta_;
  std::ofstream out_;
  std::vector<unsigned char> buffer_;
  Fnv1a64 checksum_;
  std::uint64_t rows_ = 0;
  bool finalized_ = false;
};

WriteSummary write_trajectory(const std::filesystem::path& path,
                              const TrajectoryMatrix& matrix);

/// Opens a finalized trajectory file. The constructor validates the header,
/// the file length and the payload checksum.
class TrajectoryReader {
 public:
  explicit TrajectoryReader(std::filesystem::path path);

  const TrajectoryHeader& header() const noexcept { return header_; }
  const std::filesystem::path& path() const noexcept { return path_; }
  std::uint64_t checksum() const noexcept { return checksum_; }

  /// Pull-style iterator over row blocks.
  class BlockStream {
   public:
    std::optional<RowBlock> next();

   private:
    friend class TrajectoryReader;
    BlockStream(const TrajectoryReader& reader, std::size_t chunk_rows);

    std::ifstream in_;
    std::size_t chunk_rows_;
    std::size_t columns_;
    std::uint64_t total_rows_;
    std::uint64_t next_row_ = 0;
    std::vector<unsigned char> raw_;
    std::vector<double> values_;
  };

  BlockStream stream_rows(std::size_t chunk_rows) const;
  TrajectoryMatrix read_all() const;

 private:
  std::filesystem::path path_;
  TrajectoryHeader header_;
  std::uint64_t checksum_ = 0;
};

class FileSource final : public RowSource {
 public:
  explicit FileSource(const std::filesystem::path& path) : reader_(path) {}
  std::size_t columns() const override { return reader_.header().n_columns; }
  std::uint64_t rows() const override { return reader_.header().n_samples; }
  void for_each_block(std::size_t chunk_rows,
                      const BlockVisitor& visit) const override;
  const TrajectoryHeader& header() const noexcept { return reader_.header(); }

 private:
  TrajectoryReader reader_;
};

/// Writes `q1..qN,p1..pN` CSV with 17 significant digits, keeping every
/// `row_stride`-th row. Returns the number of data rows written.
std::uint64_t export_csv(const RowSource& source, std::ostream& out,
                         std::uint64_t row_stride = 1);

/// Parses a CSV produced by export_csv (comment lines start with '#') into
/// a trajectory file with the given provenance.
WriteSummary import_csv(std::istream& in, const std::filesystem::path& path,
                        TrajectoryHeader meta);

}  // namespace fput
