#pragma once

// Streaming PCA over a RowSource. The n x n correlation (or covariance)
// matrix is accumulated chunk by chunk, so the n_s x n data matrix is never
// held in memory, and its eigenvalues equal the squared singular values of
// the standardized data divided by (n_s - 1).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fput/trajectory.hpp"

namespace fput {

enum class Standardization {
  /// Zero mean, unit variance columns; S is a correlation matrix.
  correlation,
  /// Mean-centred only; S is the sample covariance matrix.
  center_only,
};

std::string to_string(Standardization s);
Standardization parse_standardization(const std::string& text);

inline constexpr std::size_t kDefaultChunkRows = 4096;

struct ColumnStats {
  std::vector<double> mean;
  /// Sample standard deviation, divisor n_s - 1.
  std::vector<double> std;
  std::uint64_t n_samples = 0;
};

/// Exact two-pass column means and standard deviations. Throws
/// DegenerateColumn for a zero-variance column.
ColumnStats column_stats(const RowSource& source,
                         std::size_t chunk_rows = kDefaultChunkRows);

/// S = X~^T X~ / (n_s - 1) for the standardized data X~.
Eigen::MatrixXd correlation_matrix(
    const RowSource& source, const ColumnStats& stats,
    Standardization mode = Standardization::correlation,
    std::size_t chunk_rows = kDefaultChunkRows);

struct EigenSpectrum {
  /// Eigenvalues, descending.
  std::vector<double> values;
  /// Column i is the unit eigenvector of values[i].
  Eigen::MatrixXd vectors;
  std::uint64_t n_samples = 0;
  std::size_t n = 0;
  int sweeps = 0;

  double sum() const;
};

struct JacobiOptions {
  double tolerance = 1e-12;
  int max_sweeps = 100;
  /// Negative eigenvalues with magnitude below this are clamped to zero.
  double clamp = 1e-10;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
EigenSpectrum eigendecompose(const Eigen::MatrixXd& s,
                             std::uint64_t n_samples = 0,
                             const JacobiOptions& options = {});

struct ReconstructionCurve {
  /// J_m = sum_{l > m} lambda_l, m = 0..n.
  std::vector<double> absolute;
  /// 100 J_m / J_0.
  std::vector<double> percent;
};

ReconstructionCurve reconstruction_curve(const EigenSpectrum& spectrum);

/// Fraction of the total variance carried by the leading m components.
double explained_variance(const EigenSpectrum& spectrum, std::size_t m);

using ScoreSink = std::function<void(std::uint64_t row,
                                     std::span<const double> scores)>;

/// Streams standardized rows projected on the columns of `basis` (n x m).
void project(const RowSource& source, const ColumnStats& stats,
             const Eigen::MatrixXd& basis, Standardization mode,
             const ScoreSink& sink, std::size_t chunk_rows = kDefaultChunkRows);

/// In-memory variant returning the n_s x m score matrix.
Eigen::MatrixXd project(const RowSource& source, const ColumnStats& stats,
                        const Eigen::MatrixXd& basis,
                        Standardization mode = Standardization::correlation);

struct PcaOptions {
  Standardization standardization = Standardization::correlation;
  std::size_t chunk_rows = kDefaultChunkRows;
  JacobiOptions jacobi;
};

struct PcaResult {
  ColumnStats stats;
  Eigen::MatrixXd matrix;
  EigenSpectrum spectrum;
  ReconstructionCurve curve;
  Standardization standardization = Standardization::correlation;
};

/// Two passes over the source: column means, then the centred Gram matrix
/// from which both the standard deviations and S are formed.
PcaResult analyze(const RowSource& source, const PcaOptions& options = {});

}  // namespace fput
