#include "fput/pca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fput/errors.hpp"

namespace fput {

namespace {

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Element-wise compensated accumulator used to combine per-chunk partials.
class KahanAccumulator {
 public:
  explicit KahanAccumulator(std::size_t size) : sum_(size, 0.0), carry_(size, 0.0) {}

  void add(std::size_t i, double x) {
    const double y = x - carry_[i];
    const double t = sum_[i] + y;
    carry_[i] = (t - sum_[i]) - y;
    sum_[i] = t;
  }
  double operator[](std::size_t i) const { return sum_[i]; }

 private:
  std::vector<double> sum_;
  std::vector<double> carry_;
};

void require_rows(const RowSource& source, std::uint64_t minimum) {
  if (source.rows() < minimum) {
    throw DomainError("PCA needs at least " + std::to_string(minimum) +
                      " samples, source has " + std::to_string(source.rows()));
  }
}

struct FirstPass {
  std::vector<double> mean;
  std::vector<double> min;
  std::vector<double> max;
};

FirstPass column_means(const RowSource& source, std::size_t chunk_rows) {
  const std::size_t n = source.columns();
  KahanAccumulator total(n);
  std::vector<double> partial(n);
  FirstPass pass{std::vector<double>(n),
                 std::vector<double>(n, std::numeric_limits<double>::infinity()),
                 std::vector<double>(n, -std::numeric_limits<double>::infinity())};
  std::uint64_t rows = 0;
  source.for_each_block(chunk_rows, [&](const RowBlock& block) {
    std::fill(partial.begin(), partial.end(), 0.0);
    for (std::size_t r = 0; r < block.rows; ++r) {
      const auto row = block.row(r);
      for (std::size_t c = 0; c < n; ++c) {
        partial[c] += row[c];
        pass.min[c] = std::min(pass.min[c], row[c]);
        pass.max[c] = std::max(pass.max[c], row[c]);
      }
    }
    for (std::size_t c = 0; c < n; ++c) total.add(c, partial[c]);
    rows += block.rows;
  });
  for (std::size_t c = 0; c < n; ++c) {
    pass.mean[c] = total[c] / static_cast<double>(rows);
  }
  return pass;
}

[[noreturn]] void throw_degenerate(std::size_t column, std::size_t n_columns) {
  std::string name;
  if (n_columns % 2 == 0) {
    const std::size_t half = n_columns / 2;
    name = (column < half ? "q" : "p") + std::to_string(column % half + 1);
  } else {
    name = "x" + std::to_string(column + 1);
  }
  throw DegenerateColumn("column " + std::to_string(column) + " (" + name +
                             ") has zero variance; cannot standardize",
                         column);
}

void check_constant_columns(const FirstPass& pass) {
  for (std::size_t c = 0; c < pass.mean.size(); ++c) {
    if (pass.min[c] == pass.max[c]) throw_degenerate(c, pass.mean.size());
  }
}

/// Fills `z` with the block rows centred (and optionally scaled).
void standardize_block(const RowBlock& block, const ColumnStats& stats,
                       Standardization mode, RowMajorMatrix& z) {
  const std::size_t n = block.columns;
  z.resize(static_cast<Eigen::Index>(block.rows), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < block.rows; ++r) {
    const auto row = block.row(r);
    double* out = z.data() + r * n;
    if (mode == Standardization::correlation) {
      for (std::size_t c = 0; c < n; ++c) {
        out[c] = (row[c] - stats.mean[c]) / stats.std[c];
      }
    } else {
      for (std::size_t c = 0; c < n; ++c) out[c] = row[c] - stats.mean[c];
    }
  }
}

/// Accumulates sum_rows z z^T into the lower triangle, per-chunk partials
/// combined with compensated summation in block order.
Eigen::MatrixXd gram(const RowSource& source, const ColumnStats& stats,
                     Standardization mode, std::size_t chunk_rows) {
  const std::size_t n = source.columns();
  const auto en = static_cast<Eigen::Index>(n);
  KahanAccumulator total(n * n);
  RowMajorMatrix z;
  Eigen::MatrixXd chunk(en, en);
  source.for_each_block(chunk_rows, [&](const RowBlock& block) {
    standardize_block(block, stats, mode, z);
    chunk.setZero();
    chunk.selfadjointView<Eigen::Lower>().rankUpdate(z.transpose());
    for (Eigen::Index j = 0; j < en; ++j) {
      for (Eigen::Index i = j; i < en; ++i) {
        total.add(static_cast<std::size_t>(j * en + i), chunk(i, j));
      }
    }
  });
  Eigen::MatrixXd g(en, en);
  for (Eigen::Index j = 0; j < en; ++j) {
    for (Eigen::Index i = j; i < en; ++i) {
      g(i, j) = g(j, i) = total[static_cast<std::size_t>(j * en + i)];
    }
  }
  return g;
}

}  // namespace

std::string to_string(Standardization s) {
  return s == Standardization::correlation ? "correlation" : "center-only";
}

Standardization parse_standardization(const std::string& text) {
  if (text == "correlation") return Standardization::correlation;
  if (text == "center-only" || text == "center_only") {
    return Standardization::center_only;
  }
  throw DomainError("unknown standardization '" + text +
                    "' (expected correlation or center-only)");
}

ColumnStats column_stats(const RowSource& source, std::size_t chunk_rows) {
  require_rows(source, 2);
  const std::size_t n = source.columns();
  const FirstPass first = column_means(source, chunk_rows);
  check_constant_columns(first);

  KahanAccumulator total(n);
  std::vector<double> partial(n);
  source.for_each_block(chunk_rows, [&](const RowBlock& block) {
    std::fill(partial.begin(), partial.end(), 0.0);
    for (std::size_t r = 0; r < block.rows; ++r) {
      const auto row = block.row(r);
      for (std::size_t c = 0; c < n; ++c) {
        const double d = row[c] - first.mean[c];
        partial[c] += d * d;
      }
    }
    for (std::size_t c = 0; c < n; ++c) total.add(c, partial[c]);
  });

  ColumnStats stats;
  stats.mean = first.mean;
  stats.std.resize(n);
  stats.n_samples = source.rows();
  const double dof = static_cast<double>(source.rows() - 1);
  for (std::size_t c = 0; c < n; ++c) {
    stats.std[c] = std::sqrt(total[c] / dof);
    if (!(stats.std[c] > 0.0)) throw_degenerate(c, n);
  }
  return stats;
}

Eigen::MatrixXd correlation_matrix(const RowSource& source,
                                   const ColumnStats& stats,
                                   Standardization mode,
                                   std::size_t chunk_rows) {
  const std::size_t n = source.columns();
  if (stats.mean.size() != n || stats.std.size() != n) {
    throw DomainError("correlation matrix: stats have " +
                      std::to_string(stats.mean.size()) +
                      " columns, source has " + std::to_string(n));
  }
  require_rows(source, 2);
  Eigen::MatrixXd s = gram(source, stats, mode, chunk_rows);
  s /= static_cast<double>(source.rows() - 1);
  return s;
}

double EigenSpectrum::sum() const {
  double total = 0.0;
  for (double v : values) total += v;
  return total;
}

EigenSpectrum eigendecompose(const Eigen::MatrixXd& s, std::uint64_t n_samples,
                             const JacobiOptions& options) {
  if (s.rows() != s.cols() || s.rows() == 0) {
    throw DomainError("eigendecompose: matrix must be square and non-empty");
  }
  const Eigen::Index n = s.rows();
  const double scale = std::max(1.0, s.norm());
  if ((s - s.transpose()).norm() > 1e-12 * scale) {
    throw DomainError("eigendecompose: matrix is not symmetric");
  }

  Eigen::MatrixXd a = 0.5 * (s + s.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);

  auto off_norm = [&] {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (i != j) sum += a(i, j) * a(i, j);
      }
    }
    return std::sqrt(sum);
  };

  int sweep = 0;
  for (;; ++sweep) {
    if (off_norm() < options.tolerance * scale) break;
    if (sweep >= options.max_sweeps) {
      throw NumericalError("Jacobi eigensolver did not converge in " +
                           std::to_string(options.max_sweeps) + " sweeps");
    }
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = (theta >= 0.0 ? 1.0 : -1.0) /
              (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        const double tau = sn / (1.0 + c);

        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double g = a(r, p);
          const double h = a(r, q);
          a(r, p) = a(p, r) = g - sn * (h + g * tau);
          a(r, q) = a(q, r) = h + sn * (g - h * tau);
        }
        for (Eigen::Index r = 0; r < n; ++r) {
          const double g = v(r, p);
          const double h = v(r, q);
          v(r, p) = g - sn * (h + g * tau);
          v(r, q) = h + sn * (g - h * tau);
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
    return a(x, x) > a(y, y);
  });

  EigenSpectrum spectrum;
  spectrum.n = static_cast<std::size_t>(n);
  spectrum.n_samples = n_samples;
  spectrum.sweeps = sweep;
  spectrum.values.resize(static_cast<std::size_t>(n));
  spectrum.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    double lambda = a(order[k], order[k]);
    if (lambda < 0.0 && lambda > -options.clamp) lambda = 0.0;
    spectrum.values[static_cast<std::size_t>(k)] = lambda;
    Eigen::VectorXd vec = v.col(order[k]);
    // Fix the sign: largest-magnitude component positive.
    Eigen::Index pivot = 0;
    vec.cwiseAbs().maxCoeff(&pivot);
    if (vec(pivot) < 0.0) vec = -vec;
    spectrum.vectors.col(k) = vec;
  }
  return spectrum;
}

ReconstructionCurve reconstruction_curve(const EigenSpectrum& spectrum) {
  const std::size_t n = spectrum.values.size();
  ReconstructionCurve curve;
  curve.absolute.assign(n + 1, 0.0);
  // Tail sums from the smallest eigenvalue up.
  for (std::size_t m = n; m-- > 0;) {
    curve.absolute[m] = curve.absolute[m + 1] + spectrum.values[m];
  }
  curve.percent.resize(n + 1);
  const double total = curve.absolute[0];
  for (std::size_t m = 0; m <= n; ++m) {
    curve.percent[m] = total > 0.0 ? 100.0 * curve.absolute[m] / total : 0.0;
  }
  return curve;
}

double explained_variance(const EigenSpectrum& spectrum, std::size_t m) {
  const std::size_t n = spectrum.values.size();
  if (m > n) {
    throw DomainError("explained variance: m=" + std::to_string(m) +
                      " exceeds n=" + std::to_string(n));
  }
  double head = 0.0;
  double total = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    if (l < m) head += spectrum.values[l];
    total += spectrum.values[l];
  }
  if (!(total > 0.0)) throw DomainError("explained variance: zero spectrum");
  return m == n ? 1.0 : head / total;
}

void project(const RowSource& source, const ColumnStats& stats,
             const Eigen::MatrixXd& basis, Standardization mode,
             const ScoreSink& sink, std::size_t chunk_rows) {
  const std::size_t n = source.columns();
  if (static_cast<std::size_t>(basis.rows()) != n || stats.mean.size() != n) {
    throw DomainError("project: basis has " + std::to_string(basis.rows()) +
                      " rows, data has " + std::to_string(n) + " columns");
  }
  RowMajorMatrix z;
  RowMajorMatrix scores;
  source.for_each_block(chunk_rows, [&](const RowBlock& block) {
    standardize_block(block, stats, mode, z);
    scores.noalias() = z * basis;
    for (std::size_t r = 0; r < block.rows; ++r) {
      sink(block.first_row + r,
           std::span<const double>(scores.data() + r * scores.cols(),
                                   static_cast<std::size_t>(scores.cols())));
    }
  });
}

Eigen::MatrixXd project(const RowSource& source, const ColumnStats& stats,
                        const Eigen::MatrixXd& basis, Standardization mode) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(source.rows()), basis.cols());
  project(source, stats, basis, mode,
          [&](std::uint64_t row, std::span<const double> scores) {
            for (std::size_t c = 0; c < scores.size(); ++c) {
              out(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(c)) =
                  scores[c];
            }
          });
  return out;
}

PcaResult analyze(const RowSource& source, const PcaOptions& options) {
  require_rows(source, 2);
  const std::size_t n = source.columns();
  const FirstPass first = column_means(source, options.chunk_rows);
  check_constant_columns(first);

  ColumnStats centred;
  centred.mean = first.mean;
  centred.std.assign(n, 1.0);
  centred.n_samples = source.rows();
  Eigen::MatrixXd g =
      gram(source, centred, Standardization::center_only, options.chunk_rows);

  PcaResult result;
  result.standardization = options.standardization;
  result.stats.mean = first.mean;
  result.stats.n_samples = source.rows();
  result.stats.std.resize(n);
  const double dof = static_cast<double>(source.rows() - 1);
  for (std::size_t c = 0; c < n; ++c) {
    const auto ec = static_cast<Eigen::Index>(c);
    result.stats.std[c] = std::sqrt(g(ec, ec) / dof);
    if (!(result.stats.std[c] > 0.0)) throw_degenerate(c, n);
  }

  result.matrix = g / dof;
  if (options.standardization == Standardization::correlation) {
    for (Eigen::Index j = 0; j < result.matrix.cols(); ++j) {
      for (Eigen::Index i = 0; i < result.matrix.rows(); ++i) {
        result.matrix(i, j) /= result.stats.std[static_cast<std::size_t>(i)] *
                               result.stats.std[static_cast<std::size_t>(j)];
      }
    }
  }
  result.spectrum =
      eigendecompose(result.matrix, source.rows(), options.jacobi);
  result.curve = reconstruction_curve(result.spectrum);
  return result;
}

}  // namespace fput
