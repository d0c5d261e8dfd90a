#include "fput/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "fput/errors.hpp"
#include "fput/pca.hpp"
#include "fput/trajectory.hpp"

namespace fput {

std::string to_string(Metric metric) {
  return metric == Metric::euclidean ? "euclidean" : "cosine";
}

Metric parse_metric(const std::string& text) {
  if (text == "euclidean") return Metric::euclidean;
  if (text == "cosine") return Metric::cosine;
  throw DomainError("unknown metric '" + text + "' (expected euclidean or cosine)");
}

void TsneConfig::validate(std::size_t n_points) const {
  if (n_points > kTsneMaxPoints) {
    throw DomainError("exact t-SNE is limited to " +
                      std::to_string(kTsneMaxPoints) + " points, got " +
                      std::to_string(n_points));
  }
  if (n_points < 3) throw DomainError("t-SNE needs at least 3 points");
  if (!(perplexity > 1.0) ||
      !(perplexity < static_cast<double>(n_points) - 1.0)) {
    throw DomainError("perplexity must lie in (1, n_s - 1) = (1, " +
                      std::to_string(n_points - 1) + ")");
  }
  if (iterations < 1) throw DomainError("t-SNE needs at least one iteration");
  if (exaggeration_iterations < 0 || !(early_exaggeration > 0.0)) {
    throw DomainError("invalid early exaggeration settings");
  }
  if (learning_rate && !(*learning_rate > 0.0)) {
    throw DomainError("learning rate must be positive");
  }
  if (kl_every < 1) throw DomainError("kl_every must be >= 1");
}

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& x, Metric metric) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  if (metric == Metric::euclidean) {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = j + 1; i < n; ++i) {
        d(i, j) = d(j, i) = (x.row(i) - x.row(j)).norm();
      }
    }
    return d;
  }
  Eigen::VectorXd norms = x.rowwise().norm();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(norms(i) > 0.0)) {
      throw DomainError("cosine distance undefined for zero-norm row " +
                        std::to_string(i));
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double c = x.row(i).dot(x.row(j)) / (norms(i) * norms(j));
      d(i, j) = d(j, i) = 1.0 - c;
    }
  }
  return d;
}

namespace {

struct RowEntropy {
  double log2_perplexity;
};

/// Fills `out` with p_{j|i} for precision `beta` and returns the entropy in
/// bits. Squared distances are shifted by their minimum for stability.
double conditional_row(const double* distances, std::size_t n, std::size_t self,
                       double beta, double* out) {
  double min_sq = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    if (j != self) min_sq = std::min(min_sq, distances[j] * distances[j]);
  }
  double sum = 0.0;
  double weighted = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == self) {
      out[j] = 0.0;
      continue;
    }
    const double shifted = distances[j] * distances[j] - min_sq;
    const double w = std::exp(-beta * shifted);
    out[j] = w;
    sum += w;
    weighted += w * shifted;
  }
  for (std::size_t j = 0; j < n; ++j) out[j] /= sum;
  // H = log Z + beta <d^2 - min>, in nats.
  return (std::log(sum) + beta * weighted / sum) / std::log(2.0);
}

struct CalibratedRow {
  double beta;
  double log2_perplexity;
  bool converged;
};

CalibratedRow calibrate_row(const double* distances, std::size_t n,
                            std::size_t self, double perplexity, double* out) {
  const double target = std::log2(perplexity);
  double mean_sq = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j != self) mean_sq += distances[j] * distances[j];
  }
  mean_sq /= static_cast<double>(n - 1);
  double beta = mean_sq > 0.0 ? 1.0 / mean_sq : 1.0;
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  double entropy = conditional_row(distances, n, self, beta, out);

  // Expand until the target is bracketed, then bisect.
  constexpr int kMaxExpansions = 2100;
  int expansions = 0;
  while (std::abs(entropy - target) >= kPerplexityTolerance &&
         expansions < kMaxExpansions && (lo == 0.0 || std::isinf(hi))) {
    if (entropy > target) {
      lo = beta;
      if (std::isinf(hi)) {
        beta *= 2.0;
      } else {
        break;
      }
    } else {
      hi = beta;
      if (lo == 0.0) {
        beta *= 0.5;
      } else {
        break;
      }
    }
    if (!(beta > 0.0) || std::isinf(beta)) break;
    entropy = conditional_row(distances, n, self, beta, out);
    ++expansions;
  }
  for (int step = 0; step < kMaxBisectionSteps &&
                     std::abs(entropy - target) >= kPerplexityTolerance;
       ++step) {
    if (lo == 0.0 || std::isinf(hi)) break;  // never bracketed
    beta = 0.5 * (lo + hi);
    entropy = conditional_row(distances, n, self, beta, out);
    if (entropy > target) {
      lo = beta;
    } else {
      hi = beta;
    }
  }
  return {beta, entropy, std::abs(entropy - target) < kPerplexityTolerance};
}

void check_perplexity(double perplexity, std::size_t n) {
  if (!(perplexity > 1.0) ||
      !(perplexity < static_cast<double>(n) - 1.0)) {
    throw DomainError("perplexity " + std::to_string(perplexity) +
                      " unreachable with " + std::to_string(n) +
                      " points (must be in (1, n_s - 1))");
  }
}

}  // namespace

void gaussian_conditionals(const double* distances, std::size_t n,
                           std::size_t self, double precision, double* out) {
  conditional_row(distances, n, self, precision, out);
}

Conditionals calibrate_conditionals(const Eigen::MatrixXd& distances,
                                    double perplexity) {
  const auto n = static_cast<std::size_t>(distances.rows());
  if (distances.cols() != distances.rows()) {
    throw DomainError("calibrate: distance matrix must be square");
  }
  check_perplexity(perplexity, n);
  Conditionals result;
  result.p.resize(distances.rows(), distances.cols());
  result.sigma.resize(n);
  result.log2_perplexity.resize(n);
  // Distances are symmetric, so column i doubles as row i (contiguous).
  Eigen::VectorXd row(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto ci = static_cast<Eigen::Index>(i);
    Eigen::VectorXd d = distances.row(ci).transpose();
    const auto cal = calibrate_row(d.data(), n, i, perplexity, row.data());
    result.p.row(ci) = row.transpose();
    result.sigma[i] = std::sqrt(1.0 / (2.0 * cal.beta));
    result.log2_perplexity[i] = cal.log2_perplexity;
    if (!cal.converged) result.failed_rows.push_back(i);
  }
  return result;
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& conditionals) {
  const Eigen::Index n = conditionals.rows();
  Eigen::MatrixXd p(n, n);
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    p(j, j) = 0.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      p(i, j) = p(j, i) = (conditionals(i, j) + conditionals(j, i)) * scale;
    }
  }
  return p;
}

LowDimAffinities low_dim_affinities(const Eigen::MatrixXd& y) {
  const Eigen::Index n = y.rows();
  LowDimAffinities out;
  out.q = Eigen::MatrixXd::Zero(n, n);
  double z = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double w = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
      out.q(i, j) = out.q(j, i) = w;
      z += 2.0 * w;
    }
  }
  out.q /= z;
  out.normalization = z;
  return out;
}

double kl_divergence(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) {
    throw DomainError("KL divergence: shape mismatch");
  }
  double kl = 0.0;
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      if (i == j) continue;
      const double pij = p(i, j);
      if (pij > 0.0) kl += pij * std::log(pij / std::max(q(i, j), 1e-12));
    }
  }
  return kl;
}

namespace {

/// Gradient with Q formed on the fly; requires symmetric p.
void gradient_into(const Eigen::MatrixXd& p, const std::vector<double>& y0,
                   const std::vector<double>& y1, double exaggeration,
                   std::vector<double>& g0, std::vector<double>& g1,
                   double* kl) {
  const std::size_t n = y0.size();
  double z = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = j + 1; i < n; ++i) {
      const double dx = y0[i] - y0[j];
      const double dy = y1[i] - y1[j];
      z += 1.0 / (1.0 + dx * dx + dy * dy);
    }
  }
  z *= 2.0;
  std::fill(g0.begin(), g0.end(), 0.0);
  std::fill(g1.begin(), g1.end(), 0.0);
  double kl_sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double* pcol = p.data() + j * n;
    for (std::size_t i = j + 1; i < n; ++i) {
      const double dx = y0[i] - y0[j];
      const double dy = y1[i] - y1[j];
      const double w = 1.0 / (1.0 + dx * dx + dy * dy);
      const double q = w / z;
      const double pij = pcol[i];
      const double f = 4.0 * (exaggeration * pij - q) * w;
      g0[i] += f * dx;
      g1[i] += f * dy;
      g0[j] -= f * dx;
      g1[j] -= f * dy;
      if (kl && pij > 0.0) kl_sum += pij * std::log(pij / std::max(q, 1e-12));
    }
  }
  if (kl) *kl = 2.0 * kl_sum;
}

}  // namespace

Eigen::MatrixXd kl_gradient(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y,
                            double exaggeration, double* kl) {
  const auto n = static_cast<std::size_t>(y.rows());
  if (p.rows() != y.rows() || p.cols() != y.rows() || y.cols() != 2) {
    throw DomainError("KL gradient: expected n x n affinities and n x 2 map");
  }
  std::vector<double> y0(n), y1(n), g0(n), g1(n);
  for (std::size_t i = 0; i < n; ++i) {
    y0[i] = y(static_cast<Eigen::Index>(i), 0);
    y1[i] = y(static_cast<Eigen::Index>(i), 1);
  }
  gradient_into(p, y0, y1, exaggeration, g0, g1, kl);
  Eigen::MatrixXd g(y.rows(), 2);
  for (std::size_t i = 0; i < n; ++i) {
    g(static_cast<Eigen::Index>(i), 0) = g0[i];
    g(static_cast<Eigen::Index>(i), 1) = g1[i];
  }
  return g;
}

Eigen::MatrixXd pca_initialization(const Eigen::MatrixXd& x) {
  TrajectoryMatrix data(static_cast<std::uint64_t>(x.rows()),
                        static_cast<std::size_t>(x.cols()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      data.values[static_cast<std::size_t>(i * x.cols() + c)] = x(i, c);
    }
  }
  const MatrixSource source(data);
  const PcaResult pca = analyze(source);
  Eigen::MatrixXd scores =
      project(source, pca.stats, pca.spectrum.vectors.leftCols(2));
  const double mean0 = scores.col(0).mean();
  const double sd0 = std::sqrt((scores.col(0).array() - mean0).square().sum() /
                               static_cast<double>(scores.rows() - 1));
  if (sd0 > 0.0) scores *= 1e-4 / sd0;
  return scores;
}

Embedding optimize(const Eigen::MatrixXd& p, Eigen::MatrixXd initial,
                   const TsneConfig& config) {
  const auto n = static_cast<std::size_t>(p.rows());
  if (initial.rows() != p.rows() || initial.cols() != 2) {
    throw DomainError("t-SNE: initial embedding must be n_s x 2");
  }
  if (config.iterations < 1) throw DomainError("t-SNE needs at least one iteration");
  const double learning_rate = config.learning_rate.value_or(
      std::max(static_cast<double>(n) / config.early_exaggeration, 50.0));

  std::vector<double> y0(n), y1(n), g0(n), g1(n);
  std::vector<double> u0(n, 0.0), u1(n, 0.0);
  std::vector<double> gain0(n, 1.0), gain1(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    y0[i] = initial(static_cast<Eigen::Index>(i), 0);
    y1[i] = initial(static_cast<Eigen::Index>(i), 1);
  }

  auto update = [&](std::vector<double>& y, std::vector<double>& u,
                    std::vector<double>& gain, const std::vector<double>& g,
                    double momentum) {
    for (std::size_t i = 0; i < n; ++i) {
      if (config.adaptive_gains) {
        const bool opposite = (g[i] > 0.0) != (u[i] > 0.0);
        gain[i] = opposite ? gain[i] + 0.2 : gain[i] * 0.8;
        gain[i] = std::max(gain[i], config.min_gain);
      }
      u[i] = momentum * u[i] - learning_rate * gain[i] * g[i];
      y[i] += u[i];
    }
  };
  auto recentre = [&](std::vector<double>& y) {
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);
    for (double& v : y) v -= mean;
  };

  Embedding result;
  for (int it = 0; it < config.iterations; ++it) {
    const double exaggeration =
        it < config.exaggeration_iterations ? config.early_exaggeration : 1.0;
    const double momentum =
        it < config.momentum_switch ? config.initial_momentum
                                    : config.final_momentum;
    const bool record = (it + 1) % config.kl_every == 0 ||
                        it + 1 == config.iterations;
    double kl = 0.0;
    gradient_into(p, y0, y1, exaggeration, g0, g1, record ? &kl : nullptr);
    if (record) result.kl_trace.push_back({it + 1, kl});
    update(y0, u0, gain0, g0, momentum);
    update(y1, u1, gain1, g1, momentum);
    recentre(y0);
    recentre(y1);
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(y0[i]) || !std::isfinite(y1[i])) {
        throw OptimizationBlowup(
            "t-SNE diverged at iteration " + std::to_string(it + 1), it + 1);
      }
    }
  }

  result.y.resize(p.rows(), 2);
  for (std::size_t i = 0; i < n; ++i) {
    result.y(static_cast<Eigen::Index>(i), 0) = y0[i];
    result.y(static_cast<Eigen::Index>(i), 1) = y1[i];
  }
  return result;
}

Embedding embed(const Eigen::MatrixXd& x, const TsneConfig& config,
                const Eigen::MatrixXd* initial) {
  const auto n = static_cast<std::size_t>(x.rows());
  config.validate(n);

  Eigen::MatrixXd init;
  if (config.init == TsneInit::provided) {
    if (!initial) throw DomainError("t-SNE: init=provided without coordinates");
    init = *initial;
  } else {
    try {
      init = pca_initialization(x);
    } catch (const DegenerateColumn&) {
      std::mt19937_64 rng(config.seed);
      std::normal_distribution<double> gauss(0.0, 1e-4);
      init.resize(x.rows(), 2);
      for (Eigen::Index i = 0; i < init.size(); ++i) init.data()[i] = gauss(rng);
    }
  }

  // One dense n x n buffer: distances, then conditionals (row by row), then
  // joint probabilities in place.
  Eigen::MatrixXd buffer = pairwise_distances(x, config.metric);
  check_perplexity(config.perplexity, n);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    double* col = buffer.data() + i * n;  // column i == row i (symmetric)
    calibrate_row(col, n, i, config.perplexity, row.data());
    std::copy(row.begin(), row.end(), col);
  }
  // Column i now holds p_{.|i}; symmetrize in place.
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t j = 0; j < n; ++j) {
    buffer(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = 0.0;
    for (std::size_t i = j + 1; i < n; ++i) {
      const auto ci = static_cast<Eigen::Index>(i);
      const auto cj = static_cast<Eigen::Index>(j);
      const double v = (buffer(ci, cj) + buffer(cj, ci)) * scale;
      buffer(ci, cj) = buffer(cj, ci) = v;
    }
  }
  return optimize(buffer, std::move(init), config);
}

}  // namespace fput
