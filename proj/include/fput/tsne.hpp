#pragma once

// Exact t-SNE: dense O(n_s^2) affinities, perplexity calibration by
// bisection, and momentum gradient descent on KL(P || Q).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fput {

/// Largest dataset accepted by the exact implementation.
inline constexpr std::size_t kTsneMaxPoints = 20000;

enum class Metric { euclidean, cosine };

std::string to_string(Metric metric);
Metric parse_metric(const std::string& text);

enum class TsneInit { pca, provided };

struct TsneConfig {
  double perplexity = 30.0;
  Metric metric = Metric::euclidean;
  TsneInit init = TsneInit::pca;
  int iterations = 750;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  /// Defaults to max(n_s / early_exaggeration, 50) when unset.
  std::optional<double> learning_rate;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch = 250;
  /// Per-coordinate adaptive gains (+0.2 on sign change, x0.8 otherwise).
  bool adaptive_gains = true;
  double min_gain = 0.01;
  int kl_every = 50;
  /// Seeds the Gaussian fallback initialization used when PCA is not
  /// possible (e.g. a constant column).
  std::uint64_t seed = 42;

  void validate(std::size_t n_points) const;
};

struct KlSample {
  int iteration = 0;
  double kl = 0.0;
};

struct Embedding {
  /// n_s x 2.
  Eigen::MatrixXd y;
  std::vector<KlSample> kl_trace;
};

/// Dense distance matrix. Euclidean: L2 norm; cosine: 1 - cos angle.
/// Throws DomainError on a zero-norm row under the cosine metric.
Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& x, Metric metric);

/// p_{j|i} for one row of distances at a fixed precision 1/(2 sigma^2).
/// The kernel acts on squared distances.
void gaussian_conditionals(const double* distances, std::size_t n,
                           std::size_t self, double precision, double* out);

struct Conditionals {
  /// Row i holds p_{j|i}.
  Eigen::MatrixXd p;
  std::vector<double> sigma;
  std::vector<double> log2_perplexity;
  std::vector<std::size_t> failed_rows;

  bool converged() const { return failed_rows.empty(); }
};

inline constexpr double kPerplexityTolerance = 1e-5;
inline constexpr int kMaxBisectionSteps = 64;

/// Per-row bisection on sigma_i so that log2 of the row perplexity matches
/// log2(perplexity). Rows that miss the tolerance are listed in failed_rows.
Conditionals calibrate_conditionals(const Eigen::MatrixXd& distances,
                                    double perplexity);

/// p_ij = (p_{j|i} + p_{i|j}) / (2 n_s).
Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& conditionals);

struct LowDimAffinities {
  Eigen::MatrixXd q;
  /// Z = sum_{k != l} (1 + |y_k - y_l|^2)^-1.
  double normalization = 0.0;
};

LowDimAffinities low_dim_affinities(const Eigen::MatrixXd& y);

/// q is floored at 1e-12 inside the logarithm.
double kl_divergence(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q);

/// dKL/dy_i = 4 sum_j (a p_ij - q_ij)(y_i - y_j)(1 + |y_i - y_j|^2)^-1 with
/// exaggeration factor a. Optionally reports KL(P || Q) for the
/// unexaggerated P.
Eigen::MatrixXd kl_gradient(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y,
                            double exaggeration = 1.0,
                            double* kl = nullptr);

/// Leading two PCA scores of the standardized data, scaled so the first
/// column has standard deviation 1e-4.
Eigen::MatrixXd pca_initialization(const Eigen::MatrixXd& x);

Embedding optimize(const Eigen::MatrixXd& p, Eigen::MatrixXd initial,
                   const TsneConfig& config);

/// Full pipeline: distances, calibration, symmetrization, initialization
/// and optimization. `initial` is used when config.init == provided.
Embedding embed(const Eigen::MatrixXd& x, const TsneConfig& config,
                const Eigen::MatrixXd* initial = nullptr);

}  // namespace fput
