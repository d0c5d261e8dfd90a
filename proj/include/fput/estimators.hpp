#pragma once

// Intrinsic-dimension heuristics on a PCA eigenvalue spectrum.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fput/pca.hpp"

namespace fput {

enum class IdMethod {
  participation_ratio,  // PR
  kaiser,               // KC
  kneedle,              // KA
};

/// Short tag used in reports: "PR", "KC", "KA".
std::string method_tag(IdMethod method);
IdMethod parse_method_tag(const std::string& tag);

struct IdEstimate {
  IdMethod method = IdMethod::participation_ratio;
  int m_star = 0;
  /// D_PR for PR, the eigenvalue threshold count for KC, the knee abscissa
  /// for KA.
  double raw = 0.0;
  /// Threshold (KC) or sensitivity (KA); unused for PR.
  double parameter = 0.0;
};

/// D_PR = (sum lambda)^2 / sum lambda^2, reported as round-half-up.
IdEstimate participation_ratio(std::span<const double> eigenvalues);
inline IdEstimate participation_ratio(const EigenSpectrum& spectrum) {
  return participation_ratio(spectrum.values);
}
/// Same quantity through (Tr S)^2 / Tr(S^2).
double participation_ratio_trace(const Eigen::MatrixXd& s);

inline constexpr double kJolliffeThreshold = 0.7;

/// Number of eigenvalues >= threshold (inclusive).
IdEstimate kaiser_count(std::span<const double> eigenvalues,
                        double threshold = kJolliffeThreshold);
inline IdEstimate kaiser_count(const EigenSpectrum& spectrum,
                               double threshold = kJolliffeThreshold) {
  return kaiser_count(spectrum.values, threshold);
}

/// Diagnostics of one Kneedle run on a decreasing convex curve.
struct KneedleResult {
  /// Index into the input of the declared knee, if any.
  std::optional<std::size_t> knee;
  std::vector<double> x_normalized;
  std::vector<double> difference;
  std::vector<std::size_t> local_maxima;
};

/// Kneedle elbow detection for a decreasing convex curve y(x), x ascending.
/// No smoothing is applied.
KneedleResult kneedle(std::span<const double> x, std::span<const double> y,
                      double sensitivity = 1.0);

/// Runs Kneedle on the percent reconstruction curve over m = 1..n.
/// Returns nullopt when no knee is found.
std::optional<IdEstimate> kneedle(const ReconstructionCurve& curve,
                                  double sensitivity = 1.0);

struct EstimatorOptions {
  double kaiser_threshold = kJolliffeThreshold;
  double kneedle_sensitivity = 1.0;
};

struct EstimateSet {
  std::vector<IdEstimate> estimates;
  /// Methods that produced no estimate, with the reason.
  std::vector<std::pair<IdMethod, std::string>> failures;

  std::optional<IdEstimate> find(IdMethod method) const;
};

/// PR, KC and KA in that order. A failing method is recorded in `failures`
/// and does not prevent the others.
EstimateSet estimate_all(const EigenSpectrum& spectrum,
                         const ReconstructionCurve& curve,
                         const EstimatorOptions& options = {});

}  // namespace fput
