#include "fput/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "fput/errors.hpp"

namespace fput {

std::string method_tag(IdMethod method) {
  switch (method) {
    case IdMethod::participation_ratio: return "PR";
    case IdMethod::kaiser: return "KC";
    case IdMethod::kneedle: return "KA";
  }
  return "?";
}

IdMethod parse_method_tag(const std::string& tag) {
  if (tag == "PR") return IdMethod::participation_ratio;
  if (tag == "KC") return IdMethod::kaiser;
  if (tag == "KA") return IdMethod::kneedle;
  throw DomainError("unknown estimator tag '" + tag + "'");
}

IdEstimate participation_ratio(std::span<const double> eigenvalues) {
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double lambda : eigenvalues) {
    if (lambda < 0.0) {
      throw DomainError("participation ratio: negative eigenvalue");
    }
    sum += lambda;
    sum_sq += lambda * lambda;
  }
  if (!(sum_sq > 0.0)) {
    throw DomainError("participation ratio: spectrum is all zero");
  }
  IdEstimate est;
  est.method = IdMethod::participation_ratio;
  est.raw = sum * sum / sum_sq;
  est.m_star = static_cast<int>(std::floor(est.raw + 0.5));
  return est;
}

double participation_ratio_trace(const Eigen::MatrixXd& s) {
  const double tr = s.trace();
  const double tr_sq = (s * s).trace();
  if (!(tr_sq > 0.0)) throw DomainError("participation ratio: zero matrix");
  return tr * tr / tr_sq;
}

IdEstimate kaiser_count(std::span<const double> eigenvalues, double threshold) {
  if (!(threshold > 0.0)) {
    throw DomainError("Kaiser rule: threshold must be positive");
  }
  IdEstimate est;
  est.method = IdMethod::kaiser;
  est.parameter = threshold;
  est.m_star = static_cast<int>(std::count_if(
      eigenvalues.begin(), eigenvalues.end(),
      [threshold](double lambda) { return lambda >= threshold; }));
  est.raw = est.m_star;
  return est;
}

KneedleResult kneedle(std::span<const double> x, std::span<const double> y,
                      double sensitivity) {
  const std::size_t n = x.size();
  if (y.size() != n) throw DomainError("kneedle: x and y differ in length");
  if (n < 3) throw DomainError("kneedle: need at least 3 points");
  if (!(sensitivity >= 0.0)) throw DomainError("kneedle: sensitivity must be >= 0");
  for (std::size_t i = 1; i < n; ++i) {
    if (!(x[i] > x[i - 1])) throw DomainError("kneedle: x must be increasing");
    if (y[i] > y[i - 1]) throw DomainError("kneedle: y must be non-increasing");
  }

  KneedleResult result;
  const double x_range = x[n - 1] - x[0];
  const double y_max = *std::max_element(y.begin(), y.end());
  const double y_min = *std::min_element(y.begin(), y.end());
  const double y_range = y_max - y_min;
  result.x_normalized.resize(n);
  result.difference.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    result.x_normalized[i] = (x[i] - x[0]) / x_range;
  }
  if (!(y_range > 0.0)) return result;  // flat curve: no knee

  // Decreasing convex elbow -> increasing concave knee via y^ = 1 - y_norm;
  // the difference curve is measured against the diagonal.
  for (std::size_t i = 0; i < n; ++i) {
    const double y_norm = (y[i] - y_min) / y_range;
    result.difference[i] = (1.0 - y_norm) - result.x_normalized[i];
  }
  const auto& d = result.difference;

  // Local maxima, with end points compared against their single neighbour.
  for (std::size_t i = 0; i < n; ++i) {
    const double left = i > 0 ? d[i - 1] : d[i];
    const double right = i + 1 < n ? d[i + 1] : d[i];
    if (d[i] >= left && d[i] >= right) result.local_maxima.push_back(i);
  }
  if (result.local_maxima.empty()) return result;

  double mean_spacing = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    mean_spacing += result.x_normalized[i] - result.x_normalized[i - 1];
  }
  mean_spacing /= static_cast<double>(n - 1);

  std::size_t next_max = 0;
  double threshold = 0.0;
  std::size_t candidate = 0;
  for (std::size_t i = result.local_maxima.front(); i + 1 < n; ++i) {
    if (next_max < result.local_maxima.size() &&
        result.local_maxima[next_max] == i) {
      threshold = d[i] - sensitivity * mean_spacing;
      candidate = i;
      ++next_max;
    }
    if (d[i + 1] < threshold) {
      result.knee = candidate;
      break;
    }
  }
  return result;
}

std::optional<IdEstimate> kneedle(const ReconstructionCurve& curve,
                                  double sensitivity) {
  const std::size_t n = curve.percent.size() - 1;
  std::vector<double> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = static_cast<double>(i + 1);
  const auto result = kneedle(
      m, std::span<const double>(curve.percent).subspan(1), sensitivity);
  if (!result.knee) return std::nullopt;
  IdEstimate est;
  est.method = IdMethod::kneedle;
  est.parameter = sensitivity;
  est.raw = m[*result.knee];
  est.m_star = static_cast<int>(est.raw);
  return est;
}

std::optional<IdEstimate> EstimateSet::find(IdMethod method) const {
  for (const auto& e : estimates) {
    if (e.method == method) return e;
  }
  return std::nullopt;
}

EstimateSet estimate_all(const EigenSpectrum& spectrum,
                         const ReconstructionCurve& curve,
                         const EstimatorOptions& options) {
  EstimateSet set;
  auto attempt = [&](IdMethod method, auto&& fn) {
    try {
      if (auto est = fn()) {
        set.estimates.push_back(*est);
      } else {
        set.failures.emplace_back(method, "no knee found");
      }
    } catch (const Error& e) {
      set.failures.emplace_back(method, e.what());
    }
  };
  attempt(IdMethod::participation_ratio, [&] {
    return std::optional<IdEstimate>(participation_ratio(spectrum));
  });
  attempt(IdMethod::kaiser, [&] {
    return std::optional<IdEstimate>(
        kaiser_count(spectrum, options.kaiser_threshold));
  });
  attempt(IdMethod::kneedle,
          [&] { return kneedle(curve, options.kneedle_sensitivity); });
  return set;
}

}  // namespace fput
