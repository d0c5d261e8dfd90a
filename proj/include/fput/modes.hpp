#pragma once

// Normal-mode analysis of the fixed-end chain.
//
//   a_k = sqrt(2/(N+1)) sum_j q_j sin(j k pi / (N+1))
//   E_k = (a_dot_k^2 + omega_k^2 a_k^2) / 2,  omega_k = 2 sin(k pi / (2(N+1)))

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "fput/chain.hpp"

namespace fput {

class RowSource;

/// omega_k for k = 1..N (index 0 holds mode 1).
std::vector<double> mode_frequencies(int n_oscillators);

inline double mode_energy(double a, double a_dot, double omega) {
  return 0.5 * (a_dot * a_dot + omega * omega * a * a);
}

struct ModeCoordinates {
  std::vector<double> a;
  std::vector<double> a_dot;
};

struct ModeSpectrum {
  std::vector<double> a;
  std::vector<double> a_dot;
  std::vector<double> omega;
  std::vector<double> energy;
  double t = 0.0;

  /// Sum of the harmonic mode energies.
  double total() const;
};

/// Discrete sine transform with a precomputed sin table. The transform is an
/// orthogonal involution, so the same table serves both directions.
class ModeTransform {
 public:
  explicit ModeTransform(int n_oscillators);

  int size() const noexcept { return n_; }
  const std::vector<double>& frequencies() const noexcept { return omega_; }

  ModeCoordinates forward(const ChainState& state) const;
  /// Same transform on a phase-point row (q_1..q_N, p_1..p_N).
  ModeCoordinates forward(std::span<const double> row) const;
  ChainState inverse(const ModeCoordinates& modes, double t) const;

  ModeSpectrum spectrum(const ChainState& state) const;
  ModeSpectrum spectrum(std::span<const double> row, double t) const;

  /// Energy of a single mode k (1-based) from a phase-point row. O(N).
  double energy_of(std::span<const double> row, int k) const;

 private:
  void apply(std::span<const double> in, std::span<double> out) const;

  int n_;
  // sin_[(k-1) * n + (j-1)] = sqrt(2/(N+1)) sin(j k pi / (N+1))
  std::vector<double> sin_;
  std::vector<double> omega_;
};

/// Streams (t, E_k1, E_k2, ...) rows from a trajectory into a CSV table.
/// Rows are taken every `stride` samples; `time_step` is the time between
/// consecutive samples of the source. Returns the number of rows written.
std::uint64_t mode_energy_series(const RowSource& source, double time_step,
                                 std::span<const int> modes,
                                 std::uint64_t stride, std::ostream& out);

}  // namespace fput
