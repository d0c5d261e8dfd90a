#include "fput/modes.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <string>

#include "fput/errors.hpp"
#include "fput/trajectory.hpp"

namespace fput {

std::vector<double> mode_frequencies(int n_oscillators) {
  if (n_oscillators < 1) throw DomainError("mode frequencies: N must be >= 1");
  std::vector<double> omega(static_cast<std::size_t>(n_oscillators));
  for (int k = 1; k <= n_oscillators; ++k) {
    omega[k - 1] =
        2.0 * std::sin(k * std::numbers::pi / (2.0 * (n_oscillators + 1)));
  }
  return omega;
}

double ModeSpectrum::total() const {
  double sum = 0.0;
  for (double e : energy) sum += e;
  return sum;
}

ModeTransform::ModeTransform(int n_oscillators)
    : n_(n_oscillators), omega_(mode_frequencies(n_oscillators)) {
  const double norm = std::sqrt(2.0 / (n_ + 1));
  sin_.resize(static_cast<std::size_t>(n_) * n_);
  for (int k = 1; k <= n_; ++k) {
    for (int j = 1; j <= n_; ++j) {
      // Reduce j*k mod 2(N+1) first so the argument stays in [0, 2pi).
      const int phase = (j * k) % (2 * (n_ + 1));
      sin_[(k - 1) * n_ + (j - 1)] =
          norm * std::sin(phase * std::numbers::pi / (n_ + 1));
    }
  }
}

void ModeTransform::apply(std::span<const double> in,
                          std::span<double> out) const {
  // j = 0 and j = N+1 terms vanish (sin(0) and the pinned boundary).
  for (int k = 0; k < n_; ++k) {
    const double* s = &sin_[static_cast<std::size_t>(k) * n_];
    double sum = 0.0;
    for (int j = 0; j < n_; ++j) sum += in[j] * s[j];
    out[k] = sum;
  }
}

ModeCoordinates ModeTransform::forward(const ChainState& state) const {
  if (state.size() != n_) throw DomainError("mode transform: size mismatch");
  ModeCoordinates modes{std::vector<double>(n_), std::vector<double>(n_)};
  apply(state.interior(), modes.a);
  apply(state.p, modes.a_dot);
  return modes;
}

ModeCoordinates ModeTransform::forward(std::span<const double> row) const {
  if (row.size() != 2 * static_cast<std::size_t>(n_)) {
    throw DomainError("mode transform: row size mismatch");
  }
  ModeCoordinates modes{std::vector<double>(n_), std::vector<double>(n_)};
  apply(row.first(n_), modes.a);
  apply(row.subspan(n_), modes.a_dot);
  return modes;
}

ChainState ModeTransform::inverse(const ModeCoordinates& modes,
                                  double t) const {
  if (modes.a.size() != static_cast<std::size_t>(n_) ||
      modes.a_dot.size() != static_cast<std::size_t>(n_)) {
    throw DomainError("mode transform: size mismatch");
  }
  ChainState state(n_);
  // The sine matrix is symmetric, so the inverse uses the same table.
  apply(modes.a, std::span<double>(state.q).subspan(1, n_));
  apply(modes.a_dot, state.p);
  state.t = t;
  return state;
}

namespace {

ModeSpectrum make_spectrum(ModeCoordinates modes,
                           const std::vector<double>& omega, double t) {
  ModeSpectrum s;
  s.energy.resize(omega.size());
  for (std::size_t k = 0; k < omega.size(); ++k) {
    s.energy[k] = mode_energy(modes.a[k], modes.a_dot[k], omega[k]);
  }
  s.a = std::move(modes.a);
  s.a_dot = std::move(modes.a_dot);
  s.omega = omega;
  s.t = t;
  return s;
}

}  // namespace

ModeSpectrum ModeTransform::spectrum(const ChainState& state) const {
  return make_spectrum(forward(state), omega_, state.t);
}

ModeSpectrum ModeTransform::spectrum(std::span<const double> row,
                                     double t) const {
  return make_spectrum(forward(row), omega_, t);
}

double ModeTransform::energy_of(std::span<const double> row, int k) const {
  if (k < 1 || k > n_) {
    throw DomainError("mode " + std::to_string(k) + " outside 1.." +
                      std::to_string(n_));
  }
  const double* s = &sin_[static_cast<std::size_t>(k - 1) * n_];
  double a = 0.0;
  double a_dot = 0.0;
  for (int j = 0; j < n_; ++j) {
    a += row[j] * s[j];
    a_dot += row[n_ + j] * s[j];
  }
  return mode_energy(a, a_dot, omega_[k - 1]);
}

std::uint64_t mode_energy_series(const RowSource& source, double time_step,
                                 std::span<const int> modes,
                                 std::uint64_t stride, std::ostream& out) {
  if (stride == 0) throw DomainError("mode energy series: stride must be >= 1");
  if (source.columns() % 2 != 0) {
    throw DomainError("mode energy series: source is not a phase-space trajectory");
  }
  const int n = static_cast<int>(source.columns() / 2);
  for (int k : modes) {
    if (k < 1 || k > n) {
      throw DomainError("mode energy series: mode " + std::to_string(k) +
                        " outside 1.." + std::to_string(n));
    }
  }
  out << 't';
  for (int k : modes) out << ",E_" << k;
  out << '\n';
  if (modes.empty()) return 0;

  const ModeTransform transform(n);
  std::uint64_t written = 0;
  char buf[32];
  std::string line;
  source.for_each_block(4096, [&](const RowBlock& block) {
    for (std::size_t r = 0; r < block.rows; ++r) {
      const std::uint64_t index = block.first_row + r;
      if (index % stride != 0) continue;
      const auto row = block.row(r);
      line.clear();
      int len = std::snprintf(buf, sizeof buf, "%.17g",
                              static_cast<double>(index) * time_step);
      line.append(buf, static_cast<std::size_t>(len));
      for (int k : modes) {
        len = std::snprintf(buf, sizeof buf, ",%.17g", transform.energy_of(row, k));
        line.append(buf, static_cast<std::size_t>(len));
      }
      line.push_back('\n');
      out << line;
      ++written;
    }
  });
  if (!out) throw IoError("mode energy series: write failed");
  return written;
}

}  // namespace fput
