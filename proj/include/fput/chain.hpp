#pragma once

// FPUT beta chain with fixed ends, integrated by velocity Verlet.
//
//   H(q, p) = 1/2 sum_{i=1..N} p_i^2
//           + sum_{i=0..N} [ 1/2 (q_{i+1} - q_i)^2 + beta/4 (q_{i+1} - q_i)^4 ]
//
// with q_0 = q_{N+1} = 0 and unit masses.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace fput {

/// Physical and numerical configuration of one chain run.
struct ModelParams {
  int n_oscillators = 32;
  double beta = 0.0;
  /// Integration step.
  double h = 0.05;
  /// Cubic coupling. Only the beta model (alpha == 0) is supported.
  double alpha = 0.0;
  /// Number of integration steps between recorded samples.
  int stride = 1;

  void validate() const;
  int phase_dimension() const noexcept { return 2 * n_oscillators; }
};

/// Single-mode excitation: q_i(0) = A sqrt(2/(N+1)) sin(i k pi / (N+1)), p = 0.
struct InitialCondition {
  int mode = 1;
  double amplitude = 10.0;
};

/// Phase point of the chain. `q` carries the two pinned boundary sites,
/// `p` only the N interior momenta.
struct ChainState {
  std::vector<double> q;
  std::vector<double> p;
  double t = 0.0;

  ChainState() = default;
  explicit ChainState(int n_oscillators);

  int size() const noexcept { return static_cast<int>(p.size()); }
  /// Interior positions q_1..q_N.
  std::span<const double> interior() const noexcept {
    return std::span<const double>(q).subspan(1, p.size());
  }
};

ChainState build_initial_condition(const InitialCondition& ic,
                                   const ModelParams& params);

/// Writes F_i = -dH/dq_i for the interior sites into `force` (length N).
/// `q` must have length N + 2.
void compute_forces(std::span<const double> q, double beta,
                    std::span<double> force);

std::vector<double> acceleration(const ChainState& state,
                                 const ModelParams& params);

double total_energy(const ChainState& state, const ModelParams& params);

inline double energy_density(double energy, int n_oscillators) {
  return energy / static_cast<double>(n_oscillators);
}

/// Row layout used everywhere downstream: q_1..q_N followed by p_1..p_N.
void to_phase_point(const ChainState& state, std::span<double> row);
ChainState from_phase_point(std::span<const double> row, double t);

/// One stand-alone step (recomputes the start-of-step force).
ChainState velocity_verlet_step(const ChainState& state,
                                const ModelParams& params);

/// Stateful velocity Verlet integrator. The end-of-step force is cached and
/// reused as the start-of-step force of the next step, so each step costs a
/// single force evaluation.
class VelocityVerlet {
 public:
  /// Any |q_i| or |p_i| beyond this aborts the run.
  static constexpr double kBlowupLimit = 1e12;

  VelocityVerlet(const ModelParams& params, ChainState state);

  /// Advances one step. Throws IntegrationBlowup on non-finite or runaway
  /// coordinates.
  void step();

  /// Runs backwards in time (step -h) when `backward` is set.
  void set_backward(bool backward) noexcept { direction_ = backward ? -1 : 1; }

  const ChainState& state() const noexcept { return state_; }
  std::uint64_t steps_taken() const noexcept { return steps_; }
  const ModelParams& params() const noexcept { return params_; }

 private:
  ModelParams params_;
  ChainState state_;
  std::vector<double> force_;
  std::uint64_t steps_ = 0;
  // Time is recomputed from the signed step count to avoid drift from
  // repeated addition of h.
  std::int64_t net_steps_ = 0;
  double start_time_ = 0.0;
  int direction_ = 1;
};

/// Receives one recorded phase point (q then p, length 2N) and its time.
using SampleSink = std::function<void(std::span<const double> row, double t)>;

struct IntegrationSummary {
  ChainState final_state;
  double initial_energy = 0.0;
  double final_energy = 0.0;
  /// max_t |H(t) - H(0)| / |H(0)| over every step (absolute when H(0) = 0).
  double max_relative_drift = 0.0;
  std::uint64_t steps = 0;
  std::uint64_t samples = 0;
};

/// Integrates n_samples * stride steps. The sink receives the initial
/// condition followed by the state after every `stride`-th step, n_samples
/// rows in total; the final state (after the last step) is returned but not
/// emitted.
IntegrationSummary integrate(const InitialCondition& ic,
                             const ModelParams& params,
                             std::uint64_t n_samples, const SampleSink& sink);

}  // namespace fput
