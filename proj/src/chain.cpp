#include "fput/chain.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>

#include "fput/errors.hpp"

namespace fput {

void ModelParams::validate() const {
  if (n_oscillators < 2) {
    throw DomainError("model: need at least 2 oscillators, got " +
                      std::to_string(n_oscillators));
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw DomainError("model: beta must be finite and >= 0");
  }
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw DomainError("model: step size h must be finite and > 0");
  }
  if (alpha != 0.0) {
    throw DomainError("model: only the beta model (alpha = 0) is supported");
  }
  if (stride < 1) {
    throw DomainError("model: recording stride must be >= 1");
  }
}

ChainState::ChainState(int n_oscillators)
    : q(static_cast<std::size_t>(n_oscillators) + 2, 0.0),
      p(static_cast<std::size_t>(n_oscillators), 0.0) {}

ChainState build_initial_condition(const InitialCondition& ic,
                                   const ModelParams& params) {
  params.validate();
  const int n = params.n_oscillators;
  if (ic.mode < 1 || ic.mode > n) {
    throw DomainError("initial condition: mode k=" + std::to_string(ic.mode) +
                      " outside 1.." + std::to_string(n));
  }
  if (!std::isfinite(ic.amplitude)) {
    throw DomainError("initial condition: amplitude must be finite");
  }
  ChainState state(n);
  const double norm = ic.amplitude * std::sqrt(2.0 / (n + 1));
  for (int i = 1; i <= n; ++i) {
    state.q[i] = norm * std::sin(static_cast<double>(i) * ic.mode *
                                 std::numbers::pi / (n + 1));
  }
  return state;
}

void compute_forces(std::span<const double> q, double beta,
                    std::span<double> force) {
  const std::size_t n = force.size();
  // Bond tension f_b = d + beta d^3 with d = q_{b+1} - q_b; F_i = f_i - f_{i-1}.
  double left = q[1] - q[0];
  double left_tension = left + beta * left * left * left;
  for (std::size_t i = 1; i <= n; ++i) {
    const double right = q[i + 1] - q[i];
    const double right_tension = right + beta * right * right * right;
    force[i - 1] = right_tension - left_tension;
    left_tension = right_tension;
  }
}

std::vector<double> acceleration(const ChainState& state,
                                 const ModelParams& params) {
  std::vector<double> force(state.p.size());
  compute_forces(state.q, params.beta, force);
  return force;
}

double total_energy(const ChainState& state, const ModelParams& params) {
  double kinetic = 0.0;
  for (double p : state.p) kinetic += p * p;
  double harmonic = 0.0;
  double quartic = 0.0;
  for (std::size_t i = 0; i + 1 < state.q.size(); ++i) {
    const double d = state.q[i + 1] - state.q[i];
    const double d2 = d * d;
    harmonic += d2;
    quartic += d2 * d2;
  }
  return 0.5 * kinetic + 0.5 * harmonic + 0.25 * params.beta * quartic;
}

void to_phase_point(const ChainState& state, std::span<double> row) {
  const std::size_t n = state.p.size();
  for (std::size_t i = 0; i < n; ++i) {
    row[i] = state.q[i + 1];
    row[n + i] = state.p[i];
  }
}

ChainState from_phase_point(std::span<const double> row, double t) {
  const int n = static_cast<int>(row.size() / 2);
  ChainState state(n);
  for (int i = 0; i < n; ++i) {
    state.q[i + 1] = row[i];
    state.p[i] = row[n + i];
  }
  state.t = t;
  return state;
}

namespace {

void kick(std::vector<double>& p, const std::vector<double>& force,
          double half_step) {
  for (std::size_t i = 0; i < p.size(); ++i) p[i] += half_step * force[i];
}

void drift(std::vector<double>& q, const std::vector<double>& p, double step) {
  for (std::size_t i = 0; i < p.size(); ++i) q[i + 1] += step * p[i];
}

bool within_limits(const ChainState& state, double limit) {
  // Written so that NaN fails the comparison.
  for (double x : state.q) {
    if (!(std::abs(x) <= limit)) return false;
  }
  for (double x : state.p) {
    if (!(std::abs(x) <= limit)) return false;
  }
  return true;
}

}  // namespace

ChainState velocity_verlet_step(const ChainState& state,
                                const ModelParams& params) {
  VelocityVerlet integrator(params, state);
  integrator.step();
  return integrator.state();
}

VelocityVerlet::VelocityVerlet(const ModelParams& params, ChainState state)
    : params_(params), state_(std::move(state)) {
  params_.validate();
  if (state_.size() != params_.n_oscillators ||
      state_.q.size() != state_.p.size() + 2) {
    throw DomainError("integrator: state size does not match model");
  }
  start_time_ = state_.t;
  force_.resize(state_.p.size());
  compute_forces(state_.q, params_.beta, force_);
}

void VelocityVerlet::step() {
  const double h = direction_ * params_.h;
  kick(state_.p, force_, 0.5 * h);
  drift(state_.q, state_.p, h);
  compute_forces(state_.q, params_.beta, force_);
  kick(state_.p, force_, 0.5 * h);
  ++steps_;
  net_steps_ += direction_;
  state_.t = start_time_ + static_cast<double>(net_steps_) * params_.h;
  if (!within_limits(state_, kBlowupLimit)) {
    std::ostringstream msg;
    msg << "integration blew up at step " << steps_ << " (t=" << state_.t
        << ", beta=" << params_.beta << ", h=" << params_.h << ")";
    throw IntegrationBlowup(msg.str(), steps_);
  }
}

IntegrationSummary integrate(const InitialCondition& ic,
                             const ModelParams& params,
                             std::uint64_t n_samples, const SampleSink& sink) {
  if (n_samples < 1) {
    throw DomainError("integrate: need at least one sample");
  }
  VelocityVerlet integrator(params, build_initial_condition(ic, params));

  IntegrationSummary summary;
  summary.initial_energy = total_energy(integrator.state(), params);
  const double scale =
      summary.initial_energy != 0.0 ? std::abs(summary.initial_energy) : 1.0;

  std::vector<double> row(static_cast<std::size_t>(params.phase_dimension()));
  auto emit = [&](std::uint64_t sample) {
    to_phase_point(integrator.state(), row);
    if (sink) sink(row, integrator.state().t);
    summary.samples = sample + 1;
  };

  emit(0);
  const std::uint64_t total_steps = n_samples * params.stride;
  for (std::uint64_t step = 1; step <= total_steps; ++step) {
    integrator.step();
    const double drift =
        std::abs(total_energy(integrator.state(), params) -
                 summary.initial_energy) / scale;
    if (drift > summary.max_relative_drift) summary.max_relative_drift = drift;
    if (step % params.stride == 0) {
      const std::uint64_t sample = step / params.stride;
      if (sample < n_samples) emit(sample);
    }
  }

  summary.steps = integrator.steps_taken();
  summary.final_state = integrator.state();
  summary.final_energy = total_energy(summary.final_state, params);
  return summary;
}

}  // namespace fput
