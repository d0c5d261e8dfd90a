#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "fput/chain.hpp"
#include "fput/errors.hpp"

namespace {

using fput::ChainState;
using fput::InitialCondition;
using fput::ModelParams;

ModelParams params(double beta, int n = 32) {
  ModelParams p;
  p.n_oscillators = n;
  p.beta = beta;
  return p;
}

ChainState random_state(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  ChainState s(n);
  for (int i = 1; i <= n; ++i) s.q[i] = u(rng);
  for (double& p : s.p) p = u(rng);
  return s;
}

TEST(ModelParams, RejectsInvalidConfiguration) {
  auto p = params(0.3);
  p.alpha = 0.1;
  EXPECT_THROW(p.validate(), fput::DomainError);
  p = params(0.3, 1);
  EXPECT_THROW(p.validate(), fput::DomainError);
  p = params(-1.0);
  EXPECT_THROW(p.validate(), fput::DomainError);
  p = params(0.3);
  p.h = 0.0;
  EXPECT_THROW(p.validate(), fput::DomainError);
  EXPECT_NO_THROW(params(0.3).validate());
}

TEST(InitialCondition, SineProfile) {
  const auto p = params(0.3);
  const auto s = fput::build_initial_condition({3, 10.0}, p);
  ASSERT_EQ(s.q.size(), 34u);
  EXPECT_EQ(s.q.front(), 0.0);
  EXPECT_EQ(s.q.back(), 0.0);
  for (int i = 1; i <= 32; ++i) {
    const double want =
        10.0 * std::sqrt(2.0 / 33.0) * std::sin(i * 3 * std::numbers::pi / 33.0);
    EXPECT_NEAR(s.q[i], want, 1e-14);
  }
  for (double v : s.p) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(s.t, 0.0);
}

TEST(InitialCondition, ModeOutOfRange) {
  EXPECT_THROW(fput::build_initial_condition({0, 10.0}, params(0.1)),
               fput::DomainError);
  EXPECT_THROW(fput::build_initial_condition({33, 10.0}, params(0.1)),
               fput::DomainError);
}

TEST(InitialCondition, ZeroAmplitudeHasZeroEnergy) {
  const auto p = params(0.3);
  const auto s = fput::build_initial_condition({1, 0.0}, p);
  EXPECT_EQ(fput::total_energy(s, p), 0.0);
}

TEST(Energy, SingleModeEnergies) {
  const auto p = params(0.0);
  const double e1 = fput::total_energy(fput::build_initial_condition({1, 10}, p), p);
  const double e2 = fput::total_energy(fput::build_initial_condition({2, 10}, p), p);
  EXPECT_NEAR(e1, 0.4528, 5e-4);
  EXPECT_NEAR(e2, 1.807, 5e-4);
  // Closed form: A^2 omega_k^2 / 2.
  const double w1 = 2.0 * std::sin(std::numbers::pi / 66.0);
  EXPECT_NEAR(e1, 50.0 * w1 * w1, 1e-12);
}

TEST(Energy, DensityScaling) {
  const auto p = params(0.0);
  const double e1 = fput::total_energy(fput::build_initial_condition({1, 10}, p), p);
  const double e2 = fput::total_energy(fput::build_initial_condition({2, 10}, p), p);
  const double eps1 = fput::energy_density(e1, 32);
  const double eps2 = fput::energy_density(e2, 32);
  EXPECT_NEAR(eps1, 0.01415, 0.01415 * 0.01);
  EXPECT_NEAR(eps2, 0.0565, 0.0565 * 0.01);
  EXPECT_NEAR(eps2 / eps1, 4.0, 0.04);
  EXPECT_EQ(fput::energy_density(0.0, 32), 0.0);
}

TEST(Forces, TwoSiteStencil) {
  ChainState s(2);
  s.q = {0.0, 1.0, 0.0, 0.0};
  auto f = fput::acceleration(s, params(0.0, 2));
  EXPECT_DOUBLE_EQ(f[0], -2.0);
  EXPECT_DOUBLE_EQ(f[1], 1.0);
  f = fput::acceleration(s, params(1.0, 2));
  EXPECT_DOUBLE_EQ(f[0], -4.0);
  EXPECT_DOUBLE_EQ(f[1], 2.0);
}

TEST(Forces, EquilibriumIsForceFree) {
  ChainState s(32);
  for (double f : fput::acceleration(s, params(3.0))) EXPECT_EQ(f, 0.0);
}

// F_i = -dH/dq_i via central differences of total_energy.
TEST(Forces, MatchFiniteDifferenceGradient) {
  std::mt19937_64 rng(7);
  for (double beta : {0.0, 0.3, 3.0}) {
    const auto p = params(beta, 8);
    for (int trial = 0; trial < 5; ++trial) {
      const auto s = random_state(8, rng);
      const auto f = fput::acceleration(s, p);
      for (int i = 1; i <= 8; ++i) {
        const double step = 1e-6;
        auto plus = s;
        auto minus = s;
        plus.q[i] += step;
        minus.q[i] -= step;
        const double grad =
            (fput::total_energy(plus, p) - fput::total_energy(minus, p)) /
            (2.0 * step);
        EXPECT_NEAR(f[i - 1], -grad, 1e-6 * std::max(1.0, std::abs(grad)))
            << "beta=" << beta << " i=" << i;
      }
    }
  }
}

TEST(Verlet, FixedPointOnlyAdvancesTime) {
  const auto p = params(0.3);
  ChainState s(32);
  const auto next = fput::velocity_verlet_step(s, p);
  for (double q : next.q) EXPECT_EQ(q, 0.0);
  for (double v : next.p) EXPECT_EQ(v, 0.0);
  EXPECT_DOUBLE_EQ(next.t, p.h);
}

// Linear chain: mode k evolves as a_k(t) = A cos(omega_k t). The one-step
// error of a second-order scheme is O(h^3).
TEST(Verlet, HarmonicLocalErrorIsThirdOrder) {
  const int k = 3;
  const double amp = 10.0;
  const double omega = 2.0 * std::sin(k * std::numbers::pi / 66.0);
  auto step_error = [&](double h) {
    auto p = params(0.0);
    p.h = h;
    const auto s0 = fput::build_initial_condition({k, amp}, p);
    const auto s1 = fput::velocity_verlet_step(s0, p);
    double err = 0.0;
    for (int i = 1; i <= 32; ++i) {
      const double shape = std::sqrt(2.0 / 33.0) * std::sin(i * k * std::numbers::pi / 33.0);
      const double q = amp * std::cos(omega * h) * shape;
      const double v = -amp * omega * std::sin(omega * h) * shape;
      err = std::max({err, std::abs(s1.q[i] - q), std::abs(s1.p[i - 1] - v)});
    }
    return err;
  };
  const double e1 = step_error(0.05);
  const double e2 = step_error(0.025);
  const double order = std::log2(e1 / e2);
  EXPECT_NEAR(order, 3.0, 0.2);
}

TEST(Verlet, TimeReversible) {
  const auto p = params(0.3);
  const auto s0 = fput::build_initial_condition({1, 10.0}, p);
  fput::VelocityVerlet vv(p, s0);
  for (int i = 0; i < 1000; ++i) vv.step();
  vv.set_backward(true);
  for (int i = 0; i < 1000; ++i) vv.step();
  const auto& s = vv.state();
  for (std::size_t i = 0; i < s.q.size(); ++i) EXPECT_NEAR(s.q[i], s0.q[i], 1e-10);
  for (std::size_t i = 0; i < s.p.size(); ++i) EXPECT_NEAR(s.p[i], s0.p[i], 1e-10);
  EXPECT_NEAR(s.t, 0.0, 1e-12);
}

TEST(Verlet, ReversibleAcrossNonlinearity) {
  const auto p = params(3.0);
  for (int k : {1, 2}) {
    const auto s0 = fput::build_initial_condition({k, 10.0}, p);
    fput::VelocityVerlet vv(p, s0);
    for (int i = 0; i < 10000; ++i) vv.step();
    vv.set_backward(true);
    for (int i = 0; i < 10000; ++i) vv.step();
    double worst = 0.0;
    for (std::size_t i = 0; i < s0.q.size(); ++i) {
      worst = std::max(worst, std::abs(vv.state().q[i] - s0.q[i]));
    }
    for (std::size_t i = 0; i < s0.p.size(); ++i) {
      worst = std::max(worst, std::abs(vv.state().p[i] - s0.p[i]));
    }
    EXPECT_LT(worst, 1e-9) << "k=" << k;
  }
}

TEST(Verlet, BoundariesStayPinned) {
  std::mt19937_64 rng(3);
  const auto p = params(1.0);
  fput::VelocityVerlet vv(p, random_state(32, rng));
  for (int i = 0; i < 5000; ++i) {
    vv.step();
    ASSERT_EQ(vv.state().q.front(), 0.0);
    ASSERT_EQ(vv.state().q.back(), 0.0);
  }
}

TEST(Verlet, BlowupCarriesStepIndex) {
  auto p = params(1.0);
  p.h = 2.0;
  const auto s0 = fput::build_initial_condition({1, 100.0}, p);
  fput::VelocityVerlet vv(p, s0);
  try {
    for (int i = 0; i < 1000; ++i) vv.step();
    FAIL() << "expected blowup";
  } catch (const fput::IntegrationBlowup& e) {
    EXPECT_GE(e.step(), 1u);
    EXPECT_LE(e.step(), 1000u);
  }
}

TEST(Integrate, SingleSampleEmitsOnlyInitialCondition) {
  const auto p = params(0.3);
  int emitted = 0;
  double first_t = -1.0;
  const auto summary = fput::integrate({1, 10.0}, p, 1,
                                       [&](std::span<const double> row, double t) {
                                         EXPECT_EQ(row.size(), 64u);
                                         if (emitted++ == 0) first_t = t;
                                       });
  EXPECT_EQ(emitted, 1);
  EXPECT_EQ(first_t, 0.0);
  EXPECT_EQ(summary.samples, 1u);
  EXPECT_EQ(summary.steps, 1u);
  EXPECT_DOUBLE_EQ(summary.final_state.t, p.h);
}

TEST(Integrate, SampleCountAndTimeline) {
  auto p = params(0.3);
  p.stride = 4;
  std::vector<double> times;
  const auto summary = fput::integrate(
      {1, 10.0}, p, 100,
      [&](std::span<const double>, double t) { times.push_back(t); });
  ASSERT_EQ(times.size(), 100u);
  EXPECT_EQ(summary.steps, 400u);
  EXPECT_DOUBLE_EQ(times[1], 4 * p.h);
  EXPECT_DOUBLE_EQ(times.back(), 99 * 4 * p.h);
  EXPECT_DOUBLE_EQ(summary.final_state.t, 400 * p.h);
}

TEST(Integrate, FirstRowIsInitialCondition) {
  const auto p = params(0.3);
  const auto s0 = fput::build_initial_condition({2, 10.0}, p);
  std::vector<double> first;
  fput::integrate({2, 10.0}, p, 3, [&](std::span<const double> row, double t) {
    if (t == 0.0) first.assign(row.begin(), row.end());
  });
  ASSERT_EQ(first.size(), 64u);
  for (int i = 0; i < 32; ++i) {
    EXPECT_EQ(first[i], s0.q[i + 1]);
    EXPECT_EQ(first[32 + i], 0.0);
  }
}

TEST(Integrate, EnergyDriftStaysSmall) {
  const auto summary =
      fput::integrate({1, 10.0}, params(0.3), 200000, nullptr);
  EXPECT_LT(summary.max_relative_drift, 1e-3);
  EXPECT_GT(summary.initial_energy, 0.45);
}

TEST(PhasePoint, RoundTrip) {
  std::mt19937_64 rng(5);
  const auto s = random_state(32, rng);
  std::vector<double> row(64);
  fput::to_phase_point(s, row);
  const auto back = fput::from_phase_point(row, 1.5);
  EXPECT_EQ(back.q, s.q);
  EXPECT_EQ(back.p, s.p);
  EXPECT_EQ(back.t, 1.5);
}

}  // namespace
