#include <doctest.h>

#include <cmath>
#include <numbers>

#include "omkam/errors.hpp"
#include "omkam/hamiltonian.hpp"
#include "omkam/random.hpp"
#include "omkam/sde.hpp"

using namespace omkam;

namespace {
constexpr double pi = std::numbers::pi;

LatticeState single(double q, double p, Chart chart = Chart::angle) {
  LatticeState x = LatticeState::zeros(1, chart);
  x.q[0] = q;
  x.p[0] = p;
  x.canonicalize();
  return x;
}

double terminal_p(const HamiltonianModel& m, const NoiseModel& n, std::uint64_t seed, double T, double dt) {
  double out = 0.0;
  integrate(m, &n, LatticeState::zeros(m.sites()), T, {dt, seed, Scheme::euler_maruyama},
            [&](std::size_t, double, const LatticeState& x) { out = x.p[0]; });
  return out;
}
}  // namespace

TEST_CASE("noise model validation") {
  CHECK_THROWS_AS(NoiseModel::constant(1, 0.0, 1.0, 0.1), ModelError);
  CHECK_THROWS_AS(NoiseModel({NoiseProfile{1.0, 1.2, 1.0, 0.0}}, {NoiseProfile{}}, 0.1), ModelError);
  NoiseModel n({NoiseProfile{1.0, 0.5, 3.0, 0.0}}, {NoiseProfile{2.0, 0.0, 0.0, 0.0}}, 0.1);
  CHECK(n.lower() == doctest::Approx(0.5));
  CHECK(n.upper() == doctest::Approx(2.0));
  CHECK_NOTHROW(n.validate_on_grid(0.0, 1.0, 1000));
}

TEST_CASE("zero noise free model stays put") {
  FreeModel m(3);
  LatticeState x0 = LatticeState::zeros(3);
  x0.q = {1.0, 2.0, 3.0};
  x0.p = {0.5, -0.5, 0.0};
  const PathGrid g = simulate(m, NoiseModel::constant(3, 1, 1, 0.0), x0, 1.0, {0.01, 1, Scheme::euler_maruyama});
  for (const auto& x : g.nodes()) CHECK(x == g.front());
  const PathGrid d = simulate_deterministic(m, x0, 1.0, {0.01, 1, Scheme::splitting});
  for (const auto& x : d.nodes()) CHECK(x == d.front());
}

TEST_CASE("Euler harmonic orbit returns with first-order error") {
  HarmonicLattice m({1.0});
  const auto x0 = single(0.1, 0.0);
  auto err = [&](double dt) {
    const PathGrid g = simulate_deterministic(m, x0, 2 * pi, {dt, 0, Scheme::euler_maruyama});
    return std::hypot(lift_angle(g.back().q[0]) - 0.1, g.back().p[0]);
  };
  const double e1 = err(1e-3), e2 = err(5e-4);
  CHECK(e1 < 1e-3);
  CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("terminal variance of scaled Brownian motion") {
  FreeModel m(1);
  const auto noise = NoiseModel::constant(1, 1.0, 1.0, 0.1);
  const std::size_t n = 10000;
  double s = 0.0, s2 = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double p = terminal_p(m, noise, derive_seed(99, j), 1.0, 0.01);
    s += p;
    s2 += p * p;
  }
  const double var = (s2 - s * s / n) / (n - 1);
  CHECK(std::abs(var - 0.01) <= 3.0 * 0.01 * std::sqrt(2.0 / n));
}

TEST_CASE("terminal marginals are close to normal") {
  FreeModel m(1);
  const auto noise = NoiseModel::constant(1, 1.0, 1.0, 1.0);
  const std::size_t n = 100000;
  std::vector<double> v(n);
  double mean = 0.0;
  for (std::size_t j = 0; j < n; ++j) mean += v[j] = terminal_p(m, noise, derive_seed(5, j), 1.0, 0.1);
  mean /= n;
  double m2 = 0.0, m3 = 0.0;
  for (double x : v) {
    m2 += (x - mean) * (x - mean);
    m3 += std::pow(x - mean, 3);
  }
  m2 /= n;
  m3 /= n;
  CHECK(std::abs(m3 / std::pow(m2, 1.5)) <= 0.1);
}

TEST_CASE("seeded reproducibility and independence") {
  const auto m = PendulumLattice::chain(3, 0.5);
  const auto noise = NoiseModel::constant(3, 1.0, 0.5, 0.2);
  LatticeState x0 = LatticeState::zeros(3);
  x0.p = {0.1, 0.2, 0.3};
  const SimConfig cfg{1e-2, 42, Scheme::euler_maruyama};
  CHECK(simulate(m, noise, x0, 1.0, cfg) == simulate(m, noise, x0, 1.0, cfg));
  SimConfig other = cfg;
  other.seed = 43;
  CHECK_FALSE(simulate(m, noise, x0, 1.0, cfg) == simulate(m, noise, x0, 1.0, other));

  FreeModel f(1);
  const auto unit = NoiseModel::constant(1, 1.0, 1.0, 1.0);
  const std::size_t n = 10000;
  double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double a = terminal_p(f, unit, 2 * j, 1.0, 0.25);
    const double b = terminal_p(f, unit, 2 * j + 1, 1.0, 0.25);
    sa += a; sb += b; sab += a * b; saa += a * a; sbb += b * b;
  }
  const double cov = sab / n - sa / n * sb / n;
  const double r = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
  CHECK(std::abs(r) <= 3.0 / std::sqrt(double(n)));
}

TEST_CASE("leapfrog conserves pendulum energy") {
  const auto m = PendulumLattice::chain(1, 0.0);
  const auto x0 = single(1.0, 0.3);
  const PathGrid g = simulate_deterministic(m, x0, 10.0, {1e-3, 0, Scheme::splitting});
  double worst = 0.0;
  for (const auto& x : g.nodes()) worst = std::max(worst, std::abs(m.energy(x) - m.energy(x0)));
  CHECK(worst <= 1e-5);
}

TEST_CASE("leapfrog harmonic orbit converges at second order") {
  HarmonicLattice m({1.3});
  const auto x0 = single(0.2, 0.1);
  auto err = [&](double dt) {
    const PathGrid g = simulate_deterministic(m, x0, 3.0, {dt, 0, Scheme::splitting});
    double worst = 0.0;
    for (std::size_t k = 0; k <= g.steps(); ++k) {
      const double t = g.time(k);
      const double q = 0.2 * std::cos(1.3 * t) + 0.1 / 1.3 * std::sin(1.3 * t);
      const double p = -0.2 * 1.3 * std::sin(1.3 * t) + 0.1 * std::cos(1.3 * t);
      worst = std::max({worst, std::abs(lift_angle(g.node(k).q[0]) - q), std::abs(g.node(k).p[0] - p)});
    }
    return worst;
  };
  const double e1 = err(1e-2), e2 = err(5e-3);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
  // Quadratic invariant p^2 + omega^2 q^2 drifts at O(dt^2) only.
  const PathGrid g = simulate_deterministic(m, x0, 20.0, {1e-2, 0, Scheme::splitting});
  const double e0 = m.energy(x0);
  for (const auto& x : g.nodes()) CHECK(std::abs(m.energy(x) - e0) <= 1e-4 * e0 + 1e-12);
}

TEST_CASE("blow-up guard names the step") {
  FreeModel m(1, Chart::line);
  LatticeState x0 = single(0.0, 0.0, Chart::line);
  x0.p[0] = 2e6;
  try {
    simulate_deterministic(m, x0, 1.0, {0.1, 0, Scheme::euler_maruyama});
    FAIL("expected an integration error");
  } catch (const IntegrationError& e) {
    CHECK(e.step() == 0);
  }
}

TEST_CASE("girsanov weight basics") {
  FreeModel m(2);
  const auto noise = NoiseModel::constant(2, 1.0, 1.0, 0.3);
  const LatticeState x0 = LatticeState::zeros(2);
  const PathGrid path = simulate(m, noise, x0, 1.0, {0.01, 3, Scheme::euler_maruyama});
  const PathGrid ref = PathGrid::constant(x0, 0.0, 1.0, path.steps());
  CHECK(girsanov_weight(path, m, noise, ref) == 1.0);
  CHECK_THROWS_AS(girsanov_weight(path, m, noise.with_epsilon(0.0), ref), DegenerateMeasureError);
}

TEST_CASE("girsanov exponent for a constant-velocity reference") {
  FreeModel m(1, Chart::line);
  const double eps = 0.5, c = 0.8, T = 1.0;
  const auto noise = NoiseModel::constant(1, 1.0, 1.0, eps);
  const LatticeState x0 = single(0.0, 0.0, Chart::line);
  const PathGrid path = simulate(m, noise, x0, T, {1e-3, 17, Scheme::euler_maruyama});
  std::vector<LatticeState> nodes;
  for (std::size_t k = 0; k <= path.steps(); ++k) nodes.push_back(single(c * path.time(k), 0.0, Chart::line));
  const PathGrid ref(0.0, T, nodes);
  // theta = -c/eps is constant, so the exponent depends on W_T only.
  const double wT = path.back().q[0] / eps;
  const double theta = -c / eps;
  const double closed = theta * wT - 0.5 * theta * theta * T;
  CHECK(std::abs(girsanov_log_weight(path, m, noise, ref) - closed) <= 1e-3);
}

TEST_CASE("girsanov weight has unit mean") {
  const auto m = PendulumLattice::chain(2, 0.3);
  const auto noise = NoiseModel::constant(2, 1.0, 1.0, 1.0);
  LatticeState x0 = LatticeState::zeros(2);
  x0.q = {0.2, -0.1};
  x0.canonicalize();
  const PathGrid ref = PathGrid::constant(x0, 0.0, 1.0, 50);
  const std::size_t n = 20000;
  double s = 0.0, s2 = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double w = girsanov_weight(simulate(m, noise, x0, 1.0, {0.02, derive_seed(8, j), Scheme::euler_maruyama}), m, noise, ref);
    s += w;
    s2 += w * w;
  }
  const double mean = s / n;
  const double se = std::sqrt((s2 / n - mean * mean) / n);
  CHECK(std::abs(mean - 1.0) <= 3.0 * se);
}
