#include <doctest.h>

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <random>

#include "omkam/errors.hpp"
#include "omkam/hamiltonian.hpp"
#include "omkam/ldp.hpp"
#include "omkam/om.hpp"
#include "omkam/registry.hpp"

using namespace omkam;

namespace {

PathGrid sample_path(std::size_t K, std::size_t n, Chart chart, double T,
                     const std::function<void(double, std::size_t, double&, double&)>& f) {
  std::vector<LatticeState> nodes;
  for (std::size_t k = 0; k <= K; ++k) {
    const double t = T * static_cast<double>(k) / static_cast<double>(K);
    LatticeState x = LatticeState::zeros(n, chart);
    for (std::size_t i = 0; i < n; ++i) f(t, i, x.q[i], x.p[i]);
    x.canonicalize();
    nodes.push_back(x);
  }
  return PathGrid(0.0, T, nodes);
}

PathGrid random_path(std::size_t K, std::size_t n, Chart chart, std::mt19937_64& gen, double scale) {
  std::normal_distribution<double> nd;
  std::vector<double> a(4 * n);
  for (auto& v : a) v = scale * nd(gen);
  return sample_path(K, n, chart, 1.0, [&](double t, std::size_t i, double& q, double& p) {
    q = a[4 * i] + a[4 * i + 1] * std::sin(3 * t + i) + 0.05 * nd(gen);
    p = a[4 * i + 2] + a[4 * i + 3] * std::cos(2 * t) + 0.05 * nd(gen);
  });
}

// max |analytic - fd| / max(1, max |analytic|) over all node coordinates.
double gradient_fd_error(const PathGrid& path, const HamiltonianModel& m, const NoiseModel& noise,
                         const WeightSequence& w) {
  const PathGradient g = om_gradient(path, m, noise, w);
  const double h = 1e-6;
  double gmax = 1.0, worst = 0.0;
  for (const auto& t : g.nodes)
    for (std::size_t i = 0; i < t.dq.size(); ++i) gmax = std::max({gmax, std::abs(t.dq[i]), std::abs(t.dp[i])});
  for (std::size_t k = 0; k <= path.steps(); ++k) {
    for (std::size_t i = 0; i < path.sites(); ++i) {
      for (int comp = 0; comp < 2; ++comp) {
        auto shifted = [&](double s) {
          std::vector<LatticeState> nodes = path.nodes();
          (comp == 0 ? nodes[k].q[i] : nodes[k].p[i]) += s;
          return om_action(PathGrid(path.t0(), path.t1(), nodes), m, noise, w).total;
        };
        const double fd = (shifted(h) - shifted(-h)) / (2 * h);
        const double an = comp == 0 ? g.nodes[k].dq[i] : g.nodes[k].dp[i];
        worst = std::max(worst, std::abs(an - fd) / gmax);
      }
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("unit drift on the free model costs one") {
  FreeModel m(1, Chart::line);
  const auto noise = NoiseModel::constant(1, 1.0, 1.0, 0.3);
  const auto w = WeightSequence::uniform(1);
  const PathGrid g = sample_path(100, 1, Chart::line, 1.0, [](double t, std::size_t, double& q, double& p) {
    q = t;
    p = 0.0;
  });
  const ActionReport r = om_action(g, m, noise, w);
  CHECK(r.total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.q_term == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.p_term == 0.0);
  FreeModel ma(1);
  const PathGrid ga = sample_path(100, 1, Chart::angle, 1.0, [](double t, std::size_t, double& q, double& p) {
    q = 6.0 * t;  // crosses the seam
    p = 0.0;
  });
  CHECK(om_action(ga, ma, noise, w).total == doctest::Approx(36.0).epsilon(1e-12));
  CHECK(rate_function(g, m, noise, w, g.front()) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("action needs two steps") {
  FreeModel m(1);
  CHECK_THROWS_AS(om_action(PathGrid::constant(LatticeState::zeros(1), 0, 1, 1), m,
                            NoiseModel::constant(1, 1, 1, 0), WeightSequence::uniform(1)),
                  ResolutionError);
}

TEST_CASE("deterministic flow has vanishing action") {
  const auto m = PendulumLattice::chain(3, 0.4);
  const auto noise = NoiseModel::constant(3, 1.0, 0.7, 0.1);
  const auto w = WeightSequence::chain(3);
  LatticeState x0 = LatticeState::zeros(3);
  x0.q = {0.5, 1.0, -0.3};
  x0.p = {0.2, 0.0, -0.4};
  x0.canonicalize();
  auto act = [&](double dt) {
    return om_action(simulate_deterministic(m, x0, 1.0, {dt, 0, Scheme::splitting}), m, noise, w).total;
  };
  const double a1 = act(1e-2), a2 = act(5e-3);
  CHECK(a1 < 1e-6);
  CHECK(a1 / a2 > 3.0);
  const PathGrid det = simulate_deterministic(m, x0, 1.0, {1e-2, 0, Scheme::splitting});
  CHECK(euler_lagrange_residual(det, m, w) <= 1e-2);
}

TEST_CASE("pendulum action matches a fine quadrature oracle") {
  const auto m = PendulumLattice::chain(2, 0.6);
  NoiseModel noise({NoiseProfile{1.0, 0.3, 2.0, 0.1}, NoiseProfile{0.8}},
                   {NoiseProfile{1.2}, NoiseProfile{1.0, -0.2, 1.0, 0.0}}, 0.5);
  const auto w = WeightSequence::from_values({1.0, 0.5});
  auto qf = [](double t, std::size_t i) { return 0.3 + i + 0.8 * std::sin(t + i) + 0.1 * std::sin(9 * t); };
  auto qd = [](double t, std::size_t i) { return 0.8 * std::cos(t + i) + 0.9 * std::cos(9 * t); };
  auto pf = [](double t, std::size_t i) { return 0.5 * std::cos(2 * t) - 0.2 * i + 0.1 * std::cos(7 * t); };
  auto pd = [](double t, std::size_t) { return -std::sin(2 * t) - 0.7 * std::sin(7 * t); };
  const PathGrid g = sample_path(4000, 2, Chart::angle, 1.0, [&](double t, std::size_t i, double& q, double& p) {
    q = qf(t, i);
    p = pf(t, i);
  });
  // Continuous integrand with exact derivatives, 1000 Gauss panels.
  auto integrand = [&](double t) {
    LatticeState x = LatticeState::zeros(2);
    for (std::size_t i = 0; i < 2; ++i) {
      x.q[i] = qf(t, i);
      x.p[i] = pf(t, i);
    }
    const Tangent gr = static_cast<const HamiltonianModel&>(m).gradient(x);
    double s = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
      const double rq = (qd(t, i) - gr.dp[i]) / noise.sigma_q(i, t);
      const double rp = (pd(t, i) + gr.dq[i]) / noise.sigma_p(i, t);
      s += w.rho(i) * w.rho(i) * (rq * rq + rp * rp);
    }
    return s;
  };
  double oracle = 0.0;
  for (int p = 0; p < 1000; ++p)
    oracle += boost::math::quadrature::gauss<double, 10>::integrate(integrand, p / 1000.0, (p + 1) / 1000.0);
  CHECK(std::abs(om_action(g, m, noise, w).total - oracle) <= 1e-4);
}

TEST_CASE("action does not depend on epsilon") {
  const auto m = PendulumLattice::chain(2, 0.5);
  const auto w = WeightSequence::chain(2);
  std::mt19937_64 gen(1);
  const PathGrid g = random_path(40, 2, Chart::angle, gen, 1.0);
  const auto base = NoiseModel::constant(2, 1.0, 2.0, 0.01);
  const ActionReport r = om_action(g, m, base, w);
  for (double eps : {0.1, 1.0}) CHECK(om_action(g, m, base.with_epsilon(eps), w) == r);
}

TEST_CASE("gradient matches finite differences") {
  std::mt19937_64 gen(2);
  std::vector<ModelPtr> models;
  for (const auto& name : builtin_models()) {
    ModelSpec s;
    s.name = name;
    s.sites = 3;
    s.omega = {1.0, 2.0, 0.5};
    s.nls.modes = 3;
    models.push_back(make_model(s));
  }
  for (const auto& m : models) {
    CAPTURE(m->name());
    NoiseModel noise({NoiseProfile{1.0, 0.2, 3.0, 0.0}, NoiseProfile{0.5}, NoiseProfile{2.0}},
                     {NoiseProfile{0.7}, NoiseProfile{1.0, -0.4, 1.0, 1.0}, NoiseProfile{1.5}}, 0.2);
    const auto w = WeightSequence::from_values({1.0, 0.5, 0.25});
    for (int t = 0; t < 3; ++t) CHECK(gradient_fd_error(random_path(12, 3, m->chart(), gen, 0.6), *m, noise, w) <= 1e-5);
  }
}

TEST_CASE("free-model gradient is the discrete Laplacian") {
  FreeModel m(1, Chart::line);
  const auto noise = NoiseModel::constant(1, 1.0, 1.0, 0.0);
  const auto w = WeightSequence::from_values({0.5});
  std::mt19937_64 gen(3);
  const PathGrid g = random_path(10, 1, Chart::line, gen, 1.0);
  const PathGradient gr = om_gradient(g, m, noise, w);
  const double dt = g.dt(), r2 = 0.25;
  const std::size_t K = g.steps();
  for (std::size_t k = 0; k <= K; ++k) {
    auto lap = [&](auto get) {
      double v = 0.0;
      if (k > 0) v += get(k) - get(k - 1);
      if (k < K) v -= get(k + 1) - get(k);
      return 2.0 * r2 / dt * v;
    };
    CHECK(gr.nodes[k].dq[0] == doctest::Approx(lap([&](std::size_t j) { return g.node(j).q[0]; })));
    CHECK(gr.nodes[k].dp[0] == doctest::Approx(lap([&](std::size_t j) { return g.node(j).p[0]; })));
  }
}

TEST_CASE("EL residual against an independent re-summation") {
  const auto m = PendulumLattice::chain(2, 0.3);
  const auto w = WeightSequence::from_values({1.0, 0.5});
  std::mt19937_64 gen(4);
  for (int t = 0; t < 5; ++t) {
    const PathGrid g = random_path(30, 2, Chart::angle, gen, 1.0);
    double s = 0.0;
    const double dt = g.dt();
    for (std::size_t k = 0; k < g.steps(); ++k) {
      LatticeState mid = LatticeState::zeros(2);
      double rq[2], rp[2];
      for (std::size_t i = 0; i < 2; ++i) {
        const double dq = angle_increment(g.node(k).q[i], g.node(k + 1).q[i]);
        const double dp = g.node(k + 1).p[i] - g.node(k).p[i];
        mid.q[i] = g.node(k).q[i] + dq / 2;
        mid.p[i] = g.node(k).p[i] + dp / 2;
        rq[i] = dq / dt;
        rp[i] = dp / dt;
      }
      const Tangent gr = static_cast<const HamiltonianModel&>(m).gradient(mid);
      double nq = 0.0, np = 0.0;
      for (std::size_t i = 0; i < 2; ++i) {
        nq += w.rho(i) * w.rho(i) * std::pow(rq[i] - gr.dp[i], 2);
        np += w.rho(i) * w.rho(i) * std::pow(rp[i] + gr.dq[i], 2);
      }
      s += dt * (std::sqrt(nq) + std::sqrt(np));
    }
    CHECK(std::abs(euler_lagrange_residual(g, m, w) - s) <= 1e-6);
  }
  LatticeState x = LatticeState::zeros(2);
  x.q = {1.0, 0.5};
  CHECK(euler_lagrange_residual(PathGrid::constant(x, 0, 1, 10), m, w) > 0.0);
}

TEST_CASE("free model minimizer with a pinned start is constant") {
  FreeModel m(2);
  const auto noise = NoiseModel::constant(2, 1.0, 1.0, 0.0);
  const auto w = WeightSequence::chain(2);
  LatticeState a = LatticeState::zeros(2), b = LatticeState::zeros(2);
  a.q = {0.3, 6.0};
  b.q = {1.0, 0.5};
  b.p = {0.4, -1.0};
  const PathGrid init = PathGrid::linear(a, b, 0.0, 1.0, 32);
  const MinimizeResult r = minimize_action(init, m, noise, w, {});
  CHECK(r.converged);
  CHECK(r.report.total <= 1e-12);
  CHECK(path_distance(r.path, PathGrid::constant(a, 0, 1, 32), w) <= 1e-6);
}

TEST_CASE("pinned-start minimizer reproduces the deterministic flow for every model") {
  std::mt19937_64 gen(5);
  for (const auto& name : builtin_models()) {
    ModelSpec s;
    s.name = name;
    s.sites = 3;
    s.omega = {1.0, 2.0, 0.5};
    s.nls.modes = 3;
    const ModelPtr m = make_model(s);
    CAPTURE(name);
    const auto noise = NoiseModel::constant(3, 1.0, 1.0, 0.0);
    const auto w = WeightSequence::chain(3);
    const PathGrid init = random_path(40, 3, m->chart(), gen, 0.4);
    MinimizeConfig cfg;
    cfg.grad_tol = 1e-8;
    const MinimizeResult r = minimize_action(init, *m, noise, w, cfg);
    CHECK(r.converged);
    CHECK(r.report.total <= om_action(init, *m, noise, w).total);
    CHECK(euler_lagrange_residual(r.path, *m, w) <= 10.0 * cfg.grad_tol);
  }
}

TEST_CASE("two-point harmonic minimizer approaches the true orbit") {
  HarmonicLattice m({1.0});
  const auto noise = NoiseModel::constant(1, 1.0, 1.0, 0.0);
  const auto w = WeightSequence::uniform(1);
  auto orbit = [](double t) {
    LatticeState x = LatticeState::zeros(1);
    x.q[0] = 0.4 * std::cos(t);
    x.p[0] = -0.4 * std::sin(t);
    x.canonicalize();
    return x;
  };
  auto run = [&](std::size_t K) {
    MinimizeConfig cfg;
    cfg.constraint = Constraint::fixed_both_endpoints;
    cfg.grad_tol = 1e-10;
    const PathGrid init = PathGrid::linear(orbit(0.0), orbit(2.0), 0.0, 2.0, K);
    const MinimizeResult r = minimize_action(init, m, noise, w, cfg);
    CHECK(r.converged);
    const PathGrid truth = sample_path(K, 1, Chart::angle, 2.0, [&](double t, std::size_t, double& q, double& p) {
      q = orbit(t).q[0];
      p = orbit(t).p[0];
    });
    return std::make_pair(r.report.total, path_distance(r.path, truth, w));
  };
  const auto [a1, d1] = run(32);
  const auto [a2, d2] = run(64);
  CHECK(a1 < 1e-5);
  CHECK(d2 < d1);
  // Both endpoints pinned on the continuous orbit: the residual action is the
  // O(dt^2) mismatch between the discrete and continuous flows, squared.
  CHECK(a1 / a2 > 8.0);
}

TEST_CASE("two-point pendulum lattice minimizer matches the integrator") {
  const auto m = PendulumLattice::chain(4, 0.5);
  const auto noise = NoiseModel::constant(4, 1.0, 1.0, 0.0);
  const auto w = WeightSequence::chain(4);
  LatticeState x0 = LatticeState::zeros(4);
  x0.q = {0.5, -0.3, 1.0, 0.2};
  x0.p = {0.3, 0.1, -0.2, 0.5};
  x0.canonicalize();
  const PathGrid truth = simulate_deterministic(m, x0, 1.0, {1.0 / 64, 0, Scheme::splitting});
  MinimizeConfig cfg;
  cfg.constraint = Constraint::fixed_both_endpoints;
  cfg.grad_tol = 1e-9;
  const MinimizeResult r = minimize_action(PathGrid::linear(x0, truth.back(), 0, 1, 64), m, noise, w, cfg);
  CHECK(r.converged);
  CHECK(path_distance(r.path, truth, w) <= 1e-3);
}
