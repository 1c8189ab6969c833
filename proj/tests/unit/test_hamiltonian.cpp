#include <doctest.h>

#include <cmath>
#include <random>

#include "omkam/errors.hpp"
#include "omkam/hamiltonian.hpp"
#include "omkam/nls.hpp"
#include "omkam/registry.hpp"

using namespace omkam;

namespace {

LatticeState random_state(std::size_t n, Chart chart, std::mt19937_64& gen, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  LatticeState x = LatticeState::zeros(n, chart);
  for (std::size_t i = 0; i < n; ++i) {
    x.q[i] = u(gen);
    x.p[i] = u(gen);
  }
  x.canonicalize();
  return x;
}

std::vector<ModelPtr> all_models() {
  std::vector<ModelPtr> out;
  for (const auto& name : builtin_models()) {
    ModelSpec s;
    s.name = name;
    s.sites = 5;
    s.omega = {1.0, 1.5, 2.0, 0.5, 3.0};
    s.nls.modes = 6;
    out.push_back(make_model(s));
  }
  ModelSpec nf;
  nf.name = "nls_modes";
  nf.nls.modes = 6;
  nf.truncation = NlsTruncation::normal_form;
  out.push_back(make_model(nf));
  return out;
}

}  // namespace

TEST_CASE("free model gradient check is exact") {
  FreeModel m(3);
  std::mt19937_64 gen(1);
  CHECK(grad_check(m, random_state(3, Chart::angle, gen), 1e-5).max_rel_err == 0.0);
}

TEST_CASE("harmonic gradient check") {
  HarmonicLattice m({1.0, 2.0, 0.3});
  std::mt19937_64 gen(2);
  for (int t = 0; t < 20; ++t) CHECK(grad_check(m, random_state(3, Chart::angle, gen), 1e-5).max_rel_err <= 1e-6);
}

TEST_CASE("pendulum gradient check") {
  const auto m = PendulumLattice::chain(4, 0.7);
  std::mt19937_64 gen(3);
  for (int t = 0; t < 20; ++t) CHECK(grad_check(m, random_state(4, Chart::angle, gen, 3.0), 1e-5).max_rel_err <= 1e-5);
}

TEST_CASE("every registered model passes grad_check on a unit ball") {
  std::mt19937_64 gen(4);
  for (const auto& m : all_models()) {
    CAPTURE(m->name());
    for (int t = 0; t < 100; ++t) {
      const auto x = random_state(m->sites(), m->chart(), gen, 0.57);
      CHECK(grad_check(*m, x, 1e-5).max_rel_err <= 1e-5);
    }
  }
}

TEST_CASE("symplectic trace defect vanishes") {
  std::mt19937_64 gen(5);
  for (const auto& m : all_models()) {
    CAPTURE(m->name());
    const auto w = WeightSequence::chain(m->sites());
    for (int t = 0; t < 100; ++t) {
      const auto x = random_state(m->sites(), m->chart(), gen, 0.57);
      CHECK(std::abs(symplectic_trace_defect(*m, x, w)) <= 1e-6 * (1.0 + weighted_norm(x, w)));
    }
  }
  FreeModel f(2);
  CHECK(symplectic_trace_defect(f, LatticeState::zeros(2), WeightSequence::uniform(2)) == 0.0);
  const auto p = PendulumLattice::chain(3, 1.0);
  CHECK(std::abs(symplectic_trace_defect(p, random_state(3, Chart::angle, gen, 3.0), WeightSequence::uniform(3))) <= 1e-8);
}

TEST_CASE("analytic Hessian products match differenced gradients") {
  std::mt19937_64 gen(6);
  std::normal_distribution<double> n;
  for (const auto& m : all_models()) {
    CAPTURE(m->name());
    const auto x = random_state(m->sites(), m->chart(), gen, 0.8);
    Tangent v{std::vector<double>(m->sites()), std::vector<double>(m->sites())};
    for (std::size_t i = 0; i < m->sites(); ++i) {
      v.dq[i] = n(gen);
      v.dp[i] = n(gen);
    }
    Tangent hv;
    m->hessian_apply(x, v, hv);
    const double h = 1e-5;
    LatticeState a = x, b = x;
    for (std::size_t i = 0; i < m->sites(); ++i) {
      a.q[i] += h * v.dq[i];
      a.p[i] += h * v.dp[i];
      b.q[i] -= h * v.dq[i];
      b.p[i] -= h * v.dp[i];
    }
    const Tangent ga = m->gradient(a), gb = m->gradient(b);
    for (std::size_t i = 0; i < m->sites(); ++i) {
      CHECK(hv.dq[i] == doctest::Approx((ga.dq[i] - gb.dq[i]) / (2 * h)).epsilon(1e-6).scale(1.0));
      CHECK(hv.dp[i] == doctest::Approx((ga.dp[i] - gb.dp[i]) / (2 * h)).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("non-finite energy is a model error") {
  HarmonicLattice m({1.0});
  LatticeState x = LatticeState::zeros(1);
  x.p[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(grad_check(m, x, 1e-5), ModelError);
  CHECK_THROWS_AS(grad_check(m, LatticeState::zeros(1), 0.0), ModelError);
}

TEST_CASE("unknown model name") {
  ModelSpec s;
  s.name = "nope";
  CHECK_THROWS_AS(make_model(s), ModelError);
}
