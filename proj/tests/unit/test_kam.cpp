#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>

#include "omkam/errors.hpp"
#include "omkam/kam.hpp"
#include "omkam/nls.hpp"

using namespace omkam;

namespace {
constexpr double pi = std::numbers::pi;

ResonanceScan toy_scan(int k_cutoff, std::size_t samples) {
  ResonanceScan s;
  s.box = {{1.0, 2.0}, {1.0, 2.0}};
  s.k_cutoff = k_cutoff;
  s.normal_modes = {3, 4, 5};
  s.alphas = {0.2, 0.1, 0.05, 0.025};
  s.samples = samples;
  s.tau = 3.0;
  s.seed = 7;
  return s;
}

NormalForm nls_nf() {
  NlsModel n;
  n.modes = 12;
  return normal_form(n, {1, 2}, 12);
}
}  // namespace

TEST_CASE("divisor margin arithmetic") {
  const NormalSpectrum Om{{2}, {5.0}};
  DivisorQuery q;
  q.k = {0, 0};
  q.l = {{2, 1}};
  q.tau = 3.0;
  const DivisorMargin m = small_divisor_margin(q, {2.0, 5.0}, Om);
  CHECK(m.lhs == 5.0);
  CHECK(m.threshold == 2.0);
  CHECK(m.pass);
  q.tau = 0.0;
  q.k = {1, 0};
  CHECK(small_divisor_margin(q, {2.0, 5.0}, Om).threshold == doctest::Approx(0.5 * 4.0 / 2.0));
  q.k = {0, 0};
  q.l = {};
  CHECK_THROWS_AS(small_divisor_margin(q, {2.0, 5.0}, Om), OutOfClassError);
  q.l = {{2, 3}};
  CHECK_THROWS_AS(small_divisor_margin(q, {2.0, 5.0}, Om), OutOfClassError);
}

TEST_CASE("divisor margin against naive re-summation and scaling") {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> kd(-4, 4), md(3, 6), sd(0, 1);
  std::uniform_real_distribution<double> u(0.5, 3.0);
  const NormalSpectrum Om{{3, 4, 5, 6}, {9.3, 16.1, 24.7, 36.2}};
  for (int t = 0; t < 200; ++t) {
    DivisorQuery q;
    q.k = {kd(gen), kd(gen), kd(gen)};
    const int a = md(gen), b = md(gen);
    const int ca = sd(gen) ? 1 : -1, cb = sd(gen) ? 1 : -1;
    q.l = a == b ? SparseL{{a, 2 * ca}} : SparseL{{a, ca}, {b, cb}};
    q.alpha = 0.3;
    q.tau = 3.0;
    const std::vector<double> w{u(gen), u(gen), u(gen)};
    double lhs = 0.0, ksum = 0.0, lsum = 0.0;
    for (int i = 0; i < 3; ++i) {
      lhs += q.k[i] * w[i];
      ksum += std::abs(q.k[i]);
    }
    for (auto [j, c] : q.l) {
      lhs += c * Om.at(j);
      lsum += c * double(j) * j;
    }
    const double thr = 0.3 * std::max(1.0, std::abs(lsum)) / (1.0 + std::pow(ksum, 3.0));
    const DivisorMargin m = small_divisor_margin(q, w, Om);
    CHECK(std::abs(m.lhs - std::abs(lhs)) <= 1e-12);
    CHECK(std::abs(m.threshold - thr) <= 1e-12);
    // Scaling every frequency by c scales lhs only.
    std::vector<double> w2 = w;
    NormalSpectrum Om2 = Om;
    for (auto& v : w2) v *= 2.5;
    for (auto& v : Om2.freq) v *= 2.5;
    const DivisorMargin m2 = small_divisor_margin(q, w2, Om2);
    CHECK(m2.lhs == doctest::Approx(2.5 * m.lhs));
    CHECK(m2.threshold == m.threshold);
  }
}

TEST_CASE("divisor enumeration matches the closed-form count") {
  for (std::size_t n : {1u, 2u, 3u})
    for (int K : {0, 1, 4, 6})
      for (std::size_t L : {0u, 1u, 3u}) {
        std::vector<int> modes;
        for (std::size_t j = 0; j < L; ++j) modes.push_back(static_cast<int>(j) + 10);
        const DivisorSet s = enumerate_divisors(n, K, modes);
        // Brute force over the cube [-K, K]^n.
        std::size_t nk = 0;
        const int side = 2 * K + 1;
        int total = 1;
        for (std::size_t i = 0; i < n; ++i) total *= side;
        for (int c = 0; c < total; ++c) {
          int rem = c, norm = 0;
          for (std::size_t i = 0; i < n; ++i) {
            norm += std::abs(rem % side - K);
            rem /= side;
          }
          if (norm <= K) ++nk;
        }
        const std::size_t nl = 1 + 2 * L + 2 * L * L;
        CHECK(s.ks.size() == nk);
        CHECK(s.ls.size() == nl);
        CHECK(s.size() == nk * nl - 1);
        CHECK(divisor_count(n, K, L) == nk * nl - 1);
      }
}

TEST_CASE("toy resonant measure") {
  ResonanceScan s = toy_scan(6, 100000);
  s.alphas.insert(s.alphas.begin(), 0.0);
  const ResonanceFractions r = resonant_measure_mc(s, toy_frequency_map(s.normal_modes));
  CHECK(r.fractions[0] == 0.0);
  for (std::size_t i = 2; i < r.fractions.size(); ++i) CHECK(r.fractions[i] < r.fractions[i - 1]);
  CHECK(r.mu_hat >= 0.8);
  CHECK_THROWS_AS(resonant_measure_mc(toy_scan(-1, 10), toy_frequency_map({3})), ConfigError);
  ResonanceScan empty = toy_scan(6, 10);
  empty.box.clear();
  CHECK_THROWS_AS(resonant_measure_mc(empty, toy_frequency_map({3})), ConfigError);
}

TEST_CASE("larger k cutoffs only add resonances") {
  // Same samples, nested divisor sets: fractions are nondecreasing in the cutoff.
  const ResonanceFractions a = resonant_measure_mc(toy_scan(6, 20000), toy_frequency_map({3, 4, 5}));
  const ResonanceFractions b = resonant_measure_mc(toy_scan(12, 20000), toy_frequency_map({3, 4, 5}));
  for (std::size_t i = 0; i < a.fractions.size(); ++i) CHECK(b.fractions[i] >= a.fractions[i]);
  CHECK(b.mu_hat >= 0.8);
}

TEST_CASE("toy map is bi-Lipschitz with unit quotients") {
  const LipschitzQuotients q = lipschitz_quotients(toy_frequency_map({3}), {{1, 2}, {1, 2}}, 500, 3);
  CHECK(q.min_ratio == doctest::Approx(1.0));
  CHECK(q.max_ratio == doctest::Approx(1.0));
}

TEST_CASE("NLS Diophantine scan") {
  const NormalForm nf = nls_nf();
  const ActionGrid grid{{0.0, 0.0}, {12.0, 12.0}, {41, 41}};
  const DiophantineScanResult r05 = diophantine_scan(nf, grid, 0.05, 3.0, 6, 12);
  CHECK(r05.fraction > 0.0);
  CHECK(r05.fraction < 1.0);
  double prev = 0.0;
  std::vector<DiophantineScanResult> runs;
  for (double a : {0.2, 0.1, 0.05, 0.025}) {
    runs.push_back(diophantine_scan(nf, grid, a, 3.0, 6, 12));
    CHECK(runs.back().fraction >= prev);
    prev = runs.back().fraction;
  }
  CHECK(runs.front().fraction < runs.back().fraction);
  // Nested admissible sets on the shared grid.
  for (std::size_t r = 1; r < runs.size(); ++r)
    for (std::size_t i = 0; i < runs[r].admissible.size(); ++i)
      if (runs[r - 1].admissible[i]) CHECK(runs[r].admissible[i]);
  const DiophantineScanResult tiny = diophantine_scan(nf, ActionGrid{{0.13, 0.07}, {2.9, 3.3}, {9, 9}}, 1e-9, 3.0, 6, 12);
  CHECK(tiny.fraction == 1.0);
}

TEST_CASE("a point next to the (1,-1) resonance line is excluded") {
  const NormalForm nf = nls_nf();
  // omega_1 - omega_2 = -3 + (I_2 - I_1) / pi vanishes on I_2 - I_1 = 3 pi.
  const double I1 = 0.5, I2 = I1 + 3 * pi + 0.01 * pi;
  Eigen::VectorXd I(2);
  I << I1, I2;
  const Eigen::VectorXd w = nf.omega(I);
  CHECK(std::abs(w(0) - w(1)) == doctest::Approx(0.01));
  const ActionGrid pt{{I1, I2}, {I1, I2}, {1, 1}};
  const DiophantineScanResult r = diophantine_scan(nf, pt, 0.1, 3.0, 6, 12);
  // Margin of k = (1,-1), l = 0 alone: 0.01 * (1 + 2^3) = 0.09.
  CHECK(r.critical[0] <= 0.09 + 1e-12);
  CHECK_FALSE(r.admissible[0]);
  CHECK_THROWS_AS(diophantine_scan(nf, ActionGrid{{0.0}, {1.0}, {3}}, 0.1, 3.0, 6, 12), DimensionError);
}
