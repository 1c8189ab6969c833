#include "omkam/kam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "omkam/errors.hpp"
#include "omkam/ldp.hpp"
#include "omkam/parallel.hpp"
#include "omkam/random.hpp"

namespace omkam {

namespace {

void enumerate_k(std::size_t n, int budget, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (cur.size() == n) {
    out.push_back(cur);
    return;
  }
  for (int v = -budget; v <= budget; ++v) {
    cur.push_back(v);
    enumerate_k(n, budget - std::abs(v), cur, out);
    cur.pop_back();
  }
}

double binom(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

std::size_t l_abs(const SparseL& l) {
  std::size_t s = 0;
  for (auto [j, c] : l) s += static_cast<std::size_t>(std::abs(c));
  return s;
}

}  // namespace

double NormalSpectrum::at(int j) const {
  for (std::size_t i = 0; i < modes.size(); ++i)
    if (modes[i] == j) return freq[i];
  throw DimensionError("normal spectrum has no mode " + std::to_string(j));
}

double l_bracket(const SparseL& l, double d) {
  double s = 0.0;
  for (auto [j, c] : l) s += std::pow(static_cast<double>(j), d) * c;
  return std::max(1.0, std::abs(s));
}

double a_k(const std::vector<int>& k, double tau) {
  double s = 0.0;
  for (int v : k) s += std::abs(v);
  return 1.0 + std::pow(s, tau);
}

double resolve_tau(double tau, std::size_t n) { return tau > 0.0 ? tau : static_cast<double>(n) + 2.0; }

DivisorMargin small_divisor_margin(const DivisorQuery& q, const std::vector<double>& omega,
                                   const NormalSpectrum& Omega) {
  if (l_abs(q.l) > 2) throw OutOfClassError("|l| exceeds 2");
  const bool k_zero = std::all_of(q.k.begin(), q.k.end(), [](int v) { return v == 0; });
  const bool l_zero = std::all_of(q.l.begin(), q.l.end(), [](auto e) { return e.second == 0; });
  if (k_zero && l_zero) throw OutOfClassError("(k, l) = (0, 0) is excluded");
  if (q.k.size() != omega.size()) throw DimensionError("k and omega differ in length");
  double lhs = 0.0;
  for (std::size_t i = 0; i < q.k.size(); ++i) lhs += q.k[i] * omega[i];
  for (auto [j, c] : q.l) lhs += c * Omega.at(j);
  DivisorMargin m;
  m.lhs = std::abs(lhs);
  m.threshold = q.alpha * l_bracket(q.l, q.d) / a_k(q.k, resolve_tau(q.tau, q.k.size()));
  m.pass = m.lhs >= m.threshold;
  return m;
}

DivisorSet enumerate_divisors(std::size_t n, int k_cutoff, const std::vector<int>& normal_modes) {
  if (k_cutoff < 0) throw ConfigError("k cutoff must be nonnegative");
  DivisorSet s;
  s.n = n;
  std::vector<int> cur;
  enumerate_k(n, k_cutoff, cur, s.ks);
  s.ls.push_back({});
  for (int a : normal_modes)
    for (int c : {-1, 1}) s.ls.push_back({{a, c}});
  for (std::size_t a = 0; a < normal_modes.size(); ++a) {
    for (int c : {-2, 2}) s.ls.push_back({{normal_modes[a], c}});
    for (std::size_t b = a + 1; b < normal_modes.size(); ++b)
      for (int c : {-1, 1})
        for (int e : {-1, 1}) s.ls.push_back({{normal_modes[a], c}, {normal_modes[b], e}});
  }
  return s;
}

std::size_t divisor_count(std::size_t n, int k_cutoff, std::size_t normal_modes) {
  double nk = 0.0;
  const auto K = static_cast<std::size_t>(k_cutoff);
  for (std::size_t i = 0; i <= std::min(n, K); ++i) nk += std::ldexp(binom(n, i) * binom(K, i), static_cast<int>(i));
  const double L = static_cast<double>(normal_modes);
  const double nl = 1.0 + 2.0 * L + 2.0 * L * L;
  return static_cast<std::size_t>(std::llround(nk * nl)) - 1;
}

double critical_alpha(const DivisorSet& set, const std::vector<int>& normal_modes,
                      const std::vector<double>& omega, const std::vector<double>& Omega,
                      double tau, double d) {
  if (omega.size() != set.n) throw DimensionError("omega length differs from the divisor set");
  if (Omega.size() != normal_modes.size()) throw DimensionError("Omega length differs from the normal modes");
  if (set.size() == 0) throw ConfigError("empty divisor enumeration");
  // Per-l data: <l, Omega> and <l>_d.
  std::vector<double> lw(set.ls.size()), lb(set.ls.size());
  for (std::size_t s = 0; s < set.ls.size(); ++s) {
    double v = 0.0;
    for (auto [j, c] : set.ls[s]) {
      const auto it = std::find(normal_modes.begin(), normal_modes.end(), j);
      v += c * Omega[static_cast<std::size_t>(it - normal_modes.begin())];
    }
    lw[s] = v;
    lb[s] = l_bracket(set.ls[s], d);
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& k : set.ks) {
    double kw = 0.0;
    bool zero = true;
    for (std::size_t i = 0; i < k.size(); ++i) {
      kw += k[i] * omega[i];
      if (k[i] != 0) zero = false;
    }
    const double A = a_k(k, tau);
    for (std::size_t s = zero ? 1 : 0; s < lw.size(); ++s) best = std::min(best, std::abs(kw + lw[s]) * A / lb[s]);
  }
  return best;
}

ResonanceFractions resonant_measure_mc(const ResonanceScan& scan, const FrequencyMap& freq_map) {
  if (scan.box.empty()) throw ConfigError("resonance scan box is empty");
  for (auto [lo, hi] : scan.box)
    if (!(hi > lo)) throw ConfigError("resonance scan box has an empty side");
  if (scan.samples == 0) throw ConfigError("resonance scan needs samples");
  const DivisorSet set = enumerate_divisors(scan.box.size(), scan.k_cutoff, scan.normal_modes);
  if (set.size() == 0) throw ConfigError("empty divisor enumeration");

  std::vector<double> crit(scan.samples);
  const unsigned workers = scan.workers == 0 ? default_workers() : scan.workers;
  const CounterNormal rng(scan.seed);
  parallel_blocks(scan.samples, workers, [&](std::size_t b, std::size_t e) {
    std::vector<double> xi(scan.box.size());
    for (std::size_t s = b; s < e; ++s) {
      for (std::size_t i = 0; i < xi.size(); ++i)
        xi[i] = scan.box[i].first + (scan.box[i].second - scan.box[i].first) * rng.uniform(s, i);
      const auto [om, Om] = freq_map(xi);
      crit[s] = critical_alpha(set, scan.normal_modes, om, Om, resolve_tau(scan.tau, scan.box.size()), scan.d);
    }
  });

  ResonanceFractions out;
  std::vector<double> lx, ly;
  for (double a : scan.alphas) {
    std::size_t hits = 0;
    for (double c : crit)
      if (c < a) ++hits;
    const TubeEstimate e = wilson_estimate(hits, scan.samples);
    out.alphas.push_back(a);
    out.fractions.push_back(e.p_hat);
    out.ci_low.push_back(e.ci_low);
    out.ci_high.push_back(e.ci_high);
    if (a > 0.0 && e.p_hat > 0.0) {
      lx.push_back(std::log(a));
      ly.push_back(std::log(e.p_hat));
    }
  }
  if (lx.size() >= 2) {
    const AffineFit f = fit_affine(lx, ly);
    out.mu_hat = f.slope;
    out.fit_residuals = f.residuals;
  } else {
    out.mu_hat = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

FrequencyMap toy_frequency_map(const std::vector<int>& normal_modes) {
  return [normal_modes](const std::vector<double>& xi) {
    std::vector<double> Om;
    for (int j : normal_modes) Om.push_back(static_cast<double>(j) * j);
    return std::make_pair(xi, Om);
  };
}

DiophantineScanResult diophantine_scan(const NormalForm& nf, const ActionGrid& grid, double alpha,
                                       double tau, int k_cutoff, int l_mode_cutoff, double d) {
  const std::size_t n = nf.tangential.size();
  if (grid.lo.size() != n || grid.hi.size() != n || grid.points.size() != n)
    throw DimensionError("action grid dimension differs from the tangential set");
  std::vector<int> modes;
  std::vector<Eigen::Index> rows;
  for (std::size_t r = 0; r < nf.normal.size(); ++r)
    if (nf.normal[r] <= l_mode_cutoff) {
      modes.push_back(nf.normal[r]);
      rows.push_back(static_cast<Eigen::Index>(r));
    }
  const DivisorSet set = enumerate_divisors(n, k_cutoff, modes);
  std::size_t total = 1;
  for (auto p : grid.points) {
    if (p == 0) throw ConfigError("action grid needs at least one point per dimension");
    total *= p;
  }
  DiophantineScanResult out;
  std::size_t pass = 0;
  Eigen::VectorXd I(static_cast<Eigen::Index>(n));
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    std::vector<double> act(n);
    for (std::size_t a = 0; a < n; ++a) {
      const std::size_t c = rem % grid.points[a];
      rem /= grid.points[a];
      act[a] = grid.points[a] == 1 ? grid.lo[a]
                                   : grid.lo[a] + (grid.hi[a] - grid.lo[a]) * static_cast<double>(c) /
                                                      static_cast<double>(grid.points[a] - 1);
      I(static_cast<Eigen::Index>(a)) = act[a];
    }
    const Eigen::VectorXd w = nf.omega(I);
    const Eigen::VectorXd W = nf.Omega(I);
    std::vector<double> om(w.data(), w.data() + w.size());
    std::vector<double> Om;
    for (auto r : rows) Om.push_back(W(r));
    const double c = critical_alpha(set, modes, om, Om, resolve_tau(tau, n), d);
    const bool ok = c >= alpha;
    if (ok) ++pass;
    out.actions.push_back(std::move(act));
    out.critical.push_back(c);
    out.admissible.push_back(ok);
  }
  out.fraction = static_cast<double>(pass) / static_cast<double>(total);
  return out;
}

LipschitzQuotients lipschitz_quotients(const FrequencyMap& freq_map,
                                       const std::vector<std::pair<double, double>>& box,
                                       std::size_t pairs, std::uint64_t seed) {
  if (box.empty() || pairs == 0) throw ConfigError("lipschitz probe needs a box and samples");
  const CounterNormal rng(seed);
  LipschitzQuotients q{std::numeric_limits<double>::infinity(), 0.0};
  std::vector<double> a(box.size()), b(box.size());
  for (std::size_t s = 0; s < pairs; ++s) {
    double den = 0.0;
    for (std::size_t i = 0; i < box.size(); ++i) {
      a[i] = box[i].first + (box[i].second - box[i].first) * rng.uniform(2 * s, i);
      b[i] = box[i].first + (box[i].second - box[i].first) * rng.uniform(2 * s + 1, i);
      den += (a[i] - b[i]) * (a[i] - b[i]);
    }
    if (den == 0.0) continue;
    const auto fa = freq_map(a).first;
    const auto fb = freq_map(b).first;
    double num = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) num += (fa[i] - fb[i]) * (fa[i] - fb[i]);
    const double r = std::sqrt(num / den);
    q.min_ratio = std::min(q.min_ratio, r);
    q.max_ratio = std::max(q.max_ratio, r);
  }
  return q;
}

}  // namespace omkam
