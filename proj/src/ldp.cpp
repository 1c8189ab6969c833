#include "omkam/ldp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "omkam/errors.hpp"
#include "omkam/gauss.hpp"
#include "omkam/om.hpp"
#include "omkam/parallel.hpp"
#include "omkam/random.hpp"

namespace omkam {

namespace {

constexpr double kZ95 = 1.959963984540054;

bool starts_at(const PathGrid& psi, const LatticeState& x0) {
  if (psi.sites() != x0.size()) return false;
  const LatticeState& s = psi.front();
  for (std::size_t i = 0; i < x0.size(); ++i) {
    const double dq = s.chart == Chart::angle ? torus_distance(s.q[i], x0.q[i]) : std::abs(s.q[i] - x0.q[i]);
    if (dq > 1e-12 || std::abs(s.p[i] - x0.p[i]) > 1e-12) return false;
  }
  return true;
}

std::vector<double> trapezoid_node_weights(std::size_t nodes, double dt) {
  std::vector<double> tw(nodes, dt);
  tw.front() *= 0.5;
  tw.back() *= 0.5;
  return tw;
}

// The squared tube distance of the free model written as
// offset + sum_j weight_j (Z_j + shift_j)^2 with Z_j iid standard normal.
struct ChiSquareForm {
  std::vector<double> weight;
  std::vector<double> shift;
  double offset = 0.0;
};

ChiSquareForm free_tube_form(const HamiltonianModel& model, const NoiseModel& noise,
                             const TubeSpec& tube, double eps, const WeightSequence& w,
                             const LatticeState& x0) {
  if (model.name() != "free") throw UnsupportedModelError("gaussian oracle needs the free model, got " + model.name());
  if (!(eps > 0.0)) throw DegenerateMeasureError("gaussian oracle needs eps > 0");
  tube.validate();
  const PathGrid& c = tube.center;
  require_same_sites(c.sites(), noise.sites(), "oracle noise");
  require_same_sites(c.sites(), w.size(), "oracle weights");
  require_same_sites(c.sites(), x0.size(), "oracle start");
  const std::size_t nodes = c.steps() + 1;
  const double dt = c.dt();
  const auto tw = trapezoid_node_weights(nodes, dt);
  std::vector<double> grid(nodes);
  for (std::size_t k = 0; k < nodes; ++k) grid[k] = c.time(k);

  // Eigenpairs depend only on the sigma profile; share them between sites.
  std::map<std::vector<double>, KLBasis> cache;
  ChiSquareForm form;
  for (std::size_t i = 0; i < c.sites(); ++i) {
    for (int comp = 0; comp < 2; ++comp) {
      std::vector<double> cum(nodes, 0.0);
      for (std::size_t k = 1; k < nodes; ++k) {
        const double s = comp == 0 ? noise.sigma_q(i, c.time(k - 1)) : noise.sigma_p(i, c.time(k - 1));
        cum[k] = cum[k - 1] + s * s * dt;
      }
      auto it = cache.find(cum);
      if (it == cache.end()) it = cache.emplace(cum, kl_from_cumulative(grid, cum, 0)).first;
      const KLBasis& kl = it->second;
      const double lmax = kl.eigenvalues.front();
      const double r2 = w.rho(i) * w.rho(i);
      for (std::size_t j = 0; j < kl.eigenvalues.size(); ++j) {
        double beta = 0.0;
        for (std::size_t k = 0; k < nodes; ++k) {
          const LatticeState& ck = c.node(k);
          const double d = comp == 0
                               ? (ck.chart == Chart::angle ? angle_increment(x0.q[i], ck.q[i]) : ck.q[i] - x0.q[i])
                               : ck.p[i] - x0.p[i];
          beta += kl.eigenfunctions[j][k] * tw[k] * d;
        }
        const double lam = kl.eigenvalues[j];
        if (lam <= 1e-14 * lmax) {
          form.offset += r2 * beta * beta;
        } else {
          form.weight.push_back(r2 * eps * eps * lam);
          form.shift.push_back(beta / (eps * std::sqrt(lam)));
        }
      }
    }
  }
  return form;
}

}  // namespace

double rate_function(const PathGrid& psi, const HamiltonianModel& model, const NoiseModel& noise,
                     const WeightSequence& w, const LatticeState& x0) {
  if (!starts_at(psi, x0)) return std::numeric_limits<double>::infinity();
  return 0.5 * om_action(psi, model, noise, w).total;
}

void TubeSpec::validate() const {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw ModelError("tube radius must be positive");
}

TubeEstimate wilson_estimate(std::size_t hits, std::size_t samples) {
  if (samples == 0) throw InsufficientDataError("no samples");
  if (hits > samples) throw ModelError("hits exceed samples");
  TubeEstimate e;
  e.hits = hits;
  e.samples = samples;
  const double n = static_cast<double>(samples);
  const double p = static_cast<double>(hits) / n;
  const double z2 = kZ95 * kZ95;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = kZ95 * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  e.p_hat = p;
  e.ci_low = std::max(0.0, centre - half);
  e.ci_high = std::min(1.0, centre + half);
  if (hits == 0) {
    e.ci_low = 0.0;
    e.low_confidence = true;
  }
  return e;
}

TubeEstimate tube_probability_mc(const HamiltonianModel& model, const NoiseModel& noise,
                                 const TubeSpec& tube, double eps, const WeightSequence& w,
                                 const LatticeState& x0, const McConfig& cfg) {
  if (!(eps > 0.0)) throw DegenerateMeasureError("tube_probability_mc needs eps > 0");
  if (cfg.samples < 1) throw InsufficientDataError("tube_probability_mc needs at least one sample");
  tube.validate();
  const PathGrid& c = tube.center;
  require_same_sites(c.sites(), w.size(), "tube weights");
  const NoiseModel scaled = noise.with_epsilon(eps);
  const double T = c.t1() - c.t0();
  const std::size_t K = c.steps();
  const double r2 = tube.radius * tube.radius;
  const auto tw = trapezoid_node_weights(K + 1, c.dt());

  const unsigned workers = cfg.workers == 0 ? default_workers() : cfg.workers;
  const std::size_t blocks = std::min<std::size_t>(workers, cfg.samples);
  std::vector<std::size_t> hits(blocks, 0);
  parallel_blocks(blocks, workers, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) {
      const std::size_t begin = cfg.samples * b / blocks;
      const std::size_t end = cfg.samples * (b + 1) / blocks;
      for (std::size_t j = begin; j < end; ++j) {
        SimConfig sc{T / static_cast<double>(K), derive_seed(cfg.seed, j), cfg.scheme};
        double acc = 0.0;
        integrate(model, &scaled, x0, T, sc, [&](std::size_t k, double, const LatticeState& x) {
          const double d = state_distance(x, c.node(k), w);
          acc += tw[k] * d * d;
        });
        if (acc <= r2) ++hits[b];
      }
    }
  });
  std::size_t total = 0;
  for (auto h : hits) total += h;
  return wilson_estimate(total, cfg.samples);
}

double gaussian_oracle_tube_prob(const HamiltonianModel& model, const NoiseModel& noise,
                                 const TubeSpec& tube, double eps, const WeightSequence& w,
                                 const LatticeState& x0) {
  const ChiSquareForm f = free_tube_form(model, noise, tube, eps, w, x0);
  return quadratic_form_cdf(f.weight, f.shift, f.offset, tube.radius * tube.radius);
}

TubeEstimate gaussian_diagonal_mc(const HamiltonianModel& model, const NoiseModel& noise,
                                  const TubeSpec& tube, double eps, const WeightSequence& w,
                                  const LatticeState& x0, const McConfig& cfg) {
  const ChiSquareForm f = free_tube_form(model, noise, tube, eps, w, x0);
  if (cfg.samples < 1) throw InsufficientDataError("gaussian_diagonal_mc needs at least one sample");
  const double r2 = tube.radius * tube.radius;
  const unsigned workers = cfg.workers == 0 ? default_workers() : cfg.workers;
  const std::size_t blocks = std::min<std::size_t>(workers, cfg.samples);
  std::vector<std::size_t> hits(blocks, 0);
  const std::size_t terms = f.weight.size();
  parallel_blocks(blocks, workers, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) {
      const std::size_t begin = cfg.samples * b / blocks;
      const std::size_t end = cfg.samples * (b + 1) / blocks;
      for (std::size_t s = begin; s < end; ++s) {
        CounterNormal rng(derive_seed(cfg.seed, s));
        double q = f.offset;
        for (std::size_t j = 0; j < terms && q <= r2; j += 2) {
          const auto [z0, z1] = rng.pair(j / 2, 0);
          q += f.weight[j] * (z0 + f.shift[j]) * (z0 + f.shift[j]);
          if (j + 1 < terms) q += f.weight[j + 1] * (z1 + f.shift[j + 1]) * (z1 + f.shift[j + 1]);
        }
        if (q <= r2) ++hits[b];
      }
    }
  });
  std::size_t total = 0;
  for (auto h : hits) total += h;
  return wilson_estimate(total, cfg.samples);
}

LdpLevel make_level(double eps, const TubeEstimate& est) {
  LdpLevel l;
  l.eps = eps;
  l.estimate = est;
  const double e2 = eps * eps;
  const double ninf = -std::numeric_limits<double>::infinity();
  l.eps2_ln_p = est.p_hat > 0.0 ? e2 * std::log(est.p_hat) : ninf;
  l.eps2_ln_ci_low = est.ci_low > 0.0 ? e2 * std::log(est.ci_low) : ninf;
  l.eps2_ln_ci_high = est.ci_high > 0.0 ? e2 * std::log(est.ci_high) : ninf;
  return l;
}

LdpEstimate run_ldp_ladder(const HamiltonianModel& model, const NoiseModel& noise,
                           const TubeSpec& tube, std::vector<double> eps_ladder,
                           const WeightSequence& w, const LatticeState& x0, const McConfig& cfg) {
  std::sort(eps_ladder.begin(), eps_ladder.end(), std::greater<>());
  LdpEstimate out;
  for (std::size_t i = 0; i < eps_ladder.size(); ++i) {
    McConfig c = cfg;
    c.seed = derive_seed(cfg.seed, 0x1D9000 + i);
    out.levels.push_back(make_level(eps_ladder[i], tube_probability_mc(model, noise, tube, eps_ladder[i], w, x0, c)));
  }
  return out;
}

AffineFit fit_affine(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InsufficientDataError("affine fit needs two or more points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  if (std::abs(den) < 1e-300) throw InsufficientDataError("affine fit abscissae coincide");
  AffineFit f;
  f.slope = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / n;
  for (std::size_t i = 0; i < x.size(); ++i) f.residuals.push_back(y[i] - f.intercept - f.slope * x[i]);
  return f;
}

LdpFit ldp_scaling_fit(const LdpEstimate& estimates, const TubeSpec& tube,
                       const HamiltonianModel& model, const NoiseModel& noise,
                       const WeightSequence& w, const LatticeState& x0) {
  std::vector<double> xs, ys;
  for (const auto& l : estimates.levels)
    if (l.estimate.hits > 0) {
      xs.push_back(l.eps);
      ys.push_back(l.eps2_ln_p);
    }
  if (xs.size() < 3) {
    std::string msg = "ldp fit needs three levels with hits; usable eps:";
    for (double e : xs) msg += " " + std::to_string(e);
    if (xs.empty()) msg += " none";
    throw InsufficientDataError(msg);
  }
  const AffineFit f = fit_affine(xs, ys);
  LdpFit out;
  out.fitted_neg_rate = f.intercept;
  out.residuals = f.residuals;
  out.used_eps = xs;
  out.rate_inf_bound = rate_function(tube.center, model, noise, w, x0);
  out.rel_gap = out.rate_inf_bound > 0.0 ? std::abs(out.fitted_neg_rate + out.rate_inf_bound) / out.rate_inf_bound
                                         : std::abs(out.fitted_neg_rate);
  return out;
}

TubeInfimum tube_rate_infimum(const TubeSpec& tube, const HamiltonianModel& model,
                              const NoiseModel& noise, const WeightSequence& w,
                              std::size_t max_iters) {
  tube.validate();
  const PathGrid& c = tube.center;
  const std::size_t K = c.steps();
  const double dt = c.dt();

  // Offsets from the center, pinned to zero at t0.
  std::vector<Tangent> off(K + 1, Tangent{std::vector<double>(c.sites(), 0.0), std::vector<double>(c.sites(), 0.0)});
  auto assemble = [&](const std::vector<Tangent>& o) {
    std::vector<LatticeState> nodes = c.nodes();
    for (std::size_t k = 0; k <= K; ++k) {
      for (std::size_t i = 0; i < c.sites(); ++i) {
        nodes[k].q[i] += o[k].dq[i];
        nodes[k].p[i] += o[k].dp[i];
      }
      nodes[k].canonicalize();
    }
    return PathGrid(c.t0(), c.t1(), std::move(nodes));
  };
  auto project = [&](std::vector<Tangent>& o) {
    double s = 0.0;
    for (std::size_t k = 0; k <= K; ++k) {
      const double n = weighted_norm(o[k], w);
      s += (k == 0 || k == K ? 0.5 : 1.0) * dt * n * n;
    }
    const double d = std::sqrt(s);
    if (d > tube.radius) {
      const double f = tube.radius / d;
      for (auto& t : o) {
        for (double& v : t.dq) v *= f;
        for (double& v : t.dp) v *= f;
      }
    }
  };
  auto value = [&](const std::vector<Tangent>& o) { return 0.5 * om_action(assemble(o), model, noise, w).total; };

  TubeInfimum out{c, value(off), 0};
  double step = dt;
  for (std::size_t it = 0; it < max_iters; ++it) {
    const PathGradient g = om_gradient(assemble(off), model, noise, w);
    bool moved = false;
    for (int tries = 0; tries < 40; ++tries) {
      std::vector<Tangent> trial = off;
      // Steepest descent in the tube metric: divide by rho^2 and the node weight.
      for (std::size_t k = 1; k <= K; ++k) {
        const double nw = (k == K ? 0.5 : 1.0) * dt;
        for (std::size_t i = 0; i < c.sites(); ++i) {
          const double r2 = w.rho(i) * w.rho(i) * nw;
          trial[k].dq[i] -= step * 0.5 * g.nodes[k].dq[i] / r2;
          trial[k].dp[i] -= step * 0.5 * g.nodes[k].dp[i] / r2;
        }
      }
      project(trial);
      const double v = value(trial);
      if (v < out.rate) {
        off = std::move(trial);
        out.rate = v;
        moved = true;
        step *= 1.5;
        break;
      }
      step *= 0.5;
    }
    out.iterations = it + 1;
    if (!moved) break;
  }
  out.path = assemble(off);
  return out;
}

}  // namespace omkam
