#include "omkam/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <utility>

#include "omkam/errors.hpp"

namespace omkam {

double wrap_angle(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // fmod of a tiny negative number can round up to exactly 2pi
  if (r >= kTwoPi) r = 0.0;
  return r;
}

double lift_angle(double a) { return std::remainder(a, kTwoPi); }

double torus_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), kTwoPi);
  return std::min(d, kTwoPi - d);
}

double angle_increment(double from, double to) { return std::remainder(to - from, kTwoPi); }

void require_same_sites(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": site count mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
  }
}

WeightSequence::WeightSequence(std::vector<Site> sites, std::vector<double> rho)
    : sites_(std::move(sites)), rho_(std::move(rho)) {
  require_same_sites(sites_.size(), rho_.size(), "WeightSequence");
  if (rho_.empty()) throw DimensionError("WeightSequence: empty site set");
  for (double r : rho_) {
    if (!(r > 0.0) || !std::isfinite(r)) {
      throw DimensionError("WeightSequence: weights must be positive and finite");
    }
    c_rho_ += r;
    sum_sq_ += r * r;
  }
  if (!std::isfinite(c_rho_) || !std::isfinite(sum_sq_)) {
    throw DimensionError("WeightSequence: weight sums overflow");
  }
}

WeightSequence WeightSequence::default_box(int dim, int radius) {
  if (dim < 1 || radius < 0) throw DimensionError("default_box: need dim >= 1, radius >= 0");
  std::vector<Site> sites;
  std::vector<double> rho;
  Site cur(static_cast<std::size_t>(dim), -radius);
  while (true) {
    int l1 = 0;
    for (int c : cur) l1 += std::abs(c);
    sites.push_back(cur);
    rho.push_back(std::ldexp(1.0, -l1));
    std::size_t d = 0;
    while (d < cur.size() && cur[d] == radius) cur[d++] = -radius;
    if (d == cur.size()) break;
    ++cur[d];
  }
  return {std::move(sites), std::move(rho)};
}

WeightSequence WeightSequence::chain(std::size_t n) {
  std::vector<double> rho(n);
  for (std::size_t i = 0; i < n; ++i) rho[i] = std::ldexp(1.0, -static_cast<int>(i));
  return from_values(std::move(rho));
}

WeightSequence WeightSequence::uniform(std::size_t n, double value) {
  return from_values(std::vector<double>(n, value));
}

WeightSequence WeightSequence::from_values(std::vector<double> rho) {
  std::vector<Site> sites(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i) sites[i] = {static_cast<int>(i)};
  return {std::move(sites), std::move(rho)};
}

WeightSequence WeightSequence::scaled(double factor) const {
  std::vector<double> rho = rho_;
  for (double& r : rho) r *= factor;
  return {sites_, std::move(rho)};
}

LatticeState LatticeState::zeros(std::size_t n, Chart chart) {
  return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), chart};
}

void LatticeState::canonicalize() {
  if (chart != Chart::angle) return;
  for (double& a : q) a = wrap_angle(a);
}

Tangent difference(const LatticeState& a, const LatticeState& b) {
  require_same_sites(a.size(), b.size(), "difference");
  require_same_sites(a.p.size(), b.p.size(), "difference");
  Tangent t{std::vector<double>(a.size()), std::vector<double>(a.size())};
  for (std::size_t i = 0; i < a.size(); ++i) {
    t.dq[i] = a.chart == Chart::angle ? angle_increment(b.q[i], a.q[i]) : a.q[i] - b.q[i];
    t.dp[i] = a.p[i] - b.p[i];
  }
  return t;
}

double weighted_norm(const LatticeState& u, const WeightSequence& w) {
  require_same_sites(u.size(), w.size(), "weighted_norm");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double dq = u.chart == Chart::angle ? torus_distance(u.q[i], 0.0) : u.q[i];
    const double r2 = w.rho(i) * w.rho(i);
    s += r2 * (dq * dq + u.p[i] * u.p[i]);
  }
  return std::sqrt(s);
}

double weighted_inner(const Tangent& u, const Tangent& v, const WeightSequence& w) {
  require_same_sites(u.dq.size(), w.size(), "weighted_inner");
  require_same_sites(v.dq.size(), w.size(), "weighted_inner");
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    s += w.rho(i) * w.rho(i) * (u.dq[i] * v.dq[i] + u.dp[i] * v.dp[i]);
  }
  return s;
}

double weighted_norm(const Tangent& u, const WeightSequence& w) {
  return std::sqrt(weighted_inner(u, u, w));
}

double state_distance(const LatticeState& a, const LatticeState& b, const WeightSequence& w) {
  return weighted_norm(difference(a, b), w);
}

PathGrid::PathGrid(double t0, double t1, std::vector<LatticeState> nodes)
    : t0_(t0), t1_(t1), nodes_(std::move(nodes)) {
  if (!(t1_ > t0_)) throw DimensionError("PathGrid: need t1 > t0");
  if (nodes_.size() < 2) throw DimensionError("PathGrid: need at least one step");
  const std::size_t n = nodes_.front().size();
  for (auto& x : nodes_) {
    x.canonicalize();
    require_same_sites(x.q.size(), n, "PathGrid");
    require_same_sites(x.p.size(), n, "PathGrid");
    if (x.chart != nodes_.front().chart) throw DimensionError("PathGrid: mixed charts");
  }
}

PathGrid PathGrid::constant(const LatticeState& x, double t0, double t1, std::size_t steps) {
  return {t0, t1, std::vector<LatticeState>(steps + 1, x)};
}

PathGrid PathGrid::linear(const LatticeState& from, const LatticeState& to, double t0, double t1,
                          std::size_t steps) {
  const Tangent d = difference(to, from);
  std::vector<LatticeState> nodes;
  nodes.reserve(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double s = static_cast<double>(k) / static_cast<double>(steps);
    LatticeState x = from;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x.q[i] += s * d.dq[i];
      x.p[i] += s * d.dp[i];
    }
    x.canonicalize();
    nodes.push_back(std::move(x));
  }
  return {t0, t1, std::move(nodes)};
}

double PathGrid::time(std::size_t k) const {
  if (k == steps()) return t1_;
  return t0_ + static_cast<double>(k) * dt();
}

namespace {

template <class Pointwise>
double trapezoid(std::size_t count, double dt, Pointwise&& f) {
  double s = 0.5 * (f(0) + f(count - 1));
  for (std::size_t k = 1; k + 1 < count; ++k) s += f(k);
  return s * dt;
}

}  // namespace

double path_norm(const PathGrid& path, const WeightSequence& w) {
  const double integral = trapezoid(path.nodes().size(), path.dt(), [&](std::size_t k) {
    const double n = weighted_norm(path.node(k), w);
    return n * n;
  });
  return std::sqrt(integral);
}

double path_distance(const PathGrid& a, const PathGrid& b, const WeightSequence& w) {
  if (a.steps() != b.steps()) throw DimensionError("path_distance: grids differ");
  const double integral = trapezoid(a.nodes().size(), a.dt(), [&](std::size_t k) {
    const double n = state_distance(a.node(k), b.node(k), w);
    return n * n;
  });
  return std::sqrt(integral);
}

}  // namespace omkam
