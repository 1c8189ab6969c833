#include "omkam/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "omkam/errors.hpp"

namespace omkam {

namespace {

void resize_tangent(Tangent& t, std::size_t n) {
  t.dq.assign(n, 0.0);
  t.dp.assign(n, 0.0);
}

void require_finite(double v, const HamiltonianModel& m) {
  if (!std::isfinite(v)) throw ModelError(m.name() + ": non-finite energy");
}

}  // namespace

Tangent HamiltonianModel::gradient(const LatticeState& x) const {
  Tangent g;
  gradient(x, g);
  return g;
}

void HamiltonianModel::hessian_apply(const LatticeState& x, const Tangent& v, Tangent& out) const {
  double vmax = 0.0;
  for (std::size_t i = 0; i < v.dq.size(); ++i) {
    vmax = std::max({vmax, std::abs(v.dq[i]), std::abs(v.dp[i])});
  }
  resize_tangent(out, sites());
  if (vmax == 0.0) return;
  const double h = 1e-5 / vmax;
  LatticeState plus = x, minus = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    plus.q[i] += h * v.dq[i];
    plus.p[i] += h * v.dp[i];
    minus.q[i] -= h * v.dq[i];
    minus.p[i] -= h * v.dp[i];
  }
  Tangent gp, gm;
  gradient(plus, gp);
  gradient(minus, gm);
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.dq[i] = (gp.dq[i] - gm.dq[i]) / (2.0 * h);
    out.dp[i] = (gp.dp[i] - gm.dp[i]) / (2.0 * h);
  }
}

void HamiltonianModel::remainder_gradient(const LatticeState&, Tangent&) const {
  throw ModelError(name() + ": no rotation/remainder split");
}

void FreeModel::gradient(const LatticeState&, Tangent& out) const { resize_tangent(out, sites_); }

void FreeModel::hessian_apply(const LatticeState&, const Tangent&, Tangent& out) const {
  resize_tangent(out, sites_);
}

HarmonicLattice::HarmonicLattice(std::vector<double> omega) : omega_(std::move(omega)) {
  if (omega_.empty()) throw ModelError("harmonic_lattice: need at least one site");
}

double HarmonicLattice::energy(const LatticeState& x) const {
  double e = 0.0;
  for (std::size_t i = 0; i < omega_.size(); ++i) {
    const double th = lift_angle(x.q[i]);
    e += 0.5 * x.p[i] * x.p[i] + 0.5 * omega_[i] * omega_[i] * th * th;
  }
  return e;
}

void HarmonicLattice::gradient(const LatticeState& x, Tangent& out) const {
  resize_tangent(out, omega_.size());
  for (std::size_t i = 0; i < omega_.size(); ++i) {
    out.dq[i] = omega_[i] * omega_[i] * lift_angle(x.q[i]);
    out.dp[i] = x.p[i];
  }
}

void HarmonicLattice::hessian_apply(const LatticeState&, const Tangent& v, Tangent& out) const {
  resize_tangent(out, omega_.size());
  for (std::size_t i = 0; i < omega_.size(); ++i) {
    out.dq[i] = omega_[i] * omega_[i] * v.dq[i];
    out.dp[i] = v.dp[i];
  }
}

std::optional<double> HarmonicLattice::lipschitz_hint() const {
  double w2 = 1.0;
  for (double w : omega_) w2 = std::max(w2, w * w);
  return w2;
}

PendulumLattice::PendulumLattice(std::size_t sites, double kappa, std::vector<Bond> bonds)
    : sites_(sites), kappa_(kappa), bonds_(std::move(bonds)) {
  if (sites_ == 0) throw ModelError("pendulum_lattice: need at least one site");
  for (const auto& [a, b] : bonds_) {
    if (a >= sites_ || b >= sites_ || a == b) throw ModelError("pendulum_lattice: bad bond");
  }
}

PendulumLattice PendulumLattice::chain(std::size_t sites, double kappa) {
  std::vector<Bond> bonds;
  for (std::size_t i = 0; i + 1 < sites; ++i) bonds.emplace_back(i, i + 1);
  return {sites, kappa, std::move(bonds)};
}

PendulumLattice PendulumLattice::on_lattice(const WeightSequence& w, double kappa) {
  std::vector<Bond> bonds;
  const auto& s = w.sites();
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      int l1 = 0;
      for (std::size_t d = 0; d < s[i].size(); ++d) l1 += std::abs(s[i][d] - s[j][d]);
      if (l1 == 1) bonds.emplace_back(i, j);
    }
  }
  return {w.size(), kappa, std::move(bonds)};
}

double PendulumLattice::energy(const LatticeState& x) const {
  double e = 0.0;
  for (std::size_t i = 0; i < sites_; ++i) e += 0.5 * x.p[i] * x.p[i] - std::cos(x.q[i]);
  for (const auto& [a, b] : bonds_) e += kappa_ * (1.0 - std::cos(x.q[a] - x.q[b]));
  return e;
}

void PendulumLattice::gradient(const LatticeState& x, Tangent& out) const {
  resize_tangent(out, sites_);
  for (std::size_t i = 0; i < sites_; ++i) {
    out.dq[i] = std::sin(x.q[i]);
    out.dp[i] = x.p[i];
  }
  for (const auto& [a, b] : bonds_) {
    const double s = kappa_ * std::sin(x.q[a] - x.q[b]);
    out.dq[a] += s;
    out.dq[b] -= s;
  }
}

void PendulumLattice::hessian_apply(const LatticeState& x, const Tangent& v, Tangent& out) const {
  resize_tangent(out, sites_);
  for (std::size_t i = 0; i < sites_; ++i) {
    out.dq[i] = std::cos(x.q[i]) * v.dq[i];
    out.dp[i] = v.dp[i];
  }
  for (const auto& [a, b] : bonds_) {
    const double c = kappa_ * std::cos(x.q[a] - x.q[b]) * (v.dq[a] - v.dq[b]);
    out.dq[a] += c;
    out.dq[b] -= c;
  }
}

std::optional<double> PendulumLattice::lipschitz_hint() const {
  std::vector<double> degree(sites_, 0.0);
  for (const auto& [a, b] : bonds_) {
    degree[a] += 1.0;
    degree[b] += 1.0;
  }
  const double dmax = degree.empty() ? 0.0 : *std::max_element(degree.begin(), degree.end());
  return 1.0 + 2.0 * std::abs(kappa_) * dmax;
}

GradCheckReport grad_check(const HamiltonianModel& model, const LatticeState& x, double h) {
  if (!(h > 0.0)) throw ModelError("grad_check: step must be positive");
  require_finite(model.energy(x), model);
  const Tangent g = model.gradient(x);
  GradCheckReport report;
  LatticeState y = x;
  auto central = [&](double& coord) {
    const double saved = coord;
    coord = saved + h;
    const double ep = model.energy(y);
    coord = saved - h;
    const double em = model.energy(y);
    coord = saved;
    require_finite(ep, model);
    require_finite(em, model);
    return (ep - em) / (2.0 * h);
  };
  auto record = [&](double analytic, double fd, std::size_t i, bool is_q) {
    const double err =
        std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
    if (err > report.max_rel_err) {
      report.max_rel_err = err;
      report.worst_site = i;
      report.worst_is_q = is_q;
    }
  };
  for (std::size_t i = 0; i < x.size(); ++i) {
    record(g.dq[i], central(y.q[i]), i, true);
    record(g.dp[i], central(y.p[i]), i, false);
  }
  return report;
}

double symplectic_trace_defect(const HamiltonianModel& model, const LatticeState& x,
                               const WeightSequence& w) {
  require_same_sites(x.size(), w.size(), "symplectic_trace_defect");
  constexpr double h = 1e-4;
  double defect = 0.0;
  LatticeState y = x;
  Tangent gp, gm;
  for (std::size_t i = 0; i < x.size(); ++i) {
    // d/dq_i of dH/dp_i
    y.q[i] = x.q[i] + h;
    model.gradient(y, gp);
    y.q[i] = x.q[i] - h;
    model.gradient(y, gm);
    y.q[i] = x.q[i];
    const double qp = (gp.dp[i] - gm.dp[i]) / (2.0 * h);
    // d/dp_i of dH/dq_i
    y.p[i] = x.p[i] + h;
    model.gradient(y, gp);
    y.p[i] = x.p[i] - h;
    model.gradient(y, gm);
    y.p[i] = x.p[i];
    const double pq = (gp.dq[i] - gm.dq[i]) / (2.0 * h);
    defect += w.rho(i) * w.rho(i) * (qp - pq);
  }
  return defect;
}

}  // namespace omkam
