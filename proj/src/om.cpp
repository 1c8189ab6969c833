#include "omkam/om.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "omkam/errors.hpp"

namespace omkam {

namespace {

using Eigen::VectorXd;

// The discrete action as a function of a flat node vector
// x[(2k) n + i] = q_ki, x[(2k + 1) n + i] = p_ki. Angles are stored lifted.
class DiscreteAction {
 public:
  DiscreteAction(const HamiltonianModel& model, const NoiseModel& noise, const WeightSequence& w,
                 const PathGrid& grid)
      : model_(model),
        n_(grid.sites()),
        K_(grid.steps()),
        dt_(grid.dt()),
        chart_(grid.chart()),
        t0_(grid.t0()),
        wq_(K_ * n_),
        wp_(K_ * n_),
        rho2_(n_) {
    require_same_sites(n_, model.sites(), "om_action");
    require_same_sites(n_, noise.sites(), "om_action");
    require_same_sites(n_, w.size(), "om_action");
    if (grid.chart() != model.chart()) throw DimensionError("om_action: chart mismatch");
    for (std::size_t i = 0; i < n_; ++i) rho2_[i] = w.rho(i) * w.rho(i);
    for (std::size_t k = 0; k < K_; ++k) {
      const double tm = t0_ + (static_cast<double>(k) + 0.5) * dt_;
      for (std::size_t i = 0; i < n_; ++i) {
        const double sq = noise.sigma_q(i, tm);
        const double sp = noise.sigma_p(i, tm);
        wq_[k * n_ + i] = rho2_[i] / (sq * sq);
        wp_[k * n_ + i] = rho2_[i] / (sp * sp);
      }
    }
    mid_ = LatticeState::zeros(n_, chart_);
    dir_ = Tangent{std::vector<double>(n_), std::vector<double>(n_)};
  }

  std::size_t size() const { return 2 * n_ * (K_ + 1); }
  std::size_t sites() const { return n_; }
  std::size_t steps() const { return K_; }
  double dt() const { return dt_; }
  double weight_q(std::size_t k, std::size_t i) const { return wq_[k * n_ + i]; }
  double weight_p(std::size_t k, std::size_t i) const { return wp_[k * n_ + i]; }
  double rho2(std::size_t i) const { return rho2_[i]; }

  double q(const VectorXd& x, std::size_t k, std::size_t i) const { return x[2 * k * n_ + i]; }
  double p(const VectorXd& x, std::size_t k, std::size_t i) const {
    return x[(2 * k + 1) * n_ + i];
  }

  VectorXd flatten(const PathGrid& path) const {
    VectorXd x(size());
    for (std::size_t k = 0; k <= K_; ++k) {
      const auto& s = path.node(k);
      for (std::size_t i = 0; i < n_; ++i) {
        double qi = s.q[i];
        if (chart_ == Chart::angle && k > 0) qi = x[2 * (k - 1) * n_ + i] + angle_increment(x[2 * (k - 1) * n_ + i], qi);
        x[2 * k * n_ + i] = qi;
        x[(2 * k + 1) * n_ + i] = s.p[i];
      }
    }
    return x;
  }

  PathGrid unflatten(const VectorXd& x, double t0, double t1) const {
    std::vector<LatticeState> nodes(K_ + 1, LatticeState::zeros(n_, chart_));
    for (std::size_t k = 0; k <= K_; ++k) {
      for (std::size_t i = 0; i < n_; ++i) {
        nodes[k].q[i] = q(x, k, i);
        nodes[k].p[i] = p(x, k, i);
      }
      nodes[k].canonicalize();
    }
    return {t0, t1, std::move(nodes)};
  }

  // Residuals of segment k: rq = v_q - dH/dp(m), rp = v_p + dH/dq(m).
  template <class Visit>
  void for_each_segment(const VectorXd& x, Visit&& visit) {
    std::vector<double> rq(n_), rp(n_);
    for (std::size_t k = 0; k < K_; ++k) {
      for (std::size_t i = 0; i < n_; ++i) {
        const double dq = increment(q(x, k, i), q(x, k + 1, i));
        const double dp = p(x, k + 1, i) - p(x, k, i);
        mid_.q[i] = q(x, k, i) + 0.5 * dq;
        mid_.p[i] = p(x, k, i) + 0.5 * dp;
        rq[i] = dq / dt_;
        rp[i] = dp / dt_;
      }
      model_.gradient(mid_, g_);
      for (std::size_t i = 0; i < n_; ++i) {
        rq[i] -= g_.dp[i];
        rp[i] += g_.dq[i];
      }
      visit(k, rq, rp);
    }
  }

  ActionReport report(const VectorXd& x) {
    ActionReport r;
    for_each_segment(x, [&](std::size_t k, const std::vector<double>& rq,
                            const std::vector<double>& rp) {
      double sq = 0.0, sp = 0.0, nq = 0.0, np = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        sq += weight_q(k, i) * rq[i] * rq[i];
        sp += weight_p(k, i) * rp[i] * rp[i];
        nq += rho2_[i] * rq[i] * rq[i];
        np += rho2_[i] * rp[i] * rp[i];
      }
      r.q_term += dt_ * sq;
      r.p_term += dt_ * sp;
      r.el_residual += dt_ * (std::sqrt(nq) + std::sqrt(np));
    });
    r.total = r.q_term + r.p_term;
    return r;
  }

  double value(const VectorXd& x) { return report(x).total; }

  // Returns the action and fills grad (same layout as x).
  double value_and_gradient(const VectorXd& x, VectorXd& grad) {
    grad.setZero(size());
    double total = 0.0;
    Tangent h;
    for_each_segment(x, [&](std::size_t k, const std::vector<double>& rq,
                            const std::vector<double>& rp) {
      // z = D R; F'^T z = Hess(H)(m) J^T z with J^T (zq, zp) = (-zp, zq)
      for (std::size_t i = 0; i < n_; ++i) {
        const double zq = weight_q(k, i) * rq[i];
        const double zp = weight_p(k, i) * rp[i];
        total += dt_ * (zq * rq[i] + zp * rp[i]);
        dir_.dq[i] = -zp;
        dir_.dp[i] = zq;
      }
      model_.hessian_apply(mid_, dir_, h);
      for (std::size_t i = 0; i < n_; ++i) {
        const double zq = weight_q(k, i) * rq[i];
        const double zp = weight_p(k, i) * rp[i];
        const double cq = dt_ * h.dq[i];
        const double cp = dt_ * h.dp[i];
        grad[2 * (k + 1) * n_ + i] += 2.0 * zq - cq;
        grad[(2 * (k + 1) + 1) * n_ + i] += 2.0 * zp - cp;
        grad[2 * k * n_ + i] += -2.0 * zq - cq;
        grad[(2 * k + 1) * n_ + i] += -2.0 * zp - cp;
      }
    });
    return total;
  }

 private:
  double increment(double from, double to) const {
    return chart_ == Chart::angle ? angle_increment(from, to) : to - from;
  }

  const HamiltonianModel& model_;
  std::size_t n_;
  std::size_t K_;
  double dt_;
  Chart chart_;
  double t0_;
  std::vector<double> wq_, wp_, rho2_;
  LatticeState mid_;
  Tangent g_, dir_;
};

void require_resolution(const PathGrid& path) {
  if (path.steps() < 2) throw ResolutionError("om_action: need at least 2 time steps");
}

PathGradient unflatten_gradient(const VectorXd& g, std::size_t n, std::size_t K) {
  PathGradient out;
  out.nodes.resize(K + 1, Tangent{std::vector<double>(n), std::vector<double>(n)});
  for (std::size_t k = 0; k <= K; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      out.nodes[k].dq[i] = g[2 * k * n + i];
      out.nodes[k].dp[i] = g[(2 * k + 1) * n + i];
    }
  }
  return out;
}

// Tridiagonal (in time) curvature model of the action, one chain per
// coordinate: (2/dt) sum_k d_k (x_{k+1} - x_k)^2 / 2. Used as the initial
// inverse Hessian of L-BFGS so the iteration count does not grow with K.
// Block tridiagonal preconditioner: the exact Hessian of the action for the
// per-site linear field dq/dt = lam_i p, dp/dt = -lam_i q (lam_i = 0 unless the
// model exposes rotation frequencies). Solved per site by block Thomas with
// 2x2 blocks.
class ChainPreconditioner {
 public:
  ChainPreconditioner(DiscreteAction& action, const std::vector<double>& lambda, Constraint constraint)
      : n_(action.sites()), K_(action.steps()), dt_(action.dt()), constraint_(constraint) {
    lam_ = lambda.size() == n_ ? lambda : std::vector<double>(n_, 0.0);
    dq_.resize(K_ * n_);
    dp_.resize(K_ * n_);
    for (std::size_t k = 0; k < K_; ++k) {
      for (std::size_t i = 0; i < n_; ++i) {
        dq_[k * n_ + i] = action.weight_q(k, i);
        dp_[k * n_ + i] = action.weight_p(k, i);
      }
    }
  }

  // out = M^{-1} g on free nodes, zero on constrained nodes.
  void apply(const VectorXd& g, VectorXd& out) const {
    using M2 = Eigen::Matrix2d;
    using V2 = Eigen::Vector2d;
    out.setZero(g.size());
    const std::size_t first = 1;
    const std::size_t last = constraint_ == Constraint::fixed_both_endpoints ? K_ - 1 : K_;
    if (last < first) return;
    const std::size_t m = last - first + 1;
    std::vector<M2> diag(m), upper(m);
    std::vector<V2> rhs(m);
    for (std::size_t i = 0; i < n_; ++i) {
      M2 S;
      S << 0.0, 1.0, -1.0, 0.0;
      const M2 a = -M2::Identity() / dt_ - 0.5 * lam_[i] * S;
      const M2 b = M2::Identity() / dt_ - 0.5 * lam_[i] * S;
      for (std::size_t r = 0; r < m; ++r) {
        diag[r].setZero();
        upper[r].setZero();
      }
      // Segment k couples nodes k and k + 1 with weight 2 dt D^T W D.
      for (std::size_t k = 0; k < K_; ++k) {
        const M2 W = (V2(dq_[k * n_ + i], dp_[k * n_ + i]) * (2.0 * dt_)).asDiagonal();
        const bool lf = k >= first && k <= last, rf = k + 1 >= first && k + 1 <= last;
        if (lf) diag[k - first] += a.transpose() * W * a;
        if (rf) diag[k + 1 - first] += b.transpose() * W * b;
        if (lf && rf) upper[k - first] += a.transpose() * W * b;
      }
      for (std::size_t r = 0; r < m; ++r) {
        const std::size_t k = first + r;
        rhs[r] = V2(g[2 * k * n_ + i], g[(2 * k + 1) * n_ + i]);
      }
      for (std::size_t r = 1; r < m; ++r) {
        const M2 f = upper[r - 1].transpose() * diag[r - 1].inverse();
        diag[r] -= f * upper[r - 1];
        rhs[r] -= f * rhs[r - 1];
      }
      rhs[m - 1] = diag[m - 1].inverse() * rhs[m - 1];
      for (std::size_t r = m - 1; r-- > 0;) rhs[r] = diag[r].inverse() * (rhs[r] - upper[r] * rhs[r + 1]);
      for (std::size_t r = 0; r < m; ++r) {
        const std::size_t k = first + r;
        out[2 * k * n_ + i] = rhs[r](0);
        out[(2 * k + 1) * n_ + i] = rhs[r](1);
      }
    }
  }

 private:
  std::size_t n_;
  std::size_t K_;
  double dt_;
  Constraint constraint_;
  std::vector<double> lam_;
  std::vector<double> dq_, dp_;
};

void zero_constrained(VectorXd& g, std::size_t n, std::size_t K, Constraint c) {
  g.segment(0, 2 * n).setZero();
  if (c == Constraint::fixed_both_endpoints) g.segment(2 * K * n, 2 * n).setZero();
}

double dual_norm(const VectorXd& g, const WeightSequence& w, std::size_t K, double dt) {
  const std::size_t n = w.size();
  double s = 0.0;
  for (std::size_t k = 0; k <= K; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const double inv = 1.0 / (w.rho(i) * w.rho(i));
      const double a = g[2 * k * n + i];
      const double b = g[(2 * k + 1) * n + i];
      s += (a * a + b * b) * inv;
    }
  }
  return std::sqrt(s / dt);
}

}  // namespace

ActionReport om_action(const PathGrid& path, const HamiltonianModel& model,
                       const NoiseModel& noise, const WeightSequence& w) {
  require_resolution(path);
  DiscreteAction action(model, noise, w, path);
  return action.report(action.flatten(path));
}

PathGradient om_gradient(const PathGrid& path, const HamiltonianModel& model,
                         const NoiseModel& noise, const WeightSequence& w) {
  require_resolution(path);
  DiscreteAction action(model, noise, w, path);
  VectorXd g;
  action.value_and_gradient(action.flatten(path), g);
  return unflatten_gradient(g, path.sites(), path.steps());
}

double euler_lagrange_residual(const PathGrid& path, const HamiltonianModel& model,
                               const WeightSequence& w) {
  // The residual does not involve sigma; unit noise gives rho-only weights.
  const NoiseModel unit = NoiseModel::constant(path.sites(), 1.0, 1.0, 0.0);
  DiscreteAction action(model, unit, w, path);
  return action.report(action.flatten(path)).el_residual;
}

double path_gradient_norm(const PathGradient& g, const WeightSequence& w, double dt,
                          Constraint constraint) {
  const std::size_t n = w.size();
  const std::size_t K = g.nodes.size() - 1;
  VectorXd flat(2 * n * (K + 1));
  for (std::size_t k = 0; k <= K; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      flat[2 * k * n + i] = g.nodes[k].dq[i];
      flat[(2 * k + 1) * n + i] = g.nodes[k].dp[i];
    }
  }
  zero_constrained(flat, n, K, constraint);
  return dual_norm(flat, w, K, dt);
}

MinimizeResult minimize_action(const PathGrid& initial, const HamiltonianModel& model,
                               const NoiseModel& noise, const WeightSequence& w,
                               const MinimizeConfig& cfg) {
  if (!(cfg.grad_tol > 0.0)) throw OptimizationError("minimize_action: grad_tol must be positive");
  require_resolution(initial);
  DiscreteAction action(model, noise, w, initial);
  const ChainPreconditioner precond(action, model.rotation_frequencies(), cfg.constraint);
  const std::size_t n = initial.sites();
  const std::size_t K = initial.steps();
  const double dt = initial.dt();

  VectorXd x = action.flatten(initial);
  VectorXd g;
  double f = action.value_and_gradient(x, g);
  zero_constrained(g, n, K, cfg.constraint);

  std::deque<VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  VectorXd d(x.size()), q(x.size()), r(x.size()), x_new(x.size()), g_new(x.size());
  std::vector<double> alpha_hist;

  MinimizeResult result{initial, {}, 0, dual_norm(g, w, K, dt), false};
  int consecutive_failures = 0;
  std::size_t iter = 0;
  for (; iter < cfg.max_iters; ++iter) {
    result.grad_norm = dual_norm(g, w, K, dt);
    if (result.grad_norm <= cfg.grad_tol) {
      result.converged = true;
      break;
    }

    // Two-loop recursion with the chain preconditioner as H0.
    q = g;
    alpha_hist.assign(s_hist.size(), 0.0);
    for (std::size_t j = s_hist.size(); j-- > 0;) {
      alpha_hist[j] = rho_hist[j] * s_hist[j].dot(q);
      q -= alpha_hist[j] * y_hist[j];
    }
    precond.apply(q, r);
    if (!s_hist.empty()) {
      VectorXd hy;
      precond.apply(y_hist.back(), hy);
      const double yhy = y_hist.back().dot(hy);
      if (yhy > 0.0) r *= s_hist.back().dot(y_hist.back()) / yhy;
    }
    for (std::size_t j = 0; j < s_hist.size(); ++j) {
      const double beta = rho_hist[j] * y_hist[j].dot(r);
      r += (alpha_hist[j] - beta) * s_hist[j];
    }
    d = -r;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      precond.apply(g, r);
      d = -r;
      slope = g.dot(d);
    }

    // Strong-Wolfe line search by bracketing and bisection.
    double step = 1.0, lo = 0.0, hi = 0.0;
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + step * d;
      f_new = action.value_and_gradient(x_new, g_new);
      zero_constrained(g_new, n, K, cfg.constraint);
      const double slope_new = g_new.dot(d);
      if (!std::isfinite(f_new) || f_new > f + cfg.wolfe_c1 * step * slope) {
        hi = step;
      } else if (std::abs(slope_new) <= cfg.wolfe_c2 * std::abs(slope)) {
        accepted = true;
        break;
      } else if (slope_new > 0.0) {
        hi = step;
      } else {
        lo = step;
      }
      step = hi > 0.0 ? 0.5 * (lo + hi) : 2.0 * step;
    }
    if (!accepted && f_new < f) accepted = true;  // sufficient progress without curvature
    if (!accepted) {
      if (++consecutive_failures >= 2) {
        // Rounding floor: nothing left to gain relative to the action value.
        if (f <= 1e-24 || result.grad_norm <= 10.0 * cfg.grad_tol) break;
        std::ostringstream msg;
        msg << "minimize_action: line search failed to decrease the action at iteration " << iter
            << " (action " << f << ", gradient norm " << result.grad_norm << ")";
        throw OptimizationError(msg.str());
      }
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      continue;
    }
    consecutive_failures = 0;
    VectorXd s = x_new - x;
    VectorXd y = g_new - g;
    const double sy = s.dot(y);
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    if (sy > 1e-300) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > cfg.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
  }
  result.iterations = iter;
  result.grad_norm = dual_norm(g, w, K, dt);
  result.converged = result.converged || result.grad_norm <= cfg.grad_tol;
  result.path = action.unflatten(x, initial.t0(), initial.t1());
  result.report = action.report(x);
  return result;
}

}  // namespace omkam
