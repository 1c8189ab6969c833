#include "omkam/sde.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "omkam/errors.hpp"
#include "omkam/parallel.hpp"
#include "omkam/random.hpp"

namespace omkam {

unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

double NoiseProfile::operator()(double t) const {
  if (amplitude == 0.0) return base;
  return base * (1.0 + amplitude * std::sin(angular_frequency * t + phase));
}

double NoiseProfile::lower() const { return base * (1.0 - std::abs(amplitude)); }
double NoiseProfile::upper() const { return base * (1.0 + std::abs(amplitude)); }

NoiseModel::NoiseModel(std::vector<NoiseProfile> sigma_q, std::vector<NoiseProfile> sigma_p,
                       double epsilon)
    : sigma_q_(std::move(sigma_q)), sigma_p_(std::move(sigma_p)), epsilon_(epsilon) {
  require_same_sites(sigma_q_.size(), sigma_p_.size(), "NoiseModel");
  if (!(epsilon_ >= 0.0) || !std::isfinite(epsilon_)) {
    throw ModelError("NoiseModel: epsilon must be finite and >= 0");
  }
  auto check = [](const NoiseProfile& s) {
    if (!(s.base > 0.0) || !(std::abs(s.amplitude) < 1.0) || !std::isfinite(s.angular_frequency)) {
      throw ModelError("NoiseModel: need base > 0 and |amplitude| < 1 (uniform ellipticity)");
    }
  };
  std::for_each(sigma_q_.begin(), sigma_q_.end(), check);
  std::for_each(sigma_p_.begin(), sigma_p_.end(), check);
}

NoiseModel NoiseModel::constant(std::size_t sites, double sigma_q, double sigma_p, double epsilon) {
  return {std::vector<NoiseProfile>(sites, NoiseProfile{sigma_q}),
          std::vector<NoiseProfile>(sites, NoiseProfile{sigma_p}), epsilon};
}

NoiseModel NoiseModel::with_epsilon(double epsilon) const {
  return {sigma_q_, sigma_p_, epsilon};
}

NoiseModel NoiseModel::scaled(double factor) const {
  auto q = sigma_q_;
  auto p = sigma_p_;
  for (auto& s : q) s.base *= factor;
  for (auto& s : p) s.base *= factor;
  return {std::move(q), std::move(p), epsilon_};
}

double NoiseModel::lower() const {
  double m = sigma_q_.front().lower();
  for (const auto& s : sigma_q_) m = std::min(m, s.lower());
  for (const auto& s : sigma_p_) m = std::min(m, s.lower());
  return m;
}

double NoiseModel::upper() const {
  double m = 0.0;
  for (const auto& s : sigma_q_) m = std::max(m, s.upper());
  for (const auto& s : sigma_p_) m = std::max(m, s.upper());
  return m;
}

void NoiseModel::validate_on_grid(double t0, double t1, std::size_t steps,
                                  double max_step_jump) const {
  const double lo = lower();
  const double hi = upper();
  const double dt = (t1 - t0) / static_cast<double>(steps);
  auto check_profile = [&](const NoiseProfile& s, std::size_t site) {
    double prev = s(t0);
    for (std::size_t k = 0; k <= steps; ++k) {
      const double v = s(t0 + static_cast<double>(k) * dt);
      if (v < lo * (1 - 1e-12) || v > hi * (1 + 1e-12)) {
        throw ModelError("NoiseModel: ellipticity bound violated at site " + std::to_string(site));
      }
      if (std::abs(v - prev) > max_step_jump * hi) {
        throw ModelError("NoiseModel: discontinuous profile at site " + std::to_string(site));
      }
      prev = v;
    }
  };
  for (std::size_t i = 0; i < sites(); ++i) {
    check_profile(sigma_q_[i], i);
    check_profile(sigma_p_[i], i);
  }
}

std::size_t steps_for(double T, double dt) {
  if (!(T > 0.0)) throw ModelError("integration horizon T must be positive");
  if (!(dt > 0.0)) throw ModelError("time step dt must be positive");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(T / dt)));
}

namespace {

constexpr double kBlowUp = 1e6;

class Stepper {
 public:
  Stepper(const HamiltonianModel& model, Scheme scheme, double dt)
      : model_(model), scheme_(scheme), dt_(dt) {
    if (scheme_ == Scheme::splitting && !model_.separable()) {
      lambda_ = model_.rotation_frequencies();
      if (!lambda_.empty()) {
        require_same_sites(lambda_.size(), model_.sites(), "rotation_frequencies");
        cos_half_.resize(lambda_.size());
        sin_half_.resize(lambda_.size());
        for (std::size_t i = 0; i < lambda_.size(); ++i) {
          cos_half_[i] = std::cos(0.5 * dt_ * lambda_[i]);
          sin_half_[i] = std::sin(0.5 * dt_ * lambda_[i]);
        }
      }
    }
  }

  // Deterministic part of one step, in place. q is left unwrapped.
  void advance(LatticeState& x, long step) {
    if (scheme_ == Scheme::euler_maruyama) {
      model_.gradient(x, g_);
      for (std::size_t i = 0; i < x.size(); ++i) {
        x.q[i] += dt_ * g_.dp[i];
        x.p[i] -= dt_ * g_.dq[i];
      }
    } else if (model_.separable()) {
      leapfrog(x);
    } else if (!lambda_.empty()) {
      rotate_half(x);
      implicit_midpoint(x, step, true);
      rotate_half(x);
    } else {
      implicit_midpoint(x, step, false);
    }
  }

 private:
  void leapfrog(LatticeState& x) {
    model_.gradient(x, g_);
    for (std::size_t i = 0; i < x.size(); ++i) x.p[i] -= 0.5 * dt_ * g_.dq[i];
    model_.gradient(x, g_);
    for (std::size_t i = 0; i < x.size(); ++i) x.q[i] += dt_ * g_.dp[i];
    model_.gradient(x, g_);
    for (std::size_t i = 0; i < x.size(); ++i) x.p[i] -= 0.5 * dt_ * g_.dq[i];
  }

  // Exact flow of sum lambda (q^2 + p^2)/2 over dt/2: dq/dt = lambda p, dp/dt = -lambda q.
  void rotate_half(LatticeState& x) const {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double q = x.q[i];
      const double p = x.p[i];
      x.q[i] = cos_half_[i] * q + sin_half_[i] * p;
      x.p[i] = -sin_half_[i] * q + cos_half_[i] * p;
    }
  }

  void implicit_midpoint(LatticeState& x, long step, bool remainder_only) {
    next_ = x;
    mid_ = x;
    for (int iter = 0; iter < 200; ++iter) {
      for (std::size_t i = 0; i < x.size(); ++i) {
        mid_.q[i] = 0.5 * (x.q[i] + next_.q[i]);
        mid_.p[i] = 0.5 * (x.p[i] + next_.p[i]);
      }
      if (remainder_only) {
        model_.remainder_gradient(mid_, g_);
      } else {
        model_.gradient(mid_, g_);
      }
      double change = 0.0;
      double scale = 1.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double q = x.q[i] + dt_ * g_.dp[i];
        const double p = x.p[i] - dt_ * g_.dq[i];
        change = std::max({change, std::abs(q - next_.q[i]), std::abs(p - next_.p[i])});
        scale = std::max({scale, std::abs(q), std::abs(p)});
        next_.q[i] = q;
        next_.p[i] = p;
      }
      if (!std::isfinite(change)) break;
      if (change <= 1e-15 * scale) {
        std::swap(x.q, next_.q);
        std::swap(x.p, next_.p);
        return;
      }
    }
    throw IntegrationError("implicit midpoint iteration did not converge", step);
  }

  const HamiltonianModel& model_;
  Scheme scheme_;
  double dt_;
  std::vector<double> lambda_, cos_half_, sin_half_;
  Tangent g_;
  LatticeState mid_, next_;
};

void guard(const LatticeState& x, long step) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x.q[i]) || !std::isfinite(x.p[i])) {
      throw IntegrationError("non-finite state", step);
    }
    if (std::abs(x.p[i]) > kBlowUp || (x.chart == Chart::line && std::abs(x.q[i]) > kBlowUp)) {
      throw IntegrationError("state exceeded blow-up guard 1e6 at site " + std::to_string(i),
                             step);
    }
  }
}

}  // namespace

void integrate(const HamiltonianModel& model, const NoiseModel* noise, const LatticeState& x0,
               double T, const SimConfig& cfg, const NodeVisitor& visit) {
  require_same_sites(x0.size(), model.sites(), "simulate");
  if (x0.chart != model.chart()) throw DimensionError("simulate: initial state chart mismatch");
  if (noise) require_same_sites(noise->sites(), model.sites(), "simulate noise");
  const std::size_t K = steps_for(T, cfg.dt);
  const double dt = T / static_cast<double>(K);
  const double eps = noise ? noise->epsilon() : 0.0;
  const double sqdt = std::sqrt(dt);
  const CounterNormal normals(cfg.seed);

  Stepper stepper(model, cfg.scheme, dt);
  LatticeState x = x0;
  x.canonicalize();
  guard(x, 0);
  visit(0, 0.0, x);
  for (std::size_t k = 0; k < K; ++k) {
    const double t = static_cast<double>(k) * dt;
    stepper.advance(x, static_cast<long>(k + 1));
    if (eps > 0.0) {
      for (std::size_t i = 0; i < x.size(); ++i) {
        const auto [xi, eta] = normals.pair(k, i);
        x.q[i] += eps * noise->sigma_q(i, t) * sqdt * xi;
        x.p[i] += eps * noise->sigma_p(i, t) * sqdt * eta;
      }
    }
    x.canonicalize();
    guard(x, static_cast<long>(k + 1));
    visit(k + 1, k + 1 == K ? T : t + dt, x);
  }
}

PathGrid simulate(const HamiltonianModel& model, const NoiseModel& noise, const LatticeState& x0,
                  double T, const SimConfig& cfg) {
  std::vector<LatticeState> nodes;
  nodes.reserve(steps_for(T, cfg.dt) + 1);
  integrate(model, &noise, x0, T, cfg,
            [&](std::size_t, double, const LatticeState& x) { nodes.push_back(x); });
  return {0.0, T, std::move(nodes)};
}

PathGrid simulate_deterministic(const HamiltonianModel& model, const LatticeState& x0, double T,
                                const SimConfig& cfg) {
  std::vector<LatticeState> nodes;
  nodes.reserve(steps_for(T, cfg.dt) + 1);
  integrate(model, nullptr, x0, T, cfg,
            [&](std::size_t, double, const LatticeState& x) { nodes.push_back(x); });
  return {0.0, T, std::move(nodes)};
}

double girsanov_log_weight(const PathGrid& path, const HamiltonianModel& model,
                           const NoiseModel& noise, const PathGrid& reference) {
  const double eps = noise.epsilon();
  if (!(eps > 0.0)) throw DegenerateMeasureError("girsanov_weight: epsilon must be positive");
  if (path.steps() != reference.steps() || path.t0() != reference.t0() ||
      path.t1() != reference.t1()) {
    throw DimensionError("girsanov_weight: path and reference grids differ");
  }
  require_same_sites(path.sites(), reference.sites(), "girsanov_weight");
  require_same_sites(path.sites(), model.sites(), "girsanov_weight");
  require_same_sites(path.sites(), noise.sites(), "girsanov_weight");

  const double dt = path.dt();
  const double sqdt = std::sqrt(dt);
  Tangent g;
  double exponent = 0.0;
  for (std::size_t k = 0; k < path.steps(); ++k) {
    const double t = path.time(k);
    const LatticeState& x = path.node(k);
    model.gradient(x, g);
    const Tangent dx = difference(path.node(k + 1), x);
    const Tangent dref = difference(reference.node(k + 1), reference.node(k));
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double sq = eps * noise.sigma_q(i, t);
      const double sp = eps * noise.sigma_p(i, t);
      // drift: (dH/dp, -dH/dq)
      const double dw_q = (dx.dq[i] - g.dp[i] * dt) / (sq * sqdt);
      const double dw_p = (dx.dp[i] + g.dq[i] * dt) / (sp * sqdt);
      const double th_q = (g.dp[i] - dref.dq[i] / dt) / sq;
      const double th_p = (-g.dq[i] - dref.dp[i] / dt) / sp;
      exponent += (th_q * dw_q + th_p * dw_p) * sqdt - 0.5 * (th_q * th_q + th_p * th_p) * dt;
    }
  }
  return exponent;
}

double girsanov_weight(const PathGrid& path, const HamiltonianModel& model,
                       const NoiseModel& noise, const PathGrid& reference) {
  return std::exp(girsanov_log_weight(path, model, noise, reference));
}

}  // namespace omkam
