#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "omkam/hamiltonian.hpp"
#include "omkam/lattice.hpp"

namespace omkam {

// sigma(t) = base * (1 + amplitude * sin(angular_frequency * t + phase)).
// Continuous in t and bounded by base * (1 +- |amplitude|).
struct NoiseProfile {
  double base = 1.0;
  double amplitude = 0.0;
  double angular_frequency = 0.0;
  double phase = 0.0;

  double operator()(double t) const;
  double lower() const;
  double upper() const;
};

class NoiseModel {
 public:
  NoiseModel(std::vector<NoiseProfile> sigma_q, std::vector<NoiseProfile> sigma_p, double epsilon);

  static NoiseModel constant(std::size_t sites, double sigma_q, double sigma_p, double epsilon);

  std::size_t sites() const { return sigma_q_.size(); }
  double epsilon() const { return epsilon_; }
  NoiseModel with_epsilon(double epsilon) const;
  // Multiplies every profile by `factor`.
  NoiseModel scaled(double factor) const;

  double sigma_q(std::size_t i, double t) const { return sigma_q_[i](t); }
  double sigma_p(std::size_t i, double t) const { return sigma_p_[i](t); }
  const std::vector<NoiseProfile>& profiles_q() const { return sigma_q_; }
  const std::vector<NoiseProfile>& profiles_p() const { return sigma_p_; }

  // Ellipticity bounds m <= sigma(t) <= M over all sites.
  double lower() const;
  double upper() const;

  // Checks m <= sigma(t_k) <= M on the grid and that consecutive samples move
  // by at most max_step_jump. Throws ModelError on violation.
  void validate_on_grid(double t0, double t1, std::size_t steps, double max_step_jump = 0.5) const;

 private:
  std::vector<NoiseProfile> sigma_q_;
  std::vector<NoiseProfile> sigma_p_;
  double epsilon_;
};

enum class Scheme { euler_maruyama, splitting };

struct SimConfig {
  double dt = 1e-3;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::euler_maruyama;
};

// Number of steps used for horizon T at the requested dt (dt is then adjusted
// to T / steps).
std::size_t steps_for(double T, double dt);

// Called on every node, including the initial one, in time order.
using NodeVisitor = std::function<void(std::size_t k, double t, const LatticeState& x)>;

// Streams one trajectory of the SDE to `visit` without storing it.
void integrate(const HamiltonianModel& model, const NoiseModel* noise, const LatticeState& x0,
               double T, const SimConfig& cfg, const NodeVisitor& visit);

PathGrid simulate(const HamiltonianModel& model, const NoiseModel& noise, const LatticeState& x0,
                  double T, const SimConfig& cfg);

// epsilon = 0 flow. Under Scheme::splitting: leapfrog for separable models,
// exact rotation + implicit midpoint for models with a rotation split, and the
// implicit midpoint rule otherwise.
PathGrid simulate_deterministic(const HamiltonianModel& model, const LatticeState& x0, double T,
                                const SimConfig& cfg);

// log of the discretized Radon-Nikodym weight. Brownian increments are
// recovered from the path under the Euler-Maruyama update; the integrand is
// sigma^{-1}(drift(x_k) - reference velocity) / epsilon at the left endpoint.
double girsanov_log_weight(const PathGrid& path, const HamiltonianModel& model,
                           const NoiseModel& noise, const PathGrid& reference);
double girsanov_weight(const PathGrid& path, const HamiltonianModel& model,
                       const NoiseModel& noise, const PathGrid& reference);

}  // namespace omkam
