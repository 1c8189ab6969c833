#pragma once

#include <cstddef>

#include "omkam/hamiltonian.hpp"
#include "omkam/lattice.hpp"
#include "omkam/sde.hpp"

namespace omkam {

// Discretized Onsager-Machlup action. On segment k the velocity is the forward
// difference (x_{k+1} - x_k)/dt and the vector field is evaluated at the
// midpoint state, with sigma at the segment midpoint time:
//   q_term = sum_k dt || sigma_q^{-1} (v_q - dH/dp(m_k)) ||_rho^2
//   p_term = sum_k dt || sigma_p^{-1} (v_p + dH/dq(m_k)) ||_rho^2
// There is no 1/2 prefactor; the rate function is total / 2. Epsilon is never
// read.
struct ActionReport {
  double total = 0.0;
  double q_term = 0.0;
  double p_term = 0.0;
  double el_residual = 0.0;

  bool operator==(const ActionReport&) const = default;
};

ActionReport om_action(const PathGrid& path, const HamiltonianModel& model,
                       const NoiseModel& noise, const WeightSequence& w);

// Gradient of the discrete action with respect to every node coordinate
// (angles differentiated through their local lift).
struct PathGradient {
  std::vector<Tangent> nodes;
};

PathGradient om_gradient(const PathGrid& path, const HamiltonianModel& model,
                         const NoiseModel& noise, const WeightSequence& w);

// sum_k dt ( ||v_q - dH/dp(m_k)||_rho + ||v_p + dH/dq(m_k)||_rho ). Zero exactly
// when the nodes follow the implicit midpoint discretization of the
// deterministic Hamiltonian flow.
double euler_lagrange_residual(const PathGrid& path, const HamiltonianModel& model,
                               const WeightSequence& w);

enum class Constraint { fixed_start, fixed_both_endpoints };

struct MinimizeConfig {
  std::size_t max_iters = 5000;
  // Stop when the gradient, measured in the dual L^2_rho path metric
  // sqrt(sum_k sum_i g_ki^2 / (rho_i^2 dt)), drops below this.
  double grad_tol = 1e-6;
  std::size_t memory = 12;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  Constraint constraint = Constraint::fixed_start;
};

struct MinimizeResult {
  PathGrid path;
  ActionReport report;
  std::size_t iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
};

MinimizeResult minimize_action(const PathGrid& initial, const HamiltonianModel& model,
                               const NoiseModel& noise, const WeightSequence& w,
                               const MinimizeConfig& cfg);

// Dual-metric norm used by the stopping rule, with the constrained nodes
// excluded.
double path_gradient_norm(const PathGradient& g, const WeightSequence& w, double dt,
                          Constraint constraint);

}  // namespace omkam
