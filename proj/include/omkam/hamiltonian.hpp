#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "omkam/lattice.hpp"

namespace omkam {

// H(q, p) on a finite site set with analytic gradients.
//
// Gradients are written into a caller-owned Tangent (dq = dH/dq, dp = dH/dp)
// so the integrators can reuse buffers across steps.
class HamiltonianModel {
 public:
  virtual ~HamiltonianModel() = default;

  virtual std::string name() const = 0;
  virtual std::size_t sites() const = 0;
  virtual Chart chart() const { return Chart::angle; }

  virtual double energy(const LatticeState& x) const = 0;
  virtual void gradient(const LatticeState& x, Tangent& out) const = 0;

  // Hessian of H at x applied to v. The default differentiates the analytic
  // gradient by central differences.
  virtual void hessian_apply(const LatticeState& x, const Tangent& v, Tangent& out) const;

  // True when H = T(p) + V(q) with dH/dp depending on p only and dH/dq on q only.
  virtual bool separable() const { return false; }

  // Optional split H = sum_i lambda_i (q_i^2 + p_i^2) / 2 + R(q, p) for line
  // charts. Empty when the model has no such split.
  virtual std::vector<double> rotation_frequencies() const { return {}; }
  // Gradient of R. Only meaningful when rotation_frequencies() is non-empty.
  virtual void remainder_gradient(const LatticeState& x, Tangent& out) const;

  virtual std::optional<double> lipschitz_hint() const { return std::nullopt; }

  Tangent gradient(const LatticeState& x) const;
  LatticeState zero_state() const { return LatticeState::zeros(sites(), chart()); }
};

using ModelPtr = std::shared_ptr<const HamiltonianModel>;

class FreeModel final : public HamiltonianModel {
 public:
  explicit FreeModel(std::size_t sites, Chart chart = Chart::angle) : sites_(sites), chart_(chart) {}

  std::string name() const override { return "free"; }
  std::size_t sites() const override { return sites_; }
  Chart chart() const override { return chart_; }
  double energy(const LatticeState&) const override { return 0.0; }
  void gradient(const LatticeState& x, Tangent& out) const override;
  void hessian_apply(const LatticeState& x, const Tangent& v, Tangent& out) const override;
  bool separable() const override { return true; }
  std::optional<double> lipschitz_hint() const override { return 0.0; }

 private:
  std::size_t sites_;
  Chart chart_;
};

// H = sum_i p_i^2/2 + omega_i^2 theta_i^2/2, theta_i the angle lifted to [-pi, pi].
class HarmonicLattice final : public HamiltonianModel {
 public:
  explicit HarmonicLattice(std::vector<double> omega);

  std::string name() const override { return "harmonic_lattice"; }
  std::size_t sites() const override { return omega_.size(); }
  double energy(const LatticeState& x) const override;
  void gradient(const LatticeState& x, Tangent& out) const override;
  void hessian_apply(const LatticeState& x, const Tangent& v, Tangent& out) const override;
  bool separable() const override { return true; }
  std::optional<double> lipschitz_hint() const override;

  const std::vector<double>& omega() const { return omega_; }

 private:
  std::vector<double> omega_;
};

// H = sum_i p_i^2/2 - cos q_i + kappa sum_<i,j> (1 - cos(q_i - q_j)).
class PendulumLattice final : public HamiltonianModel {
 public:
  using Bond = std::pair<std::size_t, std::size_t>;

  PendulumLattice(std::size_t sites, double kappa, std::vector<Bond> bonds);
  // Nearest-neighbour chain 0-1-2-...
  static PendulumLattice chain(std::size_t sites, double kappa);
  // Bonds between sites at l1-distance one.
  static PendulumLattice on_lattice(const WeightSequence& w, double kappa);

  std::string name() const override { return "pendulum_lattice"; }
  std::size_t sites() const override { return sites_; }
  double energy(const LatticeState& x) const override;
  void gradient(const LatticeState& x, Tangent& out) const override;
  void hessian_apply(const LatticeState& x, const Tangent& v, Tangent& out) const override;
  bool separable() const override { return true; }
  std::optional<double> lipschitz_hint() const override;

  double kappa() const { return kappa_; }
  const std::vector<Bond>& bonds() const { return bonds_; }

 private:
  std::size_t sites_;
  double kappa_;
  std::vector<Bond> bonds_;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t worst_site = 0;
  bool worst_is_q = true;
};

// Compares analytic gradients to central differences with step h. The error
// per component is |analytic - fd| / max(1, |analytic|, |fd|).
GradCheckReport grad_check(const HamiltonianModel& model, const LatticeState& x, double h);

// sum_i rho_i^2 [ d2H/dq_i dp_i - d2H/dp_i dq_i ], each mixed partial taken by
// central differences (step 1e-4) of the analytic gradient.
double symplectic_trace_defect(const HamiltonianModel& model, const LatticeState& x,
                               const WeightSequence& w);

}  // namespace omkam
