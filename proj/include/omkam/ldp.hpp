#pragma once

#include <cstdint>
#include <vector>

#include "omkam/hamiltonian.hpp"
#include "omkam/lattice.hpp"
#include "omkam/sde.hpp"

namespace omkam {

// J(psi) = om_action(psi).total / 2, or +infinity when psi(0) != x0.
double rate_function(const PathGrid& psi, const HamiltonianModel& model, const NoiseModel& noise,
                     const WeightSequence& w, const LatticeState& x0);

// Tube {phi : ||phi - center||_{L^2([t0,t1], l^2_rho)} <= radius}.
struct TubeSpec {
  PathGrid center;
  double radius = 0.0;

  void validate() const;
};

struct TubeEstimate {
  std::size_t hits = 0;
  std::size_t samples = 0;
  double p_hat = 0.0;
  double ci_low = 0.0;   // 95% Wilson score interval
  double ci_high = 0.0;
  bool low_confidence = false;  // no hits: the interval is one-sided
};

TubeEstimate wilson_estimate(std::size_t hits, std::size_t samples);

struct McConfig {
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  unsigned workers = 0;  // 0: hardware concurrency
  Scheme scheme = Scheme::euler_maruyama;
};

// Fraction of simulated paths from x0 (time step and horizon taken from the
// tube center's grid) that stay in the tube. Path j uses seed
// derive_seed(cfg.seed, j), so the estimate does not depend on worker count.
TubeEstimate tube_probability_mc(const HamiltonianModel& model, const NoiseModel& noise,
                                 const TubeSpec& tube, double eps, const WeightSequence& w,
                                 const LatticeState& x0, const McConfig& cfg);

// Exact tube probability for the free model (X - x0 = eps W^sigma) under the
// same Euler-Maruyama grid and trapezoid path norm the Monte Carlo uses: the
// squared distance is a weighted noncentral chi-square in the per-site KL
// coordinates, inverted with Imhof's formula.
double gaussian_oracle_tube_prob(const HamiltonianModel& model, const NoiseModel& noise,
                                 const TubeSpec& tube, double eps, const WeightSequence& w,
                                 const LatticeState& x0);

// The same chi-square law sampled directly in KL coordinates.
TubeEstimate gaussian_diagonal_mc(const HamiltonianModel& model, const NoiseModel& noise,
                                  const TubeSpec& tube, double eps, const WeightSequence& w,
                                  const LatticeState& x0, const McConfig& cfg);

struct LdpLevel {
  double eps = 0.0;
  TubeEstimate estimate;
  double eps2_ln_p = 0.0;       // -inf when there are no hits
  double eps2_ln_ci_low = 0.0;
  double eps2_ln_ci_high = 0.0;
};

struct LdpEstimate {
  std::vector<LdpLevel> levels;  // descending eps
};

LdpLevel make_level(double eps, const TubeEstimate& est);

LdpEstimate run_ldp_ladder(const HamiltonianModel& model, const NoiseModel& noise,
                           const TubeSpec& tube, std::vector<double> eps_ladder,
                           const WeightSequence& w, const LatticeState& x0, const McConfig& cfg);

struct AffineFit {
  double intercept = 0.0;
  double slope = 0.0;
  std::vector<double> residuals;
};

// Least squares y = intercept + slope * x.
AffineFit fit_affine(const std::vector<double>& x, const std::vector<double>& y);

struct LdpFit {
  double fitted_neg_rate = 0.0;  // eps^2 ln P extrapolated to eps = 0
  double rate_inf_bound = 0.0;   // J(center), an upper bound for inf over the tube
  double rel_gap = 0.0;          // |fitted + J| / J, or |fitted| when J = 0
  std::vector<double> used_eps;
  std::vector<double> residuals;
};

// Needs at least three levels with hits; throws InsufficientDataError otherwise.
LdpFit ldp_scaling_fit(const LdpEstimate& estimates, const TubeSpec& tube,
                       const HamiltonianModel& model, const NoiseModel& noise,
                       const WeightSequence& w, const LatticeState& x0);

struct TubeInfimum {
  PathGrid path;
  double rate = 0.0;
  std::size_t iterations = 0;
};

// Projected gradient descent of J over the tube with psi(0) pinned to x0.
TubeInfimum tube_rate_infimum(const TubeSpec& tube, const HamiltonianModel& model,
                              const NoiseModel& noise, const WeightSequence& w,
                              std::size_t max_iters = 500);

}  // namespace omkam
