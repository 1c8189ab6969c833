#pragma once

// Cubic NLS on (0, pi) with Dirichlet data, in the sine basis
// phi_j = sqrt(2/pi) sin(j x). A mode q_j = x_j + i y_j is stored as site
// j-1 of a line-chart LatticeState with q = x, p = y, and
//   H = 1/2 sum_j lambda_j (x_j^2 + y_j^2) + 1/4 int |u|^4,  lambda_j = j^2 + m.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "omkam/hamiltonian.hpp"
#include "omkam/lattice.hpp"
#include "omkam/om.hpp"
#include "omkam/sde.hpp"

namespace omkam {

struct NlsModel {
  double m = 1.0;
  std::size_t modes = 32;
  double a = 0.1;
  double p_w = 1.0;

  void validate() const;
};

enum class NlsTruncation { linear, normal_form, full };

NlsTruncation parse_truncation(const std::string& s);
std::string to_string(NlsTruncation t);

double nls_eigenvalue(int j, double m);
double nls_eigenfunction(int j, double x);

struct EigenPair {
  std::vector<double> grid;
  std::vector<double> phi;
  double lambda = 0.0;
};

// phi_j sampled on n uniform interior midpoints of (0, pi).
EigenPair eigen_pair(int j, double m, std::size_t n = 2048);

// True when some choice of signs gives i +- j +- k +- l = 0.
bool selection_rule_allows(int i, int j, int k, int l);
// int_0^pi phi_i phi_j phi_k phi_l dx by composite Gauss-Legendre.
double g_quadrature(int i, int j, int k, int l);
// Same value, returning exactly 0 when the selection rule forbids it.
double g_coefficient(int i, int j, int k, int l);
// (4 - delta_ij) / (4 pi).
double birkhoff_gbar(int i, int j);

struct NormalForm {
  std::vector<int> tangential;  // J, ascending
  std::vector<int> normal;      // modes outside J up to the cutoff, ascending
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  Eigen::MatrixXd A;  // n x n
  Eigen::MatrixXd B;  // (#normal) x n
  double m = 0.0;

  Eigen::VectorXd omega(const Eigen::VectorXd& I) const { return alpha + A * I; }
  Eigen::VectorXd Omega(const Eigen::VectorXd& I) const { return beta + B * I; }
  // sum_j lambda_j I_j + 2 sum_{i,j in J} Gbar_ij I_i I_j on the torus (normal
  // actions zero).
  double energy(const Eigen::VectorXd& I) const;
};

NormalForm normal_form(const NlsModel& nls, std::vector<int> J, int cutoff);

struct NondegeneracyReport {
  double abs_det_A = 0.0;
  double min_l_beta = 0.0;
  double min_divisor = 0.0;
  bool det_ok = false;
  bool beta_ok = false;
  bool divisor_ok = false;
  std::vector<std::string> violations;

  bool ok() const { return det_ok && beta_ok && divisor_ok; }
};

struct NondegeneracyOptions {
  int k_max = 3;             // |k|_inf bound for the sampled divisors
  std::size_t samples = 64;  // action samples in [0, I_max]^n
  double I_max = 1.0;
  double tol = 1e-12;
  std::uint64_t seed = 1;
};

NondegeneracyReport check_nondegeneracy(const NormalForm& nf, int l_max = 2,
                                        const NondegeneracyOptions& opts = {});

// Mode Hamiltonian as a HamiltonianModel on `modes` line-chart sites.
class NlsModesModel final : public HamiltonianModel {
 public:
  NlsModesModel(const NlsModel& nls, NlsTruncation truncation);

  std::string name() const override { return "nls_modes"; }
  std::size_t sites() const override { return nls_.modes; }
  Chart chart() const override { return Chart::line; }
  double energy(const LatticeState& x) const override;
  void gradient(const LatticeState& x, Tangent& out) const override;
  void hessian_apply(const LatticeState& x, const Tangent& v, Tangent& out) const override;
  std::vector<double> rotation_frequencies() const override { return lambda_; }
  void remainder_gradient(const LatticeState& x, Tangent& out) const override;

  const NlsModel& params() const { return nls_; }
  NlsTruncation truncation() const { return truncation_; }
  // Quartic part alone.
  double quartic(const LatticeState& x) const;

 private:
  // Field u = sum_j q_j phi_j on the midpoint grid (real and imaginary parts).
  void field(const LatticeState& x, std::vector<double>& ur, std::vector<double>& ui) const;

  NlsModel nls_;
  NlsTruncation truncation_;
  std::vector<double> lambda_;
  Eigen::MatrixXd gbar_;
  std::size_t grid_ = 0;
  std::vector<double> basis_;  // grid_ x modes, phi_j(x_m)
  double cell_ = 0.0;
};

// rho_j = j^{p_w} exp(a j) for j = 1..modes.
WeightSequence nls_weights(const NlsModel& nls);

// Per-mode noise: sigma_q is the real-part (sigma^R) profile, sigma_p the
// imaginary-part (sigma^I) profile.
NoiseModel nls_noise(const NlsModel& nls, double sigma_r, double sigma_i, double epsilon);

LatticeState mode_state(const std::vector<double>& x, const std::vector<double>& y);

PathGrid simulate_snls(const NlsModel& nls, NlsTruncation truncation, const NoiseModel& noise,
                       const LatticeState& u0, double T, const SimConfig& cfg);
PathGrid mpp_nls(const NlsModel& nls, NlsTruncation truncation, const LatticeState& u0, double T,
                 const SimConfig& cfg);

// 1/2 om_action under the l^{a,p} mode weights; +infinity when psi(0) != u0.
double nls_rate_function(const PathGrid& psi, const NlsModel& nls, NlsTruncation truncation,
                         const NoiseModel& noise, const LatticeState& u0);

struct TorusSpec {
  std::vector<int> J;
  std::vector<double> I;

  void validate(std::size_t modes) const;
  // State on the torus with all angles zero (x_j = sqrt(2 I_j), y_j = 0).
  LatticeState point(std::size_t modes) const;
};

struct TorusDeviation {
  std::vector<double> action_dev;
  std::vector<double> normal_energy;
};

double mode_action(const LatticeState& x, int j);
TorusDeviation torus_deviation(const PathGrid& path, const TorusSpec& torus, const NlsModel& nls);

}  // namespace omkam
