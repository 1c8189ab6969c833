#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "omkam/lattice.hpp"
#include "omkam/sde.hpp"

namespace omkam {

using ScalarFn = std::function<double(double)>;

// Karhunen-Loeve pairs of X(t) = int_0^t sigma dW on a uniform grid, obtained
// by Nystrom discretization (trapezoid weights) of the covariance operator.
struct KLBasis {
  std::vector<double> grid;
  std::vector<double> weights;       // trapezoid quadrature weights on grid
  std::vector<double> eigenvalues;   // lambda_j^2, descending
  std::vector<std::vector<double>> eigenfunctions;  // orthonormal under `weights`
};

// Kernel K(s,t) = int_0^{min(s,t)} sigma^2(u) du on n grid points over [0, T];
// the top k pairs are returned.
KLBasis kl_expand(const ScalarFn& sigma, double T, std::size_t n, std::size_t k);

// Same eigensolve for an explicitly given cumulative variance C(t_i) on the
// grid, K(t_i, t_j) = C(t_min(i,j)). All n pairs are returned when k == 0.
KLBasis kl_from_cumulative(std::vector<double> grid, const std::vector<double>& cumulative,
                           std::size_t k);

// int_0^T K(t,t) dt under the basis' own quadrature.
double kl_trace(const KLBasis& basis, const std::vector<double>& cumulative);

struct Lambda1Options {
  double half_width = 0.0;  // 0: chosen so that R^p >= 50 * lambda
  std::size_t mesh = 4096;
};

// Ground-state energy of -1/2 phi'' + |x|^p phi on the line, by a Dirichlet
// finite-difference eigensolve on [-R, R] with Richardson extrapolation in h.
double lambda1(double p, const Lambda1Options& opts = {});

struct SmallBallReport {
  double kappa_p = 0.0;
  double lambda1_p = 0.0;
  double limit_constant = 0.0;  // lim eps^2 ln P(||X||_p <= eps)
};

double kappa(double p);

// Gaussian Markov process with covariance G(min(s,t)) H(max(s,t)) on [0,1].
// Derivatives are taken by central differences; G/H must be strictly
// increasing on (0,1).
SmallBallReport small_ball_constant(const ScalarFn& G, const ScalarFn& H, double p);

// Z(t) = int_0^t f dB on [0, T]: -kappa_p (int |f|^{2p/(2+p)})^{(2+p)/p}.
SmallBallReport small_ball_constant_f(const ScalarFn& f, double p, double T = 1.0);

// Lower bound -kappa_2 C_rho^2 M^2 for the l^2_rho-valued noise path.
double small_ball_bound_rho(const NoiseModel& noise, const WeightSequence& w);

// P(c + sum_j w_j (Z_j + b_j)^2 <= x) for independent standard normals Z_j,
// by numerical inversion of the characteristic function (Imhof).
double quadratic_form_cdf(const std::vector<double>& w, const std::vector<double>& b, double c,
                          double x);

}  // namespace omkam
