#include "omkam/gauss.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "omkam/errors.hpp"

namespace omkam {

namespace {

std::vector<double> uniform_grid(double T, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = T * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

std::vector<double> trapezoid_weights(const std::vector<double>& grid) {
  const std::size_t n = grid.size();
  std::vector<double> w(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = grid[i + 1] - grid[i];
    w[i] += 0.5 * h;
    w[i + 1] += 0.5 * h;
  }
  return w;
}

// Number of eigenvalues of the symmetric tridiagonal (diag, off) below x.
std::size_t sturm_count(const std::vector<double>& diag, double off, double x) {
  std::size_t count = 0;
  double d = 1.0;
  const double off2 = off * off;
  for (std::size_t i = 0; i < diag.size(); ++i) {
    d = diag[i] - x - (i == 0 ? 0.0 : off2 / d);
    if (d == 0.0) d = -1e-300;
    if (d < 0.0) ++count;
  }
  return count;
}

double lowest_fd_eigenvalue(double p, double R, std::size_t mesh) {
  const double h = 2.0 * R / static_cast<double>(mesh);
  std::vector<double> diag(mesh - 1);
  double hi = 0.0;
  for (std::size_t i = 0; i + 1 < mesh; ++i) {
    const double x = -R + h * static_cast<double>(i + 1);
    diag[i] = 1.0 / (h * h) + std::pow(std::abs(x), p);
    hi = std::max(hi, diag[i]);
  }
  const double off = -0.5 / (h * h);
  double lo = 0.0;
  hi += 1.0 / (h * h);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (sturm_count(diag, off, mid) >= 1) hi = mid; else lo = mid;
  }
  return 0.5 * (lo + hi);
}

double central_derivative(const ScalarFn& f, double t) {
  const double h = 1e-6;
  return (f(t + h) - f(t - h)) / (2.0 * h);
}

}  // namespace

KLBasis kl_from_cumulative(std::vector<double> grid, const std::vector<double>& cumulative,
                           std::size_t k) {
  const std::size_t n = grid.size();
  if (n < 2 || cumulative.size() != n) throw DimensionError("kl grid and cumulative variance sizes differ");
  if (k > n) throw ResolutionError("kl asks for more modes than grid points");
  KLBasis basis;
  basis.weights = trapezoid_weights(grid);
  Eigen::VectorXd sw(n);
  for (std::size_t i = 0; i < n; ++i) sw(i) = std::sqrt(basis.weights[i]);
  Eigen::MatrixXd A(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) A(i, j) = sw(i) * cumulative[std::min(i, j)] * sw(j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success) throw ResolutionError("kl eigensolve failed");
  const std::size_t keep = k == 0 ? n : std::min(k, n);
  for (std::size_t r = 0; r < keep; ++r) {
    const Eigen::Index col = static_cast<Eigen::Index>(n - 1 - r);
    basis.eigenvalues.push_back(std::max(0.0, es.eigenvalues()(col)));
    std::vector<double> e(n, 0.0);
    double sign = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      // Recover the function values; the t = 0 node carries zero weight and
      // zero variance, so its value is 0.
      e[i] = sw(i) > 0.0 ? es.eigenvectors()(static_cast<Eigen::Index>(i), col) / sw(i) : 0.0;
      if (sign == 0.0 && std::abs(e[i]) > 1e-12) sign = e[i] > 0 ? 1.0 : -1.0;
    }
    for (double& v : e) v *= sign == 0.0 ? 1.0 : sign;
    basis.eigenfunctions.push_back(std::move(e));
  }
  basis.grid = std::move(grid);
  return basis;
}

KLBasis kl_expand(const ScalarFn& sigma, double T, std::size_t n, std::size_t k) {
  if (!(T > 0.0) || n < 2) throw ResolutionError("kl_expand needs T > 0 and at least two grid points");
  auto grid = uniform_grid(T, n);
  std::vector<double> cum(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    auto s2 = [&](double u) { const double s = sigma(u); return s * s; };
    cum[i] = cum[i - 1] + boost::math::quadrature::gauss<double, 20>::integrate(s2, grid[i - 1], grid[i]);
  }
  return kl_from_cumulative(std::move(grid), cum, k);
}

double kl_trace(const KLBasis& basis, const std::vector<double>& cumulative) {
  double s = 0.0;
  for (std::size_t i = 0; i < basis.grid.size(); ++i) s += basis.weights[i] * cumulative[i];
  return s;
}

double lambda1(double p, const Lambda1Options& opts) {
  if (!(p > 0.0) || !std::isfinite(p)) throw ModelError("lambda1 needs p > 0");
  if (opts.mesh < 16) throw ResolutionError("lambda1 mesh too coarse");
  double R = opts.half_width;
  if (R <= 0.0) {
    // Rough WKB scale for the ground state, then widen until the potential
    // dominates it fifty times over.
    const double coarse = lowest_fd_eigenvalue(p, std::max(4.0, std::pow(50.0, 1.0 / p)), 1024);
    R = std::max(std::pow(50.0 * coarse, 1.0 / p), 3.0);
  }
  const double coarse = lowest_fd_eigenvalue(p, R, opts.mesh);
  const double fine = lowest_fd_eigenvalue(p, R, 2 * opts.mesh);
  // Second-order central differences: error ~ h^2.
  return (4.0 * fine - coarse) / 3.0;
}

double kappa(double p) {
  const double l = lambda1(p);
  return std::pow(2.0, 2.0 / p) * p * std::pow(l / (2.0 + p), (2.0 + p) / p);
}

SmallBallReport small_ball_constant(const ScalarFn& G, const ScalarFn& H, double p) {
  if (!(p >= 1.0)) throw ModelError("small_ball_constant needs p >= 1");
  const std::size_t probes = 1000;
  double prev = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < probes; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(probes);
    const double h = H(t);
    if (!(h > 0.0)) throw InvalidFactorizationError("H must be positive on (0,1)");
    const double r = G(t) / h;
    if (!(r > prev)) throw InvalidFactorizationError("G/H is not strictly increasing on (0,1)");
    prev = r;
  }
  const double e = p / (2.0 + p);
  auto integrand = [&](double t) {
    const double wr = central_derivative(G, t) * H(t) - central_derivative(H, t) * G(t);
    return std::pow(std::max(wr, 0.0), e);
  };
  const double I = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 1e-7, 1.0 - 1e-7, 12, 1e-12);
  SmallBallReport r;
  r.lambda1_p = lambda1(p);
  r.kappa_p = kappa(p);
  r.limit_constant = -r.kappa_p * std::pow(I, (2.0 + p) / p);
  return r;
}

SmallBallReport small_ball_constant_f(const ScalarFn& f, double p, double T) {
  if (!(p >= 1.0)) throw ModelError("small_ball_constant_f needs p >= 1");
  const double e = 2.0 * p / (2.0 + p);
  auto integrand = [&](double t) { return std::pow(std::abs(f(t)), e); };
  const double I = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, T, 12, 1e-12);
  SmallBallReport r;
  r.lambda1_p = lambda1(p);
  r.kappa_p = kappa(p);
  r.limit_constant = -r.kappa_p * std::pow(I, (2.0 + p) / p);
  return r;
}

double small_ball_bound_rho(const NoiseModel& noise, const WeightSequence& w) {
  if (noise.sites() != w.size()) throw DimensionError("noise and weight sizes differ");
  const double M = noise.upper();
  return -kappa(2.0) * w.c_rho() * w.c_rho() * M * M;
}

double quadratic_form_cdf(const std::vector<double>& w, const std::vector<double>& b, double c,
                          double x) {
  if (w.size() != b.size()) throw DimensionError("quadratic form weights and shifts differ in size");
  const double y = x - c;
  if (y <= 0.0) return 0.0;
  std::vector<double> lw, nc;
  double scale = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (w[j] < 0.0) throw ModelError("quadratic form weights must be nonnegative");
    if (w[j] > 0.0) { lw.push_back(w[j]); nc.push_back(b[j] * b[j]); scale = std::max(scale, w[j]); }
  }
  if (lw.empty()) return 1.0;
  // Work in units of the largest weight so u is O(1).
  for (double& v : lw) v /= scale;
  const double xs = y / scale;
  // Chernoff bound at s = 1/4: when the upper tail is negligible, skip the
  // (then wildly oscillatory) inversion.
  double log_tail = -0.25 * xs;
  for (std::size_t j = 0; j < lw.size(); ++j) {
    const double d = 1.0 - 0.5 * lw[j];
    log_tail += -0.5 * std::log(d) + 0.25 * lw[j] * nc[j] / d;
  }
  if (log_tail < std::log(1e-16)) return 1.0;
  auto integrand = [&](double u) {
    if (u <= 0.0) {
      double s = 0.0;
      for (std::size_t j = 0; j < lw.size(); ++j) s += lw[j] * (1.0 + nc[j]);
      return 0.5 * (s - xs);
    }
    double theta = -0.5 * xs * u;
    double log_rho = 0.0;
    for (std::size_t j = 0; j < lw.size(); ++j) {
      const double lu = lw[j] * u;
      const double q = 1.0 + lu * lu;
      theta += 0.5 * (std::atan(lu) + nc[j] * lu / q);
      log_rho += 0.25 * std::log(q) + 0.5 * nc[j] * lu * lu / q;
    }
    return std::sin(theta) / (u * std::exp(log_rho));
  };
  // Envelope 1/(u rho(u)) of the integrand.
  auto envelope = [&](double u) {
    double log_rho = 0.0;
    for (std::size_t j = 0; j < lw.size(); ++j) {
      const double lu = lw[j] * u;
      const double q = 1.0 + lu * lu;
      log_rho += 0.25 * std::log(q) + 0.5 * nc[j] * lu * lu / q;
    }
    return 1.0 / (u * std::exp(log_rho));
  };
  // Geometric panels; stop once the remaining tail is negligible. The tail is
  // bounded both by its power-law decay and by oscillation at rate xs / 2.
  const double m = static_cast<double>(lw.size());
  double I = 0.0, lo = 0.0, hi = std::min(1.0, 4.0 / xs);
  while (true) {
    I += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, lo, hi, 15, 1e-13);
    const double e = envelope(hi);
    if (e * std::min(2.0 * hi / m, 8.0 / xs) < 1e-13 || hi > 1e12) break;
    lo = hi;
    hi *= 2.0;
  }
  const double P = 0.5 - I / std::numbers::pi;
  return std::clamp(P, 0.0, 1.0);
}

}  // namespace omkam
