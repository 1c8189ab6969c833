#include "omkam/nls.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include "omkam/errors.hpp"
#include "omkam/random.hpp"

namespace omkam {

namespace {

constexpr double kPi = std::numbers::pi;
const double kNorm = std::sqrt(2.0 / kPi);

Eigen::MatrixXd gbar_matrix(std::size_t modes) {
  Eigen::MatrixXd G(modes, modes);
  for (std::size_t i = 0; i < modes; ++i)
    for (std::size_t j = 0; j < modes; ++j)
      G(i, j) = birkhoff_gbar(static_cast<int>(i + 1), static_cast<int>(j + 1));
  return G;
}

void enumerate_k(int n, int budget, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == n) {
    out.push_back(cur);
    return;
  }
  for (int v = -budget; v <= budget; ++v) {
    cur.push_back(v);
    enumerate_k(n, budget - std::abs(v), cur, out);
    cur.pop_back();
  }
}

// Sparse l with |l|_1 <= l_max (l_max <= 2) over `count` slots, including l = 0.
std::vector<std::vector<std::pair<std::size_t, int>>> enumerate_l(std::size_t count, int l_max) {
  std::vector<std::vector<std::pair<std::size_t, int>>> out;
  out.push_back({});
  if (l_max >= 1)
    for (std::size_t a = 0; a < count; ++a)
      for (int s : {-1, 1}) out.push_back({{a, s}});
  if (l_max >= 2)
    for (std::size_t a = 0; a < count; ++a) {
      for (int s : {-2, 2}) out.push_back({{a, s}});
      for (std::size_t b = a + 1; b < count; ++b)
        for (int s : {-1, 1})
          for (int t : {-1, 1}) out.push_back({{a, s}, {b, t}});
    }
  return out;
}

}  // namespace

void NlsModel::validate() const {
  if (modes < 1) throw ModelError("nls modes must be at least 1");
  if (!(a >= 0.0)) throw ModelError("nls weight exponent a must be nonnegative");
  if (!(p_w >= 0.5)) throw ModelError("nls weight power p_w must be at least 1/2");
  if (!std::isfinite(m)) throw ModelError("nls mass must be finite");
}

NlsTruncation parse_truncation(const std::string& s) {
  if (s == "linear") return NlsTruncation::linear;
  if (s == "normal_form") return NlsTruncation::normal_form;
  if (s == "full") return NlsTruncation::full;
  throw ModelError("unknown nls truncation '" + s + "'");
}

std::string to_string(NlsTruncation t) {
  switch (t) {
    case NlsTruncation::linear: return "linear";
    case NlsTruncation::normal_form: return "normal_form";
    case NlsTruncation::full: return "full";
  }
  return "full";
}

double nls_eigenvalue(int j, double m) {
  if (j < 1) throw ModelError("mode index must be at least 1");
  return static_cast<double>(j) * j + m;
}

double nls_eigenfunction(int j, double x) { return kNorm * std::sin(j * x); }

EigenPair eigen_pair(int j, double m, std::size_t n) {
  EigenPair e;
  e.lambda = nls_eigenvalue(j, m);
  e.grid.resize(n);
  e.phi.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    e.grid[i] = (static_cast<double>(i) + 0.5) * kPi / static_cast<double>(n);
    e.phi[i] = nls_eigenfunction(j, e.grid[i]);
  }
  return e;
}

bool selection_rule_allows(int i, int j, int k, int l) {
  for (int s1 : {-1, 1})
    for (int s2 : {-1, 1})
      for (int s3 : {-1, 1})
        if (i + s1 * j + s2 * k + s3 * l == 0) return true;
  return false;
}

double g_quadrature(int i, int j, int k, int l) {
  if (std::min({i, j, k, l}) < 1) throw ModelError("mode indices must be at least 1");
  const int panels = std::max(2, (i + j + k + l) / 4 + 1);
  const double h = kPi / panels;
  auto f = [&](double x) {
    return nls_eigenfunction(i, x) * nls_eigenfunction(j, x) * nls_eigenfunction(k, x) *
           nls_eigenfunction(l, x);
  };
  double s = 0.0;
  for (int p = 0; p < panels; ++p)
    s += boost::math::quadrature::gauss<double, 30>::integrate(f, p * h, (p + 1) * h);
  return s;
}

double g_coefficient(int i, int j, int k, int l) {
  if (std::min({i, j, k, l}) < 1) throw ModelError("mode indices must be at least 1");
  if (!selection_rule_allows(i, j, k, l)) return 0.0;
  return g_quadrature(i, j, k, l);
}

double birkhoff_gbar(int i, int j) {
  if (i < 1 || j < 1) throw ModelError("mode indices must be at least 1");
  return (4.0 - (i == j ? 1.0 : 0.0)) / (4.0 * kPi);
}

double NormalForm::energy(const Eigen::VectorXd& I) const { return alpha.dot(I) + 0.5 * I.dot(A * I); }

NormalForm normal_form(const NlsModel& nls, std::vector<int> J, int cutoff) {
  if (J.empty()) throw ModelError("tangential set J is empty");
  std::sort(J.begin(), J.end());
  if (std::adjacent_find(J.begin(), J.end()) != J.end()) throw ModelError("tangential set J has repeats");
  if (J.front() < 1 || J.back() > cutoff) throw ModelError("tangential set J must lie in [1, cutoff]");
  NormalForm nf;
  nf.m = nls.m;
  nf.tangential = J;
  const std::set<int> in_J(J.begin(), J.end());
  for (int j = 1; j <= cutoff; ++j)
    if (!in_J.count(j)) nf.normal.push_back(j);
  const auto n = static_cast<Eigen::Index>(J.size());
  const auto r = static_cast<Eigen::Index>(nf.normal.size());
  nf.alpha.resize(n);
  nf.beta.resize(r);
  nf.A.resize(n, n);
  nf.B.resize(r, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    nf.alpha(a) = nls_eigenvalue(J[a], nls.m);
    for (Eigen::Index b = 0; b < n; ++b) nf.A(a, b) = 4.0 * birkhoff_gbar(J[a], J[b]);
  }
  for (Eigen::Index a = 0; a < r; ++a) {
    nf.beta(a) = nls_eigenvalue(nf.normal[a], nls.m);
    for (Eigen::Index b = 0; b < n; ++b) nf.B(a, b) = 4.0 * birkhoff_gbar(nf.normal[a], J[b]);
  }
  return nf;
}

NondegeneracyReport check_nondegeneracy(const NormalForm& nf, int l_max,
                                        const NondegeneracyOptions& opts) {
  if (l_max < 0 || l_max > 2) throw OutOfClassError("l_max must be 0, 1 or 2");
  NondegeneracyReport rep;
  const auto n = static_cast<int>(nf.alpha.size());
  const std::size_t r = static_cast<std::size_t>(nf.beta.size());

  rep.abs_det_A = std::abs(nf.A.determinant());
  rep.det_ok = rep.abs_det_A > opts.tol;
  if (!rep.det_ok) rep.violations.push_back("det A vanishes");

  const auto ls = enumerate_l(r, l_max);
  rep.min_l_beta = std::numeric_limits<double>::infinity();
  for (std::size_t s = 1; s < ls.size(); ++s) {
    double v = 0.0;
    for (auto [idx, c] : ls[s]) v += c * nf.beta(static_cast<Eigen::Index>(idx));
    if (std::abs(v) < rep.min_l_beta) rep.min_l_beta = std::abs(v);
    if (std::abs(v) <= opts.tol) {
      std::string what = "<l,beta> = 0 for l =";
      for (auto [idx, c] : ls[s]) what += " " + std::to_string(c) + "*e" + std::to_string(nf.normal[idx]);
      rep.violations.push_back(what);
    }
  }
  rep.beta_ok = rep.min_l_beta > opts.tol;

  std::vector<std::vector<int>> ks;
  std::vector<int> cur;
  enumerate_k(n, opts.k_max, cur, ks);
  CounterNormal rng(opts.seed);
  rep.min_divisor = std::numeric_limits<double>::infinity();
  Eigen::VectorXd I(n);
  for (std::size_t smp = 0; smp < std::max<std::size_t>(1, opts.samples); ++smp) {
    for (int a = 0; a < n; ++a)
      I(a) = smp == 0 ? 0.0 : opts.I_max * rng.uniform(smp, static_cast<std::uint64_t>(a));
    const Eigen::VectorXd w = nf.omega(I);
    const Eigen::VectorXd W = nf.Omega(I);
    for (const auto& k : ks) {
      double kw = 0.0;
      bool k_zero = true;
      for (int a = 0; a < n; ++a) {
        kw += k[a] * w(a);
        if (k[a] != 0) k_zero = false;
      }
      for (std::size_t s = k_zero ? 1 : 0; s < ls.size(); ++s) {
        double v = kw;
        for (auto [idx, c] : ls[s]) v += c * W(static_cast<Eigen::Index>(idx));
        rep.min_divisor = std::min(rep.min_divisor, std::abs(v));
      }
    }
  }
  rep.divisor_ok = rep.min_divisor > opts.tol;
  if (!rep.divisor_ok) rep.violations.push_back("a sampled small divisor vanishes");
  return rep;
}

NlsModesModel::NlsModesModel(const NlsModel& nls, NlsTruncation truncation)
    : nls_(nls), truncation_(truncation) {
  nls_.validate();
  for (std::size_t j = 1; j <= nls_.modes; ++j) lambda_.push_back(nls_eigenvalue(static_cast<int>(j), nls_.m));
  if (truncation_ == NlsTruncation::normal_form) gbar_ = gbar_matrix(nls_.modes);
  if (truncation_ == NlsTruncation::full) {
    // Midpoint rule with N > 2J points integrates every trig polynomial of
    // degree <= 4J on (0, pi) exactly.
    grid_ = 4 * nls_.modes;
    cell_ = kPi / static_cast<double>(grid_);
    basis_.resize(grid_ * nls_.modes);
    for (std::size_t g = 0; g < grid_; ++g) {
      const double x = (static_cast<double>(g) + 0.5) * cell_;
      for (std::size_t j = 0; j < nls_.modes; ++j)
        basis_[g * nls_.modes + j] = nls_eigenfunction(static_cast<int>(j + 1), x);
    }
  }
}

void NlsModesModel::field(const LatticeState& x, std::vector<double>& ur, std::vector<double>& ui) const {
  const std::size_t M = nls_.modes;
  ur.assign(grid_, 0.0);
  ui.assign(grid_, 0.0);
  for (std::size_t g = 0; g < grid_; ++g) {
    const double* row = &basis_[g * M];
    double sr = 0.0, si = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
      sr += x.q[j] * row[j];
      si += x.p[j] * row[j];
    }
    ur[g] = sr;
    ui[g] = si;
  }
}

double NlsModesModel::quartic(const LatticeState& x) const {
  require_same_sites(x.size(), sites(), "nls state");
  const std::size_t M = nls_.modes;
  switch (truncation_) {
    case NlsTruncation::linear: return 0.0;
    case NlsTruncation::normal_form: {
      double s = 0.0;
      for (std::size_t i = 0; i < M; ++i) {
        const double Ii = 0.5 * (x.q[i] * x.q[i] + x.p[i] * x.p[i]);
        for (std::size_t j = 0; j < M; ++j)
          s += gbar_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * Ii *
               0.5 * (x.q[j] * x.q[j] + x.p[j] * x.p[j]);
      }
      return 2.0 * s;
    }
    case NlsTruncation::full: {
      std::vector<double> ur, ui;
      field(x, ur, ui);
      double s = 0.0;
      for (std::size_t g = 0; g < grid_; ++g) {
        const double a2 = ur[g] * ur[g] + ui[g] * ui[g];
        s += a2 * a2;
      }
      return 0.25 * cell_ * s;
    }
  }
  return 0.0;
}

double NlsModesModel::energy(const LatticeState& x) const {
  require_same_sites(x.size(), sites(), "nls state");
  double s = 0.0;
  for (std::size_t j = 0; j < nls_.modes; ++j) s += 0.5 * lambda_[j] * (x.q[j] * x.q[j] + x.p[j] * x.p[j]);
  return s + quartic(x);
}

void NlsModesModel::remainder_gradient(const LatticeState& x, Tangent& out) const {
  require_same_sites(x.size(), sites(), "nls state");
  const std::size_t M = nls_.modes;
  out.dq.assign(M, 0.0);
  out.dp.assign(M, 0.0);
  switch (truncation_) {
    case NlsTruncation::linear: return;
    case NlsTruncation::normal_form: {
      for (std::size_t j = 0; j < M; ++j) {
        double c = 0.0;
        for (std::size_t k = 0; k < M; ++k)
          c += gbar_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) * 0.5 *
               (x.q[k] * x.q[k] + x.p[k] * x.p[k]);
        out.dq[j] = 4.0 * c * x.q[j];
        out.dp[j] = 4.0 * c * x.p[j];
      }
      return;
    }
    case NlsTruncation::full: {
      std::vector<double> ur, ui;
      field(x, ur, ui);
      for (std::size_t g = 0; g < grid_; ++g) {
        const double a2 = ur[g] * ur[g] + ui[g] * ui[g];
        const double fr = cell_ * a2 * ur[g];
        const double fi = cell_ * a2 * ui[g];
        const double* row = &basis_[g * M];
        for (std::size_t j = 0; j < M; ++j) {
          out.dq[j] += fr * row[j];
          out.dp[j] += fi * row[j];
        }
      }
      return;
    }
  }
}

void NlsModesModel::gradient(const LatticeState& x, Tangent& out) const {
  remainder_gradient(x, out);
  for (std::size_t j = 0; j < nls_.modes; ++j) {
    out.dq[j] += lambda_[j] * x.q[j];
    out.dp[j] += lambda_[j] * x.p[j];
  }
}

void NlsModesModel::hessian_apply(const LatticeState& x, const Tangent& v, Tangent& out) const {
  require_same_sites(x.size(), sites(), "nls state");
  const std::size_t M = nls_.modes;
  out.dq.assign(M, 0.0);
  out.dp.assign(M, 0.0);
  for (std::size_t j = 0; j < M; ++j) {
    out.dq[j] = lambda_[j] * v.dq[j];
    out.dp[j] = lambda_[j] * v.dp[j];
  }
  if (truncation_ == NlsTruncation::normal_form) {
    std::vector<double> I(M), dI(M);
    for (std::size_t k = 0; k < M; ++k) {
      I[k] = 0.5 * (x.q[k] * x.q[k] + x.p[k] * x.p[k]);
      dI[k] = x.q[k] * v.dq[k] + x.p[k] * v.dp[k];
    }
    for (std::size_t j = 0; j < M; ++j) {
      double c = 0.0, dc = 0.0;
      for (std::size_t k = 0; k < M; ++k) {
        const double g = gbar_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
        c += g * I[k];
        dc += g * dI[k];
      }
      out.dq[j] += 4.0 * (c * v.dq[j] + dc * x.q[j]);
      out.dp[j] += 4.0 * (c * v.dp[j] + dc * x.p[j]);
    }
  } else if (truncation_ == NlsTruncation::full) {
    std::vector<double> ur, ui;
    field(x, ur, ui);
    for (std::size_t g = 0; g < grid_; ++g) {
      const double* row = &basis_[g * M];
      double vr = 0.0, vi = 0.0;
      for (std::size_t j = 0; j < M; ++j) {
        vr += v.dq[j] * row[j];
        vi += v.dp[j] * row[j];
      }
      const double a2 = ur[g] * ur[g] + ui[g] * ui[g];
      const double dot = 2.0 * (ur[g] * vr + ui[g] * vi);
      const double fr = cell_ * (dot * ur[g] + a2 * vr);
      const double fi = cell_ * (dot * ui[g] + a2 * vi);
      for (std::size_t j = 0; j < M; ++j) {
        out.dq[j] += fr * row[j];
        out.dp[j] += fi * row[j];
      }
    }
  }
}

WeightSequence nls_weights(const NlsModel& nls) {
  nls.validate();
  std::vector<WeightSequence::Site> sites;
  std::vector<double> rho;
  for (std::size_t j = 1; j <= nls.modes; ++j) {
    sites.push_back({static_cast<int>(j)});
    const double jd = static_cast<double>(j);
    rho.push_back(std::pow(jd, nls.p_w) * std::exp(nls.a * jd));
  }
  return WeightSequence(std::move(sites), std::move(rho));
}

NoiseModel nls_noise(const NlsModel& nls, double sigma_r, double sigma_i, double epsilon) {
  return NoiseModel::constant(nls.modes, sigma_r, sigma_i, epsilon);
}

LatticeState mode_state(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DimensionError("mode state real and imaginary parts differ in size");
  LatticeState s;
  s.q = x;
  s.p = y;
  s.chart = Chart::line;
  return s;
}

PathGrid simulate_snls(const NlsModel& nls, NlsTruncation truncation, const NoiseModel& noise,
                       const LatticeState& u0, double T, const SimConfig& cfg) {
  NlsModesModel model(nls, truncation);
  return simulate(model, noise, u0, T, cfg);
}

PathGrid mpp_nls(const NlsModel& nls, NlsTruncation truncation, const LatticeState& u0, double T,
                 const SimConfig& cfg) {
  NlsModesModel model(nls, truncation);
  return simulate_deterministic(model, u0, T, cfg);
}

double nls_rate_function(const PathGrid& psi, const NlsModel& nls, NlsTruncation truncation,
                         const NoiseModel& noise, const LatticeState& u0) {
  require_same_sites(psi.sites(), u0.size(), "nls rate start");
  const LatticeState& s = psi.front();
  for (std::size_t j = 0; j < u0.size(); ++j)
    if (std::abs(s.q[j] - u0.q[j]) > 1e-12 || std::abs(s.p[j] - u0.p[j]) > 1e-12)
      return std::numeric_limits<double>::infinity();
  NlsModesModel model(nls, truncation);
  return 0.5 * om_action(psi, model, noise, nls_weights(nls)).total;
}

void TorusSpec::validate(std::size_t modes) const {
  if (J.empty() || J.size() != I.size()) throw ModelError("torus needs one action per tangential mode");
  for (std::size_t a = 0; a < J.size(); ++a) {
    if (J[a] < 1 || static_cast<std::size_t>(J[a]) > modes) throw DimensionError("torus mode outside the model");
    if (!(I[a] > 0.0)) throw ModelError("torus actions must be positive");
  }
}

LatticeState TorusSpec::point(std::size_t modes) const {
  validate(modes);
  LatticeState s = LatticeState::zeros(modes, Chart::line);
  for (std::size_t a = 0; a < J.size(); ++a) s.q[static_cast<std::size_t>(J[a] - 1)] = std::sqrt(2.0 * I[a]);
  return s;
}

double mode_action(const LatticeState& x, int j) {
  const auto i = static_cast<std::size_t>(j - 1);
  return 0.5 * (x.q[i] * x.q[i] + x.p[i] * x.p[i]);
}

TorusDeviation torus_deviation(const PathGrid& path, const TorusSpec& torus, const NlsModel& nls) {
  torus.validate(path.sites());
  const WeightSequence w = nls_weights(NlsModel{nls.m, path.sites(), nls.a, nls.p_w});
  std::vector<bool> tangential(path.sites(), false);
  for (int j : torus.J) tangential[static_cast<std::size_t>(j - 1)] = true;
  TorusDeviation dev;
  for (const auto& x : path.nodes()) {
    double ad = 0.0;
    for (std::size_t a = 0; a < torus.J.size(); ++a)
      ad = std::max(ad, std::abs(mode_action(x, torus.J[a]) - torus.I[a]));
    double ne = 0.0;
    for (std::size_t j = 0; j < path.sites(); ++j)
      if (!tangential[j]) ne += w.rho(j) * w.rho(j) * (x.q[j] * x.q[j] + x.p[j] * x.p[j]);
    dev.action_dev.push_back(ad);
    dev.normal_energy.push_back(ne);
  }
  return dev;
}

}  // namespace omkam
