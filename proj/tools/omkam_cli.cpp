// omkam: command-line front end. Every subcommand reads one JSON config,
// writes its CSV/JSON payloads into the output directory and always leaves a
// manifest.json behind. Exit status: 0 success, 2 validation error, 3
// numerical failure.

#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/version.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

#include "config.hpp"
#include "omkam/errors.hpp"
#include "omkam/gauss.hpp"
#include "omkam/kam.hpp"
#include "omkam/ldp.hpp"
#include "omkam/nls.hpp"
#include "omkam/om.hpp"
#include "omkam/parallel.hpp"
#include "omkam/path_io.hpp"
#include "omkam/random.hpp"
#include "omkam/registry.hpp"
#include "omkam/sde.hpp"

#ifndef OMKAM_VERSION
#define OMKAM_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using namespace omkam;
using namespace omkam::cli;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Output directory plus the list of payload files written into it.
struct Output {
  fs::path dir;
  std::vector<std::string> files;

  fs::path file(const std::string& name) {
    files.push_back(name);
    return dir / name;
  }

  void json(const std::string& name, const Json& j) {
    std::ofstream out(file(name));
    if (!out) throw Error("cannot write " + (dir / name).string());
    out << j.dump(2) << '\n';
  }

  std::ofstream csv(const std::string& name) {
    std::ofstream out(file(name));
    if (!out) throw Error("cannot write " + (dir / name).string());
    return out;
  }

  void path(const std::string& name, const PathGrid& p, const WeightSequence& w) {
    write_path(file(name), p, w);
    files.push_back(sidecar_for(name).string());
  }
};

Json report_json(const ActionReport& r) {
  return Json{{"total", r.total}, {"q_term", r.q_term}, {"p_term", r.p_term}, {"el_residual", r.el_residual}};
}

Json nullable(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

SimConfig grid_sim(const RunConfig& c, Scheme scheme, std::uint64_t seed = 0) { return {c.dt(), seed, scheme}; }

PathGrid deterministic_flow(const RunConfig& c, const HamiltonianModel& m, const LatticeState& x0) {
  return simulate_deterministic(m, x0, c.T, grid_sim(c, Scheme::splitting));
}

// Uniform state in the ball of the given radius (componentwise box, rescaled).
LatticeState random_state(const HamiltonianModel& m, std::mt19937_64& gen, double radius) {
  std::normal_distribution<double> nd;
  LatticeState x = m.zero_state();
  double norm = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    x.q[i] = nd(gen);
    x.p[i] = nd(gen);
    norm += x.q[i] * x.q[i] + x.p[i] * x.p[i];
  }
  const double scale = radius * std::uniform_real_distribution<double>(0.0, 1.0)(gen) / std::sqrt(norm);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x.q[i] *= scale;
    x.p[i] *= scale;
  }
  x.canonicalize();
  return x;
}

void cmd_gradcheck(const RunConfig& c, Output& out) {
  const ModelPtr m = make_model(c.model);
  const WeightSequence w = c.weight_sequence();
  std::mt19937_64 gen(c.seed);
  double worst = 0.0, worst_defect = 0.0;
  for (std::size_t s = 0; s < c.gradcheck.states; ++s) {
    const LatticeState x = random_state(*m, gen, c.gradcheck.radius);
    worst = std::max(worst, grad_check(*m, x, c.gradcheck.h).max_rel_err);
    double xn = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double q = x.chart == Chart::angle ? lift_angle(x.q[i]) : x.q[i];
      xn += w.rho(i) * w.rho(i) * (q * q + x.p[i] * x.p[i]);
    }
    worst_defect = std::max(worst_defect, std::abs(symplectic_trace_defect(*m, x, w)) / (1.0 + std::sqrt(xn)));
  }
  out.json("gradcheck.json", Json{{"model", m->name()},
                                  {"states", c.gradcheck.states},
                                  {"h", c.gradcheck.h},
                                  {"max_rel_err", worst},
                                  {"max_scaled_trace_defect", worst_defect},
                                  {"pass", worst <= 1e-5 && worst_defect <= 1e-6}});
}

void cmd_simulate(const RunConfig& c, Output& out) {
  const ModelPtr m = make_model(c.model);
  const WeightSequence w = c.weight_sequence();
  const LatticeState x0 = c.initial_state();
  if (c.simulate.deterministic) {
    out.path("path.csv", simulate_deterministic(*m, x0, c.T, grid_sim(c, c.simulate.scheme)), w);
    return;
  }
  const NoiseModel noise = c.noise_model();
  Json index = Json::array();
  for (std::size_t j = 0; j < c.simulate.paths; ++j) {
    const std::uint64_t seed = derive_seed(c.seed, j);
    const PathGrid p = simulate(*m, noise, x0, c.T, grid_sim(c, c.simulate.scheme, seed));
    char name[32];
    std::snprintf(name, sizeof name, "path_%04zu.csv", j);
    out.path(name, p, w);
    index.push_back(Json{{"file", name}, {"seed", seed}, {"energy_start", m->energy(p.front())}, {"energy_end", m->energy(p.back())}});
  }
  out.json("simulate.json", Json{{"model", m->name()}, {"epsilon", c.epsilon}, {"paths", index}});
}

void cmd_mpp(const RunConfig& c, Output& out) {
  const ModelPtr m = make_model(c.model);
  const WeightSequence w = c.weight_sequence();
  const NoiseModel noise = c.noise_model();
  const LatticeState x0 = c.initial_state();
  const PathGrid flow = deterministic_flow(c, *m, x0);
  LatticeState end = flow.back();
  if (c.mpp.minimize.constraint == Constraint::fixed_both_endpoints) end = c.state_from(*c.mpp.final_state);
  else if (c.mpp.guess_end) end = c.state_from(*c.mpp.guess_end);
  const PathGrid guess = PathGrid::linear(x0, end, 0.0, c.T, c.K);
  const MinimizeResult r = minimize_action(guess, *m, noise, w, c.mpp.minimize);
  out.path("mpp_path.csv", r.path, w);
  Json rep = report_json(r.report);
  rep["iterations"] = r.iterations;
  rep["converged"] = r.converged;
  rep["grad_norm"] = r.grad_norm;
  if (c.mpp.minimize.constraint == Constraint::fixed_start) rep["distance_to_flow"] = path_distance(r.path, flow, w);
  out.json("mpp_report.json", rep);
}

void cmd_action(const RunConfig& c, Output& out) {
  const ModelPtr m = make_model(c.model);
  WeightSequence w = c.weight_sequence();
  const NoiseModel noise = c.noise_model();
  PathGrid path = deterministic_flow(c, *m, c.initial_state());
  if (!c.action.path.empty()) {
    StoredPath s = read_path(c.action.path);
    if (s.path.sites() != m->sites()) throw ConfigError("action.path: path has " + std::to_string(s.path.sites()) + " sites, model has " + std::to_string(m->sites()));
    path = std::move(s.path);
  }
  Json rep = report_json(om_action(path, *m, noise, w));
  rep["rate"] = nullable(rate_function(path, *m, noise, w, c.initial_state()));
  out.json("action.json", rep);
  out.path("action_path.csv", path, w);
}

TubeSpec ldp_tube(const RunConfig& c, const HamiltonianModel& m, const LatticeState& x0) {
  if (c.ldp.center == "path") {
    StoredPath s = read_path(c.ldp.path);
    if (s.path.sites() != m.sites()) throw ConfigError("ldp.path: site count differs from the model");
    return {std::move(s.path), c.ldp.radius};
  }
  if (c.ldp.center == "drift") {
    std::vector<LatticeState> nodes;
    for (std::size_t k = 0; k <= c.K; ++k) {
      LatticeState x = x0;
      const double t = c.T * static_cast<double>(k) / static_cast<double>(c.K);
      for (std::size_t i = 0; i < x.size(); ++i) x.q[i] += c.ldp.drift_q[i] * t;
      x.canonicalize();
      nodes.push_back(std::move(x));
    }
    return {PathGrid(0.0, c.T, std::move(nodes)), c.ldp.radius};
  }
  return {deterministic_flow(c, m, x0), c.ldp.radius};
}

void cmd_ldp(const RunConfig& c, Output& out) {
  const ModelPtr m = make_model(c.model);
  const WeightSequence w = c.weight_sequence();
  const NoiseModel noise = c.noise_model();
  const LatticeState x0 = c.initial_state();
  const TubeSpec tube = ldp_tube(c, *m, x0);
  McConfig mc;
  mc.samples = c.samples;
  mc.seed = c.seed;
  mc.workers = c.workers;
  const LdpEstimate est = run_ldp_ladder(*m, noise, tube, c.ldp.eps, w, x0, mc);
  std::vector<double> oracle_eps, oracle_y;
  {
    auto csv = out.csv("ldp.csv");
    csv << "epsilon,hits,n,p_hat,ci_low,ci_high,eps2_ln_p" << (c.ldp.oracle ? ",oracle_p,oracle_eps2_ln_p" : "") << '\n';
    for (const auto& l : est.levels) {
      csv << fmt17(l.eps) << ',' << l.estimate.hits << ',' << l.estimate.samples << ',' << fmt17(l.estimate.p_hat) << ','
          << fmt17(l.estimate.ci_low) << ',' << fmt17(l.estimate.ci_high) << ',' << fmt17(l.eps2_ln_p);
      if (c.ldp.oracle) {
        const double p = gaussian_oracle_tube_prob(*m, noise, tube, l.eps, w, x0);
        const double y = l.eps * l.eps * std::log(p);
        csv << ',' << fmt17(p) << ',' << fmt17(y);
        oracle_eps.push_back(l.eps);
        oracle_y.push_back(y);
      }
      csv << '\n';
    }
  }
  Json rep;
  try {
    const LdpFit fit = ldp_scaling_fit(est, tube, *m, noise, w, x0);
    rep = Json{{"fitted_neg_rate", fit.fitted_neg_rate},
               {"rate_inf_bound", nullable(fit.rate_inf_bound)},
               {"rel_gap", nullable(fit.rel_gap)},
               {"used_eps", fit.used_eps},
               {"residuals", fit.residuals}};
  } catch (const InsufficientDataError& e) {
    rep = Json{{"fitted_neg_rate", nullptr}, {"error", e.what()}};
  }
  if (c.ldp.oracle) {
    const AffineFit f = fit_affine(oracle_eps, oracle_y);
    rep["oracle_fitted_neg_rate"] = f.intercept;
  }
  out.json("ldp_fit.json", rep);
}

Json small_ball_json(const SmallBallReport& r) {
  return Json{{"kappa_p", r.kappa_p}, {"lambda1_p", r.lambda1_p}, {"limit_constant", r.limit_constant}};
}

void cmd_smallball(const RunConfig& c, Output& out) {
  const double p = c.smallball.p;
  const NoiseModel noise = c.noise_model();
  const NoiseProfile prof = c.sigma_q;
  Json rep;
  rep["p"] = p;
  rep["brownian"] = small_ball_json(small_ball_constant([](double t) { return t; }, [](double) { return 1.0; }, p));
  rep["noise_q_site0"] = small_ball_json(small_ball_constant_f([prof](double t) { return prof(t); }, p, c.T));
  rep["bound_rho"] = small_ball_bound_rho(noise, c.weight_sequence());
  out.json("smallball.json", rep);
}

void cmd_kl(const RunConfig& c, Output& out) {
  const NoiseModel noise = c.noise_model();
  const NoiseProfile prof = c.kl.component == "q" ? noise.profiles_q()[c.kl.site] : noise.profiles_p()[c.kl.site];
  const KLBasis b = kl_expand([prof](double t) { return prof(t); }, c.T, c.kl.n, c.kl.k);
  {
    auto csv = out.csv("kl_eigenvalues.csv");
    csv << "j,eigenvalue\n";
    for (std::size_t j = 0; j < b.eigenvalues.size(); ++j) csv << j + 1 << ',' << fmt17(b.eigenvalues[j]) << '\n';
  }
  auto csv = out.csv("kl_eigenfunctions.csv");
  csv << 't';
  for (std::size_t j = 0; j < b.eigenfunctions.size(); ++j) csv << ",phi_" << j + 1;
  csv << '\n';
  for (std::size_t i = 0; i < b.grid.size(); ++i) {
    csv << fmt17(b.grid[i]);
    for (const auto& f : b.eigenfunctions) csv << ',' << fmt17(f[i]);
    csv << '\n';
  }
}

void cmd_nls_coeffs(const RunConfig& c, Output& out) {
  const int n = c.nls_coeffs.cutoff;
  {
    auto csv = out.csv("nls_g.csv");
    csv << "i,j,k,l,G\n";
    for (int i = 1; i <= n; ++i)
      for (int j = i; j <= n; ++j)
        for (int k = j; k <= n; ++k)
          for (int l = k; l <= n; ++l)
            csv << i << ',' << j << ',' << k << ',' << l << ',' << fmt17(g_coefficient(i, j, k, l)) << '\n';
  }
  auto csv = out.csv("nls_gbar.csv");
  csv << "i,j,Gbar\n";
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n; ++j) csv << i << ',' << j << ',' << fmt17(birkhoff_gbar(i, j)) << '\n';
}

void cmd_nls_tori(const RunConfig& c, Output& out) {
  const NlsModel& nls = c.model.nls;
  const auto& b = c.nls_tori;
  const TorusSpec torus{b.J, b.I};
  torus.validate(nls.modes);
  const LatticeState u0 = torus.point(nls.modes);
  const SimConfig det{c.dt(), 0, Scheme::splitting};
  auto mode_noise = [&](double eps) {
    return NoiseModel(std::vector<NoiseProfile>(nls.modes, c.sigma_q), std::vector<NoiseProfile>(nls.modes, c.sigma_p), eps);
  };
  const PathGrid flow = simulate_snls(nls, b.truncation, mode_noise(0.0), u0, c.T, det);
  const TorusDeviation dev0 = torus_deviation(flow, torus, nls);
  const double drift0 = *std::max_element(dev0.action_dev.begin(), dev0.action_dev.end());

  auto lines = out.csv("nls_tori.jsonl");
  Json ladder = Json::array();
  for (std::size_t e = 0; e < b.eps.size(); ++e) {
    const double eps = b.eps[e];
    const NoiseModel noise = mode_noise(eps);
    std::vector<double> max_dev(b.paths);
    std::vector<std::uint64_t> seeds(b.paths);
    parallel_blocks(b.paths, c.workers == 0 ? default_workers() : c.workers, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t j = lo; j < hi; ++j) {
        seeds[j] = derive_seed(derive_seed(c.seed, e), j);
        const PathGrid p = simulate_snls(nls, b.truncation, noise, u0, c.T, {c.dt(), seeds[j], Scheme::splitting});
        const TorusDeviation d = torus_deviation(p, torus, nls);
        max_dev[j] = *std::max_element(d.action_dev.begin(), d.action_dev.end());
      }
    });
    std::size_t hits = 0;
    for (std::size_t j = 0; j < b.paths; ++j) {
      const bool exceeded = max_dev[j] > b.threshold;
      hits += exceeded;
      lines << Json{{"eps", eps}, {"seed", seeds[j]}, {"max_action_dev", max_dev[j]}, {"exceeded", exceeded}}.dump() << '\n';
    }
    const TubeEstimate est = wilson_estimate(hits, b.paths);
    ladder.push_back(Json{{"eps", eps},
                          {"exceedances", hits},
                          {"n", b.paths},
                          {"p_hat", est.p_hat},
                          {"ci_low", est.ci_low},
                          {"ci_high", est.ci_high},
                          {"eps2_ln_p", nullable(hits ? eps * eps * std::log(est.p_hat) : -std::numeric_limits<double>::infinity())}});
  }
  out.json("nls_tori.json", Json{{"truncation", to_string(b.truncation)},
                                 {"threshold", b.threshold},
                                 {"deterministic_action_drift", drift0},
                                 {"ladder", ladder}});
}

void cmd_kam_scan(const RunConfig& c, Output& out) {
  const auto& b = c.kam_scan;
  if (b.mode == "toy") {
    ResonanceScan s;
    s.box = b.box;
    s.k_cutoff = b.k_cutoff;
    s.normal_modes = b.normal_modes;
    s.alphas = b.alphas;
    s.samples = b.samples;
    s.tau = b.tau;
    s.d = b.d;
    s.seed = c.seed;
    s.workers = c.workers;
    const FrequencyMap map = toy_frequency_map(b.normal_modes);
    const ResonanceFractions r = resonant_measure_mc(s, map);
    const LipschitzQuotients lq = lipschitz_quotients(map, b.box, 1000, c.seed);
    out.json("kam_fractions.json", Json{{"mode", "toy"},
                                        {"tau", resolve_tau(b.tau, b.box.size())},
                                        {"alphas", r.alphas},
                                        {"fractions", r.fractions},
                                        {"ci_low", r.ci_low},
                                        {"ci_high", r.ci_high},
                                        {"mu_hat", r.mu_hat},
                                        {"lipschitz_min", lq.min_ratio},
                                        {"lipschitz_max", lq.max_ratio}});
    return;
  }
  const NormalForm nf = normal_form(c.model.nls, b.J, b.l_mode_cutoff);
  const ActionGrid grid{b.lo, b.hi, b.points};
  const double tau = resolve_tau(b.tau, b.J.size());
  const DiophantineScanResult main = diophantine_scan(nf, grid, b.alpha, tau, b.k_cutoff, b.l_mode_cutoff, b.d);
  {
    auto csv = out.csv("kam_scan.csv");
    for (std::size_t i = 0; i < b.J.size(); ++i) csv << "I_" << b.J[i] << ',';
    csv << "critical_alpha,pass\n";
    for (std::size_t g = 0; g < main.actions.size(); ++g) {
      for (double v : main.actions[g]) csv << fmt17(v) << ',';
      csv << fmt17(main.critical[g]) << ',' << (main.admissible[g] ? 1 : 0) << '\n';
    }
  }
  // Admissibility at alpha is critical >= alpha, so the ladder reuses one scan.
  std::vector<double> fractions;
  for (double a : b.alphas) {
    std::size_t pass = 0;
    for (double crit : main.critical) pass += crit >= a;
    fractions.push_back(static_cast<double>(pass) / static_cast<double>(main.critical.size()));
  }
  out.json("kam_fractions.json", Json{{"mode", "nls"},
                                      {"tau", tau},
                                      {"alpha", b.alpha},
                                      {"fraction", main.fraction},
                                      {"alphas", b.alphas},
                                      {"fractions", fractions},
                                      {"abs_det_A", std::abs(nf.A.determinant())}});
}

using Command = void (*)(const RunConfig&, Output&);

const std::vector<std::pair<std::string, Command>>& commands() {
  static const std::vector<std::pair<std::string, Command>> table{
      {"gradcheck", cmd_gradcheck}, {"simulate", cmd_simulate},     {"mpp", cmd_mpp},
      {"action", cmd_action},       {"ldp", cmd_ldp},               {"smallball", cmd_smallball},
      {"kl", cmd_kl},               {"nls-coeffs", cmd_nls_coeffs}, {"nls-tori", cmd_nls_tori},
      {"kam-scan", cmd_kam_scan}};
  return table;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

Json versions() {
  return Json{{"omkam", OMKAM_VERSION},
              {"compiler", __VERSION__},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"boost", BOOST_LIB_VERSION},
              {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                                    "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
              {"cli11", CLI11_VERSION}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"omkam: stochastic Hamiltonian lattices, Onsager-Machlup actions, large deviations and KAM diagnostics"};
  app.require_subcommand(1, 1);
  std::string config_path, out_dir;
  std::optional<unsigned> workers;
  std::optional<std::uint64_t> seed;
  for (const auto& [name, fn] : commands()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON configuration document")->required();
    sub->add_option("--out", out_dir, "output directory (default: $OMKAM_OUT_DIR or omkam_out)");
    sub->add_option("--workers", workers, "worker threads (0: hardware concurrency)");
    sub->add_option("--seed", seed, "master seed, overrides the config");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string sub = app.get_subcommands().front()->get_name();

  if (out_dir.empty()) {
    const char* env = std::getenv("OMKAM_OUT_DIR");
    out_dir = env && *env ? env : "omkam_out";
  }
  Output out{out_dir, {}};
  std::error_code ec;
  fs::create_directories(out.dir, ec);
  if (ec) {
    std::cerr << "error: cannot create output directory '" << out_dir << "': " << ec.message() << '\n';
    return 2;
  }

  Json manifest;
  manifest["subcommand"] = sub;
  manifest["config_path"] = config_path;
  manifest["started_at"] = utc_now();
  const auto start = std::chrono::steady_clock::now();
  int status = 0;
  std::string message;
  RunConfig cfg;
  try {
    cfg = load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (workers) cfg.workers = *workers;
    manifest["config"] = cfg.raw;
    manifest["seed"] = cfg.seed;
    manifest["workers"] = cfg.workers;
    for (const auto& [name, fn] : commands())
      if (name == sub) fn(cfg, out);
  } catch (const ConfigError& e) {
    status = 2;
    message = e.what();
  } catch (const std::exception& e) {
    status = 3;
    message = e.what();
  }
  manifest["versions"] = versions();
  manifest["outputs"] = out.files;
  manifest["exit_status"] = status;
  if (status != 0) manifest["error"] = message;
  manifest["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ofstream(out.dir / "manifest.json") << manifest.dump(2) << '\n';
  if (status != 0) std::cerr << "error: " << message << '\n';
  return status;
}
