#pragma once

// Strictly validated run configuration for the omkam command-line tool.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "omkam/hamiltonian.hpp"
#include "omkam/lattice.hpp"
#include "omkam/om.hpp"
#include "omkam/registry.hpp"
#include "omkam/sde.hpp"

namespace omkam::cli {

using Json = nlohmann::ordered_json;

struct StateSpec {
  std::vector<double> q;
  std::vector<double> p;
};

struct GradcheckBlock {
  std::size_t states = 100;
  double h = 1e-5;
  double radius = 1.0;
};

struct SimulateBlock {
  Scheme scheme = Scheme::euler_maruyama;
  std::size_t paths = 1;
  bool deterministic = false;
};

struct MppBlock {
  MinimizeConfig minimize;
  std::optional<StateSpec> guess_end;  // straight-line guess target; default is the flow endpoint
  std::optional<StateSpec> final_state;  // required for fixed_both_endpoints
};

struct ActionBlock {
  std::string path;  // empty: the deterministic flow from the initial state
};

struct LdpBlock {
  double radius = 0.3;
  std::string center = "flow";  // flow | drift | path
  std::vector<double> drift_q;
  std::string path;
  std::vector<double> eps{0.4, 0.3, 0.2, 0.15};
  bool oracle = false;
};

struct SmallballBlock {
  double p = 2.0;
};

struct KlBlock {
  std::size_t n = 512;
  std::size_t k = 10;
  std::string component = "q";
  std::size_t site = 0;
};

struct NlsCoeffsBlock {
  int cutoff = 4;
};

struct NlsToriBlock {
  std::vector<int> J{1, 2};
  std::vector<double> I{0.5, 0.5};
  std::vector<double> eps{0.1, 0.05, 0.025};
  double threshold = 0.1;
  std::size_t paths = 1000;
  NlsTruncation truncation = NlsTruncation::normal_form;
};

struct KamScanBlock {
  std::string mode = "nls";  // nls | toy
  std::vector<int> J{1, 2};
  int l_mode_cutoff = 12;
  int k_cutoff = 6;
  double tau = 0.0;
  double d = 2.0;
  double alpha = 0.05;
  std::vector<double> alphas{0.2, 0.1, 0.05, 0.025};
  std::vector<double> lo{0.0, 0.0};
  std::vector<double> hi{12.0, 12.0};
  std::vector<std::size_t> points{41, 41};
  std::vector<std::pair<double, double>> box{{1.0, 2.0}, {1.0, 2.0}};
  std::vector<int> normal_modes{3, 4, 5};
  std::size_t samples = 100000;
};

struct RunConfig {
  Json raw;
  std::uint64_t seed = 0;
  unsigned workers = 0;

  ModelSpec model;
  NoiseProfile sigma_q;
  NoiseProfile sigma_p;
  double epsilon = 0.1;
  std::string weights = "default";  // default | chain | uniform | values | nls
  std::vector<double> weight_values;
  double T = 1.0;
  std::size_t K = 100;
  std::optional<StateSpec> initial;
  std::size_t samples = 100000;

  GradcheckBlock gradcheck;
  SimulateBlock simulate;
  MppBlock mpp;
  ActionBlock action;
  LdpBlock ldp;
  SmallballBlock smallball;
  KlBlock kl;
  NlsCoeffsBlock nls_coeffs;
  NlsToriBlock nls_tori;
  KamScanBlock kam_scan;

  std::size_t sites() const;
  WeightSequence weight_sequence() const;
  NoiseModel noise_model() const;
  LatticeState initial_state() const;
  LatticeState state_from(const StateSpec& s) const;
  double dt() const { return T / static_cast<double>(K); }
};

// Parses and validates a configuration document. Every offending key is
// collected; the thrown ConfigError lists them one per line.
RunConfig parse_config(const Json& doc);
RunConfig load_config(const std::string& path);

}  // namespace omkam::cli
