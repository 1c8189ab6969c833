#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "omkam/nls.hpp"

namespace omkam {

// Sparse normal-mode index vector: (mode, coefficient) pairs, |l|_1 <= 2.
using SparseL = std::vector<std::pair<int, int>>;

// Normal frequencies Omega_j keyed by mode index j.
struct NormalSpectrum {
  std::vector<int> modes;
  std::vector<double> freq;

  double at(int j) const;
};

struct DivisorQuery {
  std::vector<int> k;
  SparseL l;
  double tau = 0.0;  // <= 0: n + 2
  double alpha = 0.5;
  double d = 2.0;
};

struct DivisorMargin {
  double lhs = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

// <l>_d = max(1, |sum_j j^d l_j|).
double l_bracket(const SparseL& l, double d);
// A_k = 1 + |k|_1^tau.
double a_k(const std::vector<int>& k, double tau);
// tau if positive, otherwise the default n + 2.
double resolve_tau(double tau, std::size_t n);

DivisorMargin small_divisor_margin(const DivisorQuery& q, const std::vector<double>& omega,
                                   const NormalSpectrum& Omega);

// Every (k, l) with |k|_1 <= k_cutoff, |l|_1 <= 2 supported on `normal_modes`,
// (k, l) != 0.
struct DivisorSet {
  std::size_t n = 0;
  std::vector<std::vector<int>> ks;  // includes k = 0
  std::vector<SparseL> ls;           // includes l = 0
  std::size_t size() const { return ks.size() * ls.size() - 1; }
};

DivisorSet enumerate_divisors(std::size_t n, int k_cutoff, const std::vector<int>& normal_modes);
// Closed-form cardinality of the set above.
std::size_t divisor_count(std::size_t n, int k_cutoff, std::size_t normal_modes);

// min over the set of |<k,omega> + <l,Omega>| A_k / <l>_d: the point is
// resonant exactly for alpha above this value.
double critical_alpha(const DivisorSet& set, const std::vector<int>& normal_modes,
                      const std::vector<double>& omega, const std::vector<double>& Omega,
                      double tau, double d);

// Frequencies (omega, Omega) at parameter xi; Omega is indexed like the
// scan's normal_modes.
using FrequencyMap = std::function<std::pair<std::vector<double>, std::vector<double>>(const std::vector<double>&)>;

struct ResonanceScan {
  std::vector<std::pair<double, double>> box;  // parameter box Pi
  int k_cutoff = 6;
  std::vector<int> normal_modes;
  std::vector<double> alphas;
  std::size_t samples = 100000;
  double tau = 0.0;  // <= 0: n + 2
  double d = 2.0;
  std::uint64_t seed = 0;
  unsigned workers = 0;
};

struct ResonanceFractions {
  std::vector<double> alphas;
  std::vector<double> fractions;
  std::vector<double> ci_low;
  std::vector<double> ci_high;
  double mu_hat = 0.0;  // slope of ln fraction against ln alpha
  std::vector<double> fit_residuals;
};

ResonanceFractions resonant_measure_mc(const ResonanceScan& scan, const FrequencyMap& freq_map);

// omega(xi) = xi on the box, Omega_j = j^2 for the listed modes.
FrequencyMap toy_frequency_map(const std::vector<int>& normal_modes);

struct ActionGrid {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<std::size_t> points;  // per dimension, >= 1
};

struct DiophantineScanResult {
  std::vector<std::vector<double>> actions;
  std::vector<double> critical;  // critical alpha per grid point
  std::vector<bool> admissible;
  double fraction = 0.0;
};

// Grid points whose normal-form frequencies pass every enumerated divisor
// bound at `alpha`. Normal modes are those of the normal form up to
// l_mode_cutoff.
DiophantineScanResult diophantine_scan(const NormalForm& nf, const ActionGrid& grid, double alpha,
                                       double tau, int k_cutoff, int l_mode_cutoff, double d = 2.0);

struct LipschitzQuotients {
  double min_ratio = 0.0;
  double max_ratio = 0.0;
};

// Sampled |omega(a) - omega(b)| / |a - b| over the box, flagging near-degeneracy
// of the frequency map through a small min_ratio.
LipschitzQuotients lipschitz_quotients(const FrequencyMap& freq_map,
                                       const std::vector<std::pair<double, double>>& box,
                                       std::size_t pairs, std::uint64_t seed);

}  // namespace omkam
