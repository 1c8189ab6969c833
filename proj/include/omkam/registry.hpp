#pragma once

#include <string>
#include <vector>

#include "omkam/hamiltonian.hpp"
#include "omkam/nls.hpp"

namespace omkam {

// Parameters of a built-in model. Only the fields relevant to `name` are read.
struct ModelSpec {
  std::string name = "pendulum_lattice";
  std::size_t sites = 4;
  Chart chart = Chart::angle;             // free model only
  std::vector<double> omega;              // harmonic_lattice; empty means all ones
  double kappa = 0.5;                     // pendulum_lattice chain coupling
  NlsModel nls;                           // nls_modes
  NlsTruncation truncation = NlsTruncation::full;
};

const std::vector<std::string>& builtin_models();

ModelPtr make_model(const ModelSpec& spec);

}  // namespace omkam
