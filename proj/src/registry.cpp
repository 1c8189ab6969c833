#include "omkam/registry.hpp"

#include <memory>

#include "omkam/errors.hpp"

namespace omkam {

const std::vector<std::string>& builtin_models() {
  static const std::vector<std::string> names{"free", "harmonic_lattice", "pendulum_lattice", "nls_modes"};
  return names;
}

ModelPtr make_model(const ModelSpec& spec) {
  if (spec.name == "free") return std::make_shared<FreeModel>(spec.sites, spec.chart);
  if (spec.name == "harmonic_lattice") {
    std::vector<double> omega = spec.omega.empty() ? std::vector<double>(spec.sites, 1.0) : spec.omega;
    return std::make_shared<HarmonicLattice>(std::move(omega));
  }
  if (spec.name == "pendulum_lattice") return std::make_shared<PendulumLattice>(PendulumLattice::chain(spec.sites, spec.kappa));
  if (spec.name == "nls_modes") return std::make_shared<NlsModesModel>(spec.nls, spec.truncation);
  throw ModelError("unknown model '" + spec.name + "'");
}

}  // namespace omkam
