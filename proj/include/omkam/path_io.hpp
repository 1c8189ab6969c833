#pragma once

#include <filesystem>
#include <iosfwd>

#include "omkam/lattice.hpp"

namespace omkam {

// A path together with the weight geometry it was produced under.
struct StoredPath {
  PathGrid path;
  WeightSequence weights;
};

// CSV `t,site,q,p` (one row per node and site, %.17g) plus a JSON sidecar next
// to it (same stem, `.json`) carrying t0, t1, dt, steps, chart, sites and rho.
void write_path(const std::filesystem::path& csv, const PathGrid& path, const WeightSequence& w);
void write_path_csv(std::ostream& out, const PathGrid& path);

StoredPath read_path(const std::filesystem::path& csv);

std::filesystem::path sidecar_for(const std::filesystem::path& csv);

}  // namespace omkam
