#include "omkam/path_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "omkam/errors.hpp"

namespace omkam {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::filesystem::path sidecar_for(const std::filesystem::path& csv) {
  auto side = csv;
  side.replace_extension(".json");
  return side;
}

void write_path_csv(std::ostream& out, const PathGrid& path) {
  out << "t,site,q,p\n";
  for (std::size_t k = 0; k < path.nodes().size(); ++k) {
    const std::string t = fmt17(path.time(k));
    const auto& x = path.node(k);
    for (std::size_t i = 0; i < x.size(); ++i) {
      out << t << ',' << i << ',' << fmt17(x.q[i]) << ',' << fmt17(x.p[i]) << '\n';
    }
  }
}

void write_path(const std::filesystem::path& csv, const PathGrid& path, const WeightSequence& w) {
  require_same_sites(path.sites(), w.size(), "write_path");
  {
    std::ofstream out(csv);
    if (!out) throw Error("cannot open " + csv.string());
    write_path_csv(out, path);
  }
  nlohmann::ordered_json side;
  side["t0"] = path.t0();
  side["t1"] = path.t1();
  side["dt"] = path.dt();
  side["steps"] = path.steps();
  side["chart"] = path.chart() == Chart::angle ? "angle" : "line";
  side["sites"] = w.sites();
  side["rho"] = std::vector<double>(w.rho().begin(), w.rho().end());
  std::ofstream out(sidecar_for(csv));
  if (!out) throw Error("cannot open sidecar for " + csv.string());
  out << side.dump(2) << '\n';
}

StoredPath read_path(const std::filesystem::path& csv) {
  std::ifstream side_in(sidecar_for(csv));
  if (!side_in) throw Error("missing sidecar for " + csv.string());
  const auto side = nlohmann::json::parse(side_in);
  const double t0 = side.at("t0").get<double>();
  const double t1 = side.at("t1").get<double>();
  const auto steps = side.at("steps").get<std::size_t>();
  const Chart chart = side.at("chart").get<std::string>() == "angle" ? Chart::angle : Chart::line;
  WeightSequence w(side.at("sites").get<std::vector<WeightSequence::Site>>(),
                   side.at("rho").get<std::vector<double>>());
  const std::size_t n = w.size();

  std::vector<LatticeState> nodes(steps + 1, LatticeState::zeros(n, chart));
  std::ifstream in(csv);
  if (!in) throw Error("cannot open " + csv.string());
  std::string line;
  std::getline(in, line);
  if (line != "t,site,q,p") throw Error("unexpected path header in " + csv.string());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string t, site, q, p;
    std::getline(ls, t, ',');
    std::getline(ls, site, ',');
    std::getline(ls, q, ',');
    std::getline(ls, p, ',');
    const std::size_t k = row / n;
    const std::size_t i = std::stoul(site);
    if (k > steps || i != row % n) throw Error("malformed path rows in " + csv.string());
    nodes[k].q[i] = std::strtod(q.c_str(), nullptr);
    nodes[k].p[i] = std::strtod(p.c_str(), nullptr);
    ++row;
  }
  if (row != (steps + 1) * n) throw Error("truncated path file " + csv.string());
  return {PathGrid(t0, t1, std::move(nodes)), std::move(w)};
}

}  // namespace omkam
