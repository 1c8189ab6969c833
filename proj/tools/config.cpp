#include "config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "omkam/errors.hpp"
#include "omkam/nls.hpp"

namespace omkam::cli {

namespace {

// Collects every validation problem instead of stopping at the first.
struct Problems {
  std::vector<std::string> items;
  void add(const std::string& key, const std::string& what) { items.push_back(key + ": " + what); }
};

std::string show(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

// Typed, key-tracking view of one JSON object.
class Node {
 public:
  Node(const Json* obj, std::string path, Problems& probs) : obj_(obj), path_(std::move(path)), probs_(probs) {
    if (obj_ && !obj_->is_object()) {
      probs_.add(path_.empty() ? "<root>" : path_, "must be an object");
      obj_ = nullptr;
    }
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  const Json* get(const std::string& k) {
    used_.insert(k);
    if (!obj_) return nullptr;
    auto it = obj_->find(k);
    return it == obj_->end() ? nullptr : &*it;
  }

  bool has(const std::string& k) const { return obj_ && obj_->contains(k); }

  Node child(const std::string& k) { return Node(get(k), key(k), probs_); }

  double number(const std::string& k, double fallback, const std::function<bool(double)>& ok = {},
                const char* rule = "") {
    const Json* v = get(k);
    if (!v) return fallback;
    if (!v->is_number()) {
      probs_.add(key(k), "must be a number");
      return fallback;
    }
    const double x = v->get<double>();
    if (!std::isfinite(x) || (ok && !ok(x))) {
      probs_.add(key(k), std::string("must be ") + rule + " (got " + show(x) + ")");
      return fallback;
    }
    return x;
  }

  long long integer(const std::string& k, long long fallback, long long lo, long long hi) {
    const Json* v = get(k);
    if (!v) return fallback;
    if (!v->is_number_integer()) {
      probs_.add(key(k), "must be an integer");
      return fallback;
    }
    const long long x = v->get<long long>();
    if (x < lo || x > hi) {
      probs_.add(key(k), "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "] (got " + std::to_string(x) + ")");
      return fallback;
    }
    return x;
  }

  std::uint64_t u64(const std::string& k, std::uint64_t fallback) {
    const Json* v = get(k);
    if (!v) return fallback;
    if (!v->is_number_unsigned()) {
      probs_.add(key(k), "must be a nonnegative integer");
      return fallback;
    }
    return v->get<std::uint64_t>();
  }

  bool boolean(const std::string& k, bool fallback) {
    const Json* v = get(k);
    if (!v) return fallback;
    if (!v->is_boolean()) {
      probs_.add(key(k), "must be true or false");
      return fallback;
    }
    return v->get<bool>();
  }

  std::string choice(const std::string& k, const std::string& fallback, const std::vector<std::string>& allowed) {
    const Json* v = get(k);
    if (!v) return fallback;
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    if (!v->is_string()) {
      probs_.add(key(k), "must be one of " + list);
      return fallback;
    }
    const std::string s = v->get<std::string>();
    for (const auto& a : allowed)
      if (s == a) return s;
    probs_.add(key(k), "must be one of " + list + " (got '" + s + "')");
    return fallback;
  }

  std::string text(const std::string& k, const std::string& fallback) {
    const Json* v = get(k);
    if (!v) return fallback;
    if (!v->is_string()) {
      probs_.add(key(k), "must be a string");
      return fallback;
    }
    return v->get<std::string>();
  }

  std::vector<double> numbers(const std::string& k, std::vector<double> fallback,
                              const std::function<bool(double)>& ok = {}, const char* rule = "") {
    const Json* v = get(k);
    if (!v) return fallback;
    if (!v->is_array()) {
      probs_.add(key(k), "must be an array of numbers");
      return fallback;
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const Json& e = (*v)[i];
      const std::string ek = key(k) + "[" + std::to_string(i) + "]";
      if (!e.is_number()) {
        probs_.add(ek, "must be a number");
        return fallback;
      }
      const double x = e.get<double>();
      if (!std::isfinite(x) || (ok && !ok(x))) {
        probs_.add(ek, std::string("must be ") + rule + " (got " + show(x) + ")");
        return fallback;
      }
      out.push_back(x);
    }
    return out;
  }

  std::vector<long long> integers(const std::string& k, std::vector<long long> fallback, long long lo, long long hi) {
    const Json* v = get(k);
    if (!v) return fallback;
    if (!v->is_array()) {
      probs_.add(key(k), "must be an array of integers");
      return fallback;
    }
    std::vector<long long> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const Json& e = (*v)[i];
      const std::string ek = key(k) + "[" + std::to_string(i) + "]";
      if (!e.is_number_integer() || e.get<long long>() < lo || e.get<long long>() > hi) {
        probs_.add(ek, "must be an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        return fallback;
      }
      out.push_back(e.get<long long>());
    }
    return out;
  }

  // Reports keys present in the object but never read.
  void finish() {
    if (!obj_) return;
    for (auto it = obj_->begin(); it != obj_->end(); ++it)
      if (!used_.count(it.key())) probs_.add(key(it.key()), "unknown key");
  }

 private:
  const Json* obj_;
  std::string path_;
  Problems& probs_;
  std::set<std::string> used_;
};

const auto positive = [](double x) { return x > 0.0; };
const auto nonnegative = [](double x) { return x >= 0.0; };

NoiseProfile parse_profile(Node& parent, const std::string& k, Problems& probs) {
  NoiseProfile prof;
  if (!parent.has(k)) {
    parent.get(k);
    return prof;
  }
  const Json* v = parent.get(k);
  if (v->is_number()) {
    const double b = v->get<double>();
    if (!(b > 0.0) || !std::isfinite(b)) probs.add(parent.key(k), "must be > 0 (got " + show(b) + ")");
    else prof.base = b;
    return prof;
  }
  Node n(v, parent.key(k), probs);
  prof.base = n.number("base", 1.0, positive, "> 0");
  prof.amplitude = n.number("amplitude", 0.0, [](double a) { return std::abs(a) < 1.0; }, "in (-1, 1)");
  prof.angular_frequency = n.number("angular_frequency", 0.0);
  prof.phase = n.number("phase", 0.0);
  n.finish();
  return prof;
}

std::optional<StateSpec> parse_state(Node& parent, const std::string& k, std::size_t sites, Problems& probs) {
  if (!parent.has(k)) {
    parent.get(k);
    return std::nullopt;
  }
  Node n = parent.child(k);
  StateSpec s;
  s.q = n.numbers("q", std::vector<double>(sites, 0.0));
  s.p = n.numbers("p", std::vector<double>(sites, 0.0));
  if (s.q.size() != sites) probs.add(n.key("q"), "must have " + std::to_string(sites) + " entries");
  if (s.p.size() != sites) probs.add(n.key("p"), "must have " + std::to_string(sites) + " entries");
  n.finish();
  return s;
}

std::vector<int> to_int(const std::vector<long long>& v) { return {v.begin(), v.end()}; }

}  // namespace

std::size_t RunConfig::sites() const { return model.name == "nls_modes" ? model.nls.modes : model.sites; }

WeightSequence RunConfig::weight_sequence() const {
  const std::string kind = weights == "default" ? (model.name == "nls_modes" ? "nls" : "chain") : weights;
  if (kind == "nls") return nls_weights(model.nls);
  if (kind == "uniform") return WeightSequence::uniform(sites());
  if (kind == "values") return WeightSequence::from_values(weight_values);
  return WeightSequence::chain(sites());
}

NoiseModel RunConfig::noise_model() const {
  return NoiseModel(std::vector<NoiseProfile>(sites(), sigma_q), std::vector<NoiseProfile>(sites(), sigma_p), epsilon);
}

LatticeState RunConfig::state_from(const StateSpec& s) const {
  LatticeState x = LatticeState::zeros(sites(), make_model(model)->chart());
  x.q = s.q;
  x.p = s.p;
  x.canonicalize();
  return x;
}

LatticeState RunConfig::initial_state() const {
  if (initial) return state_from(*initial);
  return make_model(model)->zero_state();
}

RunConfig parse_config(const Json& doc) {
  Problems probs;
  RunConfig c;
  c.raw = doc;
  Node root(&doc, "", probs);
  c.seed = root.u64("seed", 0);
  c.workers = static_cast<unsigned>(root.integer("workers", 0, 0, 4096));

  {
    Node m = root.child("model");
    c.model.name = m.choice("name", "pendulum_lattice", builtin_models());
    c.model.sites = static_cast<std::size_t>(m.integer("sites", 4, 1, 100000));
    c.model.kappa = m.number("kappa", 0.5);
    c.model.chart = m.choice("chart", "angle", {"angle", "line"}) == "line" ? Chart::line : Chart::angle;
    c.model.omega = m.numbers("omega", {}, positive, "> 0");
    if (!c.model.omega.empty() && c.model.omega.size() != c.model.sites)
      probs.add(m.key("omega"), "must have model.sites = " + std::to_string(c.model.sites) + " entries");
    c.model.truncation = parse_truncation(m.choice("truncation", "full", {"linear", "normal_form", "full"}));
    Node n = m.child("nls");
    c.model.nls.m = n.number("m", 1.0);
    c.model.nls.modes = static_cast<std::size_t>(n.integer("modes", 8, 1, 4096));
    c.model.nls.a = n.number("a", 0.1, nonnegative, ">= 0");
    c.model.nls.p_w = n.number("p_w", 1.0, nonnegative, ">= 0");
    n.finish();
    m.finish();
  }
  {
    Node n = root.child("noise");
    c.sigma_q = parse_profile(n, "sigma_q", probs);
    c.sigma_p = parse_profile(n, "sigma_p", probs);
    c.epsilon = n.number("epsilon", 0.1, nonnegative, ">= 0");
    n.finish();
  }
  {
    Node w = root.child("weights");
    c.weights = w.choice("kind", "default", {"default", "chain", "uniform", "values", "nls"});
    c.weight_values = w.numbers("values", {}, positive, "> 0");
    if (c.weights == "values" && c.weight_values.size() != c.sites())
      probs.add(w.key("values"), "must have one weight per site (" + std::to_string(c.sites()) + ")");
    w.finish();
  }
  {
    Node g = root.child("grid");
    c.T = g.number("T", 1.0, positive, "> 0");
    const bool has_dt = g.has("dt"), has_k = g.has("K");
    const double dt = g.number("dt", 0.01, positive, "> 0");
    const long long K = g.integer("K", 100, 2, 100000000);
    if (has_dt && has_k) probs.add(g.key("dt"), "give either grid.dt or grid.K, not both");
    c.K = has_k ? static_cast<std::size_t>(K) : std::max<std::size_t>(2, steps_for(c.T, dt));
    g.finish();
  }
  c.initial = parse_state(root, "initial", c.sites(), probs);
  {
    Node mc = root.child("mc");
    c.samples = static_cast<std::size_t>(mc.integer("samples", 100000, 1, 1000000000));
    mc.finish();
  }
  {
    Node b = root.child("gradcheck");
    c.gradcheck.states = static_cast<std::size_t>(b.integer("states", 100, 1, 1000000));
    c.gradcheck.h = b.number("h", 1e-5, positive, "> 0");
    c.gradcheck.radius = b.number("radius", 1.0, positive, "> 0");
    b.finish();
  }
  {
    Node b = root.child("simulate");
    c.simulate.scheme = b.choice("scheme", "euler_maruyama", {"euler_maruyama", "splitting"}) == "splitting"
                            ? Scheme::splitting
                            : Scheme::euler_maruyama;
    c.simulate.paths = static_cast<std::size_t>(b.integer("paths", 1, 1, 100000));
    c.simulate.deterministic = b.boolean("deterministic", false);
    b.finish();
  }
  {
    Node b = root.child("mpp");
    c.mpp.minimize.max_iters = static_cast<std::size_t>(b.integer("max_iters", 5000, 1, 100000000));
    c.mpp.minimize.grad_tol = b.number("grad_tol", 1e-6, positive, "> 0");
    c.mpp.minimize.memory = static_cast<std::size_t>(b.integer("memory", 12, 1, 1000));
    c.mpp.minimize.constraint = b.choice("constraint", "fixed_start", {"fixed_start", "fixed_both_endpoints"}) ==
                                        "fixed_both_endpoints"
                                    ? Constraint::fixed_both_endpoints
                                    : Constraint::fixed_start;
    c.mpp.guess_end = parse_state(b, "guess_end", c.sites(), probs);
    c.mpp.final_state = parse_state(b, "final", c.sites(), probs);
    if (c.mpp.minimize.constraint == Constraint::fixed_both_endpoints && !c.mpp.final_state)
      probs.add(b.key("final"), "required when mpp.constraint is fixed_both_endpoints");
    b.finish();
  }
  {
    Node b = root.child("action");
    c.action.path = b.text("path", "");
    b.finish();
  }
  {
    Node b = root.child("ldp");
    c.ldp.radius = b.number("radius", 0.3, positive, "> 0");
    c.ldp.center = b.choice("center", "flow", {"flow", "drift", "path"});
    c.ldp.drift_q = b.numbers("drift_q", std::vector<double>(c.sites(), 0.0));
    if (c.ldp.drift_q.size() != c.sites()) probs.add(b.key("drift_q"), "must have one entry per site");
    c.ldp.path = b.text("path", "");
    if (c.ldp.center == "path" && c.ldp.path.empty()) probs.add(b.key("path"), "required when ldp.center is path");
    c.ldp.eps = b.numbers("eps", c.ldp.eps, positive, "> 0");
    if (c.ldp.eps.size() < 3) probs.add(b.key("eps"), "needs at least three levels");
    c.ldp.oracle = b.boolean("oracle", false);
    if (c.ldp.oracle && c.model.name != "free") probs.add(b.key("oracle"), "the Gaussian oracle needs model.name = free");
    b.finish();
  }
  {
    Node b = root.child("smallball");
    c.smallball.p = b.number("p", 2.0, [](double p) { return p >= 1.0; }, ">= 1");
    b.finish();
  }
  {
    Node b = root.child("kl");
    c.kl.n = static_cast<std::size_t>(b.integer("n", 512, 2, 20000));
    c.kl.k = static_cast<std::size_t>(b.integer("k", 10, 1, 20000));
    if (c.kl.k > c.kl.n) probs.add(b.key("k"), "must not exceed kl.n");
    c.kl.component = b.choice("component", "q", {"q", "p"});
    c.kl.site = static_cast<std::size_t>(b.integer("site", 0, 0, 100000));
    if (c.kl.site >= c.sites()) probs.add(b.key("site"), "must be below the site count");
    b.finish();
  }
  {
    Node b = root.child("nls-coeffs");
    c.nls_coeffs.cutoff = static_cast<int>(b.integer("cutoff", 4, 1, 64));
    b.finish();
  }
  {
    Node b = root.child("nls-tori");
    c.nls_tori.J = to_int(b.integers("J", {1, 2}, 1, 4096));
    c.nls_tori.I = b.numbers("I", c.nls_tori.I, positive, "> 0");
    if (c.nls_tori.I.size() != c.nls_tori.J.size()) probs.add(b.key("I"), "must have one action per entry of nls-tori.J");
    for (int j : c.nls_tori.J)
      if (static_cast<std::size_t>(j) > c.model.nls.modes) probs.add(b.key("J"), "indices must not exceed model.nls.modes");
    c.nls_tori.eps = b.numbers("eps", c.nls_tori.eps, positive, "> 0");
    c.nls_tori.threshold = b.number("threshold", 0.1, positive, "> 0");
    c.nls_tori.paths = static_cast<std::size_t>(b.integer("paths", 1000, 1, 100000000));
    c.nls_tori.truncation = parse_truncation(b.choice("truncation", "normal_form", {"linear", "normal_form", "full"}));
    b.finish();
  }
  {
    Node b = root.child("kam-scan");
    auto& k = c.kam_scan;
    k.mode = b.choice("mode", "nls", {"nls", "toy"});
    k.J = to_int(b.integers("J", {1, 2}, 1, 4096));
    k.l_mode_cutoff = static_cast<int>(b.integer("l_mode_cutoff", 12, 1, 4096));
    k.k_cutoff = static_cast<int>(b.integer("k_cutoff", 6, 0, 1000));
    k.tau = b.number("tau", 0.0);
    k.d = b.number("d", 2.0, positive, "> 0");
    k.alpha = b.number("alpha", 0.05, positive, "> 0");
    k.alphas = b.numbers("alphas", k.alphas, positive, "> 0");
    k.lo = b.numbers("lo", k.lo);
    k.hi = b.numbers("hi", k.hi);
    const auto pts = b.integers("points", {41, 41}, 1, 100000);
    k.points.assign(pts.begin(), pts.end());
    if (k.mode == "nls" && (k.lo.size() != k.J.size() || k.hi.size() != k.J.size() || k.points.size() != k.J.size()))
      probs.add(b.key("lo"), "kam-scan.lo, kam-scan.hi and kam-scan.points need one entry per entry of kam-scan.J");
    for (std::size_t i = 0; i < std::min(k.lo.size(), k.hi.size()); ++i)
      if (k.lo[i] > k.hi[i]) probs.add(b.key("hi"), "must not be below kam-scan.lo");
    if (b.has("box")) {
      const Json* box = b.get("box");
      k.box.clear();
      bool ok = box->is_array() && !box->empty();
      if (ok)
        for (const auto& e : *box) {
          if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number() || e[0].get<double>() >= e[1].get<double>()) {
            ok = false;
            break;
          }
          k.box.emplace_back(e[0].get<double>(), e[1].get<double>());
        }
      if (!ok) probs.add(b.key("box"), "must be a nonempty array of [lo, hi] pairs with lo < hi");
    } else {
      b.get("box");
    }
    k.normal_modes = to_int(b.integers("normal_modes", {3, 4, 5}, 1, 4096));
    k.samples = static_cast<std::size_t>(b.integer("samples", 100000, 1, 1000000000));
    b.finish();
  }
  root.finish();

  if (!probs.items.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : probs.items) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

}  // namespace omkam::cli
