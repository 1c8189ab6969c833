#pragma once

// Truncated weighted lattice phase space: sites carry (q, p) with q an angle
// (or a real coordinate for line-chart models) and p a momentum.

#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace omkam {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Topology of the q coordinate. Lattice models live on the torus; the
// spectral NLS modes use plain real coordinates.
enum class Chart { angle, line };

// Canonical representative in [0, 2pi).
double wrap_angle(double a);
// Representative in [-pi, pi].
double lift_angle(double a);
// Geodesic distance on the circle, in [0, pi].
double torus_distance(double a, double b);
// Signed shortest increment taking `from` to `to`.
double angle_increment(double from, double to);

class WeightSequence {
 public:
  using Site = std::vector<int>;

  WeightSequence(std::vector<Site> sites, std::vector<double> rho);

  // Box [-radius, radius]^dim with rho_i = 2^{-|i|_1}.
  static WeightSequence default_box(int dim, int radius);
  // One-dimensional sites 0..n-1 with rho_i = 2^{-i}.
  static WeightSequence chain(std::size_t n);
  static WeightSequence uniform(std::size_t n, double value = 1.0);
  // Sites 0..n-1 with explicit weights.
  static WeightSequence from_values(std::vector<double> rho);

  std::size_t size() const { return rho_.size(); }
  double rho(std::size_t i) const { return rho_[i]; }
  std::span<const double> rho() const { return rho_; }
  const std::vector<Site>& sites() const { return sites_; }
  // Sum of rho (C_rho).
  double c_rho() const { return c_rho_; }
  double sum_squares() const { return sum_sq_; }

  WeightSequence scaled(double factor) const;

  bool operator==(const WeightSequence&) const = default;

 private:
  std::vector<Site> sites_;
  std::vector<double> rho_;
  double c_rho_ = 0.0;
  double sum_sq_ = 0.0;
};

struct LatticeState {
  std::vector<double> q;
  std::vector<double> p;
  Chart chart = Chart::angle;

  static LatticeState zeros(std::size_t n, Chart chart = Chart::angle);

  std::size_t size() const { return q.size(); }
  // Wraps angles into [0, 2pi) for angle charts; no-op otherwise.
  void canonicalize();

  bool operator==(const LatticeState&) const = default;
};

// A tangent (difference) vector. Angles enter as lifted increments.
struct Tangent {
  std::vector<double> dq;
  std::vector<double> dp;
};

// a - b with wrap-aware angle increments.
Tangent difference(const LatticeState& a, const LatticeState& b);

double weighted_norm(const LatticeState& u, const WeightSequence& w);
double weighted_norm(const Tangent& u, const WeightSequence& w);
double weighted_inner(const Tangent& u, const Tangent& v, const WeightSequence& w);
double state_distance(const LatticeState& a, const LatticeState& b,
                      const WeightSequence& w);

class PathGrid {
 public:
  PathGrid(double t0, double t1, std::vector<LatticeState> nodes);

  // Constant path.
  static PathGrid constant(const LatticeState& x, double t0, double t1, std::size_t steps);
  // Straight line between two states (angles along the shortest arc).
  static PathGrid linear(const LatticeState& from, const LatticeState& to, double t0,
                         double t1, std::size_t steps);

  double t0() const { return t0_; }
  double t1() const { return t1_; }
  std::size_t steps() const { return nodes_.size() - 1; }
  double dt() const { return (t1_ - t0_) / static_cast<double>(steps()); }
  double time(std::size_t k) const;
  std::size_t sites() const { return nodes_.front().size(); }
  Chart chart() const { return nodes_.front().chart; }

  const std::vector<LatticeState>& nodes() const { return nodes_; }
  const LatticeState& node(std::size_t k) const { return nodes_[k]; }
  const LatticeState& front() const { return nodes_.front(); }
  const LatticeState& back() const { return nodes_.back(); }

  bool operator==(const PathGrid&) const = default;

 private:
  double t0_;
  double t1_;
  std::vector<LatticeState> nodes_;
};

// Trapezoidal L^2([t0,t1], l^2_rho) norm.
double path_norm(const PathGrid& path, const WeightSequence& w);
// Same norm applied to the pointwise wrap-aware difference of two paths on one grid.
double path_distance(const PathGrid& a, const PathGrid& b, const WeightSequence& w);

void require_same_sites(std::size_t a, std::size_t b, const char* what);

}  // namespace omkam
