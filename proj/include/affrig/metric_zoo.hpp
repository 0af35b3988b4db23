#pragma once

// Built-in metrics with known ground truth, and the planar singular
// subspace field used as the integrable-but-not-regular example.

#include <optional>
#include <string>
#include <vector>

#include "affrig/metric.hpp"

namespace affrig {

MetricPtr make_euclidean(int n);
// Minkowski-Randers F = |y| + <b, y>; requires |b| < 1.
MetricPtr make_randers(const Vec& b);
// Round sphere of the given radius in the stereographic chart, |x| <= 3.
MetricPtr make_sphere(double radius = 1.0);
MetricPtr make_poincare_disk();
// Funk metric of the unit disk, restricted to |x| <= 0.9.
MetricPtr make_funk_disk();
// F = sqrt(F_1^2 + ... + F_k^2) on the product of the factor charts.
MetricPtr make_riemannian_product(const std::vector<MetricPtr>& factors);
// F = sqrt(a_ij(x) y^i y^j); `entries` is row-major n*n (expressions in x1..xn).
MetricPtr make_riemannian_custom(int n, const std::vector<std::string>& entries, double lower,
                                 double upper);

// Construct by catalog name; throws ParameterError on unknown names or
// out-of-range parameters.
MetricPtr make_metric(const std::string& name, const nlohmann::json& params = nlohmann::json::object());

struct ZooParameter {
  std::string name;
  std::string type;
  std::string default_value;
  std::string description;
};

struct KnownMap {
  std::string map;             // ManifoldMap catalog name
  nlohmann::json params;
  std::string expected;        // "isometry", "homothety", "affinity", "not-affinity"
};

struct ZooEntry {
  std::string name;
  std::string description;
  std::vector<ZooParameter> parameters;
  // Known facts; cross-checked by the acceptance suite, never assumed.
  std::optional<int> expected_dh_rank;
  std::string expected_transitivity;  // "transitive", "not-transitive" or ""
  std::string basis;
  std::vector<KnownMap> known_maps;
  // Region used for default sampling plans (inside the chart).
  double sample_lower = -1.0;
  double sample_upper = 1.0;
  // Default holonomy base point and initial direction.
  std::vector<double> holonomy_base;
  std::vector<double> holonomy_direction;
};

const std::vector<ZooEntry>& zoo_catalog();
// Entry for a catalog name (aliases accepted); params can change dimensions.
ZooEntry zoo_entry(const std::string& name, const nlohmann::json& params = nlohmann::json::object());

// --- Planar subspace field E spanned by X = psi(y) d/dx, Y = phi(y) d/dy ---
//
// The coefficient of X is composed with the second coordinate.  Composing it
// with the first coordinate, as a literal reading of the usual presentation
// suggests, contradicts the stated rank profile (rank 2 off the strip
// 0 <= y <= 1, rank 1 inside, rank 0 on its boundary lines) and the listed
// integral manifolds, so the rank profile is treated as authoritative.

// h(t) = exp(-1/t^2), h(0) = 0.
double bump_h(double t);
// h+(s) = exp(-1/s) for s > 0, else 0.
double bump_h_plus(double s);
// phi(t) = h(t) h(t - 1): zero exactly at 0 and 1.
double bump_phi(double t);
// psi(t) = h+(-t) + h+(t - 1): zero exactly on [0, 1].
double bump_psi(double t);

// {X(p), Y(p)} at p = (x, y).
std::vector<Vec> r2_field_vectors(const Vec& p);

struct PlanarGrid {
  double x_lower = -2.0, x_upper = 2.0;
  double y_lower = -1.5, y_upper = 2.5;
  int x_count = 41, y_count = 41;
  // Grid coordinate k of `count` between lo and hi, exact at both ends.
  static double node(double lo, double hi, int k, int count);
};

struct PlanarRankCell {
  double x, y;
  int rank;
};
std::vector<PlanarRankCell> r2_rank_map(const PlanarGrid& grid);

// Closed-form rank of E at height y: 2 off [0,1], 1 inside, 0 on {0, 1}.
int r2_expected_rank(double y);

// Alternating flows along X and Y with seeded signed times; vertices of the
// trace.  Never crosses the lines y = 0 and y = 1.
std::vector<Vec> r2_orbit_trace(const Vec& start, int steps, std::uint64_t seed = 1, double step_time = 1.0);

}  // namespace affrig
