#pragma once

// Classification of chart self-maps (affinity, homothety, isometry) and the
// rigidity report aggregating the transitivity and rank criteria.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "affrig/distribution_rank.hpp"
#include "affrig/holonomy.hpp"

namespace affrig {

// phi: R^n -> R^n given on Taylor series, so first and second derivatives
// are exact.
class ManifoldMap {
 public:
  using Function = std::function<std::vector<Series>(std::span<const Series>)>;

  ManifoldMap(int n, std::string name, nlohmann::json params, Function f);

  int dimension() const { return n_; }
  const std::string& name() const { return name_; }
  const nlohmann::json& params() const { return params_; }

  struct Jet {
    Vec value;
    Mat D;                   // D(i, j) = d phi_i / d x_j
    std::vector<Mat> D2;     // D2[i] = Hessian of phi_i
  };
  Vec operator()(const Vec& x) const;
  Jet jet(const Vec& x) const;

 private:
  int n_;
  std::string name_;
  nlohmann::json params_;
  Function f_;
};

// Catalog: identity; scale {factor}; linear {matrix}; translation {offset};
// shear {amount, i, j} (x_i += amount x_j); cubic {coefficient} (x_1 +=
// coefficient x_1^3); rotation {angle} (first two coordinates, about the
// origin); expression {components: ["...", ...]} in x1..xn.
ManifoldMap make_map(const std::string& name, int n, const nlohmann::json& params = nlohmann::json::object());
std::vector<std::string> map_names();

struct MapSamples {
  int count = 32;
  Vec lower, upper;          // box for base points (default: zoo sample box)
  double arc = 0.2;          // geodesic arc length parameter (F-unit speed)
  int nodes = 4;             // residual nodes along each arc, including t = 0
  std::uint64_t seed = 0;
};

struct AffinityResult {
  double max_residual = 0.0;
  double mean_residual = 0.0;
  double tolerance = 1e-5;
  bool is_affinity = false;
  int samples = 0;           // residual nodes evaluated
  int arcs_skipped = 0;      // geodesic arcs that left the chart
  Vec worst_point;
};

// Images of sampled geodesic arcs: scale-normalized residual of
// X'' + 2 G(X, X') with X = phi(x), X'' = D2 phi[x', x'] + D phi x''.
// Throws ChartExit if an image point leaves the chart, ParameterError if
// D phi is singular at a sample.
AffinityResult check_affinity(const MetricPtr& m, const ManifoldMap& phi, const MapSamples& samples,
                              const IntegratorConfig& cfg = {});

struct TransformationVerdict {
  std::string map;
  nlohmann::json params;
  AffinityResult affinity;
  double c = 0.0;                   // median of F(phi(x), D phi y) / F(x, y)
  double c_dispersion = 0.0;        // max |c_i - c| / |c|
  double c_min = 0.0, c_max = 0.0;
  double homothety_tolerance = 1e-6;
  double isometry_tolerance = 1e-6;
  bool is_affinity = false;
  bool is_homothety = false;
  bool is_isometry = false;
  int samples = 0;
};

TransformationVerdict classify_transformation(const MetricPtr& m, const ManifoldMap& phi, const MapSamples& samples,
                                              const IntegratorConfig& cfg = {});

struct TransitivityCriterion {
  Transitivity verdict = Transitivity::Inconclusive;
  TransitivityResult detail;
  int orbit_points = 0;
  int loops = 0;
  int words_skipped = 0;
  double max_f_drift = 0.0;
  bool passes = false;
};

struct RankCriterion {
  int points = 0;
  int certified_max = 0, below_max = 0, inconclusive = 0, degenerate = 0, failed = 0;
  double certified_fraction = 0.0;
  double pass_fraction = 0.95;
  int max_r_lo = 0;
  int df_violations = 0;
  int split_failures = 0;
  int anomalies = 0;
  // Certified point with the smallest rank, ties broken by the smallest
  // singular-value margin sigma_{r} / sigma_1.
  std::optional<RankCertificate> worst;
  bool passes = false;
};

struct RigidityReport {
  std::string metric;
  nlohmann::json metric_params;
  int dimension = 0;
  std::optional<TransitivityCriterion> criterion1;
  std::optional<RankCriterion> criterion2;
  std::string criterion3;
  std::vector<TransformationVerdict> classifications;
  std::vector<std::string> exhibits;    // homotheties that are not isometries
  std::string statement;
};

TransitivityCriterion summarize_orbit(const OrbitSample& sample, const TransitivityResult& result);
RankCriterion summarize_rank_map(const RankMap& map, int n, double pass_fraction = 0.95);

// Never asserts non-rigidity.  Throws ParameterError if neither criterion
// was evaluated.
RigidityReport assemble_report(const FinslerMetric& m, const std::optional<RankCriterion>& rank,
                               const std::optional<TransitivityCriterion>& orbit,
                               const std::vector<TransformationVerdict>& classifications);

}  // namespace affrig
