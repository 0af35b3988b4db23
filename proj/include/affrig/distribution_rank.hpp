#pragma once

// Pointwise dimension of D^h, the subspace field spanned by the stable hull
// of horizontal vector fields.  Lower bounds come from explicit members of
// D^h (iterated brackets and flow-word push-forwards of horizontal lifts);
// the upper bound 2n - 1 comes from D^h lying in ker dF.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "affrig/dynamics.hpp"

namespace affrig {

struct GeneratorBudget {
  int depth = 3;          // bracket depth
  int word_length = 3;    // maximal flow-word length k
  int words = 32;         // random flow words
  double time_range = 0.5;     // times uniform in [-time_range, time_range] ...
  std::vector<double> times;   // ... unless a list of times is given
  std::uint64_t seed = 0;
};

struct RankThresholds {
  double tau = 1e-7;
  double df_tolerance = 1e-6;    // relative |dF(v)| / (|dF| |v|)
  double negligible = 1e-10;     // generators below this fraction of the largest are dropped
};

// Horizontal lifts of the coordinate fields and their left-normed brackets
// [..[[X_i1, X_i2], X_i3].., X_ik] up to `depth`.  Throws MetricDegenerate.
std::vector<BundleTangentVector> bracket_generators(const MetricPtr& m, const SlitTangentPoint& v, int depth);

struct FlowGenerators {
  std::vector<BundleTangentVector> vectors;
  std::vector<std::string> words;  // description per vector
  int dropped = 0;                 // words that left the chart or failed
  double base_mismatch = 0.0;      // max |return point - v| over words
};

// (Fl^{X1}_{t1} o ... o Fl^{Xk}_{tk})_# Y evaluated at v for random words.
FlowGenerators flow_generators(const MetricPtr& m, const SlitTangentPoint& v, const GeneratorBudget& budget,
                               const IntegratorConfig& cfg = {});

struct NumericalRank {
  int rank = 0;
  std::vector<double> singular_values;  // descending
};

// Rank of the row-normalized matrix: #{sigma_i > tau sigma_1}.  Zero rows
// are skipped.  Throws ParameterError on an empty list or tau outside (0, 1).
NumericalRank numerical_rank(const std::vector<Vec>& vectors, double tau);

// Rank of the vertical projections v(a ; b) = (0 ; b + N a) of the
// normalized vectors, measured against sigma_1 of the unprojected set.
int vertical_projection_rank(const MetricPtr& m, const std::vector<BundleTangentVector>& vectors, double tau);

// |dF(u)| / (|dF| |u|).
double df_residual(const Vec& dF, const BundleTangentVector& u);

enum class RankVerdict { CertifiedMax, BelowMax, Inconclusive };
std::string to_string(RankVerdict v);

struct RankCertificate {
  SlitTangentPoint point;
  int vectors_generated = 0;
  int vectors_used = 0;        // after dropping negligible generators
  int words_dropped = 0;
  std::vector<double> singular_values;
  int r_lo = 0;
  int r_hi = 0;                // 2n - 1
  double df_residual_max = 0.0;
  int df_violations = 0;
  RankVerdict verdict = RankVerdict::Inconclusive;
  int bracket_rank = 0;        // lifts and brackets only
  int flow_rank = 0;           // lifts and flow words only
  int vertical_rank = 0;
  bool split_consistent = true;   // r_lo = n + vertical rank
  bool anomaly = false;              // flow_rank > bracket_rank + 2
};

// Throws MetricDegenerate, and ConsistencyError if 2n independent members
// of ker dF are found with passing residuals.
RankCertificate dh_dimension(const MetricPtr& m, const SlitTangentPoint& v, const GeneratorBudget& budget,
                             const RankThresholds& thresholds = {}, const IntegratorConfig& cfg = {});

struct SamplePlan {
  int grid_per_dimension = 5;
  int random_points = 64;
  Vec lower, upper;            // sampling box for x (default: the chart box)
  std::uint64_t seed = 0;
};

// Grid points first, then random points, all inside the chart (grid nodes
// outside it are skipped); every y is a seeded unit vector.
std::vector<SlitTangentPoint> sample_points(const FinslerMetric& m, const SamplePlan& plan);

struct RankMapEntry {
  int index = 0;
  SlitTangentPoint point;
  std::optional<RankCertificate> certificate;
  std::string error_kind;      // "MetricDegenerate", "OutsideChart", ... when no certificate
  std::string error;
};

struct RankMap {
  std::vector<RankMapEntry> entries;
  int certified_max = 0, below_max = 0, inconclusive = 0, degenerate = 0, failed = 0;
  int anomalies = 0, df_violations = 0, split_failures = 0;
  int max_r_lo = 0;
  double certified_fraction() const;  // among points with a certificate
};

// Deterministic for a given plan seed regardless of `threads`.  Consistency
// errors abort the scan; other per-point errors are recorded.
RankMap rank_map(const MetricPtr& m, const SamplePlan& plan, const GeneratorBudget& budget,
                 const RankThresholds& thresholds = {}, int threads = 1, const IntegratorConfig& cfg = {});

struct SemicontinuityReport {
  int centers = 0;
  int checked = 0;       // cluster points with a decisive certificate
  int violations = 0;    // cluster rank below the center rank
  int skipped = 0;       // inconclusive or failed cluster points
};

// Lower semicontinuity spot check: around the first `centers` decisive
// points of `map`, `cluster` perturbed points must not have lower rank.
SemicontinuityReport semicontinuity_check(const MetricPtr& m, const RankMap& map, const GeneratorBudget& budget,
                                          const RankThresholds& thresholds = {}, int centers = 4, int cluster = 4,
                                          double radius = 1e-3, std::uint64_t seed = 0,
                                          const IntegratorConfig& cfg = {});

}  // namespace affrig
