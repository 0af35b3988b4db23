#pragma once

// Holonomy of the nonlinear parallel transport: loop families at a base
// point, orbit sampling on the indicatrix and orbit-dimension statistics.

#include <cstdint>
#include <string>
#include <vector>

#include "affrig/dynamics.hpp"

namespace affrig {

enum class LoopKind { CoordinateRectangles, GeodesicPolygons, RandomPiecewise };
std::string to_string(LoopKind k);
LoopKind loop_kind_from_string(const std::string& s);

struct LoopFamily {
  Vec base;
  LoopKind kind = LoopKind::CoordinateRectangles;
  double edge = 0.2;       // edge length (rectangles) or radius (polygons), chart units
  int vertices = 4;        // polygon vertex count
  int count = 8;           // loops for the polygon and random kinds
  std::uint64_t seed = 0;
};

// Closed loops at family.base.  Rectangles: every coordinate plane and
// every sign pattern.  Loops leaving the chart are dropped.
std::vector<CurveOnM> make_loops(const MetricPtr& m, const LoopFamily& family, const IntegratorConfig& cfg = {});

// Holonomy image of y0 along a closed loop.  Throws ParameterError if the
// loop is not closed, ChartExit if the transport fails.
Vec loop_transport(const MetricPtr& m, const CurveOnM& loop, const Vec& y0, const IntegratorConfig& cfg = {});

struct OrbitSample {
  Vec base;
  Vec y0;                           // F(base, y0) = 1
  std::vector<Vec> points;          // points[0] = y0
  std::vector<int> word_lengths;    // loops composed to reach each point
  double max_f_drift = 0.0;         // max |F(base, point) - 1|
  int loops_available = 0;
  int words_skipped = 0;
};

// Grows the orbit by exploration: a random probe direction on the indicatrix
// selects the nearest orbit point, which is moved by a random word of 1..6
// loops or their reversals.  Deterministic given family.seed.
OrbitSample holonomy_orbit(const MetricPtr& m, const Vec& base, const Vec& y0, const LoopFamily& family, int count,
                           const IntegratorConfig& cfg = {}, int max_word = 6);

// Local tangent dimension at every orbit point: PCA of the point and its k
// nearest neighbours, counting covariance eigenvalues above tau times the
// largest.  Zero spread counts as dimension 0.
std::vector<int> local_dimensions(const std::vector<Vec>& points, int k, double tau);
// Modal local dimension (ties go to the smaller value).  Throws
// InsufficientSamples if fewer than k + 1 points are given (singletons are 0).
int orbit_dimension(const std::vector<Vec>& points, int k, double tau);
int orbit_dimension(const OrbitSample& sample, int k, double tau);
// k = min(16, count / 8).
int default_neighbours(int count);

enum class Transitivity { TransitiveEvidence, NotTransitive, Inconclusive };
std::string to_string(Transitivity t);

struct TransitivityResult {
  Transitivity verdict = Transitivity::Inconclusive;
  int dimension = 0;
  int expected_dimension = 0;       // n - 1
  std::string covering_kind;        // "max_angular_gap" (n = 2) or "covering_radius"
  double covering = 0.0;
  double covering_threshold = 0.0;
  bool covering_pass = false;
  double fraction_below = 0.0;      // local estimates below n - 1
};

// n = 2: TRANSITIVE_EVIDENCE needs max angular gap < 2 pi / 10; n >= 3:
// covering radius of the normalized orbit directions < 2 / 5 (a fifth of the
// diameter), measured with seeded probes.  NOT_TRANSITIVE needs dim < n - 1
// and at least 90% of local estimates below n - 1.
TransitivityResult transitivity_verdict(const OrbitSample& sample, int dim_estimate, int k, double tau,
                                        std::uint64_t seed = 0);

}  // namespace affrig
