#pragma once

// The derivation chain F -> E = F^2/2 -> g -> G -> N -> lifts.
//
// Conventions: geodesics solve x'' + 2 G(x, x') = 0,
//   G^i = 1/2 g^{ih} (E_{y^h x^j} y^j - E_{x^h}),   N^i_j = dG^i/dy^j,
// and the horizontal lift of X is (X ; -N X).

#include <vector>

#include "affrig/metric.hpp"

namespace affrig {

struct SlitTangentPoint {
  Vec x;
  Vec y;

  int dimension() const { return static_cast<int>(x.size()); }
  Vec stacked() const;
  static SlitTangentPoint from_stacked(const Vec& z);
};

// Element (a ; b) of T(T°M): a along d/dx, b along d/dy.
struct BundleTangentVector {
  SlitTangentPoint base;
  Vec a;
  Vec b;

  Vec stacked() const;
  static BundleTangentVector from_stacked(const SlitTangentPoint& base, const Vec& v);
};

struct SprayData {
  Vec G;
  Mat N;
};

// Throws SlitViolation or OutsideChart.
void validate_point(const FinslerMetric& m, const SlitTangentPoint& p);

double evaluate_metric(const FinslerMetric& m, const SlitTangentPoint& p);

// (dF/dx ; dF/dy), exact.
Vec dF(const FinslerMetric& m, const SlitTangentPoint& p);

// g_ij = 1/2 d^2(F^2)/dy^i dy^j.  Throws MetricDegenerate unless positive definite.
Mat fundamental_tensor(const FinslerMetric& m, const SlitTangentPoint& p);

SprayData spray_coefficients(const FinslerMetric& m, const SlitTangentPoint& p);

BundleTangentVector horizontal_lift(const FinslerMetric& m, const SlitTangentPoint& p, const Vec& X);
BundleTangentVector vertical_lift(const SlitTangentPoint& p, const Vec& X);
BundleTangentVector liouville_field(const SlitTangentPoint& p);

// ---------------------------------------------------------------------------
// Series-level building blocks shared with the dynamics and rank modules.

// The 2n coordinate functions (x ; y) expanded around p in `space`.
std::vector<Series> bundle_variables(const TaylorSpace& space, const SlitTangentPoint& p);

// F as a series in the bundle variables z = (x ; y).
Series metric_series(const FinslerMetric& m, std::span<const Series> z);

// Spray coefficients G^i as series, exact to z.order() - 2.  Checks the
// fundamental tensor at the expansion point and throws MetricDegenerate.
std::vector<Series> spray_series(const FinslerMetric& m, std::span<const Series> z);

// N^i_j = dG^i/dy^j as a row-major n*n list, exact to one order below G.
std::vector<Series> connection_series(std::span<const Series> G);

// Positive definiteness test used by every entry point.
void check_nondegenerate(const Mat& g);

}  // namespace affrig
