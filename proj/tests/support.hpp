#pragma once

// Shared fixtures and independent oracles for the unit tests and the
// acceptance binary.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "affrig/core_geometry.hpp"
#include "affrig/dynamics.hpp"
#include "affrig/metric_zoo.hpp"
#include "affrig/random.hpp"

namespace affrig::testing {

using nlohmann::json;

// Every catalog metric, with parameters for the ones that need them.
inline std::vector<std::pair<std::string, json>> zoo_specs() {
  return {
      {"euclidean", json::object()},
      {"euclidean", json{{"dimension", 3}}},
      {"randers", json::object()},
      {"sphere", json::object()},
      {"poincare", json::object()},
      {"funk", json::object()},
      {"product", json::object()},
      {"custom",
       json{{"dimension", 2}, {"matrix", {"1 + x1^2", "0.3*x2", "0.3*x2", "2 + sin(x1)"}}}},
  };
}

inline Vec random_in_box(Rng& rng, const Vec& lo, const Vec& hi) {
  Vec x(lo.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.uniform(lo[i], hi[i]);
  return x;
}

// Points in the zoo sample box with y of random direction and length.
inline std::vector<SlitTangentPoint> random_points(const FinslerMetric& m, int count, std::uint64_t seed) {
  const auto z = zoo_entry(m.name(), m.params());
  const int n = m.dimension();
  const Vec lo = Vec::Constant(n, z.sample_lower), hi = Vec::Constant(n, z.sample_upper);
  Rng rng(seed);
  std::vector<SlitTangentPoint> pts;
  while (static_cast<int>(pts.size()) < count) {
    const Vec x = random_in_box(rng, lo, hi);
    const Vec y = rng.uniform(0.5, 2.0) * rng.unit_vector(n);
    if (m.chart().contains(x)) pts.push_back({x, y});
  }
  return pts;
}

// Spray of a conformal metric lambda(x) |y|: with s = grad log lambda,
// G = (s . y) y - |y|^2 s / 2, i.e. half the Christoffel contraction.
inline Vec conformal_spray(const Vec& s, const Vec& y) { return s.dot(y) * y - 0.5 * y.squaredNorm() * s; }

inline Vec sphere_log_gradient(const Vec& x) { return -2.0 * x / (1.0 + x.squaredNorm()); }
inline Vec poincare_log_gradient(const Vec& x) { return 2.0 * x / (1.0 - x.squaredNorm()); }

// Signed angle from a to b in the (i, j) coordinate plane.
inline double plane_angle(const Vec& a, const Vec& b, int i = 0, int j = 1) {
  return std::atan2(a[i] * b[j] - a[j] * b[i], a[i] * b[i] + a[j] * b[j]);
}

// Distance of two angles on the circle.
inline double angle_distance(double a, double b) {
  const double d = std::remainder(a - b, 2 * M_PI);
  return std::abs(d);
}

// Least-squares slope of log(err) against log(h).
inline double loglog_slope(const std::vector<double>& h, const std::vector<double>& err) {
  double mx = 0, my = 0;
  const double k = static_cast<double>(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    mx += std::log(h[i]) / k;
    my += std::log(err[i]) / k;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    sxy += (std::log(h[i]) - mx) * (std::log(err[i]) - my);
    sxx += (std::log(h[i]) - mx) * (std::log(h[i]) - mx);
  }
  return sxy / sxx;
}

// Maximal residuals of the core invariant suite over a point set.
struct InvariantMaxima {
  int points = 0;
  double homogeneity = 0;      // |F(x, l y) - l F| / (l F)
  double euler = 0;            // |g(y, y) - F^2| / F^2
  double euler_dF = 0;         // |dF(C) - F| / F
  double spray_homogeneity = 0;
  double connection_homogeneity = 0;
  double liouville_bracket = 0;    // |[C, X^h]| / |X^h|
  double torsion = 0;              // |[X^h, Y^v] - [Y^h, X^v] - [X, Y]^v|
  double kernel = 0;               // |dF(X^h)| / (|dF| |X^h|)
  double slope_min = 2, slope_max = 2;
  int slope_checks = 0;

  bool within_tolerances() const {
    return homogeneity < 1e-10 && euler < 1e-8 && euler_dF < 1e-10 && spray_homogeneity < 1e-8 &&
           connection_homogeneity < 1e-8 && liouville_bracket < 1e-6 && torsion < 1e-6 && kernel < 1e-8 &&
           slope_min > 1.8 && slope_max < 2.2;
  }
};

namespace detail {

inline double rel(double num, double den) { return den > 0 ? num / den : num; }

// Observed order of central differences of f along a direction against the
// exact directional derivative.  Step sizes whose error is below the
// roundoff floor 100 eps |f| / h carry no truncation signal and are dropped;
// returns false when fewer than three steps remain.
template <class Fn>
bool observed_order(Fn&& f, const Vec& exact, double& slope) {
  const std::vector<double> steps{1e-2, 3e-3, 1e-3, 3e-4, 1e-4};
  const double fscale = std::max(1.0, f(0.0).norm());
  std::vector<double> hs, errs;
  for (double h : steps) {
    const double e = ((f(h) - f(-h)) / (2 * h) - exact).norm();
    if (e > 100 * std::numeric_limits<double>::epsilon() * fscale / h) {
      hs.push_back(h);
      errs.push_back(e);
    }
  }
  if (hs.size() < 3) return false;
  slope = loglog_slope(hs, errs);
  return true;
}

}  // namespace detail

inline InvariantMaxima core_invariants(const MetricPtr& m, int count, std::uint64_t seed) {
  InvariantMaxima r;
  const int n = m->dimension();
  Rng rng(derive_seed(seed, 77));
  // Non-commuting polynomial fields X = x2 d/dx1, Y = x1 d/dx2 with
  // [X, Y] = DY X - DX Y = -x1 d/dx1 + x2 d/dx2 (padded with zeros).
  std::vector<std::string> X(n, "0"), Y(n, "0"), XY(n, "0");
  if (n >= 2) {
    X[0] = "x2";
    Y[1] = "x1";
    XY[0] = "-x1";
    XY[1] = "x2";
  } else {
    X[0] = "x1";
    Y[0] = "1";
    XY[0] = "-1";
  }
  const auto Xf = BaseVectorField::expressions(X), Yf = BaseVectorField::expressions(Y),
             XYf = BaseVectorField::expressions(XY);
  const auto C = BundleVectorField::liouville(n);
  std::vector<std::pair<BaseVectorField, BaseVectorField>> pairs{{Xf, Yf}};
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.push_back({BaseVectorField::coordinate(n, i), BaseVectorField::coordinate(n, j)});

  for (const auto& p : random_points(*m, count, seed)) {
    ++r.points;
    const double F = evaluate_metric(*m, p);
    for (double l : {0.5, 2.0, 7.0})
      r.homogeneity = std::max(r.homogeneity, detail::rel(std::abs(evaluate_metric(*m, {p.x, l * p.y}) - l * F), l * F));
    const Mat g = fundamental_tensor(*m, p);
    r.euler = std::max(r.euler, std::abs(p.y.dot(g * p.y) - F * F) / (F * F));
    const Vec dFp = dF(*m, p);
    r.euler_dF = std::max(r.euler_dF, std::abs(dFp.tail(n).dot(p.y) - F) / F);

    const auto s = spray_coefficients(*m, p);
    for (double l : {0.5, 2.0, 7.0}) {
      const auto sl = spray_coefficients(*m, {p.x, l * p.y});
      if (s.G.norm() > 0)
        r.spray_homogeneity = std::max(r.spray_homogeneity, (sl.G - l * l * s.G).norm() / (l * l * s.G.norm()));
      if (s.N.norm() > 0)
        r.connection_homogeneity = std::max(r.connection_homogeneity, (sl.N - l * s.N).norm() / (l * s.N.norm()));
    }

    for (int i = 0; i < n; ++i) {
      const auto h = BundleVectorField::horizontal_lift(m, BaseVectorField::coordinate(n, i));
      const Vec v = h.value(p).stacked();
      r.kernel = std::max(r.kernel, std::abs(dFp.dot(v)) / (dFp.norm() * v.norm()));
      const Vec cb = BundleVectorField::bracket(C, h).value(p).stacked();
      r.liouville_bracket = std::max(r.liouville_bracket, cb.norm() / v.norm());
    }
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto& [A, B] = pairs[k];
      const auto Ah = BundleVectorField::horizontal_lift(m, A), Bh = BundleVectorField::horizontal_lift(m, B);
      const auto Av = BundleVectorField::vertical_lift(A), Bv = BundleVectorField::vertical_lift(B);
      const Vec lhs = BundleVectorField::bracket(Ah, Bv).value(p).stacked() -
                      BundleVectorField::bracket(Bh, Av).value(p).stacked();
      Vec rhs = Vec::Zero(2 * n);
      if (k == 0) rhs = BundleVectorField::vertical_lift(XYf).value(p).stacked();
      r.torsion = std::max(r.torsion, (lhs - rhs).norm() / std::max(1.0, lhs.norm()));
    }

    // Finite-difference order of dF (from F), g (from F_y) and N (from G).
    Vec dz(2 * n);
    for (Eigen::Index i = 0; i < dz.size(); ++i) dz[i] = rng.uniform(-1.0, 1.0);
    dz.normalize();
    const Vec dy = rng.unit_vector(n);
    auto shifted = [&](double h) { return SlitTangentPoint{p.x + h * dz.head(n), p.y + h * dz.tail(n)}; };
    double slope = 2;
    auto record = [&](bool ok) {
      if (!ok) return;
      ++r.slope_checks;
      r.slope_min = std::min(r.slope_min, slope);
      r.slope_max = std::max(r.slope_max, slope);
    };
    record(detail::observed_order(
        [&](double h) {
          Vec v(1);
          v[0] = evaluate_metric(*m, shifted(h));
          return v;
        },
        Vec::Constant(1, dFp.dot(dz)), slope));
    record(detail::observed_order(
        [&](double h) {
          const SlitTangentPoint q{p.x, p.y + h * dy};
          return Vec(dF(*m, q).tail(n) * evaluate_metric(*m, q));
        },
        g * dy, slope));
    record(detail::observed_order([&](double h) { return spray_coefficients(*m, {p.x, p.y + h * dy}).G; },
                                  s.N * dy, slope));
  }
  return r;
}

}  // namespace affrig::testing
