#pragma once

// Flows of bundle vector fields, their push-forwards, piecewise curves on M
// and nonlinear parallel transport y' = -N(c, y) c'.

#include <cmath>
#include <vector>

#include "affrig/ode.hpp"
#include "affrig/vector_field.hpp"

namespace affrig {

SlitTangentPoint integrate_flow(const BundleVectorField& xi, const SlitTangentPoint& z0, double t,
                                const IntegratorConfig& cfg = {});

struct FlowJacobian {
  SlitTangentPoint end;
  Mat jacobian;  // d Fl_t / d z at z0, 2n x 2n
};

// Flow together with its full derivative (variational equation J' = D xi J).
FlowJacobian flow_variational(const BundleVectorField& xi, const SlitTangentPoint& z0, double t,
                              const IntegratorConfig& cfg = {});

// (Fl^xi_t)_* v, based at Fl^xi_t(base(v)).
BundleTangentVector flow_pushforward(const BundleVectorField& xi, double t, const BundleTangentVector& v,
                                     const IntegratorConfig& cfg = {});

// [xi, eta] = D eta . xi - D xi . eta.
BundleTangentVector lie_bracket(const BundleVectorField& xi, const BundleVectorField& eta, const SlitTangentPoint& z);

// Piecewise-smooth curve in the chart.  Every segment carries its own
// parameter s in [0, 1]; the whole curve is parametrized by t in [0, 1] with
// equal time per segment.
class CurveOnM {
 public:
  struct Segment {
    enum class Kind { Line, Arc, Geodesic };
    Kind kind = Kind::Line;
    Vec start, end;
    // Arc about `center` in the coordinate plane (axis_i, axis_j).
    Vec center;
    double radius = 0.0, angle0 = 0.0, angle1 = 0.0;
    int axis_i = 0, axis_j = 1;
    // Geodesic with x(0) = start, x'(0) = velocity0, x(1) = end, x'(1) = velocity1.
    // A backward segment traverses that geodesic from x(1) to x(0); start and
    // end are then swapped while the velocities keep their forward meaning.
    Vec velocity0, velocity1;
    bool backward = false;
    MetricPtr metric;
  };

  CurveOnM() = default;
  explicit CurveOnM(Vec start) : start_(std::move(start)) {}

  static CurveOnM polygon(const std::vector<Vec>& vertices, bool close = true);
  // Full circle starting at angle `phase`; counterclockwise in the (i, j) plane if ccw.
  static CurveOnM circle(const Vec& center, double radius, int i = 0, int j = 1, bool ccw = true,
                         double phase = 0.0);

  CurveOnM& line_to(const Vec& p);
  // Arc about `center` in the (i, j) plane, sweeping by `sweep` radians from the current end.
  CurveOnM& arc(const Vec& center, double sweep, int i = 0, int j = 1);
  // Geodesic with the given initial velocity over unit parameter time.
  CurveOnM& geodesic(MetricPtr m, const Vec& velocity, const IntegratorConfig& cfg = {});
  // Geodesic from the current end to `target` (shooting).
  CurveOnM& geodesic_to(MetricPtr m, const Vec& target, const IntegratorConfig& cfg = {});

  CurveOnM reversed() const;
  CurveOnM then(const CurveOnM& other) const;

  int dimension() const { return static_cast<int>(start_.size()); }
  const Vec& start() const { return start_; }
  Vec end() const { return segments_.empty() ? start_ : segments_.back().end; }
  bool closed(double tol = 1e-12) const { return (end() - start_).norm() <= tol; }
  const std::vector<Segment>& segments() const { return segments_; }

  // Position and velocity (d/dt of the whole curve) at t in [0, 1].
  Vec position(double t) const;
  Vec velocity(double t) const;

 private:
  Vec start_;
  std::vector<Segment> segments_;
};

// Position and d/ds along one segment, u in [0, 1].
Vec segment_position(const CurveOnM::Segment& s, double u);
Vec segment_velocity(const CurveOnM::Segment& s, double u);

struct TransportStats {
  double f_start = 0.0;
  double f_end = 0.0;
  double relative_drift() const { return f_start > 0 ? std::abs(f_end - f_start) / f_start : 0.0; }
};

Vec parallel_transport(const MetricPtr& m, const CurveOnM& c, const Vec& y0, const IntegratorConfig& cfg = {},
                       TransportStats* stats = nullptr);

// Integral curve of the spray: (x(t) ; x'(t)).
SlitTangentPoint geodesic(const MetricPtr& m, const SlitTangentPoint& p, double t, const IntegratorConfig& cfg = {});

// Initial velocity v with exp_a(v) = b (unit parameter time), by Newton
// shooting on the variational equation.  Throws Error if it does not converge.
Vec geodesic_shooting(const MetricPtr& m, const Vec& a, const Vec& b, const IntegratorConfig& cfg = {});

}  // namespace affrig
