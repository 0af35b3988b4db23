#include "affrig/dynamics.hpp"

#include <cmath>
#include <sstream>

#include "affrig/errors.hpp"

namespace affrig {

namespace {

OdeDomain bundle_domain(const FinslerMetric* m, int n) {
  return [m, n](const Vec& s) {
    if (s.segment(n, n).norm() == 0.0) return false;
    return m == nullptr || m->chart().contains(s.head(n));
  };
}

void check_start(const BundleVectorField& xi, const SlitTangentPoint& z0) {
  if (z0.dimension() != xi.dimension()) throw ParameterError("point dimension does not match field");
  if (xi.metric()) validate_point(*xi.metric(), z0);
  else if (z0.y.norm() == 0.0) throw SlitViolation("y = 0 is not on the slit tangent bundle");
}

}  // namespace

SlitTangentPoint integrate_flow(const BundleVectorField& xi, const SlitTangentPoint& z0, double t,
                                const IntegratorConfig& cfg) {
  check_start(xi, z0);
  const int n = xi.dimension();
  auto rhs = [&](double, const Vec& s, Vec& d) {
    const auto v = xi.value(SlitTangentPoint::from_stacked(s));
    d.resize(2 * n);
    d << v.a, v.b;
  };
  return SlitTangentPoint::from_stacked(integrate_ode(rhs, 0.0, t, z0.stacked(), cfg, bundle_domain(xi.metric(), n)));
}

FlowJacobian flow_variational(const BundleVectorField& xi, const SlitTangentPoint& z0, double t,
                              const IntegratorConfig& cfg) {
  check_start(xi, z0);
  const int n = xi.dimension(), m = 2 * n;
  Vec state(m + m * m);
  state.head(m) = z0.stacked();
  Eigen::Map<Mat>(state.data() + m, m, m).setIdentity();
  auto rhs = [&](double, const Vec& s, Vec& d) {
    d.resize(m + m * m);
    Vec f;
    const Mat D = xi.jacobian(SlitTangentPoint::from_stacked(s.head(m)), &f);
    d.head(m) = f;
    Eigen::Map<Mat>(d.data() + m, m, m) = D * Eigen::Map<const Mat>(s.data() + m, m, m);
  };
  const Vec out = integrate_ode(rhs, 0.0, t, state, cfg, bundle_domain(xi.metric(), n));
  return {SlitTangentPoint::from_stacked(out.head(m)), Eigen::Map<const Mat>(out.data() + m, m, m)};
}

BundleTangentVector flow_pushforward(const BundleVectorField& xi, double t, const BundleTangentVector& v,
                                     const IntegratorConfig& cfg) {
  check_start(xi, v.base);
  const int n = xi.dimension(), m = 2 * n;
  Vec state(2 * m);
  state << v.base.stacked(), v.stacked();
  auto rhs = [&](double, const Vec& s, Vec& d) {
    d.resize(2 * m);
    Vec f;
    const Mat D = xi.jacobian(SlitTangentPoint::from_stacked(s.head(m)), &f);
    d << f, D * s.tail(m);
  };
  const Vec out = integrate_ode(rhs, 0.0, t, state, cfg, bundle_domain(xi.metric(), n));
  const auto base = SlitTangentPoint::from_stacked(out.head(m));
  return BundleTangentVector::from_stacked(base, out.tail(m));
}

BundleTangentVector lie_bracket(const BundleVectorField& xi, const BundleVectorField& eta, const SlitTangentPoint& z) {
  return BundleVectorField::bracket(xi, eta).value(z);
}

// ---------------------------------------------------------------------------

CurveOnM CurveOnM::polygon(const std::vector<Vec>& vertices, bool close) {
  if (vertices.empty()) throw ParameterError("polygon needs at least one vertex");
  CurveOnM c(vertices.front());
  for (std::size_t k = 1; k < vertices.size(); ++k) c.line_to(vertices[k]);
  if (close && vertices.size() > 1) c.line_to(vertices.front());
  return c;
}

CurveOnM CurveOnM::circle(const Vec& center, double radius, int i, int j, bool ccw, double phase) {
  if (!(radius > 0)) throw ParameterError("circle radius must be positive");
  Vec p = center;
  p[i] += radius * std::cos(phase);
  p[j] += radius * std::sin(phase);
  CurveOnM c(p);
  c.arc(center, ccw ? 2 * M_PI : -2 * M_PI, i, j);
  return c;
}

CurveOnM& CurveOnM::line_to(const Vec& p) {
  if (p.size() != start_.size()) throw ParameterError("curve dimension mismatch");
  Segment s;
  s.kind = Segment::Kind::Line;
  s.start = end();
  s.end = p;
  segments_.push_back(std::move(s));
  return *this;
}

CurveOnM& CurveOnM::arc(const Vec& center, double sweep, int i, int j) {
  const int n = dimension();
  if (center.size() != n || i < 0 || j < 0 || i >= n || j >= n || i == j)
    throw ParameterError("invalid arc specification");
  Segment s;
  s.kind = Segment::Kind::Arc;
  s.start = end();
  s.center = center;
  s.axis_i = i;
  s.axis_j = j;
  const double dx = s.start[i] - center[i], dy = s.start[j] - center[j];
  s.radius = std::hypot(dx, dy);
  if (!(s.radius > 0)) throw ParameterError("arc start coincides with its center");
  for (int k = 0; k < n; ++k)
    if (k != i && k != j && s.start[k] != center[k]) throw ParameterError("arc start not in the plane of the center");
  s.angle0 = std::atan2(dy, dx);
  s.angle1 = s.angle0 + sweep;
  s.end = segment_position(s, 1.0);
  if (std::abs(std::fmod(sweep, 2 * M_PI)) < 1e-15 && sweep != 0.0) s.end = s.start;  // exact closure
  segments_.push_back(std::move(s));
  return *this;
}

CurveOnM& CurveOnM::geodesic(MetricPtr m, const Vec& velocity, const IntegratorConfig& cfg) {
  Segment s;
  s.kind = Segment::Kind::Geodesic;
  s.start = end();
  s.velocity0 = velocity;
  const auto q = affrig::geodesic(m, {s.start, velocity}, 1.0, cfg);
  s.end = q.x;
  s.velocity1 = q.y;
  s.metric = std::move(m);
  segments_.push_back(std::move(s));
  return *this;
}

CurveOnM& CurveOnM::geodesic_to(MetricPtr m, const Vec& target, const IntegratorConfig& cfg) {
  const Vec v = geodesic_shooting(m, end(), target, cfg);
  geodesic(std::move(m), v, cfg);
  segments_.back().end = target;
  return *this;
}

CurveOnM CurveOnM::reversed() const {
  CurveOnM r(end());
  for (auto it = segments_.rbegin(); it != segments_.rend(); ++it) {
    Segment s = *it;
    std::swap(s.start, s.end);
    std::swap(s.angle0, s.angle1);
    // Reversed geodesics are not geodesics for non-reversible metrics.
    if (s.kind == Segment::Kind::Geodesic) s.backward = !s.backward;
    r.segments_.push_back(std::move(s));
  }
  return r;
}

CurveOnM CurveOnM::then(const CurveOnM& other) const {
  if ((other.start() - end()).norm() > 1e-12) throw ParameterError("curves do not join");
  CurveOnM c = *this;
  for (auto s : other.segments_) c.segments_.push_back(std::move(s));
  return c;
}

Vec segment_position(const CurveOnM::Segment& s, double u) {
  switch (s.kind) {
    case CurveOnM::Segment::Kind::Line:
      return s.start + u * (s.end - s.start);
    case CurveOnM::Segment::Kind::Arc: {
      const double a = s.angle0 + u * (s.angle1 - s.angle0);
      Vec p = s.center;
      p[s.axis_i] += s.radius * std::cos(a);
      p[s.axis_j] += s.radius * std::sin(a);
      return p;
    }
    case CurveOnM::Segment::Kind::Geodesic: {
      if (u == 0.0) return s.start;
      if (u == 1.0) return s.end;
      const Vec& origin = s.backward ? s.end : s.start;
      return geodesic(s.metric, {origin, s.velocity0}, s.backward ? 1.0 - u : u).x;
    }
  }
  return s.start;
}

Vec segment_velocity(const CurveOnM::Segment& s, double u) {
  switch (s.kind) {
    case CurveOnM::Segment::Kind::Line:
      return s.end - s.start;
    case CurveOnM::Segment::Kind::Arc: {
      const double w = s.angle1 - s.angle0;
      const double a = s.angle0 + u * w;
      Vec v = Vec::Zero(s.center.size());
      v[s.axis_i] = -s.radius * w * std::sin(a);
      v[s.axis_j] = s.radius * w * std::cos(a);
      return v;
    }
    case CurveOnM::Segment::Kind::Geodesic: {
      if (s.backward) {
        if (u == 0.0) return -s.velocity1;
        return -geodesic(s.metric, {s.end, s.velocity0}, 1.0 - u).y;
      }
      if (u == 0.0) return s.velocity0;
      return geodesic(s.metric, {s.start, s.velocity0}, u).y;
    }
  }
  return Vec::Zero(s.start.size());
}

namespace {
std::pair<std::size_t, double> locate(std::size_t count, double t) {
  if (count == 0) throw ParameterError("curve has no segments");
  const double scaled = std::clamp(t, 0.0, 1.0) * static_cast<double>(count);
  const auto k = std::min(count - 1, static_cast<std::size_t>(scaled));
  return {k, scaled - static_cast<double>(k)};
}
}  // namespace

Vec CurveOnM::position(double t) const {
  if (segments_.empty()) return start_;
  const auto [k, u] = locate(segments_.size(), t);
  return segment_position(segments_[k], u);
}

Vec CurveOnM::velocity(double t) const {
  if (segments_.empty()) return Vec::Zero(start_.size());
  const auto [k, u] = locate(segments_.size(), t);
  return static_cast<double>(segments_.size()) * segment_velocity(segments_[k], u);
}

// ---------------------------------------------------------------------------

Vec parallel_transport(const MetricPtr& m, const CurveOnM& c, const Vec& y0, const IntegratorConfig& cfg,
                       TransportStats* stats) {
  const int n = m->dimension();
  if (c.dimension() != n || y0.size() != n) throw ParameterError("transport: dimension mismatch");
  if (y0.norm() == 0.0) throw SlitViolation("transport: y0 = 0");
  const double f0 = evaluate_metric(*m, {c.start(), y0});
  Vec y = y0;
  for (const auto& seg : c.segments()) {
    if (seg.kind == CurveOnM::Segment::Kind::Geodesic) {
      // Joint state (x, v, y): the curve is integrated alongside the fibre.
      // Backward segments run the forward geodesic from parameter 1 to 0.
      Vec s(3 * n);
      if (seg.backward) s << seg.start, seg.velocity1, y;
      else s << seg.start, seg.velocity0, y;
      auto rhs = [&](double, const Vec& st, Vec& d) {
        const Vec x = st.head(n), v = st.segment(n, n), w = st.tail(n);
        const auto sv = spray_coefficients(*m, {x, v});
        const auto sw = spray_coefficients(*m, {x, w});
        d.resize(3 * n);
        d << v, -2.0 * sv.G, -sw.N * v;
      };
      auto domain = [&](const Vec& st) { return m->chart().contains(st.head(n)) && st.tail(n).norm() > 0.0; };
      y = seg.backward ? integrate_ode(rhs, 1.0, 0.0, s, cfg, domain).tail(n)
                       : integrate_ode(rhs, 0.0, 1.0, s, cfg, domain).tail(n);
    } else {
      auto rhs = [&](double u, const Vec& w, Vec& d) {
        const Vec x = segment_position(seg, u);
        d = -spray_coefficients(*m, {x, w}).N * segment_velocity(seg, u);
      };
      auto domain = [](const Vec& w) { return w.norm() > 0.0; };
      y = integrate_ode(rhs, 0.0, 1.0, y, cfg, domain);
    }
  }
  if (stats) {
    stats->f_start = f0;
    stats->f_end = evaluate_metric(*m, {c.end(), y});
  }
  return y;
}

SlitTangentPoint geodesic(const MetricPtr& m, const SlitTangentPoint& p, double t, const IntegratorConfig& cfg) {
  return integrate_flow(BundleVectorField::spray(m), p, t, cfg);
}

Vec geodesic_shooting(const MetricPtr& m, const Vec& a, const Vec& b, const IntegratorConfig& cfg) {
  const int n = m->dimension();
  if (a.size() != n || b.size() != n) throw ParameterError("shooting: dimension mismatch");
  if ((b - a).norm() == 0.0) throw SlitViolation("shooting: endpoints coincide");
  const auto spray = BundleVectorField::spray(m);
  Vec v = b - a;
  const double scale = std::max(1.0, b.norm());
  for (int iter = 0; iter < 40; ++iter) {
    const auto fj = flow_variational(spray, {a, v}, 1.0, cfg);
    const Vec r = fj.end.x - b;
    if (r.norm() < 1e-12 * scale) return v;
    const Mat Jv = fj.jacobian.block(0, n, n, n);
    Vec dv = Jv.fullPivLu().solve(-r);
    // Damped step keeps the trial geodesic inside the chart.
    double lambda = 1.0;
    while (lambda > 1e-3 && dv.norm() * lambda > v.norm()) lambda *= 0.5;
    v += lambda * dv;
  }
  std::ostringstream os;
  os << "geodesic shooting from (" << a.transpose() << ") to (" << b.transpose() << ") did not converge";
  throw Error(os.str());
}

}  // namespace affrig
