#include "affrig/core_geometry.hpp"

#include <cmath>
#include <sstream>

#include "affrig/errors.hpp"

namespace affrig {

ChartDomain ChartDomain::box(int n, double lo, double hi) {
  ChartDomain d;
  d.dimension = n;
  d.lower = Vec::Constant(n, lo);
  d.upper = Vec::Constant(n, hi);
  return d;
}

bool ChartDomain::contains(const Vec& x) const {
  if (x.size() != dimension) return false;
  for (int i = 0; i < dimension; ++i) {
    if (!std::isfinite(x[i]) || x[i] < lower[i] || x[i] > upper[i]) return false;
  }
  return !(excluded && excluded(x));
}

Vec SlitTangentPoint::stacked() const {
  Vec z(x.size() + y.size());
  z << x, y;
  return z;
}

SlitTangentPoint SlitTangentPoint::from_stacked(const Vec& z) {
  const auto n = z.size() / 2;
  return {z.head(n), z.tail(n)};
}

Vec BundleTangentVector::stacked() const {
  Vec v(a.size() + b.size());
  v << a, b;
  return v;
}

BundleTangentVector BundleTangentVector::from_stacked(const SlitTangentPoint& base, const Vec& v) {
  const auto n = v.size() / 2;
  return {base, v.head(n), v.tail(n)};
}

void validate_point(const FinslerMetric& m, const SlitTangentPoint& p) {
  const int n = m.dimension();
  if (p.x.size() != n || p.y.size() != n) throw ParameterError("point dimension does not match metric");
  if (!p.y.allFinite() || p.y.norm() == 0.0) throw SlitViolation("y = 0 is not on the slit tangent bundle");
  if (!m.chart().contains(p.x)) {
    std::ostringstream os;
    os << "x = (" << p.x.transpose() << ") lies outside the chart of " << m.name();
    throw OutsideChart(os.str());
  }
}

double evaluate_metric(const FinslerMetric& m, const SlitTangentPoint& p) {
  validate_point(m, p);
  return m(std::span<const double>(p.x.data(), p.x.size()), std::span<const double>(p.y.data(), p.y.size()));
}

std::vector<Series> bundle_variables(const TaylorSpace& space, const SlitTangentPoint& p) {
  const int n = p.dimension();
  std::vector<Series> z;
  z.reserve(2 * n);
  for (int i = 0; i < n; ++i) z.push_back(Series::variable(space, i, p.x[i]));
  for (int i = 0; i < n; ++i) z.push_back(Series::variable(space, n + i, p.y[i]));
  return z;
}

Series metric_series(const FinslerMetric& m, std::span<const Series> z) {
  const std::size_t n = z.size() / 2;
  return m(z.first(n), z.subspan(n));
}

void check_nondegenerate(const Mat& g) {
  if (!g.allFinite()) throw MetricDegenerate("fundamental tensor is not finite");
  Eigen::SelfAdjointEigenSolver<Mat> eig(g, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 1e-12 * hi) || !(hi > 0)) {
    std::ostringstream os;
    os << "fundamental tensor not positive definite (eigenvalues " << lo << " .. " << hi << ")";
    throw MetricDegenerate(os.str());
  }
}

std::vector<Series> spray_series(const FinslerMetric& m, std::span<const Series> z) {
  const int n = static_cast<int>(z.size() / 2);
  const Series F = metric_series(m, z);
  const Series E = 0.5 * (F * F);

  std::vector<Series> Ey;
  Ey.reserve(n);
  for (int i = 0; i < n; ++i) Ey.push_back(derivative(E, n + i));

  std::vector<Series> A;  // g, row-major
  A.reserve(n * n);
  Mat g0(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      A.push_back(derivative(Ey[i], n + j));
      g0(i, j) = A.back().value();
    }
  }
  check_nondegenerate(g0);

  std::vector<Series> rhs;
  rhs.reserve(n);
  for (int h = 0; h < n; ++h) {
    Series r = derivative(Ey[h], 0) * z[n];
    for (int j = 1; j < n; ++j) r += derivative(Ey[h], j) * z[n + j];
    r -= derivative(E, h);
    rhs.push_back(std::move(r));
  }

  // Gaussian elimination; g is positive definite so no pivoting is needed.
  for (int k = 0; k < n; ++k) {
    for (int i = k + 1; i < n; ++i) {
      const Series f = A[i * n + k] / A[k * n + k];
      for (int j = k + 1; j < n; ++j) A[i * n + j] -= f * A[k * n + j];
      rhs[i] -= f * rhs[k];
    }
  }
  std::vector<Series> G(n);
  for (int i = n - 1; i >= 0; --i) {
    Series acc = rhs[i];
    for (int j = i + 1; j < n; ++j) acc -= A[i * n + j] * G[j];
    G[i] = acc / A[i * n + i];
  }
  for (auto& gi : G) gi *= 0.5;
  return G;
}

std::vector<Series> connection_series(std::span<const Series> G) {
  const int n = static_cast<int>(G.size());
  std::vector<Series> N;
  N.reserve(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) N.push_back(derivative(G[i], n + j));
  return N;
}

Vec dF(const FinslerMetric& m, const SlitTangentPoint& p) {
  validate_point(m, p);
  const int n = m.dimension();
  const auto& space = TaylorSpace::get(2 * n, 1);
  const auto z = bundle_variables(space, p);
  const Series F = metric_series(m, z);
  Vec d(2 * n);
  for (int k = 0; k < 2 * n; ++k) d[k] = F.linear(k);
  return d;
}

Mat fundamental_tensor(const FinslerMetric& m, const SlitTangentPoint& p) {
  validate_point(m, p);
  const int n = m.dimension();
  const auto& space = TaylorSpace::get(2 * n, 2);
  const auto z = bundle_variables(space, p);
  const Series F = metric_series(m, z);
  const Series E = 0.5 * (F * F);
  Mat g(n, n);
  for (int i = 0; i < n; ++i) {
    const Series Ei = derivative(E, n + i);
    for (int j = 0; j < n; ++j) g(i, j) = Ei.linear(n + j);
  }
  g = 0.5 * (g + g.transpose()).eval();
  check_nondegenerate(g);
  return g;
}

SprayData spray_coefficients(const FinslerMetric& m, const SlitTangentPoint& p) {
  validate_point(m, p);
  const int n = m.dimension();
  const auto& space = TaylorSpace::get(2 * n, 3);
  const auto z = bundle_variables(space, p);
  const auto G = spray_series(m, z);
  SprayData out{Vec(n), Mat(n, n)};
  for (int i = 0; i < n; ++i) {
    out.G[i] = G[i].value();
    for (int j = 0; j < n; ++j) out.N(i, j) = G[i].linear(n + j);
  }
  return out;
}

BundleTangentVector horizontal_lift(const FinslerMetric& m, const SlitTangentPoint& p, const Vec& X) {
  const SprayData s = spray_coefficients(m, p);
  return {p, X, -s.N * X};
}

BundleTangentVector vertical_lift(const SlitTangentPoint& p, const Vec& X) {
  return {p, Vec::Zero(p.dimension()), X};
}

BundleTangentVector liouville_field(const SlitTangentPoint& p) { return vertical_lift(p, p.y); }

}  // namespace affrig
