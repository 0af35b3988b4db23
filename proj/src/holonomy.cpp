#include "affrig/holonomy.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "affrig/errors.hpp"
#include "affrig/random.hpp"

namespace affrig {

std::string to_string(LoopKind k) {
  switch (k) {
    case LoopKind::CoordinateRectangles:
      return "coordinate-rectangles";
    case LoopKind::GeodesicPolygons:
      return "geodesic-polygons";
    case LoopKind::RandomPiecewise:
      return "random-piecewise";
  }
  return "coordinate-rectangles";
}

LoopKind loop_kind_from_string(const std::string& s) {
  if (s == "coordinate-rectangles" || s == "rectangles") return LoopKind::CoordinateRectangles;
  if (s == "geodesic-polygons" || s == "polygons") return LoopKind::GeodesicPolygons;
  if (s == "random-piecewise" || s == "random") return LoopKind::RandomPiecewise;
  throw ParameterError("unknown loop family '" + s + "'");
}

namespace {

bool inside(const FinslerMetric& m, const std::vector<Vec>& pts) {
  return std::all_of(pts.begin(), pts.end(), [&](const Vec& p) { return m.chart().contains(p); });
}

}  // namespace

std::vector<CurveOnM> make_loops(const MetricPtr& m, const LoopFamily& f, const IntegratorConfig& cfg) {
  const int n = m->dimension();
  if (f.base.size() != n) throw ParameterError("loop base point dimension mismatch");
  if (!m->chart().contains(f.base)) throw OutsideChart("loop base point lies outside the chart");
  if (!(f.edge > 0)) throw ParameterError("loop edge length must be positive");
  std::vector<CurveOnM> loops;
  const Vec& p = f.base;
  switch (f.kind) {
    case LoopKind::CoordinateRectangles: {
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          for (int si : {1, -1}) {
            for (int sj : {1, -1}) {
              Vec a = p, b = p, c = p;
              a[i] += si * f.edge;
              b[i] += si * f.edge;
              b[j] += sj * f.edge;
              c[j] += sj * f.edge;
              if (inside(*m, {a, b, c})) loops.push_back(CurveOnM::polygon({p, a, b, c}));
            }
          }
        }
      }
      break;
    }
    case LoopKind::GeodesicPolygons:
    case LoopKind::RandomPiecewise: {
      if (f.vertices < 2) throw ParameterError("loops need at least two vertices besides the base point");
      Rng rng(f.seed);
      for (int l = 0; l < f.count; ++l) {
        std::vector<Vec> vertices{p};
        if (f.kind == LoopKind::GeodesicPolygons) {
          // Vertices on a circle of radius `edge` in a random coordinate-free 2-plane.
          const Vec u = rng.unit_vector(n);
          Vec w = rng.unit_vector(n);
          if (n > 1) {
            w -= w.dot(u) * u;
            w.normalize();
          }
          const double phase = rng.uniform(0.0, 2 * M_PI);
          const Vec center = p - f.edge * (std::cos(phase) * u + std::sin(phase) * w);
          for (int k = 1; k < f.vertices + 1; ++k) {
            const double a = phase + 2 * M_PI * k / (f.vertices + 1);
            vertices.push_back(center + f.edge * (std::cos(a) * u + std::sin(a) * w));
          }
        } else {
          for (int k = 0; k < f.vertices; ++k) vertices.push_back(p + f.edge * rng.uniform(0.2, 1.0) * rng.unit_vector(n));
        }
        if (!inside(*m, vertices)) continue;
        if (f.kind == LoopKind::RandomPiecewise) {
          loops.push_back(CurveOnM::polygon(vertices));
          continue;
        }
        try {
          CurveOnM c(p);
          for (std::size_t k = 1; k < vertices.size(); ++k) c.geodesic_to(m, vertices[k], cfg);
          c.geodesic_to(m, p, cfg);
          loops.push_back(std::move(c));
        } catch (const ConsistencyError&) {
          throw;
        } catch (const Error&) {
          // Shooting failed or left the chart: the loop is not used.
        }
      }
      break;
    }
  }
  return loops;
}

Vec loop_transport(const MetricPtr& m, const CurveOnM& loop, const Vec& y0, const IntegratorConfig& cfg) {
  if (!loop.closed(1e-9)) throw ParameterError("loop_transport: curve is not closed");
  return parallel_transport(m, loop, y0, cfg);
}

OrbitSample holonomy_orbit(const MetricPtr& m, const Vec& base, const Vec& y0, const LoopFamily& family, int count,
                           const IntegratorConfig& cfg, int max_word) {
  if (count < 1) throw ParameterError("orbit point count must be >= 1");
  if (max_word < 1) throw ParameterError("orbit word length must be >= 1");
  const int n = m->dimension();
  OrbitSample s;
  s.base = base;
  const double f0 = evaluate_metric(*m, {base, y0});
  s.y0 = y0 / f0;
  s.points.push_back(s.y0);
  s.word_lengths.push_back(0);

  LoopFamily fam = family;
  fam.base = base;
  std::vector<CurveOnM> loops = make_loops(m, fam, cfg);
  const std::size_t forward = loops.size();
  for (std::size_t i = 0; i < forward; ++i) loops.push_back(loops[i].reversed());
  s.loops_available = static_cast<int>(forward);
  if (loops.empty()) return s;

  Rng rng(derive_seed(family.seed, 0x4f5242ull));
  const int max_attempts = 20 * count;
  for (int attempt = 0; static_cast<int>(s.points.size()) < count && attempt < max_attempts; ++attempt) {
    // Probe on the indicatrix, nearest orbit point, random word.
    Vec probe = rng.unit_vector(n);
    probe /= evaluate_metric(*m, {base, probe});
    std::size_t nearest = 0;
    double best = INFINITY;
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      const double d = (s.points[i] - probe).squaredNorm();
      if (d < best) {
        best = d;
        nearest = i;
      }
    }
    const int len = 1 + rng.index(max_word);
    std::vector<int> word(len);
    for (auto& w : word) w = rng.index(static_cast<int>(loops.size()));
    try {
      Vec y = s.points[nearest];
      for (int w : word) y = parallel_transport(m, loops[w], y, cfg);
      const double drift = std::abs(evaluate_metric(*m, {base, y}) - 1.0);
      s.max_f_drift = std::max(s.max_f_drift, drift);
      s.points.push_back(y);
      s.word_lengths.push_back(s.word_lengths[nearest] + len);
    } catch (const ConsistencyError&) {
      throw;
    } catch (const Error&) {
      ++s.words_skipped;
    }
  }
  return s;
}

int default_neighbours(int count) { return std::min(16, count / 8); }

std::vector<int> local_dimensions(const std::vector<Vec>& points, int k, double tau) {
  const int count = static_cast<int>(points.size());
  if (k < 0) throw ParameterError("neighbour count must be >= 0");
  if (count < k + 1) throw InsufficientSamples("orbit has fewer than k + 1 points");
  if (!(tau > 0.0 && tau < 1.0)) throw ParameterError("orbit dimension tau must lie in (0, 1)");
  std::vector<int> dims(count, 0);
  if (count == 1 || k == 0) return dims;
  // Absolute floor for "no spread": far below integrator noise on a unit indicatrix.
  constexpr double zero_spread = 1e-18;
  std::vector<std::pair<double, int>> dist(count);
  for (int i = 0; i < count; ++i) {
    for (int j = 0; j < count; ++j) dist[j] = {(points[j] - points[i]).squaredNorm(), j};
    std::partial_sort(dist.begin(), dist.begin() + k + 1, dist.end());
    const auto dim = points[i].size();
    Mat P(k + 1, dim);
    for (int r = 0; r <= k; ++r) P.row(r) = points[dist[r].second].transpose();
    P.rowwise() -= P.colwise().mean();
    const Mat C = P.transpose() * P / static_cast<double>(k + 1);
    Eigen::SelfAdjointEigenSolver<Mat> eig(C, Eigen::EigenvaluesOnly);
    const Vec ev = eig.eigenvalues();
    const double top = ev.maxCoeff();
    if (!(top > zero_spread)) continue;
    for (Eigen::Index e = 0; e < ev.size(); ++e)
      if (ev[e] > tau * top) ++dims[i];
  }
  return dims;
}

int orbit_dimension(const std::vector<Vec>& points, int k, double tau) {
  if (points.empty()) throw InsufficientSamples("empty orbit");
  const auto dims = local_dimensions(points, k, tau);
  std::map<int, int> histogram;
  for (int d : dims) ++histogram[d];
  int best = 0, best_count = -1;
  for (const auto& [d, c] : histogram) {
    if (c > best_count) {
      best = d;
      best_count = c;
    }
  }
  return best;
}

int orbit_dimension(const OrbitSample& sample, int k, double tau) { return orbit_dimension(sample.points, k, tau); }

std::string to_string(Transitivity t) {
  switch (t) {
    case Transitivity::TransitiveEvidence:
      return "TRANSITIVE_EVIDENCE";
    case Transitivity::NotTransitive:
      return "NOT_TRANSITIVE";
    case Transitivity::Inconclusive:
      return "INCONCLUSIVE";
  }
  return "INCONCLUSIVE";
}

TransitivityResult transitivity_verdict(const OrbitSample& sample, int dim_estimate, int k, double tau,
                                        std::uint64_t seed) {
  TransitivityResult r;
  const int n = static_cast<int>(sample.y0.size());
  r.dimension = dim_estimate;
  r.expected_dimension = n - 1;

  std::vector<Vec> directions;
  for (const auto& p : sample.points) directions.push_back(p.normalized());

  if (n == 1) {
    r.covering_kind = "none";
    r.covering_pass = true;
  } else if (n == 2) {
    r.covering_kind = "max_angular_gap";
    r.covering_threshold = 2 * M_PI / 10;
    std::vector<double> angles;
    for (const auto& d : directions) angles.push_back(std::atan2(d[1], d[0]));
    std::sort(angles.begin(), angles.end());
    double gap = 2 * M_PI - (angles.back() - angles.front());
    for (std::size_t i = 1; i < angles.size(); ++i) gap = std::max(gap, angles[i] - angles[i - 1]);
    r.covering = gap;
    r.covering_pass = gap < r.covering_threshold;
  } else {
    r.covering_kind = "covering_radius";
    r.covering_threshold = 2.0 / 5.0;
    Rng rng(derive_seed(seed, 0xc0feull));
    const int probes = 4096;
    double radius = 0.0;
    for (int i = 0; i < probes; ++i) {
      const Vec q = rng.unit_vector(n);
      double best = INFINITY;
      for (const auto& d : directions) best = std::min(best, (d - q).norm());
      radius = std::max(radius, best);
    }
    r.covering = radius;
    r.covering_pass = radius < r.covering_threshold;
  }

  const int count = static_cast<int>(sample.points.size());
  if (count >= k + 1) {
    const auto dims = local_dimensions(sample.points, k, tau);
    const auto below = std::count_if(dims.begin(), dims.end(), [&](int d) { return d < n - 1; });
    r.fraction_below = static_cast<double>(below) / static_cast<double>(dims.size());
  }

  if (dim_estimate == n - 1 && r.covering_pass) r.verdict = Transitivity::TransitiveEvidence;
  else if (dim_estimate < n - 1 && r.fraction_below >= 0.9) r.verdict = Transitivity::NotTransitive;
  else r.verdict = Transitivity::Inconclusive;
  return r;
}

}  // namespace affrig
