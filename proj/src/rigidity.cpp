#include "affrig/rigidity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "affrig/core_geometry.hpp"
#include "affrig/errors.hpp"
#include "affrig/expression.hpp"
#include "affrig/metric_zoo.hpp"
#include "affrig/random.hpp"

namespace affrig {

using nlohmann::json;

ManifoldMap::ManifoldMap(int n, std::string name, json params, Function f)
    : n_(n), name_(std::move(name)), params_(std::move(params)), f_(std::move(f)) {
  if (n < 1) throw ParameterError("map dimension must be >= 1");
}

Vec ManifoldMap::operator()(const Vec& x) const { return jet(x).value; }

ManifoldMap::Jet ManifoldMap::jet(const Vec& x) const {
  if (x.size() != n_) throw ParameterError("map '" + name_ + "': point dimension mismatch");
  const auto& space = TaylorSpace::get(n_, 2);
  std::vector<Series> vars;
  for (int i = 0; i < n_; ++i) vars.push_back(Series::variable(space, i, x[i]));
  const auto out = f_(vars);
  if (static_cast<int>(out.size()) != n_) throw ParameterError("map '" + name_ + "' returned the wrong dimension");
  Jet j;
  j.value.resize(n_);
  j.D.resize(n_, n_);
  j.D2.assign(n_, Mat::Zero(n_, n_));
  std::vector<std::uint8_t> e(n_, 0);
  for (int i = 0; i < n_; ++i) {
    if (out[i].order() < 2) throw ParameterError("map '" + name_ + "' is not twice differentiable");
    j.value[i] = out[i].value();
    for (int a = 0; a < n_; ++a) {
      j.D(i, a) = out[i].linear(a);
      for (int b = a; b < n_; ++b) {
        std::fill(e.begin(), e.end(), 0);
        ++e[a];
        ++e[b];
        const double c = out[i].coeff(space.index_of(e));
        j.D2[i](a, b) = j.D2[i](b, a) = (a == b) ? 2.0 * c : c;
      }
    }
  }
  if (!j.value.allFinite() || !j.D.allFinite()) throw ParameterError("map '" + name_ + "' not finite at sample");
  return j;
}

namespace {

void check_keys(const json& params, std::initializer_list<const char*> allowed, const std::string& map) {
  if (!params.is_object()) throw ParameterError("map '" + map + "': parameters must be an object");
  for (const auto& [key, value] : params.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ParameterError("map '" + map + "': unknown parameter '" + key + "'");
  }
}

Vec vector_param(const json& params, const char* key, int n, double fill) {
  if (!params.contains(key)) return Vec::Constant(n, fill);
  const auto v = params.at(key).get<std::vector<double>>();
  if (static_cast<int>(v.size()) != n) throw ParameterError(std::string("map parameter '") + key + "' has wrong length");
  return Eigen::Map<const Vec>(v.data(), n);
}

}  // namespace

std::vector<std::string> map_names() {
  return {"identity", "scale", "linear", "translation", "shear", "cubic", "rotation", "expression"};
}

ManifoldMap make_map(const std::string& name, int n, const json& params) {
  using S = std::vector<Series>;
  using In = std::span<const Series>;
  if (name == "identity") {
    check_keys(params, {}, name);
    return {n, name, params, [](In x) { return S(x.begin(), x.end()); }};
  }
  if (name == "scale") {
    check_keys(params, {"factor"}, name);
    const double f = params.value("factor", 2.0);
    if (!(f != 0.0) || !std::isfinite(f)) throw ParameterError("scale: factor must be finite and nonzero");
    return {n, name, json{{"factor", f}}, [f](In x) {
              S out;
              for (const auto& v : x) out.push_back(f * v);
              return out;
            }};
  }
  if (name == "linear" || name == "translation") {
    Mat A = Mat::Identity(n, n);
    if (name == "linear") {
      check_keys(params, {"matrix", "offset"}, name);
      if (!params.contains("matrix")) throw ParameterError("linear: 'matrix' is required");
      const auto rows = params.at("matrix").get<std::vector<std::vector<double>>>();
      if (static_cast<int>(rows.size()) != n) throw ParameterError("linear: matrix must be n x n");
      for (int i = 0; i < n; ++i) {
        if (static_cast<int>(rows[i].size()) != n) throw ParameterError("linear: matrix must be n x n");
        for (int j = 0; j < n; ++j) A(i, j) = rows[i][j];
      }
    } else {
      check_keys(params, {"offset"}, name);
    }
    const Vec b = vector_param(params, "offset", n, name == "translation" ? 0.25 : 0.0);
    json echo = params;
    echo["offset"] = std::vector<double>(b.data(), b.data() + n);
    return {n, name, echo, [A, b](In x) {
              S out;
              for (Eigen::Index i = 0; i < A.rows(); ++i) {
                Series acc = x[0] * A(i, 0) + b[i];
                for (Eigen::Index j = 1; j < A.cols(); ++j) acc += x[j] * A(i, j);
                out.push_back(std::move(acc));
              }
              return out;
            }};
  }
  if (name == "shear") {
    check_keys(params, {"amount", "i", "j"}, name);
    const double a = params.value("amount", 1.0);
    const int i = params.value("i", 0), j = params.value("j", 1);
    if (i < 0 || j < 0 || i >= n || j >= n || i == j) throw ParameterError("shear: need distinct axes i, j < n");
    return {n, name, json{{"amount", a}, {"i", i}, {"j", j}}, [a, i, j](In x) {
              S out(x.begin(), x.end());
              out[i] += a * x[j];
              return out;
            }};
  }
  if (name == "cubic") {
    check_keys(params, {"coefficient"}, name);
    const double c = params.value("coefficient", 1.0);
    return {n, name, json{{"coefficient", c}}, [c](In x) {
              S out(x.begin(), x.end());
              out[0] += c * x[0] * x[0] * x[0];
              return out;
            }};
  }
  if (name == "rotation") {
    check_keys(params, {"angle"}, name);
    if (n < 2) throw ParameterError("rotation needs dimension >= 2");
    const double t = params.value("angle", 0.7);
    const double c = std::cos(t), s = std::sin(t);
    return {n, name, json{{"angle", t}}, [c, s](In x) {
              S out(x.begin(), x.end());
              out[0] = c * x[0] - s * x[1];
              out[1] = s * x[0] + c * x[1];
              return out;
            }};
  }
  if (name == "expression") {
    check_keys(params, {"components"}, name);
    if (!params.contains("components")) throw ParameterError("expression: 'components' is required");
    const auto texts = params.at("components").get<std::vector<std::string>>();
    if (static_cast<int>(texts.size()) != n) throw ParameterError("expression: need one component per dimension");
    std::vector<Expression> exprs;
    for (const auto& t : texts) exprs.push_back(Expression::parse(t, n));
    return {n, name, params, [exprs](In x) {
              S out;
              for (const auto& e : exprs) out.push_back(e(x));
              return out;
            }};
  }
  throw ParameterError("unknown map '" + name + "'");
}

namespace {

struct Box {
  Vec lower, upper;
};

Box sample_box(const FinslerMetric& m, const MapSamples& s) {
  const int n = m.dimension();
  Box b{s.lower, s.upper};
  if (b.lower.size() == 0 || b.upper.size() == 0) {
    double lo = -1.0, hi = 1.0;
    try {
      const auto z = zoo_entry(m.name(), m.params());
      lo = z.sample_lower;
      hi = z.sample_upper;
    } catch (const std::exception&) {
      // Not a catalog metric: the unit box.
    }
    if (b.lower.size() == 0) b.lower = Vec::Constant(n, lo);
    if (b.upper.size() == 0) b.upper = Vec::Constant(n, hi);
  }
  if (b.lower.size() != n || b.upper.size() != n) throw ParameterError("sample box dimension mismatch");
  if ((b.upper - b.lower).minCoeff() < 0) throw ParameterError("sample box lower > upper");
  return b;
}

Vec draw_point(Rng& rng, const Box& b) {
  Vec x(b.lower.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.uniform(b.lower[i], b.upper[i]);
  return x;
}

void check_invertible(const Mat& D, const Vec& x, const std::string& map) {
  Eigen::JacobiSVD<Mat> svd(D);
  const Vec s = svd.singularValues();
  if (!(s[s.size() - 1] > 1e-12 * s[0])) {
    std::ostringstream os;
    os << "map '" << map << "': Jacobian singular at (" << x.transpose() << ")";
    throw ParameterError(os.str());
  }
}

Vec checked_image(const FinslerMetric& m, const ManifoldMap::Jet& j, double t) {
  if (!m.chart().contains(j.value)) {
    std::ostringstream os;
    os << "map image (" << j.value.transpose() << ") outside the chart";
    throw ChartExit(os.str(), t);
  }
  return j.value;
}

void check_map(const FinslerMetric& m, const ManifoldMap& phi, const MapSamples& s) {
  if (phi.dimension() != m.dimension()) throw ParameterError("map and metric dimensions differ");
  if (s.count < 1) throw ParameterError("sample count must be >= 1");
  if (s.nodes < 1) throw ParameterError("arc nodes must be >= 1");
  if (!(s.arc >= 0.0)) throw ParameterError("arc length must be >= 0");
}

}  // namespace

AffinityResult check_affinity(const MetricPtr& m, const ManifoldMap& phi, const MapSamples& s,
                              const IntegratorConfig& cfg) {
  check_map(*m, phi, s);
  const Box box = sample_box(*m, s);
  const auto spray = BundleVectorField::spray(m);
  AffinityResult r;
  double sum = 0.0;
  Rng rng(derive_seed(s.seed, 0xaff1ull));
  for (int k = 0; k < s.count; ++k) {
    const Vec x0 = draw_point(rng, box);
    Vec y0 = rng.unit_vector(m->dimension());
    if (!m->chart().contains(x0)) {
      ++r.arcs_skipped;
      continue;
    }
    y0 /= evaluate_metric(*m, {x0, y0});
    SlitTangentPoint state{x0, y0};
    double t = 0.0;
    for (int node = 0; node < s.nodes; ++node) {
      const double target = s.nodes == 1 ? 0.0 : s.arc * node / (s.nodes - 1);
      try {
        state = integrate_flow(spray, state, target - t, cfg);
      } catch (const ChartExit&) {
        ++r.arcs_skipped;
        break;
      }
      t = target;
      const Vec& v = state.y;
      const Vec a = -2.0 * spray_coefficients(*m, state).G;
      const auto j = phi.jet(state.x);
      check_invertible(j.D, state.x, phi.name());
      const Vec X = checked_image(*m, j, t);
      const Vec Xd = j.D * v;
      Vec Xdd = j.D * a;
      for (int i = 0; i < phi.dimension(); ++i) Xdd[i] += v.dot(j.D2[i] * v);
      const Vec G2 = 2.0 * spray_coefficients(*m, {X, Xd}).G;
      const double scale = std::max({Xdd.norm(), G2.norm(), Xd.squaredNorm()});
      const double res = (Xdd + G2).norm() / scale;
      sum += res;
      ++r.samples;
      if (res > r.max_residual || r.worst_point.size() == 0) {
        r.max_residual = std::max(r.max_residual, res);
        r.worst_point = state.x;
      }
    }
  }
  if (r.samples == 0) throw InsufficientSamples("no geodesic arc stayed inside the chart");
  r.mean_residual = sum / r.samples;
  r.is_affinity = r.max_residual < r.tolerance;
  return r;
}

TransformationVerdict classify_transformation(const MetricPtr& m, const ManifoldMap& phi, const MapSamples& s,
                                              const IntegratorConfig& cfg) {
  TransformationVerdict v;
  v.map = phi.name();
  v.params = phi.params();
  v.affinity = check_affinity(m, phi, s, cfg);
  v.is_affinity = v.affinity.is_affinity;

  const Box box = sample_box(*m, s);
  Rng rng(derive_seed(s.seed, 0xc1a5ull));
  std::vector<double> cs;
  for (int k = 0; k < s.count; ++k) {
    const Vec x = draw_point(rng, box);
    const Vec y = rng.unit_vector(m->dimension());
    if (!m->chart().contains(x)) continue;
    const auto j = phi.jet(x);
    check_invertible(j.D, x, phi.name());
    const Vec X = checked_image(*m, j, 0.0);
    cs.push_back(evaluate_metric(*m, {X, j.D * y}) / evaluate_metric(*m, {x, y}));
  }
  if (cs.empty()) throw InsufficientSamples("no sample point inside the chart");
  v.samples = static_cast<int>(cs.size());
  std::vector<double> sorted = cs;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t h = sorted.size() / 2;
  v.c = sorted.size() % 2 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
  v.c_min = sorted.front();
  v.c_max = sorted.back();
  v.c_dispersion = std::max(v.c - v.c_min, v.c_max - v.c) / std::abs(v.c);
  v.is_homothety = v.c_dispersion < v.homothety_tolerance;
  v.is_isometry = v.is_homothety && std::abs(v.c - 1.0) < v.isometry_tolerance;
  return v;
}

TransitivityCriterion summarize_orbit(const OrbitSample& sample, const TransitivityResult& result) {
  TransitivityCriterion c;
  c.verdict = result.verdict;
  c.detail = result;
  c.orbit_points = static_cast<int>(sample.points.size());
  c.loops = sample.loops_available;
  c.words_skipped = sample.words_skipped;
  c.max_f_drift = sample.max_f_drift;
  c.passes = result.verdict == Transitivity::TransitiveEvidence;
  return c;
}

RankCriterion summarize_rank_map(const RankMap& map, int n, double pass_fraction) {
  RankCriterion c;
  c.points = static_cast<int>(map.entries.size());
  c.certified_max = map.certified_max;
  c.below_max = map.below_max;
  c.inconclusive = map.inconclusive;
  c.degenerate = map.degenerate;
  c.failed = map.failed;
  c.certified_fraction = map.certified_fraction();
  c.pass_fraction = pass_fraction;
  c.max_r_lo = map.max_r_lo;
  c.df_violations = map.df_violations;
  c.split_failures = map.split_failures;
  c.anomalies = map.anomalies;
  auto margin = [](const RankCertificate& cert) {
    const auto& s = cert.singular_values;
    if (cert.r_lo < 1 || s.empty() || s[0] == 0.0) return 0.0;
    return s[cert.r_lo - 1] / s[0];
  };
  for (const auto& e : map.entries) {
    if (!e.certificate) continue;
    const auto& cert = *e.certificate;
    if (!c.worst || cert.r_lo < c.worst->r_lo || (cert.r_lo == c.worst->r_lo && margin(cert) < margin(*c.worst)))
      c.worst = cert;
  }
  c.passes = c.certified_max > 0 && c.certified_fraction >= pass_fraction && c.df_violations == 0 &&
             c.max_r_lo <= 2 * n - 1;
  return c;
}

RigidityReport assemble_report(const FinslerMetric& m, const std::optional<RankCriterion>& rank,
                               const std::optional<TransitivityCriterion>& orbit,
                               const std::vector<TransformationVerdict>& classifications) {
  if (!rank && !orbit) throw ParameterError("rigidity report needs at least one evaluated criterion");
  RigidityReport r;
  r.metric = m.name();
  r.metric_params = m.params();
  r.dimension = m.dimension();
  r.criterion1 = orbit;
  r.criterion2 = rank;
  r.criterion3 =
      "not numerically evaluated: countability of the maximal integral manifolds of D^h in the unit sphere "
      "bundle is not machine-decidable";
  r.classifications = classifications;
  for (const auto& c : classifications) {
    if (!c.is_homothety || c.is_isometry) continue;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.15g", c.c);
    r.exhibits.push_back("map '" + c.map + "' is a homothety with factor " + buf + " that is not an isometry");
  }
  const bool c1 = orbit && orbit->passes;
  const bool c2 = rank && rank->passes;
  if (c1 && c2) r.statement = "rigidity evidence: criteria (1) and (2) pass";
  else if (c1) r.statement = "rigidity evidence: criterion (1) passes";
  else if (c2) r.statement = "rigidity evidence: criterion (2) passes";
  else r.statement = "no rigidity evidence; non-rigidity not asserted";
  return r;
}

}  // namespace affrig
