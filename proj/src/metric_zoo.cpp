#include "affrig/metric_zoo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "affrig/errors.hpp"
#include "affrig/expression.hpp"
#include "affrig/ode.hpp"
#include "affrig/random.hpp"

namespace affrig {

using nlohmann::json;

namespace {

using std::sqrt;

ChartDomain disk_chart(int n, double radius) {
  ChartDomain d = ChartDomain::box(n, -radius, radius);
  d.excluded = [radius](const Vec& x) { return x.squaredNorm() > radius * radius; };
  std::ostringstream os;
  os << "|x| > " << radius;
  d.exclusion = os.str();
  return d;
}

class Euclidean final : public MetricExpression<Euclidean> {
 public:
  explicit Euclidean(int n)
      : MetricExpression(ChartDomain::box(n, -10, 10), "euclidean", json{{"dimension", n}}) {}

  template <class S>
  S evaluate(std::span<const S>, std::span<const S> y) const {
    return sqrt(dot(y, y));
  }
};

class Randers final : public MetricExpression<Randers> {
 public:
  explicit Randers(Vec b)
      : MetricExpression(ChartDomain::box(static_cast<int>(b.size()), -10, 10), "randers",
                         json{{"b", std::vector<double>(b.data(), b.data() + b.size())}}),
        b_(std::move(b)) {}

  template <class S>
  S evaluate(std::span<const S>, std::span<const S> y) const {
    S beta = b_[0] * y[0];
    for (std::size_t i = 1; i < y.size(); ++i) beta += b_[i] * y[i];
    return sqrt(dot(y, y)) + beta;
  }

 private:
  Vec b_;
};

// 2R|y| / (1 + |x|^2): stereographic projection from the pole opposite to
// the chart origin.
class Sphere final : public MetricExpression<Sphere> {
 public:
  explicit Sphere(double radius)
      : MetricExpression(disk_chart(2, 3.0), "sphere", json{{"radius", radius}}), radius_(radius) {}

  template <class S>
  S evaluate(std::span<const S> x, std::span<const S> y) const {
    return (2.0 * radius_) * sqrt(dot(y, y)) / (1.0 + dot(x, x));
  }

 private:
  double radius_;
};

class PoincareDisk final : public MetricExpression<PoincareDisk> {
 public:
  PoincareDisk() : MetricExpression(disk_chart(2, 0.9), "poincare", json::object()) {}

  template <class S>
  S evaluate(std::span<const S> x, std::span<const S> y) const {
    return 2.0 * sqrt(dot(y, y)) / (1.0 - dot(x, x));
  }
};

// F = (sqrt(|y|^2 - (|x|^2 |y|^2 - <x,y>^2)) + <x,y>) / (1 - |x|^2).
class FunkDisk final : public MetricExpression<FunkDisk> {
 public:
  FunkDisk() : MetricExpression(disk_chart(2, 0.9), "funk", json::object()) {}

  template <class S>
  S evaluate(std::span<const S> x, std::span<const S> y) const {
    const S xx = dot(x, x), yy = dot(y, y), xy = dot(x, y);
    return (sqrt(yy - (xx * yy - xy * xy)) + xy) / (1.0 - xx);
  }
};

class Product final : public MetricExpression<Product> {
 public:
  Product(std::vector<MetricPtr> factors, ChartDomain chart, json params)
      : MetricExpression(std::move(chart), "product", std::move(params)), factors_(std::move(factors)) {}

  template <class S>
  S evaluate(std::span<const S> x, std::span<const S> y) const {
    std::size_t offset = 0;
    S acc{};
    for (std::size_t k = 0; k < factors_.size(); ++k) {
      const auto d = static_cast<std::size_t>(factors_[k]->dimension());
      const S f = (*factors_[k])(x.subspan(offset, d), y.subspan(offset, d));
      if (k == 0) acc = f * f;
      else acc += f * f;
      offset += d;
    }
    return sqrt(acc);
  }

 private:
  std::vector<MetricPtr> factors_;
};

class RiemannianCustom final : public MetricExpression<RiemannianCustom> {
 public:
  RiemannianCustom(int n, std::vector<Expression> entries, ChartDomain chart, json params)
      : MetricExpression(std::move(chart), "custom", std::move(params)), n_(n), a_(std::move(entries)) {}

  template <class S>
  S evaluate(std::span<const S> x, std::span<const S> y) const {
    S acc{};
    bool first = true;
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < n_; ++j) {
        const S term = a_[i * n_ + j](x) * y[i] * y[j];
        if (first) acc = term;
        else acc += term;
        first = false;
      }
    }
    return sqrt(acc);
  }

 private:
  int n_;
  std::vector<Expression> a_;
};

std::string canonical_name(const std::string& name) {
  if (name == "minkowski_randers") return "randers";
  if (name == "riemannian_sphere" || name == "s2") return "sphere";
  if (name == "poincare_disk") return "poincare";
  if (name == "funk_disk") return "funk";
  if (name == "riemannian_product" || name == "s2xr") return "product";
  if (name == "riemannian_custom") return "custom";
  return name;
}

bool is_riemannian(const FinslerMetric& m) {
  const auto& n = m.name();
  return n == "euclidean" || n == "sphere" || n == "poincare" || n == "custom" || n == "product";
}

template <class T>
T param_or(const json& params, const char* key, T fallback) {
  if (!params.contains(key)) return fallback;
  try {
    return params.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParameterError(std::string("parameter '") + key + "': " + e.what());
  }
}

void check_keys(const json& params, std::initializer_list<const char*> allowed, const std::string& metric) {
  if (!params.is_object()) throw ParameterError("metric parameters must be a JSON object");
  for (const auto& [key, _] : params.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ParameterError("unknown parameter '" + key + "' for metric " + metric);
  }
}

json default_product_factors() { return json::array({"sphere", "euclidean:1"}); }

MetricPtr make_factor(const json& spec) {
  if (spec.is_string()) {
    const auto s = spec.get<std::string>();
    const auto colon = s.find(':');
    if (colon == std::string::npos) return make_metric(s);
    const int dim = std::atoi(s.c_str() + colon + 1);
    return make_metric(s.substr(0, colon), json{{"dimension", dim}});
  }
  if (spec.is_object() && spec.contains("name"))
    return make_metric(spec.at("name").get<std::string>(), spec.value("params", json::object()));
  throw ParameterError("product factor must be a name or {\"name\", \"params\"}");
}

}  // namespace

MetricPtr make_euclidean(int n) {
  if (n < 1) throw ParameterError("euclidean: dimension must be >= 1");
  return std::make_shared<Euclidean>(n);
}

MetricPtr make_randers(const Vec& b) {
  if (b.size() < 1) throw ParameterError("randers: b must be non-empty");
  if (!(b.norm() < 1.0)) throw ParameterError("randers: |b| must be < 1 (got |b| = " + std::to_string(b.norm()) + ")");
  return std::make_shared<Randers>(b);
}

MetricPtr make_sphere(double radius) {
  if (!(radius > 0) || !std::isfinite(radius)) throw ParameterError("sphere: radius must be positive");
  return std::make_shared<Sphere>(radius);
}

MetricPtr make_poincare_disk() { return std::make_shared<PoincareDisk>(); }

MetricPtr make_funk_disk() { return std::make_shared<FunkDisk>(); }

MetricPtr make_riemannian_product(const std::vector<MetricPtr>& factors) {
  if (factors.size() < 2) throw ParameterError("product: need at least two factors");
  int n = 0;
  for (const auto& f : factors) {
    if (!is_riemannian(*f)) throw ParameterError("product: factor '" + f->name() + "' is not Riemannian");
    n += f->dimension();
  }
  ChartDomain chart;
  chart.dimension = n;
  chart.lower.resize(n);
  chart.upper.resize(n);
  json names = json::array();
  std::vector<std::pair<int, MetricPtr>> slices;
  int offset = 0;
  std::string exclusion;
  for (const auto& f : factors) {
    const int d = f->dimension();
    chart.lower.segment(offset, d) = f->chart().lower;
    chart.upper.segment(offset, d) = f->chart().upper;
    slices.emplace_back(offset, f);
    json entry{{"name", f->name()}, {"params", f->params()}};
    names.push_back(entry);
    if (!f->chart().exclusion.empty()) {
      if (!exclusion.empty()) exclusion += " or ";
      exclusion += f->name() + " factor: " + f->chart().exclusion;
    }
    offset += d;
  }
  chart.exclusion = exclusion;
  chart.excluded = [slices](const Vec& x) {
    for (const auto& [off, f] : slices) {
      const auto& c = f->chart();
      if (c.excluded && c.excluded(x.segment(off, f->dimension()))) return true;
    }
    return false;
  };
  return std::make_shared<Product>(factors, std::move(chart), json{{"factors", names}});
}

MetricPtr make_riemannian_custom(int n, const std::vector<std::string>& entries, double lower, double upper) {
  if (n < 1) throw ParameterError("custom: dimension must be >= 1");
  if (static_cast<int>(entries.size()) != n * n)
    throw ParameterError("custom: matrix must have n*n entries");
  if (!(lower < upper)) throw ParameterError("custom: lower must be < upper");
  std::vector<Expression> exprs;
  for (const auto& e : entries) exprs.push_back(Expression::parse(e, n));
  json params{{"dimension", n}, {"matrix", entries}, {"lower", lower}, {"upper", upper}};
  return std::make_shared<RiemannianCustom>(n, std::move(exprs), ChartDomain::box(n, lower, upper), params);
}

MetricPtr make_metric(const std::string& raw_name, const json& params) {
  const std::string name = canonical_name(raw_name);
  if (name == "euclidean") {
    check_keys(params, {"dimension"}, name);
    return make_euclidean(param_or(params, "dimension", 2));
  }
  if (name == "randers") {
    check_keys(params, {"b"}, name);
    auto b = param_or(params, "b", std::vector<double>{0.5, 0.0});
    return make_randers(Eigen::Map<const Vec>(b.data(), static_cast<Eigen::Index>(b.size())));
  }
  if (name == "sphere") {
    check_keys(params, {"radius"}, name);
    return make_sphere(param_or(params, "radius", 1.0));
  }
  if (name == "poincare") {
    check_keys(params, {}, name);
    return make_poincare_disk();
  }
  if (name == "funk") {
    check_keys(params, {}, name);
    return make_funk_disk();
  }
  if (name == "product") {
    check_keys(params, {"factors"}, name);
    const json factors = params.value("factors", default_product_factors());
    if (!factors.is_array()) throw ParameterError("product: factors must be an array");
    std::vector<MetricPtr> fs;
    for (const auto& f : factors) fs.push_back(make_factor(f));
    return make_riemannian_product(fs);
  }
  if (name == "custom") {
    check_keys(params, {"dimension", "matrix", "lower", "upper"}, name);
    const int n = param_or(params, "dimension", 2);
    std::vector<std::string> entries;
    if (!params.contains("matrix")) throw ParameterError("custom: 'matrix' is required");
    for (const auto& row : params.at("matrix")) {
      if (row.is_array())
        for (const auto& e : row) entries.push_back(e.get<std::string>());
      else
        entries.push_back(row.get<std::string>());
    }
    return make_riemannian_custom(n, entries, param_or(params, "lower", -1.0), param_or(params, "upper", 1.0));
  }
  throw ParameterError("unknown metric '" + raw_name + "'");
}

// ---------------------------------------------------------------------------

const std::vector<ZooEntry>& zoo_catalog() {
  static const std::vector<ZooEntry> catalog = [] {
    std::vector<ZooEntry> c;
    c.push_back({"euclidean",
                 "Euclidean norm |y| on R^n (flat, trivial holonomy)",
                 {{"dimension", "int", "2", "dimension n"}},
                 2,
                 "not-transitive",
                 "flat: all horizontal lifts commute, D^h is the horizontal bundle (rank n)",
                 {{"scale", json{{"factor", 2.0}}, "homothety"},
                  {"shear", json::object(), "affinity"},
                  {"cubic", json::object(), "not-affinity"}},
                 -1.0,
                 1.0,
                 {0.0, 0.0},
                 {1.0, 0.3}});
    c.push_back({"randers",
                 "Minkowski-Randers norm |y| + <b, y>, |b| < 1 (flat)",
                 {{"b", "vector", "[0.5, 0]", "drift covector, |b| < 1"}},
                 2,
                 "not-transitive",
                 "flat: spray vanishes",
                 {{"scale", json{{"factor", 2.0}}, "homothety"},
                  {"translation", json{{"offset", {0.3, -0.2}}}, "isometry"}},
                 -1.0,
                 1.0,
                 {0.0, 0.0},
                 {1.0, 0.3}});
    c.push_back({"sphere",
                 "round sphere of radius R in the stereographic chart, pole disk |x| > 3 excluded",
                 {{"radius", "real", "1", "sphere radius"}},
                 3,
                 "transitive",
                 "constant curvature 1/R^2: holonomy SO(2), bracket of horizontal lifts is vertical and nonzero",
                 {{"rotation", json{{"angle", 0.7}}, "isometry"}},
                 -2.0,
                 2.0,
                 {0.2, 0.1},
                 {1.0, 0.5}});
    c.push_back({"poincare",
                 "Poincare disk 2|y| / (1 - |x|^2), |x| <= 0.9",
                 {},
                 3,
                 "transitive",
                 "constant curvature -1: holonomy SO(2)",
                 {{"rotation", json{{"angle", 0.7}}, "isometry"}},
                 -0.6,
                 0.6,
                 {0.1, 0.05},
                 {1.0, 0.5}});
    c.push_back({"funk",
                 "Funk metric of the unit disk, |x| <= 0.9",
                 {},
                 3,
                 "",
                 "projectively flat with G = F y / 2 and nonzero flag curvature",
                 {{"rotation", json{{"angle", 0.7}}, "isometry"}},
                 -0.6,
                 0.6,
                 {0.1, 0.05},
                 {1.0, 0.5}});
    c.push_back({"product",
                 "Riemannian product of factors (default S^2 x R)",
                 {{"factors", "array", "[\"sphere\", \"euclidean:1\"]", "factor metrics"}},
                 4,
                 "not-transitive",
                 "transport preserves each factor energy, so D^h has codimension 2 in T(TM)",
                 {{"rotation", json{{"angle", 0.7}}, "isometry"}},
                 -1.5,
                 1.5,
                 {0.2, 0.1, 0.0},
                 {1.0, 0.5, 0.8}});
    c.push_back({"custom",
                 "Riemannian metric sqrt(a_ij(x) y^i y^j) from coefficient expressions",
                 {{"dimension", "int", "2", "dimension n"},
                  {"matrix", "array", "(required)", "n*n expressions in x1..xn"},
                  {"lower", "real", "-1", "chart box lower bound"},
                  {"upper", "real", "1", "chart box upper bound"}},
                 std::nullopt,
                 "",
                 "",
                 {},
                 -0.8,
                 0.8,
                 {},
                 {}});
    return c;
  }();
  return catalog;
}

ZooEntry zoo_entry(const std::string& raw_name, const json& params) {
  const std::string name = canonical_name(raw_name);
  for (const auto& e : zoo_catalog()) {
    if (e.name != name) continue;
    ZooEntry out = e;
    const auto metric = make_metric(name, params);
    const int n = metric->dimension();
    if (name == "euclidean" || name == "randers") {
      out.expected_dh_rank = n;
      out.holonomy_base.assign(n, 0.0);
      out.holonomy_direction.assign(n, 0.0);
      out.holonomy_direction[0] = 1.0;
      if (n > 1) out.holonomy_direction[1] = 0.3;
      for (auto& km : out.known_maps)
        if (km.map == "translation") km.params = json{{"offset", std::vector<double>(n, 0.25)}};
    }
    if (name == "custom") {
      const double lo = param_or(params, "lower", -1.0), hi = param_or(params, "upper", 1.0);
      out.sample_lower = lo + 0.1 * (hi - lo);
      out.sample_upper = hi - 0.1 * (hi - lo);
      out.holonomy_base.assign(n, 0.5 * (lo + hi));
      out.holonomy_direction.assign(n, 0.0);
      out.holonomy_direction[0] = 1.0;
    }
    if (name == "product" && params.contains("factors")) {
      // Only the default factorisation carries known facts.
      if (params.at("factors") != default_product_factors()) {
        out.expected_dh_rank.reset();
        out.expected_transitivity.clear();
        out.known_maps.clear();
      }
      out.holonomy_base.assign(n, 0.1);
      out.holonomy_direction.assign(n, 0.5);
      out.holonomy_direction[0] = 1.0;
    }
    return out;
  }
  throw ParameterError("unknown metric '" + raw_name + "'");
}

// ---------------------------------------------------------------------------

double bump_h(double t) { return t == 0.0 ? 0.0 : std::exp(-1.0 / (t * t)); }
double bump_h_plus(double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; }
double bump_phi(double t) { return bump_h(t) * bump_h(t - 1.0); }
double bump_psi(double t) { return bump_h_plus(-t) + bump_h_plus(t - 1.0); }

std::vector<Vec> r2_field_vectors(const Vec& p) {
  if (p.size() != 2) throw ParameterError("r2 field: point must be planar");
  return {Vec{{bump_psi(p[1]), 0.0}}, Vec{{0.0, bump_phi(p[1])}}};
}

double PlanarGrid::node(double lo, double hi, int k, int count) {
  if (count == 1) return lo;
  return (lo * (count - 1 - k) + hi * k) / (count - 1);
}

std::vector<PlanarRankCell> r2_rank_map(const PlanarGrid& grid) {
  if (grid.x_count < 1 || grid.y_count < 1) throw ParameterError("r2 grid: counts must be positive");
  std::vector<PlanarRankCell> cells;
  cells.reserve(static_cast<std::size_t>(grid.x_count) * grid.y_count);
  for (int j = 0; j < grid.y_count; ++j) {
    const double y = PlanarGrid::node(grid.y_lower, grid.y_upper, j, grid.y_count);
    for (int i = 0; i < grid.x_count; ++i) {
      const double x = PlanarGrid::node(grid.x_lower, grid.x_upper, i, grid.x_count);
      // Rows are normalised before the SVD: the bump functions are far below
      // any absolute threshold near the strip while still nonzero.
      Mat rows(2, 2);
      int used = 0;
      for (const Vec& v : r2_field_vectors(Vec{{x, y}})) {
        const double len = v.norm();
        if (len > 0.0) rows.row(used++) = v.transpose() / len;
      }
      int rank = 0;
      if (used > 0) {
        Eigen::JacobiSVD<Mat> svd(rows.topRows(used));
        const auto& s = svd.singularValues();
        for (Eigen::Index k = 0; k < s.size(); ++k)
          if (s[k] > 1e-7 * s[0]) ++rank;
      }
      cells.push_back({x, y, rank});
    }
  }
  return cells;
}

int r2_expected_rank(double y) {
  if (y == 0.0 || y == 1.0) return 0;
  if (y > 0.0 && y < 1.0) return 1;
  return 2;
}

std::vector<Vec> r2_orbit_trace(const Vec& start, int steps, std::uint64_t seed, double step_time) {
  if (start.size() != 2) throw ParameterError("r2 trace: start must be planar");
  std::vector<Vec> trace{start};
  Rng rng(seed);
  Vec p = start;
  IntegratorConfig cfg;
  cfg.rtol = 1e-10;
  cfg.atol = 1e-14;
  for (int k = 0; k < steps; ++k) {
    const double t = step_time * rng.uniform(-1.0, 1.0);
    if (k % 2 == 0) {
      p[0] += bump_psi(p[1]) * t;  // flow of psi(y) d/dx
    } else {
      Vec s{{p[1]}};
      s = integrate_ode([](double, const Vec& v, Vec& d) { d.resize(1); d[0] = bump_phi(v[0]); }, 0.0, t, s, cfg);
      p[1] = s[0];
    }
    trace.push_back(p);
  }
  return trace;
}

}  // namespace affrig
