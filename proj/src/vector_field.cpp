#include "affrig/vector_field.hpp"

#include <algorithm>

#include "affrig/errors.hpp"

namespace affrig {

BaseVectorField BaseVectorField::coordinate(int n, int i) {
  if (i < 0 || i >= n) throw ParameterError("coordinate field index out of range");
  BaseVectorField f = constant(Vec::Unit(n, i));
  f.tag_ = "d/dx" + std::to_string(i + 1);
  return f;
}

BaseVectorField BaseVectorField::constant(const Vec& c) {
  BaseVectorField f;
  f.n_ = static_cast<int>(c.size());
  f.constant_ = c;
  f.tag_ = "constant field";
  return f;
}

BaseVectorField BaseVectorField::expressions(const std::vector<std::string>& components) {
  BaseVectorField f;
  f.n_ = static_cast<int>(components.size());
  f.constant_ = Vec::Zero(f.n_);
  f.tag_ = "(";
  for (const auto& c : components) {
    f.exprs_.push_back(Expression::parse(c, f.n_));
    f.tag_ += (f.exprs_.size() > 1 ? ", " : "") + c;
  }
  f.tag_ += ")";
  return f;
}

Vec BaseVectorField::value(const Vec& x) const {
  if (is_constant()) return constant_;
  Vec v(n_);
  const std::span<const double> xs(x.data(), x.size());
  for (int i = 0; i < n_; ++i) v[i] = exprs_[i](xs);
  return v;
}

std::vector<Series> BaseVectorField::series(std::span<const Series> x) const {
  std::vector<Series> out;
  out.reserve(n_);
  for (int i = 0; i < n_; ++i)
    out.push_back(is_constant() ? Series(x[0].space(), constant_[i]) : exprs_[i](x));
  return out;
}

const std::vector<Series>& JetCache::spray(const FinslerMetric& m, std::span<const Series> z) {
  auto it = sprays_.find(&m);
  if (it == sprays_.end()) it = sprays_.emplace(&m, spray_series(m, z)).first;
  return it->second;
}

// ---------------------------------------------------------------------------

struct BundleVectorField::Impl {
  int n = 0;
  std::string tag;
  int loss = 0;
  MetricPtr metric;

  virtual ~Impl() = default;
  virtual std::vector<Series> compute(std::span<const Series> z, JetCache& cache) const = 0;
};

namespace {

using Impl = BundleVectorField::Impl;

void check_bundle_point(const FinslerMetric& m, std::span<const Series> z) {
  const int n = m.dimension();
  SlitTangentPoint p{Vec(n), Vec(n)};
  for (int i = 0; i < n; ++i) {
    p.x[i] = z[i].value();
    p.y[i] = z[n + i].value();
  }
  validate_point(m, p);
}

struct HorizontalImpl final : Impl {
  BaseVectorField X;
  std::vector<Series> compute(std::span<const Series> z, JetCache& cache) const override {
    check_bundle_point(*metric, z);
    const auto& G = cache.spray(*metric, z);
    const auto Xs = X.series(z.first(n));
    std::vector<Series> out(Xs.begin(), Xs.end());
    out.resize(2 * n);
    for (int i = 0; i < n; ++i) {
      Series acc;
      for (int j = 0; j < n; ++j) {
        if (X.is_constant() && Xs[j].value() == 0.0) continue;
        Series term = derivative(G[i], n + j) * Xs[j];
        if (acc.valid()) acc += term;
        else acc = std::move(term);
      }
      out[n + i] = acc.valid() ? -acc : Series(z[0].space(), 0.0);
    }
    return out;
  }
};

struct VerticalImpl final : Impl {
  BaseVectorField X;
  std::vector<Series> compute(std::span<const Series> z, JetCache&) const override {
    std::vector<Series> out;
    out.reserve(2 * n);
    for (int i = 0; i < n; ++i) out.emplace_back(z[0].space(), 0.0);
    for (auto& s : X.series(z.first(n))) out.push_back(std::move(s));
    return out;
  }
};

struct LiouvilleImpl final : Impl {
  std::vector<Series> compute(std::span<const Series> z, JetCache&) const override {
    std::vector<Series> out;
    out.reserve(2 * n);
    for (int i = 0; i < n; ++i) out.emplace_back(z[0].space(), 0.0);
    for (int i = 0; i < n; ++i) out.push_back(z[n + i]);
    return out;
  }
};

struct SprayImpl final : Impl {
  std::vector<Series> compute(std::span<const Series> z, JetCache& cache) const override {
    check_bundle_point(*metric, z);
    const auto& G = cache.spray(*metric, z);
    std::vector<Series> out;
    out.reserve(2 * n);
    for (int i = 0; i < n; ++i) out.push_back(z[n + i]);
    for (int i = 0; i < n; ++i) out.push_back(-2.0 * G[i]);
    return out;
  }
};

struct BracketImpl final : Impl {
  BracketImpl(BundleVectorField a, BundleVectorField b) : xi(std::move(a)), eta(std::move(b)) {}
  BundleVectorField xi, eta;
  std::vector<Series> compute(std::span<const Series> z, JetCache& cache) const override {
    const auto a = xi.jet(z, cache);
    const auto b = eta.jet(z, cache);
    const int dim = 2 * n;
    // Skipping identically zero factors is safe once the result is capped at
    // the weakest exactness of any input.
    int order = a[0].order();
    for (int v = 0; v < dim; ++v) order = std::min({order, a[v].order(), b[v].order()});
    order = std::max(order - 1, 0);
    auto is_zero = [](const Series& s) {
      return std::all_of(s.coeffs().begin(), s.coeffs().end(), [](double c) { return c == 0.0; });
    };
    std::vector<Series> out(dim);
    for (int v = 0; v < dim; ++v) {
      const bool a_zero = is_zero(a[v]);
      const bool b_zero = is_zero(b[v]);
      for (int r = 0; r < dim; ++r) {
        if (!a_zero) {
          Series t = a[v].truncated(order) * derivative(b[r], v);
          if (out[r].valid()) out[r] += t;
          else out[r] = std::move(t);
        }
        if (!b_zero) {
          Series t = b[v].truncated(order) * derivative(a[r], v);
          if (out[r].valid()) out[r] -= t;
          else out[r] = -t;
        }
      }
    }
    for (auto& s : out) s = s.valid() ? s.truncated(order) : Series(z[0].space(), 0.0).truncated(order);
    return out;
  }
};

struct CombinationImpl final : Impl {
  CombinationImpl(double a, BundleVectorField x, double b, BundleVectorField e)
      : ca(a), cb(b), xi(std::move(x)), eta(std::move(e)) {}
  double ca, cb;
  BundleVectorField xi, eta;
  std::vector<Series> compute(std::span<const Series> z, JetCache& cache) const override {
    const auto a = xi.jet(z, cache);
    const auto b = eta.jet(z, cache);
    std::vector<Series> out;
    out.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(ca * a[i] + cb * b[i]);
    return out;
  }
};

struct CustomImpl final : Impl {
  BundleVectorField::CustomJet fn;
  std::vector<Series> compute(std::span<const Series> z, JetCache&) const override {
    if (metric) check_bundle_point(*metric, z);
    auto out = fn(z);
    if (static_cast<int>(out.size()) != 2 * n) throw ParameterError("custom field returned wrong component count");
    return out;
  }
};

void check_dimension(int n, int expected, const char* what) {
  if (n != expected) throw ParameterError(std::string(what) + ": dimension mismatch");
}

}  // namespace

BundleVectorField BundleVectorField::horizontal_lift(MetricPtr m, BaseVectorField X) {
  check_dimension(X.dimension(), m->dimension(), "horizontal lift");
  auto impl = std::make_shared<HorizontalImpl>();
  impl->n = m->dimension();
  impl->tag = "horizontal lift of " + X.tag();
  impl->loss = 3;
  impl->metric = std::move(m);
  impl->X = std::move(X);
  return BundleVectorField(impl);
}

BundleVectorField BundleVectorField::vertical_lift(BaseVectorField X) {
  auto impl = std::make_shared<VerticalImpl>();
  impl->n = X.dimension();
  impl->tag = "vertical lift of " + X.tag();
  impl->X = std::move(X);
  return BundleVectorField(impl);
}

BundleVectorField BundleVectorField::liouville(int n) {
  auto impl = std::make_shared<LiouvilleImpl>();
  impl->n = n;
  impl->tag = "Liouville field";
  return BundleVectorField(impl);
}

BundleVectorField BundleVectorField::spray(MetricPtr m) {
  auto impl = std::make_shared<SprayImpl>();
  impl->n = m->dimension();
  impl->tag = "spray";
  impl->loss = 2;
  impl->metric = std::move(m);
  return BundleVectorField(impl);
}

BundleVectorField BundleVectorField::bracket(const BundleVectorField& xi, const BundleVectorField& eta) {
  check_dimension(xi.dimension(), eta.dimension(), "bracket");
  auto impl = std::make_shared<BracketImpl>(xi, eta);
  impl->n = xi.dimension();
  impl->tag = "[" + xi.tag() + ", " + eta.tag() + "]";
  impl->loss = std::max(xi.loss(), eta.loss()) + 1;
  impl->metric = xi.impl_->metric ? xi.impl_->metric : eta.impl_->metric;
  return BundleVectorField(impl);
}

BundleVectorField BundleVectorField::linear_combination(double a, const BundleVectorField& xi, double b,
                                                        const BundleVectorField& eta) {
  check_dimension(xi.dimension(), eta.dimension(), "linear combination");
  auto impl = std::make_shared<CombinationImpl>(a, xi, b, eta);
  impl->n = xi.dimension();
  impl->tag = std::to_string(a) + " " + xi.tag() + " + " + std::to_string(b) + " " + eta.tag();
  impl->loss = std::max(xi.loss(), eta.loss());
  impl->metric = xi.impl_->metric ? xi.impl_->metric : eta.impl_->metric;
  return BundleVectorField(impl);
}

BundleVectorField BundleVectorField::custom(int n, std::string tag, CustomJet jet, int loss, MetricPtr metric) {
  auto impl = std::make_shared<CustomImpl>();
  impl->n = n;
  impl->tag = std::move(tag);
  impl->loss = loss;
  impl->metric = std::move(metric);
  impl->fn = std::move(jet);
  return BundleVectorField(impl);
}

int BundleVectorField::dimension() const { return impl_->n; }
const std::string& BundleVectorField::tag() const { return impl_->tag; }
int BundleVectorField::loss() const { return impl_->loss; }
const FinslerMetric* BundleVectorField::metric() const { return impl_->metric.get(); }

std::vector<Series> BundleVectorField::jet(std::span<const Series> z, JetCache& cache) const {
  auto& memo = cache.jets();
  const auto it = memo.find(impl_.get());
  if (it != memo.end()) return it->second;
  auto out = impl_->compute(z, cache);
  memo.emplace(impl_.get(), out);
  return out;
}

std::vector<Series> BundleVectorField::jet(std::span<const Series> z) const {
  JetCache cache;
  return impl_->compute(z, cache);
}

BundleTangentVector BundleVectorField::value(const SlitTangentPoint& p) const {
  const int n = dimension();
  if (p.dimension() != n) throw ParameterError("point dimension does not match field");
  const auto& space = TaylorSpace::get(2 * n, loss());
  const auto z = bundle_variables(space, p);
  const auto j = jet(z);
  BundleTangentVector v{p, Vec(n), Vec(n)};
  for (int i = 0; i < n; ++i) {
    v.a[i] = j[i].value();
    v.b[i] = j[n + i].value();
  }
  return v;
}

Mat BundleVectorField::jacobian(const SlitTangentPoint& p, Vec* value) const {
  const int n = dimension();
  if (p.dimension() != n) throw ParameterError("point dimension does not match field");
  const auto& space = TaylorSpace::get(2 * n, loss() + 1);
  const auto z = bundle_variables(space, p);
  const auto j = jet(z);
  Mat J(2 * n, 2 * n);
  if (value) value->resize(2 * n);
  for (int r = 0; r < 2 * n; ++r) {
    if (value) (*value)[r] = j[r].value();
    for (int c = 0; c < 2 * n; ++c) J(r, c) = j[r].linear(c);
  }
  return J;
}

}  // namespace affrig
