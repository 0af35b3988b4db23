#include "affrig/taylor.hpp"

#include <cassert>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

namespace affrig {

namespace {

std::uint64_t encode(std::span<const std::uint8_t> exps, int base) {
  std::uint64_t key = 0;
  for (auto e : exps) key = key * static_cast<std::uint64_t>(base) + e;
  return key;
}

// Monomials of exact degree `d` in `vars` variables, lexicographically
// descending so that degree one comes out as z_0, z_1, ...
void enumerate_degree(int vars, int d, std::vector<std::uint8_t>& current, int pos,
                      std::vector<std::uint8_t>& out) {
  if (pos == vars - 1) {
    current[pos] = static_cast<std::uint8_t>(d);
    out.insert(out.end(), current.begin(), current.end());
    return;
  }
  for (int e = d; e >= 0; --e) {
    current[pos] = static_cast<std::uint8_t>(e);
    enumerate_degree(vars, d - e, current, pos + 1, out);
  }
}

}  // namespace

const TaylorSpace& TaylorSpace::get(int vars, int order) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::unique_ptr<TaylorSpace>> cache;
  thread_local std::map<std::pair<int, int>, const TaylorSpace*> local;
  auto key = std::make_pair(vars, order);
  if (auto it = local.find(key); it != local.end()) return *it->second;
  std::lock_guard lock(mutex);
  auto& slot = cache[key];
  if (!slot) slot = std::make_unique<TaylorSpace>(vars, order);
  local[key] = slot.get();
  return *slot;
}

TaylorSpace::TaylorSpace(int vars, int order) : vars_(vars), order_(order) {
  if (vars < 1 || order < 0 || order > 14) throw std::invalid_argument("TaylorSpace: bad dimensions");
  std::vector<std::uint8_t> current(vars, 0);
  size_by_order_.clear();
  for (int d = 0; d <= order; ++d) {
    enumerate_degree(vars, d, current, 0, exponents_);
    size_by_order_.push_back(exponents_.size() / vars);
  }
  const std::size_t count = size();
  degree_.resize(count);
  std::unordered_map<std::uint64_t, std::size_t> index;
  index.reserve(count * 2);
  for (std::size_t i = 0; i < count; ++i) {
    auto e = exponent(i);
    int d = 0;
    for (auto v : e) d += v;
    degree_[i] = d;
    index.emplace(encode(e, order + 1), i);
  }

  std::vector<std::uint8_t> sum(vars);
  product_offset_.assign(order + 2, 0);
  for (int d = 0; d <= order; ++d) {
    product_offset_[d] = products_.size();
    // All ordered pairs whose degrees add up to d.
    for (std::size_t i = 0; i < count; ++i) {
      if (degree_[i] > d) break;
      const int rest = d - degree_[i];
      const std::size_t lo = rest == 0 ? 0 : size_by_order_[rest - 1];
      const std::size_t hi = size_by_order_[rest];
      auto ei = exponent(i);
      for (std::size_t j = lo; j < hi; ++j) {
        auto ej = exponent(j);
        for (int v = 0; v < vars; ++v) sum[v] = static_cast<std::uint8_t>(ei[v] + ej[v]);
        products_.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                             static_cast<std::uint32_t>(index.at(encode(sum, order + 1)))});
      }
    }
  }
  product_offset_[order + 1] = products_.size();

  row_offset_.resize(count + 1);
  for (std::size_t i = 0; i < count; ++i) {
    row_offset_[i] = row_out_.size();
    auto ei = exponent(i);
    for (std::size_t j = 0; j < size_by_order_[order - degree_[i]]; ++j) {
      auto ej = exponent(j);
      for (int v = 0; v < vars; ++v) sum[v] = static_cast<std::uint8_t>(ei[v] + ej[v]);
      row_out_.push_back(static_cast<std::uint32_t>(index.at(encode(sum, order + 1))));
    }
  }
  row_offset_[count] = row_out_.size();

  derivative_.resize(vars);
  derivative_offset_.resize(vars);
  for (int v = 0; v < vars; ++v) {
    auto& table = derivative_[v];
    auto& offset = derivative_offset_[v];
    offset.assign(order + 1, 0);
    for (std::size_t i = 0; i < count; ++i) {
      auto e = exponent(i);
      if (e[v] == 0) continue;
      for (int d = degree_[i]; d <= order; ++d) offset[d] = table.size() + 1;
      std::vector<std::uint8_t> lower(e.begin(), e.end());
      lower[v] -= 1;
      table.push_back({static_cast<std::uint32_t>(i),
                       static_cast<std::uint32_t>(index.at(encode(lower, order + 1))),
                       static_cast<double>(e[v])});
    }
  }
  index_ = std::move(index);
}

std::size_t TaylorSpace::index_of(std::span<const std::uint8_t> exps) const {
  auto it = index_.find(encode(exps, order_ + 1));
  if (it == index_.end()) throw std::out_of_range("TaylorSpace: monomial outside space");
  return it->second;
}

std::span<const TaylorSpace::Derivative> TaylorSpace::derivative(int var, int order) const {
  return {derivative_[var].data(), derivative_offset_[var][order]};
}

// ----------------------------------------------------------------------------

Series::Series(const TaylorSpace* space, int order)
    : space_(space), order_(order), c_(space->size(order), 0.0) {}

Series::Series(const TaylorSpace& space, double value) : Series(&space, space.order()) {
  c_[0] = value;
}

Series Series::variable(const TaylorSpace& space, int var, double value) {
  Series s(space, value);
  if (space.order() >= 1) s.c_[1 + var] = 1.0;
  return s;
}

Series Series::truncated(int order) const {
  Series s = *this;
  if (order < s.order_) {
    s.order_ = order;
    s.c_.resize(space_->size(order));
  }
  return s;
}

Series& Series::operator+=(const Series& o) {
  assert(space_ == o.space_);
  if (o.order_ < order_) {
    order_ = o.order_;
    c_.resize(o.c_.size());
  }
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
  return *this;
}

Series& Series::operator-=(const Series& o) {
  assert(space_ == o.space_);
  if (o.order_ < order_) {
    order_ = o.order_;
    c_.resize(o.c_.size());
  }
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
  return *this;
}

Series& Series::operator*=(const Series& o) { return *this = *this * o; }
Series& Series::operator/=(const Series& o) { return *this = *this / o; }

Series& Series::operator+=(double v) {
  c_[0] += v;
  return *this;
}
Series& Series::operator-=(double v) {
  c_[0] -= v;
  return *this;
}
Series& Series::operator*=(double v) {
  for (auto& x : c_) x *= v;
  return *this;
}
Series& Series::operator/=(double v) {
  for (auto& x : c_) x /= v;
  return *this;
}

Series operator-(Series a) {
  for (auto& x : a.c_) x = -x;
  return a;
}

Series operator-(double a, const Series& b) {
  Series r = -b;
  r += a;
  return r;
}

namespace {

std::vector<double> power_taylor(double a, double p, int order) {
  std::vector<double> t(order + 1);
  double binom = 1.0;
  for (int k = 0; k <= order; ++k) {
    if (k > 0) binom *= (p - (k - 1)) / k;
    t[k] = binom * std::pow(a, p - k);
  }
  return t;
}

}  // namespace

Series operator*(const Series& a, const Series& b) {
  assert(a.space_ == b.space_);
  const int order = std::min(a.order_, b.order_);
  Series r(a.space_, order);
  const TaylorSpace& sp = *a.space_;
  const std::size_t n = r.c_.size();
  // Iterate over the sparser factor; rows of the product table are dense.
  std::size_t nza = 0, nzb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    nza += a.c_[i] != 0.0;
    nzb += b.c_[i] != 0.0;
  }
  const double* ps = nza <= nzb ? a.c_.data() : b.c_.data();
  const double* pd = nza <= nzb ? b.c_.data() : a.c_.data();
  double* out = r.c_.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double s = ps[i];
    if (s == 0.0) continue;
    const std::uint32_t* row = sp.product_row(i);
    const std::size_t len = sp.size(order - sp.degree(i));
    for (std::size_t j = 0; j < len; ++j) out[row[j]] += s * pd[j];
  }
  return r;
}

// Degree-by-degree recurrences: the degree-d coefficients of the result
// depend only on lower degrees.  Row d of lhs i covers rhs of degree d - deg(i).
Series operator/(const Series& a, const Series& b) {
  assert(a.space_ == b.space_);
  const int order = std::min(a.order_, b.order_);
  const TaylorSpace& sp = *a.space_;
  Series r(a.space_, order);
  const double b0 = b.c_[0];
  std::copy(a.c_.begin(), a.c_.begin() + r.c_.size(), r.c_.begin());
  r.c_[0] /= b0;
  for (int d = 1; d <= order; ++d) {
    for (std::size_t i = 0; i < sp.size(d - 1); ++i) {
      const double ri = r.c_[i];
      if (ri == 0.0) continue;
      const int e = d - sp.degree(i);
      const std::uint32_t* row = sp.product_row(i);
      for (std::size_t j = sp.size(e - 1); j < sp.size(e); ++j) r.c_[row[j]] -= ri * b.c_[j];
    }
    for (std::size_t k = sp.size(d - 1); k < sp.size(d); ++k) r.c_[k] /= b0;
  }
  return r;
}

Series operator/(double a, const Series& b) { return Series(*b.space_, a) / b; }

Series derivative(const Series& s, int var) {
  if (s.order_ < 1) throw std::logic_error("derivative of an order-0 series");
  Series r(s.space_, s.order_ - 1);
  for (const auto& d : s.space_->derivative(var, s.order_)) r.c_[d.dst] += d.factor * s.c_[d.src];
  return r;
}

Series sqrt(const Series& s) {
  const TaylorSpace& sp = *s.space_;
  Series r(s.space_, s.order_);
  const double r0 = std::sqrt(s.c_[0]);
  r.c_[0] = r0;
  for (int d = 1; d <= s.order_; ++d) {
    const std::size_t lo = sp.size(d - 1), hi = sp.size(d);
    for (std::size_t k = lo; k < hi; ++k) r.c_[k] = s.c_[k];
    for (std::size_t i = 1; i < lo; ++i) {
      const double ri = r.c_[i];
      if (ri == 0.0) continue;
      const int e = d - sp.degree(i);
      const std::uint32_t* row = sp.product_row(i);
      for (std::size_t j = sp.size(e - 1); j < sp.size(e); ++j) r.c_[row[j]] -= ri * r.c_[j];
    }
    for (std::size_t k = lo; k < hi; ++k) r.c_[k] /= 2.0 * r0;
  }
  return r;
}

Series compose(const Series& s, std::span<const double> taylor) {
  assert(static_cast<int>(taylor.size()) >= s.order_ + 1);
  Series h = s;
  h.c_[0] = 0.0;
  Series r(*s.space_, taylor[s.order_]);
  r = r.truncated(s.order_);
  for (int k = s.order_ - 1; k >= 0; --k) {
    r = r * h;
    r.c_[0] += taylor[k];
  }
  return r;
}

namespace {

std::vector<double> exp_taylor(double a, int order) {
  std::vector<double> t(order + 1);
  double e = std::exp(a), f = 1.0;
  for (int k = 0; k <= order; ++k) {
    if (k > 0) f *= k;
    t[k] = e / f;
  }
  return t;
}

std::vector<double> sincos_taylor(double a, int order, bool sine) {
  std::vector<double> t(order + 1);
  const double s = std::sin(a), c = std::cos(a);
  // d^k sin = sin, cos, -sin, -cos, ...
  const double cycle_sin[4] = {s, c, -s, -c};
  const double cycle_cos[4] = {c, -s, -c, s};
  double f = 1.0;
  for (int k = 0; k <= order; ++k) {
    if (k > 0) f *= k;
    t[k] = (sine ? cycle_sin[k % 4] : cycle_cos[k % 4]) / f;
  }
  return t;
}

}  // namespace

Series exp(const Series& s) { return compose(s, exp_taylor(s.value(), s.order())); }

Series log(const Series& s) {
  const double a = s.value();
  std::vector<double> t(s.order() + 1);
  t[0] = std::log(a);
  double ak = 1.0;
  for (int k = 1; k <= s.order(); ++k) {
    ak *= a;
    t[k] = ((k % 2) ? 1.0 : -1.0) / (k * ak);
  }
  return compose(s, t);
}

Series sin(const Series& s) { return compose(s, sincos_taylor(s.value(), s.order(), true)); }
Series cos(const Series& s) { return compose(s, sincos_taylor(s.value(), s.order(), false)); }
Series tan(const Series& s) { return sin(s) / cos(s); }

Series pow(const Series& s, double p) {
  if (p == std::round(p) && p >= 0 && p <= 16) {
    Series r(s.space(), 1.0);
    r = r.truncated(s.order());
    for (int k = 0; k < static_cast<int>(p); ++k) r = r * s;
    return r;
  }
  return compose(s, power_taylor(s.value(), p, s.order()));
}

Series pow(const Series& s, const Series& p) { return exp(p * log(s)); }
Series pow(double b, const Series& p) { return exp(p * std::log(b)); }

}  // namespace affrig
