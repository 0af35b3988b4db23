#pragma once

// Truncated multivariate Taylor polynomials ("jets") used as the automatic
// differentiation scalar throughout the library.
//
// A Series holds the Taylor coefficients f_a = (d^a f)(z0) / a! of a function
// around a fixed expansion point, for every multi-index a of total degree up
// to its exactness order.  Arithmetic on series is arithmetic on the
// underlying functions, truncated at that order, so nested derivatives of any
// order come out exactly (up to rounding).  Derivatives lower the order by one.

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace affrig {

// Monomial bookkeeping for `vars` variables up to total degree `order`.
// Monomials are stored in graded order: the constant, then the `vars` linear
// monomials (index 1 + v for variable v), then degree 2, and so on, so the
// first size(k) entries are exactly the monomials of degree <= k.
class TaylorSpace {
 public:
  struct Product {
    std::uint32_t lhs, rhs, out;
  };
  struct Derivative {
    std::uint32_t src, dst;
    double factor;
  };

  // Shared, immutable instance; safe to call from several threads.
  static const TaylorSpace& get(int vars, int order);

  TaylorSpace(int vars, int order);

  int vars() const { return vars_; }
  int order() const { return order_; }
  std::size_t size(int order) const { return size_by_order_[order]; }
  std::size_t size() const { return size_by_order_[order_]; }
  int degree(std::size_t idx) const { return degree_[idx]; }
  std::span<const std::uint8_t> exponent(std::size_t idx) const {
    return {exponents_.data() + idx * vars_, static_cast<std::size_t>(vars_)};
  }
  std::size_t index_of(std::span<const std::uint8_t> exps) const;

  // Ordered pairs (lhs, rhs) whose product monomial has degree <= order,
  // grouped by output degree.
  std::span<const Product> products(int order) const {
    return {products_.data(), product_offset_[order + 1]};
  }
  // Ordered pairs with output degree exactly d.
  std::span<const Product> products_of_degree(int d) const {
    return {products_.data() + product_offset_[d], product_offset_[d + 1] - product_offset_[d]};
  }
  // Output monomials of lhs * rhs for rhs = 0 .. size(order - degree(lhs)) - 1.
  const std::uint32_t* product_row(std::size_t lhs) const { return row_out_.data() + row_offset_[lhs]; }
  // d/dz_var, restricted to source monomials of degree <= order.
  std::span<const Derivative> derivative(int var, int order) const;

 private:
  int vars_;
  int order_;
  std::vector<std::size_t> size_by_order_;
  std::vector<std::uint8_t> exponents_;
  std::vector<int> degree_;
  std::vector<Product> products_;
  std::vector<std::size_t> product_offset_;
  std::vector<std::uint32_t> row_out_;
  std::vector<std::size_t> row_offset_;
  std::vector<std::vector<Derivative>> derivative_;
  std::vector<std::vector<std::size_t>> derivative_offset_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

class Series {
 public:
  Series() = default;
  // Constant function, exact to the full order of `space`.
  Series(const TaylorSpace& space, double value);

  // The coordinate function z_var expanded around `value`.
  static Series variable(const TaylorSpace& space, int var, double value);

  const TaylorSpace& space() const { return *space_; }
  bool valid() const { return space_ != nullptr; }
  int order() const { return order_; }
  double value() const { return c_[0]; }
  // Coefficient of the linear monomial z_var, i.e. the first partial derivative.
  double linear(int var) const { return order_ >= 1 ? c_[1 + var] : 0.0; }
  double coeff(std::size_t idx) const { return idx < c_.size() ? c_[idx] : 0.0; }
  std::span<const double> coeffs() const { return c_; }
  std::span<double> coeffs() { return c_; }

  // Drop coefficients above `order`.
  Series truncated(int order) const;

  Series& operator+=(const Series& o);
  Series& operator-=(const Series& o);
  Series& operator*=(const Series& o);
  Series& operator/=(const Series& o);
  Series& operator+=(double v);
  Series& operator-=(double v);
  Series& operator*=(double v);
  Series& operator/=(double v);

  friend Series operator-(Series a);
  friend Series operator+(Series a, const Series& b) { return a += b; }
  friend Series operator-(Series a, const Series& b) { return a -= b; }
  friend Series operator*(const Series& a, const Series& b);
  friend Series operator/(const Series& a, const Series& b);
  friend Series operator+(Series a, double b) { return a += b; }
  friend Series operator+(double a, Series b) { return b += a; }
  friend Series operator-(Series a, double b) { return a -= b; }
  friend Series operator-(double a, const Series& b);
  friend Series operator*(Series a, double b) { return a *= b; }
  friend Series operator*(double a, Series b) { return b *= a; }
  friend Series operator/(Series a, double b) { return a /= b; }
  friend Series operator/(double a, const Series& b);

 private:
  Series(const TaylorSpace* space, int order);
  friend Series derivative(const Series& s, int var);
  friend Series sqrt(const Series& s);
  friend Series compose(const Series& s, std::span<const double> taylor);

  const TaylorSpace* space_ = nullptr;
  int order_ = 0;
  std::vector<double> c_;
};

// Partial derivative with respect to variable `var`; exact to order() - 1.
Series derivative(const Series& s, int var);

// f(s) given the univariate Taylor coefficients f^(k)(s0)/k!, k = 0..order.
Series compose(const Series& s, std::span<const double> taylor);

Series sqrt(const Series& s);
Series exp(const Series& s);
Series log(const Series& s);
Series sin(const Series& s);
Series cos(const Series& s);
Series tan(const Series& s);
Series pow(const Series& s, double p);
Series pow(const Series& s, const Series& p);
Series pow(double b, const Series& p);

}  // namespace affrig
