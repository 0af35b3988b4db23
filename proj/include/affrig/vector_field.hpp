#pragma once

// Vector fields on M and on the slit tangent bundle T°M.
//
// A bundle field is evaluated through its jet: the 2n components (a ; b) as
// Taylor series in the bundle coordinates z = (x ; y).  A field has a fixed
// "loss": with z of order K its jet is exact to order K - loss.  Values need
// K = loss, Jacobians K = loss + 1, and brackets add one to the loss.

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "affrig/core_geometry.hpp"
#include "affrig/expression.hpp"

namespace affrig {

class BaseVectorField {
 public:
  static BaseVectorField coordinate(int n, int i);
  static BaseVectorField constant(const Vec& c);
  // Components as expressions in x1..xn.
  static BaseVectorField expressions(const std::vector<std::string>& components);

  int dimension() const { return n_; }
  const std::string& tag() const { return tag_; }
  bool is_constant() const { return exprs_.empty(); }

  Vec value(const Vec& x) const;
  std::vector<Series> series(std::span<const Series> x) const;

 private:
  int n_ = 0;
  std::string tag_;
  Vec constant_;
  std::vector<Expression> exprs_;
};

// Spray and jet memo for one expansion point; shared by every field
// evaluated on the same z so that a bracket tree computes G only once.
class JetCache {
 public:
  const std::vector<Series>& spray(const FinslerMetric& m, std::span<const Series> z);
  std::unordered_map<const void*, std::vector<Series>>& jets() { return jets_; }

 private:
  std::unordered_map<const FinslerMetric*, std::vector<Series>> sprays_;
  std::unordered_map<const void*, std::vector<Series>> jets_;
};

class BundleVectorField {
 public:
  struct Impl;
  using CustomJet = std::function<std::vector<Series>(std::span<const Series> z)>;

  static BundleVectorField horizontal_lift(MetricPtr m, BaseVectorField X);
  static BundleVectorField vertical_lift(BaseVectorField X);
  static BundleVectorField liouville(int n);
  // S = y^i d/dx^i - 2 G^i d/dy^i.
  static BundleVectorField spray(MetricPtr m);
  static BundleVectorField bracket(const BundleVectorField& xi, const BundleVectorField& eta);
  static BundleVectorField linear_combination(double a, const BundleVectorField& xi, double b,
                                              const BundleVectorField& eta);
  // `jet` must be exact to z.order() - loss.
  static BundleVectorField custom(int n, std::string tag, CustomJet jet, int loss = 0, MetricPtr metric = nullptr);

  int dimension() const;
  const std::string& tag() const;
  int loss() const;
  // Metric whose chart bounds the field, if any.
  const FinslerMetric* metric() const;

  std::vector<Series> jet(std::span<const Series> z, JetCache& cache) const;
  std::vector<Series> jet(std::span<const Series> z) const;

  BundleTangentVector value(const SlitTangentPoint& p) const;
  // 2n x 2n matrix of partial derivatives; optionally also the value.
  Mat jacobian(const SlitTangentPoint& p, Vec* value = nullptr) const;

 private:
  explicit BundleVectorField(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

}  // namespace affrig
