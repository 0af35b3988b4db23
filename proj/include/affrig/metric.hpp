#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <nlohmann/json.hpp>
#include <span>
#include <string>

#include "affrig/taylor.hpp"

namespace affrig {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// A coordinate box, optionally minus a region where the chart or the metric
// is not usable (pole neighbourhoods, the boundary of a disk model, ...).
struct ChartDomain {
  int dimension = 0;
  Vec lower;
  Vec upper;
  std::function<bool(const Vec&)> excluded;
  std::string exclusion;  // human-readable description of `excluded`

  static ChartDomain box(int n, double lo, double hi);
  bool contains(const Vec& x) const;
};

// A Finsler function F(x, y) on a single chart.  Implementations provide an
// evaluator that works both on doubles and on Taylor series, which is all
// the differentiation machinery needs.
class FinslerMetric {
 public:
  FinslerMetric(ChartDomain chart, std::string name, nlohmann::json params)
      : chart_(std::move(chart)), name_(std::move(name)), params_(std::move(params)) {}
  virtual ~FinslerMetric() = default;

  int dimension() const { return chart_.dimension; }
  const ChartDomain& chart() const { return chart_; }
  const std::string& name() const { return name_; }
  const nlohmann::json& params() const { return params_; }

  virtual double operator()(std::span<const double> x, std::span<const double> y) const = 0;
  virtual Series operator()(std::span<const Series> x, std::span<const Series> y) const = 0;

 private:
  ChartDomain chart_;
  std::string name_;
  nlohmann::json params_;
};

using MetricPtr = std::shared_ptr<const FinslerMetric>;

// Adapter: Derived supplies `template <class S> S evaluate(span<const S>, span<const S>) const`.
template <class Derived>
class MetricExpression : public FinslerMetric {
 public:
  using FinslerMetric::FinslerMetric;

  double operator()(std::span<const double> x, std::span<const double> y) const final {
    return static_cast<const Derived&>(*this).evaluate(x, y);
  }
  Series operator()(std::span<const Series> x, std::span<const Series> y) const final {
    return static_cast<const Derived&>(*this).evaluate(x, y);
  }
};

template <class S>
S dot(std::span<const S> a, std::span<const S> b) {
  S acc = a[0] * b[0];
  for (std::size_t i = 1; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace affrig
