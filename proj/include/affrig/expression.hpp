#pragma once

// Small arithmetic expression language used for user-supplied metric
// coefficients, vector fields and maps.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-') unary | power
//   power   := primary ('^' unary)?
//   primary := number | variable | func '(' expr ')' | '(' expr ')'
//   func    := exp | log | sin | cos | tan | sqrt
//
// Variables are x1..xn (1-based).  Integer exponents are expanded into
// products, so x1^3 is valid for negative x1.

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "affrig/taylor.hpp"

namespace affrig {

class Expression {
 public:
  // Throws ParameterError on syntax errors or variables beyond x<variables>.
  static Expression parse(const std::string& text, int variables);

  const std::string& text() const { return text_; }

  double operator()(std::span<const double> x) const;
  Series operator()(std::span<const Series> x) const;

  struct Node;

 private:
  std::string text_;
  std::shared_ptr<const Node> root_;
};

}  // namespace affrig
