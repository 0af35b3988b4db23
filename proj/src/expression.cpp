#include "affrig/expression.hpp"

#include <cctype>
#include <cstdlib>
#include <sstream>

#include "affrig/errors.hpp"

namespace affrig {

struct Expression::Node {
  enum class Kind { Number, Variable, Add, Sub, Mul, Div, Pow, Neg, Func };
  Kind kind = Kind::Number;
  double number = 0.0;
  int variable = 0;
  std::string func;
  std::shared_ptr<const Node> lhs, rhs;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

class Parser {
 public:
  Parser(const std::string& text, int variables) : s_(text), variables_(variables) {}

  NodePtr parse() {
    auto n = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    std::ostringstream os;
    os << "expression \"" << s_ << "\": " << msg << " at position " << pos_;
    throw ParameterError(os.str());
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static NodePtr binary(Node::Kind k, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
  }

  NodePtr expr() {
    auto n = term();
    for (;;) {
      if (accept('+')) n = binary(Node::Kind::Add, n, term());
      else if (accept('-')) n = binary(Node::Kind::Sub, n, term());
      else return n;
    }
  }

  NodePtr term() {
    auto n = unary();
    for (;;) {
      if (accept('*')) n = binary(Node::Kind::Mul, n, unary());
      else if (accept('/')) n = binary(Node::Kind::Div, n, unary());
      else return n;
    }
  }

  NodePtr unary() {
    if (accept('-')) {
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::Neg;
      n->lhs = unary();
      return n;
    }
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    auto base = primary();
    if (accept('^')) return binary(Node::Kind::Pow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (accept('(')) {
      auto n = expr();
      if (!accept(')')) fail("missing ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      auto n = std::make_shared<Node>();
      n->number = v;
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string word = s_.substr(start, pos_ - start);
      if (word.size() > 1 && word[0] == 'x' &&
          word.find_first_not_of("0123456789", 1) == std::string::npos) {
        const int idx = std::atoi(word.c_str() + 1);
        if (idx < 1 || idx > variables_) fail("variable " + word + " out of range");
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::Variable;
        n->variable = idx - 1;
        return n;
      }
      if (word == "exp" || word == "log" || word == "sin" || word == "cos" || word == "tan" ||
          word == "sqrt") {
        if (!accept('(')) fail("expected '(' after " + word);
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::Func;
        n->func = word;
        n->lhs = expr();
        if (!accept(')')) fail("missing ')'");
        return n;
      }
      if (word == "pi") {
        auto n = std::make_shared<Node>();
        n->number = 3.14159265358979323846;
        return n;
      }
      fail("unknown identifier '" + word + "'");
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int variables_;
};

// Evaluation keeps constant subtrees as plain doubles so that Series
// arithmetic only happens where variables are involved.
template <class S>
struct Value {
  bool constant = true;
  double c = 0.0;
  S s{};
};

Series make_series(double c, const Series& like) { return Series(like.space(), c); }

template <class S>
S integer_power(const S& base, long k) {
  S r = base;
  for (long i = 1; i < k; ++i) r = r * base;
  return r;
}

template <class S>
Value<S> eval(const Node& n, std::span<const S> x) {
  using std::cos;
  using std::exp;
  using std::log;
  using std::pow;
  using std::sin;
  using std::sqrt;
  using std::tan;
  using K = Node::Kind;
  switch (n.kind) {
    case K::Number:
      return {true, n.number, {}};
    case K::Variable:
      return {false, 0.0, x[n.variable]};
    case K::Neg: {
      auto a = eval(*n.lhs, x);
      if (a.constant) return {true, -a.c, {}};
      return {false, 0.0, -a.s};
    }
    case K::Func: {
      auto a = eval(*n.lhs, x);
      auto apply = [&](auto&& v) {
        if (n.func == "exp") return exp(v);
        if (n.func == "log") return log(v);
        if (n.func == "sin") return sin(v);
        if (n.func == "cos") return cos(v);
        if (n.func == "tan") return tan(v);
        return sqrt(v);
      };
      if (a.constant) return {true, apply(a.c), {}};
      return {false, 0.0, apply(a.s)};
    }
    default:
      break;
  }
  auto a = eval(*n.lhs, x);
  auto b = eval(*n.rhs, x);
  if (a.constant && b.constant) {
    switch (n.kind) {
      case K::Add: return {true, a.c + b.c, {}};
      case K::Sub: return {true, a.c - b.c, {}};
      case K::Mul: return {true, a.c * b.c, {}};
      case K::Div: return {true, a.c / b.c, {}};
      default: return {true, std::pow(a.c, b.c), {}};
    }
  }
  if (n.kind == K::Pow) {
    if (b.constant) {
      const double p = b.c;
      if (p == std::round(p) && std::abs(p) <= 64) {
        if (p == 0) return {true, 1.0, {}};
        S r = integer_power(a.s, static_cast<long>(std::abs(p)));
        if (p < 0) r = 1.0 / r;
        return {false, 0.0, r};
      }
      return {false, 0.0, pow(a.s, p)};
    }
    if (a.constant) return {false, 0.0, pow(a.c, b.s)};
    return {false, 0.0, pow(a.s, b.s)};
  }
  if (a.constant) {
    switch (n.kind) {
      case K::Add: return {false, 0.0, a.c + b.s};
      case K::Sub: return {false, 0.0, a.c - b.s};
      case K::Mul: return {false, 0.0, a.c * b.s};
      default: return {false, 0.0, a.c / b.s};
    }
  }
  if (b.constant) {
    switch (n.kind) {
      case K::Add: return {false, 0.0, a.s + b.c};
      case K::Sub: return {false, 0.0, a.s - b.c};
      case K::Mul: return {false, 0.0, a.s * b.c};
      default: return {false, 0.0, a.s / b.c};
    }
  }
  switch (n.kind) {
    case K::Add: return {false, 0.0, a.s + b.s};
    case K::Sub: return {false, 0.0, a.s - b.s};
    case K::Mul: return {false, 0.0, a.s * b.s};
    default: return {false, 0.0, a.s / b.s};
  }
}

}  // namespace

Expression Expression::parse(const std::string& text, int variables) {
  Expression e;
  e.text_ = text;
  e.root_ = Parser(text, variables).parse();
  return e;
}

double Expression::operator()(std::span<const double> x) const {
  auto v = eval<double>(*root_, x);
  return v.constant ? v.c : v.s;
}

Series Expression::operator()(std::span<const Series> x) const {
  auto v = eval<Series>(*root_, x);
  return v.constant ? make_series(v.c, x[0]) : v.s;
}

}  // namespace affrig
