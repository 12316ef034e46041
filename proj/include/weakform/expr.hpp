#pragma once

#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "weakform/field.hpp"

namespace weakform {

// Immutable expression tree. See docs/grammar.md for the accepted language.
class Expr {
 public:
  enum class Kind { number, variable, negate, add, sub, mul, div, pow, call };
  enum class Func { sin, cos, exp, log, sqrt, tanh, abs };

  struct Node {
    Kind kind;
    double value = 0.0;  // number
    std::string name;    // variable
    Func func = Func::sin;
    std::vector<std::shared_ptr<const Node>> args;
  };

  Expr() = default;
  explicit Expr(std::shared_ptr<const Node> root) : root_(std::move(root)) {}

  const Node& root() const { return *root_; }
  const std::shared_ptr<const Node>& root_ptr() const noexcept { return root_; }
  bool empty() const noexcept { return !root_; }
  std::set<std::string> variables() const;
  // Parenthesized only where precedence demands; parses back to an equal tree.
  std::string str() const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  std::shared_ptr<const Node> root_;
};

Expr parse(std::string_view source);

// Symbolic partial derivative with light constant folding.
Expr derivative(const Expr& e, const std::string& variable);

// Stack bytecode bound to a fixed variable order.
class Program {
 public:
  Program() = default;
  // Throws UnboundVariable if `e` uses a name not in `variables`.
  Program(const Expr& e, const std::vector<std::string>& variables);

  std::size_t arity() const noexcept { return arity_; }
  std::size_t stack_size() const noexcept { return stack_size_; }
  // `stack` must hold at least stack_size() entries.
  double operator()(std::span<const double> vars, std::span<double> stack) const;
  // Convenience overload with an internal stack; not for hot loops.
  double operator()(std::span<const double> vars) const;

 private:
  struct Op {
    enum Code : unsigned char { push, load, neg, add, sub, mul, div, pow, sin, cos, exp, log, sqrt, tanh, abs } code;
    double value = 0.0;
    std::size_t slot = 0;
  };
  std::vector<Op> ops_;
  std::size_t arity_ = 0;
  std::size_t stack_size_ = 0;
};

// Names of the spatial variables x1..xn.
std::vector<std::string> spatial_names(std::size_t dim);

// Pointwise evaluation with x1..xn taken from the grid.
ScalarField eval_on_grid(const Expr& e, const Grid& grid, const std::map<std::string, double>& bindings = {});

// An expression evaluated at points of R^n with extra named bindings.
class PointFunction {
 public:
  PointFunction() = default;
  PointFunction(const Expr& e, std::size_t dim, std::vector<std::string> extra = {});
  // `extra` values follow the order given at construction.
  double operator()(std::span<const double> x, std::span<const double> extra = {}) const;
  const Expr& expr() const noexcept { return expr_; }

 private:
  Expr expr_;
  Program program_;
  std::size_t dim_ = 0;
};

}  // namespace weakform
