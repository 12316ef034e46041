#include "weakform/expr.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cctype>
#include <cmath>
#include <numbers>

namespace weakform {

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

struct FuncName {
  const char* name;
  Expr::Func func;
};

constexpr FuncName kFunctions[] = {
    {"sin", Expr::Func::sin},   {"cos", Expr::Func::cos},   {"exp", Expr::Func::exp}, {"log", Expr::Func::log},
    {"sqrt", Expr::Func::sqrt}, {"tanh", Expr::Func::tanh}, {"abs", Expr::Func::abs},
};

const char* func_name(Expr::Func f) {
  for (const FuncName& fn : kFunctions)
    if (fn.func == f) return fn.name;
  return "?";
}

bool lookup_func(std::string_view name, Expr::Func& out) {
  for (const FuncName& fn : kFunctions)
    if (name == fn.name) {
      out = fn.func;
      return true;
    }
  return false;
}

NodePtr make(Expr::Kind kind, std::vector<NodePtr> args = {}) {
  auto n = std::make_shared<Expr::Node>();
  n->kind = kind;
  n->args = std::move(args);
  return n;
}

NodePtr number(double v) {
  auto n = std::make_shared<Expr::Node>();
  n->kind = Expr::Kind::number;
  n->value = v;
  return n;
}

struct Token {
  enum Kind { number, ident, op, end } kind;
  std::string_view text;
  double value = 0.0;
  std::size_t pos = 0;  // 0-based
};

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) { advance(); }

  NodePtr parse_all() {
    NodePtr e = expr();
    if (tok_.kind != Token::end) fail({"+", "-", "*", "/", "^", "end of input"});
    return e;
  }

 private:
  std::string_view src_;
  std::size_t at_ = 0;
  Token tok_{Token::end, {}, 0.0, 0};

  [[noreturn]] void fail(std::vector<std::string> expected) {
    std::string msg = "syntax error at offset " + std::to_string(tok_.pos + 1) + ": expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) msg += (i ? ", " : "") + ("'" + expected[i] + "'");
    msg += tok_.kind == Token::end ? " before end of input" : ", found '" + std::string(tok_.text) + "'";
    throw SyntaxError(tok_.pos + 1, std::move(expected), msg);
  }

  void advance() {
    while (at_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[at_]))) ++at_;
    tok_ = Token{Token::end, {}, 0.0, at_};
    if (at_ >= src_.size()) return;
    const char c = src_[at_];
    const std::size_t start = at_;
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      while (at_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[at_])) || src_[at_] == '.')) ++at_;
      if (at_ < src_.size() && (src_[at_] == 'e' || src_[at_] == 'E')) {
        std::size_t k = at_ + 1;
        if (k < src_.size() && (src_[k] == '+' || src_[k] == '-')) ++k;
        if (k < src_.size() && std::isdigit(static_cast<unsigned char>(src_[k]))) {
          at_ = k;
          while (at_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[at_]))) ++at_;
        }
      }
      tok_.kind = Token::number;
      tok_.text = src_.substr(start, at_ - start);
      const auto [end, ec] = std::from_chars(tok_.text.data(), tok_.text.data() + tok_.text.size(), tok_.value);
      if (ec != std::errc() || end != tok_.text.data() + tok_.text.size()) {
        at_ = start;
        tok_.kind = Token::op;
        fail({"number"});
      }
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (at_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[at_])) || src_[at_] == '_')) ++at_;
      tok_.kind = Token::ident;
      tok_.text = src_.substr(start, at_ - start);
      return;
    }
    ++at_;
    tok_.kind = Token::op;
    tok_.text = src_.substr(start, 1);
    if (std::string_view("+-*/^(),").find(c) == std::string_view::npos) fail({"operand"});
  }

  bool is_op(char c) const { return tok_.kind == Token::op && tok_.text[0] == c; }

  NodePtr expr() {
    NodePtr lhs = term();
    while (is_op('+') || is_op('-')) {
      const Expr::Kind k = is_op('+') ? Expr::Kind::add : Expr::Kind::sub;
      advance();
      lhs = make(k, {lhs, term()});
    }
    return lhs;
  }

  NodePtr term() {
    NodePtr lhs = unary();
    while (is_op('*') || is_op('/')) {
      const Expr::Kind k = is_op('*') ? Expr::Kind::mul : Expr::Kind::div;
      advance();
      lhs = make(k, {lhs, unary()});
    }
    return lhs;
  }

  NodePtr unary() {
    if (is_op('-')) {
      advance();
      return make(Expr::Kind::negate, {unary()});
    }
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (is_op('^')) {
      advance();
      return make(Expr::Kind::pow, {base, unary()});
    }
    return base;
  }

  NodePtr primary() {
    if (tok_.kind == Token::number) {
      NodePtr n = number(tok_.value);
      advance();
      return n;
    }
    if (tok_.kind == Token::ident) {
      const std::string name(tok_.text);
      advance();
      Expr::Func f;
      if (is_op('(')) {
        if (!lookup_func(name, f)) throw UnknownFunction(name);
        advance();
        NodePtr arg = expr();
        if (!is_op(')')) fail({")"});
        advance();
        auto n = std::make_shared<Expr::Node>();
        n->kind = Expr::Kind::call;
        n->func = f;
        n->args = {arg};
        return n;
      }
      if (lookup_func(name, f)) fail({"("});
      if (name == "pi") return number(std::numbers::pi);
      if (name == "e") return number(std::numbers::e);
      auto n = std::make_shared<Expr::Node>();
      n->kind = Expr::Kind::variable;
      n->name = name;
      return n;
    }
    if (is_op('(')) {
      advance();
      NodePtr e = expr();
      if (!is_op(')')) fail({")"});
      advance();
      return e;
    }
    fail({"number", "identifier", "(", "-"});
  }
};

bool equal(const Expr::Node& a, const Expr::Node& b) {
  if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
  switch (a.kind) {
    case Expr::Kind::number:
      if (std::bit_cast<std::uint64_t>(a.value) != std::bit_cast<std::uint64_t>(b.value)) return false;
      break;
    case Expr::Kind::variable:
      if (a.name != b.name) return false;
      break;
    case Expr::Kind::call:
      if (a.func != b.func) return false;
      break;
    default:
      break;
  }
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (!equal(*a.args[i], *b.args[i])) return false;
  return true;
}

void collect(const Expr::Node& n, std::set<std::string>& out) {
  if (n.kind == Expr::Kind::variable) out.insert(n.name);
  for (const auto& a : n.args) collect(*a, out);
}

// Binding strength used by the printer: + - (1), * / (2), unary - (3), ^ (4), atoms (5).
int precedence(const Expr::Node& n) {
  switch (n.kind) {
    case Expr::Kind::add:
    case Expr::Kind::sub:
      return 1;
    case Expr::Kind::mul:
    case Expr::Kind::div:
      return 2;
    case Expr::Kind::negate:
      return 3;
    case Expr::Kind::pow:
      return 4;
    default:
      return 5;
  }
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string print(const Expr::Node& n);

std::string wrap(const Expr::Node& n, bool parens) { return parens ? "(" + print(n) + ")" : print(n); }

std::string print(const Expr::Node& n) {
  const int p = precedence(n);
  switch (n.kind) {
    case Expr::Kind::number:
      return format_number(n.value);
    case Expr::Kind::variable:
      return n.name;
    case Expr::Kind::call:
      return std::string(func_name(n.func)) + "(" + print(*n.args[0]) + ")";
    case Expr::Kind::negate:
      return "-" + wrap(*n.args[0], precedence(*n.args[0]) < 3);
    case Expr::Kind::pow:
      return wrap(*n.args[0], precedence(*n.args[0]) < 5) + "^" + wrap(*n.args[1], precedence(*n.args[1]) < 3);
    default: {
      const char* op = n.kind == Expr::Kind::add ? "+" : n.kind == Expr::Kind::sub ? "-" : n.kind == Expr::Kind::mul ? "*" : "/";
      return wrap(*n.args[0], precedence(*n.args[0]) < p) + op + wrap(*n.args[1], precedence(*n.args[1]) <= p);
    }
  }
}

}  // namespace

SyntaxError::SyntaxError(std::size_t position, std::vector<std::string> expected, const std::string& message)
    : Error(Code::syntax, message), position_(position), expected_(std::move(expected)) {}

std::set<std::string> Expr::variables() const {
  std::set<std::string> out;
  if (root_) collect(*root_, out);
  return out;
}

std::string Expr::str() const { return root_ ? print(*root_) : std::string(); }

bool operator==(const Expr& a, const Expr& b) {
  if (!a.root_ || !b.root_) return !a.root_ && !b.root_;
  return equal(*a.root_, *b.root_);
}

Expr parse(std::string_view source) { return Expr(Parser(source).parse_all()); }

namespace {

bool is_number(const NodePtr& n, double v) { return n->kind == Expr::Kind::number && n->value == v; }

NodePtr call(Expr::Func f, NodePtr arg) {
  auto n = std::make_shared<Expr::Node>();
  n->kind = Expr::Kind::call;
  n->func = f;
  n->args = {std::move(arg)};
  return n;
}

NodePtr add(NodePtr a, NodePtr b) {
  if (is_number(a, 0.0)) return b;
  if (is_number(b, 0.0)) return a;
  return make(Expr::Kind::add, {std::move(a), std::move(b)});
}

NodePtr sub(NodePtr a, NodePtr b) {
  if (is_number(b, 0.0)) return a;
  if (is_number(a, 0.0)) return make(Expr::Kind::negate, {std::move(b)});
  return make(Expr::Kind::sub, {std::move(a), std::move(b)});
}

NodePtr mul(NodePtr a, NodePtr b) {
  if (is_number(a, 0.0) || is_number(b, 0.0)) return number(0.0);
  if (is_number(a, 1.0)) return b;
  if (is_number(b, 1.0)) return a;
  return make(Expr::Kind::mul, {std::move(a), std::move(b)});
}

NodePtr divide(NodePtr a, NodePtr b) {
  if (is_number(a, 0.0)) return number(0.0);
  if (is_number(b, 1.0)) return a;
  return make(Expr::Kind::div, {std::move(a), std::move(b)});
}

NodePtr diff(const NodePtr& n, const std::string& var) {
  using K = Expr::Kind;
  switch (n->kind) {
    case K::number: return number(0.0);
    case K::variable: return number(n->name == var ? 1.0 : 0.0);
    case K::negate: {
      NodePtr d = diff(n->args[0], var);
      return is_number(d, 0.0) ? d : make(K::negate, {d});
    }
    case K::add: return add(diff(n->args[0], var), diff(n->args[1], var));
    case K::sub: return sub(diff(n->args[0], var), diff(n->args[1], var));
    case K::mul:
      return add(mul(diff(n->args[0], var), n->args[1]), mul(n->args[0], diff(n->args[1], var)));
    case K::div: {
      const NodePtr &u = n->args[0], &v = n->args[1];
      return divide(sub(mul(diff(u, var), v), mul(u, diff(v, var))), mul(v, v));
    }
    case K::pow: {
      const NodePtr &u = n->args[0], &v = n->args[1];
      const NodePtr du = diff(u, var), dv = diff(v, var);
      if (is_number(dv, 0.0)) {
        if (is_number(du, 0.0)) return number(0.0);
        if (v->kind == K::number)
          return mul(mul(v, make(K::pow, {u, number(v->value - 1.0)})), du);
        return mul(mul(v, make(K::pow, {u, sub(v, number(1.0))})), du);
      }
      // u^v (v' log u + v u'/u)
      return mul(n, add(mul(dv, call(Expr::Func::log, u)), divide(mul(v, du), u)));
    }
    case K::call: {
      const NodePtr& u = n->args[0];
      const NodePtr du = diff(u, var);
      if (is_number(du, 0.0)) return du;
      NodePtr outer;
      switch (n->func) {
        case Expr::Func::sin: outer = call(Expr::Func::cos, u); break;
        case Expr::Func::cos: outer = make(K::negate, {call(Expr::Func::sin, u)}); break;
        case Expr::Func::exp: outer = n; break;
        case Expr::Func::log: outer = divide(number(1.0), u); break;
        case Expr::Func::sqrt: outer = divide(number(0.5), n); break;
        case Expr::Func::tanh: outer = sub(number(1.0), mul(n, n)); break;
        case Expr::Func::abs: outer = divide(u, n); break;
      }
      return mul(outer, du);
    }
  }
  return number(0.0);
}

}  // namespace

Expr derivative(const Expr& e, const std::string& variable) {
  if (e.empty()) throw InvalidArgument("cannot differentiate an empty expression");
  return Expr(diff(e.root_ptr(), variable));
}

Program::Program(const Expr& e, const std::vector<std::string>& variables) : arity_(variables.size()) {
  if (e.empty()) throw InvalidArgument("cannot compile an empty expression");
  // Post-order walk; depth tracking gives the stack bound.
  struct Walker {
    const std::vector<std::string>& vars;
    std::vector<Op>& ops;
    std::size_t max_depth = 0;

    void run(const Expr::Node& n, std::size_t depth) {
      max_depth = std::max(max_depth, depth + 1);
      switch (n.kind) {
        case Expr::Kind::number:
          ops.push_back({Op::push, n.value, 0});
          return;
        case Expr::Kind::variable: {
          for (std::size_t i = 0; i < vars.size(); ++i)
            if (vars[i] == n.name) {
              ops.push_back({Op::load, 0.0, i});
              return;
            }
          throw UnboundVariable(n.name);
        }
        case Expr::Kind::negate:
          run(*n.args[0], depth);
          ops.push_back({Op::neg, 0.0, 0});
          return;
        case Expr::Kind::call: {
          run(*n.args[0], depth);
          static constexpr Op::Code codes[] = {Op::sin, Op::cos, Op::exp, Op::log, Op::sqrt, Op::tanh, Op::abs};
          ops.push_back({codes[static_cast<int>(n.func)], 0.0, 0});
          return;
        }
        default: {
          run(*n.args[0], depth);
          run(*n.args[1], depth + 1);
          Op::Code c = Op::add;
          if (n.kind == Expr::Kind::sub) c = Op::sub;
          if (n.kind == Expr::Kind::mul) c = Op::mul;
          if (n.kind == Expr::Kind::div) c = Op::div;
          if (n.kind == Expr::Kind::pow) c = Op::pow;
          ops.push_back({c, 0.0, 0});
          return;
        }
      }
    }
  } walker{variables, ops_};
  walker.run(e.root(), 0);
  stack_size_ = walker.max_depth;
}

double Program::operator()(std::span<const double> vars, std::span<double> stack) const {
  double* sp = stack.data();
  for (const Op& op : ops_) {
    switch (op.code) {
      case Op::push: *sp++ = op.value; break;
      case Op::load: *sp++ = vars[op.slot]; break;
      case Op::neg: sp[-1] = -sp[-1]; break;
      case Op::add: --sp; sp[-1] += *sp; break;
      case Op::sub: --sp; sp[-1] -= *sp; break;
      case Op::mul: --sp; sp[-1] *= *sp; break;
      case Op::div: --sp; sp[-1] /= *sp; break;
      case Op::pow: {
        --sp;
        const double ex = *sp;
        const double r = std::nearbyint(ex);
        // Small integer exponents by repeated multiplication keep negative bases exact.
        if (r == ex && std::abs(r) <= 16) {
          double b = sp[-1], acc = 1.0;
          for (int k = 0; k < static_cast<int>(std::abs(r)); ++k) acc *= b;
          sp[-1] = r < 0 ? 1.0 / acc : acc;
        } else {
          sp[-1] = std::pow(sp[-1], ex);
        }
        break;
      }
      case Op::sin: sp[-1] = std::sin(sp[-1]); break;
      case Op::cos: sp[-1] = std::cos(sp[-1]); break;
      case Op::exp: sp[-1] = std::exp(sp[-1]); break;
      case Op::log: sp[-1] = std::log(sp[-1]); break;
      case Op::sqrt: sp[-1] = std::sqrt(sp[-1]); break;
      case Op::tanh: sp[-1] = std::tanh(sp[-1]); break;
      case Op::abs: sp[-1] = std::abs(sp[-1]); break;
    }
  }
  return sp[-1];
}

double Program::operator()(std::span<const double> vars) const {
  std::vector<double> stack(stack_size_);
  return (*this)(vars, stack);
}

std::vector<std::string> spatial_names(std::size_t dim) {
  std::vector<std::string> names;
  for (std::size_t a = 0; a < dim; ++a) names.push_back("x" + std::to_string(a + 1));
  return names;
}

ScalarField eval_on_grid(const Expr& e, const Grid& grid, const std::map<std::string, double>& bindings) {
  std::vector<std::string> names = spatial_names(grid.dim());
  std::vector<double> fixed;
  for (const auto& [name, value] : bindings) {
    names.push_back(name);
    fixed.push_back(value);
  }
  const Program prog(e, names);
  ScalarField out = ScalarField::sample(grid, [&](std::span<const double> x) {
    thread_local std::vector<double> vars, stack;
    vars.assign(x.begin(), x.end());
    vars.insert(vars.end(), fixed.begin(), fixed.end());
    if (stack.size() < prog.stack_size()) stack.resize(prog.stack_size());
    return prog(vars, stack);
  });
  out.require_finite(("expression '" + e.str() + "'").c_str());
  return out;
}

PointFunction::PointFunction(const Expr& e, std::size_t dim, std::vector<std::string> extra) : expr_(e), dim_(dim) {
  std::vector<std::string> names = spatial_names(dim);
  names.insert(names.end(), extra.begin(), extra.end());
  program_ = Program(e, names);
}

double PointFunction::operator()(std::span<const double> x, std::span<const double> extra) const {
  double vars[32];
  double stack[64];
  const std::size_t n = dim_ + extra.size();
  if (n > 32 || program_.stack_size() > 64) {
    std::vector<double> v(x.begin(), x.begin() + dim_);
    v.insert(v.end(), extra.begin(), extra.end());
    return program_(v);
  }
  for (std::size_t i = 0; i < dim_; ++i) vars[i] = x[i];
  for (std::size_t i = 0; i < extra.size(); ++i) vars[dim_ + i] = extra[i];
  return program_(std::span<const double>(vars, n), std::span<double>(stack, 64));
}

}  // namespace weakform
