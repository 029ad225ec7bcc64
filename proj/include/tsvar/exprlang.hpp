// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsvar/errors.hpp"

namespace tsvar {

/// A small immutable expression language over the time variable `t` and the
/// state slots `u0..uR`. Supports + - * / ^ (right-associative, binding
/// tighter than unary minus), unary minus, and ln, exp, sin, cos, abs, sign.
/// No implicit multiplication: "2t" is a parse error, "2*t" is required.
class Expr {
public:
  enum class Unary { Neg, Ln, Exp, Sin, Cos, Abs, Sign };
  enum class Binary { Add, Sub, Mul, Div, Pow };

  /// Variable encoding: 0 is `t`, 1 + i is `u_i`.
  static constexpr int kVarT = 0;
  static int var_u(int i) { return 1 + i; }

  Expr() = default;

  static Expr constant(double v) {
    return Expr(std::make_shared<Node>(Node::make_constant(v)));
  }
  static Expr variable(int var) {
    return Expr(std::make_shared<Node>(Node::make_variable(var)));
  }
  static Expr unary(Unary op, Expr a) {
    return fold_unary(op, std::move(a));
  }
  static Expr binary(Binary op, Expr a, Expr b) {
    return fold_binary(op, std::move(a), std::move(b));
  }

  /// Parses `source`; state variables u0..uR are admitted for R = r, and
  /// none at all when r < 0 (pure functions of t).
  static Expr parse(std::string_view source, int r) {
    Parser parser(source, r);
    Expr e = parser.parse_expr();
    parser.expect_end();
    return e;
  }

  /// Parses an expression over `t` only (basis functions, candidates).
  static Expr parse_time_function(std::string_view source) {
    return parse(source, -1);
  }

  bool valid() const noexcept { return node_ != nullptr; }

  /// Evaluates with t and the state slots bound. Domain violations
  /// (ln of non-positive, division by zero, fractional power of a negative
  /// base) and unbound variables raise eval_error.
  double evaluate(double t, std::span<const double> u = {}) const {
    require_valid();
    return eval_node(*node_, t, u);
  }

  /// Exact symbolic derivative with respect to `t` or `uK`.
  Expr differentiate(std::string_view var) const {
    return differentiate(parse_var_name(var));
  }

  Expr differentiate(int var) const {
    require_valid();
    return diff_node(node_, var);
  }

  /// Renders source text that parses back to an equivalent expression.
  std::string print() const {
    require_valid();
    std::string out;
    print_node(*node_, 0, out);
    return out;
  }

  /// Structural equality of syntax trees.
  friend bool ast_equal(const Expr& a, const Expr& b) {
    return node_equal(a.node_.get(), b.node_.get());
  }

  bool is_constant() const {
    require_valid();
    return node_->tag == Node::Tag::Constant;
  }
  bool is_constant(double v) const {
    return is_constant() && node_->value == v;
  }

  /// Largest state-slot index referenced, or -1 if none.
  int max_state_slot() const {
    require_valid();
    return max_slot(*node_);
  }

  bool depends_on(int var) const {
    require_valid();
    return node_depends(*node_, var);
  }

private:
  struct Node {
    enum class Tag { Constant, Variable, UnaryOp, BinaryOp };
    Tag tag;
    double value = 0.0;
    int var = 0;
    Unary uop = Unary::Neg;
    Binary bop = Binary::Add;
    std::shared_ptr<const Node> a, b;

    static Node make_constant(double v) {
      Node n;
      n.tag = Tag::Constant;
      n.value = v;
      return n;
    }
    static Node make_variable(int var) {
      Node n;
      n.tag = Tag::Variable;
      n.var = var;
      return n;
    }
  };
  using NodePtr = std::shared_ptr<const Node>;

  explicit Expr(NodePtr node) : node_(std::move(node)) {}

  void require_valid() const {
    if (!node_) throw eval_error("empty expression");
  }

  static Expr make_unary(Unary op, Expr a) {
    auto n = std::make_shared<Node>();
    n->tag = Node::Tag::UnaryOp;
    n->uop = op;
    n->a = a.node_;
    return Expr(std::move(n));
  }

  static Expr make_binary(Binary op, Expr a, Expr b) {
    auto n = std::make_shared<Node>();
    n->tag = Node::Tag::BinaryOp;
    n->bop = op;
    n->a = a.node_;
    n->b = b.node_;
    return Expr(std::move(n));
  }

  // Light constant folding; keeps derivative trees readable and canonical.
  static Expr fold_unary(Unary op, Expr a) {
    if (a.node_ && a.node_->tag == Node::Tag::Constant) {
      const double v = a.node_->value;
      switch (op) {
        case Unary::Neg: return constant(v == 0.0 ? 0.0 : -v);
        case Unary::Abs: return constant(std::abs(v));
        case Unary::Sign: return constant(v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0));
        case Unary::Ln:
          if (v > 0) return constant(std::log(v));
          break;
        case Unary::Exp: return constant(std::exp(v));
        case Unary::Sin: return constant(std::sin(v));
        case Unary::Cos: return constant(std::cos(v));
      }
    }
    return make_unary(op, std::move(a));
  }

  static bool is_const(const Expr& e, double v) {
    return e.node_ && e.node_->tag == Node::Tag::Constant &&
           e.node_->value == v;
  }

  static Expr fold_binary(Binary op, Expr a, Expr b) {
    const bool ca = a.node_ && a.node_->tag == Node::Tag::Constant;
    const bool cb = b.node_ && b.node_->tag == Node::Tag::Constant;
    if (ca && cb) {
      const double x = a.node_->value, y = b.node_->value;
      switch (op) {
        case Binary::Add: return constant(x + y);
        case Binary::Sub: return constant(x - y);
        case Binary::Mul: return constant(x * y);
        case Binary::Div:
          if (y != 0.0) return constant(x / y);
          break;
        case Binary::Pow: {
          const double p = std::pow(x, y);
          if (std::isfinite(p)) return constant(p);
          break;
        }
      }
    }
    switch (op) {
      case Binary::Add:
        if (is_const(a, 0.0)) return b;
        if (is_const(b, 0.0)) return a;
        break;
      case Binary::Sub:
        if (is_const(b, 0.0)) return a;
        if (is_const(a, 0.0)) return fold_unary(Unary::Neg, std::move(b));
        break;
      case Binary::Mul:
        if (is_const(a, 0.0) || is_const(b, 0.0)) return constant(0.0);
        if (is_const(a, 1.0)) return b;
        if (is_const(b, 1.0)) return a;
        break;
      case Binary::Div:
        if (is_const(a, 0.0)) return constant(0.0);
        if (is_const(b, 1.0)) return a;
        break;
      case Binary::Pow:
        if (is_const(b, 1.0)) return a;
        if (is_const(b, 0.0)) return constant(1.0);
        break;
    }
    return make_binary(op, std::move(a), std::move(b));
  }

  static double eval_node(const Node& n, double t, std::span<const double> u) {
    switch (n.tag) {
      case Node::Tag::Constant:
        return n.value;
      case Node::Tag::Variable:
        if (n.var == kVarT) return t;
        if (n.var - 1 < static_cast<int>(u.size())) return u[n.var - 1];
        throw eval_error("unbound variable u" + std::to_string(n.var - 1));
      case Node::Tag::UnaryOp: {
        const double a = eval_node(*n.a, t, u);
        switch (n.uop) {
          case Unary::Neg: return -a;
          case Unary::Ln:
            if (!(a > 0.0)) throw eval_error("ln of non-positive value");
            return std::log(a);
          case Unary::Exp: return std::exp(a);
          case Unary::Sin: return std::sin(a);
          case Unary::Cos: return std::cos(a);
          case Unary::Abs: return std::abs(a);
          case Unary::Sign: return a > 0 ? 1.0 : (a < 0 ? -1.0 : 0.0);
        }
        break;
      }
      case Node::Tag::BinaryOp: {
        const double a = eval_node(*n.a, t, u);
        const double b = eval_node(*n.b, t, u);
        switch (n.bop) {
          case Binary::Add: return a + b;
          case Binary::Sub: return a - b;
          case Binary::Mul: return a * b;
          case Binary::Div:
            if (b == 0.0) throw eval_error("division by zero");
            return a / b;
          case Binary::Pow: {
            if (a < 0.0 && b != std::floor(b))
              throw eval_error("fractional power of a negative base");
            return std::pow(a, b);
          }
        }
        break;
      }
    }
    throw eval_error("malformed expression node");
  }

  static Expr wrap(NodePtr n) { return Expr(std::move(n)); }

  static Expr diff_node(const NodePtr& node, int var) {
    const Node& n = *node;
    switch (n.tag) {
      case Node::Tag::Constant:
        return constant(0.0);
      case Node::Tag::Variable:
        return constant(n.var == var ? 1.0 : 0.0);
      case Node::Tag::UnaryOp: {
        Expr a = wrap(n.a);
        Expr da = diff_node(n.a, var);
        switch (n.uop) {
          case Unary::Neg:
            return fold_unary(Unary::Neg, da);
          case Unary::Ln:
            return fold_binary(Binary::Div, da, a);
          case Unary::Exp:
            return fold_binary(Binary::Mul, fold_unary(Unary::Exp, a), da);
          case Unary::Sin:
            return fold_binary(Binary::Mul, fold_unary(Unary::Cos, a), da);
          case Unary::Cos:
            return fold_unary(
                Unary::Neg,
                fold_binary(Binary::Mul, fold_unary(Unary::Sin, a), da));
          case Unary::Abs:
            // One-sided convention: d|x| = sign(x), sign(0) = 0.
            return fold_binary(Binary::Mul, fold_unary(Unary::Sign, a), da);
          case Unary::Sign:
            return constant(0.0);
        }
        break;
      }
      case Node::Tag::BinaryOp: {
        Expr a = wrap(n.a);
        Expr b = wrap(n.b);
        Expr da = diff_node(n.a, var);
        Expr db = diff_node(n.b, var);
        switch (n.bop) {
          case Binary::Add:
            return fold_binary(Binary::Add, da, db);
          case Binary::Sub:
            return fold_binary(Binary::Sub, da, db);
          case Binary::Mul:
            return fold_binary(Binary::Add, fold_binary(Binary::Mul, da, b),
                               fold_binary(Binary::Mul, a, db));
          case Binary::Div:
            return fold_binary(
                Binary::Div,
                fold_binary(Binary::Sub, fold_binary(Binary::Mul, da, b),
                            fold_binary(Binary::Mul, a, db)),
                fold_binary(Binary::Pow, b, constant(2.0)));
          case Binary::Pow: {
            if (n.b->tag == Node::Tag::Constant) {
              const double c = n.b->value;
              return fold_binary(
                  Binary::Mul,
                  fold_binary(Binary::Mul, constant(c),
                              fold_binary(Binary::Pow, a, constant(c - 1.0))),
                  da);
            }
            // General case via a^b = exp(b ln a); defined for a > 0.
            Expr term1 = fold_binary(Binary::Mul, db, fold_unary(Unary::Ln, a));
            Expr term2 = fold_binary(Binary::Div,
                                     fold_binary(Binary::Mul, b, da), a);
            return fold_binary(Binary::Mul, wrap(node),
                               fold_binary(Binary::Add, term1, term2));
          }
        }
        break;
      }
    }
    throw eval_error("malformed expression node");
  }

  static int max_slot(const Node& n) {
    switch (n.tag) {
      case Node::Tag::Constant: return -1;
      case Node::Tag::Variable: return n.var - 1;
      case Node::Tag::UnaryOp: return max_slot(*n.a);
      case Node::Tag::BinaryOp:
        return std::max(max_slot(*n.a), max_slot(*n.b));
    }
    return -1;
  }

  static bool node_depends(const Node& n, int var) {
    switch (n.tag) {
      case Node::Tag::Constant: return false;
      case Node::Tag::Variable: return n.var == var;
      case Node::Tag::UnaryOp: return node_depends(*n.a, var);
      case Node::Tag::BinaryOp:
        return node_depends(*n.a, var) || node_depends(*n.b, var);
    }
    return false;
  }

  static bool node_equal(const Node* x, const Node* y) {
    if (x == y) return true;
    if (!x || !y || x->tag != y->tag) return false;
    switch (x->tag) {
      case Node::Tag::Constant:
        return x->value == y->value;
      case Node::Tag::Variable:
        return x->var == y->var;
      case Node::Tag::UnaryOp:
        return x->uop == y->uop && node_equal(x->a.get(), y->a.get());
      case Node::Tag::BinaryOp:
        return x->bop == y->bop && node_equal(x->a.get(), y->a.get()) &&
               node_equal(x->b.get(), y->b.get());
    }
    return false;
  }

  // Precedence levels: add/sub 1, mul/div 2, unary minus 3, pow 4, atom 5.
  static int node_prec(const Node& n) {
    switch (n.tag) {
      case Node::Tag::Constant:
        return n.value < 0 ? 3 : 5;
      case Node::Tag::Variable:
        return 5;
      case Node::Tag::UnaryOp:
        return n.uop == Unary::Neg ? 3 : 5;
      case Node::Tag::BinaryOp:
        switch (n.bop) {
          case Binary::Add:
          case Binary::Sub: return 1;
          case Binary::Mul:
          case Binary::Div: return 2;
          case Binary::Pow: return 4;
        }
    }
    return 5;
  }

  static void print_child(const Node& child, int min_prec, std::string& out) {
    if (node_prec(child) < min_prec) {
      out += '(';
      print_node(child, 0, out);
      out += ')';
    } else {
      print_node(child, 0, out);
    }
  }

  static void print_node(const Node& n, int, std::string& out) {
    switch (n.tag) {
      case Node::Tag::Constant: {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", n.value);
        out += buf;
        return;
      }
      case Node::Tag::Variable:
        out += n.var == kVarT ? "t" : "u" + std::to_string(n.var - 1);
        return;
      case Node::Tag::UnaryOp:
        if (n.uop == Unary::Neg) {
          out += '-';
          print_child(*n.a, 3, out);
        } else {
          switch (n.uop) {
            case Unary::Ln: out += "ln"; break;
            case Unary::Exp: out += "exp"; break;
            case Unary::Sin: out += "sin"; break;
            case Unary::Cos: out += "cos"; break;
            case Unary::Abs: out += "abs"; break;
            case Unary::Sign: out += "sign"; break;
            case Unary::Neg: break;
          }
          out += '(';
          print_node(*n.a, 0, out);
          out += ')';
        }
        return;
      case Node::Tag::BinaryOp: {
        const char* op = nullptr;
        int lp = 0, rp = 0;
        switch (n.bop) {
          case Binary::Add: op = "+"; lp = 1; rp = 2; break;
          case Binary::Sub: op = "-"; lp = 1; rp = 2; break;
          case Binary::Mul: op = "*"; lp = 2; rp = 3; break;
          case Binary::Div: op = "/"; lp = 2; rp = 3; break;
          case Binary::Pow: op = "^"; lp = 5; rp = 3; break;
        }
        print_child(*n.a, lp, out);
        out += op;
        print_child(*n.b, rp, out);
        return;
      }
    }
  }

  static int parse_var_name(std::string_view name) {
    if (name == "t") return kVarT;
    if (name.size() >= 2 && name[0] == 'u') {
      int idx = 0;
      for (std::size_t i = 1; i < name.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(name[i])))
          throw std::invalid_argument("unknown variable name: " +
                                      std::string(name));
        idx = idx * 10 + (name[i] - '0');
      }
      return var_u(idx);
    }
    throw std::invalid_argument("unknown variable name: " + std::string(name));
  }

  class Parser {
  public:
    Parser(std::string_view source, int max_u) : src_(source), max_u_(max_u) {}

    Expr parse_expr() {
      Expr lhs = parse_term();
      for (;;) {
        skip_ws();
        if (peek() == '+') {
          ++pos_;
          lhs = fold_binary(Binary::Add, lhs, parse_term());
        } else if (peek() == '-') {
          ++pos_;
          lhs = fold_binary(Binary::Sub, lhs, parse_term());
        } else {
          return lhs;
        }
      }
    }

    void expect_end() {
      skip_ws();
      if (pos_ != src_.size())
        throw parse_error("unexpected trailing input", pos_);
    }

  private:
    Expr parse_term() {
      Expr lhs = parse_factor();
      for (;;) {
        skip_ws();
        if (peek() == '*') {
          ++pos_;
          lhs = fold_binary(Binary::Mul, lhs, parse_factor());
        } else if (peek() == '/') {
          ++pos_;
          lhs = fold_binary(Binary::Div, lhs, parse_factor());
        } else {
          return lhs;
        }
      }
    }

    // '^' binds tighter than unary minus: -u^2 is -(u^2).
    Expr parse_factor() {
      skip_ws();
      if (peek() == '-') {
        ++pos_;
        return fold_unary(Unary::Neg, parse_factor());
      }
      return parse_power();
    }

    Expr parse_power() {
      Expr base = parse_primary();
      skip_ws();
      if (peek() == '^') {
        ++pos_;
        return fold_binary(Binary::Pow, base, parse_factor());
      }
      return base;
    }

    Expr parse_primary() {
      skip_ws();
      const std::size_t at = pos_;
      const char c = peek();
      if (c == '(') {
        ++pos_;
        Expr inner = parse_expr();
        skip_ws();
        if (peek() != ')') throw parse_error("unbalanced parentheses", at);
        ++pos_;
        return inner;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
        return parse_number();
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
        return parse_identifier();
      throw parse_error("expected a value", pos_);
    }

    Expr parse_number() {
      const std::size_t at = pos_;
      const std::string text(src_.substr(pos_));
      char* end = nullptr;
      const double v = std::strtod(text.c_str(), &end);
      if (end == text.c_str()) throw parse_error("malformed number", at);
      pos_ += static_cast<std::size_t>(end - text.c_str());
      return constant(v);
    }

    Expr parse_identifier() {
      const std::size_t at = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
              src_[pos_] == '_'))
        ++pos_;
      const std::string_view name = src_.substr(at, pos_ - at);
      skip_ws();
      if (peek() == '(') {
        Unary op;
        if (name == "ln") op = Unary::Ln;
        else if (name == "exp") op = Unary::Exp;
        else if (name == "sin") op = Unary::Sin;
        else if (name == "cos") op = Unary::Cos;
        else if (name == "abs") op = Unary::Abs;
        else if (name == "sign") op = Unary::Sign;
        else throw parse_error("unknown function '" + std::string(name) + "'", at);
        ++pos_;
        Expr arg = parse_expr();
        skip_ws();
        if (peek() != ')') throw parse_error("unbalanced parentheses", at);
        ++pos_;
        return fold_unary(op, arg);
      }
      if (name == "t") return variable(kVarT);
      if (name.size() >= 2 && name[0] == 'u') {
        bool digits = true;
        int idx = 0;
        for (std::size_t i = 1; i < name.size(); ++i) {
          if (!std::isdigit(static_cast<unsigned char>(name[i]))) {
            digits = false;
            break;
          }
          idx = idx * 10 + (name[i] - '0');
        }
        if (digits) {
          if (max_u_ < 0)
            throw parse_error("state variable '" + std::string(name) +
                                  "' is not allowed in a function of t",
                              at);
          if (idx > max_u_)
            throw parse_error("state variable '" + std::string(name) +
                                  "' exceeds the problem order",
                              at);
          return variable(var_u(idx));
        }
      }
      throw parse_error("unknown identifier '" + std::string(name) + "'", at);
    }

    char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }
    void skip_ws() {
      while (pos_ < src_.size() &&
             std::isspace(static_cast<unsigned char>(src_[pos_])))
        ++pos_;
    }

    std::string_view src_;
    int max_u_;
    std::size_t pos_ = 0;
  };

  NodePtr node_;
};

}  // namespace tsvar
