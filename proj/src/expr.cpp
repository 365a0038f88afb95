#include "mvlab/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <numbers>
#include <optional>

#include "mvlab/error.hpp"
#include "mvlab/measure.hpp"
#include "mvlab/poly.hpp"

namespace mvlab {

struct Expr::Node {
  ExprKind kind = ExprKind::kConstant;
  double value = 0.0;
  int index = 0;
  char letter = 'x';
  int k = 0;
  double period = 0.0;
  int exponent = 0;
  std::vector<int> alpha;
  std::shared_ptr<const Node> a, b;
};

struct ExprAccess {
  static Expr make(std::shared_ptr<const Expr::Node> n) { return Expr(std::move(n)); }
  static const Expr::Node& node(const Expr& e) { return *e.node_; }
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

int precedence(const Expr::Node& n) {
  switch (n.kind) {
    case ExprKind::kAdd:
    case ExprKind::kSub:
      return 1;
    case ExprKind::kMul:
      return 2;
    case ExprKind::kNeg:
      return 3;
    case ExprKind::kPow:
      return 4;
    case ExprKind::kConstant:
      return n.value < 0.0 || std::signbit(n.value) ? 3 : 5;
    default:
      return 5;
  }
}

void print(const Expr::Node& n, std::string& out);

void print_child(const Expr::Node& child, int min_prec, std::string& out) {
  if (precedence(child) < min_prec) {
    out += '(';
    print(child, out);
    out += ')';
  } else {
    print(child, out);
  }
}

std::string time_atom_string(const Expr::Node& n) {
  std::string s = n.kind == ExprKind::kSin ? "sin(" : "cos(";
  if (n.k != 1) s += std::to_string(n.k) + "*";
  s += "w*t)";
  return s;
}

std::string observable_string(const std::vector<int>& alpha) {
  std::string s = "M[";
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(alpha[i]);
  }
  return s + "]";
}

void print(const Expr::Node& n, std::string& out) {
  switch (n.kind) {
    case ExprKind::kConstant:
      out += format_double(n.value);
      return;
    case ExprKind::kCoordinate:
      out += n.letter;
      out += std::to_string(n.index + 1);
      return;
    case ExprKind::kSin:
    case ExprKind::kCos:
      out += time_atom_string(n);
      return;
    case ExprKind::kObservable:
      out += observable_string(n.alpha);
      return;
    case ExprKind::kAdd:
    case ExprKind::kSub:
      print_child(*n.a, 1, out);
      out += n.kind == ExprKind::kAdd ? " + " : " - ";
      print_child(*n.b, 2, out);
      return;
    case ExprKind::kMul:
      print_child(*n.a, 2, out);
      out += " * ";
      print_child(*n.b, 3, out);
      return;
    case ExprKind::kNeg:
      out += '-';
      print_child(*n.a, 3, out);
      return;
    case ExprKind::kPow:
      print_child(*n.a, 5, out);
      out += '^';
      out += std::to_string(n.exponent);
      return;
  }
}

bool equal(const Expr::Node& x, const Expr::Node& y) {
  if (x.kind != y.kind) return false;
  switch (x.kind) {
    case ExprKind::kConstant:
      return x.value == y.value;
    case ExprKind::kCoordinate:
      return x.index == y.index;
    case ExprKind::kSin:
    case ExprKind::kCos:
      return x.k == y.k && x.period == y.period;
    case ExprKind::kObservable:
      return x.alpha == y.alpha;
    case ExprKind::kNeg:
      return equal(*x.a, *y.a);
    case ExprKind::kPow:
      return x.exponent == y.exponent && equal(*x.a, *y.a);
    default:
      return equal(*x.a, *y.a) && equal(*x.b, *y.b);
  }
}

template <class F>
void visit(const Expr::Node& n, F&& f) {
  f(n);
  if (n.a) visit(*n.a, f);
  if (n.b) visit(*n.b, f);
}

}  // namespace

Expr::Expr() : Expr(constant(0.0)) {}

Expr Expr::constant(double v) {
  if (!std::isfinite(v)) throw ConfigError("expression constants must be finite");
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::kConstant;
  n->value = v;
  return Expr(std::move(n));
}

Expr Expr::coordinate(int index, char letter) {
  if (index < 0 || index >= kMaxDim) throw ConfigError("coordinate index out of range (d <= 3)");
  if (letter != 'x' && letter != 'y') throw ConfigError("coordinate letter must be x or y");
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::kCoordinate;
  n->index = index;
  n->letter = letter;
  return Expr(std::move(n));
}

Expr Expr::time_sin(int k, double period) {
  if (!(period > 0.0) || !std::isfinite(period)) throw ConfigError("time atom period must be positive");
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::kSin;
  n->k = k;
  n->period = period;
  return Expr(std::move(n));
}

Expr Expr::time_cos(int k, double period) {
  Expr e = time_sin(k, period);
  auto n = std::make_shared<Node>(*e.node_);
  n->kind = ExprKind::kCos;
  return Expr(std::move(n));
}

Expr Expr::observable(std::vector<int> alpha) {
  if (alpha.empty() || alpha.size() > static_cast<std::size_t>(kMaxDim))
    throw ConfigError("observable multi-index must have 1..3 entries");
  int order = 0;
  for (int a : alpha) {
    if (a < 0) throw ConfigError("observable multi-index entries must be nonnegative");
    order += a;
  }
  if (order > kMaxObservableOrder) throw ConfigError("observable order exceeds 4");
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::kObservable;
  n->alpha = std::move(alpha);
  return Expr(std::move(n));
}

namespace {
Expr binary(ExprKind kind, NodePtr a, NodePtr b);
}

Expr operator+(const Expr& a, const Expr& b) { return binary(ExprKind::kAdd, a.node_, b.node_); }
Expr operator-(const Expr& a, const Expr& b) { return binary(ExprKind::kSub, a.node_, b.node_); }
Expr operator*(const Expr& a, const Expr& b) { return binary(ExprKind::kMul, a.node_, b.node_); }

Expr operator-(const Expr& a) {
  if (a.kind() == ExprKind::kConstant) return Expr::constant(-a.value());
  auto n = std::make_shared<Expr::Node>();
  n->kind = ExprKind::kNeg;
  n->a = a.node_;
  return Expr(std::move(n));
}

Expr pow(const Expr& base, int exponent) {
  if (exponent < 0 || exponent > kMaxPower) throw ConfigError("integer powers must lie in 0..6");
  auto n = std::make_shared<Expr::Node>();
  n->kind = ExprKind::kPow;
  n->exponent = exponent;
  n->a = base.node_;
  return Expr(std::move(n));
}

namespace {
Expr binary(ExprKind kind, NodePtr a, NodePtr b) {
  auto n = std::make_shared<Expr::Node>();
  n->kind = kind;
  n->a = std::move(a);
  n->b = std::move(b);
  return ExprAccess::make(std::move(n));
}
}  // namespace

ExprKind Expr::kind() const noexcept { return node_->kind; }
double Expr::value() const noexcept { return node_->value; }
int Expr::index() const noexcept { return node_->index; }
char Expr::letter() const noexcept { return node_->letter; }
int Expr::frequency() const noexcept { return node_->k; }
double Expr::period() const noexcept { return node_->period; }
const std::vector<int>& Expr::alpha() const noexcept { return node_->alpha; }
int Expr::exponent() const noexcept { return node_->exponent; }
Expr Expr::lhs() const { return Expr(node_->a); }
Expr Expr::rhs() const { return Expr(node_->b); }

std::string Expr::to_string() const {
  std::string out;
  print(*node_, out);
  return out;
}

bool Expr::structurally_equal(const Expr& other) const { return equal(*node_, *other.node_); }

int Expr::degree() const {
  const Node& n = *node_;
  switch (n.kind) {
    case ExprKind::kCoordinate:
      return 1;
    case ExprKind::kAdd:
    case ExprKind::kSub:
      return std::max(lhs().degree(), rhs().degree());
    case ExprKind::kMul:
      return lhs().degree() + rhs().degree();
    case ExprKind::kNeg:
      return lhs().degree();
    case ExprKind::kPow:
      return n.exponent * lhs().degree();
    default:
      return 0;
  }
}

int Expr::max_coordinate() const {
  int m = -1;
  visit(*node_, [&](const Node& n) {
    if (n.kind == ExprKind::kCoordinate) m = std::max(m, n.index);
  });
  return m;
}

bool Expr::has_observables() const { return !observables().empty(); }

bool Expr::has_time() const { return !time_periods().empty(); }

std::vector<std::vector<int>> Expr::observables() const {
  std::vector<std::vector<int>> out;
  visit(*node_, [&](const Node& n) {
    if (n.kind == ExprKind::kObservable && std::find(out.begin(), out.end(), n.alpha) == out.end())
      out.push_back(n.alpha);
  });
  return out;
}

std::vector<double> Expr::time_periods() const {
  std::vector<double> out;
  visit(*node_, [&](const Node& n) {
    if ((n.kind == ExprKind::kSin || n.kind == ExprKind::kCos) &&
        std::find(out.begin(), out.end(), n.period) == out.end())
      out.push_back(n.period);
  });
  return out;
}

// ---------------------------------------------------------------------------
// parser

class ExprParser {
 public:
  ExprParser(std::string_view text, double period) : text_(text), period_(period) {
    if (!(period > 0.0) || !std::isfinite(period)) throw ParseError("expression period must be positive");
  }

  Expr parse() {
    Parsed p = parse_sum();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return to_expr(p);
  }

 private:
  // `t` is only legal inside a trig argument, so the parser carries a
  // linear-in-t form alongside the tree.
  struct Parsed {
    std::optional<Expr> expr;       // set when free of bare t
    std::optional<double> t_coef;   // set when the value is c*t
  };

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("expression '" + std::string(text_) + "' at offset " + std::to_string(pos_) + ": " + msg);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  Expr to_expr(const Parsed& p) const {
    if (!p.expr) throw ParseError("expression '" + std::string(text_) + "': bare t is only allowed inside sin/cos");
    return *p.expr;
  }

  static std::optional<double> constant_value(const Expr& e) {
    switch (e.kind()) {
      case ExprKind::kConstant:
        return e.value();
      case ExprKind::kNeg: {
        auto v = constant_value(e.lhs());
        return v ? std::optional<double>(-*v) : std::nullopt;
      }
      case ExprKind::kAdd:
      case ExprKind::kSub:
      case ExprKind::kMul: {
        auto a = constant_value(e.lhs());
        auto b = constant_value(e.rhs());
        if (!a || !b) return std::nullopt;
        if (e.kind() == ExprKind::kAdd) return *a + *b;
        if (e.kind() == ExprKind::kSub) return *a - *b;
        return *a * *b;
      }
      case ExprKind::kPow: {
        auto a = constant_value(e.lhs());
        if (!a) return std::nullopt;
        double r = 1.0;
        for (int i = 0; i < e.exponent(); ++i) r *= *a;
        return r;
      }
      default:
        return std::nullopt;
    }
  }

  Parsed parse_sum() {
    Parsed left = parse_product();
    for (;;) {
      const std::size_t at = pos_;
      if (accept('+')) {
        Parsed right = parse_product();
        left = combine_additive(left, right, false, at);
      } else if (accept('-')) {
        Parsed right = parse_product();
        left = combine_additive(left, right, true, at);
      } else {
        return left;
      }
    }
  }

  Parsed combine_additive(const Parsed& l, const Parsed& r, bool subtract, std::size_t at) {
    if (l.expr && r.expr) return {subtract ? *l.expr - *r.expr : *l.expr + *r.expr, std::nullopt};
    if (l.t_coef && r.t_coef) return {std::nullopt, subtract ? *l.t_coef - *r.t_coef : *l.t_coef + *r.t_coef};
    pos_ = at;
    fail("time arguments must be of the form c*t (no phase offsets)");
  }

  Parsed parse_product() {
    Parsed left = parse_unary();
    for (;;) {
      const std::size_t at = pos_;
      if (accept('*')) {
        Parsed right = parse_unary();
        if (left.expr && right.expr) {
          left = {*left.expr * *right.expr, std::nullopt};
        } else {
          const Parsed& lin = left.t_coef ? left : right;
          const Parsed& other = left.t_coef ? right : left;
          auto c = other.expr ? constant_value(*other.expr) : std::nullopt;
          if (!c) {
            pos_ = at;
            fail("t may only be scaled by constants");
          }
          left = {std::nullopt, *lin.t_coef * *c};
        }
      } else if (accept('/')) {
        Parsed right = parse_unary();
        auto c = right.expr ? constant_value(*right.expr) : std::nullopt;
        if (!c) {
          pos_ = at;
          fail("division is only allowed by constants");
        }
        if (*c == 0.0) {
          pos_ = at;
          fail("division by zero");
        }
        if (left.t_coef) {
          left = {std::nullopt, *left.t_coef / *c};
        } else if (auto lc = constant_value(*left.expr)) {
          left = {Expr::constant(*lc / *c), std::nullopt};
        } else {
          left = {*left.expr * Expr::constant(1.0 / *c), std::nullopt};
        }
      } else {
        return left;
      }
    }
  }

  Parsed parse_unary() {
    if (accept('-')) {
      Parsed p = parse_unary();
      if (p.t_coef) return {std::nullopt, -*p.t_coef};
      return {-*p.expr, std::nullopt};
    }
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  Parsed parse_power() {
    Parsed base = parse_primary();
    if (accept('^')) {
      const bool paren = accept('(');
      skip_ws();
      const int n = parse_int();
      if (paren) expect(')');
      if (n < 0 || n > kMaxPower) fail("integer powers must lie in 0..6");
      if (!base.expr) fail("t cannot be raised to a power");
      return {pow(*base.expr, n), std::nullopt};
    }
    return base;
  }

  int parse_int() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) fail("expected an integer");
    int v = 0;
    std::from_chars(text_.data() + start, text_.data() + pos_, v);
    return v;
  }

  Parsed parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Parsed inner = parse_sum();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return {Expr::constant(parse_number()), std::nullopt};
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_identifier();
    fail(std::string("unexpected '") + c + "'");
  }

  double parse_number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
      if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
        pos_ = p;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    double v = 0.0;
    auto res = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != text_.data() + pos_) {
      pos_ = start;
      fail("malformed number");
    }
    return v;
  }

  Parsed parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::string_view id = text_.substr(start, pos_ - start);
    if (id == "t") return {std::nullopt, 1.0};
    if (id == "w") return {Expr::constant(2.0 * std::numbers::pi / period_), std::nullopt};
    if (id == "pi") return {Expr::constant(std::numbers::pi), std::nullopt};
    if (id.size() == 2 && (id[0] == 'x' || id[0] == 'y') && id[1] >= '1' && id[1] <= '3')
      return {Expr::coordinate(id[1] - '1', id[0]), std::nullopt};
    if (id == "M") return {parse_observable(), std::nullopt};
    if (id == "sin" || id == "cos") return {parse_trig(id == "sin"), std::nullopt};
    if (id == "sqrt") {
      expect('(');
      Parsed arg = parse_sum();
      expect(')');
      auto v = arg.expr ? constant_value(*arg.expr) : std::nullopt;
      if (!v || *v < 0.0) fail("sqrt takes a nonnegative constant argument");
      return {Expr::constant(std::sqrt(*v)), std::nullopt};
    }
    pos_ = start;
    fail("unknown identifier '" + std::string(id) + "'");
  }

  Expr parse_observable() {
    expect('[');
    std::vector<int> alpha;
    do {
      alpha.push_back(parse_int());
    } while (accept(','));
    expect(']');
    try {
      return Expr::observable(std::move(alpha));
    } catch (const ConfigError& e) {
      fail(e.what());
    }
  }

  Expr parse_trig(bool is_sin) {
    expect('(');
    const std::size_t at = pos_;
    Parsed arg = parse_sum();
    expect(')');
    if (!arg.t_coef) {
      pos_ = at;
      fail("sin/cos argument must be c*t");
    }
    const double k_real = *arg.t_coef * period_ / (2.0 * std::numbers::pi);
    const double k_round = std::round(k_real);
    if (std::abs(k_real - k_round) > 1e-9 * std::max(1.0, std::abs(k_real))) {
      pos_ = at;
      fail("time atom frequency is not an integer multiple of 2pi/T");
    }
    const int k = static_cast<int>(k_round);
    return is_sin ? Expr::time_sin(k, period_) : Expr::time_cos(k, period_);
  }

  std::string_view text_;
  double period_;
  std::size_t pos_ = 0;
};

Expr parse_expr(std::string_view text, double period) { return ExprParser(text, period).parse(); }

// ---------------------------------------------------------------------------
// evaluation

namespace {

double checked(double v, const Expr::Node& n) {
  if (!std::isfinite(v)) {
    std::string s;
    print(n, s);
    throw EvalError(s, v);
  }
  return v;
}

double eval_node(const Expr::Node& n, double t, std::span<const double> x, const ParticleCloud& mu) {
  switch (n.kind) {
    case ExprKind::kConstant:
      return n.value;
    case ExprKind::kCoordinate:
      if (n.index >= static_cast<int>(x.size()))
        throw DimensionError("coordinate " + std::string(1, n.letter) + std::to_string(n.index + 1) +
                             " exceeds dimension " + std::to_string(x.size()));
      return checked(x[n.index], n);
    case ExprKind::kSin:
    case ExprKind::kCos: {
      return checked(time_atom_value(n.kind == ExprKind::kSin, n.k, n.period, t), n);
    }
    case ExprKind::kObservable:
      if (n.alpha.size() != static_cast<std::size_t>(mu.dim()))
        throw DimensionError("observable " + observable_string(n.alpha) + " does not match d=" +
                             std::to_string(mu.dim()));
      return checked(moment(mu, n.alpha), n);
    case ExprKind::kAdd:
      return eval_node(*n.a, t, x, mu) + eval_node(*n.b, t, x, mu);
    case ExprKind::kSub:
      return eval_node(*n.a, t, x, mu) - eval_node(*n.b, t, x, mu);
    case ExprKind::kMul:
      return eval_node(*n.a, t, x, mu) * eval_node(*n.b, t, x, mu);
    case ExprKind::kNeg:
      return -eval_node(*n.a, t, x, mu);
    case ExprKind::kPow: {
      const double b = eval_node(*n.a, t, x, mu);
      double r = 1.0;
      for (int i = 0; i < n.exponent; ++i) r *= b;
      return r;
    }
  }
  return 0.0;
}

}  // namespace

double eval_expr(const Expr& e, double t, std::span<const double> x, const ParticleCloud& mu) {
  if (x.size() != static_cast<std::size_t>(mu.dim()))
    throw DimensionError("point dimension " + std::to_string(x.size()) + " does not match cloud dimension " +
                         std::to_string(mu.dim()));
  return eval_node(ExprAccess::node(e), t, x, mu);
}

}  // namespace mvlab
