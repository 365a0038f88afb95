#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mvlab {

class ParticleCloud;

enum class ExprKind {
  kConstant,
  kCoordinate,  // x_i (or y_i in Lyapunov integrands)
  kSin,         // sin(k * 2pi/T * t)
  kCos,
  kObservable,  // M[alpha] = int y^alpha mu(dy)
  kAdd,
  kSub,
  kMul,
  kNeg,
  kPow,
};

inline constexpr int kMaxDim = 3;
inline constexpr int kMaxPower = 6;
inline constexpr int kMaxObservableOrder = 4;
inline constexpr int kMaxPolyDegree = 6;

/// Immutable expression tree over time atoms, coordinates and moment
/// observables. Copies share structure.
class Expr {
 public:
  struct Node;

  Expr();  // the constant 0

  static Expr constant(double v);
  /// Zero-based coordinate index; `letter` only affects printing.
  static Expr coordinate(int index, char letter = 'x');
  /// sin(k w t) / cos(k w t) with w = 2pi/period.
  static Expr time_sin(int k, double period);
  static Expr time_cos(int k, double period);
  static Expr observable(std::vector<int> alpha);

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a);
  friend Expr pow(const Expr& base, int exponent);

  ExprKind kind() const noexcept;
  double value() const noexcept;  // constant value
  int index() const noexcept;     // coordinate index
  char letter() const noexcept;
  int frequency() const noexcept;  // k of a time atom
  double period() const noexcept;  // T of a time atom
  const std::vector<int>& alpha() const noexcept;
  int exponent() const noexcept;
  Expr lhs() const;  // first operand (also the Neg/Pow operand)
  Expr rhs() const;

  std::string to_string() const;
  bool structurally_equal(const Expr& other) const;

  /// Polynomial degree in the coordinates.
  int degree() const;
  /// Largest coordinate index used, or -1.
  int max_coordinate() const;
  bool has_observables() const;
  bool has_time() const;
  std::vector<std::vector<int>> observables() const;
  std::vector<double> time_periods() const;

 private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
  friend class ExprParser;
  friend struct ExprAccess;
};

/// Parses the infix grammar:
///   numbers, `pi`, `w` (= 2pi/T), `x1..x3`, `y1..y3`, `M[a1,..,ad]`,
///   `sin(c*t)`, `cos(c*t)` with c*T/(2pi) an integer, `sqrt(const)`,
///   `+ - * /` (division by constants only), `^n` with 0 <= n <= 6.
/// `period` is the model period T used to normalise time atoms.
Expr parse_expr(std::string_view text, double period);

/// Evaluates with every observable replaced by the weighted moment of `mu`.
/// Throws DimensionError on shape mismatch and EvalError on non-finite atoms.
double eval_expr(const Expr& e, double t, std::span<const double> x, const ParticleCloud& mu);

}  // namespace mvlab
