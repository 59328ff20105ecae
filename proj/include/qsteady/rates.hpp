#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qsteady/errors.hpp"

namespace qsteady {

// Parse error with the offending position in the source text.
struct ParseError : InputError {
  ParseError(const std::string& what, size_t position)
      : InputError(what), position(position) {}
  size_t position;
};

namespace expr {

// Expression AST over the time variable t.
// Grammar: numbers, t, + - * /, unary -, parentheses,
// functions sin cos exp tanh pow (pow takes two arguments).
struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  enum class Kind { Number, Time, Neg, Add, Sub, Mul, Div, Call };
  Kind kind;
  double value = 0.0;          // Number
  std::string func;            // Call
  std::vector<NodePtr> args;   // children

  static NodePtr number(double v);
  static NodePtr time();
  static NodePtr unary_minus(NodePtr a);
  static NodePtr binary(Kind k, NodePtr a, NodePtr b);
  static NodePtr call(std::string name, std::vector<NodePtr> args);
};

NodePtr parse(const std::string& text);
std::string print(const NodePtr& node);
double eval(const NodePtr& node, double t);
bool equal(const NodePtr& a, const NodePtr& b);

}  // namespace expr

// Adaptive Simpson quadrature of f over [a, b], absolute tolerance abs_tol.
// Throws VerificationError when the refinement does not converge.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double abs_tol = 1e-10);

// ---------------------------------------------------------------------------

// A scalar rate f(t). Three kinds: a constant, a parsed expression, or a
// named preset form with numeric parameters. Presets and constants carry
// closed-form antiderivatives; plain expressions integrate by quadrature.
class RateFunction {
 public:
  enum class Kind { Constant, Expression, Preset };

  static RateFunction constant(double value);
  static RateFunction expression(const std::string& text);
  // Known presets:
  //   "exp-decay"  (amplitude, decay)            a * exp(-decay * t)
  //   "sine-offset"(offset, amplitude, frequency) offset + a * sin(w t)
  static RateFunction preset(const std::string& name, const std::map<std::string, double>& params);

  // c * r, folding into the constant value or preset amplitude when possible.
  static RateFunction scaled(double c, const RateFunction& r);
  // c1*r1 + c2*r2; keeps the closed-form antiderivative when both sides
  // declare one, and simplifies structurally equal cancellations to zero.
  static RateFunction scaled_sum(double c1, const RateFunction& r1, double c2,
                                 const RateFunction& r2);

  Kind kind() const { return kind_; }
  double eval(double t) const;

  // Integral of the rate over [0, t].
  double integral(double t) const;
  bool has_closed_form_integral() const { return antiderivative_ != nullptr || kind_ == Kind::Constant; }

  // Slope of the integral for large t, when provably linear-plus-bounded;
  // nullopt when the asymptotic behaviour is not certified.
  std::optional<double> linear_growth() const { return linear_growth_; }

  // True only for the syntactic constant zero.
  bool is_zero() const { return kind_ == Kind::Constant && value_ == 0.0; }

  double constant_value() const { return value_; }
  const std::string& text() const { return text_; }
  const std::string& preset_name() const { return preset_name_; }
  const std::map<std::string, double>& preset_params() const { return preset_params_; }

  // Human-readable descriptor, stable across save/load.
  std::string describe() const;

 private:
  RateFunction() = default;

  Kind kind_ = Kind::Constant;
  double value_ = 0.0;                  // Constant
  std::string text_;                    // Expression source (printed form)
  expr::NodePtr ast_;                   // Expression / materialized preset formula
  expr::NodePtr antiderivative_;        // closed form when declared
  std::string preset_name_;
  std::map<std::string, double> preset_params_;
  std::optional<double> linear_growth_;
};

}  // namespace qsteady
