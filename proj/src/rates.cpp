#include "qsteady/rates.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace qsteady {

namespace expr {

NodePtr Node::number(double v) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Number;
  n->value = v;
  return n;
}

NodePtr Node::time() {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Time;
  return n;
}

NodePtr Node::unary_minus(NodePtr a) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Neg;
  n->args = {std::move(a)};
  return n;
}

NodePtr Node::binary(Kind k, NodePtr a, NodePtr b) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->args = {std::move(a), std::move(b)};
  return n;
}

NodePtr Node::call(std::string name, std::vector<NodePtr> args) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Call;
  n->func = std::move(name);
  n->args = std::move(args);
  return n;
}

namespace {

struct Token {
  enum class Type { Number, Ident, Plus, Minus, Star, Slash, LParen, RParen, Comma, End };
  Type type;
  double number = 0.0;
  std::string ident;
  size_t pos = 0;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) {}

  Token next() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    Token tok;
    tok.pos = pos_;
    if (pos_ >= text_.size()) {
      tok.type = Token::Type::End;
      return tok;
    }
    const char c = text_[pos_];
    switch (c) {
      case '+': ++pos_; tok.type = Token::Type::Plus; return tok;
      case '-': ++pos_; tok.type = Token::Type::Minus; return tok;
      case '*': ++pos_; tok.type = Token::Type::Star; return tok;
      case '/': ++pos_; tok.type = Token::Type::Slash; return tok;
      case '(': ++pos_; tok.type = Token::Type::LParen; return tok;
      case ')': ++pos_; tok.type = Token::Type::RParen; return tok;
      case ',': ++pos_; tok.type = Token::Type::Comma; return tok;
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      size_t used = 0;
      try {
        tok.number = std::stod(text_.substr(pos_), &used);
      } catch (const std::exception&) {
        throw ParseError("invalid number at position " + std::to_string(pos_), pos_);
      }
      pos_ += used;
      tok.type = Token::Type::Number;
      return tok;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      tok.type = Token::Type::Ident;
      tok.ident = text_.substr(start, pos_ - start);
      return tok;
    }
    throw ParseError(std::string("unexpected character '") + c + "' at position " +
                         std::to_string(pos_),
                     pos_);
  }

 private:
  const std::string& text_;
  size_t pos_ = 0;
};

int function_arity(const std::string& name) {
  if (name == "sin" || name == "cos" || name == "exp" || name == "tanh") return 1;
  if (name == "pow") return 2;
  return -1;
}

class Parser {
 public:
  explicit Parser(const std::string& text) : lexer_(text) { advance(); }

  NodePtr parse_all() {
    NodePtr e = parse_expr();
    expect(Token::Type::End, "end of input");
    return e;
  }

 private:
  void advance() { current_ = lexer_.next(); }

  [[noreturn]] void fail(const std::string& expected) {
    std::ostringstream msg;
    msg << "syntax error at position " << current_.pos << ": expected " << expected;
    if (current_.type == Token::Type::End)
      msg << ", got end of input";
    throw ParseError(msg.str(), current_.pos);
  }

  void expect(Token::Type type, const std::string& what) {
    if (current_.type != type) fail(what);
    advance();
  }

  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    while (current_.type == Token::Type::Plus || current_.type == Token::Type::Minus) {
      const auto op = current_.type == Token::Type::Plus ? Node::Kind::Add : Node::Kind::Sub;
      advance();
      lhs = Node::binary(op, lhs, parse_term());
    }
    return lhs;
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_unary();
    while (current_.type == Token::Type::Star || current_.type == Token::Type::Slash) {
      const auto op = current_.type == Token::Type::Star ? Node::Kind::Mul : Node::Kind::Div;
      advance();
      lhs = Node::binary(op, lhs, parse_unary());
    }
    return lhs;
  }

  NodePtr parse_unary() {
    if (current_.type == Token::Type::Minus) {
      advance();
      return Node::unary_minus(parse_unary());
    }
    return parse_primary();
  }

  NodePtr parse_primary() {
    switch (current_.type) {
      case Token::Type::Number: {
        const double v = current_.number;
        advance();
        return Node::number(v);
      }
      case Token::Type::LParen: {
        advance();
        NodePtr e = parse_expr();
        expect(Token::Type::RParen, "')'");
        return e;
      }
      case Token::Type::Ident: {
        const std::string name = current_.ident;
        const size_t name_pos = current_.pos;
        advance();
        if (name == "t") return Node::time();
        const int arity = function_arity(name);
        if (arity < 0)
          throw ParseError("unknown identifier '" + name + "' at position " +
                               std::to_string(name_pos),
                           name_pos);
        expect(Token::Type::LParen, "'(' after function name");
        std::vector<NodePtr> args;
        args.push_back(parse_expr());
        while (current_.type == Token::Type::Comma) {
          advance();
          args.push_back(parse_expr());
        }
        expect(Token::Type::RParen, "')'");
        if (static_cast<int>(args.size()) != arity) {
          std::ostringstream msg;
          msg << "function '" << name << "' takes " << arity << " argument"
              << (arity == 1 ? "" : "s") << ", got " << args.size() << " at position " << name_pos;
          throw ParseError(msg.str(), name_pos);
        }
        return Node::call(name, std::move(args));
      }
      default:
        fail("a number, 't', a function call, or '('");
    }
  }

  Lexer lexer_;
  Token current_;
};

// Shortest decimal form that round-trips to the same double.
std::string format_double(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::stod(buf) == v) break;
  }
  return buf;
}

}  // namespace

NodePtr parse(const std::string& text) { return Parser(text).parse_all(); }

std::string print(const NodePtr& node) {
  switch (node->kind) {
    case Node::Kind::Number: return format_double(node->value);
    case Node::Kind::Time: return "t";
    case Node::Kind::Neg: return "(-" + print(node->args[0]) + ")";
    case Node::Kind::Add: return "(" + print(node->args[0]) + "+" + print(node->args[1]) + ")";
    case Node::Kind::Sub: return "(" + print(node->args[0]) + "-" + print(node->args[1]) + ")";
    case Node::Kind::Mul: return "(" + print(node->args[0]) + "*" + print(node->args[1]) + ")";
    case Node::Kind::Div: return "(" + print(node->args[0]) + "/" + print(node->args[1]) + ")";
    case Node::Kind::Call: {
      std::string out = node->func + "(";
      for (size_t i = 0; i < node->args.size(); ++i) {
        if (i) out += ",";
        out += print(node->args[i]);
      }
      return out + ")";
    }
  }
  return {};
}

double eval(const NodePtr& node, double t) {
  switch (node->kind) {
    case Node::Kind::Number: return node->value;
    case Node::Kind::Time: return t;
    case Node::Kind::Neg: return -eval(node->args[0], t);
    case Node::Kind::Add: return eval(node->args[0], t) + eval(node->args[1], t);
    case Node::Kind::Sub: return eval(node->args[0], t) - eval(node->args[1], t);
    case Node::Kind::Mul: return eval(node->args[0], t) * eval(node->args[1], t);
    case Node::Kind::Div: return eval(node->args[0], t) / eval(node->args[1], t);
    case Node::Kind::Call: {
      if (node->func == "sin") return std::sin(eval(node->args[0], t));
      if (node->func == "cos") return std::cos(eval(node->args[0], t));
      if (node->func == "exp") return std::exp(eval(node->args[0], t));
      if (node->func == "tanh") return std::tanh(eval(node->args[0], t));
      if (node->func == "pow") return std::pow(eval(node->args[0], t), eval(node->args[1], t));
      throw InputError("eval: unknown function '" + node->func + "'");
    }
  }
  return 0.0;
}

bool equal(const NodePtr& a, const NodePtr& b) {
  if (a->kind != b->kind) return false;
  if (a->kind == Node::Kind::Number) return a->value == b->value;
  if (a->kind == Node::Kind::Call && a->func != b->func) return false;
  if (a->args.size() != b->args.size()) return false;
  for (size_t i = 0; i < a->args.size(); ++i)
    if (!equal(a->args[i], b->args[i])) return false;
  return true;
}

}  // namespace expr

// ---------------------------------------------------------------------------

namespace {

double simpson(double a, double fa, double b, double fb, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double integrate_rec(const std::function<double(double)>& f, double a, double fa, double b,
                     double fb, double m, double fm, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(a, fa, m, fm, flm);
  const double right = simpson(m, fm, b, fb, frm);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  if (depth <= 0)
    throw VerificationError("integrate_adaptive: quadrature did not converge on [" +
                            std::to_string(a) + ", " + std::to_string(b) + "]");
  return integrate_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         integrate_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace

double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double abs_tol) {
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b), m = 0.5 * (a + b), fm = f(m);
  const double whole = simpson(a, fa, b, fb, fm);
  return integrate_rec(f, a, fa, b, fb, m, fm, whole, abs_tol, 48);
}

// ---------------------------------------------------------------------------

namespace {

using expr::Node;
using expr::NodePtr;

NodePtr scale_node(double c, const NodePtr& n) {
  if (c == 1.0) return n;
  if (c == -1.0) return Node::unary_minus(n);
  return Node::binary(Node::Kind::Mul, Node::number(c), n);
}

void check_params(const std::string& name, const std::map<std::string, double>& params,
                  const std::vector<std::string>& required) {
  for (const auto& key : required)
    if (!params.count(key))
      throw InputError("rate preset '" + name + "': missing parameter '" + key + "'");
  for (const auto& [key, _] : params) {
    bool known = false;
    for (const auto& r : required) known = known || r == key;
    if (!known) throw InputError("rate preset '" + name + "': unknown parameter '" + key + "'");
  }
}

}  // namespace

RateFunction RateFunction::constant(double value) {
  if (!std::isfinite(value)) throw InputError("RateFunction: constant must be finite");
  RateFunction r;
  r.kind_ = Kind::Constant;
  r.value_ = value;
  r.linear_growth_ = value;
  return r;
}

RateFunction RateFunction::expression(const std::string& text) {
  RateFunction r;
  r.kind_ = Kind::Expression;
  r.ast_ = expr::parse(text);
  // A bare numeric literal is a constant in expression clothing.
  if (r.ast_->kind == Node::Kind::Number) return constant(r.ast_->value);
  r.text_ = text;
  return r;
}

RateFunction RateFunction::preset(const std::string& name,
                                  const std::map<std::string, double>& params) {
  RateFunction r;
  r.kind_ = Kind::Preset;
  r.preset_name_ = name;
  r.preset_params_ = params;
  const NodePtr t = Node::time();
  if (name == "exp-decay") {
    check_params(name, params, {"amplitude", "decay"});
    const double a = params.at("amplitude"), b = params.at("decay");
    if (b == 0.0) return constant(a);
    // a * exp(-b t); integral a/b * (1 - exp(-b t))
    r.ast_ = scale_node(a, Node::call("exp", {Node::unary_minus(scale_node(b, t))}));
    r.antiderivative_ = scale_node(
        a / b, Node::binary(Node::Kind::Sub, Node::number(1.0),
                            Node::call("exp", {Node::unary_minus(scale_node(b, t))})));
    if (b > 0.0) r.linear_growth_ = 0.0;  // integral bounded by a/b
  } else if (name == "sine-offset") {
    check_params(name, params, {"offset", "amplitude", "frequency"});
    const double a = params.at("offset"), b = params.at("amplitude"), w = params.at("frequency");
    if (w == 0.0 || b == 0.0) return constant(a);
    // a + b sin(w t); integral a t + b/w (1 - cos(w t))
    r.ast_ = Node::binary(Node::Kind::Add, Node::number(a),
                          scale_node(b, Node::call("sin", {scale_node(w, t)})));
    r.antiderivative_ = Node::binary(
        Node::Kind::Add, scale_node(a, t),
        scale_node(b / w, Node::binary(Node::Kind::Sub, Node::number(1.0),
                                       Node::call("cos", {scale_node(w, t)}))));
    r.linear_growth_ = a;  // oscillatory remainder bounded by 2|b/w|
  } else {
    throw InputError("unknown rate preset '" + name + "'");
  }
  return r;
}

RateFunction RateFunction::scaled(double c, const RateFunction& r) {
  if (c == 0.0 || r.is_zero()) return constant(0.0);
  if (c == 1.0) return r;
  switch (r.kind_) {
    case Kind::Constant:
      return constant(c * r.value_);
    case Kind::Preset: {
      auto params = r.preset_params_;
      params.at("amplitude") *= c;
      if (r.preset_name_ == "sine-offset") params.at("offset") *= c;
      return preset(r.preset_name_, params);
    }
    case Kind::Expression: {
      RateFunction out;
      out.kind_ = Kind::Expression;
      out.ast_ = scale_node(c, r.ast_);
      out.text_ = expr::print(out.ast_);
      if (r.antiderivative_) out.antiderivative_ = scale_node(c, r.antiderivative_);
      if (r.linear_growth_) out.linear_growth_ = c * *r.linear_growth_;
      return out;
    }
  }
  throw InputError("RateFunction::scaled: unreachable");
}

RateFunction RateFunction::scaled_sum(double c1, const RateFunction& r1, double c2,
                                      const RateFunction& r2) {
  if (c2 == 0.0 || r2.is_zero()) return scaled(c1, r1);
  if (c1 == 0.0 || r1.is_zero()) return scaled(c2, r2);
  if (r1.kind_ == Kind::Constant && r2.kind_ == Kind::Constant)
    return constant(c1 * r1.value_ + c2 * r2.value_);

  auto value_ast = [](const RateFunction& r) {
    return r.kind_ == Kind::Constant ? Node::number(r.value_) : r.ast_;
  };
  auto antideriv_ast = [](const RateFunction& r) -> NodePtr {
    if (r.kind_ == Kind::Constant)
      return scale_node(r.value_, Node::time());
    return r.antiderivative_;
  };

  // Exact cancellation of structurally identical rates.
  if (c1 == -c2 && expr::equal(value_ast(r1), value_ast(r2))) return constant(0.0);

  RateFunction out;
  out.kind_ = Kind::Expression;
  out.ast_ = Node::binary(Node::Kind::Add, scale_node(c1, value_ast(r1)),
                          scale_node(c2, value_ast(r2)));
  out.text_ = expr::print(out.ast_);
  const NodePtr f1 = antideriv_ast(r1), f2 = antideriv_ast(r2);
  if (f1 && f2)
    out.antiderivative_ =
        Node::binary(Node::Kind::Add, scale_node(c1, f1), scale_node(c2, f2));
  if (r1.linear_growth_ && r2.linear_growth_)
    out.linear_growth_ = c1 * *r1.linear_growth_ + c2 * *r2.linear_growth_;
  return out;
}

double RateFunction::eval(double t) const {
  double v = 0.0;
  switch (kind_) {
    case Kind::Constant: v = value_; break;
    case Kind::Expression:
    case Kind::Preset: v = expr::eval(ast_, t); break;
  }
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg << "rate " << describe() << " is not finite at t = " << t;
    throw VerificationError(msg.str());
  }
  return v;
}

double RateFunction::integral(double t) const {
  if (kind_ == Kind::Constant) return value_ * t;
  if (antiderivative_) return expr::eval(antiderivative_, t);
  return integrate_adaptive([this](double s) { return eval(s); }, 0.0, t);
}

std::string RateFunction::describe() const {
  switch (kind_) {
    case Kind::Constant: {
      std::ostringstream os;
      os << value_;
      return os.str();
    }
    case Kind::Expression: return text_;
    case Kind::Preset: {
      std::string out = preset_name_ + "(";
      bool first = true;
      for (const auto& [key, v] : preset_params_) {
        if (!first) out += ",";
        first = false;
        std::ostringstream os;
        os << key << "=" << v;
        out += os.str();
      }
      return out + ")";
    }
  }
  return {};
}

}  // namespace qsteady
