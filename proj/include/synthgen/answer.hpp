#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <memory>
#include <optional>
#include <string>

namespace synthgen::verify {

using BigInt = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;

enum class AnswerKind {
  integer,
  rational,
  decimal,
  radical,
  boolean_yes_no,
  choice_letter,
  symbolic_expr,
};

std::string answer_kind_name(AnswerKind k);
std::optional<AnswerKind> answer_kind_from_name(const std::string& name);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

// Rational-function AST over one variable: +, -, *, /, integer ^, integer
// constants, parentheses. Implicit multiplication is resolved at parse time.
struct Expr {
  enum class Op { constant, variable, add, sub, mul, div, pow, neg };
  Op op = Op::constant;
  BigInt value;       // constant
  long long expo = 0; // pow only
  ExprPtr lhs, rhs;
};

// Exact evaluation; nullopt on a pole (division by zero, 0^negative).
std::optional<BigRational> eval_expr(const Expr& e, const BigRational& x);

struct AnswerForm {
  AnswerKind kind = AnswerKind::integer;
  std::string canonical;

  // Exact value for integer / rational / decimal kinds.
  std::optional<BigRational> exact;
  // Float view for any numeric kind (incl. radical).
  std::optional<double> approx;

  // Radical q*sqrt(d) with d squarefree, d > 1.
  BigRational radical_coeff;
  long long radical_radicand = 0;

  // Symbolic closed forms only.
  std::string variable;
  ExprPtr expr;

  // Set when a trailing unit token was stripped to make the answer parse.
  bool unit_stripped = false;
};

// Full answer grammar, in priority order: choice letter; yes/no/true/false;
// integer; reduced fraction; decimal; radical; single-variable closed form.
// Returns nullopt on anything else; never throws on arbitrary input.
std::optional<AnswerForm> parse_answer(const std::string& text);

bool answers_equivalent(const AnswerForm& a, const AnswerForm& b);

// The fixed evaluation abscissas for symbolic comparison.
inline constexpr long long kSamplePoints[8] = {2, 3, 5, 7, 11, 13, 17, 19};
inline constexpr int kMinValidPoints = 5;
inline constexpr double kRelTolerance = 1e-9;

}  // namespace synthgen::verify
