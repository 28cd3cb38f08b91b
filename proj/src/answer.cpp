#include "synthgen/answer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

namespace synthgen::verify {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string to_lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool is_integer_literal(const std::string& s) {
  std::size_t i = (s.size() > 1 && (s[0] == '+' || s[0] == '-')) ? 1 : 0;
  if (i >= s.size()) return false;
  for (; i < s.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

std::string rational_canonical(const BigRational& r) {
  const BigInt num = boost::multiprecision::numerator(r);
  const BigInt den = boost::multiprecision::denominator(r);
  if (den == 1) return num.str();
  return num.str() + "/" + den.str();
}

AnswerForm make_exact(const BigRational& r, bool unit_stripped) {
  AnswerForm f;
  f.kind = boost::multiprecision::denominator(r) == 1 ? AnswerKind::integer
                                                      : AnswerKind::rational;
  f.exact = r;
  f.approx = static_cast<double>(r);
  f.canonical = rational_canonical(r);
  f.unit_stripped = unit_stripped;
  return f;
}

// Strip an enclosing \boxed{...} or $...$ wrapper covering the whole string.
std::string strip_wrappers(std::string s) {
  for (;;) {
    s = trim(s);
    if (s.size() >= 2 && s.front() == '$' && s.back() == '$') {
      s = s.substr(1, s.size() - 2);
      continue;
    }
    const std::string boxed = "\\boxed{";
    if (s.rfind(boxed, 0) == 0 && s.back() == '}') {
      // only if the opening brace matches the final one
      int depth = 0;
      bool whole = true;
      for (std::size_t i = boxed.size() - 1; i < s.size(); ++i) {
        if (s[i] == '{') ++depth;
        else if (s[i] == '}') {
          --depth;
          if (depth == 0 && i + 1 != s.size()) { whole = false; break; }
        }
      }
      if (whole && depth == 0) {
        s = s.substr(boxed.size(), s.size() - boxed.size() - 1);
        continue;
      }
    }
    return s;
  }
}

// ---- decimal ----

std::optional<BigRational> parse_decimal_exact(const std::string& s) {
  std::size_t i = 0;
  bool neg = false;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) neg = s[i++] == '-';
  std::string int_part, frac_part;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) int_part += s[i++];
  if (i >= s.size() || s[i] != '.') return std::nullopt;
  ++i;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) frac_part += s[i++];
  if (i != s.size()) return std::nullopt;
  if (int_part.empty() && frac_part.empty()) return std::nullopt;
  BigInt num = int_part.empty() ? BigInt(0) : BigInt(int_part);
  BigInt den = 1;
  for (char c : frac_part) {
    num = num * 10 + (c - '0');
    den *= 10;
  }
  BigRational r(num, den);
  if (neg) r = -r;
  return r;
}

// ---- radical ----

// Squarefree decomposition: n = s^2 * d with d squarefree.
void squarefree_split(long long n, long long& s, long long& d) {
  s = 1;
  d = 1;
  for (long long p = 2; p * p <= n; ++p) {
    int k = 0;
    while (n % p == 0) { n /= p; ++k; }
    for (int i = 0; i < k / 2; ++i) s *= p;
    if (k % 2) d *= p;
  }
  d *= n;
}

struct RadicalParts {
  BigRational coeff;
  long long radicand;
};

// Accepts q*sqrt(d) spellings: "sqrt(8)", "\sqrt{8}", "2\sqrt{2}", "2*sqrt(2)",
// "2sqrt(2)", and the UTF-8 radical sign. Coefficient may be an integer or
// a fraction.
std::optional<RadicalParts> parse_radical_syntax(const std::string& in) {
  std::string s;
  for (char c : in)
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  if (s.empty()) return std::nullopt;

  bool neg = false;
  std::size_t i = 0;
  if (s[i] == '+' || s[i] == '-') neg = s[i++] == '-';

  // optional integer-or-fraction coefficient
  std::string coeff_str;
  while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '/'))
    coeff_str += s[i++];
  if (i < s.size() && s[i] == '*') ++i;

  // radical marker
  long long radicand = 0;
  auto read_uint = [&](std::size_t& j) -> std::optional<long long> {
    std::string digits;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) digits += s[j++];
    if (digits.empty() || digits.size() > 12) return std::nullopt;
    return std::stoll(digits);
  };

  const std::string utf8_radical = "\xe2\x88\x9a";  // U+221A
  if (s.compare(i, 5, "sqrt(") == 0) {
    i += 5;
    auto n = read_uint(i);
    if (!n || i >= s.size() || s[i] != ')' || i + 1 != s.size()) return std::nullopt;
    radicand = *n;
  } else if (s.compare(i, 6, "\\sqrt{") == 0) {
    i += 6;
    auto n = read_uint(i);
    if (!n || i >= s.size() || s[i] != '}' || i + 1 != s.size()) return std::nullopt;
    radicand = *n;
  } else if (s.compare(i, utf8_radical.size(), utf8_radical) == 0) {
    i += utf8_radical.size();
    bool paren = i < s.size() && s[i] == '(';
    if (paren) ++i;
    auto n = read_uint(i);
    if (!n) return std::nullopt;
    if (paren) {
      if (i >= s.size() || s[i] != ')') return std::nullopt;
      ++i;
    }
    if (i != s.size()) return std::nullopt;
    radicand = *n;
  } else {
    return std::nullopt;
  }
  if (radicand <= 0) return std::nullopt;

  BigRational coeff = 1;
  if (!coeff_str.empty()) {
    auto slash = coeff_str.find('/');
    if (slash == std::string::npos) {
      if (!is_integer_literal(coeff_str)) return std::nullopt;
      coeff = BigRational(BigInt(coeff_str));
    } else {
      std::string p = coeff_str.substr(0, slash), q = coeff_str.substr(slash + 1);
      if (!is_integer_literal(p) || !is_integer_literal(q) || BigInt(q) == 0)
        return std::nullopt;
      coeff = BigRational(BigInt(p), BigInt(q));
    }
  }
  if (neg) coeff = -coeff;
  return RadicalParts{coeff, radicand};
}

// ---- symbolic expression parser ----

struct Parser {
  std::string src;
  std::size_t pos = 0;
  std::string variable;  // the single allowed symbol, discovered on first use
  bool failed = false;

  char peek() const { return pos < src.size() ? src[pos] : '\0'; }
  bool eat(char c) {
    if (peek() == c) { ++pos; return true; }
    return false;
  }

  ExprPtr fail() {
    failed = true;
    return nullptr;
  }

  ExprPtr make(Expr::Op op, ExprPtr l, ExprPtr r) {
    auto e = std::make_shared<Expr>();
    e->op = op;
    e->lhs = std::move(l);
    e->rhs = std::move(r);
    return e;
  }

  ExprPtr parse_expression() {
    auto lhs = parse_term();
    if (!lhs) return nullptr;
    while (peek() == '+' || peek() == '-') {
      char op = src[pos++];
      auto rhs = parse_term();
      if (!rhs) return nullptr;
      lhs = make(op == '+' ? Expr::Op::add : Expr::Op::sub, lhs, rhs);
    }
    return lhs;
  }

  ExprPtr parse_term() {
    auto lhs = parse_factor();
    if (!lhs) return nullptr;
    for (;;) {
      if (peek() == '*' || peek() == '/') {
        char op = src[pos++];
        auto rhs = parse_factor();
        if (!rhs) return nullptr;
        lhs = make(op == '*' ? Expr::Op::mul : Expr::Op::div, lhs, rhs);
      } else if (peek() == '(' || std::isalpha(static_cast<unsigned char>(peek())) ||
                 std::isdigit(static_cast<unsigned char>(peek()))) {
        // implicit multiplication: 2(n-1), (n-1)(n-2), 2n
        auto rhs = parse_factor();
        if (!rhs) return nullptr;
        lhs = make(Expr::Op::mul, lhs, rhs);
      } else {
        return lhs;
      }
    }
  }

  ExprPtr parse_factor() {
    if (eat('-')) {
      auto inner = parse_factor();
      if (!inner) return nullptr;
      return make(Expr::Op::neg, inner, nullptr);
    }
    if (eat('+')) return parse_factor();
    auto base = parse_atom();
    if (!base) return nullptr;
    if (eat('^')) {
      auto expo = parse_exponent();
      if (!expo) return fail();
      auto e = std::make_shared<Expr>();
      e->op = Expr::Op::pow;
      e->lhs = base;
      e->expo = *expo;
      return e;
    }
    return base;
  }

  std::optional<long long> parse_exponent() {
    bool braced = eat('{');
    bool paren = !braced && eat('(');
    bool neg = eat('-');
    std::string digits;
    while (std::isdigit(static_cast<unsigned char>(peek()))) digits += src[pos++];
    if (digits.empty() || digits.size() > 4) return std::nullopt;
    if (braced && !eat('}')) return std::nullopt;
    if (paren && !eat(')')) return std::nullopt;
    long long v = std::stoll(digits);
    return neg ? -v : v;
  }

  ExprPtr parse_atom() {
    if (eat('(')) {
      auto inner = parse_expression();
      if (!inner || !eat(')')) return fail();
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(peek()))) {
      std::string digits;
      while (std::isdigit(static_cast<unsigned char>(peek()))) digits += src[pos++];
      auto e = std::make_shared<Expr>();
      e->op = Expr::Op::constant;
      e->value = BigInt(digits);
      return e;
    }
    if (std::isalpha(static_cast<unsigned char>(peek()))) {
      char v = src[pos++];
      if (std::isalpha(static_cast<unsigned char>(peek()))) return fail();  // words
      std::string name(1, v);
      if (variable.empty()) variable = name;
      if (variable != name) return fail();  // single-variable grammar only
      auto e = std::make_shared<Expr>();
      e->op = Expr::Op::variable;
      return e;
    }
    return fail();
  }
};

// \frac{A}{B} -> ((A)/(B)), applied innermost-first.
std::optional<std::string> expand_frac(std::string s) {
  for (int guard = 0; guard < 64; ++guard) {
    auto at = s.find("\\frac{");
    if (at == std::string::npos) return s;
    std::size_t i = at + 5;  // points at '{'
    auto read_group = [&](std::size_t& j) -> std::optional<std::string> {
      if (j >= s.size() || s[j] != '{') return std::nullopt;
      int depth = 0;
      std::size_t start = j + 1;
      for (; j < s.size(); ++j) {
        if (s[j] == '{') ++depth;
        else if (s[j] == '}') {
          if (--depth == 0) {
            std::string g = s.substr(start, j - start);
            ++j;
            return g;
          }
        }
      }
      return std::nullopt;
    };
    std::size_t j = i;
    auto a = read_group(j);
    if (!a) return std::nullopt;
    auto b = read_group(j);
    if (!b) return std::nullopt;
    s = s.substr(0, at) + "((" + *a + ")/(" + *b + "))" + s.substr(j);
  }
  return std::nullopt;
}

std::string serialize_expr(const Expr& e) {
  switch (e.op) {
    case Expr::Op::constant: return e.value.str();
    case Expr::Op::variable: return "x";  // placeholder, replaced by caller
    case Expr::Op::add: return "(" + serialize_expr(*e.lhs) + "+" + serialize_expr(*e.rhs) + ")";
    case Expr::Op::sub: return "(" + serialize_expr(*e.lhs) + "-" + serialize_expr(*e.rhs) + ")";
    case Expr::Op::mul: return "(" + serialize_expr(*e.lhs) + "*" + serialize_expr(*e.rhs) + ")";
    case Expr::Op::div: return "(" + serialize_expr(*e.lhs) + "/" + serialize_expr(*e.rhs) + ")";
    case Expr::Op::pow: return "(" + serialize_expr(*e.lhs) + "^" + std::to_string(e.expo) + ")";
    case Expr::Op::neg: return "(-" + serialize_expr(*e.lhs) + ")";
  }
  return "";
}

bool has_variable(const Expr& e) {
  if (e.op == Expr::Op::variable) return true;
  if (e.lhs && has_variable(*e.lhs)) return true;
  if (e.rhs && has_variable(*e.rhs)) return true;
  return false;
}

std::optional<AnswerForm> parse_symbolic(const std::string& raw, bool unit_stripped) {
  auto expanded = expand_frac(raw);
  if (!expanded) return std::nullopt;
  std::string s;
  for (std::size_t i = 0; i < expanded->size(); ++i) {
    if (std::isspace(static_cast<unsigned char>((*expanded)[i]))) continue;
    if (expanded->compare(i, 5, "\\cdot") == 0) {
      s += '*';
      i += 4;
      continue;
    }
    if (expanded->compare(i, 5, "\\left") == 0) { i += 4; continue; }
    if (expanded->compare(i, 6, "\\right") == 0) { i += 5; continue; }
    s += (*expanded)[i];
  }
  if (s.empty()) return std::nullopt;

  Parser p;
  p.src = s;
  auto ast = p.parse_expression();
  if (!ast || p.failed || p.pos != p.src.size()) return std::nullopt;

  if (!has_variable(*ast)) {
    // Constant closed form folds to an exact rational.
    auto v = eval_expr(*ast, BigRational(0));
    if (!v) return std::nullopt;
    return make_exact(*v, unit_stripped);
  }

  AnswerForm f;
  f.kind = AnswerKind::symbolic_expr;
  f.variable = p.variable;
  f.expr = ast;
  std::string body = serialize_expr(*ast);
  // restore the actual variable letter in the canonical spelling
  std::string canon;
  for (char c : body) canon += (c == 'x') ? p.variable[0] : c;
  f.canonical = canon;
  f.unit_stripped = unit_stripped;
  return f;
}

std::optional<AnswerForm> parse_answer_once(const std::string& input, bool unit_stripped) {
  const std::string t = trim(input);
  if (t.empty()) return std::nullopt;

  // choice letter, bare or parenthesized
  if (t.size() == 1 || (t.size() == 3 && t.front() == '(' && t.back() == ')')) {
    char c = static_cast<char>(
        std::toupper(static_cast<unsigned char>(t[t.size() == 3 ? 1 : 0])));
    if (c >= 'A' && c <= 'D') {
      AnswerForm f;
      f.kind = AnswerKind::choice_letter;
      f.canonical = std::string(1, c);
      f.unit_stripped = unit_stripped;
      return f;
    }
  }

  // yes / no / true / false
  {
    const std::string lower = to_lower(t);
    if (lower == "yes" || lower == "true" || lower == "no" || lower == "false") {
      AnswerForm f;
      f.kind = AnswerKind::boolean_yes_no;
      f.canonical = (lower == "yes" || lower == "true") ? "yes" : "no";
      f.unit_stripped = unit_stripped;
      return f;
    }
  }

  // integer
  if (is_integer_literal(t)) return make_exact(BigRational(BigInt(t)), unit_stripped);

  // fraction p/q
  {
    auto slash = t.find('/');
    if (slash != std::string::npos && slash > 0 && slash + 1 < t.size()) {
      std::string p = trim(t.substr(0, slash)), q = trim(t.substr(slash + 1));
      if (is_integer_literal(p) && is_integer_literal(q) && BigInt(q) != 0)
        return make_exact(BigRational(BigInt(p), BigInt(q)), unit_stripped);
    }
  }

  // decimal
  if (auto d = parse_decimal_exact(t)) {
    AnswerForm f;
    f.kind = AnswerKind::decimal;
    f.exact = *d;
    f.approx = static_cast<double>(*d);
    f.canonical = t;
    f.unit_stripped = unit_stripped;
    return f;
  }

  // radical
  if (auto rad = parse_radical_syntax(t)) {
    long long sq = 1, d = 1;
    squarefree_split(rad->radicand, sq, d);
    BigRational coeff = rad->coeff * sq;
    if (d == 1) return make_exact(coeff, unit_stripped);
    if (coeff == 0) return make_exact(BigRational(0), unit_stripped);
    AnswerForm f;
    f.kind = AnswerKind::radical;
    f.radical_coeff = coeff;
    f.radical_radicand = d;
    f.approx = static_cast<double>(coeff) * std::sqrt(static_cast<double>(d));
    f.canonical = rational_canonical(coeff) + "*sqrt(" + std::to_string(d) + ")";
    f.unit_stripped = unit_stripped;
    return f;
  }

  // single-variable closed form (or a constant expression)
  return parse_symbolic(t, unit_stripped);
}

bool rel_close_exact(const BigRational& a, const BigRational& b) {
  const BigRational tol(1, 1000000000);
  BigRational diff = a - b;
  if (diff < 0) diff = -diff;
  BigRational aa = a < 0 ? BigRational(-a) : a;
  BigRational bb = b < 0 ? BigRational(-b) : b;
  BigRational scale = std::max(aa, bb);
  if (scale == 0) return diff == 0;
  return diff <= tol * scale;
}

bool rel_close_double(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  if (scale == 0.0) return a == b;
  return std::abs(a - b) <= kRelTolerance * scale;
}

bool is_exact_kind(AnswerKind k) {
  return k == AnswerKind::integer || k == AnswerKind::rational;
}

bool is_numeric_kind(AnswerKind k) {
  return is_exact_kind(k) || k == AnswerKind::decimal || k == AnswerKind::radical;
}

}  // namespace

std::string answer_kind_name(AnswerKind k) {
  switch (k) {
    case AnswerKind::integer: return "integer";
    case AnswerKind::rational: return "rational";
    case AnswerKind::decimal: return "decimal";
    case AnswerKind::radical: return "radical";
    case AnswerKind::boolean_yes_no: return "boolean_yes_no";
    case AnswerKind::choice_letter: return "choice_letter";
    case AnswerKind::symbolic_expr: return "symbolic_expr";
  }
  return "integer";
}

std::optional<AnswerKind> answer_kind_from_name(const std::string& name) {
  for (AnswerKind k : {AnswerKind::integer, AnswerKind::rational, AnswerKind::decimal,
                       AnswerKind::radical, AnswerKind::boolean_yes_no,
                       AnswerKind::choice_letter, AnswerKind::symbolic_expr})
    if (answer_kind_name(k) == name) return k;
  return std::nullopt;
}

std::optional<BigRational> eval_expr(const Expr& e, const BigRational& x) {
  switch (e.op) {
    case Expr::Op::constant: return BigRational(e.value);
    case Expr::Op::variable: return x;
    case Expr::Op::neg: {
      auto v = eval_expr(*e.lhs, x);
      if (!v) return std::nullopt;
      return -*v;
    }
    case Expr::Op::add:
    case Expr::Op::sub:
    case Expr::Op::mul:
    case Expr::Op::div: {
      auto a = eval_expr(*e.lhs, x);
      auto b = eval_expr(*e.rhs, x);
      if (!a || !b) return std::nullopt;
      switch (e.op) {
        case Expr::Op::add: return *a + *b;
        case Expr::Op::sub: return *a - *b;
        case Expr::Op::mul: return *a * *b;
        default:
          if (*b == 0) return std::nullopt;
          return *a / *b;
      }
    }
    case Expr::Op::pow: {
      auto base = eval_expr(*e.lhs, x);
      if (!base) return std::nullopt;
      long long n = e.expo;
      if (n == 0) return BigRational(1);
      bool invert = n < 0;
      if (invert) {
        if (*base == 0) return std::nullopt;
        n = -n;
      }
      if (n > 64) return std::nullopt;  // answer grammar never needs this
      BigRational acc(1);
      for (long long i = 0; i < n; ++i) acc *= *base;
      if (invert) acc = BigRational(1) / acc;
      return acc;
    }
  }
  return std::nullopt;
}

std::optional<AnswerForm> parse_answer(const std::string& text) {
  std::string t = strip_wrappers(text);
  if (t.empty() || t.size() > 4096) return std::nullopt;

  if (auto f = parse_answer_once(t, false)) return f;

  // Unit-bearing answers like "5 cm": retry without a trailing alphabetic
  // token, flagging the form so downstream can surface it.
  auto last_space = t.find_last_of(" \t");
  if (last_space != std::string::npos && last_space > 0) {
    std::string tail = t.substr(last_space + 1);
    bool alpha = !tail.empty();
    for (char c : tail)
      if (!std::isalpha(static_cast<unsigned char>(c)) && c != '\xc2' && c != '\xb0')
        alpha = false;
    if (alpha) {
      std::string head = trim(t.substr(0, last_space));
      // Do not let "5 cm" turn into a bare choice/boolean reading of "cm".
      if (auto f = parse_answer_once(head, true)) {
        if (is_numeric_kind(f->kind) || f->kind == AnswerKind::symbolic_expr) return f;
      }
    }
  }
  return std::nullopt;
}

bool answers_equivalent(const AnswerForm& a, const AnswerForm& b) {
  // token kinds
  if (a.kind == AnswerKind::boolean_yes_no || b.kind == AnswerKind::boolean_yes_no)
    return a.kind == b.kind && a.canonical == b.canonical;
  if (a.kind == AnswerKind::choice_letter || b.kind == AnswerKind::choice_letter)
    return a.kind == b.kind && a.canonical == b.canonical;

  // symbolic: compare by exact evaluation at the fixed points
  if (a.kind == AnswerKind::symbolic_expr || b.kind == AnswerKind::symbolic_expr) {
    if (a.kind != b.kind) return false;
    if (a.variable != b.variable) return false;
    if (!a.expr || !b.expr) return false;
    int valid = 0;
    for (long long pt : kSamplePoints) {
      BigRational x(pt);
      auto va = eval_expr(*a.expr, x);
      auto vb = eval_expr(*b.expr, x);
      if (!va || !vb) continue;  // pole for either side: point skipped
      ++valid;
      if (!rel_close_exact(*va, *vb)) return false;
    }
    return valid >= kMinValidPoints;
  }

  if (!is_numeric_kind(a.kind) || !is_numeric_kind(b.kind)) return false;

  // radicals compare by canonical (q, d); vs other numerics by float view
  if (a.kind == AnswerKind::radical && b.kind == AnswerKind::radical)
    return a.radical_coeff == b.radical_coeff && a.radical_radicand == b.radical_radicand;
  if (a.kind == AnswerKind::radical || b.kind == AnswerKind::radical)
    return a.approx && b.approx && rel_close_double(*a.approx, *b.approx);

  // exact vs exact: exact rational equality
  if (is_exact_kind(a.kind) && is_exact_kind(b.kind)) return *a.exact == *b.exact;

  // a decimal on either side: tolerance compare, still in exact arithmetic
  return rel_close_exact(*a.exact, *b.exact);
}

}  // namespace synthgen::verify
