#include "scr/formula.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>

#include "scr/error.hpp"

namespace scr {

// ---------------------------------------------------------------------------
// Construction and equality

ExprPtr make_number(double v) { return std::make_shared<const Expr>(Expr{NumberLit{v}}); }
ExprPtr make_text(std::string v) { return std::make_shared<const Expr>(Expr{TextLit{std::move(v)}}); }
ExprPtr make_bool(bool v) { return std::make_shared<const Expr>(Expr{BoolLit{v}}); }
ExprPtr make_ref(Reference r) { return std::make_shared<const Expr>(Expr{RefExpr{std::move(r)}}); }
ExprPtr make_range(Reference first, Reference last) {
  return std::make_shared<const Expr>(Expr{RangeExpr{std::move(first), std::move(last)}});
}
ExprPtr make_unary(UnaryOp op, ExprPtr operand) {
  return std::make_shared<const Expr>(Expr{UnaryExpr{op, std::move(operand)}});
}
ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs) {
  return std::make_shared<const Expr>(Expr{BinaryExpr{op, std::move(lhs), std::move(rhs)}});
}
ExprPtr make_call(std::string name, std::vector<ExprPtr> args) {
  for (auto& c : name) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return std::make_shared<const Expr>(Expr{CallExpr{std::move(name), std::move(args)}});
}

namespace {

bool same_child(const ExprPtr& a, const ExprPtr& b) {
  if (!a || !b) return a == b;
  return *a == *b;
}

}  // namespace

bool operator==(const Expr& a, const Expr& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b.node);
        if constexpr (std::is_same_v<T, NumberLit>) {
          return x.value == y.value;
        } else if constexpr (std::is_same_v<T, TextLit> || std::is_same_v<T, BoolLit>) {
          return x.value == y.value;
        } else if constexpr (std::is_same_v<T, RefExpr>) {
          return x.ref == y.ref;
        } else if constexpr (std::is_same_v<T, RangeExpr>) {
          return x.first == y.first && x.last == y.last;
        } else if constexpr (std::is_same_v<T, UnaryExpr>) {
          return x.op == y.op && same_child(x.operand, y.operand);
        } else if constexpr (std::is_same_v<T, BinaryExpr>) {
          return x.op == y.op && same_child(x.lhs, y.lhs) && same_child(x.rhs, y.rhs);
        } else {
          if (x.name != y.name || x.args.size() != y.args.size()) return false;
          for (std::size_t i = 0; i < x.args.size(); ++i)
            if (!same_child(x.args[i], y.args[i])) return false;
          return true;
        }
      },
      a.node);
}

std::string_view binary_op_symbol(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Pow: return "^";
    case BinaryOp::Concat: return "&";
    case BinaryOp::Eq: return "=";
    case BinaryOp::Ne: return "<>";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
  }
  return "?";
}

std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

// ---------------------------------------------------------------------------
// Function table

namespace {

struct FunctionArity {
  std::string_view name;
  std::size_t min_args;
  std::size_t max_args;
};

constexpr std::size_t kVariadic = std::numeric_limits<std::size_t>::max();

constexpr std::array<FunctionArity, 12> kFunctions{{
    {"SUM", 1, kVariadic},
    {"AVERAGE", 1, kVariadic},
    {"MIN", 1, kVariadic},
    {"MAX", 1, kVariadic},
    {"COUNT", 1, kVariadic},
    {"COUNTA", 1, kVariadic},
    {"IF", 2, 3},
    {"ABS", 1, 1},
    {"ROUND", 2, 2},
    {"AND", 1, kVariadic},
    {"OR", 1, kVariadic},
    {"NOT", 1, 1},
}};

const FunctionArity* find_function(std::string_view upper) {
  for (const auto& f : kFunctions)
    if (f.name == upper) return &f;
  return nullptr;
}

}  // namespace

bool is_known_function(std::string_view upper_name) {
  return find_function(upper_name) != nullptr;
}

// ---------------------------------------------------------------------------
// Lexer

namespace {

enum class Tok { Number, String, Bool, Ref, Function, Op, LParen, RParen, Comma, Colon, End };

struct Token {
  Tok kind = Tok::End;
  std::size_t pos = 0;
  std::string text;  // operator symbol, function name, string value
  double number = 0;
  bool boolean = false;
  Reference ref;
};

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

// Matches `$?LETTERS$?DIGITS` and fills the reference; false if `s` is not
// shaped like a reference. Shape matches with out-of-bounds values throw.
bool match_reference(std::string_view s, std::size_t pos, Reference& ref) {
  std::size_t i = 0;
  bool col_abs = false, row_abs = false;
  if (i < s.size() && s[i] == '$') { col_abs = true; ++i; }
  std::size_t lb = i;
  while (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i]))) ++i;
  std::size_t le = i;
  if (le == lb) return false;
  if (i < s.size() && s[i] == '$') { row_abs = true; ++i; }
  std::size_t db = i;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i == db || i != s.size()) return false;
  if (le - lb > 3) throw ParseError("column beyond grid bounds", pos + lb);
  std::uint32_t column = column_from_letters(s.substr(lb, le - lb));
  if (s[db] == '0') throw ParseError("row must be positive", pos + db);
  if (i - db > 7) throw ParseError("row beyond grid bounds", pos + db);
  std::uint64_t row = 0;
  for (std::size_t k = db; k < i; ++k) row = row * 10 + std::uint64_t(s[k] - '0');
  if (row > kMaxRow) throw ParseError("row beyond grid bounds", pos + db);
  ref.column = column;
  ref.row = static_cast<std::uint32_t>(row);
  ref.column_absolute = col_abs;
  ref.row_absolute = row_abs;
  return true;
}

class Lexer {
 public:
  Lexer(std::string_view src, std::size_t start, const CellAddress& origin)
      : src_(src), i_(start), origin_(origin) {}

  Token next() {
    skip_space();
    Token t;
    t.pos = i_;
    if (i_ >= src_.size()) return t;
    char c = src_[i_];
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_ + 1]))))
      return lex_number();
    if (c == '"') return lex_string();
    if (c == '\'') return lex_quoted_sheet_ref();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$') return lex_word();
    ++i_;
    switch (c) {
      case '(': t.kind = Tok::LParen; return t;
      case ')': t.kind = Tok::RParen; return t;
      case ',': t.kind = Tok::Comma; return t;
      case ':': t.kind = Tok::Colon; return t;
      case '+': case '-': case '*': case '/': case '^': case '&': case '=':
        t.kind = Tok::Op;
        t.text = std::string(1, c);
        return t;
      case '<':
        t.kind = Tok::Op;
        if (i_ < src_.size() && (src_[i_] == '=' || src_[i_] == '>')) {
          t.text = std::string{'<', src_[i_]};
          ++i_;
        } else {
          t.text = "<";
        }
        return t;
      case '>':
        t.kind = Tok::Op;
        if (i_ < src_.size() && src_[i_] == '=') {
          t.text = ">=";
          ++i_;
        } else {
          t.text = ">";
        }
        return t;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", t.pos);
    }
  }

 private:
  void skip_space() {
    while (i_ < src_.size() && (src_[i_] == ' ' || src_[i_] == '\t' || src_[i_] == '\n' || src_[i_] == '\r'))
      ++i_;
  }

  Token lex_number() {
    Token t;
    t.kind = Tok::Number;
    t.pos = i_;
    std::size_t b = i_;
    while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) ++i_;
    if (i_ < src_.size() && src_[i_] == '.') {
      ++i_;
      while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) ++i_;
    }
    if (i_ < src_.size() && (src_[i_] == 'e' || src_[i_] == 'E')) {
      std::size_t save = i_;
      ++i_;
      if (i_ < src_.size() && (src_[i_] == '+' || src_[i_] == '-')) ++i_;
      std::size_t db = i_;
      while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) ++i_;
      if (i_ == db) i_ = save;
    }
    std::string text(src_.substr(b, i_ - b));
    if (text.front() == '.') text.insert(text.begin(), '0');
    double v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size() || !std::isfinite(v))
      throw ParseError("invalid number literal", b);
    if (i_ < src_.size() && (std::isalpha(static_cast<unsigned char>(src_[i_])) || src_[i_] == '_'))
      throw ParseError("unexpected character after number", i_);
    t.number = v;
    return t;
  }

  Token lex_string() {
    Token t;
    t.kind = Tok::String;
    t.pos = i_;
    ++i_;
    for (;;) {
      if (i_ >= src_.size()) throw ParseError("unterminated string literal", t.pos);
      char c = src_[i_++];
      if (c == '"') {
        if (i_ < src_.size() && src_[i_] == '"') {
          t.text += '"';
          ++i_;
          continue;
        }
        break;
      }
      t.text += c;
    }
    return t;
  }

  Token lex_quoted_sheet_ref() {
    std::size_t start = i_;
    ++i_;
    std::string name;
    for (;;) {
      if (i_ >= src_.size()) throw ParseError("unterminated quoted sheet name", start);
      char c = src_[i_++];
      if (c == '\'') {
        if (i_ < src_.size() && src_[i_] == '\'') {
          name += '\'';
          ++i_;
          continue;
        }
        break;
      }
      name += c;
    }
    if (name.empty()) throw ParseError("empty sheet name", start);
    if (i_ >= src_.size() || src_[i_] != '!') throw ParseError("expected '!' after sheet name", i_);
    ++i_;
    return lex_sheet_local(start, std::move(name));
  }

  Token lex_sheet_local(std::size_t start, std::string sheet) {
    std::size_t b = i_;
    while (i_ < src_.size() && is_ident_char(src_[i_])) ++i_;
    Token t;
    t.kind = Tok::Ref;
    t.pos = start;
    if (!match_reference(src_.substr(b, i_ - b), b, t.ref))
      throw ParseError("expected cell reference after sheet name", b);
    t.ref.sheet = std::move(sheet);
    t.ref.sheet_explicit = true;
    return t;
  }

  Token lex_word() {
    std::size_t b = i_;
    while (i_ < src_.size() && is_ident_char(src_[i_])) ++i_;
    std::string_view word = src_.substr(b, i_ - b);
    Token t;
    t.pos = b;
    if (i_ < src_.size() && src_[i_] == '!') {
      if (word.find('$') != std::string_view::npos) throw ParseError("invalid sheet name", b);
      ++i_;
      return lex_sheet_local(b, std::string(word));
    }
    std::size_t j = i_;
    while (j < src_.size() && (src_[j] == ' ' || src_[j] == '\t')) ++j;
    bool call = j < src_.size() && src_[j] == '(';
    if (call) {
      if (word.find('$') != std::string_view::npos) throw ParseError("invalid function name", b);
      t.kind = Tok::Function;
      t.text = upper(word);
      return t;
    }
    if (match_reference(word, b, t.ref)) {
      t.kind = Tok::Ref;
      t.ref.sheet = origin_.sheet;
      t.ref.sheet_explicit = false;
      return t;
    }
    auto u = upper(word);
    if (u == "TRUE" || u == "FALSE") {
      t.kind = Tok::Bool;
      t.boolean = u == "TRUE";
      return t;
    }
    throw ParseError("unknown name '" + std::string(word) + "'", b);
  }

  std::string_view src_;
  std::size_t i_;
  const CellAddress& origin_;
};

// ---------------------------------------------------------------------------
// Parser

class Parser {
 public:
  Parser(std::string_view src, const CellAddress& origin) : lexer_(src, 1, origin) {
    advance();
  }

  ExprPtr parse() {
    auto e = comparison();
    if (cur_.kind != Tok::End) {
      if (cur_.kind == Tok::RParen) throw ParseError("unbalanced parenthesis", cur_.pos);
      throw ParseError("unexpected token", cur_.pos);
    }
    return e;
  }

 private:
  void advance() { cur_ = lexer_.next(); }
  bool at_op(std::string_view s) const { return cur_.kind == Tok::Op && cur_.text == s; }

  ExprPtr comparison() {
    auto lhs = concat();
    for (;;) {
      std::optional<BinaryOp> op;
      if (at_op("=")) op = BinaryOp::Eq;
      else if (at_op("<>")) op = BinaryOp::Ne;
      else if (at_op("<")) op = BinaryOp::Lt;
      else if (at_op("<=")) op = BinaryOp::Le;
      else if (at_op(">")) op = BinaryOp::Gt;
      else if (at_op(">=")) op = BinaryOp::Ge;
      if (!op) return lhs;
      advance();
      lhs = make_binary(*op, lhs, concat());
    }
  }

  ExprPtr concat() {
    auto lhs = additive();
    while (at_op("&")) {
      advance();
      lhs = make_binary(BinaryOp::Concat, lhs, additive());
    }
    return lhs;
  }

  ExprPtr additive() {
    auto lhs = multiplicative();
    while (at_op("+") || at_op("-")) {
      auto op = at_op("+") ? BinaryOp::Add : BinaryOp::Sub;
      advance();
      lhs = make_binary(op, lhs, multiplicative());
    }
    return lhs;
  }

  ExprPtr multiplicative() {
    auto lhs = unary();
    while (at_op("*") || at_op("/")) {
      auto op = at_op("*") ? BinaryOp::Mul : BinaryOp::Div;
      advance();
      lhs = make_binary(op, lhs, unary());
    }
    return lhs;
  }

  ExprPtr unary() {
    if (at_op("-")) {
      advance();
      return make_unary(UnaryOp::Negate, unary());
    }
    return power();
  }

  // `^` binds tighter than unary minus on its left and is right-associative;
  // a minus may prefix the exponent (2^-1).
  ExprPtr power() {
    auto base = atom();
    if (at_op("^")) {
      advance();
      return make_binary(BinaryOp::Pow, base, exponent());
    }
    return base;
  }

  ExprPtr exponent() {
    if (at_op("-")) {
      advance();
      return make_unary(UnaryOp::Negate, exponent());
    }
    return power();
  }

  ExprPtr atom() {
    Token t = cur_;
    switch (t.kind) {
      case Tok::Number:
        advance();
        return make_number(t.number);
      case Tok::String:
        advance();
        return make_text(t.text);
      case Tok::Bool:
        advance();
        return make_bool(t.boolean);
      case Tok::Ref: {
        advance();
        if (cur_.kind != Tok::Colon) return make_ref(t.ref);
        advance();
        if (cur_.kind != Tok::Ref) throw ParseError("expected reference after ':'", cur_.pos);
        Reference last = cur_.ref;
        if (last.sheet_explicit) {
          if (last.sheet != t.ref.sheet)
            throw ParseError("range endpoints on different sheets", cur_.pos);
        } else {
          last.sheet = t.ref.sheet;
          last.sheet_explicit = t.ref.sheet_explicit;
        }
        advance();
        return make_range(t.ref, last);
      }
      case Tok::Function:
        return call();
      case Tok::LParen: {
        advance();
        auto e = comparison();
        if (cur_.kind != Tok::RParen) throw ParseError("unbalanced parenthesis", cur_.pos);
        advance();
        return e;
      }
      case Tok::RParen:
        throw ParseError("unbalanced parenthesis", t.pos);
      case Tok::End:
        throw ParseError("unexpected end of formula", t.pos);
      default:
        throw ParseError("unexpected token", t.pos);
    }
  }

  ExprPtr call() {
    Token name = cur_;
    advance();
    if (cur_.kind != Tok::LParen) throw ParseError("expected '('", cur_.pos);
    advance();
    std::vector<ExprPtr> args;
    if (cur_.kind != Tok::RParen) {
      for (;;) {
        args.push_back(comparison());
        if (cur_.kind == Tok::Comma) {
          advance();
          continue;
        }
        break;
      }
    }
    if (cur_.kind != Tok::RParen) {
      if (cur_.kind == Tok::End) throw ParseError("unbalanced parenthesis", cur_.pos);
      throw ParseError("unexpected token in argument list", cur_.pos);
    }
    advance();
    if (const auto* f = find_function(name.text)) {
      if (args.size() < f->min_args || args.size() > f->max_args)
        throw ParseError("wrong number of arguments to " + name.text, name.pos);
    }
    return make_call(name.text, std::move(args));
  }

  Lexer lexer_;
  Token cur_;
};

}  // namespace

ExprPtr parse_formula(std::string_view source, const CellAddress& origin) {
  if (source.empty() || source.front() != '=') throw ParseError("formula must start with '='", 0);
  return Parser(source, origin).parse();
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

using RefRenderer = std::function<std::string(const Reference&, bool with_sheet)>;

int precedence(const Expr& e) {
  if (const auto* b = std::get_if<BinaryExpr>(&e.node)) {
    switch (b->op) {
      case BinaryOp::Eq: case BinaryOp::Ne: case BinaryOp::Lt:
      case BinaryOp::Le: case BinaryOp::Gt: case BinaryOp::Ge:
        return 1;
      case BinaryOp::Concat: return 2;
      case BinaryOp::Add: case BinaryOp::Sub: return 3;
      case BinaryOp::Mul: case BinaryOp::Div: return 4;
      case BinaryOp::Pow: return 6;
    }
  }
  if (std::holds_alternative<UnaryExpr>(e.node)) return 5;
  return 7;
}

std::string quote_text(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void render(const Expr& e, const RefRenderer& refs, std::string& out) {
  auto child = [&](const Expr& c, bool parens) {
    if (parens) out += '(';
    render(c, refs, out);
    if (parens) out += ')';
  };
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, NumberLit>) {
          out += format_number(x.value);
        } else if constexpr (std::is_same_v<T, TextLit>) {
          out += quote_text(x.value);
        } else if constexpr (std::is_same_v<T, BoolLit>) {
          out += x.value ? "TRUE" : "FALSE";
        } else if constexpr (std::is_same_v<T, RefExpr>) {
          out += refs(x.ref, true);
        } else if constexpr (std::is_same_v<T, RangeExpr>) {
          out += refs(x.first, true);
          out += ':';
          out += refs(x.last, false);
        } else if constexpr (std::is_same_v<T, UnaryExpr>) {
          out += '-';
          child(*x.operand, precedence(*x.operand) < 5);
        } else if constexpr (std::is_same_v<T, BinaryExpr>) {
          int p = precedence(e);
          if (x.op == BinaryOp::Pow) {
            child(*x.lhs, precedence(*x.lhs) < 7);
            out += '^';
            child(*x.rhs, precedence(*x.rhs) < 5);
          } else {
            child(*x.lhs, precedence(*x.lhs) < p);
            out += binary_op_symbol(x.op);
            child(*x.rhs, precedence(*x.rhs) <= p);
          }
        } else {
          out += x.name;
          out += '(';
          for (std::size_t i = 0; i < x.args.size(); ++i) {
            if (i) out += ',';
            render(*x.args[i], refs, out);
          }
          out += ')';
        }
      },
      e.node);
}

std::string a1_reference(const Reference& r, bool with_sheet) {
  std::string out;
  if (with_sheet && r.sheet_explicit) out += quote_sheet_name(r.sheet) + "!";
  if (r.column_absolute) out += '$';
  out += column_to_letters(r.column);
  if (r.row_absolute) out += '$';
  out += std::to_string(r.row);
  return out;
}

template <typename F>
void walk(const Expr& e, F&& f) {
  f(e);
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, UnaryExpr>) {
          walk(*x.operand, f);
        } else if constexpr (std::is_same_v<T, BinaryExpr>) {
          walk(*x.lhs, f);
          walk(*x.rhs, f);
        } else if constexpr (std::is_same_v<T, CallExpr>) {
          for (const auto& a : x.args) walk(*a, f);
        }
      },
      e.node);
}

}  // namespace

std::string render_formula(const Expr& ast) {
  std::string out = "=";
  render(ast, a1_reference, out);
  return out;
}

std::string normalize(const Expr& ast, const CellAddress& origin) {
  auto r1c1 = [&origin](const Reference& r, bool with_sheet) {
    std::string out;
    if (with_sheet && r.sheet_explicit) out += quote_sheet_name(r.sheet) + "!";
    if (r.row_absolute) {
      out += "R" + std::to_string(r.row);
    } else {
      out += "R[" + std::to_string(std::int64_t(r.row) - std::int64_t(origin.row)) + "]";
    }
    if (r.column_absolute) {
      out += "C" + std::to_string(r.column);
    } else {
      out += "C[" + std::to_string(std::int64_t(r.column) - std::int64_t(origin.column)) + "]";
    }
    return out;
  };
  std::string out = "=";
  render(ast, r1c1, out);
  return out;
}

std::set<CellAddress> extract_references(const Expr& ast) {
  std::set<CellAddress> refs;
  walk(ast, [&](const Expr& e) {
    if (const auto* r = std::get_if<RefExpr>(&e.node)) {
      refs.insert(r->ref.address());
    } else if (const auto* rg = std::get_if<RangeExpr>(&e.node)) {
      auto c0 = std::min(rg->first.column, rg->last.column);
      auto c1 = std::max(rg->first.column, rg->last.column);
      auto r0 = std::min(rg->first.row, rg->last.row);
      auto r1 = std::max(rg->first.row, rg->last.row);
      std::uint64_t cells = std::uint64_t(c1 - c0 + 1) * (r1 - r0 + 1);
      if (cells > kMaxRangeExpansion || refs.size() + cells > kMaxRangeExpansion)
        throw analysis_error("range " + a1_reference(rg->first, false) + ":" +
                             a1_reference(rg->last, false) + " is too large to expand");
      for (auto row = r0; row <= r1; ++row)
        for (auto col = c0; col <= c1; ++col) refs.insert(CellAddress{rg->first.sheet, col, row});
    }
  });
  return refs;
}

std::size_t formula_length(const Expr& ast) {
  std::size_t n = 0;
  walk(ast, [&](const Expr&) { ++n; });
  return n;
}

std::size_t count_magic_constants(const Expr& ast, const std::set<double>& whitelist) {
  std::size_t n = 0;
  // Literals directly under a negation are judged by their signed value.
  std::set<const Expr*> negated;
  walk(ast, [&](const Expr& e) {
    if (const auto* u = std::get_if<UnaryExpr>(&e.node)) {
      if (const auto* lit = std::get_if<NumberLit>(&u->operand->node)) {
        negated.insert(u->operand.get());
        if (!whitelist.contains(-lit->value)) ++n;
      }
    } else if (const auto* lit = std::get_if<NumberLit>(&e.node)) {
      if (!negated.contains(&e) && !whitelist.contains(lit->value)) ++n;
    }
  });
  return n;
}

std::vector<std::string> unknown_functions(const Expr& ast) {
  std::vector<std::string> out;
  walk(ast, [&](const Expr& e) {
    if (const auto* c = std::get_if<CallExpr>(&e.node))
      if (!is_known_function(c->name)) out.push_back(c->name);
  });
  return out;
}

}  // namespace scr
