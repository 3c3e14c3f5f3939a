#pragma once

// Recursive-descent parser for arithmetic expressions, compiled to a small
// postfix program. Grammar (EBNF):
//
//   expr    = term { ("+" | "-") term } ;
//   term    = unary { ("*" | "/") unary } ;
//   unary   = ("+" | "-") unary | power ;
//   power   = primary [ "^" unary ] ;            (right associative)
//   primary = number | constant | variable
//           | function "(" expr { "," expr } ")"
//           | "(" expr ")" ;
//   function = "ln" | "exp" | "sqrt" | "min" | "max" ;
//   constant = "pi" | "e" ;
//
// Variables are supplied by the caller by name. A name that is both a
// variable and a constant resolves to the variable.

#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "matchkit/util.hpp"

namespace matchkit {

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position, std::string token)
      : Error("parse error at position " + std::to_string(position) + " near '" +
              token + "': " + what),
        position_(position),
        token_(std::move(token)) {}

  /// 1-based character column; one past the end for unexpected end of input.
  std::size_t position() const { return position_; }
  const std::string& token() const { return token_; }

 private:
  std::size_t position_;
  std::string token_;
};

class Expression {
 public:
  enum class Op : std::uint8_t {
    kConst, kVar, kAdd, kSub, kMul, kDiv, kPow, kNeg,
    kLn, kExp, kSqrt, kMin, kMax
  };

  struct Instr {
    Op op;
    int index = 0;
    double value = 0.0;
  };

  Expression() = default;

  /// Parses `text` over the given variable names. Each name maps to the
  /// position of its value in the span passed to eval().
  static Expression parse(const std::string& text,
                          const std::map<std::string, int>& variables) {
    Parser p{text, variables, {}, 0, 0};
    p.parse_all();
    Expression e;
    e.code_ = std::move(p.code);
    e.text_ = text;
    e.stack_needed_ = p.max_depth;
    return e;
  }

  double eval(std::span<const double> vars) const {
    constexpr std::size_t kInline = 32;
    std::array<double, kInline> small{};
    std::vector<double> big;
    double* st = small.data();
    if (stack_needed_ > kInline) {
      big.resize(stack_needed_);
      st = big.data();
    }
    int top = -1;
    for (const Instr& in : code_) {
      switch (in.op) {
        case Op::kConst: st[++top] = in.value; break;
        case Op::kVar: st[++top] = vars[static_cast<std::size_t>(in.index)]; break;
        case Op::kAdd: st[top - 1] += st[top]; --top; break;
        case Op::kSub: st[top - 1] -= st[top]; --top; break;
        case Op::kMul: st[top - 1] *= st[top]; --top; break;
        case Op::kDiv: st[top - 1] /= st[top]; --top; break;
        case Op::kPow: st[top - 1] = ipow_or_pow(st[top - 1], st[top]); --top; break;
        case Op::kNeg: st[top] = -st[top]; break;
        case Op::kLn: st[top] = std::log(st[top]); break;
        case Op::kExp: st[top] = std::exp(st[top]); break;
        case Op::kSqrt: st[top] = std::sqrt(st[top]); break;
        case Op::kMin: st[top - 1] = std::min(st[top - 1], st[top]); --top; break;
        case Op::kMax: st[top - 1] = std::max(st[top - 1], st[top]); --top; break;
      }
    }
    return st[0];
  }

  const std::string& text() const { return text_; }
  const std::vector<Instr>& code() const { return code_; }

 private:
  static double ipow_or_pow(double b, double e) {
    if (e == 2.0) return b * b;
    if (e == 3.0) return b * b * b;
    return std::pow(b, e);
  }

  struct Parser {
    const std::string& src;
    const std::map<std::string, int>& vars;
    std::vector<Instr> code;
    std::size_t pos;
    std::size_t max_depth;
    std::size_t depth = 0;

    void emit(Instr in) {
      code.push_back(in);
      switch (in.op) {
        case Op::kConst:
        case Op::kVar: ++depth; break;
        case Op::kNeg:
        case Op::kLn:
        case Op::kExp:
        case Op::kSqrt: break;
        default: --depth; break;
      }
      max_depth = std::max(max_depth, depth);
    }

    void skip_ws() {
      while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
    }

    [[noreturn]] void fail(const std::string& what, std::size_t at) const {
      std::string tok = at < src.size() ? std::string(1, src[at]) : "<end>";
      if (at < src.size() && (std::isalnum(static_cast<unsigned char>(src[at])) || src[at] == '_')) {
        std::size_t e = at;
        while (e < src.size() && (std::isalnum(static_cast<unsigned char>(src[e])) || src[e] == '_')) ++e;
        tok = src.substr(at, e - at);
      }
      throw ParseError(what, at + 1, tok);
    }

    bool accept(char c) {
      skip_ws();
      if (pos < src.size() && src[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }

    void expect(char c) {
      skip_ws();
      if (pos >= src.size() || src[pos] != c)
        fail(std::string("expected '") + c + "'", pos);
      ++pos;
    }

    void parse_all() {
      skip_ws();
      if (pos >= src.size()) fail("empty expression", pos);
      parse_expr();
      skip_ws();
      if (pos != src.size()) fail("unexpected trailing input", pos);
    }

    void parse_expr() {
      parse_term();
      for (;;) {
        if (accept('+')) {
          parse_term();
          emit({Op::kAdd});
        } else if (accept('-')) {
          parse_term();
          emit({Op::kSub});
        } else {
          return;
        }
      }
    }

    void parse_term() {
      parse_unary();
      for (;;) {
        if (accept('*')) {
          parse_unary();
          emit({Op::kMul});
        } else if (accept('/')) {
          parse_unary();
          emit({Op::kDiv});
        } else {
          return;
        }
      }
    }

    void parse_unary() {
      if (accept('-')) {
        parse_unary();
        emit({Op::kNeg});
        return;
      }
      if (accept('+')) {
        parse_unary();
        return;
      }
      parse_power();
    }

    void parse_power() {
      parse_primary();
      if (accept('^')) {
        parse_unary();
        emit({Op::kPow});
      }
    }

    void parse_primary() {
      skip_ws();
      if (pos >= src.size()) fail("unexpected end of input", pos);
      const char c = src[pos];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        parse_number();
        return;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        const std::size_t start = pos;
        while (pos < src.size() &&
               (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
          ++pos;
        const std::string name = src.substr(start, pos - start);
        skip_ws();
        if (pos < src.size() && src[pos] == '(') {
          parse_call(name, start);
          return;
        }
        if (auto it = vars.find(name); it != vars.end()) {
          emit({Op::kVar, it->second});
          return;
        }
        if (name == "pi") {
          emit({Op::kConst, 0, std::numbers::pi});
          return;
        }
        if (name == "e") {
          emit({Op::kConst, 0, std::numbers::e});
          return;
        }
        fail("unknown identifier", start);
      }
      if (accept('(')) {
        parse_expr();
        expect(')');
        return;
      }
      fail("unexpected token", pos);
    }

    void parse_number() {
      const std::size_t start = pos;
      while (pos < src.size() && (std::isdigit(static_cast<unsigned char>(src[pos])) || src[pos] == '.'))
        ++pos;
      if (pos < src.size() && (src[pos] == 'e' || src[pos] == 'E')) {
        std::size_t q = pos + 1;
        if (q < src.size() && (src[q] == '+' || src[q] == '-')) ++q;
        if (q < src.size() && std::isdigit(static_cast<unsigned char>(src[q]))) {
          pos = q;
          while (pos < src.size() && std::isdigit(static_cast<unsigned char>(src[pos]))) ++pos;
        }
      }
      const std::string lit = src.substr(start, pos - start);
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(lit, &used);
      } catch (const std::exception&) {
        fail("malformed number", start);
      }
      if (used != lit.size()) fail("malformed number", start);
      emit({Op::kConst, 0, v});
    }

    void parse_call(const std::string& name, std::size_t start) {
      Op op;
      std::size_t arity;
      if (name == "ln") {
        op = Op::kLn; arity = 1;
      } else if (name == "exp") {
        op = Op::kExp; arity = 1;
      } else if (name == "sqrt") {
        op = Op::kSqrt; arity = 1;
      } else if (name == "min") {
        op = Op::kMin; arity = 2;
      } else if (name == "max") {
        op = Op::kMax; arity = 2;
      } else {
        fail("unknown function", start);
      }
      expect('(');
      std::size_t args = 0;
      if (!accept(')')) {
        do {
          parse_expr();
          ++args;
        } while (accept(','));
        expect(')');
      }
      if (args != arity)
        fail(name + " expects " + std::to_string(arity) + " argument(s), got " +
                 std::to_string(args),
             start);
      emit({op});
    }
  };

  std::vector<Instr> code_;
  std::string text_;
  std::size_t stack_needed_ = 1;
};

}  // namespace matchkit
