#pragma once

#include "pipmc/error.hpp"
#include "pipmc/lexer.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace pipmc {

/// Ground first-order term as written in formula files: f(t1,...,tn), an
/// identifier, or a number.
struct Term
{
  std::string functor;
  std::vector<Term> args;
  bool number = false;
  double value = 0;
  std::size_t line = 1;
  std::size_t column = 1;

  bool is(std::string_view f, std::size_t arity) const { return !number && functor == f && args.size() == arity; }

  /// Canonical spelling without whitespace; equal terms spell equally.
  std::string str() const
  {
    if (args.empty())
      return functor;
    std::string s = functor + "(";
    for (std::size_t i = 0; i < args.size(); ++i)
      s += (i ? "," : "") + args[i].str();
    return s + ")";
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg + " in " + str(), line, column); }

  friend bool operator==(const Term& a, const Term& b) { return a.str() == b.str(); }
};

inline Term read_term(Lexer& lex)
{
  Term t;
  t.line = lex.peek().line;
  t.column = lex.peek().column;
  if (lex.peek().kind == Token::Kind::Number) {
    t.functor = lex.peek().text;
    t.value = lex.expect_number();
    t.number = true;
    return t;
  }
  t.functor = lex.expect_ident();
  if (lex.accept("(")) {
    do
      t.args.push_back(read_term(lex));
    while (lex.accept(","));
    lex.expect(")");
  }
  return t;
}

/// Parses exactly one term.
inline Term parse_term(std::string_view text)
{
  Lexer lex(text);
  Term t = read_term(lex);
  if (!lex.at_end())
    lex.fail("unexpected " + Lexer::describe(lex.peek()) + " after term");
  return t;
}

/// Parses a sequence of terms, each optionally followed by '.' or ';'.
inline std::vector<Term> parse_terms(std::string_view text)
{
  Lexer lex(text);
  std::vector<Term> out;
  while (!lex.at_end()) {
    out.push_back(read_term(lex));
    if (!lex.accept(";"))
      lex.accept(".");
  }
  return out;
}

} // namespace pipmc
