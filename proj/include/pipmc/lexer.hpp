#pragma once

#include "pipmc/error.hpp"

#include <cctype>
#include <charconv>
#include <string>
#include <string_view>
#include <vector>

namespace pipmc {

struct Token
{
  enum class Kind { Ident, Number, Punct, End };
  Kind kind = Kind::End;
  std::string text;
  std::size_t line = 1;
  std::size_t column = 1;
};

/// Tokenizer shared by the model, formula, and equation readers.
///
/// Identifiers are runs of [A-Za-z0-9_.] that do not start with a digit or a
/// dot; numbers are decimal literals with optional exponent. '#' and '%'
/// start a comment running to end of line.
class Lexer
{
public:
  explicit Lexer(std::string_view text) : text_(text) { advance(); }

  const Token& peek() const { return current_; }

  Token next()
  {
    Token t = current_;
    advance();
    return t;
  }

  bool at_end() const { return current_.kind == Token::Kind::End; }

  bool accept(std::string_view punct_or_word)
  {
    if (current_.kind != Token::Kind::Number && current_.text == punct_or_word) {
      advance();
      return true;
    }
    return false;
  }

  void expect(std::string_view punct_or_word)
  {
    if (!accept(punct_or_word))
      fail("expected '" + std::string(punct_or_word) + "' but found " + describe(current_));
  }

  std::string expect_ident()
  {
    if (current_.kind != Token::Kind::Ident)
      fail("expected identifier but found " + describe(current_));
    return next().text;
  }

  double expect_number()
  {
    if (current_.kind != Token::Kind::Number)
      fail("expected number but found " + describe(current_));
    Token t = next();
    double v = 0;
    auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc{} || ptr != t.text.data() + t.text.size())
      throw ParseError("malformed number '" + t.text + "'", t.line, t.column);
    return v;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, current_.line, current_.column); }

  static std::string describe(const Token& t)
  {
    if (t.kind == Token::Kind::End)
      return "end of input";
    return "'" + t.text + "'";
  }

private:
  static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }

  char at(std::size_t i) const { return i < text_.size() ? text_[i] : '\0'; }

  void bump()
  {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void advance()
  {
    for (;;) {
      while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
        bump();
      if (pos_ < text_.size() && (text_[pos_] == '#' || text_[pos_] == '%')) {
        while (pos_ < text_.size() && text_[pos_] != '\n')
          bump();
        continue;
      }
      break;
    }
    current_ = Token{};
    current_.line = line_;
    current_.column = col_;
    if (pos_ >= text_.size())
      return;

    std::size_t start = pos_;
    char c = text_[pos_];
    bool number_start = std::isdigit(static_cast<unsigned char>(c)) ||
                        (c == '.' && std::isdigit(static_cast<unsigned char>(at(pos_ + 1))));
    if (number_start) {
      while (std::isdigit(static_cast<unsigned char>(at(pos_))) || at(pos_) == '.')
        bump();
      if (at(pos_) == 'e' || at(pos_) == 'E') {
        std::size_t save = pos_, save_col = col_;
        bump();
        if (at(pos_) == '+' || at(pos_) == '-')
          bump();
        if (!std::isdigit(static_cast<unsigned char>(at(pos_)))) {
          pos_ = save; // not an exponent after all
          col_ = save_col;
        } else {
          while (std::isdigit(static_cast<unsigned char>(at(pos_))))
            bump();
        }
      }
      current_.kind = Token::Kind::Number;
    } else if (ident_char(c)) {
      while (pos_ < text_.size() && ident_char(text_[pos_]))
        bump();
      current_.kind = Token::Kind::Ident;
    } else {
      bump();
      current_.kind = Token::Kind::Punct;
    }
    current_.text = std::string(text_.substr(start, pos_ - start));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
  Token current_;
};

} // namespace pipmc
