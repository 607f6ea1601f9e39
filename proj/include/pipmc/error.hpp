#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pipmc {

/// Base class of every error raised by the engine.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Malformed model or formula text. Carries a 1-based position.
class ParseError : public Error
{
public:
  ParseError(const std::string& msg, std::size_t line, std::size_t column)
      : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
        line_(line), column_(column)
  {
  }

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

private:
  std::size_t line_;
  std::size_t column_;
};

/// Text parsed fine but violates a model invariant.
class ModelError : public Error
{
public:
  using Error::Error;
};

class ExpansionError : public Error
{
public:
  using Error::Error;
};

/// Raised when FED construction exceeds its merge or depth caps.
class FactoringError : public Error
{
public:
  using Error::Error;
};

class AlternationError : public Error
{
public:
  using Error::Error;
};

/// The solver hit its iteration cap. Carries the last iterate.
class ConvergenceError : public Error
{
public:
  ConvergenceError(const std::string& msg, std::vector<double> last) : Error(msg), last_(std::move(last)) {}

  const std::vector<double>& last_iterate() const { return last_; }

private:
  std::vector<double> last_;
};

} // namespace pipmc
