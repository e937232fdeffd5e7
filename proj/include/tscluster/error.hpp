#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tscluster {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or violated precondition.
class InvalidInput : public Error {
public:
  using Error::Error;
};

/// Malformed delimited text; carries the 1-based line number of the offending row.
class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Numerical failure (factorization, non-finite values).
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Error surfaced by the pipeline, tagged with the stage that raised it.
class StageError : public Error {
public:
  StageError(std::string stage, const std::string& cause)
      : Error("[" + stage + "] " + cause), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

private:
  std::string stage_;
};

} // namespace tscluster
