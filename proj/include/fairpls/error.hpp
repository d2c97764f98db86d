#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fairpls {

enum class ErrorKind {
  invalid_argument,
  dimension_mismatch,
  parse,
  io,
  not_centered,
  singular,
  degenerate,
  non_convergence,
  infeasible,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised by the CSV reader and config parser; carries the 1-based position.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t row, std::size_t column)
      : Error(ErrorKind::parse, msg + " (row " + std::to_string(row) + ", column " +
                                    std::to_string(column) + ")"),
        row_(row),
        column_(column) {}
  std::size_t row() const { return row_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

}  // namespace fairpls
