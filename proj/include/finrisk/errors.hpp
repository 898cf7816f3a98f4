#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace finrisk {

// Operand shapes disagree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// API called out of order (e.g. backward without a forward tape).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed input file. `line` is 1-based; 0 when not attributable to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Semantically invalid input; carries every offending item.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what, std::vector<std::string> offenders = {})
      : std::runtime_error(what), offenders_(std::move(offenders)) {}
  const std::vector<std::string>& offenders() const noexcept { return offenders_; }

 private:
  std::vector<std::string> offenders_;
};

// Training produced a non-finite loss. `epoch` is 1-based.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t epoch, std::vector<double> losses)
      : std::runtime_error("training diverged (non-finite loss) in epoch " + std::to_string(epoch)),
        epoch_(epoch),
        losses_(std::move(losses)) {}
  std::size_t epoch() const noexcept { return epoch_; }
  // Per-epoch losses completed before the abort.
  const std::vector<double>& losses() const noexcept { return losses_; }

 private:
  std::size_t epoch_;
  std::vector<double> losses_;
};

// Least-squares estimation failed; `column` names the regressor responsible.
class EstimationError : public std::runtime_error {
 public:
  EstimationError(std::string column, const std::string& what)
      : std::runtime_error(what), column_(std::move(column)) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

}  // namespace finrisk
