#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace efl {

// A caller broke a documented precondition (shape, range, sum-to-one, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The Jacobi eigensolver ran out of sweeps.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// Malformed input file content.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing, unreadable, truncated or unwritable file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Not enough samples of some label to satisfy a partition.
class CapacityError : public std::runtime_error {
 public:
  CapacityError(const std::string& what, int label, std::size_t shortfall)
      : std::runtime_error(what), label_(label), shortfall_(shortfall) {}
  int label() const noexcept { return label_; }
  std::size_t shortfall() const noexcept { return shortfall_; }

 private:
  int label_;
  std::size_t shortfall_;
};

// Non-finite loss or gradient during local training.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

// Cosine similarity requested for an all-zero row.
class DegenerateRowError : public std::runtime_error {
 public:
  DegenerateRowError(const std::string& what, std::size_t row)
      : std::runtime_error(what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

template <typename... Args>
void require(bool cond, Args&&... args) {
  if (!cond) throw ContractViolation(concat(std::forward<Args>(args)...));
}

}  // namespace detail
}  // namespace efl
