#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ncmfe {

/// Argument outside the mathematical domain of an operation (inverted
/// deformation gradient, log-branch argument, ...).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration, weight file, mesh file or mismatched sizes.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure at one entry of a material batch.
class PointError : public DomainError {
 public:
  PointError(std::size_t index, const std::string& what)
      : DomainError("point " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Failure at a quadrature point during assembly.
class AssemblyError : public DomainError {
 public:
  AssemblyError(std::size_t element, std::size_t qp, int worker, const std::string& what)
      : DomainError(describe(element, qp, worker) + what),
        element_(element), qp_(qp), worker_(worker) {}
  std::size_t element() const noexcept { return element_; }
  std::size_t qp() const noexcept { return qp_; }
  /// -1 outside partitioned assembly.
  int worker() const noexcept { return worker_; }

 private:
  static std::string describe(std::size_t e, std::size_t q, int w) {
    std::string s = "element " + std::to_string(e) + ", qp " + std::to_string(q);
    if (w >= 0) s += ", worker " + std::to_string(w);
    return s + ": ";
  }
  std::size_t element_;
  std::size_t qp_;
  int worker_;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ncmfe
