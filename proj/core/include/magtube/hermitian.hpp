// Abstract complex Hermitian operator: the matrix-free currency between
// the assembly code and the eigensolver.
#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace magtube {

// Explicit sparse storage (optional capability), compressed sparse rows.
struct Csr {
  std::int64_t n = 0;
  std::vector<std::int64_t> row_ptr;  // size n+1
  std::vector<std::int64_t> col;
  std::vector<std::complex<double>> val;
};

class HermitianOperator {
 public:
  virtual ~HermitianOperator() = default;

  virtual std::int64_t dim() const = 0;

  // y = Op x. Must be safe to call concurrently; may parallelize
  // internally over rows.
  virtual void apply(const std::complex<double>* x,
                     std::complex<double>* y) const = 0;

  // Real diagonal, if cheaply available (used for preconditioning).
  virtual const std::vector<double>* diagonal() const { return nullptr; }

  // A certified lower bound on the spectrum (Gershgorin for stencils), if
  // available. Used to pick default shifts for bound-state hunts.
  virtual std::optional<double> spectral_lower_bound() const {
    return std::nullopt;
  }

  // Explicit rows, if the operator can materialize them.
  virtual std::optional<Csr> to_csr() const { return std::nullopt; }

  // One-line discretization metadata, echoed into solver reports.
  virtual std::string describe() const { return "operator"; }

  void apply(const std::vector<std::complex<double>>& x,
             std::vector<std::complex<double>>& y) const {
    y.resize(x.size());
    apply(x.data(), y.data());
  }
};

}  // namespace magtube
