// Lowest eigenpairs of complex Hermitian operators, matrix-free.
//
// Two modes: plain Lanczos with full reorthogonalization and thick
// restarts, and shift-invert Lanczos whose inner solves run preconditioned
// conjugate gradients on (Op - sigma), so no factorization is ever formed.
// Reported residuals are recomputed from the operator, not estimated.
#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "magtube/hermitian.hpp"

namespace magtube {

enum class SolveMode { Lanczos, ShiftInvert };

struct SolveRequest {
  const HermitianOperator* op = nullptr;
  int k = 1;            // number of lowest eigenpairs
  double tol = 1e-9;    // bound on ||Op x - l x|| / (1 + |l|)
  std::optional<double> sigma;  // shift-invert target; when absent, the
                                // operator's spectral lower bound minus one
  int max_iter = 400;   // Lanczos steps, across restarts
  SolveMode mode = SolveMode::Lanczos;
  int max_basis = 0;    // 0 selects max(2k + 16, 36)
  std::uint64_t seed = 0x6d61677475623031ull;  // starting-vector stream
  const std::vector<std::complex<double>>* warm_start = nullptr;
  bool keep_vectors = true;
};

struct SpectrumReport {
  std::vector<double> eigenvalues;  // ascending
  std::vector<double> residuals;    // ||Op x - l x|| / (1 + |l|), recomputed
  std::vector<std::vector<std::complex<double>>> vectors;
  int iterations = 0;
  std::int64_t matvecs = 0;   // operator applications (inner solves included)
  std::uint64_t seed = 0;
  double sigma_used = std::numeric_limits<double>::quiet_NaN();
  int shift_retries = 0;
  std::string op_info;
};

// k lowest eigenpairs per the request. Throws std::invalid_argument on a
// malformed request and std::runtime_error when the iteration budget is
// exhausted (the message carries the best Ritz values and residuals) or
// when the shift cannot be moved off the spectrum within three retries.
SpectrumReport lowest_eigs(const SolveRequest& req);

// Full spectrum of a small operator via a dense Hermitian decomposition;
// the reference path for tests. Vectors and recomputed residuals are kept
// for the lowest keep_vectors pairs. Refuses dimensions above 3000.
SpectrumReport dense_fallback(const HermitianOperator& op,
                              int keep_vectors = 16);

// ------------------------------------------------------------
// Symmetric tridiagonal spectra by Sturm bisection (used for the radial
// disk fibers, and small enough to serve as an independent route).
// diag has n entries, off has n-1.
// ------------------------------------------------------------

// Number of eigenvalues strictly below x.
int tridiag_count_below(const std::vector<double>& diag,
                        const std::vector<double>& off, double x);

// k lowest eigenvalues, ascending, to near machine precision.
std::vector<double> tridiag_lowest(const std::vector<double>& diag,
                                   const std::vector<double>& off, int k);

}  // namespace magtube
