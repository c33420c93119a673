#pragma once

#include <cstdint>
#include <vector>

#include "aflora/matrix.hpp"
#include "aflora/rng.hpp"

namespace aflora {

/// Thin SVD of an m×n input: u is m×r, v is n×r with r = min(m, n),
/// sigma is non-increasing and non-negative. u and v are column-orthogonal
/// even when trailing singular values are zero.
struct SvdResult {
    Matrix u;
    std::vector<double> sigma;
    Matrix v;
};

/// Standard product a·b. Throws ShapeError naming both shapes on mismatch.
/// Accumulation runs in ascending inner-index order for every output entry,
/// so appending zero columns/rows to the operands cannot perturb a result.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

/// sqrt of the sum of squared entries.
double frobenius_norm(const Matrix& a);

/// One-sided Jacobi SVD. Off-diagonal convergence threshold 1e-12 (relative),
/// capped at 100 sweeps; throws NumericalError when the cap is hit.
SvdResult svd(const Matrix& a);

/// Re-embed a compact column block into a wider matrix: column j of the
/// result is the next unused column of `a` where mask[j] == 1, a zero column
/// where mask[j] == 0, and zero beyond the mask length. The count of ones in
/// mask must equal a.cols and the mask must not be longer than target_cols.
Matrix zero_pad_cols(const Matrix& a, int target_cols, const Mask& mask);

// Small helpers shared by the federated modules.

/// a + scale·b (shapes must match).
Matrix add_scaled(const Matrix& a, const Matrix& b, double scale = 1.0);

/// a += scale·b in place.
void accumulate(Matrix& a, const Matrix& b, double scale = 1.0);

Matrix scaled(const Matrix& a, double scale);

double row_l2_norm(const Matrix& a, int row);
double col_l2_norm(const Matrix& a, int col);

/// Scale every row to the target ℓ₂ norm. Zero rows are left untouched.
void normalize_rows(Matrix& a, double target_norm);

/// First `count` rows as a new matrix.
Matrix take_rows(const Matrix& a, int count);

/// FNV-1a over the raw entry bytes; used to assert frozen weights stay frozen.
std::uint64_t matrix_checksum(const Matrix& a);

/// Entries drawn i.i.d. standard normal from `rng`, row-major order.
Matrix random_normal(int rows, int cols, Rng& rng);

}  // namespace aflora
