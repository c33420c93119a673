#include "aflora/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "aflora/errors.hpp"

namespace aflora {

namespace {

constexpr double kJacobiRelTol = 1e-12;
constexpr int kJacobiMaxSweeps = 100;

// Relative cutoff below which a singular value collapses to exactly zero.
constexpr double kSigmaZeroRel = 1e-13;

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ, " + a.shape() +
                         " vs " + b.shape());
    }
    Matrix c(a.rows(), b.cols());
    // i-k-j loop order: per output entry the k-sum still runs in ascending
    // order. Skipping exact-zero a(i,k) terms makes padding operands with
    // zero columns/rows reproduce the unpadded product bit for bit.
    for (int i = 0; i < a.rows(); ++i) {
        for (int k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) {
                continue;
            }
            for (int j = 0; j < b.cols(); ++j) {
                c(i, j) += aik * b(k, j);
            }
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < a.cols(); ++j) {
            t(j, i) = a(i, j);
        }
    }
    return t;
}

double frobenius_norm(const Matrix& a) {
    double sum = 0.0;
    for (double x : a.data()) {
        sum += x * x;
    }
    return std::sqrt(sum);
}

namespace {

double column_dot(const Matrix& m, int p, int q) {
    double s = 0.0;
    for (int i = 0; i < m.rows(); ++i) {
        s += m(i, p) * m(i, q);
    }
    return s;
}

void rotate_columns(Matrix& m, int p, int q, double c, double s) {
    for (int i = 0; i < m.rows(); ++i) {
        const double mp = m(i, p);
        const double mq = m(i, q);
        m(i, p) = c * mp - s * mq;
        m(i, q) = s * mp + c * mq;
    }
}

// Orthonormal fill-in for U columns whose singular value is exactly zero.
// Picks, per hole, the coordinate axis with the largest residual after
// projecting out every already-settled column.
void complete_basis(Matrix& u, const std::vector<int>& holes) {
    for (int col : holes) {
        double best_norm = -1.0;
        std::vector<double> best(static_cast<std::size_t>(u.rows()), 0.0);
        for (int axis = 0; axis < u.rows(); ++axis) {
            std::vector<double> cand(static_cast<std::size_t>(u.rows()), 0.0);
            cand[static_cast<std::size_t>(axis)] = 1.0;
            for (int j = 0; j < u.cols(); ++j) {
                if (j == col) {
                    continue;
                }
                double proj = 0.0;
                for (int i = 0; i < u.rows(); ++i) {
                    proj += cand[static_cast<std::size_t>(i)] * u(i, j);
                }
                for (int i = 0; i < u.rows(); ++i) {
                    cand[static_cast<std::size_t>(i)] -= proj * u(i, j);
                }
            }
            double norm = 0.0;
            for (double x : cand) {
                norm += x * x;
            }
            norm = std::sqrt(norm);
            if (norm > best_norm) {
                best_norm = norm;
                best = cand;
            }
            if (norm > 0.5) {
                break;  // good enough; axes are tried in a fixed order
            }
        }
        if (best_norm <= 0.0) {
            throw NumericalError("svd: basis completion failed");
        }
        for (int i = 0; i < u.rows(); ++i) {
            u(i, col) = best[static_cast<std::size_t>(i)] / best_norm;
        }
        // One re-orthogonalization pass against the settled set for stability.
        for (int j = 0; j < u.cols(); ++j) {
            if (j == col) {
                continue;
            }
            double proj = 0.0;
            for (int i = 0; i < u.rows(); ++i) {
                proj += u(i, col) * u(i, j);
            }
            for (int i = 0; i < u.rows(); ++i) {
                u(i, col) -= proj * u(i, j);
            }
        }
        double norm = 0.0;
        for (int i = 0; i < u.rows(); ++i) {
            norm += u(i, col) * u(i, col);
        }
        norm = std::sqrt(norm);
        for (int i = 0; i < u.rows(); ++i) {
            u(i, col) /= norm;
        }
    }
}

// Jacobi on columns; requires rows >= cols.
SvdResult svd_tall(const Matrix& a) {
    const int m = a.rows();
    const int n = a.cols();
    Matrix u = a;
    Matrix v = Matrix::identity(n);

    bool converged = false;
    for (int sweep = 0; sweep < kJacobiMaxSweeps && !converged; ++sweep) {
        converged = true;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double alpha = column_dot(u, p, p);
                const double beta = column_dot(u, q, q);
                const double gamma = column_dot(u, p, q);
                if (std::abs(gamma) <= kJacobiRelTol * std::sqrt(alpha * beta)) {
                    continue;
                }
                converged = false;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                rotate_columns(u, p, q, c, s);
                rotate_columns(v, p, q, c, s);
            }
        }
    }
    if (!converged) {
        throw NumericalError("svd: Jacobi sweep cap reached without convergence");
    }

    std::vector<double> sigma(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        sigma[static_cast<std::size_t>(j)] = std::sqrt(column_dot(u, j, j));
    }

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
        return sigma[static_cast<std::size_t>(i)] > sigma[static_cast<std::size_t>(j)];
    });

    Matrix u_sorted(m, n);
    Matrix v_sorted(n, n);
    std::vector<double> sigma_sorted(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const int src = order[static_cast<std::size_t>(j)];
        sigma_sorted[static_cast<std::size_t>(j)] = sigma[static_cast<std::size_t>(src)];
        for (int i = 0; i < m; ++i) {
            u_sorted(i, j) = u(i, src);
        }
        for (int i = 0; i < n; ++i) {
            v_sorted(i, j) = v(i, src);
        }
    }

    const double zero_tol = kSigmaZeroRel * sigma_sorted[0];
    std::vector<int> holes;
    for (int j = 0; j < n; ++j) {
        if (sigma_sorted[static_cast<std::size_t>(j)] <= zero_tol) {
            sigma_sorted[static_cast<std::size_t>(j)] = 0.0;
            for (int i = 0; i < m; ++i) {
                u_sorted(i, j) = 0.0;
            }
            holes.push_back(j);
        } else {
            const double inv = 1.0 / sigma_sorted[static_cast<std::size_t>(j)];
            for (int i = 0; i < m; ++i) {
                u_sorted(i, j) *= inv;
            }
        }
    }
    if (!holes.empty()) {
        complete_basis(u_sorted, holes);
    }

    return SvdResult{std::move(u_sorted), std::move(sigma_sorted), std::move(v_sorted)};
}

}  // namespace

SvdResult svd(const Matrix& a) {
    if (!a.all_finite()) {
        throw NumericalError("svd: input has non-finite entries");
    }
    if (a.rows() == 0 || a.cols() == 0) {
        return SvdResult{Matrix(a.rows(), 0), {}, Matrix(a.cols(), 0)};
    }
    if (a.rows() >= a.cols()) {
        return svd_tall(a);
    }
    SvdResult r = svd_tall(transpose(a));
    std::swap(r.u, r.v);
    return r;
}

Matrix zero_pad_cols(const Matrix& a, int target_cols, const Mask& mask) {
    if (target_cols < 0) {
        throw ShapeError("zero_pad_cols: negative target width");
    }
    if (static_cast<int>(mask.size()) > target_cols) {
        throw ShapeError("zero_pad_cols: mask of length " +
                         std::to_string(mask.size()) + " exceeds target width " +
                         std::to_string(target_cols));
    }
    if (mask_popcount(mask) != a.cols()) {
        throw ShapeError("zero_pad_cols: mask selects " +
                         std::to_string(mask_popcount(mask)) +
                         " columns, input has " + std::to_string(a.cols()));
    }
    Matrix out(a.rows(), target_cols);
    int src = 0;
    for (std::size_t j = 0; j < mask.size(); ++j) {
        if (!mask[j]) {
            continue;
        }
        for (int i = 0; i < a.rows(); ++i) {
            out(i, static_cast<int>(j)) = a(i, src);
        }
        ++src;
    }
    return out;
}

Matrix add_scaled(const Matrix& a, const Matrix& b, double scale) {
    if (!a.same_shape(b)) {
        throw ShapeError("add_scaled: " + a.shape() + " vs " + b.shape());
    }
    Matrix c = a;
    for (std::size_t i = 0; i < c.data().size(); ++i) {
        c.data()[i] += scale * b.data()[i];
    }
    return c;
}

void accumulate(Matrix& a, const Matrix& b, double scale) {
    if (!a.same_shape(b)) {
        throw ShapeError("accumulate: " + a.shape() + " vs " + b.shape());
    }
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        a.data()[i] += scale * b.data()[i];
    }
}

Matrix scaled(const Matrix& a, double scale) {
    Matrix c = a;
    for (double& x : c.data()) {
        x *= scale;
    }
    return c;
}

double row_l2_norm(const Matrix& a, int row) {
    double s = 0.0;
    for (int j = 0; j < a.cols(); ++j) {
        s += a(row, j) * a(row, j);
    }
    return std::sqrt(s);
}

double col_l2_norm(const Matrix& a, int col) {
    double s = 0.0;
    for (int i = 0; i < a.rows(); ++i) {
        s += a(i, col) * a(i, col);
    }
    return std::sqrt(s);
}

void normalize_rows(Matrix& a, double target_norm) {
    for (int i = 0; i < a.rows(); ++i) {
        const double norm = row_l2_norm(a, i);
        if (norm == 0.0) {
            continue;
        }
        const double scale = target_norm / norm;
        for (int j = 0; j < a.cols(); ++j) {
            a(i, j) *= scale;
        }
    }
}

Matrix take_rows(const Matrix& a, int count) {
    if (count < 0 || count > a.rows()) {
        throw ShapeError("take_rows: want " + std::to_string(count) +
                         " rows from " + a.shape());
    }
    Matrix out(count, a.cols());
    std::copy(a.data().begin(),
              a.data().begin() + static_cast<std::ptrdiff_t>(count) * a.cols(),
              out.data().begin());
    return out;
}

std::uint64_t matrix_checksum(const Matrix& a) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a offset basis
    auto mix = [&h](const unsigned char* bytes, std::size_t len) {
        for (std::size_t i = 0; i < len; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    };
    const std::uint64_t shape[2] = {static_cast<std::uint64_t>(a.rows()),
                                    static_cast<std::uint64_t>(a.cols())};
    mix(reinterpret_cast<const unsigned char*>(shape), sizeof(shape));
    if (!a.data().empty()) {
        mix(reinterpret_cast<const unsigned char*>(a.data().data()),
            a.data().size() * sizeof(double));
    }
    return h;
}

Matrix random_normal(int rows, int cols, Rng& rng) {
    Matrix m(rows, cols);
    for (double& x : m.data()) {
        x = rng.normal();
    }
    return m;
}

}  // namespace aflora
