#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "aflora/errors.hpp"

namespace aflora {

/// Dense real matrix, row-major, 64-bit floats. The universal carrier for
/// W, A, B and ΔW throughout the simulator. Zero rows or columns are legal
/// (a fully pruned client uploads an m×0 block).
class Matrix {
public:
    Matrix() = default;

    Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
        if (rows < 0 || cols < 0) {
            throw ShapeError("Matrix: negative dimensions " + shape_string(rows, cols));
        }
        data_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0.0);
    }

    Matrix(int rows, int cols, std::vector<double> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (rows < 0 || cols < 0 ||
            data_.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
            throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_string(rows, cols));
        }
    }

    /// Row-major literal, e.g. Matrix::from_rows({{1,2},{3,4}}).
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const int r = static_cast<int>(rows.size());
        const int c = r == 0 ? 0 : static_cast<int>(rows.begin()->size());
        Matrix out(r, c);
        int i = 0;
        for (const auto& row : rows) {
            if (static_cast<int>(row.size()) != c) {
                throw ShapeError("Matrix::from_rows: ragged rows");
            }
            int j = 0;
            for (double v : row) {
                out(i, j++) = v;
            }
            ++i;
        }
        return out;
    }

    static Matrix identity(int n) {
        Matrix out(n, n);
        for (int i = 0; i < n; ++i) {
            out(i, i) = 1.0;
        }
        return out;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double operator()(int i, int j) const { return data_[index(i, j)]; }
    double& operator()(int i, int j) { return data_[index(i, j)]; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    /// Entry-wise equality. -0.0 == 0.0 compares equal; NaN never does.
    bool operator==(const Matrix& other) const {
        if (!same_shape(other)) {
            return false;
        }
        for (std::size_t i = 0; i < data_.size(); ++i) {
            if (data_[i] != other.data_[i]) {
                return false;
            }
        }
        return true;
    }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
        return true;
    }

    std::string shape() const { return shape_string(rows_, cols_); }

    static std::string shape_string(int r, int c) {
        return std::to_string(r) + "x" + std::to_string(c);
    }

private:
    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(cols_) +
               static_cast<std::size_t>(j);
    }

    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

/// Binary mask over low-rank dimensions; 1 keeps a dim, 0 prunes it.
using Mask = std::vector<std::uint8_t>;

inline int mask_popcount(const Mask& mask) {
    int count = 0;
    for (auto h : mask) {
        count += h != 0 ? 1 : 0;
    }
    return count;
}

}  // namespace aflora
