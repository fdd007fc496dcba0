#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cllab {

// Dense row-major matrix of 64-bit reals. Rows index samples (batch size N),
// columns index feature dimensions (D).
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;  // row-major, size rows*cols

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), values(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {values.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

bool all_finite(const Matrix& m);

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);

// C = A^T * B
Matrix matmul_at_b(const Matrix& a, const Matrix& b);

// C = A * B^T
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);

}  // namespace cllab
