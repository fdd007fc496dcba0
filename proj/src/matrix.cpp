#include "cllab/matrix.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace cllab {

namespace {

using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const EigenRowMajor>;
using Map = Eigen::Map<EigenRowMajor>;

ConstMap as_eigen(const Matrix& m) {
    return ConstMap(m.values.data(), static_cast<Eigen::Index>(m.rows),
                    static_cast<Eigen::Index>(m.cols));
}

}  // namespace

bool all_finite(const Matrix& m) {
    for (double v : m.values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dimensions disagree");
    Matrix c(a.rows, b.cols);
    Map(c.values.data(), static_cast<Eigen::Index>(c.rows),
        static_cast<Eigen::Index>(c.cols)) = as_eigen(a) * as_eigen(b);
    return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) throw std::invalid_argument("matmul_at_b: row counts disagree");
    Matrix c(a.cols, b.cols);
    Map(c.values.data(), static_cast<Eigen::Index>(c.rows),
        static_cast<Eigen::Index>(c.cols)) = as_eigen(a).transpose() * as_eigen(b);
    return c;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols) throw std::invalid_argument("matmul_a_bt: column counts disagree");
    Matrix c(a.rows, b.rows);
    Map(c.values.data(), static_cast<Eigen::Index>(c.rows),
        static_cast<Eigen::Index>(c.cols)) = as_eigen(a) * as_eigen(b).transpose();
    return c;
}

}  // namespace cllab
