#include "cllab/core_math.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace cllab {

Matrix gaussian_sample(RngState& rng, std::size_t rows, std::size_t cols,
                       double mean, double variance) {
    if (variance < 0.0) throw std::invalid_argument("gaussian_sample: negative variance");
    const double sd = std::sqrt(variance);
    Matrix m(rows, cols);
    for (double& v : m.values) v = mean + sd * next_normal(rng);
    return m;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size())
        throw std::invalid_argument("cosine_similarity: dimension mismatch");
    double uu = 0.0, vv = 0.0, uv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uu += u[i] * u[i];
        vv += v[i] * v[i];
        uv += u[i] * v[i];
    }
    if (uu == 0.0 || vv == 0.0)
        throw std::domain_error("cosine_similarity: zero-norm input");
    double c = uv / (std::sqrt(uu) * std::sqrt(vv));
    return std::clamp(c, -1.0, 1.0);
}

double log_sum_exp(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("log_sum_exp: empty input");
    double m = *std::max_element(xs.begin(), xs.end());
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - m);
    return m + std::log(acc);
}

std::size_t matrix_rank(const Matrix& m, std::optional<double> tol) {
    if (!all_finite(m)) throw std::invalid_argument("matrix_rank: non-finite entries");
    if (m.rows == 0 || m.cols == 0) return 0;
    using EigenRowMajor =
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const EigenRowMajor> map(m.values.data(),
                                        static_cast<Eigen::Index>(m.rows),
                                        static_cast<Eigen::Index>(m.cols));
    Eigen::BDCSVD<Eigen::MatrixXd> svd(map);
    const auto& sv = svd.singularValues();
    double threshold = tol.value_or(static_cast<double>(std::max(m.rows, m.cols)) *
                                    std::numeric_limits<double>::epsilon() * sv(0));
    std::size_t rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > threshold) ++rank;
    }
    return rank;
}

NormalizedBatch batch_normalize_columns(const Matrix& z) {
    const std::size_t n = z.rows, d = z.cols;
    if (n < 2) throw std::invalid_argument("batch_normalize_columns: needs N >= 2 rows");
    NormalizedBatch out;
    out.values = Matrix(n, d);
    out.col_means.resize(d);
    out.col_stds.resize(d);
    out.constant_col.assign(d, 0);
    for (std::size_t c = 0; c < d; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += z(i, c);
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double dlt = z(i, c) - mean;
            ss += dlt * dlt;
        }
        double sigma = std::sqrt(ss / static_cast<double>(n - 1));
        if (sigma < kConstantColumnEps) {
            sigma = kConstantColumnEps;
            out.constant_col[c] = 1;
            out.has_constant_column = true;
        }
        out.col_means[c] = mean;
        out.col_stds[c] = sigma;
        for (std::size_t i = 0; i < n; ++i)
            out.values(i, c) = (z(i, c) - mean) / sigma;
    }
    return out;
}

std::vector<double> average_ranks(std::span<const double> xs) {
    const std::size_t n = xs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
        // positions i..j (0-based) tie: average of 1-based ranks i+1..j+1
        double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size())
        throw std::domain_error("spearman: length mismatch");
    if (xs.size() < 2) throw std::domain_error("spearman: needs at least 2 points");
    auto rx = average_ranks(xs);
    auto ry = average_ranks(ys);
    const double n = static_cast<double>(rx.size());
    double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double num = 0.0, dx = 0.0, dy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        double a = rx[i] - mx, b = ry[i] - my;
        num += a * b;
        dx += a * a;
        dy += b * b;
    }
    if (dx == 0.0 || dy == 0.0)
        throw std::domain_error("spearman: constant input");
    return num / std::sqrt(dx * dy);
}

}  // namespace cllab
