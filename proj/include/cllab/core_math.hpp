#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cllab/matrix.hpp"
#include "cllab/rng.hpp"

namespace cllab {

// rows x cols matrix of i.i.d. normal entries with the given mean/variance.
// Throws std::invalid_argument on negative variance.
Matrix gaussian_sample(RngState& rng, std::size_t rows, std::size_t cols,
                       double mean, double variance);

// Unscaled cosine similarity in [-1, 1]. Throws std::domain_error when either
// vector has zero norm.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

// log sum_i e^{x_i}, overflow-safe via max subtraction. Throws
// std::invalid_argument on empty input.
double log_sum_exp(std::span<const double> xs);

// Number of singular values exceeding tol. Without an explicit tol:
// tol = max(rows, cols) * machine_epsilon * sigma_max.
std::size_t matrix_rank(const Matrix& m, std::optional<double> tol = std::nullopt);

// Per-column standardization z~ = (z - mean) / std with the N-1 variance
// denominator. Constant columns get std replaced by kConstantColumnEps and a
// zero output column, with the flag recorded.
struct NormalizedBatch {
    Matrix values;
    std::vector<double> col_means;
    std::vector<double> col_stds;            // sigma actually divided by (eps-guarded)
    std::vector<std::uint8_t> constant_col;  // 1 where the guard engaged
    bool has_constant_column = false;
};

inline constexpr double kConstantColumnEps = 1e-12;

NormalizedBatch batch_normalize_columns(const Matrix& z);

// Average (fractional) ranks, 1-based; ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> xs);

// Pearson correlation of average-ranked data. Throws std::domain_error on
// length mismatch, length < 2, or constant input.
double spearman(std::span<const double> xs, std::span<const double> ys);

}  // namespace cllab
