#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cllab/encoder.hpp"
#include "cllab/matrix.hpp"
#include "cllab/rng.hpp"

namespace cllab {

struct RankReport {
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t observed_rank = 0;
    std::size_t bound = 0;  // min(N, D)
    std::vector<std::pair<std::size_t, std::size_t>> padded_rank;  // (M, rank)
};

struct VarianceReport {
    double single_draw_variance = 0.0;
    std::size_t k = 0;
    double mean_of_k_variance = 0.0;
    double ratio = 0.0;  // 0 when the single-draw variance is exactly 0
};

struct GeometryReport {
    double alignment = 0.0;
    double uniformity = 0.0;
};

// Rank of cross_correlation(z1, z2) plus the rank of each padded variant.
RankReport rank_report(const Matrix& z1, const Matrix& z2,
                       std::span<const std::size_t> pad_list, RngState& rng);

// Per-coordinate empirical variance of single Dropout forwards versus means
// of K Dropout forwards, averaged over coordinates, over `draws` Monte-Carlo
// repetitions each. Per-draw rng streams are split from the root.
VarianceReport variance_report(const EncoderParams& params,
                               std::span<const TokenSequence> batch,
                               std::size_t k, std::size_t draws, RngState& rng);

// Same measurement over repeated forwards of an arbitrary mode; used for the
// deterministic-mode zero-variance check.
double mean_coordinate_variance(std::span<const Matrix> samples);

// Mean over i of ||z1_i - z2_i||^2 on unit-normalized rows.
double alignment(const Matrix& z1, const Matrix& z2);

// log mean over i != j of e^{-2 ||z_i - z_j||^2} on unit-normalized rows.
double uniformity(const Matrix& z);

// Flat JSON objects with snake_case keys matching the field names.
std::string to_json(const RankReport& r);
std::string to_json(const VarianceReport& r);
std::string to_json(const GeometryReport& r);

}  // namespace cllab
