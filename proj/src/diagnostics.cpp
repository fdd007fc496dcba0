#include "cllab/diagnostics.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "cllab/core_math.hpp"
#include "cllab/objectives.hpp"

namespace cllab {

namespace {

Matrix unit_row_normalize(const Matrix& z, const char* what) {
    Matrix out = z;
    for (std::size_t i = 0; i < z.rows; ++i) {
        double ss = 0.0;
        for (double v : z.row(i)) ss += v * v;
        if (ss == 0.0)
            throw std::domain_error(std::string(what) + ": zero-norm row " +
                                    std::to_string(i));
        double inv = 1.0 / std::sqrt(ss);
        for (double& v : out.row(i)) v *= inv;
    }
    return out;
}

}  // namespace

RankReport rank_report(const Matrix& z1, const Matrix& z2,
                       std::span<const std::size_t> pad_list, RngState& rng) {
    RankReport report;
    report.n = z1.rows;
    report.d = z1.cols;
    report.bound = std::min(z1.rows, z1.cols);
    report.observed_rank = matrix_rank(cross_correlation(z1, z2).values);
    for (std::size_t m : pad_list) {
        PaddedViews padded = pad_artificial(z1, z2, m, rng);
        std::size_t r = matrix_rank(cross_correlation(padded.z1, padded.z2).values);
        report.padded_rank.emplace_back(m, r);
    }
    return report;
}

double mean_coordinate_variance(std::span<const Matrix> samples) {
    if (samples.size() < 2)
        throw std::invalid_argument("mean_coordinate_variance: needs >= 2 samples");
    const std::size_t coords = samples[0].values.size();
    const double n = static_cast<double>(samples.size());
    double total = 0.0;
    for (std::size_t c = 0; c < coords; ++c) {
        // Shifted two-pass: exact zero when every sample is bit-identical.
        const double ref = samples[0].values[c];
        double mean = 0.0;
        for (const Matrix& s : samples) mean += s.values[c] - ref;
        mean /= n;
        double ss = 0.0;
        for (const Matrix& s : samples) {
            double d = (s.values[c] - ref) - mean;
            ss += d * d;
        }
        total += ss / (n - 1.0);
    }
    return total / static_cast<double>(coords);
}

VarianceReport variance_report(const EncoderParams& params,
                               std::span<const TokenSequence> batch,
                               std::size_t k, std::size_t draws, RngState& rng) {
    if (k < 1) throw std::invalid_argument("variance_report: K must be >= 1");
    if (draws < 100) throw std::invalid_argument("variance_report: needs >= 100 draws");

    std::vector<Matrix> singles;
    singles.reserve(draws);
    for (std::size_t d = 0; d < draws; ++d) {
        RngState draw_rng = split_stream(rng, d);
        singles.push_back(forward(params, batch, Dropout{draw_rng}).first);
    }
    std::vector<Matrix> means;
    means.reserve(draws);
    for (std::size_t d = 0; d < draws; ++d) {
        RngState draw_rng = split_stream(rng, draws + d);
        means.push_back(forward(params, batch, MeanSampled{k, draw_rng}).first);
    }

    VarianceReport report;
    report.k = k;
    report.single_draw_variance = mean_coordinate_variance(singles);
    report.mean_of_k_variance = mean_coordinate_variance(means);
    report.ratio = report.single_draw_variance == 0.0
                       ? 0.0
                       : report.mean_of_k_variance / report.single_draw_variance;
    return report;
}

double alignment(const Matrix& z1, const Matrix& z2) {
    if (!z1.same_shape(z2)) throw std::invalid_argument("alignment: shape mismatch");
    if (z1.rows == 0) throw std::invalid_argument("alignment: empty batch");
    Matrix a = unit_row_normalize(z1, "alignment");
    Matrix b = unit_row_normalize(z2, "alignment");
    double total = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i) {
        double ss = 0.0;
        for (std::size_t c = 0; c < a.cols; ++c) {
            double d = a(i, c) - b(i, c);
            ss += d * d;
        }
        total += ss;
    }
    return total / static_cast<double>(a.rows);
}

double uniformity(const Matrix& z) {
    if (z.rows < 2) throw std::invalid_argument("uniformity: needs N >= 2");
    Matrix u = unit_row_normalize(z, "uniformity");
    double acc = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < u.rows; ++i) {
        for (std::size_t j = 0; j < u.rows; ++j) {
            if (i == j) continue;
            double ss = 0.0;
            for (std::size_t c = 0; c < u.cols; ++c) {
                double d = u(i, c) - u(j, c);
                ss += d * d;
            }
            acc += std::exp(-2.0 * ss);
            ++pairs;
        }
    }
    return std::log(acc / static_cast<double>(pairs));
}

std::string to_json(const RankReport& r) {
    nlohmann::json j;
    j["n"] = r.n;
    j["d"] = r.d;
    j["observed_rank"] = r.observed_rank;
    j["bound"] = r.bound;
    nlohmann::json padded = nlohmann::json::array();
    for (const auto& [m, rank] : r.padded_rank)
        padded.push_back({{"m", m}, {"rank", rank}});
    j["padded_rank"] = padded;
    return j.dump();
}

std::string to_json(const VarianceReport& r) {
    nlohmann::json j;
    j["single_draw_variance"] = r.single_draw_variance;
    j["k"] = r.k;
    j["mean_of_k_variance"] = r.mean_of_k_variance;
    j["ratio"] = r.ratio;
    return j.dump();
}

std::string to_json(const GeometryReport& r) {
    nlohmann::json j;
    j["alignment"] = r.alignment;
    j["uniformity"] = r.uniformity;
    return j.dump();
}

}  // namespace cllab
