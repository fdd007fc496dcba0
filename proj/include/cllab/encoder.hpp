#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "cllab/corpus.hpp"
#include "cllab/matrix.hpp"
#include "cllab/rng.hpp"

namespace cllab {

// Toy differentiable encoder: token embedding lookup -> mean pooling ->
// dropout -> hidden layer (tanh or linear) -> dropout -> output layer.
struct EncoderConfig {
    std::size_t vocab_size = 30000;
    std::size_t embed_dim = 64;   // E
    std::size_t hidden_dim = 128; // H
    std::size_t out_dim = 64;     // D, configurable up to 768 for rank experiments
    double p_keep = 0.9;          // inverted dropout keep probability
    bool tanh_head = true;        // false selects the linear-head test configuration
};

struct EncoderParams {
    EncoderConfig cfg;
    Matrix token_table;            // V x E
    Matrix hidden_w;               // E x H
    std::vector<double> hidden_b;  // H
    Matrix out_w;                  // H x D
    std::vector<double> out_b;     // D
};

struct ParamGrads {
    Matrix token_table;
    Matrix hidden_w;
    std::vector<double> hidden_b;
    Matrix out_w;
    std::vector<double> out_b;
};

// Explicit keep/drop masks for one forward pass, reproducible from the seed
// recorded at sampling time. Mask entries are 0 or 1; kept units are scaled
// by 1/p_keep at apply time (inverted dropout).
struct DropoutPattern {
    Matrix pool_mask;    // N x E, gates the pooled embedding
    Matrix hidden_mask;  // N x H, gates the post-activation hidden layer
    double p_keep = 0.9;
    std::uint64_t seed = 0;
};

// Forward modes.
struct Dropout {
    RngState rng;
};
struct Deterministic {};  // all units kept, no scaling (weight-scaling inference rule)
struct MeanSampled {      // arithmetic mean of k independent Dropout forwards
    std::size_t k = 10;
    RngState rng;
};
struct DropoutPlusGaussian {  // Dropout forward plus additive Gaussian noise
    RngState rng;
    double variance = 0.1;
};
using ForwardMode = std::variant<Dropout, Deterministic, MeanSampled, DropoutPlusGaussian>;

struct DrawCache {
    std::optional<DropoutPattern> pattern;  // absent in Deterministic draws
    Matrix pooled;   // N x E, pre-dropout
    Matrix mlp_in;   // N x E, post pool-dropout
    Matrix hidden;   // N x H, post activation, pre-dropout
    Matrix head_in;  // N x H, post hidden-dropout
};

struct ForwardCache {
    std::vector<std::vector<std::uint32_t>> token_ids;  // per batch row
    std::vector<DrawCache> draws;                       // 1, or K for MeanSampled
    bool tanh_head = true;
    std::size_t out_dim = 0;
};

// Glorot-uniform weights, zero biases.
EncoderParams init_params(RngState& rng, const EncoderConfig& cfg);

DropoutPattern sample_pattern(RngState& rng, std::size_t batch_rows,
                              const EncoderConfig& cfg);

// N x D embeddings plus the cache needed for backward. Throws
// std::invalid_argument on an empty batch or an empty sequence in the batch.
std::pair<Matrix, ForwardCache> forward(const EncoderParams& params,
                                        std::span<const TokenSequence> batch,
                                        const ForwardMode& mode);

// Deterministic embeddings at the pooling output (the MLP-removed
// evaluation representation).
Matrix pooled_embeddings(const EncoderParams& params,
                         std::span<const TokenSequence> batch);

// Exact gradients of sum_{i,d} grad_out[i,d] * output[i,d] with respect to
// every parameter block, honoring the masks recorded in the cache.
ParamGrads backward(const EncoderParams& params, const ForwardCache& cache,
                    const Matrix& grad_out);

// z plus independent Gaussian noise per entry.
Matrix perturb(const Matrix& z, RngState& rng, double variance);

}  // namespace cllab
