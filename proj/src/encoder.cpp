#include "cllab/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "cllab/core_math.hpp"

namespace cllab {

namespace {

Matrix glorot_uniform(RngState& rng, std::size_t fan_in, std::size_t fan_out,
                      std::size_t rows, std::size_t cols) {
    double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix m(rows, cols);
    for (double& v : m.values) v = a * (2.0 * next_uniform(rng) - 1.0);
    return m;
}

void apply_mask(const Matrix& mask, double p_keep, Matrix& activations) {
    const double scale = 1.0 / p_keep;
    for (std::size_t i = 0; i < activations.values.size(); ++i)
        activations.values[i] *= mask.values[i] * scale;
}

void add_row_bias(Matrix& m, const std::vector<double>& b) {
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) m(i, j) += b[j];
}

Matrix mean_pool(const EncoderParams& params,
                 std::span<const TokenSequence> batch) {
    const auto& cfg = params.cfg;
    Matrix pooled(batch.size(), cfg.embed_dim);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& ids = batch[i].ids;
        if (ids.empty()) throw std::invalid_argument("forward: empty sequence in batch");
        double inv = 1.0 / static_cast<double>(ids.size());
        for (std::uint32_t t : ids) {
            if (t >= cfg.vocab_size)
                throw std::invalid_argument("forward: token id outside vocabulary");
            auto row = params.token_table.row(t);
            for (std::size_t e = 0; e < cfg.embed_dim; ++e) pooled(i, e) += row[e] * inv;
        }
    }
    return pooled;
}

// One encoder pass with an optional frozen dropout pattern.
Matrix run_draw(const EncoderParams& params, const Matrix& pooled,
                const std::optional<DropoutPattern>& pattern, DrawCache& cache) {
    const auto& cfg = params.cfg;
    cache.pattern = pattern;
    cache.pooled = pooled;

    Matrix mlp_in = pooled;
    if (pattern) apply_mask(pattern->pool_mask, pattern->p_keep, mlp_in);
    cache.mlp_in = mlp_in;

    Matrix hidden = matmul(mlp_in, params.hidden_w);
    add_row_bias(hidden, params.hidden_b);
    if (cfg.tanh_head) {
        for (double& v : hidden.values) v = std::tanh(v);
    }
    cache.hidden = hidden;

    Matrix head_in = hidden;
    if (pattern) apply_mask(pattern->hidden_mask, pattern->p_keep, head_in);
    cache.head_in = head_in;

    Matrix out = matmul(head_in, params.out_w);
    add_row_bias(out, params.out_b);
    return out;
}

}  // namespace

EncoderParams init_params(RngState& rng, const EncoderConfig& cfg) {
    if (cfg.vocab_size < 2 || cfg.embed_dim == 0 || cfg.hidden_dim == 0 || cfg.out_dim == 0)
        throw std::invalid_argument("init_params: degenerate encoder shape");
    if (cfg.p_keep <= 0.0 || cfg.p_keep > 1.0)
        throw std::invalid_argument("init_params: p_keep must be in (0, 1]");
    EncoderParams p;
    p.cfg = cfg;
    p.token_table = glorot_uniform(rng, cfg.vocab_size, cfg.embed_dim,
                                   cfg.vocab_size, cfg.embed_dim);
    p.hidden_w = glorot_uniform(rng, cfg.embed_dim, cfg.hidden_dim,
                                cfg.embed_dim, cfg.hidden_dim);
    p.hidden_b.assign(cfg.hidden_dim, 0.0);
    p.out_w = glorot_uniform(rng, cfg.hidden_dim, cfg.out_dim,
                             cfg.hidden_dim, cfg.out_dim);
    p.out_b.assign(cfg.out_dim, 0.0);
    return p;
}

DropoutPattern sample_pattern(RngState& rng, std::size_t batch_rows,
                              const EncoderConfig& cfg) {
    DropoutPattern pat;
    pat.p_keep = cfg.p_keep;
    pat.seed = rng.seed;
    pat.pool_mask = Matrix(batch_rows, cfg.embed_dim);
    for (double& v : pat.pool_mask.values) v = (next_uniform(rng) < cfg.p_keep) ? 1.0 : 0.0;
    pat.hidden_mask = Matrix(batch_rows, cfg.hidden_dim);
    for (double& v : pat.hidden_mask.values) v = (next_uniform(rng) < cfg.p_keep) ? 1.0 : 0.0;
    return pat;
}

std::pair<Matrix, ForwardCache> forward(const EncoderParams& params,
                                        std::span<const TokenSequence> batch,
                                        const ForwardMode& mode) {
    if (batch.empty()) throw std::invalid_argument("forward: empty batch");
    ForwardCache cache;
    cache.tanh_head = params.cfg.tanh_head;
    cache.out_dim = params.cfg.out_dim;
    cache.token_ids.reserve(batch.size());
    for (const auto& seq : batch) cache.token_ids.push_back(seq.ids);

    Matrix pooled = mean_pool(params, batch);

    if (std::holds_alternative<Deterministic>(mode)) {
        cache.draws.resize(1);
        Matrix out = run_draw(params, pooled, std::nullopt, cache.draws[0]);
        return {std::move(out), std::move(cache)};
    }
    if (const auto* d = std::get_if<Dropout>(&mode)) {
        RngState rng = d->rng;
        cache.draws.resize(1);
        auto pattern = sample_pattern(rng, batch.size(), params.cfg);
        Matrix out = run_draw(params, pooled, pattern, cache.draws[0]);
        return {std::move(out), std::move(cache)};
    }
    if (const auto* g = std::get_if<DropoutPlusGaussian>(&mode)) {
        if (g->variance < 0.0)
            throw std::invalid_argument("forward: negative noise variance");
        RngState mask_rng = split_stream(g->rng, 0);
        RngState noise_rng = split_stream(g->rng, 1);
        cache.draws.resize(1);
        auto pattern = sample_pattern(mask_rng, batch.size(), params.cfg);
        Matrix out = run_draw(params, pooled, pattern, cache.draws[0]);
        out = perturb(out, noise_rng, g->variance);
        return {std::move(out), std::move(cache)};
    }
    const auto& ms = std::get<MeanSampled>(mode);
    if (ms.k < 1) throw std::invalid_argument("forward: MeanSampled needs K >= 1");
    cache.draws.resize(ms.k);
    Matrix acc(batch.size(), params.cfg.out_dim);
    for (std::size_t k = 0; k < ms.k; ++k) {
        RngState draw_rng = split_stream(ms.rng, k);
        auto pattern = sample_pattern(draw_rng, batch.size(), params.cfg);
        Matrix out = run_draw(params, pooled, pattern, cache.draws[k]);
        for (std::size_t i = 0; i < acc.values.size(); ++i) acc.values[i] += out.values[i];
    }
    double inv = 1.0 / static_cast<double>(ms.k);
    for (double& v : acc.values) v *= inv;
    return {std::move(acc), std::move(cache)};
}

Matrix pooled_embeddings(const EncoderParams& params,
                         std::span<const TokenSequence> batch) {
    if (batch.empty()) throw std::invalid_argument("pooled_embeddings: empty batch");
    return mean_pool(params, batch);
}

ParamGrads backward(const EncoderParams& params, const ForwardCache& cache,
                    const Matrix& grad_out) {
    const auto& cfg = params.cfg;
    if (cache.draws.empty()) throw std::logic_error("backward: cache has no draws");
    if (grad_out.rows != cache.token_ids.size() || grad_out.cols != cache.out_dim)
        throw std::logic_error("backward: grad_out shape does not match cache");
    if (cache.tanh_head != cfg.tanh_head)
        throw std::logic_error("backward: cache was built with a different head");

    ParamGrads g;
    g.token_table = Matrix(cfg.vocab_size, cfg.embed_dim);
    g.hidden_w = Matrix(cfg.embed_dim, cfg.hidden_dim);
    g.hidden_b.assign(cfg.hidden_dim, 0.0);
    g.out_w = Matrix(cfg.hidden_dim, cfg.out_dim);
    g.out_b.assign(cfg.out_dim, 0.0);

    const double draw_weight = 1.0 / static_cast<double>(cache.draws.size());
    const std::size_t n = grad_out.rows;

    for (const auto& draw : cache.draws) {
        Matrix gout = grad_out;
        if (draw_weight != 1.0)
            for (double& v : gout.values) v *= draw_weight;

        // output layer
        Matrix gw2 = matmul_at_b(draw.head_in, gout);
        for (std::size_t i = 0; i < gw2.values.size(); ++i)
            g.out_w.values[i] += gw2.values[i];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t d = 0; d < cfg.out_dim; ++d) g.out_b[d] += gout(i, d);
        Matrix ghead = matmul_a_bt(gout, params.out_w);  // N x H

        // hidden dropout
        if (draw.pattern) {
            const double scale = 1.0 / draw.pattern->p_keep;
            for (std::size_t i = 0; i < ghead.values.size(); ++i)
                ghead.values[i] *= draw.pattern->hidden_mask.values[i] * scale;
        }
        // activation
        if (cfg.tanh_head) {
            for (std::size_t i = 0; i < ghead.values.size(); ++i) {
                double h = draw.hidden.values[i];
                ghead.values[i] *= (1.0 - h * h);
            }
        }

        // hidden layer
        Matrix gw1 = matmul_at_b(draw.mlp_in, ghead);
        for (std::size_t i = 0; i < gw1.values.size(); ++i)
            g.hidden_w.values[i] += gw1.values[i];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t h = 0; h < cfg.hidden_dim; ++h) g.hidden_b[h] += ghead(i, h);
        Matrix gmlp = matmul_a_bt(ghead, params.hidden_w);  // N x E

        // pool dropout
        if (draw.pattern) {
            const double scale = 1.0 / draw.pattern->p_keep;
            for (std::size_t i = 0; i < gmlp.values.size(); ++i)
                gmlp.values[i] *= draw.pattern->pool_mask.values[i] * scale;
        }

        // mean pooling scatters back to the touched table rows
        for (std::size_t i = 0; i < n; ++i) {
            const auto& ids = cache.token_ids[i];
            double inv = 1.0 / static_cast<double>(ids.size());
            for (std::uint32_t t : ids) {
                auto dst = g.token_table.row(t);
                auto src = gmlp.row(i);
                for (std::size_t e = 0; e < cfg.embed_dim; ++e) dst[e] += src[e] * inv;
            }
        }
    }
    return g;
}

Matrix perturb(const Matrix& z, RngState& rng, double variance) {
    if (variance < 0.0) throw std::invalid_argument("perturb: negative variance");
    if (variance == 0.0) return z;
    Matrix noise = gaussian_sample(rng, z.rows, z.cols, 0.0, variance);
    Matrix out = z;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += noise.values[i];
    return out;
}

}  // namespace cllab
