#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cllab/core_math.hpp"
#include "cllab/encoder.hpp"

using namespace cllab;

namespace {

EncoderConfig tiny_config() {
    EncoderConfig cfg;
    cfg.vocab_size = 12;
    cfg.embed_dim = 4;
    cfg.hidden_dim = 5;
    cfg.out_dim = 3;
    cfg.p_keep = 0.8;
    return cfg;
}

std::vector<TokenSequence> tiny_batch() {
    CorpusConfig ccfg;
    ccfg.vocab_size = 12;
    return {tokenize("a b c", ccfg), tokenize("d e", ccfg), tokenize("a f g h", ccfg)};
}

// Sum over entries of grad_out * output for a fixed grad_out; the scalar the
// backward contract differentiates.
double probe_loss(const EncoderParams& params, std::span<const TokenSequence> batch,
                  const ForwardMode& mode, const Matrix& grad_out) {
    Matrix out = forward(params, batch, mode).first;
    double s = 0.0;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        s += grad_out.values[i] * out.values[i];
    return s;
}

double fd_check_all_params(EncoderParams params, std::span<const TokenSequence> batch,
                           const ForwardMode& mode, const Matrix& grad_out,
                           double step = 1e-5) {
    auto [out, cache] = forward(params, batch, mode);
    ParamGrads analytic = backward(params, cache, grad_out);

    double worst = 0.0;
    auto audit_block = [&](std::vector<double>& theta, const std::vector<double>& grads) {
        for (std::size_t i = 0; i < theta.size(); ++i) {
            double saved = theta[i];
            theta[i] = saved + step;
            double fp = probe_loss(params, batch, mode, grad_out);
            theta[i] = saved - step;
            double fm = probe_loss(params, batch, mode, grad_out);
            theta[i] = saved;
            double fd = (fp - fm) / (2.0 * step);
            double rel = std::abs(grads[i] - fd) /
                         std::max({1e-3, std::abs(grads[i]), std::abs(fd)});
            worst = std::max(worst, rel);
        }
    };
    audit_block(params.token_table.values, analytic.token_table.values);
    audit_block(params.hidden_w.values, analytic.hidden_w.values);
    audit_block(params.hidden_b, analytic.hidden_b);
    audit_block(params.out_w.values, analytic.out_w.values);
    audit_block(params.out_b, analytic.out_b);
    return worst;
}

}  // namespace

TEST_CASE("init_params: determinism, zero biases, centered weights") {
    EncoderConfig cfg;
    cfg.vocab_size = 200;
    RngState a = make_rng(4), b = make_rng(4);
    EncoderParams pa = init_params(a, cfg);
    EncoderParams pb = init_params(b, cfg);
    CHECK(pa.token_table.values == pb.token_table.values);
    CHECK(pa.hidden_w.values == pb.hidden_w.values);
    for (double v : pa.hidden_b) CHECK(v == 0.0);
    for (double v : pa.out_b) CHECK(v == 0.0);

    double mean = 0.0;
    std::size_t count = 0;
    for (double v : pa.token_table.values) {
        mean += v;
        ++count;
    }
    CHECK(count >= 10000);
    CHECK(std::abs(mean / static_cast<double>(count)) < 0.01);

    double bound = std::sqrt(6.0 / (200.0 + 64.0));
    for (double v : pa.token_table.values) CHECK(std::abs(v) <= bound);
}

TEST_CASE("forward: deterministic mode is a pure function") {
    RngState rng = make_rng(10);
    EncoderParams params = init_params(rng, tiny_config());
    auto batch = tiny_batch();
    Matrix z1 = forward(params, batch, Deterministic{}).first;
    Matrix z2 = forward(params, batch, Deterministic{}).first;
    CHECK(z1.values == z2.values);
    CHECK(z1.rows == batch.size());
    CHECK(z1.cols == 3);
}

TEST_CASE("forward: p_keep = 1 dropout equals deterministic exactly") {
    EncoderConfig cfg = tiny_config();
    cfg.p_keep = 1.0;
    RngState rng = make_rng(11);
    EncoderParams params = init_params(rng, cfg);
    auto batch = tiny_batch();
    Matrix det = forward(params, batch, Deterministic{}).first;
    Matrix drop = forward(params, batch, Dropout{make_rng(5)}).first;
    CHECK(det.values == drop.values);
}

TEST_CASE("forward: same dropout rng gives identical views, fresh rng differs") {
    RngState rng = make_rng(12);
    EncoderParams params = init_params(rng, tiny_config());
    auto batch = tiny_batch();
    Matrix a = forward(params, batch, Dropout{make_rng(100)}).first;
    Matrix b = forward(params, batch, Dropout{make_rng(100)}).first;
    Matrix c = forward(params, batch, Dropout{make_rng(101)}).first;
    CHECK(a.values == b.values);
    CHECK(a.values != c.values);
}

TEST_CASE("forward: linear-head dropout mean matches deterministic within 3 SE") {
    EncoderConfig cfg = tiny_config();
    cfg.tanh_head = false;
    RngState rng = make_rng(13);
    EncoderParams params = init_params(rng, cfg);
    auto batch = tiny_batch();
    Matrix det = forward(params, batch, Deterministic{}).first;

    const std::size_t draws = 10000;
    Matrix sum(det.rows, det.cols), sumsq(det.rows, det.cols);
    RngState draw_root = make_rng(14);
    for (std::size_t d = 0; d < draws; ++d) {
        Matrix z = forward(params, batch, Dropout{split_stream(draw_root, d)}).first;
        for (std::size_t i = 0; i < z.values.size(); ++i) {
            sum.values[i] += z.values[i];
            sumsq.values[i] += z.values[i] * z.values[i];
        }
    }
    for (std::size_t i = 0; i < det.values.size(); ++i) {
        double mean = sum.values[i] / draws;
        double var = (sumsq.values[i] - draws * mean * mean) / (draws - 1.0);
        double se = std::sqrt(std::max(var, 0.0) / draws);
        CHECK(std::abs(mean - det.values[i]) <= 3.0 * se + 1e-12);
    }
}

TEST_CASE("forward: mean-sampled output is the mean of its draws") {
    RngState rng = make_rng(15);
    EncoderParams params = init_params(rng, tiny_config());
    auto batch = tiny_batch();
    RngState mode_rng = make_rng(200);
    auto [zk, cache] = forward(params, batch, MeanSampled{4, mode_rng});
    CHECK(cache.draws.size() == 4);

    Matrix acc(zk.rows, zk.cols);
    for (std::size_t k = 0; k < 4; ++k) {
        RngState draw = split_stream(mode_rng, k);
        Matrix one = forward(params, batch, Dropout{draw}).first;
        for (std::size_t i = 0; i < acc.values.size(); ++i) acc.values[i] += one.values[i];
    }
    for (std::size_t i = 0; i < acc.values.size(); ++i)
        CHECK(zk.values[i] == doctest::Approx(acc.values[i] / 4.0).epsilon(1e-15));
}

TEST_CASE("forward: error cases") {
    RngState rng = make_rng(16);
    EncoderParams params = init_params(rng, tiny_config());
    std::vector<TokenSequence> empty_batch;
    CHECK_THROWS_AS(forward(params, empty_batch, Deterministic{}), std::invalid_argument);
    std::vector<TokenSequence> with_empty = tiny_batch();
    with_empty.push_back(TokenSequence{});
    CHECK_THROWS_AS(forward(params, with_empty, Deterministic{}), std::invalid_argument);
    CHECK_THROWS_AS(forward(params, tiny_batch(), MeanSampled{0, make_rng(1)}),
                    std::invalid_argument);
    CHECK_THROWS_AS(forward(params, tiny_batch(), DropoutPlusGaussian{make_rng(1), -0.1}),
                    std::invalid_argument);
}

TEST_CASE("backward: zero grad_out gives zero parameter grads") {
    RngState rng = make_rng(17);
    EncoderParams params = init_params(rng, tiny_config());
    auto batch = tiny_batch();
    auto [z, cache] = forward(params, batch, Dropout{make_rng(3)});
    Matrix zero(z.rows, z.cols);
    ParamGrads g = backward(params, cache, zero);
    for (double v : g.token_table.values) CHECK(v == 0.0);
    for (double v : g.hidden_w.values) CHECK(v == 0.0);
    for (double v : g.hidden_b) CHECK(v == 0.0);
    for (double v : g.out_w.values) CHECK(v == 0.0);
    for (double v : g.out_b) CHECK(v == 0.0);
}

TEST_CASE("backward: finite differences across every mode with a frozen mask") {
    RngState rng = make_rng(18);
    EncoderParams params = init_params(rng, tiny_config());
    auto batch = tiny_batch();
    RngState grng = make_rng(19);
    Matrix grad_out = gaussian_sample(grng, batch.size(), 3, 0.0, 1.0);

    CHECK(fd_check_all_params(params, batch, Deterministic{}, grad_out) < 1e-6);
    CHECK(fd_check_all_params(params, batch, Dropout{make_rng(7)}, grad_out) < 1e-6);
    CHECK(fd_check_all_params(params, batch, MeanSampled{3, make_rng(8)}, grad_out) < 1e-6);
    CHECK(fd_check_all_params(params, batch, DropoutPlusGaussian{make_rng(9), 0.05},
                              grad_out) < 1e-6);
}

TEST_CASE("backward: finite differences with the linear head") {
    EncoderConfig cfg = tiny_config();
    cfg.tanh_head = false;
    RngState rng = make_rng(20);
    EncoderParams params = init_params(rng, cfg);
    auto batch = tiny_batch();
    RngState grng = make_rng(21);
    Matrix grad_out = gaussian_sample(grng, batch.size(), 3, 0.0, 1.0);
    CHECK(fd_check_all_params(params, batch, Dropout{make_rng(22)}, grad_out) < 1e-6);
}

TEST_CASE("backward: dropped units pass no gradient to their incoming weights") {
    EncoderConfig cfg = tiny_config();
    cfg.p_keep = 0.5;  // plenty of dropped units
    RngState rng = make_rng(23);
    EncoderParams params = init_params(rng, cfg);
    auto full = tiny_batch();
    std::vector<TokenSequence> one_row(full.begin(), full.begin() + 1);
    auto [z, cache] = forward(params, one_row, Dropout{make_rng(24)});
    const DropoutPattern& pat = *cache.draws[0].pattern;

    RngState grng = make_rng(25);
    Matrix grad_out = gaussian_sample(grng, 1, 3, 0.0, 1.0);
    ParamGrads g = backward(params, cache, grad_out);

    bool found_dropped_hidden = false;
    for (std::size_t h = 0; h < cfg.hidden_dim; ++h) {
        if (pat.hidden_mask(0, h) == 0.0) {
            found_dropped_hidden = true;
            for (std::size_t d = 0; d < cfg.out_dim; ++d) CHECK(g.out_w(h, d) == 0.0);
        }
    }
    bool found_dropped_pool = false;
    for (std::size_t e = 0; e < cfg.embed_dim; ++e) {
        if (pat.pool_mask(0, e) == 0.0) {
            found_dropped_pool = true;
            for (std::size_t h = 0; h < cfg.hidden_dim; ++h) CHECK(g.hidden_w(e, h) == 0.0);
        }
    }
    CHECK(found_dropped_hidden);
    CHECK(found_dropped_pool);
}

TEST_CASE("backward: cache/shape mismatch rejected") {
    RngState rng = make_rng(26);
    EncoderParams params = init_params(rng, tiny_config());
    auto batch = tiny_batch();
    auto [z, cache] = forward(params, batch, Deterministic{});
    Matrix bad(z.rows + 1, z.cols);
    CHECK_THROWS_AS(backward(params, cache, bad), std::logic_error);
    ForwardCache empty_cache;
    CHECK_THROWS_AS(backward(params, empty_cache, z), std::logic_error);
}

TEST_CASE("perturb: zero variance identity, reproducibility, variance level") {
    RngState zrng = make_rng(27);
    Matrix z = gaussian_sample(zrng, 200, 500, 0.0, 1.0);

    RngState r0 = make_rng(1);
    Matrix same = perturb(z, r0, 0.0);
    CHECK(same.values == z.values);

    RngState r1 = make_rng(2), r2 = make_rng(2);
    Matrix a = perturb(z, r1, 0.1);
    Matrix b = perturb(z, r2, 0.1);
    CHECK(a.values == b.values);

    double mean = 0.0;
    for (std::size_t i = 0; i < z.values.size(); ++i) mean += a.values[i] - z.values[i];
    mean /= static_cast<double>(z.values.size());
    double var = 0.0;
    for (std::size_t i = 0; i < z.values.size(); ++i) {
        double d = a.values[i] - z.values[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(z.values.size() - 1);
    CHECK(var > 0.095);
    CHECK(var < 0.105);

    RngState r3 = make_rng(3);
    CHECK_THROWS_AS(perturb(z, r3, -0.5), std::invalid_argument);
}

TEST_CASE("pooled_embeddings: deterministic pre-MLP representation") {
    RngState rng = make_rng(28);
    EncoderParams params = init_params(rng, tiny_config());
    auto batch = tiny_batch();
    Matrix a = pooled_embeddings(params, batch);
    Matrix b = pooled_embeddings(params, batch);
    CHECK(a.values == b.values);
    CHECK(a.cols == params.cfg.embed_dim);
}
