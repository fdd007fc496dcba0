#include "cllab/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "cllab/core_math.hpp"
#include "cllab/diagnostics.hpp"

namespace cllab {

const char* objective_name(Objective o) {
    switch (o) {
        case Objective::InfoNce: return "info_nce";
        case Objective::OffInfo: return "off_info";
        case Objective::DclOnly: return "dcl_only";
        case Objective::Bt: return "bt";
        case Objective::Combined: return "combined";
    }
    return "unknown";
}

Objective objective_from_name(const std::string& name) {
    if (name == "info_nce") return Objective::InfoNce;
    if (name == "off_info") return Objective::OffInfo;
    if (name == "dcl_only") return Objective::DclOnly;
    if (name == "bt") return Objective::Bt;
    if (name == "combined") return Objective::Combined;
    throw std::invalid_argument("unknown objective: " + name);
}

std::string noise_mode_name(const NoiseMode& m) {
    char buf[48];
    switch (m.kind) {
        case NoiseMode::Kind::None: return "none";
        case NoiseMode::Kind::PlusNoise:
            std::snprintf(buf, sizeof buf, "plus:%.10g", m.variance);
            return buf;
        case NoiseMode::Kind::MeanSampled:
            std::snprintf(buf, sizeof buf, "mean:%zu", m.k);
            return buf;
    }
    return "none";
}

NoiseMode noise_mode_from_name(const std::string& name) {
    NoiseMode m;
    if (name == "none" || name.empty()) return m;
    if (name.rfind("plus:", 0) == 0) {
        m.kind = NoiseMode::Kind::PlusNoise;
        m.variance = std::stod(name.substr(5));
        if (m.variance < 0.0)
            throw std::invalid_argument("noise mode: negative variance in " + name);
        return m;
    }
    if (name.rfind("mean:", 0) == 0) {
        m.kind = NoiseMode::Kind::MeanSampled;
        long k = std::stol(name.substr(5));
        if (k < 1) throw std::invalid_argument("noise mode: K must be >= 1 in " + name);
        m.k = static_cast<std::size_t>(k);
        return m;
    }
    throw std::invalid_argument("unknown noise mode: " + name +
                                " (expected none | plus:VAR | mean:K)");
}

namespace {

bool same_noise(const NoiseMode& a, const NoiseMode& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case NoiseMode::Kind::None: return true;
        case NoiseMode::Kind::PlusNoise: return a.variance == b.variance;
        case NoiseMode::Kind::MeanSampled: return a.k == b.k;
    }
    return false;
}

ForwardMode mode_for(const NoiseMode& noise, RngState rng) {
    switch (noise.kind) {
        case NoiseMode::Kind::None: return Dropout{rng};
        case NoiseMode::Kind::PlusNoise: return DropoutPlusGaussian{rng, noise.variance};
        case NoiseMode::Kind::MeanSampled: return MeanSampled{noise.k, rng};
    }
    return Dropout{rng};
}

}  // namespace

void TrainConfig::validate() const {
    if (lr < 0.0) throw std::invalid_argument("TrainConfig: negative learning rate");
    if (eval_interval < 1) throw std::invalid_argument("TrainConfig: eval_interval must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (loss.tau <= 0.0) throw std::invalid_argument("TrainConfig: loss.tau must be > 0");
    if (loss.tau_dcl <= 0.0) throw std::invalid_argument("TrainConfig: loss.tau_dcl must be > 0");
    if (loss.m < 0.0) throw std::invalid_argument("TrainConfig: loss.m must be >= 0");
    if (loss.lambda_dcl < 0.0)
        throw std::invalid_argument("TrainConfig: loss.lambda_dcl must be >= 0");
    if (loss.lambda_bt < 0.0)
        throw std::invalid_argument("TrainConfig: loss.lambda_bt must be >= 0");
    if (pos_noise.kind == NoiseMode::Kind::PlusNoise && pos_noise.variance < 0.0)
        throw std::invalid_argument("TrainConfig: pos_noise variance must be >= 0");
    if (neg_noise.kind == NoiseMode::Kind::PlusNoise && neg_noise.variance < 0.0)
        throw std::invalid_argument("TrainConfig: neg_noise variance must be >= 0");
    if ((objective == Objective::OffInfo || objective == Objective::Combined) &&
        neg_noise.kind != NoiseMode::Kind::None)
        throw std::invalid_argument(
            "TrainConfig: off-dropout objectives take deterministic negatives; "
            "neg_noise must be none");
    if (bt_pad_rows > 0 && objective != Objective::Bt)
        throw std::invalid_argument("TrainConfig: bt_pad_rows applies to the bt objective only");
}

AdamState make_adam_state(const EncoderParams& params) {
    AdamState s;
    auto zeros_like = [](const Matrix& m) { return Matrix(m.rows, m.cols); };
    s.m.token_table = zeros_like(params.token_table);
    s.m.hidden_w = zeros_like(params.hidden_w);
    s.m.hidden_b.assign(params.hidden_b.size(), 0.0);
    s.m.out_w = zeros_like(params.out_w);
    s.m.out_b.assign(params.out_b.size(), 0.0);
    s.v = s.m;
    return s;
}

namespace {

void adam_update_block(std::span<double> theta, std::span<const double> grad,
                       std::span<double> m, std::span<double> v,
                       const AdamState& s, double lr, double bc1, double bc2,
                       const char* block) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
        double g = grad[i];
        if (!std::isfinite(g))
            throw std::runtime_error(std::string("adam_step: non-finite gradient in ") +
                                     block + " at step " + std::to_string(s.step));
        m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g;
        v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g * g;
        double mhat = m[i] / bc1;
        double vhat = v[i] / bc2;
        theta[i] -= lr * mhat / (std::sqrt(vhat) + s.eps);
    }
}

}  // namespace

void adam_step(EncoderParams& params, const ParamGrads& grads, AdamState& state,
               double lr) {
    if (grads.token_table.values.size() != params.token_table.values.size() ||
        grads.hidden_w.values.size() != params.hidden_w.values.size() ||
        grads.hidden_b.size() != params.hidden_b.size() ||
        grads.out_w.values.size() != params.out_w.values.size() ||
        grads.out_b.size() != params.out_b.size())
        throw std::invalid_argument("adam_step: gradient shapes disagree with parameters");
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    adam_update_block(params.token_table.values, grads.token_table.values,
                      state.m.token_table.values, state.v.token_table.values, state,
                      lr, bc1, bc2, "token_table");
    adam_update_block(params.hidden_w.values, grads.hidden_w.values,
                      state.m.hidden_w.values, state.v.hidden_w.values, state, lr,
                      bc1, bc2, "hidden_w");
    adam_update_block(params.hidden_b, grads.hidden_b, state.m.hidden_b,
                      state.v.hidden_b, state, lr, bc1, bc2, "hidden_b");
    adam_update_block(params.out_w.values, grads.out_w.values, state.m.out_w.values,
                      state.v.out_w.values, state, lr, bc1, bc2, "out_w");
    adam_update_block(params.out_b, grads.out_b, state.m.out_b, state.v.out_b,
                      state, lr, bc1, bc2, "out_b");
}

namespace {

void accumulate(ParamGrads& acc, const ParamGrads& g) {
    for (std::size_t i = 0; i < acc.token_table.values.size(); ++i)
        acc.token_table.values[i] += g.token_table.values[i];
    for (std::size_t i = 0; i < acc.hidden_w.values.size(); ++i)
        acc.hidden_w.values[i] += g.hidden_w.values[i];
    for (std::size_t i = 0; i < acc.hidden_b.size(); ++i)
        acc.hidden_b[i] += g.hidden_b[i];
    for (std::size_t i = 0; i < acc.out_w.values.size(); ++i)
        acc.out_w.values[i] += g.out_w.values[i];
    for (std::size_t i = 0; i < acc.out_b.size(); ++i) acc.out_b[i] += g.out_b[i];
}

struct StepOutcome {
    double total = 0.0;
    double info_component = 0.0;
    double dcl_component = 0.0;
    ParamGrads grads;
};

void add_scaled(Matrix& dst, const Matrix& src, double w) {
    for (std::size_t i = 0; i < dst.values.size(); ++i) dst.values[i] += w * src.values[i];
}

StepOutcome train_step(const EncoderParams& params,
                       std::span<const TokenSequence> batch, const TrainConfig& cfg,
                       const RngState& step_rng) {
    // Positive-role views; these double as negative-role views when the two
    // noise treatments agree (plain SimCSE uses the very same tensors).
    auto [z1p, c1p] = forward(params, batch, mode_for(cfg.pos_noise, split_stream(step_rng, 0)));
    auto [z2p, c2p] = forward(params, batch, mode_for(cfg.pos_noise, split_stream(step_rng, 1)));

    const bool uses_inbatch_negatives = cfg.objective == Objective::InfoNce ||
                                        cfg.objective == Objective::DclOnly ||
                                        cfg.objective == Objective::Bt;
    const bool separate_roles =
        uses_inbatch_negatives && !same_noise(cfg.pos_noise, cfg.neg_noise);

    Matrix z1n, z2n;
    ForwardCache c1n, c2n;
    if (separate_roles) {
        std::tie(z1n, c1n) =
            forward(params, batch, mode_for(cfg.neg_noise, split_stream(step_rng, 2)));
        std::tie(z2n, c2n) =
            forward(params, batch, mode_for(cfg.neg_noise, split_stream(step_rng, 3)));
    }

    const bool needs_deterministic =
        cfg.objective == Objective::OffInfo || cfg.objective == Objective::Combined;
    Matrix z0;
    ForwardCache c0;
    if (needs_deterministic) std::tie(z0, c0) = forward(params, batch, Deterministic{});

    StepOutcome out;
    Matrix d1p(z1p.rows, z1p.cols), d2p(z1p.rows, z1p.cols);
    Matrix d1n, d2n, d0;

    auto add_info_part = [&]() {
        if (separate_roles) {
            LossReport r = info_nce_roles(z1p, z2p, z1n, z2n, cfg.loss);
            out.info_component = r.value;
            add_scaled(d1p, r.grads[0], 1.0);
            add_scaled(d2p, r.grads[1], 1.0);
            d1n = std::move(r.grads[2]);
            d2n = std::move(r.grads[3]);
        } else {
            LossReport r = info_nce(z1p, z2p, cfg.loss);
            out.info_component = r.value;
            add_scaled(d1p, r.grads[0], 1.0);
            add_scaled(d2p, r.grads[1], 1.0);
        }
    };

    switch (cfg.objective) {
        case Objective::InfoNce: {
            add_info_part();
            out.total = out.info_component;
            break;
        }
        case Objective::OffInfo: {
            LossReport r = off_info_nce(z1p, z2p, z0, cfg.loss);
            out.info_component = r.value;
            out.total = r.value;
            add_scaled(d1p, r.grads[0], 1.0);
            add_scaled(d2p, r.grads[1], 1.0);
            d0 = std::move(r.grads[2]);
            break;
        }
        case Objective::DclOnly: {
            add_info_part();
            LossReport r = dcl(z1p, z2p, cfg.loss);
            out.dcl_component = r.value;
            out.total = out.info_component + cfg.loss.lambda_dcl * r.value;
            add_scaled(d1p, r.grads[0], cfg.loss.lambda_dcl);
            add_scaled(d2p, r.grads[1], cfg.loss.lambda_dcl);
            break;
        }
        case Objective::Bt: {
            add_info_part();
            LossReport r;
            if (cfg.bt_pad_rows > 0) {
                RngState pad_rng = split_stream(step_rng, 5);
                PaddedViews padded = pad_artificial(z1p, z2p, cfg.bt_pad_rows, pad_rng);
                r = barlow_twins(padded.z1, padded.z2, cfg.loss);
                // artificial rows carry no gradient back to the encoder
                for (std::size_t i = 0; i < padded.real_rows; ++i)
                    for (std::size_t c = 0; c < z1p.cols; ++c) {
                        d1p(i, c) += r.grads[0](i, c);
                        d2p(i, c) += r.grads[1](i, c);
                    }
            } else {
                r = barlow_twins(z1p, z2p, cfg.loss);
                add_scaled(d1p, r.grads[0], 1.0);
                add_scaled(d2p, r.grads[1], 1.0);
            }
            out.total = out.info_component + r.value;
            break;
        }
        case Objective::Combined: {
            LossReport off = off_info_nce(z1p, z2p, z0, cfg.loss);
            LossReport dim = dcl(z1p, z2p, cfg.loss);
            out.info_component = off.value;
            out.dcl_component = dim.value;
            out.total = off.value + cfg.loss.lambda_dcl * dim.value;
            add_scaled(d1p, off.grads[0], 1.0);
            add_scaled(d2p, off.grads[1], 1.0);
            add_scaled(d1p, dim.grads[0], cfg.loss.lambda_dcl);
            add_scaled(d2p, dim.grads[1], cfg.loss.lambda_dcl);
            d0 = std::move(off.grads[2]);
            break;
        }
    }

    out.grads = backward(params, c1p, d1p);
    accumulate(out.grads, backward(params, c2p, d2p));
    if (separate_roles) {
        accumulate(out.grads, backward(params, c1n, d1n));
        accumulate(out.grads, backward(params, c2n, d2n));
    }
    if (needs_deterministic) accumulate(out.grads, backward(params, c0, d0));
    return out;
}

}  // namespace

double evaluate(const EncoderParams& params, std::span<const StsPair> pairs,
                bool eval_pre_mlp) {
    if (pairs.empty()) throw std::invalid_argument("evaluate: no pairs");
    std::vector<TokenSequence> lefts, rights;
    lefts.reserve(pairs.size());
    rights.reserve(pairs.size());
    for (const auto& p : pairs) {
        lefts.push_back(p.left);
        rights.push_back(p.right);
    }
    Matrix zl, zr;
    if (eval_pre_mlp) {
        zl = pooled_embeddings(params, lefts);
        zr = pooled_embeddings(params, rights);
    } else {
        zl = forward(params, lefts, Deterministic{}).first;
        zr = forward(params, rights, Deterministic{}).first;
    }
    std::vector<double> model(pairs.size()), gold(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        model[i] = cosine_similarity(zl.row(i), zr.row(i));
        gold[i] = pairs[i].gold;
    }
    return spearman(model, gold);
}

TrainResult train(const TrainConfig& cfg, const std::vector<TokenSequence>& corpus,
                  const std::vector<StsPair>& dev, const std::vector<StsPair>& test) {
    cfg.validate();
    if (corpus.empty()) throw std::invalid_argument("train: empty corpus");
    if (dev.empty() || test.empty())
        throw std::invalid_argument("train: dev/test sets must be non-empty");

    RngState root = make_rng(cfg.seed);
    RngState init_rng = split_stream(root, 0);
    const std::uint64_t shuffle_seed = split_stream(root, 1).seed;
    RngState step_root = split_stream(root, 2);
    RngState diag_root = split_stream(root, 3);

    EncoderParams params = init_params(init_rng, cfg.encoder);
    AdamState adam = make_adam_state(params);

    // fixed diagnostic batch for the alignment/uniformity history
    std::vector<TokenSequence> diag_batch(
        corpus.begin(),
        corpus.begin() + static_cast<std::ptrdiff_t>(std::min(cfg.batch_size, corpus.size())));

    TrainResult result;
    TrainReport& report = result.report;
    EncoderParams best = params;
    double best_dev = -std::numeric_limits<double>::infinity();
    std::size_t best_step = 0;

    double acc_loss = 0.0, acc_info = 0.0, acc_dcl = 0.0;
    std::size_t acc_count = 0;
    std::size_t global_step = 0;
    std::size_t eval_index = 0;

    auto run_eval = [&]() {
        double dev_rho = evaluate(params, dev, cfg.eval_pre_mlp);
        RngState a1 = split_stream(diag_root, eval_index * 2);
        RngState a2 = split_stream(diag_root, eval_index * 2 + 1);
        ++eval_index;
        Matrix v1 = forward(params, diag_batch, Dropout{a1}).first;
        Matrix v2 = forward(params, diag_batch, Dropout{a2}).first;
        Matrix det = forward(params, diag_batch, Deterministic{}).first;
        EvalPoint pt;
        pt.step = global_step;
        pt.loss = acc_count ? acc_loss / static_cast<double>(acc_count) : 0.0;
        pt.loss_info = acc_count ? acc_info / static_cast<double>(acc_count) : 0.0;
        pt.loss_dcl = acc_count ? acc_dcl / static_cast<double>(acc_count) : 0.0;
        pt.dev_spearman = dev_rho;
        pt.alignment = alignment(v1, v2);
        pt.uniformity = uniformity(det);
        report.history.push_back(pt);
        acc_loss = acc_info = acc_dcl = 0.0;
        acc_count = 0;
        if (dev_rho > best_dev) {  // ties keep the earlier checkpoint
            best_dev = dev_rho;
            best_step = global_step;
            best = params;
        }
    };

    for (std::size_t epoch = 0; epoch < cfg.epochs && !report.diverged; ++epoch) {
        auto batches = epoch_batches(corpus.size(), cfg.batch_size, shuffle_seed, epoch);
        for (const auto& batch_idx : batches) {
            std::vector<TokenSequence> batch;
            batch.reserve(batch_idx.size());
            for (std::size_t idx : batch_idx) batch.push_back(corpus[idx]);

            ++global_step;
            RngState step_rng = split_stream(step_root, global_step);
            StepOutcome out = train_step(params, batch, cfg, step_rng);
            if (!std::isfinite(out.total)) {
                report.diverged = true;
                report.diverged_step = global_step;
                --global_step;  // the diverged step produced no update
                break;
            }
            adam_step(params, out.grads, adam, cfg.lr);
            acc_loss += out.total;
            acc_info += out.info_component;
            acc_dcl += out.dcl_component;
            ++acc_count;
            if (global_step % cfg.eval_interval == 0) run_eval();
        }
    }
    if (acc_count > 0 || report.history.empty()) run_eval();

    report.total_steps = global_step;
    report.best_step = best_step;
    report.best_dev_spearman = best_dev;
    report.test_spearman = evaluate(best, test, cfg.eval_pre_mlp);
    result.best_params = std::move(best);
    result.final_params = std::move(params);
    return result;
}

namespace {

void put_u32_le(std::ostream& out, std::uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                 static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
    out.write(b, 4);
}

std::uint32_t get_u32_le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("checkpoint: truncated length prefix");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32_le(std::ostream& out, float f) {
    auto v = std::bit_cast<std::uint32_t>(f);
    put_u32_le(out, v);
}

void write_tensor(std::ostream& out, std::span<const double> vals) {
    for (double d : vals) put_f32_le(out, static_cast<float>(d));
}

void read_tensor(std::istream& in, std::span<double> vals, const char* name) {
    for (double& d : vals) {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        if (!in)
            throw std::runtime_error(std::string("checkpoint: truncated while reading ") + name);
        std::uint32_t v = static_cast<std::uint32_t>(b[0]) |
                          (static_cast<std::uint32_t>(b[1]) << 8) |
                          (static_cast<std::uint32_t>(b[2]) << 16) |
                          (static_cast<std::uint32_t>(b[3]) << 24);
        d = static_cast<double>(std::bit_cast<float>(v));
    }
}

constexpr char kMagic[5] = {'C', 'L', 'L', 'B', '1'};

}  // namespace

void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path,
                     const CheckpointMeta& meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
    out.write(kMagic, sizeof kMagic);

    nlohmann::json md;
    md["vocab_size"] = params.cfg.vocab_size;
    md["embed_dim"] = params.cfg.embed_dim;
    md["hidden_dim"] = params.cfg.hidden_dim;
    md["out_dim"] = params.cfg.out_dim;
    md["p_keep"] = params.cfg.p_keep;
    md["tanh_head"] = params.cfg.tanh_head;
    md["seed"] = meta.seed;
    md["step"] = meta.step;
    if (!meta.config_echo.empty()) md["config"] = nlohmann::json::parse(meta.config_echo);
    std::string text = md.dump();
    put_u32_le(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));

    write_tensor(out, params.token_table.values);
    write_tensor(out, params.hidden_w.values);
    write_tensor(out, params.hidden_b);
    write_tensor(out, params.out_w.values);
    write_tensor(out, params.out_b);
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

EncoderParams load_checkpoint(const std::filesystem::path& path,
                              CheckpointMeta* meta_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
    char magic[5];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
    std::uint32_t len = get_u32_le(in);
    std::string text(len, '\0');
    in.read(text.data(), len);
    if (!in) throw std::runtime_error("load_checkpoint: truncated metadata block");
    nlohmann::json md;
    try {
        md = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(std::string("load_checkpoint: invalid metadata JSON: ") +
                                 e.what());
    }
    EncoderConfig cfg;
    auto field = [&](const char* name) {
        if (!md.contains(name))
            throw std::runtime_error(std::string("load_checkpoint: metadata missing field ") +
                                     name);
        return md[name];
    };
    cfg.vocab_size = field("vocab_size").get<std::size_t>();
    cfg.embed_dim = field("embed_dim").get<std::size_t>();
    cfg.hidden_dim = field("hidden_dim").get<std::size_t>();
    cfg.out_dim = field("out_dim").get<std::size_t>();
    cfg.p_keep = field("p_keep").get<double>();
    cfg.tanh_head = field("tanh_head").get<bool>();
    if (cfg.vocab_size < 2 || cfg.embed_dim == 0 || cfg.hidden_dim == 0 || cfg.out_dim == 0)
        throw std::runtime_error("load_checkpoint: metadata declares a degenerate shape");
    if (cfg.p_keep <= 0.0 || cfg.p_keep > 1.0)
        throw std::runtime_error("load_checkpoint: metadata field p_keep out of (0, 1]");

    EncoderParams p;
    p.cfg = cfg;
    p.token_table = Matrix(cfg.vocab_size, cfg.embed_dim);
    p.hidden_w = Matrix(cfg.embed_dim, cfg.hidden_dim);
    p.hidden_b.assign(cfg.hidden_dim, 0.0);
    p.out_w = Matrix(cfg.hidden_dim, cfg.out_dim);
    p.out_b.assign(cfg.out_dim, 0.0);
    read_tensor(in, p.token_table.values, "token_table (vocab_size x embed_dim)");
    read_tensor(in, p.hidden_w.values, "hidden_w (embed_dim x hidden_dim)");
    read_tensor(in, p.hidden_b, "hidden_b (hidden_dim)");
    read_tensor(in, p.out_w.values, "out_w (hidden_dim x out_dim)");
    read_tensor(in, p.out_b, "out_b (out_dim)");
    in.peek();
    if (!in.eof())
        throw std::runtime_error("load_checkpoint: trailing bytes after tensors in " +
                                 path.string());
    if (meta_out) {
        meta_out->seed = md.value("seed", std::uint64_t{0});
        meta_out->step = md.value("step", std::size_t{0});
        meta_out->config_echo = md.contains("config") ? md["config"].dump() : std::string();
    }
    return p;
}

void write_metrics_csv(const std::filesystem::path& path, const TrainReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_metrics_csv: cannot open " + path.string());
    out << "step,loss,loss_info,loss_dcl,dev_spearman,alignment,uniformity\n";
    char buf[256];
    for (const auto& pt : report.history) {
        std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                      pt.step, pt.loss, pt.loss_info, pt.loss_dcl, pt.dev_spearman,
                      pt.alignment, pt.uniformity);
        out << buf;
    }
}

namespace {

nlohmann::json train_config_json(const TrainConfig& cfg) {
    nlohmann::json j;
    j["objective"] = objective_name(cfg.objective);
    j["lr"] = cfg.lr;
    j["batch_size"] = cfg.batch_size;
    j["epochs"] = cfg.epochs;
    j["eval_interval"] = cfg.eval_interval;
    j["seed"] = cfg.seed;
    j["eval_pre_mlp"] = cfg.eval_pre_mlp;
    j["pos_noise"] = noise_mode_name(cfg.pos_noise);
    j["neg_noise"] = noise_mode_name(cfg.neg_noise);
    j["bt_pad_rows"] = cfg.bt_pad_rows;
    j["loss"] = {{"tau", cfg.loss.tau},
                 {"m", cfg.loss.m},
                 {"tau_dcl", cfg.loss.tau_dcl},
                 {"lambda_dcl", cfg.loss.lambda_dcl},
                 {"lambda_bt", cfg.loss.lambda_bt}};
    j["encoder"] = {{"vocab_size", cfg.encoder.vocab_size},
                    {"embed_dim", cfg.encoder.embed_dim},
                    {"hidden_dim", cfg.encoder.hidden_dim},
                    {"out_dim", cfg.encoder.out_dim},
                    {"p_keep", cfg.encoder.p_keep},
                    {"tanh_head", cfg.encoder.tanh_head}};
    return j;
}

}  // namespace

std::string train_config_json_text(const TrainConfig& cfg) {
    return train_config_json(cfg).dump();
}

std::string train_report_json(const TrainConfig& cfg, const TrainReport& report) {
    nlohmann::json j;
    j["config"] = train_config_json(cfg);
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& pt : report.history) {
        hist.push_back({{"step", pt.step},
                        {"loss", pt.loss},
                        {"loss_info", pt.loss_info},
                        {"loss_dcl", pt.loss_dcl},
                        {"dev_spearman", pt.dev_spearman},
                        {"alignment", pt.alignment},
                        {"uniformity", pt.uniformity}});
    }
    j["history"] = hist;
    j["best_step"] = report.best_step;
    j["best_dev_spearman"] = report.best_dev_spearman;
    j["test_spearman"] = report.test_spearman;
    j["total_steps"] = report.total_steps;
    j["diverged"] = report.diverged;
    if (report.diverged) j["diverged_step"] = report.diverged_step;
    return j.dump(2);
}

}  // namespace cllab
