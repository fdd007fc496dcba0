#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cllab/core_math.hpp"
#include "cllab/trainer.hpp"

using namespace cllab;

namespace {

EncoderConfig small_encoder(std::size_t vocab = 500) {
    EncoderConfig cfg;
    cfg.vocab_size = vocab;
    cfg.embed_dim = 16;
    cfg.hidden_dim = 24;
    cfg.out_dim = 12;
    return cfg;
}

TrainConfig small_train_config() {
    TrainConfig cfg;
    cfg.encoder = small_encoder();
    cfg.batch_size = 32;
    cfg.epochs = 2;
    cfg.eval_interval = 3;
    cfg.lr = 0.01;
    cfg.seed = 11;
    return cfg;
}

struct SmallData {
    std::vector<TokenSequence> corpus;
    std::vector<StsPair> dev, test;
};

SmallData small_dataset() {
    CorpusConfig ccfg;
    ccfg.vocab_size = 500;
    RngState rng = make_rng(300);
    SynthData d = synth_sts(rng, 200, 48, 8, ccfg);
    return {std::move(d.corpus), std::move(d.dev), std::move(d.test)};
}

bool reports_equal(const TrainReport& a, const TrainReport& b) {
    if (a.history.size() != b.history.size()) return false;
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        const auto& x = a.history[i];
        const auto& y = b.history[i];
        if (x.step != y.step || x.loss != y.loss || x.loss_info != y.loss_info ||
            x.loss_dcl != y.loss_dcl || x.dev_spearman != y.dev_spearman ||
            x.alignment != y.alignment || x.uniformity != y.uniformity)
            return false;
    }
    return a.best_step == b.best_step && a.best_dev_spearman == b.best_dev_spearman &&
           a.test_spearman == b.test_spearman;
}

}  // namespace

TEST_CASE("adam_step: zero gradients leave parameters unchanged, counter advances") {
    RngState rng = make_rng(80);
    EncoderParams params = init_params(rng, small_encoder());
    EncoderParams before = params;
    AdamState st = make_adam_state(params);
    ParamGrads zero;
    zero.token_table = Matrix(params.token_table.rows, params.token_table.cols);
    zero.hidden_w = Matrix(params.hidden_w.rows, params.hidden_w.cols);
    zero.hidden_b.assign(params.hidden_b.size(), 0.0);
    zero.out_w = Matrix(params.out_w.rows, params.out_w.cols);
    zero.out_b.assign(params.out_b.size(), 0.0);
    adam_step(params, zero, st, 0.01);
    CHECK(st.step == 1);
    CHECK(params.token_table.values == before.token_table.values);
    CHECK(params.hidden_w.values == before.hidden_w.values);
    CHECK(params.out_w.values == before.out_w.values);
}

TEST_CASE("adam_step: unit gradient at step 1 moves by about lr") {
    RngState rng = make_rng(81);
    EncoderParams params = init_params(rng, small_encoder());
    AdamState st = make_adam_state(params);
    ParamGrads g;
    g.token_table = Matrix(params.token_table.rows, params.token_table.cols);
    g.hidden_w = Matrix(params.hidden_w.rows, params.hidden_w.cols);
    g.hidden_b.assign(params.hidden_b.size(), 0.0);
    g.out_w = Matrix(params.out_w.rows, params.out_w.cols);
    g.out_b.assign(params.out_b.size(), 0.0);
    g.token_table(0, 0) = 1.0;
    double before = params.token_table(0, 0);
    const double lr = 3e-5;
    adam_step(params, g, st, lr);
    // bias-corrected m_hat = v_hat = 1, so the update is lr / (1 + eps)
    CHECK(std::abs((before - params.token_table(0, 0)) - lr) < lr * 1e-6);
}

TEST_CASE("adam_step: non-finite gradient aborts naming the block") {
    RngState rng = make_rng(82);
    EncoderParams params = init_params(rng, small_encoder());
    AdamState st = make_adam_state(params);
    ParamGrads g;
    g.token_table = Matrix(params.token_table.rows, params.token_table.cols);
    g.hidden_w = Matrix(params.hidden_w.rows, params.hidden_w.cols);
    g.hidden_b.assign(params.hidden_b.size(), 0.0);
    g.out_w = Matrix(params.out_w.rows, params.out_w.cols);
    g.out_b.assign(params.out_b.size(), 0.0);
    g.out_w(1, 1) = std::nan("");
    try {
        adam_step(params, g, st, 0.01);
        FAIL("expected runtime_error");
    } catch (const std::runtime_error& e) {
        std::string msg = e.what();
        CHECK(msg.find("out_w") != std::string::npos);
        CHECK(msg.find("step") != std::string::npos);
    }
}

TEST_CASE("train: deterministic given (seed, config, corpus)") {
    SmallData data = small_dataset();
    TrainConfig cfg = small_train_config();
    cfg.objective = Objective::InfoNce;
    TrainResult a = train(cfg, data.corpus, data.dev, data.test);
    TrainResult b = train(cfg, data.corpus, data.dev, data.test);
    CHECK(reports_equal(a.report, b.report));
    CHECK(a.best_params.token_table.values == b.best_params.token_table.values);
    CHECK(a.final_params.out_w.values == b.final_params.out_w.values);

    cfg.seed = 12;
    TrainResult c = train(cfg, data.corpus, data.dev, data.test);
    CHECK_FALSE(reports_equal(a.report, c.report));
}

TEST_CASE("train: every objective runs and logs its components") {
    SmallData data = small_dataset();
    for (Objective obj : {Objective::InfoNce, Objective::OffInfo, Objective::DclOnly,
                          Objective::Bt, Objective::Combined}) {
        TrainConfig cfg = small_train_config();
        cfg.objective = obj;
        cfg.epochs = 1;
        TrainResult r = train(cfg, data.corpus, data.dev, data.test);
        CHECK_FALSE(r.report.history.empty());
        CHECK(r.report.total_steps == data.corpus.size() / cfg.batch_size);
        for (const auto& pt : r.report.history) {
            CHECK(std::isfinite(pt.loss));
            CHECK(std::isfinite(pt.dev_spearman));
            CHECK(pt.dev_spearman >= -1.0);
            CHECK(pt.dev_spearman <= 1.0);
            CHECK(pt.alignment >= 0.0);
            CHECK(pt.uniformity <= 1e-12);
        }
        bool wants_dcl = obj == Objective::DclOnly || obj == Objective::Combined;
        bool has_dcl = false;
        for (const auto& pt : r.report.history)
            if (pt.loss_dcl != 0.0) has_dcl = true;
        CHECK(has_dcl == wants_dcl);
    }
}

TEST_CASE("train: noise-mode variants run (Table 1 cells)") {
    SmallData data = small_dataset();
    for (const char* pos : {"none", "plus:0.1", "mean:3"}) {
        for (const char* neg : {"none", "plus:0.1", "mean:3"}) {
            TrainConfig cfg = small_train_config();
            cfg.epochs = 1;
            cfg.eval_interval = 6;
            cfg.pos_noise = noise_mode_from_name(pos);
            cfg.neg_noise = noise_mode_from_name(neg);
            TrainResult r = train(cfg, data.corpus, data.dev, data.test);
            CHECK(std::isfinite(r.report.best_dev_spearman));
        }
    }
}

TEST_CASE("train: lr=0 keeps dev spearman constant across evals") {
    SmallData data = small_dataset();
    TrainConfig cfg = small_train_config();
    cfg.lr = 0.0;
    cfg.epochs = 1;
    cfg.eval_interval = 2;
    TrainResult r = train(cfg, data.corpus, data.dev, data.test);
    REQUIRE(r.report.history.size() >= 2);
    for (const auto& pt : r.report.history)
        CHECK(pt.dev_spearman == r.report.history[0].dev_spearman);
}

TEST_CASE("train: combined objective decreases the loss at defaults") {
    SmallData data = small_dataset();
    TrainConfig cfg = small_train_config();
    cfg.objective = Objective::Combined;
    // paper-grid point: tau 0.05, m 0.9, lambda 0.1, tau_dcl 5 (the defaults)
    cfg.lr = 0.005;
    cfg.epochs = 4;
    cfg.eval_interval = 3;
    TrainResult r = train(cfg, data.corpus, data.dev, data.test);
    REQUIRE(r.report.history.size() >= 3);
    CHECK(r.report.history.back().loss < r.report.history.front().loss);
}

TEST_CASE("train: best checkpoint is the max-dev one and scores the test set") {
    SmallData data = small_dataset();
    TrainConfig cfg = small_train_config();
    cfg.objective = Objective::InfoNce;
    TrainResult r = train(cfg, data.corpus, data.dev, data.test);
    double max_dev = -2.0;
    for (const auto& pt : r.report.history) max_dev = std::max(max_dev, pt.dev_spearman);
    CHECK(r.report.best_dev_spearman == max_dev);
    CHECK(evaluate(r.best_params, data.dev, cfg.eval_pre_mlp) ==
          doctest::Approx(r.report.best_dev_spearman).epsilon(1e-15));
    CHECK(evaluate(r.best_params, data.test, cfg.eval_pre_mlp) ==
          doctest::Approx(r.report.test_spearman).epsilon(1e-15));
}

TEST_CASE("evaluate: constructed gold orderings give +1 and -1") {
    RngState rng = make_rng(83);
    EncoderParams params = init_params(rng, small_encoder());
    CorpusConfig ccfg;
    ccfg.vocab_size = 500;
    RngState drng = make_rng(84);
    SynthData d = synth_sts(drng, 10, 24, 6, ccfg);

    std::vector<StsPair> pairs = d.dev;
    std::vector<TokenSequence> lefts, rights;
    for (const auto& p : pairs) {
        lefts.push_back(p.left);
        rights.push_back(p.right);
    }
    Matrix zl = pooled_embeddings(params, lefts);
    Matrix zr = pooled_embeddings(params, rights);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        double c = cosine_similarity(zl.row(i), zr.row(i));
        pairs[i].gold = 2.5 * (1.0 + c);
    }
    CHECK(evaluate(params, pairs, true) == doctest::Approx(1.0).epsilon(1e-12));
    for (auto& p : pairs) p.gold = 5.0 - p.gold;
    CHECK(evaluate(params, pairs, true) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("evaluate: post-MLP route differs from pre-MLP and stays in range") {
    SmallData data = small_dataset();
    RngState rng = make_rng(85);
    EncoderParams params = init_params(rng, small_encoder());
    double pre = evaluate(params, data.dev, true);
    double post = evaluate(params, data.dev, false);
    CHECK(std::isfinite(pre));
    CHECK(std::isfinite(post));
    CHECK(pre >= -1.0);
    CHECK(pre <= 1.0);
    CHECK(post >= -1.0);
    CHECK(post <= 1.0);
}

TEST_CASE("checkpoint: round trip within float32 rounding") {
    RngState rng = make_rng(86);
    EncoderParams params = init_params(rng, small_encoder());
    auto path = std::filesystem::temp_directory_path() / "cllab_ckpt_test.bin";
    CheckpointMeta meta;
    meta.seed = 99;
    meta.step = 1234;
    save_checkpoint(params, path, meta);

    CheckpointMeta loaded_meta;
    EncoderParams loaded = load_checkpoint(path, &loaded_meta);
    CHECK(loaded_meta.seed == 99);
    CHECK(loaded_meta.step == 1234);
    CHECK(loaded.cfg.vocab_size == params.cfg.vocab_size);
    CHECK(loaded.cfg.out_dim == params.cfg.out_dim);
    double worst = 0.0;
    for (std::size_t i = 0; i < params.token_table.values.size(); ++i) {
        double orig = params.token_table.values[i];
        double diff = std::abs(orig - loaded.token_table.values[i]);
        worst = std::max(worst, diff - std::abs(orig) * 6e-8);  // 2^-24 relative
    }
    CHECK(worst <= 0.0);
}

TEST_CASE("checkpoint: corrupt files are rejected without partial state") {
    RngState rng = make_rng(87);
    EncoderParams params = init_params(rng, small_encoder(50));
    auto dir = std::filesystem::temp_directory_path();
    auto path = dir / "cllab_ckpt_corrupt.bin";
    save_checkpoint(params, path);

    // bad magic
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.put('X');
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("bad magic"),
                         std::runtime_error);

    // truncated tensor payload
    save_checkpoint(params, path);
    auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size - 64);
    try {
        load_checkpoint(path);
        FAIL("expected runtime_error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }

    // metadata shape disagreeing with the payload names the tensor it breaks
    save_checkpoint(params, path);
    {
        std::ifstream in(path, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
        std::uint32_t len = static_cast<unsigned char>(bytes[5]) |
                            (static_cast<unsigned char>(bytes[6]) << 8) |
                            (static_cast<unsigned char>(bytes[7]) << 16) |
                            (static_cast<unsigned char>(bytes[8]) << 24);
        std::string md(bytes.begin() + 9, bytes.begin() + 9 + len);
        auto pos = md.find("\"out_dim\":12");
        REQUIRE(pos != std::string::npos);
        md.replace(pos, 12, "\"out_dim\":13");
        std::ofstream out(path, std::ios::binary);
        out.write(bytes.data(), 5);
        std::uint32_t nlen = static_cast<std::uint32_t>(md.size());
        char lenb[4] = {static_cast<char>(nlen & 0xFF), static_cast<char>((nlen >> 8) & 0xFF),
                        static_cast<char>((nlen >> 16) & 0xFF),
                        static_cast<char>((nlen >> 24) & 0xFF)};
        out.write(lenb, 4);
        out.write(md.data(), md.size());
        out.write(bytes.data() + 9 + len, bytes.size() - 9 - len);
    }
    try {
        load_checkpoint(path);
        FAIL("expected runtime_error");
    } catch (const std::runtime_error& e) {
        std::string msg = e.what();
        CHECK((msg.find("out_w") != std::string::npos ||
               msg.find("out_dim") != std::string::npos ||
               msg.find("trailing") != std::string::npos));
    }
}

TEST_CASE("metrics CSV has the contract header and one row per eval") {
    SmallData data = small_dataset();
    TrainConfig cfg = small_train_config();
    cfg.epochs = 1;
    TrainResult r = train(cfg, data.corpus, data.dev, data.test);
    auto path = std::filesystem::temp_directory_path() / "cllab_metrics_test.csv";
    write_metrics_csv(path, r.report);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "step,loss,loss_info,loss_dcl,dev_spearman,alignment,uniformity");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == r.report.history.size());
}

TEST_CASE("train config validation") {
    TrainConfig cfg = small_train_config();
    cfg.eval_interval = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_train_config();
    cfg.loss.tau = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_train_config();
    cfg.objective = Objective::OffInfo;
    cfg.neg_noise = noise_mode_from_name("mean:10");
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_train_config();
    cfg.bt_pad_rows = 10;  // without objective=bt
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.objective = Objective::Bt;
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("train: bt objective with artificial padding runs and learns nothing from pads") {
    SmallData data = small_dataset();
    TrainConfig cfg = small_train_config();
    cfg.objective = Objective::Bt;
    cfg.bt_pad_rows = 20;
    cfg.epochs = 1;
    TrainResult r = train(cfg, data.corpus, data.dev, data.test);
    CHECK_FALSE(r.report.history.empty());
    for (const auto& pt : r.report.history) CHECK(std::isfinite(pt.loss));
}
