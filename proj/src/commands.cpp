#include "cllab/commands.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <thread>

#include "cllab/core_math.hpp"
#include "cllab/diagnostics.hpp"
#include "cllab/experiment.hpp"

namespace cllab {

namespace fs = std::filesystem;

namespace {

std::string fmt_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void export_synth_data(const DatasetBundle& data, const fs::path& dir) {
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "corpus.txt");
        if (!out) throw std::runtime_error("cannot open " + (dir / "corpus.txt").string());
        for (const auto& line : data.corpus_text) out << line << '\n';
    }
    save_pairs_tsv(dir / "dev.tsv", data.dev_text);
    save_pairs_tsv(dir / "test.tsv", data.test_text);
}

std::vector<double> parse_csv_reals(const std::string& csv, const char* what) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        std::size_t comma = csv.find(',', start);
        std::string item = csv.substr(
            start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!item.empty()) {
            try {
                out.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw ConfigError(std::string(what) + ": bad number '" + item + "'");
            }
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides) {
    try {
        ExperimentConfig cfg = parse_experiment_config(config_path, overrides);
        fs::create_directories(cfg.out_dir);
        DatasetBundle data = load_dataset(cfg);
        if (cfg.export_data && cfg.data_source == "synth")
            export_synth_data(data, fs::path(cfg.out_dir) / "data");

        TrainResult result = train(cfg.train, data.corpus, data.dev, data.test);

        write_metrics_csv(fs::path(cfg.out_dir) / "metrics.csv", result.report);
        {
            std::ofstream out(fs::path(cfg.out_dir) / "report.json");
            out << train_report_json(cfg.train, result.report) << '\n';
        }
        CheckpointMeta meta;
        meta.seed = cfg.train.seed;
        meta.step = result.report.best_step;
        meta.config_echo = train_config_json_text(cfg.train);
        save_checkpoint(result.best_params, fs::path(cfg.out_dir) / "best.ckpt", meta);

        if (result.report.diverged) {
            CheckpointMeta last;
            last.seed = cfg.train.seed;
            last.step = result.report.total_steps;
            last.config_echo = meta.config_echo;
            save_checkpoint(result.final_params,
                            fs::path(cfg.out_dir) / "last_good.ckpt", last);
            std::cerr << "train: loss became non-finite at step "
                      << result.report.diverged_step
                      << "; best and last-good checkpoints saved\n";
            return 2;
        }
        std::cout << "train: steps=" << result.report.total_steps
                  << " best_step=" << result.report.best_step
                  << " best_dev_spearman=" << fmt_real(result.report.best_dev_spearman)
                  << " test_spearman=" << fmt_real(result.report.test_spearman) << '\n';
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "train: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "train: " << e.what() << '\n';
        return 2;
    }
}

namespace {

struct GridCell {
    std::string label;                  // value column in the CSV
    std::vector<std::string> settings;  // extra --set directives
};

std::vector<GridCell> build_grid(const std::string& axis, const std::string& values_csv) {
    std::vector<GridCell> cells;
    auto numeric_axis = [&](const char* key, std::vector<double> defaults) {
        std::vector<double> vals = values_csv.empty()
                                       ? std::move(defaults)
                                       : parse_csv_reals(values_csv, "--values");
        if (vals.empty()) throw ConfigError("--values produced an empty grid");
        for (double v : vals)
            cells.push_back({fmt_real(v), {std::string(key) + "=" + fmt_real(v)}});
    };
    if (axis == "m") {
        numeric_axis("loss.m", {0.5, 0.8, 0.9, 1.0, 1.1, 1.2});
    } else if (axis == "lambda_dcl") {
        numeric_axis("loss.lambda_dcl", {0.02, 0.05, 0.1, 0.2, 0.5, 1.0});
    } else if (axis == "tau_dcl") {
        numeric_axis("loss.tau_dcl", {1.0, 2.0, 5.0, 10.0, 20.0, 50.0});
    } else if (axis == "noise") {
        cells.push_back({"baseline", {}});
        cells.push_back({"pos_plus", {"train.pos_noise=plus:0.1"}});
        cells.push_back({"pos_minus", {"train.pos_noise=mean:10"}});
        cells.push_back({"neg_plus", {"train.neg_noise=plus:0.1"}});
        cells.push_back({"neg_minus", {"train.neg_noise=mean:10"}});
    } else {
        throw ConfigError("unknown ablation axis: " + axis +
                          " (expected m | lambda_dcl | tau_dcl | noise)");
    }
    return cells;
}

struct CellResult {
    double best_dev = 0.0;
    std::size_t best_step = 0;
    std::string status;  // "ok" or "error: ..."
};

}  // namespace

int cmd_ablate(const std::string& config_path, const std::vector<std::string>& overrides,
               const std::string& axis, const std::string& values_csv, std::size_t jobs) {
    try {
        std::vector<GridCell> cells = build_grid(axis, values_csv);

        // Validate the base config once so config mistakes fail fast.
        ExperimentConfig base = parse_experiment_config(config_path, overrides);
        fs::create_directories(base.out_dir);
        DatasetBundle data = load_dataset(base);  // shared, immutable across cells

        std::vector<CellResult> results(cells.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            while (true) {
                std::size_t i = next.fetch_add(1);
                if (i >= cells.size()) break;
                try {
                    std::vector<std::string> cell_overrides = overrides;
                    cell_overrides.insert(cell_overrides.end(), cells[i].settings.begin(),
                                          cells[i].settings.end());
                    ExperimentConfig cfg =
                        parse_experiment_config(config_path, cell_overrides);
                    TrainResult r = train(cfg.train, data.corpus, data.dev, data.test);
                    if (r.report.diverged) {
                        results[i].status = "error: diverged at step " +
                                            std::to_string(r.report.diverged_step);
                    } else {
                        results[i].best_dev = r.report.best_dev_spearman;
                        results[i].best_step = r.report.best_step;
                        results[i].status = "ok";
                    }
                } catch (const std::exception& e) {
                    results[i].status = std::string("error: ") + e.what();
                }
            }
        };
        std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, cells.size()));
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t + 1 < n_threads; ++t) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();

        fs::path csv_path = fs::path(base.out_dir) / ("ablation_" + axis + ".csv");
        std::ofstream out(csv_path);
        if (!out) throw std::runtime_error("cannot open " + csv_path.string());
        out << "axis,value,best_dev_spearman,best_step,status\n";
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const auto& r = results[i];
            out << axis << ',' << cells[i].label << ',';
            if (r.status == "ok")
                out << fmt_real(r.best_dev) << ',' << r.best_step;
            else
                out << ',';
            out << ',' << r.status << '\n';
        }
        out.close();
        std::cout << "ablate: axis=" << axis << " cells=" << cells.size() << " -> "
                  << csv_path.string() << '\n';
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "ablate: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "ablate: " << e.what() << '\n';
        return 2;
    }
}

int cmd_diagnose(const std::string& checkpoint_path, const std::string& config_path,
                 const std::vector<std::string>& overrides, const std::string& pads_csv,
                 std::size_t k, std::size_t draws, bool deterministic) {
    try {
        ExperimentConfig cfg = parse_experiment_config(config_path, overrides);
        fs::create_directories(cfg.out_dir);
        EncoderParams params = load_checkpoint(checkpoint_path);
        if (params.cfg.vocab_size != cfg.corpus.vocab_size)
            throw ConfigError("corpus.vocab_size (" +
                              std::to_string(cfg.corpus.vocab_size) +
                              ") disagrees with the checkpoint's vocab_size (" +
                              std::to_string(params.cfg.vocab_size) + ")");
        DatasetBundle data = load_dataset(cfg);
        std::size_t n = std::min(cfg.train.batch_size, data.corpus.size());
        std::vector<TokenSequence> batch(data.corpus.begin(),
                                         data.corpus.begin() + static_cast<std::ptrdiff_t>(n));

        std::vector<std::size_t> pads;
        for (double v : parse_csv_reals(pads_csv.empty() ? "0,100,300,704" : pads_csv,
                                        "--pads")) {
            if (v < 0.0) throw ConfigError("--pads: negative pad count");
            pads.push_back(static_cast<std::size_t>(v));
        }

        RngState root = make_rng(cfg.train.seed);
        Matrix z1, z2, det;
        det = forward(params, batch, Deterministic{}).first;
        if (deterministic) {
            z1 = det;
            z2 = det;
        } else {
            z1 = forward(params, batch, Dropout{split_stream(root, 10)}).first;
            z2 = forward(params, batch, Dropout{split_stream(root, 11)}).first;
        }

        RngState pad_rng = split_stream(root, 12);
        RankReport rank = rank_report(z1, z2, pads, pad_rng);

        VarianceReport var;
        if (deterministic) {
            std::vector<Matrix> repeats;
            for (int i = 0; i < 8; ++i)
                repeats.push_back(forward(params, batch, Deterministic{}).first);
            var.k = k;
            var.single_draw_variance = mean_coordinate_variance(repeats);
            var.mean_of_k_variance = var.single_draw_variance;
            var.ratio = var.single_draw_variance == 0.0
                            ? 0.0
                            : var.mean_of_k_variance / var.single_draw_variance;
        } else {
            RngState var_rng = split_stream(root, 13);
            var = variance_report(params, batch, k, draws, var_rng);
        }

        GeometryReport geo;
        geo.alignment = alignment(z1, z2);
        geo.uniformity = uniformity(det);

        nlohmann::json j;
        j["rank"] = nlohmann::json::parse(to_json(rank));
        j["variance"] = nlohmann::json::parse(to_json(var));
        j["geometry"] = nlohmann::json::parse(to_json(geo));
        std::string text = j.dump(2);
        {
            std::ofstream out(fs::path(cfg.out_dir) / "diagnose.json");
            out << text << '\n';
        }
        std::cout << text << '\n';
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "diagnose: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "diagnose: " << e.what() << '\n';
        return 2;
    }
}

int cmd_gradcheck(double step, double threshold, std::size_t seeds, bool inject_sign_flip) {
    try {
        if (step <= 0.0 || threshold <= 0.0) {
            std::cerr << "gradcheck: step and threshold must be > 0\n";
            return 1;
        }
        constexpr std::size_t kN = 8, kD = 16;
        const LossConfig loss_cfg;
        const ObjectiveKind kinds[] = {ObjectiveKind::InfoNce, ObjectiveKind::OffInfoNce,
                                       ObjectiveKind::BarlowTwins, ObjectiveKind::Dcl,
                                       ObjectiveKind::Combined};
        // Self-test hook: negate the largest-magnitude analytic entry.
        std::function<void(LossReport&)> mutator;
        if (inject_sign_flip) {
            mutator = [](LossReport& r) {
                double best = -1.0;
                std::size_t bk = 0, bi = 0;
                for (std::size_t k = 0; k < r.grads.size(); ++k)
                    for (std::size_t i = 0; i < r.grads[k].values.size(); ++i)
                        if (std::abs(r.grads[k].values[i]) > best) {
                            best = std::abs(r.grads[k].values[i]);
                            bk = k;
                            bi = i;
                        }
                r.grads[bk].values[bi] = -r.grads[bk].values[bi];
            };
        }

        bool ok = true;
        for (std::size_t s = 0; s < seeds; ++s) {
            RngState rng = make_rng(1000 + s);
            Matrix z1 = gaussian_sample(rng, kN, kD, 0.0, 1.0);
            Matrix z2 = gaussian_sample(rng, kN, kD, 0.0, 1.0);
            Matrix z0 = gaussian_sample(rng, kN, kD, 0.0, 1.0);
            for (ObjectiveKind kind : kinds) {
                std::vector<Matrix> inputs;
                if (kind == ObjectiveKind::OffInfoNce || kind == ObjectiveKind::Combined)
                    inputs = {z1, z2, z0};
                else
                    inputs = {z1, z2};
                AuditDetail d = finite_diff_audit_detail(kind, inputs, loss_cfg, step, mutator);
                bool pass = d.worst_rel_error < threshold;
                std::printf("gradcheck %-13s seed=%zu worst_rel_error=%.3e %s\n",
                            objective_kind_name(kind), s, d.worst_rel_error,
                            pass ? "ok" : "FAIL");
                if (!pass) {
                    std::fprintf(stderr,
                                 "gradcheck: %s exceeded threshold %.3e at input %zu "
                                 "entry %zu (worst %.3e)\n",
                                 objective_kind_name(kind), threshold, d.input_index,
                                 d.entry_index, d.worst_rel_error);
                    ok = false;
                }
            }
        }
        return ok ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "gradcheck: " << e.what() << '\n';
        return 2;
    }
}

int cmd_eval(const std::string& checkpoint_path, const std::string& config_path,
             const std::vector<std::string>& overrides, const std::string& pairs_tsv) {
    try {
        ExperimentConfig cfg = parse_experiment_config(config_path, overrides);
        fs::create_directories(cfg.out_dir);
        EncoderParams params = load_checkpoint(checkpoint_path);
        if (params.cfg.vocab_size != cfg.corpus.vocab_size)
            throw ConfigError("corpus.vocab_size disagrees with the checkpoint's vocab_size");
        std::vector<StsPair> pairs;
        if (!pairs_tsv.empty()) {
            pairs = load_pairs_tsv(pairs_tsv, cfg.corpus);
        } else {
            pairs = load_dataset(cfg).test;
        }
        double rho = evaluate(params, pairs, cfg.train.eval_pre_mlp);
        nlohmann::json j;
        j["spearman"] = rho;
        j["pairs"] = pairs.size();
        j["eval_pre_mlp"] = cfg.train.eval_pre_mlp;
        std::string text = j.dump();
        {
            std::ofstream out(fs::path(cfg.out_dir) / "eval.json");
            out << text << '\n';
        }
        std::cout << text << '\n';
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "eval: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "eval: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace cllab
