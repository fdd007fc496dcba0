#include "cllab/experiment.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace cllab {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw ConfigError("config key " + key + ": expected a boolean, got '" + v + "'");
}

double parse_real(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing characters");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": expected a real number, got '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        unsigned long long u = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing characters");
        return u;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key +
                          ": expected a non-negative integer, got '" + v + "'");
    }
}

struct KeyDoc {
    const char* key;
    const char* def;
    const char* doc;
};

constexpr KeyDoc kSchema[] = {
    {"data.source", "synth", "corpus: 'synth' or a one-sentence-per-line text file"},
    {"data.dev_pairs", "", "dev TSV (left\\tright\\tgold); required for file corpora"},
    {"data.test_pairs", "", "test TSV; required for file corpora"},
    {"data.synth_sentences", "4096", "synthetic training sentences"},
    {"data.synth_eval_pairs", "256", "synthetic dev/test pairs (each)"},
    {"data.synth_latent_dim", "16", "synthetic topic-latent dimensionality"},
    {"data.synth_seed", "7", "synthetic generator seed (independent of train.seed)"},
    {"data.export", "false", "write corpus/dev/test copies under <out.dir>/data"},
    {"corpus.vocab_size", "30000", "hashing-tokenizer vocabulary size (also the encoder's)"},
    {"corpus.max_seq_len", "32", "token truncation length"},
    {"corpus.lowercase", "true", "lowercase before hashing"},
    {"encoder.embed_dim", "64", "token-embedding width E"},
    {"encoder.hidden_dim", "128", "hidden width H"},
    {"encoder.out_dim", "64", "output width D (up to 768 for rank experiments)"},
    {"encoder.p_keep", "0.9", "dropout keep probability"},
    {"encoder.tanh_head", "true", "tanh hidden activation; false = linear test head"},
    {"loss.tau", "0.05", "InfoNCE temperature"},
    {"loss.m", "0.9", "off-dropout negative trade-off"},
    {"loss.tau_dcl", "5", "DCL temperature"},
    {"loss.lambda_dcl", "0.1", "DCL weight in dcl_only/combined"},
    {"loss.lambda_bt", "0.005", "BarlowTwins off-diagonal weight"},
    {"train.objective", "info_nce", "info_nce | off_info | dcl_only | bt | combined"},
    {"train.lr", "3e-5", "Adam learning rate"},
    {"train.batch_size", "64", "sentences per update (short final batch dropped)"},
    {"train.epochs", "1", "passes over the corpus"},
    {"train.eval_interval", "125", "update steps between dev evaluations"},
    {"train.seed", "42", "training seed (CLLAB_SEED overrides this default)"},
    {"train.eval_pre_mlp", "true", "evaluate at the pooling output (MLP removed)"},
    {"train.pos_noise", "none", "positive-pair views: none | plus:VAR | mean:K"},
    {"train.neg_noise", "none", "negative-pair views: none | plus:VAR | mean:K"},
    {"train.bt_pad_rows", "0", "artificial rows padded for the bt objective"},
    {"out.dir", "out", "output directory for all artifacts"},
};

void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    auto& t = cfg.train;
    if (key == "data.source") cfg.data_source = value;
    else if (key == "data.dev_pairs") cfg.dev_pairs_path = value;
    else if (key == "data.test_pairs") cfg.test_pairs_path = value;
    else if (key == "data.synth_sentences") cfg.synth_sentences = parse_u64(key, value);
    else if (key == "data.synth_eval_pairs") cfg.synth_eval_pairs = parse_u64(key, value);
    else if (key == "data.synth_latent_dim") cfg.synth_latent_dim = parse_u64(key, value);
    else if (key == "data.synth_seed") cfg.synth_seed = parse_u64(key, value);
    else if (key == "data.export") cfg.export_data = parse_bool(key, value);
    else if (key == "corpus.vocab_size") cfg.corpus.vocab_size = parse_u64(key, value);
    else if (key == "corpus.max_seq_len") cfg.corpus.max_seq_len = parse_u64(key, value);
    else if (key == "corpus.lowercase") cfg.corpus.lowercase = parse_bool(key, value);
    else if (key == "encoder.embed_dim") t.encoder.embed_dim = parse_u64(key, value);
    else if (key == "encoder.hidden_dim") t.encoder.hidden_dim = parse_u64(key, value);
    else if (key == "encoder.out_dim") t.encoder.out_dim = parse_u64(key, value);
    else if (key == "encoder.p_keep") t.encoder.p_keep = parse_real(key, value);
    else if (key == "encoder.tanh_head") t.encoder.tanh_head = parse_bool(key, value);
    else if (key == "loss.tau") t.loss.tau = parse_real(key, value);
    else if (key == "loss.m") t.loss.m = parse_real(key, value);
    else if (key == "loss.tau_dcl") t.loss.tau_dcl = parse_real(key, value);
    else if (key == "loss.lambda_dcl") t.loss.lambda_dcl = parse_real(key, value);
    else if (key == "loss.lambda_bt") t.loss.lambda_bt = parse_real(key, value);
    else if (key == "train.objective") {
        try {
            t.objective = objective_from_name(value);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config key train.objective: ") + e.what());
        }
    } else if (key == "train.lr") t.lr = parse_real(key, value);
    else if (key == "train.batch_size") t.batch_size = parse_u64(key, value);
    else if (key == "train.epochs") t.epochs = parse_u64(key, value);
    else if (key == "train.eval_interval") t.eval_interval = parse_u64(key, value);
    else if (key == "train.seed") t.seed = parse_u64(key, value);
    else if (key == "train.eval_pre_mlp") t.eval_pre_mlp = parse_bool(key, value);
    else if (key == "train.pos_noise" || key == "train.neg_noise") {
        NoiseMode m;
        try {
            m = noise_mode_from_name(value);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("config key " + key + ": " + e.what());
        }
        (key == "train.pos_noise" ? t.pos_noise : t.neg_noise) = m;
    } else if (key == "train.bt_pad_rows") t.bt_pad_rows = parse_u64(key, value);
    else if (key == "out.dir") cfg.out_dir = value;
    else throw ConfigError("unknown config key: " + key);
}

}  // namespace

std::string config_schema_text() {
    std::ostringstream out;
    for (const auto& k : kSchema)
        out << k.key << '\t' << k.def << '\t' << k.doc << '\n';
    return out.str();
}

ExperimentConfig parse_experiment_config(const std::string& config_path,
                                         const std::vector<std::string>& overrides) {
    ExperimentConfig cfg;
    if (const char* env = std::getenv("CLLAB_SEED"))
        cfg.train.seed = parse_u64("CLLAB_SEED", env);

    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config file: " + config_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError(config_path + ":" + std::to_string(lineno) +
                              ": expected 'key = value', got '" + s + "'");
        apply_key(cfg, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    }
    for (const std::string& ov : overrides) {
        std::size_t eq = ov.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + ov + "'");
        apply_key(cfg, trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)));
    }

    if (cfg.corpus.vocab_size < 2) throw ConfigError("corpus.vocab_size must be >= 2");
    if (cfg.corpus.max_seq_len < 1) throw ConfigError("corpus.max_seq_len must be >= 1");
    cfg.train.encoder.vocab_size = cfg.corpus.vocab_size;
    try {
        cfg.train.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (cfg.data_source != "synth" &&
        (cfg.dev_pairs_path.empty() || cfg.test_pairs_path.empty()))
        throw ConfigError(
            "file corpora need data.dev_pairs and data.test_pairs TSV paths");
    if (cfg.data_source == "synth" &&
        (cfg.synth_sentences < 1 || cfg.synth_eval_pairs < 1 || cfg.synth_latent_dim < 1))
        throw ConfigError("data.synth_* counts must be >= 1");
    return cfg;
}

DatasetBundle load_dataset(const ExperimentConfig& cfg) {
    DatasetBundle bundle;
    if (cfg.data_source == "synth") {
        RngState rng = make_rng(cfg.synth_seed);
        SynthData data = synth_sts(rng, cfg.synth_sentences, cfg.synth_eval_pairs,
                                   cfg.synth_latent_dim, cfg.corpus);
        bundle.corpus = std::move(data.corpus);
        bundle.dev = std::move(data.dev);
        bundle.test = std::move(data.test);
        bundle.corpus_text = std::move(data.corpus_text);
        bundle.dev_text = std::move(data.dev_text);
        bundle.test_text = std::move(data.test_text);
    } else {
        bundle.corpus = load_corpus(cfg.data_source, cfg.corpus);
        bundle.dev = load_pairs_tsv(cfg.dev_pairs_path, cfg.corpus);
        bundle.test = load_pairs_tsv(cfg.test_pairs_path, cfg.corpus);
    }
    if (bundle.corpus.empty()) throw ConfigError("dataset has no non-empty sentences");
    return bundle;
}

}  // namespace cllab
