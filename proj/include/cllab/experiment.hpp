#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "cllab/corpus.hpp"
#include "cllab/trainer.hpp"

namespace cllab {

// Config or usage problem; maps to exit code 1 at the CLI boundary.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat dotted-key experiment description. See config_schema_text() and the
// README for the documented key set.
struct ExperimentConfig {
    TrainConfig train;
    CorpusConfig corpus;

    std::string data_source = "synth";  // "synth" or a one-sentence-per-line file
    std::string dev_pairs_path;         // TSV, required when data_source is a file
    std::string test_pairs_path;
    std::size_t synth_sentences = 4096;
    std::size_t synth_eval_pairs = 256;
    std::size_t synth_latent_dim = 16;
    std::uint64_t synth_seed = 7;  // generator seed, independent of train.seed
    bool export_data = false;      // write corpus/dev/test copies under out_dir/data

    std::string out_dir = "out";
};

// Parses `key = value` lines ('#' comments, blank lines ignored), then
// applies `--set key=value` overrides. Unknown keys are rejected with the
// offending key named. train.seed falls back to the CLLAB_SEED environment
// variable when neither the file nor an override provides it.
ExperimentConfig parse_experiment_config(const std::string& config_path,
                                         const std::vector<std::string>& overrides);

// One "key<TAB>default<TAB>description" line per documented key.
std::string config_schema_text();

struct DatasetBundle {
    std::vector<TokenSequence> corpus;
    std::vector<StsPair> dev;
    std::vector<StsPair> test;
    // text forms, populated for synthetic data (used by export)
    std::vector<std::string> corpus_text;
    std::vector<TextPair> dev_text;
    std::vector<TextPair> test_text;
};

DatasetBundle load_dataset(const ExperimentConfig& cfg);

}  // namespace cllab
