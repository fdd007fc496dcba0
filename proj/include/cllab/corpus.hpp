#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cllab/rng.hpp"

namespace cllab {

struct CorpusConfig {
    std::size_t vocab_size = 30000;
    std::size_t max_seq_len = 32;
    bool lowercase = true;
};

struct TokenSequence {
    std::vector<std::uint32_t> ids;   // each < vocab_size, length <= max_seq_len
    std::size_t original_length = 0;  // token count before truncation
    bool empty() const { return ids.empty(); }
};

struct StsPair {
    TokenSequence left;
    TokenSequence right;
    double gold = 0.0;  // in [0, 5]
};

std::uint64_t fnv1a64(std::string_view s);

// Whitespace split, optional lowercasing, FNV-1a 64-bit hash modulo
// vocab_size, truncation to max_seq_len. An all-whitespace line yields the
// empty-sequence marker (ids empty), which loaders skip.
TokenSequence tokenize(std::string_view line, const CorpusConfig& cfg);

// One sentence per LF-delimited line; blank lines skipped.
std::vector<TokenSequence> load_corpus(const std::filesystem::path& path,
                                       const CorpusConfig& cfg);

// Affine map from latent cosine to the STS score convention [0, 5].
inline double sts_gold_from_cosine(double cosine) { return 2.5 * (1.0 + cosine); }

struct TextPair {
    std::string left;
    std::string right;
    double gold = 0.0;
};

// Synthetic STS dataset: every sentence is a bag of tokens sampled from a
// topic distribution planted by a latent unit vector; a pair's gold score is
// 2.5*(1 + cos) of the two latents. Text forms are kept for export.
struct SynthData {
    std::vector<std::string> corpus_text;
    std::vector<TokenSequence> corpus;
    std::vector<TextPair> dev_text;
    std::vector<TextPair> test_text;
    std::vector<StsPair> dev;
    std::vector<StsPair> test;
};

SynthData synth_sts(RngState& rng, std::size_t n_train_sentences,
                    std::size_t n_eval_pairs, std::size_t latent_dim,
                    const CorpusConfig& cfg);

// Deterministic epoch-salted shuffle, final short batch dropped so the
// in-batch negative count stays constant. Throws std::invalid_argument when
// batch_size exceeds the corpus size.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t corpus_size,
                                                    std::size_t batch_size,
                                                    std::uint64_t shuffle_seed,
                                                    std::uint64_t epoch);

// Tab-separated `left \t right \t gold` files.
void save_pairs_tsv(const std::filesystem::path& path,
                    const std::vector<TextPair>& pairs);
std::vector<StsPair> load_pairs_tsv(const std::filesystem::path& path,
                                    const CorpusConfig& cfg);

}  // namespace cllab
