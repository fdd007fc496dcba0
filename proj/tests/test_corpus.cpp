#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "cllab/corpus.hpp"
#include "cllab/rng.hpp"

using namespace cllab;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
    auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("tokenize: hash determinism and truncation") {
    CorpusConfig cfg;
    TokenSequence seq = tokenize("a a b", cfg);
    REQUIRE(seq.ids.size() == 3);
    CHECK(seq.ids[0] == seq.ids[1]);
    CHECK(seq.ids[0] != seq.ids[2]);
    CHECK(seq.original_length == 3);

    cfg.max_seq_len = 32;
    std::string long_line;
    for (int i = 0; i < 40; ++i) long_line += "w" + std::to_string(i) + " ";
    TokenSequence truncated = tokenize(long_line, cfg);
    CHECK(truncated.ids.size() == 32);
    CHECK(truncated.original_length == 40);

    TokenSequence again = tokenize(long_line, cfg);
    CHECK(truncated.ids == again.ids);

    for (auto id : truncated.ids) CHECK(id < cfg.vocab_size);
}

TEST_CASE("tokenize: lowercasing merges case variants, blank lines are markers") {
    CorpusConfig cfg;
    CHECK(tokenize("Hello", cfg).ids == tokenize("hello", cfg).ids);
    cfg.lowercase = false;
    CHECK(tokenize("Hello", cfg).ids != tokenize("hello", cfg).ids);
    CHECK(tokenize("   \t  ", cfg).empty());
    CHECK(tokenize("", cfg).empty());
}

TEST_CASE("load_corpus: counts, blank skipping, determinism") {
    CorpusConfig cfg;
    auto path = temp_file("cllab_corpus_test.txt", "one two\nthree\nfour five six\n");
    auto seqs = load_corpus(path, cfg);
    REQUIRE(seqs.size() == 3);
    CHECK(seqs[0].ids.size() == 2);
    CHECK(seqs[2].ids.size() == 3);

    auto blank = temp_file("cllab_corpus_blank.txt", "one\n\n  \ntwo\n");
    CHECK(load_corpus(blank, cfg).size() == 2);

    auto reloaded = load_corpus(path, cfg);
    for (std::size_t i = 0; i < seqs.size(); ++i) CHECK(seqs[i].ids == reloaded[i].ids);

    CHECK_THROWS_AS(load_corpus("/nonexistent/cllab.txt", cfg), std::runtime_error);
}

TEST_CASE("synth_sts: gold range, determinism, disjoint splits") {
    CorpusConfig cfg;
    RngState rng = make_rng(77);
    SynthData data = synth_sts(rng, 50, 20, 8, cfg);
    CHECK(data.corpus.size() == 50);
    CHECK(data.dev.size() == 20);
    CHECK(data.test.size() == 20);
    for (const auto& p : data.dev) {
        CHECK(p.gold >= 0.0);
        CHECK(p.gold <= 5.0);
        CHECK_FALSE(p.left.empty());
        CHECK_FALSE(p.right.empty());
    }

    RngState rng2 = make_rng(77);
    SynthData data2 = synth_sts(rng2, 50, 20, 8, cfg);
    CHECK(data.corpus_text == data2.corpus_text);
    for (std::size_t i = 0; i < data.dev.size(); ++i) {
        CHECK(data.dev[i].gold == data2.dev[i].gold);
        CHECK(data.dev[i].left.ids == data2.dev[i].left.ids);
    }

    std::set<std::string> dev_lines, test_lines;
    for (const auto& p : data.dev_text) dev_lines.insert(p.left + "\t" + p.right);
    for (const auto& p : data.test_text) test_lines.insert(p.left + "\t" + p.right);
    for (const auto& line : test_lines) CHECK(dev_lines.count(line) == 0);
}

TEST_CASE("sts_gold_from_cosine: identical and orthogonal latents") {
    CHECK(sts_gold_from_cosine(1.0) == doctest::Approx(5.0));
    CHECK(sts_gold_from_cosine(0.0) == doctest::Approx(2.5));
    CHECK(sts_gold_from_cosine(-1.0) == doctest::Approx(0.0));
}

TEST_CASE("epoch_batches: drop-last, coverage, epoch salting") {
    auto batches = epoch_batches(130, 64, 9, 0);
    REQUIRE(batches.size() == 2);  // 130 / 64, final short batch dropped
    CHECK(batches[0].size() == 64);
    CHECK(batches[1].size() == 64);

    std::set<std::size_t> seen;
    for (const auto& b : batches)
        for (std::size_t idx : b) {
            CHECK(idx < 130);
            CHECK(seen.insert(idx).second);  // each sentence at most once per epoch
        }
    CHECK(seen.size() == 128);

    auto again = epoch_batches(130, 64, 9, 0);
    CHECK(batches == again);
    auto other_epoch = epoch_batches(130, 64, 9, 1);
    CHECK(batches != other_epoch);
    auto other_seed = epoch_batches(130, 64, 10, 0);
    CHECK(batches != other_seed);

    CHECK_THROWS_AS(epoch_batches(10, 11, 0, 0), std::invalid_argument);
}

TEST_CASE("epoch_batches: exact coverage when batch divides corpus") {
    auto batches = epoch_batches(128, 32, 1, 3);
    std::set<std::size_t> seen;
    for (const auto& b : batches)
        for (std::size_t idx : b) seen.insert(idx);
    CHECK(seen.size() == 128);
}

TEST_CASE("pairs tsv: round trip preserves gold and tokens") {
    CorpusConfig cfg;
    RngState rng = make_rng(5);
    SynthData data = synth_sts(rng, 10, 8, 4, cfg);
    auto path = std::filesystem::temp_directory_path() / "cllab_pairs_test.tsv";
    save_pairs_tsv(path, data.dev_text);
    auto loaded = load_pairs_tsv(path, cfg);
    REQUIRE(loaded.size() == data.dev.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].gold == doctest::Approx(data.dev[i].gold).epsilon(1e-9));
        CHECK(loaded[i].left.ids == data.dev[i].left.ids);
        CHECK(loaded[i].right.ids == data.dev[i].right.ids);
    }
    CHECK_THROWS_AS(load_pairs_tsv("/nonexistent/pairs.tsv", cfg), std::runtime_error);

    auto bad = std::filesystem::temp_directory_path() / "cllab_pairs_bad.tsv";
    std::ofstream(bad) << "only one field\n";
    CHECK_THROWS_AS(load_pairs_tsv(bad, cfg), std::runtime_error);
}

TEST_CASE("synth gold is symmetric in pair order") {
    // gold depends on the two latents only through the cosine; exporting the
    // swapped pairs and re-reading must preserve every score
    CorpusConfig cfg;
    RngState rng = make_rng(123);
    SynthData data = synth_sts(rng, 5, 10, 6, cfg);
    std::vector<TextPair> swapped;
    for (const auto& p : data.dev_text) swapped.push_back({p.right, p.left, p.gold});
    auto path = std::filesystem::temp_directory_path() / "cllab_pairs_swap.tsv";
    save_pairs_tsv(path, swapped);
    auto loaded = load_pairs_tsv(path, cfg);
    for (std::size_t i = 0; i < loaded.size(); ++i)
        CHECK(loaded[i].gold == doctest::Approx(data.dev[i].gold).epsilon(1e-9));
}
