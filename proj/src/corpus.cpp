#include "cllab/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cllab/core_math.hpp"

namespace cllab {

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

TokenSequence tokenize(std::string_view line, const CorpusConfig& cfg) {
    TokenSequence seq;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i == start) break;
        ++seq.original_length;
        if (seq.ids.size() >= cfg.max_seq_len) continue;  // count but drop past the cap
        std::string_view tok = line.substr(start, i - start);
        std::uint64_t h;
        if (cfg.lowercase) {
            std::string lowered(tok);
            std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            h = fnv1a64(lowered);
        } else {
            h = fnv1a64(tok);
        }
        seq.ids.push_back(static_cast<std::uint32_t>(h % cfg.vocab_size));
    }
    return seq;
}

std::vector<TokenSequence> load_corpus(const std::filesystem::path& path,
                                       const CorpusConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_corpus: cannot open " + path.string());
    std::vector<TokenSequence> out;
    std::string line;
    while (std::getline(in, line)) {
        TokenSequence seq = tokenize(line, cfg);
        if (!seq.empty()) out.push_back(std::move(seq));
    }
    return out;
}

namespace {

std::vector<double> unit_latent(RngState& rng, std::size_t dim) {
    std::vector<double> v(dim);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (double& x : v) {
            x = next_normal(rng);
            norm += x * x;
        }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
}

double latent_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] * b[i];
    return std::clamp(d, -1.0, 1.0);
}

// Words live in per-topic signed pools ("t3p5") plus a shared noise pool
// ("x42"); topics are chosen with probability proportional to the squared
// latent coordinate, so sentences with aligned latents share vocabulary.
// Narrow pools keep direct lexical overlap between same-topic sentences
// frequent enough for contrastive training to pick up at desk scale.
constexpr std::size_t kWordsPerPool = 8;
constexpr std::size_t kNoisePool = 120;
constexpr double kNoiseWordProb = 0.1;
constexpr std::size_t kMinWords = 10;
constexpr std::size_t kMaxWords = 20;

std::string sentence_from_latent(RngState& rng, const std::vector<double>& v) {
    std::vector<double> cumulative(v.size());
    double total = 0.0;
    for (std::size_t t = 0; t < v.size(); ++t) {
        total += v[t] * v[t];
        cumulative[t] = total;
    }
    std::size_t len = kMinWords + next_u64(rng) % (kMaxWords - kMinWords + 1);
    std::string line;
    for (std::size_t w = 0; w < len; ++w) {
        if (!line.empty()) line += ' ';
        if (next_uniform(rng) < kNoiseWordProb) {
            line += 'x';
            line += std::to_string(next_u64(rng) % kNoisePool);
            continue;
        }
        double u = next_uniform(rng) * total;
        std::size_t topic =
            std::lower_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin();
        if (topic >= v.size()) topic = v.size() - 1;
        line += 't';
        line += std::to_string(topic);
        line += (v[topic] >= 0.0 ? 'p' : 'n');
        line += std::to_string(next_u64(rng) % kWordsPerPool);
    }
    return line;
}

TextPair make_pair(RngState& rng, std::size_t latent_dim) {
    auto v1 = unit_latent(rng, latent_dim);
    // Pull the second latent toward or away from the first so pair
    // similarities cover the full range instead of clustering near 0.
    double alpha = 2.0 * next_uniform(rng) - 1.0;
    auto w = unit_latent(rng, latent_dim);
    std::vector<double> v2(latent_dim);
    double beta = std::sqrt(std::max(0.0, 1.0 - alpha * alpha));
    double norm = 0.0;
    for (std::size_t i = 0; i < latent_dim; ++i) {
        v2[i] = alpha * v1[i] + beta * w[i];
        norm += v2[i] * v2[i];
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) {
        v2 = v1;
        norm = 1.0;
    }
    for (double& x : v2) x /= norm;
    TextPair pair;
    pair.left = sentence_from_latent(rng, v1);
    pair.right = sentence_from_latent(rng, v2);
    pair.gold = sts_gold_from_cosine(latent_cosine(v1, v2));
    return pair;
}

}  // namespace

SynthData synth_sts(RngState& rng, std::size_t n_train_sentences,
                    std::size_t n_eval_pairs, std::size_t latent_dim,
                    const CorpusConfig& cfg) {
    if (n_train_sentences < 1 || n_eval_pairs < 1 || latent_dim < 1)
        throw std::invalid_argument("synth_sts: counts must be >= 1");
    SynthData data;
    data.corpus_text.reserve(n_train_sentences);
    data.corpus.reserve(n_train_sentences);
    for (std::size_t i = 0; i < n_train_sentences; ++i) {
        auto v = unit_latent(rng, latent_dim);
        std::string line = sentence_from_latent(rng, v);
        data.corpus.push_back(tokenize(line, cfg));
        data.corpus_text.push_back(std::move(line));
    }
    auto emit = [&](std::vector<TextPair>& text, std::vector<StsPair>& toks) {
        text.reserve(n_eval_pairs);
        toks.reserve(n_eval_pairs);
        for (std::size_t i = 0; i < n_eval_pairs; ++i) {
            TextPair p = make_pair(rng, latent_dim);
            toks.push_back(StsPair{tokenize(p.left, cfg), tokenize(p.right, cfg), p.gold});
            text.push_back(std::move(p));
        }
    };
    emit(data.dev_text, data.dev);
    emit(data.test_text, data.test);
    return data;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t corpus_size,
                                                    std::size_t batch_size,
                                                    std::uint64_t shuffle_seed,
                                                    std::uint64_t epoch) {
    if (batch_size == 0) throw std::invalid_argument("epoch_batches: batch_size must be >= 1");
    if (batch_size > corpus_size)
        throw std::invalid_argument("epoch_batches: batch_size exceeds corpus size");
    std::vector<std::size_t> perm(corpus_size);
    for (std::size_t i = 0; i < corpus_size; ++i) perm[i] = i;
    RngState rng = split_stream(make_rng(shuffle_seed), epoch);
    for (std::size_t i = corpus_size; i > 1; --i) {
        std::size_t j = next_u64(rng) % i;
        std::swap(perm[i - 1], perm[j]);
    }
    std::vector<std::vector<std::size_t>> batches;
    std::size_t full = corpus_size / batch_size;  // drop-last
    batches.reserve(full);
    for (std::size_t b = 0; b < full; ++b) {
        batches.emplace_back(perm.begin() + b * batch_size,
                             perm.begin() + (b + 1) * batch_size);
    }
    return batches;
}

void save_pairs_tsv(const std::filesystem::path& path,
                    const std::vector<TextPair>& pairs) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_pairs_tsv: cannot open " + path.string());
    char buf[64];
    for (const auto& p : pairs) {
        std::snprintf(buf, sizeof buf, "%.10g", p.gold);
        out << p.left << '\t' << p.right << '\t' << buf << '\n';
    }
}

std::vector<StsPair> load_pairs_tsv(const std::filesystem::path& path,
                                    const CorpusConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_pairs_tsv: cannot open " + path.string());
    std::vector<StsPair> pairs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::size_t t1 = line.find('\t');
        std::size_t t2 = (t1 == std::string::npos) ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos)
            throw std::runtime_error("load_pairs_tsv: malformed line " +
                                     std::to_string(lineno) + " in " + path.string());
        double gold = std::stod(line.substr(t2 + 1));
        if (!std::isfinite(gold) || gold < 0.0 || gold > 5.0)
            throw std::runtime_error("load_pairs_tsv: gold out of [0,5] at line " +
                                     std::to_string(lineno));
        pairs.push_back(StsPair{tokenize(line.substr(0, t1), cfg),
                                tokenize(line.substr(t1 + 1, t2 - t1 - 1), cfg), gold});
    }
    return pairs;
}

}  // namespace cllab
