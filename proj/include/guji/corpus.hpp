#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "guji/common.hpp"

namespace guji {

// One ancient->modern sentence pair. JSONL files carry these with the keys
// "Ancient" and "Chinese", one record per line.
struct AlignedPair {
    std::string ancient;
    std::string modern;
    std::optional<double> similarity; // cached score in [0, 1]
};

// One classification example; JSONL keys "text" and "label".
struct LabeledText {
    std::string text;
    std::string label;
};

struct CorpusStats {
    int64_t sentence_count = 0;
    int64_t total_chars = 0;   // Unicode scalar values
    double mean_length = 0.0;  // characters per sentence
    double variance = 0.0;     // population variance of sentence lengths
};

struct SplitSpec {
    double train_fraction = 0.9; // in (0, 1)
    uint64_t seed = 0;
};

// Loads aligned pairs from a UTF-8 JSONL file. Errors carry the 1-based line
// number; missing keys are reported by name. Text content is preserved
// byte-for-byte.
std::vector<AlignedPair> load_aligned(const std::string& path);

// Loads classification examples from a UTF-8 JSONL file ("text"/"label").
std::vector<LabeledText> load_labeled(const std::string& path);

// Character-bigram Dice coefficient over multisets:
//   sim = 2*|bigrams(a) n bigrams(b)| / (|bigrams(a)| + |bigrams(b)|)
// Falls back to unigrams when either text has fewer than 2 characters;
// two empty texts score 1.0. Symmetric, bounded in [0, 1].
double pair_similarity(const std::string& a, const std::string& b);

// Keeps pairs whose similarity lies in [low, high] (closed interval), caching
// the score on retained pairs. Order preserved. low > high is a ConfigError.
std::vector<AlignedPair> filter_pairs(const std::vector<AlignedPair>& pairs,
                                      double low = 0.85, double high = 0.98);

// Length statistics over Unicode scalar values. Empty input is a DataError.
CorpusStats corpus_stats(const std::vector<std::string>& sentences);

// Deterministic shuffle (seeded Fisher-Yates) followed by a cut at
// floor(N * train_fraction). Same seed, same split.
template <class T>
std::pair<std::vector<T>, std::vector<T>> split(const std::vector<T>& items,
                                                const SplitSpec& spec) {
    if (items.empty()) throw DataError("split: empty input");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw ConfigError("split: train_fraction must lie in (0, 1)");
    std::vector<size_t> order(items.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(spec.seed);
    rng.shuffle(order);
    size_t n_train = static_cast<size_t>(static_cast<double>(items.size()) * spec.train_fraction);
    std::pair<std::vector<T>, std::vector<T>> out;
    out.first.reserve(n_train);
    out.second.reserve(items.size() - n_train);
    for (size_t i = 0; i < order.size(); ++i) {
        (i < n_train ? out.first : out.second).push_back(items[order[i]]);
    }
    return out;
}

// Reads a whole file as lines (no newline translation beyond \n / \r\n).
std::vector<std::string> read_lines(const std::string& path);

std::string corpus_stats_to_json(const CorpusStats& stats);

} // namespace guji
