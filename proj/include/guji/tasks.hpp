#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "guji/model.hpp"
#include "guji/prompt.hpp"
#include "guji/vocab.hpp"

namespace guji {

struct DecodeConfig {
    enum class Strategy { greedy, top_k, temperature };

    int64_t max_gen_length = 512;
    Strategy strategy = Strategy::greedy;
    int64_t k = 10;     // top_k only
    double tau = 1.0;   // temperature only
    uint64_t seed = 0;  // sampling only

    void validate() const;
};

// Autoregressive continuation of prefix_ids, one token per step, stopping at
// EOS or after max_gen_length tokens. Greedy picks the argmax with the lowest
// id on ties; sampling strategies are deterministic given the seed. Returns
// only the generated ids (EOS, when reached, is the last one).
std::vector<int32_t> generate(const GptModel& model, const Vocabulary& vocab,
                              const std::vector<int32_t>& prefix_ids, const DecodeConfig& cfg);

// Decodes [BOS] ancient [SEP] -> target continuation, returning the decoded
// modern text (control tokens render empty, unknown characters as "[UNK]").
std::string translate(const GptModel& model, const Vocabulary& vocab,
                      const std::string& ancient, const DecodeConfig& cfg = {});

struct LabelScore {
    std::string label;
    double score; // mean (or summed) per-token log-probability, <= 0
};

// Constrained generative classification: teacher-forces each candidate label
// after [BOS] text [SEP] template and returns the best label plus all scores
// sorted descending. Ties keep the declared label order. The result is always
// a member of `labels`.
std::pair<std::string, std::vector<LabelScore>> classify(
    const GptModel& model, const Vocabulary& vocab, const std::string& text,
    const std::vector<std::string>& labels,
    const std::string& template_prefix = kClassTemplatePrefix, bool sum_scores = false);

} // namespace guji
