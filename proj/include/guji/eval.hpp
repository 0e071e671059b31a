#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "guji/model.hpp"
#include "guji/vocab.hpp"

namespace guji {

struct PerplexityReport {
    int64_t token_count = 0; // scored tokens
    double nll_sum = 0.0;    // aggregated -ln p
    double ppl = 1.0;        // exp(nll_sum / token_count)

    std::string to_json() const;
};

// Teacher-forced corpus perplexity. Each text is encoded [BOS] chars [EOS]
// and every token after BOS (EOS included) is scored; texts longer than the
// context are scored in consecutive context-length windows, an approximation
// that leaves the first token of each later window unscored.
PerplexityReport perplexity(const GptModel& model, const Vocabulary& vocab,
                            const std::vector<std::string>& texts);

struct BleuReport {
    std::vector<int64_t> matches; // clipped n-gram matches, n = 1..max_n
    std::vector<int64_t> totals;  // candidate n-gram counts
    int64_t candidate_length = 0;
    int64_t reference_length = 0;
    double brevity_penalty = 1.0;
    std::vector<double> bleu; // bleu[k-1] = BLEU-k

    std::string to_json() const;
};

// Corpus BLEU over character n-grams with one reference per candidate.
// BP = 1 when c >= r, else exp(1 - r/c); BLEU-k = BP * exp(mean of ln p_n,
// n = 1..k). Orders whose candidate total is zero are skipped; a zero p_n
// with a non-zero total makes every BLEU-k with k >= n zero (no smoothing).
// `smooth` switches on add-one smoothing of the higher-order counts for
// sentence-level diagnostics.
BleuReport bleu_corpus(const std::vector<std::string>& candidates,
                       const std::vector<std::string>& references, int max_n = 4,
                       bool smooth = false);

struct LabelMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    int64_t support = 0;
};

struct ClassReport {
    std::vector<std::pair<std::string, LabelMetrics>> per_label; // declared order
    double weighted_precision = 0.0;
    double weighted_recall = 0.0; // equals accuracy under support weighting
    double weighted_f1 = 0.0;
    double accuracy = 0.0;

    std::string to_json() const;
};

// Per-label precision/recall/F1 (0 when undefined) plus support-weighted
// aggregates; every truth and prediction must come from `labels`.
ClassReport classification_report(const std::vector<std::string>& truths,
                                  const std::vector<std::string>& predictions,
                                  const std::vector<std::string>& labels);

} // namespace guji
