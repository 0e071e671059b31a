#include "guji/eval.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <json.hpp>

#include "guji/kernels.hpp"
#include "guji/utf8.hpp"

namespace guji {

using json = nlohmann::json;

std::string PerplexityReport::to_json() const {
    json j;
    j["token_count"] = token_count;
    j["nll_sum"] = nll_sum;
    j["ppl"] = ppl;
    return j.dump();
}

PerplexityReport perplexity(const GptModel& model, const Vocabulary& vocab,
                            const std::vector<std::string>& texts) {
    if (texts.empty()) throw DataError("empty corpus");
    nn::NoGradGuard no_grad;
    const int64_t ctx = model.config().context_len;
    const int64_t vocab_size = model.config().vocab_size;

    PerplexityReport report;
    for (const std::string& text : texts) {
        std::vector<int32_t> ids = vocab.encode(text, /*add_bos=*/true, /*add_eos=*/true);
        for (size_t start = 0; start < ids.size(); start += static_cast<size_t>(ctx)) {
            size_t end = std::min(ids.size(), start + static_cast<size_t>(ctx));
            int64_t len = static_cast<int64_t>(end - start);
            if (len < 2) break;
            std::vector<int32_t> window(ids.begin() + static_cast<ptrdiff_t>(start),
                                        ids.begin() + static_cast<ptrdiff_t>(end));
            nn::Tensor logits = model.forward(window, 1, len);
            std::vector<int32_t> targets(window.begin() + 1, window.end());
            std::vector<uint8_t> mask(targets.size(), 1);
            std::vector<double> nll(targets.size()), lse(targets.size());
            kernels::cross_entropy_forward(logits.values().data(), targets.data(), mask.data(),
                                           nll.data(), lse.data(),
                                           static_cast<int64_t>(targets.size()), vocab_size);
            for (double v : nll) report.nll_sum += v;
            report.token_count += static_cast<int64_t>(targets.size());
        }
    }
    report.ppl = std::exp(report.nll_sum / static_cast<double>(report.token_count));
    return report;
}

// ---------------------------------------------------------------------------

namespace {

using NgramCounts = std::unordered_map<std::u32string, int64_t>;

NgramCounts ngram_counts(const std::vector<char32_t>& chars, int n) {
    NgramCounts counts;
    if (static_cast<int64_t>(chars.size()) >= n) {
        for (size_t i = 0; i + static_cast<size_t>(n) <= chars.size(); ++i) {
            counts[std::u32string(chars.begin() + static_cast<ptrdiff_t>(i),
                                  chars.begin() + static_cast<ptrdiff_t>(i + n))] += 1;
        }
    }
    return counts;
}

} // namespace

BleuReport bleu_corpus(const std::vector<std::string>& candidates,
                       const std::vector<std::string>& references, int max_n, bool smooth) {
    if (candidates.size() != references.size())
        throw DataError("bleu: " + std::to_string(candidates.size()) + " candidates vs " +
                        std::to_string(references.size()) + " references");
    if (candidates.empty()) throw DataError("bleu: empty corpus");
    if (max_n < 1) throw ConfigError("bleu: max_n must be >= 1");

    BleuReport report;
    report.matches.assign(static_cast<size_t>(max_n), 0);
    report.totals.assign(static_cast<size_t>(max_n), 0);

    for (size_t i = 0; i < candidates.size(); ++i) {
        std::vector<char32_t> cand = utf8_decode(candidates[i]);
        std::vector<char32_t> ref = utf8_decode(references[i]);
        report.candidate_length += static_cast<int64_t>(cand.size());
        report.reference_length += static_cast<int64_t>(ref.size());
        for (int n = 1; n <= max_n; ++n) {
            NgramCounts cc = ngram_counts(cand, n);
            NgramCounts rc = ngram_counts(ref, n);
            for (const auto& [gram, count] : cc) {
                report.totals[static_cast<size_t>(n - 1)] += count;
                auto it = rc.find(gram);
                if (it != rc.end())
                    report.matches[static_cast<size_t>(n - 1)] += std::min(count, it->second);
            }
        }
    }

    const double c = static_cast<double>(std::max<int64_t>(report.candidate_length, 1));
    const double r = static_cast<double>(report.reference_length);
    report.brevity_penalty =
        report.candidate_length >= report.reference_length ? 1.0 : std::exp(1.0 - r / c);

    report.bleu.assign(static_cast<size_t>(max_n), 0.0);
    const bool unigrams_hit = report.totals[0] > 0 && report.matches[0] > 0;
    for (int k = 1; k <= max_n; ++k) {
        if (!unigrams_hit) break; // every score stays 0
        double log_sum = 0.0;
        bool zero = false;
        for (int n = 1; n <= k; ++n) {
            int64_t m = report.matches[static_cast<size_t>(n - 1)];
            int64_t t = report.totals[static_cast<size_t>(n - 1)];
            if (smooth && n >= 2) {
                m += 1;
                t += 1;
            }
            if (t == 0) continue; // order unavailable at this length, skip
            if (m == 0) {
                zero = true;
                break;
            }
            log_sum += std::log(static_cast<double>(m) / static_cast<double>(t));
        }
        if (!zero)
            report.bleu[static_cast<size_t>(k - 1)] =
                report.brevity_penalty * std::exp(log_sum / static_cast<double>(k));
    }
    return report;
}

std::string BleuReport::to_json() const {
    json j;
    j["matches"] = matches;
    j["totals"] = totals;
    j["candidate_length"] = candidate_length;
    j["reference_length"] = reference_length;
    j["brevity_penalty"] = brevity_penalty;
    json scores = json::object();
    for (size_t k = 0; k < bleu.size(); ++k) scores[std::to_string(k + 1)] = bleu[k];
    j["bleu"] = scores;
    return j.dump();
}

// ---------------------------------------------------------------------------

ClassReport classification_report(const std::vector<std::string>& truths,
                                  const std::vector<std::string>& predictions,
                                  const std::vector<std::string>& labels) {
    if (truths.size() != predictions.size())
        throw DataError("classification_report: " + std::to_string(truths.size()) +
                        " truths vs " + std::to_string(predictions.size()) + " predictions");
    if (truths.empty()) throw DataError("classification_report: empty input");
    if (labels.empty()) throw ConfigError("classification_report: empty label set");

    std::unordered_map<std::string, size_t> index;
    for (size_t i = 0; i < labels.size(); ++i) index.emplace(labels[i], i);
    auto look = [&](const std::string& value, const char* what) {
        auto it = index.find(value);
        if (it == index.end())
            throw DataError(std::string("classification_report: ") + what + " \"" + value +
                            "\" is not in the label set");
        return it->second;
    };

    const size_t L = labels.size();
    std::vector<int64_t> tp(L, 0), fp(L, 0), fn(L, 0), support(L, 0);
    int64_t correct = 0;
    for (size_t i = 0; i < truths.size(); ++i) {
        size_t t = look(truths[i], "truth");
        size_t p = look(predictions[i], "prediction");
        ++support[t];
        if (t == p) {
            ++tp[t];
            ++correct;
        } else {
            ++fn[t];
            ++fp[p];
        }
    }

    ClassReport report;
    const double n = static_cast<double>(truths.size());
    report.accuracy = static_cast<double>(correct) / n;
    for (size_t l = 0; l < L; ++l) {
        LabelMetrics m;
        m.support = support[l];
        double denom_p = static_cast<double>(tp[l] + fp[l]);
        double denom_r = static_cast<double>(tp[l] + fn[l]);
        m.precision = denom_p > 0.0 ? static_cast<double>(tp[l]) / denom_p : 0.0;
        m.recall = denom_r > 0.0 ? static_cast<double>(tp[l]) / denom_r : 0.0;
        m.f1 = (m.precision + m.recall) > 0.0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
        report.per_label.emplace_back(labels[l], m);
        double w = static_cast<double>(support[l]) / n;
        report.weighted_precision += w * m.precision;
        report.weighted_recall += w * m.recall;
        report.weighted_f1 += w * m.f1;
    }
    return report;
}

std::string ClassReport::to_json() const {
    json j;
    json per = json::object();
    for (const auto& [label, m] : per_label) {
        per[label] = {{"precision", m.precision},
                      {"recall", m.recall},
                      {"f1", m.f1},
                      {"support", m.support}};
    }
    j["per_label"] = per;
    j["weighted"] = {{"precision", weighted_precision},
                     {"recall", weighted_recall},
                     {"f1", weighted_f1}};
    j["accuracy"] = accuracy;
    return j.dump();
}

} // namespace guji
