#include "guji/tasks.hpp"

#include <algorithm>
#include <cmath>

namespace guji {

void DecodeConfig::validate() const {
    if (max_gen_length < 1) throw ConfigError("decode config: max_gen_length must be >= 1");
    if (strategy == Strategy::top_k && k < 1)
        throw ConfigError("decode config: top_k needs k >= 1");
    if (strategy == Strategy::temperature && !(tau > 0.0))
        throw ConfigError("decode config: temperature needs tau > 0");
}

namespace {

int32_t argmax_lowest_id(const float* logits, int64_t n) {
    int32_t best = 0;
    for (int64_t j = 1; j < n; ++j)
        if (logits[j] > logits[best]) best = static_cast<int32_t>(j);
    return best;
}

// Samples from softmax(weights) computed in double with max subtraction.
int32_t sample_index(const std::vector<std::pair<int32_t, double>>& scored, Rng& rng) {
    double mx = scored[0].second;
    for (const auto& [id, s] : scored) mx = std::max(mx, s);
    double sum = 0.0;
    std::vector<double> cumulative(scored.size());
    for (size_t i = 0; i < scored.size(); ++i) {
        sum += std::exp(scored[i].second - mx);
        cumulative[i] = sum;
    }
    double r = rng.uniform() * sum;
    for (size_t i = 0; i < scored.size(); ++i)
        if (r < cumulative[i]) return scored[i].first;
    return scored.back().first;
}

int32_t pick_next(const float* logits, int64_t vocab, const DecodeConfig& cfg, Rng& rng) {
    switch (cfg.strategy) {
    case DecodeConfig::Strategy::greedy:
        return argmax_lowest_id(logits, vocab);
    case DecodeConfig::Strategy::top_k: {
        std::vector<std::pair<int32_t, double>> scored(static_cast<size_t>(vocab));
        for (int64_t j = 0; j < vocab; ++j)
            scored[static_cast<size_t>(j)] = {static_cast<int32_t>(j),
                                              static_cast<double>(logits[j])};
        size_t keep = static_cast<size_t>(std::min<int64_t>(cfg.k, vocab));
        std::partial_sort(scored.begin(), scored.begin() + static_cast<ptrdiff_t>(keep),
                          scored.end(), [](const auto& a, const auto& b) {
                              if (a.second != b.second) return a.second > b.second;
                              return a.first < b.first;
                          });
        scored.resize(keep);
        return sample_index(scored, rng);
    }
    case DecodeConfig::Strategy::temperature: {
        std::vector<std::pair<int32_t, double>> scored(static_cast<size_t>(vocab));
        for (int64_t j = 0; j < vocab; ++j)
            scored[static_cast<size_t>(j)] = {static_cast<int32_t>(j),
                                              static_cast<double>(logits[j]) / cfg.tau};
        return sample_index(scored, rng);
    }
    }
    throw ConfigError("decode config: unknown strategy");
}

// log p(ids[pos] | ids[0..pos-1]) for pos in [from, to), teacher-forced,
// computed in double from one forward pass.
double span_log_prob(const GptModel& model, const std::vector<int32_t>& ids, size_t from,
                     size_t to) {
    nn::NoGradGuard no_grad;
    const int64_t vocab = model.config().vocab_size;
    nn::Tensor logits = model.forward(ids, 1, static_cast<int64_t>(ids.size()));
    auto lv = logits.values();
    double total = 0.0;
    for (size_t pos = from; pos < to; ++pos) {
        const float* row = lv.data() + static_cast<int64_t>(pos - 1) * vocab;
        float mx = row[0];
        for (int64_t j = 1; j < vocab; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int64_t j = 0; j < vocab; ++j)
            sum += std::exp(static_cast<double>(row[j]) - static_cast<double>(mx));
        double lse = static_cast<double>(mx) + std::log(sum);
        total += static_cast<double>(row[ids[pos]]) - lse;
    }
    return total;
}

} // namespace

std::vector<int32_t> generate(const GptModel& model, const Vocabulary& vocab,
                              const std::vector<int32_t>& prefix_ids, const DecodeConfig& cfg) {
    cfg.validate();
    const int64_t ctx = model.config().context_len;
    const int64_t vocab_size = model.config().vocab_size;
    if (static_cast<int64_t>(vocab.size()) > vocab_size)
        throw DataError("generate: vocabulary larger than the model's embedding table");
    if (prefix_ids.empty()) throw ConfigError("generate: prefix must not be empty");
    if (static_cast<int64_t>(prefix_ids.size()) >= ctx)
        throw ConfigError("generate: prefix of " + std::to_string(prefix_ids.size()) +
                          " tokens does not fit context " + std::to_string(ctx));

    nn::NoGradGuard no_grad;
    Rng rng(cfg.seed);
    std::vector<int32_t> ids = prefix_ids;
    std::vector<int32_t> out;
    while (static_cast<int64_t>(out.size()) < cfg.max_gen_length) {
        // slide the window once the context fills up
        size_t start = ids.size() > static_cast<size_t>(ctx) ? ids.size() - static_cast<size_t>(ctx) : 0;
        std::vector<int32_t> window(ids.begin() + static_cast<ptrdiff_t>(start), ids.end());
        nn::Tensor logits = model.forward(window, 1, static_cast<int64_t>(window.size()));
        const float* last_row =
            logits.values().data() + (static_cast<int64_t>(window.size()) - 1) * vocab_size;
        int32_t next = pick_next(last_row, vocab_size, cfg, rng);
        ids.push_back(next);
        out.push_back(next);
        if (next == Vocabulary::kEos) break;
    }
    return out;
}

std::string translate(const GptModel& model, const Vocabulary& vocab,
                      const std::string& ancient, const DecodeConfig& cfg) {
    std::vector<int32_t> prefix = vocab.encode(ancient, /*add_bos=*/true);
    prefix.push_back(Vocabulary::kSep);
    if (static_cast<int64_t>(prefix.size()) >= model.config().context_len)
        throw DataError("translate: source of " + std::to_string(prefix.size()) +
                        " tokens does not fit context " +
                        std::to_string(model.config().context_len));
    std::vector<int32_t> generated = generate(model, vocab, prefix, cfg);
    return vocab.decode(generated);
}

std::pair<std::string, std::vector<LabelScore>> classify(const GptModel& model,
                                                         const Vocabulary& vocab,
                                                         const std::string& text,
                                                         const std::vector<std::string>& labels,
                                                         const std::string& template_prefix,
                                                         bool sum_scores) {
    if (labels.empty()) throw ConfigError("classify: empty label set");

    std::vector<int32_t> prompt = vocab.encode(text, /*add_bos=*/true);
    prompt.push_back(Vocabulary::kSep);
    std::vector<int32_t> prefix_ids = vocab.encode(template_prefix);
    prompt.insert(prompt.end(), prefix_ids.begin(), prefix_ids.end());

    std::vector<LabelScore> scores;
    scores.reserve(labels.size());
    size_t best = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        std::vector<int32_t> label_ids = vocab.encode(labels[i]);
        if (label_ids.empty()) throw ConfigError("classify: empty label in label set");
        std::vector<int32_t> ids = prompt;
        ids.insert(ids.end(), label_ids.begin(), label_ids.end());
        if (static_cast<int64_t>(ids.size()) > model.config().context_len)
            throw DataError("classify: prompt plus label \"" + labels[i] +
                            "\" does not fit context " +
                            std::to_string(model.config().context_len));
        double lp = span_log_prob(model, ids, prompt.size(), ids.size());
        if (!sum_scores) lp /= static_cast<double>(label_ids.size());
        scores.push_back({labels[i], lp});
        if (scores[i].score > scores[best].score) best = i; // ties keep declared order
    }
    std::string winner = scores[best].label;
    std::stable_sort(scores.begin(), scores.end(),
                     [](const LabelScore& a, const LabelScore& b) { return a.score > b.score; });
    return {winner, std::move(scores)};
}

} // namespace guji
