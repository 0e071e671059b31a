#include "guji/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <unordered_set>

#include <json.hpp>

#include "guji/optimizer.hpp"

namespace guji {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("train config: learning_rate must be > 0");
    if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
    if (!(warmup_proportion >= 0.0 && warmup_proportion < 1.0))
        throw ConfigError("train config: warmup_proportion must lie in [0, 1)");
    if (max_seq_length < 2) throw ConfigError("train config: max_seq_length must be >= 2");
    if (grad_clip && !(*grad_clip > 0.0))
        throw ConfigError("train config: grad_clip must be > 0 when set");
    if (checkpoint_every < 0) throw ConfigError("train config: checkpoint_every must be >= 0");
}

std::string TrainReport::to_json() const {
    nlohmann::json j;
    j["steps"] = steps;
    j["loss_history"] = loss_history;
    j["epoch_mean_loss"] = epoch_mean_loss;
    j["final_ppl"] = final_ppl;
    j["wall_seconds"] = wall_seconds;
    j["dropped_examples"] = dropped_examples;
    return j.dump();
}

double lr_at(int64_t step, int64_t total_steps, const TrainConfig& cfg) {
    if (total_steps < 1) throw ConfigError("lr_at: total_steps must be >= 1");
    if (step < 0 || step > total_steps)
        throw ConfigError("lr_at: step must lie in [0, total_steps]");
    const int64_t warmup =
        static_cast<int64_t>(std::ceil(cfg.warmup_proportion * static_cast<double>(total_steps)));
    if (warmup > 0 && step <= warmup) {
        return cfg.learning_rate * static_cast<double>(step) / static_cast<double>(warmup);
    }
    return cfg.learning_rate * static_cast<double>(total_steps - step) /
           static_cast<double>(total_steps - warmup);
}

std::vector<EncodedExample> pack_pretrain_windows(const std::vector<std::string>& texts,
                                                  const Vocabulary& vocab,
                                                  int64_t window_len) {
    if (texts.empty()) throw DataError("empty corpus");
    if (window_len < 2) throw ConfigError("pack_pretrain_windows: window must be >= 2 tokens");
    std::vector<int32_t> stream;
    for (const std::string& text : texts) {
        std::vector<int32_t> ids = vocab.encode(text, /*add_bos=*/true, /*add_eos=*/true);
        stream.insert(stream.end(), ids.begin(), ids.end());
    }
    std::vector<EncodedExample> windows;
    for (size_t start = 0; start < stream.size(); start += static_cast<size_t>(window_len)) {
        size_t end = std::min(stream.size(), start + static_cast<size_t>(window_len));
        if (end - start < 2) break; // a lone trailing token scores nothing
        EncodedExample w;
        w.ids.assign(stream.begin() + static_cast<ptrdiff_t>(start),
                     stream.begin() + static_cast<ptrdiff_t>(end));
        w.loss_from = 1;
        windows.push_back(std::move(w));
    }
    if (windows.empty()) throw DataError("corpus packs into no trainable windows");
    return windows;
}

EncodedExample build_translation_example(const AlignedPair& pair, const Vocabulary& vocab) {
    EncodedExample e;
    e.ids.push_back(Vocabulary::kBos);
    std::vector<int32_t> src = vocab.encode(pair.ancient);
    std::vector<int32_t> dst = vocab.encode(pair.modern);
    e.ids.insert(e.ids.end(), src.begin(), src.end());
    e.ids.push_back(Vocabulary::kSep);
    e.loss_from = static_cast<int64_t>(e.ids.size()); // first modern token
    e.ids.insert(e.ids.end(), dst.begin(), dst.end());
    e.ids.push_back(Vocabulary::kEos);
    return e;
}

EncodedExample build_classification_example(const LabeledText& example,
                                            const Vocabulary& vocab,
                                            const std::string& template_prefix) {
    EncodedExample e;
    e.ids.push_back(Vocabulary::kBos);
    std::vector<int32_t> text = vocab.encode(example.text);
    e.ids.insert(e.ids.end(), text.begin(), text.end());
    e.ids.push_back(Vocabulary::kSep);
    std::vector<int32_t> prefix = vocab.encode(template_prefix);
    e.ids.insert(e.ids.end(), prefix.begin(), prefix.end());
    e.loss_from = static_cast<int64_t>(e.ids.size()); // first label token
    std::vector<int32_t> label = vocab.encode(example.label);
    e.ids.insert(e.ids.end(), label.begin(), label.end());
    e.ids.push_back(Vocabulary::kEos);
    return e;
}

namespace {

struct Batch {
    std::vector<int32_t> inputs;   // [B, T]
    std::vector<int32_t> targets;  // [B * T]
    std::vector<uint8_t> mask;     // [B * T]
    std::vector<int32_t> lengths;  // per row, valid input positions
    int64_t batch = 0;
    int64_t seq = 0;
};

// Pads the chosen examples to a common length and shifts them into
// (input, target) position pairs.
Batch assemble_batch(const std::vector<EncodedExample>& examples,
                     const std::vector<size_t>& order, size_t begin, size_t end) {
    Batch b;
    b.batch = static_cast<int64_t>(end - begin);
    size_t max_len = 0;
    for (size_t i = begin; i < end; ++i)
        max_len = std::max(max_len, examples[order[i]].ids.size());
    b.seq = static_cast<int64_t>(max_len) - 1;
    b.inputs.assign(static_cast<size_t>(b.batch * b.seq), Vocabulary::kPad);
    b.targets.assign(static_cast<size_t>(b.batch * b.seq), Vocabulary::kPad);
    b.mask.assign(static_cast<size_t>(b.batch * b.seq), 0);
    b.lengths.resize(static_cast<size_t>(b.batch));
    for (size_t i = begin; i < end; ++i) {
        const EncodedExample& ex = examples[order[i]];
        const int64_t row = static_cast<int64_t>(i - begin);
        const int64_t len = static_cast<int64_t>(ex.ids.size());
        b.lengths[static_cast<size_t>(row)] = static_cast<int32_t>(len - 1);
        for (int64_t t = 0; t + 1 < len; ++t) {
            b.inputs[static_cast<size_t>(row * b.seq + t)] = ex.ids[static_cast<size_t>(t)];
            b.targets[static_cast<size_t>(row * b.seq + t)] = ex.ids[static_cast<size_t>(t + 1)];
            if (t + 1 >= ex.loss_from) b.mask[static_cast<size_t>(row * b.seq + t)] = 1;
        }
    }
    return b;
}

// exp(mean masked NLL) over a fixed example list, without touching grads.
double examples_perplexity(const GptModel& model, const std::vector<EncodedExample>& examples,
                           int64_t batch_size) {
    nn::NoGradGuard no_grad;
    std::vector<size_t> order(examples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    double nll = 0.0;
    int64_t count = 0;
    for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(batch_size)) {
        size_t end = std::min(order.size(), begin + static_cast<size_t>(batch_size));
        Batch b = assemble_batch(examples, order, begin, end);
        nn::Tensor logits = model.forward(b.inputs, b.batch, b.seq, b.lengths);
        auto lv = logits.values();
        const int64_t vocab = model.config().vocab_size;
        for (int64_t r = 0; r < b.batch * b.seq; ++r) {
            if (!b.mask[static_cast<size_t>(r)]) continue;
            const float* row = lv.data() + r * vocab;
            float mx = row[0];
            for (int64_t j = 1; j < vocab; ++j) mx = std::max(mx, row[j]);
            double sum = 0.0;
            for (int64_t j = 0; j < vocab; ++j)
                sum += std::exp(static_cast<double>(row[j]) - static_cast<double>(mx));
            double lse = static_cast<double>(mx) + std::log(sum);
            nll += lse - static_cast<double>(row[b.targets[static_cast<size_t>(r)]]);
            ++count;
        }
    }
    return count == 0 ? 0.0 : std::exp(nll / static_cast<double>(count));
}

TrainReport run_training(GptModel& model, std::vector<EncodedExample> train_examples,
                         const std::vector<EncodedExample>& eval_examples,
                         const TrainConfig& cfg, const CheckpointFn& on_checkpoint,
                         int64_t dropped) {
    cfg.validate();
    if (cfg.max_seq_length > model.config().context_len)
        throw ConfigError("train config: max_seq_length " + std::to_string(cfg.max_seq_length) +
                          " exceeds model context length " +
                          std::to_string(model.config().context_len));
    if (train_examples.empty()) throw DataError("no training examples");

    const auto t0 = std::chrono::steady_clock::now();
    TrainReport report;
    report.dropped_examples = dropped;

    const int64_t n = static_cast<int64_t>(train_examples.size());
    const int64_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const int64_t total_steps = cfg.epochs * steps_per_epoch;

    AdamOptimizer opt(model.parameters());
    Rng rng(cfg.seed);
    std::vector<size_t> order(static_cast<size_t>(n));
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    int64_t global_step = 0;
    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (int64_t s = 0; s < steps_per_epoch; ++s) {
            const size_t begin = static_cast<size_t>(s * cfg.batch_size);
            const size_t end = std::min(order.size(), begin + static_cast<size_t>(cfg.batch_size));
            Batch b = assemble_batch(train_examples, order, begin, end);

            opt.zero_grad();
            nn::Tensor logits = model.forward(b.inputs, b.batch, b.seq, b.lengths);
            nn::Tensor loss = nn::cross_entropy(logits, b.targets, b.mask);
            const float loss_value = loss.item();
            if (!std::isfinite(loss_value))
                throw NumericError("non-finite loss at step " + std::to_string(global_step));
            nn::backward(loss);
            if (cfg.grad_clip) opt.clip_global_norm(*cfg.grad_clip);
            opt.step(lr_at(global_step, total_steps, cfg));

            report.loss_history.push_back(loss_value);
            epoch_loss += static_cast<double>(loss_value);
            ++global_step;
            if (on_checkpoint && cfg.checkpoint_every > 0 &&
                global_step % cfg.checkpoint_every == 0) {
                on_checkpoint(global_step, model);
            }
        }
        report.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(steps_per_epoch));
    }

    report.steps = global_step;
    report.final_ppl = examples_perplexity(
        model, eval_examples.empty() ? train_examples : eval_examples, cfg.batch_size);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

// Drops examples longer than max_seq_length; error if nothing survives.
std::vector<EncodedExample> drop_overlong(std::vector<EncodedExample> examples,
                                          int64_t max_seq_length, int64_t* dropped) {
    std::vector<EncodedExample> kept;
    kept.reserve(examples.size());
    for (auto& e : examples) {
        if (static_cast<int64_t>(e.ids.size()) > max_seq_length) {
            ++*dropped;
        } else {
            kept.push_back(std::move(e));
        }
    }
    if (kept.empty()) throw DataError("all examples exceed max_seq_length");
    return kept;
}

} // namespace

TrainReport pretrain_clm(GptModel& model, const std::vector<std::string>& texts,
                         const Vocabulary& vocab, const TrainConfig& cfg,
                         const std::vector<std::string>& eval_texts,
                         const CheckpointFn& on_checkpoint) {
    cfg.validate();
    std::vector<EncodedExample> train = pack_pretrain_windows(texts, vocab, cfg.max_seq_length);
    std::vector<EncodedExample> eval;
    if (!eval_texts.empty()) eval = pack_pretrain_windows(eval_texts, vocab, cfg.max_seq_length);
    return run_training(model, std::move(train), eval, cfg, on_checkpoint, /*dropped=*/0);
}

TrainReport finetune_translation(GptModel& model, const std::vector<AlignedPair>& pairs,
                                 const Vocabulary& vocab, const TrainConfig& cfg,
                                 const std::vector<AlignedPair>& eval_pairs,
                                 const CheckpointFn& on_checkpoint) {
    cfg.validate();
    if (pairs.empty()) throw DataError("no translation pairs");
    int64_t dropped = 0;
    std::vector<EncodedExample> train;
    train.reserve(pairs.size());
    for (const AlignedPair& p : pairs) train.push_back(build_translation_example(p, vocab));
    train = drop_overlong(std::move(train), cfg.max_seq_length, &dropped);
    std::vector<EncodedExample> eval;
    for (const AlignedPair& p : eval_pairs) {
        EncodedExample e = build_translation_example(p, vocab);
        if (static_cast<int64_t>(e.ids.size()) <= cfg.max_seq_length) eval.push_back(std::move(e));
    }
    return run_training(model, std::move(train), eval, cfg, on_checkpoint, dropped);
}

TrainReport finetune_classification(GptModel& model, const std::vector<LabeledText>& examples,
                                    const Vocabulary& vocab, const TrainConfig& cfg,
                                    const std::string& template_prefix,
                                    const std::vector<std::string>& labels,
                                    const std::vector<LabeledText>& eval_examples,
                                    const CheckpointFn& on_checkpoint) {
    cfg.validate();
    if (examples.empty()) throw DataError("no classification examples");
    if (labels.empty()) throw ConfigError("label set is empty");
    std::unordered_set<std::string> label_set(labels.begin(), labels.end());
    for (const LabeledText& e : examples) {
        if (!label_set.count(e.label))
            throw DataError("unknown label \"" + e.label + "\" (not in the declared label set)");
    }
    int64_t dropped = 0;
    std::vector<EncodedExample> train;
    train.reserve(examples.size());
    for (const LabeledText& e : examples)
        train.push_back(build_classification_example(e, vocab, template_prefix));
    train = drop_overlong(std::move(train), cfg.max_seq_length, &dropped);
    std::vector<EncodedExample> eval;
    for (const LabeledText& e : eval_examples) {
        EncodedExample enc = build_classification_example(e, vocab, template_prefix);
        if (static_cast<int64_t>(enc.ids.size()) <= cfg.max_seq_length)
            eval.push_back(std::move(enc));
    }
    return run_training(model, std::move(train), eval, cfg, on_checkpoint, dropped);
}

} // namespace guji
