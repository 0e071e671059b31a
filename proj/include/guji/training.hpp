#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "guji/corpus.hpp"
#include "guji/model.hpp"
#include "guji/vocab.hpp"

namespace guji {

struct TrainConfig {
    double learning_rate = 5e-5;
    int64_t epochs = 3;
    int64_t batch_size = 8;
    double warmup_proportion = 0.0; // in [0, 1)
    int64_t max_seq_length = 256;
    uint64_t seed = 0;
    std::optional<double> grad_clip; // global L2 norm; absent = no clipping
    int64_t checkpoint_every = 0;    // steps between checkpoint callbacks; 0 = off

    void validate() const;
};

struct TrainReport {
    std::vector<float> loss_history;     // one entry per optimizer step
    std::vector<double> epoch_mean_loss;
    double final_ppl = 0.0;     // exp(mean masked NLL) on the eval data
    double wall_seconds = 0.0;
    int64_t steps = 0;
    int64_t dropped_examples = 0; // over-length examples skipped up front

    std::string to_json() const;
};

// Linear warmup from 0 over ceil(warmup_proportion * total_steps) steps, then
// linear decay to 0 at total_steps. With no warmup the schedule starts at
// learning_rate. Requires 0 <= step <= total_steps, total_steps >= 1.
double lr_at(int64_t step, int64_t total_steps, const TrainConfig& cfg);

// A token sequence plus the index of its first loss-bearing token: the loss
// mask covers predictions of ids[loss_from..] (training shifts by one
// position internally).
struct EncodedExample {
    std::vector<int32_t> ids;
    int64_t loss_from = 1;
};

// [BOS] text chars [EOS] per text, concatenated and chopped into windows of
// window_len tokens. Every non-pad position carries loss.
std::vector<EncodedExample> pack_pretrain_windows(const std::vector<std::string>& texts,
                                                  const Vocabulary& vocab, int64_t window_len);

// [BOS] ancient [SEP] modern [EOS]; loss covers the modern tokens and EOS.
EncodedExample build_translation_example(const AlignedPair& pair, const Vocabulary& vocab);

// [BOS] text [SEP] template [label-chars] [EOS]; loss covers the label tokens
// and EOS.
EncodedExample build_classification_example(const LabeledText& example, const Vocabulary& vocab,
                                            const std::string& template_prefix);

using CheckpointFn = std::function<void(int64_t step, const GptModel&)>;

// Causal-LM training over packed windows. Deterministic for a fixed
// (seed, data, config). eval_texts default to the training texts.
TrainReport pretrain_clm(GptModel& model, const std::vector<std::string>& texts,
                         const Vocabulary& vocab, const TrainConfig& cfg,
                         const std::vector<std::string>& eval_texts = {},
                         const CheckpointFn& on_checkpoint = nullptr);

// Ancient->modern fine-tuning; source tokens condition but carry no loss.
// Over-length pairs are dropped and counted in the report.
TrainReport finetune_translation(GptModel& model, const std::vector<AlignedPair>& pairs,
                                 const Vocabulary& vocab, const TrainConfig& cfg,
                                 const std::vector<AlignedPair>& eval_pairs = {},
                                 const CheckpointFn& on_checkpoint = nullptr);

// Prompt-based generative classification fine-tuning. Every label must come
// from `labels`; unknown labels are an error naming the offender.
TrainReport finetune_classification(GptModel& model, const std::vector<LabeledText>& examples,
                                    const Vocabulary& vocab, const TrainConfig& cfg,
                                    const std::string& template_prefix,
                                    const std::vector<std::string>& labels,
                                    const std::vector<LabeledText>& eval_examples = {},
                                    const CheckpointFn& on_checkpoint = nullptr);

} // namespace guji
