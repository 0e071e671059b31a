#pragma once

#include <string>

#include "guji/model.hpp"
#include "guji/prompt.hpp"
#include "guji/training.hpp"

namespace guji {

// Declarative description of one training run, read from a JSON config file.
// Keys follow the hyperparameter names used by common training stacks
// (learning_rate, num_train_epochs, per_device_train_batch_size,
// warmup_proportion, max_seq_length, max_gen_length); the frequent
// misspelling "epoches" is accepted as an alias. Unknown keys are rejected
// and the effective config is echoed into the run's output directory.
struct RunConfig {
    enum class Task { pretrain, finetune_translate, finetune_classify };

    Task task = Task::pretrain;
    std::string train_file;
    std::string vocab_file;
    std::string output_dir;
    std::string init_checkpoint;                     // optional; conflicts with "model"
    std::string labels_file;                         // finetune_classify only
    std::string template_prefix = kClassTemplatePrefix;

    ModelConfig model;            // vocab_size filled in from the vocabulary at run time
    bool model_given = false;     // true when the config carried a "model" section
    TrainConfig train;
    bool max_seq_given = false;   // absent max_seq_length means "model context"
    int64_t max_gen_length = 512; // echoed for decode-side tooling

    double train_fraction = 1.0;  // < 1 holds out an eval slice before training
    uint64_t split_seed = 0;
    uint64_t model_seed = 0;

    static RunConfig from_json_file(const std::string& path, Task task);
    static RunConfig from_json(const std::string& text, Task task);

    // Canonical echo (primary key names, resolved defaults).
    std::string to_json() const;
};

} // namespace guji
