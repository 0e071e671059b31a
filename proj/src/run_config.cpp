#include "guji/run_config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace guji {

namespace {

using json = nlohmann::json;

// Pulls a value by its primary key or any alias, erasing what it consumed so
// the leftover-key check can flag typos. Repeated spellings are an error.
class KeyReader {
  public:
    explicit KeyReader(json& j, std::string scope) : j_(j), scope_(std::move(scope)) {
        if (!j_.is_object()) throw ConfigError(scope_ + ": expected a JSON object");
    }

    const json* take(std::initializer_list<const char*> names) {
        const json* found = nullptr;
        for (const char* name : names) {
            auto it = j_.find(name);
            if (it == j_.end()) continue;
            if (found)
                throw ConfigError(scope_ + ": keys " + *names.begin() + " and " + name +
                                  " are aliases; give only one");
            taken_.insert(name);
            found = &*it;
        }
        return found;
    }

    void reject_unknown() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!taken_.count(it.key()))
                throw ConfigError(scope_ + ": unknown key \"" + it.key() + "\"");
        }
    }

  private:
    json& j_;
    std::string scope_;
    std::set<std::string> taken_;
};

ModelConfig parse_model(json& jm) {
    KeyReader keys(jm, "config.model");
    ModelConfig m;
    if (const json* v = keys.take({"preset"})) {
        std::string preset = v->get<std::string>();
        if (preset == "desk") {
            m = ModelConfig::desk_preset(0);
        } else if (preset == "base") {
            m = ModelConfig::base_preset();
            m.vocab_size = 0; // resolved from the vocabulary at run time
        } else {
            throw ConfigError("config.model: unknown preset \"" + preset + "\"");
        }
    }
    if (const json* v = keys.take({"n_layers"})) m.n_layers = v->get<int64_t>();
    if (const json* v = keys.take({"n_heads"})) m.n_heads = v->get<int64_t>();
    if (const json* v = keys.take({"d_model"})) m.d_model = v->get<int64_t>();
    if (const json* v = keys.take({"d_ff"})) m.d_ff = v->get<int64_t>();
    if (const json* v = keys.take({"context_len"})) m.context_len = v->get<int64_t>();
    if (const json* v = keys.take({"tie_embeddings"})) m.tie_embeddings = v->get<bool>();
    keys.reject_unknown();
    return m;
}

} // namespace

RunConfig RunConfig::from_json(const std::string& text, Task task) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");

    RunConfig rc;
    rc.task = task;
    // task-specific defaults
    if (task == Task::pretrain) {
        rc.train = TrainConfig{}; // 5e-5 / 3 epochs / batch 8
        rc.train_fraction = 0.99;
    } else {
        rc.train.learning_rate = 1e-5;
        rc.train.epochs = 5;
        rc.train.batch_size = 8;
        rc.train.warmup_proportion = 0.1;
        rc.train.max_seq_length = 1024;
        rc.train_fraction = 1.0;
    }

    try {
        KeyReader keys(j, "config");
        if (const json* v = keys.take({"train_file"})) rc.train_file = v->get<std::string>();
        if (const json* v = keys.take({"vocab_file"})) rc.vocab_file = v->get<std::string>();
        if (const json* v = keys.take({"output_dir"})) rc.output_dir = v->get<std::string>();
        if (const json* v = keys.take({"init_checkpoint"}))
            rc.init_checkpoint = v->get<std::string>();
        if (const json* v = keys.take({"labels_file"})) rc.labels_file = v->get<std::string>();
        if (const json* v = keys.take({"template"}))
            rc.template_prefix = v->get<std::string>();

        if (const json* v = keys.take({"model"})) {
            json jm = *v;
            rc.model = parse_model(jm);
            rc.model_given = true;
        }
        if (const json* v = keys.take({"learning_rate", "leraning_rate"}))
            rc.train.learning_rate = v->get<double>();
        if (const json* v = keys.take({"num_train_epochs", "epochs", "epoches"}))
            rc.train.epochs = v->get<int64_t>();
        if (const json* v = keys.take({"per_device_train_batch_size", "train_batch_size",
                                       "batch_size"}))
            rc.train.batch_size = v->get<int64_t>();
        if (const json* v = keys.take({"warmup_proportion"}))
            rc.train.warmup_proportion = v->get<double>();
        if (const json* v = keys.take({"max_seq_length"})) {
            rc.train.max_seq_length = v->get<int64_t>();
            rc.max_seq_given = true;
        }
        if (const json* v = keys.take({"max_gen_length"}))
            rc.max_gen_length = v->get<int64_t>();
        if (const json* v = keys.take({"seed"})) rc.train.seed = v->get<uint64_t>();
        if (const json* v = keys.take({"model_seed"})) rc.model_seed = v->get<uint64_t>();
        if (const json* v = keys.take({"grad_clip"})) {
            if (!v->is_null()) rc.train.grad_clip = v->get<double>();
        }
        if (const json* v = keys.take({"checkpoint_every"}))
            rc.train.checkpoint_every = v->get<int64_t>();
        if (const json* v = keys.take({"train_fraction"}))
            rc.train_fraction = v->get<double>();
        if (const json* v = keys.take({"split_seed"})) rc.split_seed = v->get<uint64_t>();
        keys.reject_unknown();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: bad value: ") + e.what());
    }

    if (rc.train_file.empty()) throw ConfigError("config: train_file is required");
    if (rc.vocab_file.empty()) throw ConfigError("config: vocab_file is required");
    if (rc.output_dir.empty()) throw ConfigError("config: output_dir is required");
    if (task == Task::finetune_classify && rc.labels_file.empty())
        throw ConfigError("config: labels_file is required for classification");
    if (task != Task::finetune_classify && !rc.labels_file.empty())
        throw ConfigError("config: labels_file only applies to classification");
    if (rc.model_given && !rc.init_checkpoint.empty())
        throw ConfigError("config: \"model\" conflicts with \"init_checkpoint\"");
    if (!(rc.train_fraction > 0.0 && rc.train_fraction <= 1.0))
        throw ConfigError("config: train_fraction must lie in (0, 1]");
    return rc;
}

RunConfig RunConfig::from_json_file(const std::string& path, Task task) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text, task);
}

std::string RunConfig::to_json() const {
    json j;
    j["train_file"] = train_file;
    j["vocab_file"] = vocab_file;
    j["output_dir"] = output_dir;
    if (!init_checkpoint.empty()) j["init_checkpoint"] = init_checkpoint;
    if (task == Task::finetune_classify) {
        j["labels_file"] = labels_file;
        j["template"] = template_prefix;
    }
    if (model_given || init_checkpoint.empty()) {
        j["model"] = {{"n_layers", model.n_layers},       {"n_heads", model.n_heads},
                      {"d_model", model.d_model},         {"d_ff", model.d_ff},
                      {"context_len", model.context_len}, {"tie_embeddings", model.tie_embeddings}};
    }
    j["learning_rate"] = train.learning_rate;
    j["num_train_epochs"] = train.epochs;
    j["per_device_train_batch_size"] = train.batch_size;
    j["warmup_proportion"] = train.warmup_proportion;
    j["max_seq_length"] = train.max_seq_length;
    j["max_gen_length"] = max_gen_length;
    j["seed"] = train.seed;
    j["model_seed"] = model_seed;
    if (train.grad_clip) j["grad_clip"] = *train.grad_clip;
    j["checkpoint_every"] = train.checkpoint_every;
    j["train_fraction"] = train_fraction;
    j["split_seed"] = split_seed;
    return j.dump(2);
}

} // namespace guji
