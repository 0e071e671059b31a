#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "guji/tensor.hpp"

namespace guji {

struct ModelConfig {
    int64_t n_layers = 4;
    int64_t n_heads = 4;
    int64_t d_model = 128;
    int64_t d_ff = 512;
    int64_t context_len = 256;
    int64_t vocab_size = 0;
    bool tie_embeddings = true;

    void validate() const; // ConfigError on bad dimensions

    // Desk-scale default exercised by the tests.
    static ModelConfig desk_preset(int64_t vocab_size);
    // GPT2-base dimensions with the 25,370-token base vocabulary; expressible
    // but far beyond what CPU training here is meant for.
    static ModelConfig base_preset(int64_t vocab_size = 25370);
};

// Decoder-only transformer with pre-layer-norm blocks, learned absolute
// positions, and (by default) the output head tied to the token embeddings.
class GptModel {
  public:
    struct Layer {
        nn::Tensor ln1_gain, ln1_bias;
        nn::Tensor wq, bq, wk, bk, wv, bv, wo, bo;
        nn::Tensor ln2_gain, ln2_bias;
        nn::Tensor fc_w, fc_b, proj_w, proj_b;
    };

    GptModel() = default;

    // Weights ~ Normal(0, 0.02), biases 0, layer-norm gains 1. Deterministic
    // for a given (config, seed).
    static GptModel init(const ModelConfig& config, uint64_t seed);

    // Next-token logits, shape [batch*seq, vocab]. Position t of a row sees
    // only ids[0..t] of that row; `lengths` (optional) removes padding
    // positions from everyone's attention keys. seq > context_len is an
    // error naming both values.
    nn::Tensor forward(const std::vector<int32_t>& ids, int64_t batch, int64_t seq,
                       const std::vector<int32_t>& lengths = {}) const;

    // Named parameters in checkpoint manifest order.
    std::vector<std::pair<std::string, nn::Tensor>> parameters() const;
    int64_t count_parameters() const;

    const ModelConfig& config() const { return config_; }

    // Appends embedding rows (Normal(0, 0.02)) so a checkpoint made before a
    // vocabulary extension keeps working after it; existing rows untouched.
    void grow_vocab(int64_t new_vocab_size, uint64_t seed);

    const nn::Tensor& token_embedding() const { return wte_; }

  private:
    ModelConfig config_;
    nn::Tensor wte_, wpe_;
    std::vector<Layer> layers_;
    nn::Tensor lnf_gain_, lnf_bias_;
    nn::Tensor head_; // untied models only
};

// Checkpoint format: magic "GJLM", u16 version, u32 little-endian header
// length, JSON header {config, vocab_digest, params manifest}, then raw
// little-endian float32 blobs in manifest order. load(save(m)) is bitwise m.
void save_checkpoint(const GptModel& model, const std::string& vocab_digest,
                     const std::string& path);
GptModel load_checkpoint(const std::string& path, std::string* vocab_digest = nullptr);

} // namespace guji
