#include "guji/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace guji {

using nn::Tensor;

void ModelConfig::validate() const {
    if (n_layers < 1 || n_heads < 1 || d_model < 1 || d_ff < 1 || context_len < 1)
        throw ConfigError("model config: all dimensions must be >= 1");
    if (vocab_size < 5) throw ConfigError("model config: vocab_size must be >= 5");
    if (d_model % n_heads != 0)
        throw ConfigError("model config: d_model " + std::to_string(d_model) +
                          " not divisible by n_heads " + std::to_string(n_heads));
}

ModelConfig ModelConfig::desk_preset(int64_t vocab_size) {
    ModelConfig c;
    c.vocab_size = vocab_size;
    return c;
}

ModelConfig ModelConfig::base_preset(int64_t vocab_size) {
    ModelConfig c;
    c.n_layers = 12;
    c.n_heads = 12;
    c.d_model = 768;
    c.d_ff = 3072;
    c.context_len = 1024;
    c.vocab_size = vocab_size;
    return c;
}

namespace {

Tensor normal_param(nn::Shape shape, Rng& rng, float stddev) {
    Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
    for (float& v : t.values()) v = static_cast<float>(rng.normal()) * stddev;
    return t;
}

Tensor const_param(nn::Shape shape, float value) {
    Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
    std::fill(t.values().begin(), t.values().end(), value);
    return t;
}

} // namespace

GptModel GptModel::init(const ModelConfig& config, uint64_t seed) {
    config.validate();
    GptModel m;
    m.config_ = config;
    Rng rng(seed);
    const int64_t C = config.d_model, V = config.vocab_size, F = config.d_ff;

    m.wte_ = normal_param({V, C}, rng, 0.02f);
    m.wpe_ = normal_param({config.context_len, C}, rng, 0.02f);
    for (int64_t l = 0; l < config.n_layers; ++l) {
        Layer layer;
        layer.ln1_gain = const_param({C}, 1.0f);
        layer.ln1_bias = const_param({C}, 0.0f);
        layer.wq = normal_param({C, C}, rng, 0.02f);
        layer.bq = const_param({C}, 0.0f);
        layer.wk = normal_param({C, C}, rng, 0.02f);
        layer.bk = const_param({C}, 0.0f);
        layer.wv = normal_param({C, C}, rng, 0.02f);
        layer.bv = const_param({C}, 0.0f);
        layer.wo = normal_param({C, C}, rng, 0.02f);
        layer.bo = const_param({C}, 0.0f);
        layer.ln2_gain = const_param({C}, 1.0f);
        layer.ln2_bias = const_param({C}, 0.0f);
        layer.fc_w = normal_param({C, F}, rng, 0.02f);
        layer.fc_b = const_param({F}, 0.0f);
        layer.proj_w = normal_param({F, C}, rng, 0.02f);
        layer.proj_b = const_param({C}, 0.0f);
        m.layers_.push_back(std::move(layer));
    }
    m.lnf_gain_ = const_param({C}, 1.0f);
    m.lnf_bias_ = const_param({C}, 0.0f);
    if (!config.tie_embeddings) m.head_ = normal_param({V, C}, rng, 0.02f);
    return m;
}

Tensor GptModel::forward(const std::vector<int32_t>& ids, int64_t batch, int64_t seq,
                         const std::vector<int32_t>& lengths) const {
    if (seq > config_.context_len)
        throw ConfigError("forward: sequence length " + std::to_string(seq) +
                          " exceeds context length " + std::to_string(config_.context_len));
    if (batch < 1 || seq < 1) throw ConfigError("forward: batch and seq must be >= 1");
    if (static_cast<int64_t>(ids.size()) != batch * seq)
        throw ConfigError("forward: expected " + std::to_string(batch * seq) + " ids, got " +
                          std::to_string(ids.size()));

    std::vector<int32_t> pos(static_cast<size_t>(batch * seq));
    for (int64_t b = 0; b < batch; ++b)
        for (int64_t t = 0; t < seq; ++t)
            pos[static_cast<size_t>(b * seq + t)] = static_cast<int32_t>(t);

    Tensor x = nn::add(nn::gather_rows(wte_, ids), nn::gather_rows(wpe_, pos));
    for (const Layer& layer : layers_) {
        Tensor ln1 = nn::layer_norm(x, layer.ln1_gain, layer.ln1_bias);
        Tensor q = nn::add(nn::matmul(ln1, layer.wq), layer.bq);
        Tensor k = nn::add(nn::matmul(ln1, layer.wk), layer.bk);
        Tensor v = nn::add(nn::matmul(ln1, layer.wv), layer.bv);
        Tensor att = nn::causal_attention(q, k, v, batch, seq, config_.n_heads, lengths);
        x = nn::add(x, nn::add(nn::matmul(att, layer.wo), layer.bo));
        Tensor ln2 = nn::layer_norm(x, layer.ln2_gain, layer.ln2_bias);
        Tensor h = nn::gelu(nn::add(nn::matmul(ln2, layer.fc_w), layer.fc_b));
        x = nn::add(x, nn::add(nn::matmul(h, layer.proj_w), layer.proj_b));
    }
    Tensor xf = nn::layer_norm(x, lnf_gain_, lnf_bias_);
    return nn::matmul_nt(xf, config_.tie_embeddings ? wte_ : head_);
}

std::vector<std::pair<std::string, Tensor>> GptModel::parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("wte", wte_);
    out.emplace_back("wpe", wpe_);
    for (size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        std::string p = "layer" + std::to_string(l) + ".";
        out.emplace_back(p + "ln1.gain", layer.ln1_gain);
        out.emplace_back(p + "ln1.bias", layer.ln1_bias);
        out.emplace_back(p + "attn.wq", layer.wq);
        out.emplace_back(p + "attn.bq", layer.bq);
        out.emplace_back(p + "attn.wk", layer.wk);
        out.emplace_back(p + "attn.bk", layer.bk);
        out.emplace_back(p + "attn.wv", layer.wv);
        out.emplace_back(p + "attn.bv", layer.bv);
        out.emplace_back(p + "attn.wo", layer.wo);
        out.emplace_back(p + "attn.bo", layer.bo);
        out.emplace_back(p + "ln2.gain", layer.ln2_gain);
        out.emplace_back(p + "ln2.bias", layer.ln2_bias);
        out.emplace_back(p + "mlp.fc_w", layer.fc_w);
        out.emplace_back(p + "mlp.fc_b", layer.fc_b);
        out.emplace_back(p + "mlp.proj_w", layer.proj_w);
        out.emplace_back(p + "mlp.proj_b", layer.proj_b);
    }
    out.emplace_back("lnf.gain", lnf_gain_);
    out.emplace_back("lnf.bias", lnf_bias_);
    if (!config_.tie_embeddings) out.emplace_back("head", head_);
    return out;
}

int64_t GptModel::count_parameters() const {
    int64_t total = 0;
    for (const auto& [name, t] : parameters()) total += t.numel();
    return total;
}

void GptModel::grow_vocab(int64_t new_vocab_size, uint64_t seed) {
    if (new_vocab_size < config_.vocab_size)
        throw ConfigError("grow_vocab: new vocabulary is smaller than the embedding table");
    if (new_vocab_size == config_.vocab_size) return;
    Rng rng(seed);
    auto grow = [&](Tensor& t) {
        Tensor bigger = Tensor::zeros({new_vocab_size, config_.d_model}, true);
        auto src = t.values();
        auto dst = bigger.values();
        std::copy(src.begin(), src.end(), dst.begin());
        for (size_t i = src.size(); i < dst.size(); ++i)
            dst[i] = static_cast<float>(rng.normal()) * 0.02f;
        t = bigger;
    };
    grow(wte_);
    if (!config_.tie_embeddings) grow(head_);
    config_.vocab_size = new_vocab_size;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

namespace {

using json = nlohmann::json;

constexpr char kMagic[4] = {'G', 'J', 'L', 'M'};
constexpr uint16_t kVersion = 1;

} // namespace

void save_checkpoint(const GptModel& model, const std::string& vocab_digest,
                     const std::string& path) {
    static_assert(sizeof(float) == 4);
    if (std::endian::native != std::endian::little)
        throw ConfigError("checkpoint format requires a little-endian host");

    const ModelConfig& c = model.config();
    json header;
    header["config"] = {{"n_layers", c.n_layers},     {"n_heads", c.n_heads},
                        {"d_model", c.d_model},       {"d_ff", c.d_ff},
                        {"context_len", c.context_len}, {"vocab_size", c.vocab_size},
                        {"tie_embeddings", c.tie_embeddings}};
    header["vocab_digest"] = vocab_digest;
    json manifest = json::array();
    auto params = model.parameters();
    for (const auto& [name, t] : params) {
        manifest.push_back({{"name", name}, {"shape", t.shape()}});
    }
    header["params"] = manifest;
    std::string header_text = header.dump();
    if (header_text.size() > 0xFFFFFFFFull) throw ConfigError("checkpoint header too large");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out.write(kMagic, 4);
    uint16_t version = kVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    uint32_t len = static_cast<uint32_t>(header_text.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const auto& [name, t] : params) {
        out.write(reinterpret_cast<const char*>(t.values().data()),
                  static_cast<std::streamsize>(t.numel() * sizeof(float)));
    }
    if (!out) throw DataError("failed writing " + path);
}

GptModel load_checkpoint(const std::string& path, std::string* vocab_digest) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("checkpoint format error: bad magic in " + path);
    uint16_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!in || version != kVersion)
        throw DataError("checkpoint format error: unsupported version " +
                        std::to_string(version));
    uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in) throw DataError("checkpoint format error: truncated header length");
    std::string header_text(len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(len));
    if (!in) throw DataError("checkpoint format error: truncated header");

    json header;
    try {
        header = json::parse(header_text);
    } catch (const json::exception& e) {
        throw DataError(std::string("checkpoint format error: bad header JSON: ") + e.what());
    }

    ModelConfig config;
    try {
        const json& jc = header.at("config");
        config.n_layers = jc.at("n_layers").get<int64_t>();
        config.n_heads = jc.at("n_heads").get<int64_t>();
        config.d_model = jc.at("d_model").get<int64_t>();
        config.d_ff = jc.at("d_ff").get<int64_t>();
        config.context_len = jc.at("context_len").get<int64_t>();
        config.vocab_size = jc.at("vocab_size").get<int64_t>();
        config.tie_embeddings = jc.at("tie_embeddings").get<bool>();
    } catch (const json::exception& e) {
        throw DataError(std::string("checkpoint format error: bad config: ") + e.what());
    }
    try {
        config.validate();
    } catch (const ConfigError& e) {
        throw DataError(std::string("checkpoint format error: ") + e.what());
    }
    if (vocab_digest) *vocab_digest = header.value("vocab_digest", "");

    // Rebuild the skeleton, then overwrite every blob in manifest order. The
    // manifest must match the shape-derived one exactly.
    GptModel model = GptModel::init(config, /*seed=*/0);
    auto params = model.parameters();
    try {
        const json& manifest = header.at("params");
        if (!manifest.is_array() || manifest.size() != params.size())
            throw DataError("checkpoint format error: parameter manifest mismatch");
        for (size_t i = 0; i < params.size(); ++i) {
            auto& [name, t] = params[i];
            const json& entry = manifest[i];
            if (entry.value("name", "") != name)
                throw DataError("checkpoint format error: unexpected parameter \"" +
                                entry.value("name", "") + "\", wanted \"" + name + "\"");
            auto shape = entry.at("shape").get<std::vector<int64_t>>();
            if (shape != t.shape())
                throw DataError("checkpoint format error: shape mismatch for " + name);
            in.read(reinterpret_cast<char*>(t.values().data()),
                    static_cast<std::streamsize>(t.numel() * sizeof(float)));
            if (!in)
                throw DataError("checkpoint size error: truncated blob for " + name + " in " +
                                path);
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("checkpoint format error: bad manifest: ") + e.what());
    }
    if (in.peek() != std::char_traits<char>::eof())
        throw DataError("checkpoint size error: trailing bytes after the last blob in " + path);
    return model;
}

} // namespace guji
