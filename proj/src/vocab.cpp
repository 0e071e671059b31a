#include "guji/vocab.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "guji/utf8.hpp"

namespace guji {

namespace {

using json = nlohmann::json;

const std::vector<std::string>& special_tokens() {
    static const std::vector<std::string> specials = {"[PAD]", "[UNK]", "[BOS]", "[SEP]", "[EOS]"};
    return specials;
}

} // namespace

Vocabulary::Vocabulary() {
    for (const std::string& s : special_tokens()) tokens_.push_back(s);
}

void Vocabulary::append_token(std::string token) {
    std::vector<char32_t> cps = utf8_decode(token);
    if (cps.size() != 1)
        throw DataError("vocabulary token is not a single character: \"" + token + "\"");
    if (char_index_.count(cps[0])) throw DataError("duplicate vocabulary token: \"" + token + "\"");
    char_index_.emplace(cps[0], static_cast<int32_t>(tokens_.size()));
    tokens_.push_back(std::move(token));
}

void Vocabulary::append_corpus_chars(const std::vector<std::string>& texts, int64_t* added) {
    for (const std::string& text : texts) {
        for (char32_t cp : utf8_decode(text)) {
            if (char_index_.count(cp)) continue;
            char_index_.emplace(cp, static_cast<int32_t>(tokens_.size()));
            tokens_.push_back(utf8_encode_one(cp));
            if (added) ++*added;
        }
    }
}

Vocabulary Vocabulary::build_from_corpus(const std::vector<std::string>& texts) {
    Vocabulary v;
    v.append_corpus_chars(texts, nullptr);
    return v;
}

std::pair<Vocabulary, int64_t> Vocabulary::extend_with_corpus(
    const std::vector<std::string>& texts) const {
    Vocabulary v = *this;
    int64_t added = 0;
    v.append_corpus_chars(texts, &added);
    return {std::move(v), added};
}

const std::string& Vocabulary::token(int32_t id) const {
    if (id < 0 || id >= size()) throw DataError("token id out of range: " + std::to_string(id));
    return tokens_[static_cast<size_t>(id)];
}

int32_t Vocabulary::id_of_char(char32_t cp) const {
    auto it = char_index_.find(cp);
    return it == char_index_.end() ? kUnk : it->second;
}

std::vector<int32_t> Vocabulary::encode(const std::string& text, bool add_bos,
                                        bool add_eos) const {
    std::vector<char32_t> cps = utf8_decode(text);
    std::vector<int32_t> ids;
    ids.reserve(cps.size() + 2);
    if (add_bos) ids.push_back(kBos);
    for (char32_t cp : cps) ids.push_back(id_of_char(cp));
    if (add_eos) ids.push_back(kEos);
    return ids;
}

std::string Vocabulary::decode(const std::vector<int32_t>& ids) const {
    std::string out;
    for (size_t i = 0; i < ids.size(); ++i) {
        int32_t id = ids[i];
        if (id < 0 || id >= size())
            throw DataError("id " + std::to_string(id) + " out of range at position " +
                            std::to_string(i));
        if (id == kUnk) {
            out += "[UNK]";
        } else if (id >= kNumSpecials) {
            out += tokens_[static_cast<size_t>(id)];
        }
        // PAD/BOS/SEP/EOS render as empty
    }
    return out;
}

std::string Vocabulary::digest() const {
    uint64_t h = 1469598103934665603ull; // FNV-1a 64 offset basis
    auto mix = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        h ^= static_cast<unsigned char>('\n');
        h *= 1099511628211ull;
    };
    for (const std::string& t : tokens_) mix(t);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

std::string Vocabulary::to_json() const {
    json j;
    j["version"] = 1;
    j["specials"] = special_tokens();
    j["tokens"] = tokens_;
    return j.dump();
}

Vocabulary Vocabulary::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed vocabulary JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("version") || j["version"] != 1)
        throw DataError("vocabulary file: missing or unsupported version");
    if (!j.contains("specials") || !j.contains("tokens"))
        throw DataError("vocabulary file: missing specials or tokens");
    auto specials = j["specials"].get<std::vector<std::string>>();
    if (specials != special_tokens()) throw DataError("vocabulary file: unexpected special tokens");
    auto tokens = j["tokens"].get<std::vector<std::string>>();
    if (tokens.size() < static_cast<size_t>(kNumSpecials))
        throw DataError("vocabulary file: token list shorter than the specials");
    Vocabulary v;
    for (size_t i = 0; i < static_cast<size_t>(kNumSpecials); ++i) {
        if (tokens[i] != v.tokens_[i])
            throw DataError("vocabulary file: specials must occupy ids 0..4 in order");
    }
    for (size_t i = static_cast<size_t>(kNumSpecials); i < tokens.size(); ++i) {
        v.append_token(tokens[i]);
    }
    return v;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << to_json() << "\n";
    if (!out) throw DataError("failed writing " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

} // namespace guji
