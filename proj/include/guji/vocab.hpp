#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "guji/common.hpp"

namespace guji {

// Character-level vocabulary. Ids are dense; the five reserved specials
// always occupy ids 0..4 and character tokens follow in first-appearance
// order. Immutable after construction: extension returns a new value.
class Vocabulary {
  public:
    static constexpr int32_t kPad = 0;
    static constexpr int32_t kUnk = 1;
    static constexpr int32_t kBos = 2;
    static constexpr int32_t kSep = 3;
    static constexpr int32_t kEos = 4;
    static constexpr int32_t kNumSpecials = 5;

    // Specials only.
    Vocabulary();

    // Specials plus every distinct character of the corpus, in first-appearance order.
    static Vocabulary build_from_corpus(const std::vector<std::string>& texts);

    // Appends characters absent from this vocabulary; existing ids are
    // untouched. Returns the extended vocabulary and the appended count.
    std::pair<Vocabulary, int64_t> extend_with_corpus(const std::vector<std::string>& texts) const;

    int64_t size() const { return static_cast<int64_t>(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::string& token(int32_t id) const;

    // Id for a single-character token, kUnk when absent.
    int32_t id_of_char(char32_t cp) const;

    // One id per Unicode scalar value; unknown characters become UNK.
    std::vector<int32_t> encode(const std::string& text, bool add_bos = false,
                                bool add_eos = false) const;

    // Concatenates character tokens. PAD/BOS/SEP/EOS render empty, UNK as
    // "[UNK]". Out-of-range ids are a DataError naming the position.
    std::string decode(const std::vector<int32_t>& ids) const;

    // FNV-1a 64 over the token list, as a 16-hex-digit string. Checkpoints
    // store this so a model/vocabulary mismatch is detectable at load time.
    std::string digest() const;

    // File format: {"version": 1, "specials": [...], "tokens": [...]} with
    // tokens in id order (the five specials appear at positions 0..4).
    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

    std::string to_json() const;
    static Vocabulary from_json(const std::string& text);

  private:
    void append_token(std::string token);
    void append_corpus_chars(const std::vector<std::string>& texts, int64_t* added);

    std::vector<std::string> tokens_;
    std::unordered_map<char32_t, int32_t> char_index_;
};

} // namespace guji
