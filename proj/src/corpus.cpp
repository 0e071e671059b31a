#include "guji/corpus.hpp"

#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "guji/utf8.hpp"

namespace guji {

namespace {

using json = nlohmann::json;

std::string trimmed(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

json parse_record(const std::string& line, size_t line_no) {
    json rec;
    try {
        rec = json::parse(line);
    } catch (const json::exception& e) {
        throw DataError("malformed JSON at line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.is_object())
        throw DataError("expected a JSON object at line " + std::to_string(line_no));
    return rec;
}

std::string require_string(const json& rec, const char* key, size_t line_no) {
    auto it = rec.find(key);
    if (it == rec.end())
        throw DataError("missing key " + std::string(key) + " at line " + std::to_string(line_no));
    if (!it->is_string())
        throw DataError("key " + std::string(key) + " is not a string at line " +
                        std::to_string(line_no));
    return it->get<std::string>();
}

} // namespace

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

std::vector<AlignedPair> load_aligned(const std::string& path) {
    std::vector<AlignedPair> pairs;
    size_t line_no = 0;
    for (const std::string& line : read_lines(path)) {
        ++line_no;
        if (trimmed(line).empty()) continue;
        json rec = parse_record(line, line_no);
        AlignedPair p;
        p.ancient = require_string(rec, "Ancient", line_no);
        p.modern = require_string(rec, "Chinese", line_no);
        if (trimmed(p.ancient).empty() || trimmed(p.modern).empty())
            throw DataError("empty sentence at line " + std::to_string(line_no));
        pairs.push_back(std::move(p));
    }
    return pairs;
}

std::vector<LabeledText> load_labeled(const std::string& path) {
    std::vector<LabeledText> out;
    size_t line_no = 0;
    for (const std::string& line : read_lines(path)) {
        ++line_no;
        if (trimmed(line).empty()) continue;
        json rec = parse_record(line, line_no);
        LabeledText e;
        e.text = require_string(rec, "text", line_no);
        e.label = require_string(rec, "label", line_no);
        if (e.text.empty() || e.label.empty())
            throw DataError("empty text or label at line " + std::to_string(line_no));
        out.push_back(std::move(e));
    }
    return out;
}

double pair_similarity(const std::string& a, const std::string& b) {
    std::vector<char32_t> ca = utf8_decode(a);
    std::vector<char32_t> cb = utf8_decode(b);
    if (ca.empty() && cb.empty()) return 1.0;

    // n = 2 normally, n = 1 when either side is too short for bigrams.
    size_t n = (ca.size() < 2 || cb.size() < 2) ? 1 : 2;

    auto grams = [n](const std::vector<char32_t>& cs) {
        std::unordered_map<uint64_t, int64_t> m;
        if (cs.size() >= n) {
            for (size_t i = 0; i + n <= cs.size(); ++i) {
                uint64_t key = cs[i];
                if (n == 2) key = (key << 21) | cs[i + 1];
                ++m[key];
            }
        }
        return m;
    };
    auto ma = grams(ca);
    auto mb = grams(cb);
    int64_t na = 0, nb = 0, inter = 0;
    for (const auto& [k, c] : ma) na += c;
    for (const auto& [k, c] : mb) nb += c;
    for (const auto& [k, c] : ma) {
        auto it = mb.find(k);
        if (it != mb.end()) inter += std::min(c, it->second);
    }
    if (na + nb == 0) return 0.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

std::vector<AlignedPair> filter_pairs(const std::vector<AlignedPair>& pairs, double low,
                                      double high) {
    if (low > high) throw ConfigError("filter_pairs: low > high");
    if (low < 0.0 || high > 1.0) throw ConfigError("filter_pairs: band must lie within [0, 1]");
    std::vector<AlignedPair> kept;
    for (const AlignedPair& p : pairs) {
        double sim = pair_similarity(p.ancient, p.modern);
        if (sim >= low && sim <= high) {
            AlignedPair q = p;
            q.similarity = sim;
            kept.push_back(std::move(q));
        }
    }
    return kept;
}

CorpusStats corpus_stats(const std::vector<std::string>& sentences) {
    if (sentences.empty()) throw DataError("empty corpus");
    CorpusStats stats;
    stats.sentence_count = static_cast<int64_t>(sentences.size());
    std::vector<int64_t> lengths;
    lengths.reserve(sentences.size());
    for (const std::string& s : sentences) {
        int64_t len = static_cast<int64_t>(utf8_length(s));
        lengths.push_back(len);
        stats.total_chars += len;
    }
    double n = static_cast<double>(stats.sentence_count);
    stats.mean_length = static_cast<double>(stats.total_chars) / n;
    double acc = 0.0;
    for (int64_t len : lengths) {
        double d = static_cast<double>(len) - stats.mean_length;
        acc += d * d;
    }
    stats.variance = acc / n;
    return stats;
}

std::string corpus_stats_to_json(const CorpusStats& stats) {
    json j;
    j["sentence_count"] = stats.sentence_count;
    j["total_chars"] = stats.total_chars;
    j["mean_length"] = stats.mean_length;
    j["variance"] = stats.variance;
    return j.dump();
}

} // namespace guji
