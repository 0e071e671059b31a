// Acceptance suite: one criterion per section, one pass/fail line each.
// Exit code is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "guji/corpus.hpp"
#include "guji/eval.hpp"
#include "guji/model.hpp"
#include "guji/tasks.hpp"
#include "guji/training.hpp"
#include "guji/utf8.hpp"
#include "guji/vocab.hpp"
#include "reference_model.hpp"
#include "test_util.hpp"

using namespace guji;
using guji::testing::RefModel;
using guji::testing::TempDir;

namespace {

int g_failures = 0;

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

void verdict(int index, const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%s] %2d. %-28s %s\n", ok ? "PASS" : "FAIL", index, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

std::vector<int32_t> random_ids(Rng& rng, int64_t n, int64_t vocab) {
    std::vector<int32_t> ids(static_cast<size_t>(n));
    for (auto& id : ids) id = static_cast<int32_t>(rng.below(static_cast<uint64_t>(vocab)));
    return ids;
}

ModelConfig grad_config() {
    ModelConfig c;
    c.n_layers = 2;
    c.n_heads = 2;
    c.d_model = 16;
    c.d_ff = 48;
    c.context_len = 16;
    c.vocab_size = 16;
    return c;
}

// --- 1. gradient correctness ------------------------------------------------
// Analytic gradients vs central finite differences of the float64 reference
// loss, h = 1e-3. Float32 parameter storage leaves an absolute noise floor of
// a few 1e-5 on the analytic side, so the error metric is the usual
// atol/rtol combination: rel_i = |a - n| / max(|a|, |n|, 0.1), i.e. pure
// relative for large gradients and absolute <= 1e-4 for small ones. A wrong
// backward formula shows up here at ~1000x the threshold.
void criterion_gradients() {
    Timer timer;
    double worst = 0.0;
    std::string worst_param;
    const int n_models = 10;
    for (int m = 0; m < n_models; ++m) {
        Rng rng(1000 + static_cast<uint64_t>(m));
        ModelConfig cfg = grad_config();
        GptModel model = GptModel::init(cfg, 77 + static_cast<uint64_t>(m));
        const int64_t B = 2, T = 6;
        auto ids = random_ids(rng, B * T, cfg.vocab_size);
        auto targets = random_ids(rng, B * T, cfg.vocab_size);
        std::vector<uint8_t> mask(static_cast<size_t>(B * T), 1);

        auto params = model.parameters();
        for (auto& [name, t] : params) t.zero_grad();
        nn::Tensor logits = model.forward(ids, B, T);
        nn::backward(nn::cross_entropy(logits, targets, mask));

        std::vector<float> analytic;
        for (auto& [name, t] : params) {
            auto g = t.grad();
            analytic.insert(analytic.end(), g.begin(), g.end());
        }

        RefModel ref(model);
        const double h = 1e-3;
        const int64_t n = static_cast<int64_t>(ref.param_count());
        std::vector<double> rel(static_cast<size_t>(n), 0.0);
#pragma omp parallel
        {
            RefModel local = ref;
#pragma omp for schedule(static)
            for (int64_t i = 0; i < n; ++i) {
                double saved = local.param(static_cast<size_t>(i));
                local.param(static_cast<size_t>(i)) = saved + h;
                double up = local.loss(ids, B, T, {}, targets, mask);
                local.param(static_cast<size_t>(i)) = saved - h;
                double down = local.loss(ids, B, T, {}, targets, mask);
                local.param(static_cast<size_t>(i)) = saved;
                double numeric = (up - down) / (2.0 * h);
                double a = static_cast<double>(analytic[static_cast<size_t>(i)]);
                rel[static_cast<size_t>(i)] =
                    std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 0.1});
            }
        }
        for (int64_t i = 0; i < n; ++i) {
            if (rel[static_cast<size_t>(i)] > worst) {
                worst = rel[static_cast<size_t>(i)];
                worst_param = ref.param_name(static_cast<size_t>(i));
            }
        }
    }
    double secs = timer.seconds();
    bool ok = worst <= 1e-3 && secs < 60.0;
    verdict(1, "gradient correctness",
            ok, fmt("max rel err %.2e (worst: %s), 10 models, %.1fs", worst,
                    worst_param.c_str(), secs));
}

// --- 2. causality -------------------------------------------------------------
void criterion_causality() {
    Timer timer;
    Rng rng(2024);
    ModelConfig cfg = grad_config();
    GptModel model = GptModel::init(cfg, 5);
    nn::NoGradGuard no_grad;
    int bad = 0;
    const int cases = 100;
    for (int c = 0; c < cases; ++c) {
        const int64_t T = 2 + static_cast<int64_t>(rng.below(10));
        auto ids = random_ids(rng, T, cfg.vocab_size);
        auto base = model.forward(ids, 1, T);
        int64_t pos = static_cast<int64_t>(rng.below(static_cast<uint64_t>(T - 1)));
        auto perturbed = ids;
        for (int64_t t = pos + 1; t < T; ++t)
            perturbed[static_cast<size_t>(t)] =
                static_cast<int32_t>(rng.below(static_cast<uint64_t>(cfg.vocab_size)));
        auto moved = model.forward(perturbed, 1, T);
        size_t bytes = static_cast<size_t>((pos + 1) * cfg.vocab_size) * sizeof(float);
        if (std::memcmp(base.values().data(), moved.values().data(), bytes) != 0) ++bad;
    }
    verdict(2, "causality (bitwise)", bad == 0,
            fmt("%d/%d prefixes unchanged, %.1fs", cases - bad, cases, timer.seconds()));
}

// --- 3. overfit oracle --------------------------------------------------------
void criterion_overfit() {
    Timer timer;
    std::string sentence = "天地玄黄宇宙洪荒";
    std::vector<std::string> corpus(32, sentence);
    Vocabulary vocab = Vocabulary::build_from_corpus(corpus);
    ModelConfig cfg;
    cfg.n_layers = 4;
    cfg.n_heads = 4;
    cfg.d_model = 128;
    cfg.d_ff = 512;
    cfg.context_len = 64;
    cfg.vocab_size = vocab.size();
    GptModel model = GptModel::init(cfg, 3);

    TrainConfig tc;
    tc.learning_rate = 1.5e-3;
    tc.epochs = 300; // 8 windows of 40 = one step per epoch
    tc.batch_size = 8;
    tc.max_seq_length = 40;
    tc.seed = 9;
    TrainReport report = pretrain_clm(model, corpus, vocab, tc);
    double secs = timer.seconds();

    // smoothed (100-step window mean) losses never increase
    bool monotone = true;
    double prev_window = 1e300;
    for (size_t w = 0; w + 100 <= report.loss_history.size(); w += 100) {
        double mean = 0.0;
        for (size_t i = w; i < w + 100; ++i) mean += report.loss_history[i];
        mean /= 100.0;
        if (mean > prev_window) monotone = false;
        prev_window = mean;
    }

    bool ok = report.final_ppl <= 1.2 && report.steps <= 2000 && secs < 300.0 && monotone;
    verdict(3, "overfit oracle", ok,
            fmt("train PPL %.4f after %lld steps, smoothed loss %s, %.1fs", report.final_ppl,
                static_cast<long long>(report.steps),
                monotone ? "non-increasing" : "INCREASED", secs));
}

// --- 4. perplexity oracle -----------------------------------------------------
void criterion_perplexity() {
    Timer timer;
    std::vector<std::string> corpus = {"天地玄黄", "宇宙", "洪荒日月盈昃", "辰"};
    Vocabulary vocab = Vocabulary::build_from_corpus(corpus);
    bool ok = true;
    std::string detail;

    for (uint64_t seed : {11ull, 12ull, 13ull}) {
        ModelConfig cfg;
        cfg.n_layers = 2;
        cfg.n_heads = 2;
        cfg.d_model = 16;
        cfg.d_ff = 64;
        cfg.context_len = 5; // forces windowed scoring
        cfg.vocab_size = vocab.size();
        GptModel model = GptModel::init(cfg, seed);

        // independent naive per-sentence loop over the same forward pass
        nn::NoGradGuard no_grad;
        double nll = 0.0;
        int64_t count = 0;
        for (const std::string& text : corpus) {
            std::vector<int32_t> ids = vocab.encode(text, true, true);
            for (size_t start = 0; start < ids.size(); start += 5) {
                size_t len = std::min<size_t>(ids.size() - start, 5);
                if (len < 2) break;
                std::vector<int32_t> window(ids.begin() + static_cast<ptrdiff_t>(start),
                                            ids.begin() + static_cast<ptrdiff_t>(start + len));
                nn::Tensor logits = model.forward(window, 1, static_cast<int64_t>(len));
                for (size_t t = 1; t < len; ++t) {
                    const float* row = logits.values().data() +
                                       (t - 1) * static_cast<size_t>(cfg.vocab_size);
                    double mx = row[0];
                    for (int64_t u = 1; u < cfg.vocab_size; ++u)
                        mx = std::max(mx, static_cast<double>(row[u]));
                    double sum = 0.0;
                    for (int64_t u = 0; u < cfg.vocab_size; ++u)
                        sum += std::exp(static_cast<double>(row[u]) - mx);
                    nll += mx + std::log(sum) - static_cast<double>(row[window[t]]);
                    ++count;
                }
            }
        }
        double naive = std::exp(nll / static_cast<double>(count));
        PerplexityReport r = perplexity(model, vocab, corpus);
        double rel = std::abs(r.ppl - naive) / naive;
        if (rel > 1e-6) {
            ok = false;
            detail = fmt("module %.9f vs naive %.9f", r.ppl, naive);
        }
    }

    // uniform-logit model: zero every parameter
    ModelConfig ucfg;
    ucfg.n_layers = 2;
    ucfg.n_heads = 2;
    ucfg.d_model = 16;
    ucfg.d_ff = 64;
    ucfg.context_len = 32;
    ucfg.vocab_size = vocab.size();
    GptModel uniform = GptModel::init(ucfg, 1);
    for (auto& [name, t] : uniform.parameters())
        std::fill(t.values().begin(), t.values().end(), 0.0f);
    PerplexityReport ur = perplexity(uniform, vocab, corpus);
    double v = static_cast<double>(vocab.size());
    if (std::abs(ur.ppl - v) / v > 1e-3) {
        ok = false;
        detail += fmt(" uniform PPL %.6f vs V=%d", ur.ppl, static_cast<int>(vocab.size()));
    }
    if (ok)
        detail = fmt("naive-loop agreement 1e-6, uniform PPL=V within 0.1%%, %.1fs",
                     timer.seconds());
    verdict(4, "perplexity oracle", ok, detail);
}

// --- 5. BLEU oracle -----------------------------------------------------------
BleuReport oracle_bleu(const std::vector<std::string>& cands,
                       const std::vector<std::string>& refs, int max_n) {
    BleuReport r;
    r.matches.assign(static_cast<size_t>(max_n), 0);
    r.totals.assign(static_cast<size_t>(max_n), 0);
    for (size_t i = 0; i < cands.size(); ++i) {
        auto c = utf8_decode(cands[i]);
        auto g = utf8_decode(refs[i]);
        r.candidate_length += static_cast<int64_t>(c.size());
        r.reference_length += static_cast<int64_t>(g.size());
        for (int n = 1; n <= max_n; ++n) {
            std::map<std::u32string, int64_t> cc, rc;
            for (size_t p = 0; p + static_cast<size_t>(n) <= c.size(); ++p)
                ++cc[std::u32string(c.begin() + static_cast<ptrdiff_t>(p),
                                    c.begin() + static_cast<ptrdiff_t>(p + static_cast<size_t>(n)))];
            for (size_t p = 0; p + static_cast<size_t>(n) <= g.size(); ++p)
                ++rc[std::u32string(g.begin() + static_cast<ptrdiff_t>(p),
                                    g.begin() + static_cast<ptrdiff_t>(p + static_cast<size_t>(n)))];
            for (const auto& [gram, cnt] : cc) {
                r.totals[static_cast<size_t>(n - 1)] += cnt;
                auto it = rc.find(gram);
                if (it != rc.end())
                    r.matches[static_cast<size_t>(n - 1)] += std::min(cnt, it->second);
            }
        }
    }
    double c_len = static_cast<double>(std::max<int64_t>(r.candidate_length, 1));
    r.brevity_penalty = r.candidate_length >= r.reference_length
                            ? 1.0
                            : std::exp(1.0 - static_cast<double>(r.reference_length) / c_len);
    r.bleu.assign(static_cast<size_t>(max_n), 0.0);
    if (r.totals[0] > 0 && r.matches[0] > 0) {
        for (int k = 1; k <= max_n; ++k) {
            double acc = 0.0;
            bool zero = false;
            for (int n = 1; n <= k; ++n) {
                if (r.totals[static_cast<size_t>(n - 1)] == 0) continue;
                if (r.matches[static_cast<size_t>(n - 1)] == 0) {
                    zero = true;
                    break;
                }
                acc += std::log(static_cast<double>(r.matches[static_cast<size_t>(n - 1)]) /
                                static_cast<double>(r.totals[static_cast<size_t>(n - 1)]));
            }
            if (!zero)
                r.bleu[static_cast<size_t>(k - 1)] =
                    r.brevity_penalty * std::exp(acc / static_cast<double>(k));
        }
    }
    return r;
}

void criterion_bleu() {
    Timer timer;
    bool ok = true;
    std::string detail;

    Rng rng(555);
    const char alphabet[] = "abcde";
    int checked = 0;
    for (int trial = 0; trial < 1000 && ok; ++trial) {
        size_t segments = 1 + rng.below(4);
        std::vector<std::string> cands, refs;
        for (size_t s = 0; s < segments; ++s) {
            auto rand_str = [&](size_t max_len) {
                size_t len = rng.below(max_len + 1);
                std::string out;
                for (size_t i = 0; i < len; ++i) out.push_back(alphabet[rng.below(5)]);
                return out;
            };
            cands.push_back(rand_str(10));
            refs.push_back(rand_str(10));
        }
        BleuReport got = bleu_corpus(cands, refs);
        BleuReport want = oracle_bleu(cands, refs, 4);
        bool same = got.matches == want.matches && got.totals == want.totals &&
                    got.candidate_length == want.candidate_length &&
                    got.reference_length == want.reference_length;
        for (size_t k = 0; k < 4 && same; ++k)
            same = std::abs(got.bleu[k] - want.bleu[k]) <= 1e-12;
        if (!same) {
            ok = false;
            detail = fmt("disagreement on random case %d", trial);
        }
        ++checked;
    }

    BleuReport hand = bleu_corpus({"abcd"}, {"abce"});
    if (std::abs(hand.bleu[0] - 0.75) > 1e-12 ||
        std::abs(hand.bleu[1] - std::sqrt(0.5)) > 1e-9) {
        ok = false;
        detail = fmt("hand case BLEU-1 %.12f BLEU-2 %.12f", hand.bleu[0], hand.bleu[1]);
    }
    BleuReport ident = bleu_corpus({"天地玄黄"}, {"天地玄黄"});
    for (double s : ident.bleu) {
        if (s != 1.0) {
            ok = false;
            detail = "identity case not 1.0";
        }
    }
    if (ok)
        detail = fmt("%d random cases exact, hand case 0.75 / sqrt(1/2), identity 1.0, %.1fs",
                     checked, timer.seconds());
    verdict(5, "BLEU oracle", ok, detail);
}

// --- 6. classification metrics ------------------------------------------------
void criterion_class_metrics() {
    Timer timer;
    bool ok = true;
    std::string detail;

    ClassReport hand = classification_report({"A", "A", "B"}, {"A", "B", "B"}, {"A", "B"});
    if (std::abs(hand.weighted_precision - 5.0 / 6.0) > 1e-12 ||
        std::abs(hand.weighted_recall - 2.0 / 3.0) > 1e-12) {
        ok = false;
        detail = fmt("hand case weighted P %.12f R %.12f", hand.weighted_precision,
                     hand.weighted_recall);
    }

    Rng rng(666);
    std::vector<std::string> labels = {"a", "b", "c", "d", "e"};
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        size_t L = 2 + rng.below(4);
        size_t n = 1 + rng.below(80);
        std::vector<std::string> truths, preds;
        for (size_t i = 0; i < n; ++i) {
            truths.push_back(labels[rng.below(L)]);
            preds.push_back(labels[rng.below(L)]);
        }
        std::vector<std::string> used(labels.begin(), labels.begin() + static_cast<ptrdiff_t>(L));
        ClassReport r = classification_report(truths, preds, used);
        worst = std::max(worst, std::abs(r.weighted_recall - r.accuracy));
    }
    if (worst > 1e-12) {
        ok = false;
        detail = fmt("weighted recall vs accuracy gap %.3e", worst);
    }
    if (ok)
        detail = fmt("hand case exact, recall==accuracy gap %.1e over 1000 cases, %.1fs", worst,
                     timer.seconds());
    verdict(6, "classification metrics", ok, detail);
}

// --- 7. translation memorization ----------------------------------------------
void criterion_translation() {
    Timer timer;
    const std::vector<std::string> src = {"子", "丑", "寅", "卯"};
    const std::vector<std::string> dst = {"鼠", "牛", "虎", "兔"};
    std::vector<AlignedPair> pairs;
    std::vector<std::string> charset;
    for (size_t i = 0; i < 4; ++i)
        for (size_t j = 0; j < 4; ++j) {
            pairs.push_back({src[i] + src[j], dst[i] + dst[j], std::nullopt});
            charset.push_back(pairs.back().ancient + pairs.back().modern);
        }
    Vocabulary vocab = Vocabulary::build_from_corpus(charset);
    ModelConfig cfg;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_model = 64;
    cfg.d_ff = 256;
    cfg.context_len = 16;
    cfg.vocab_size = vocab.size();
    GptModel model = GptModel::init(cfg, 21);

    TrainConfig tc;
    tc.learning_rate = 2e-3;
    tc.epochs = 250;
    tc.batch_size = 8;
    tc.max_seq_length = 8;
    tc.seed = 2;
    TrainReport report = finetune_translation(model, pairs, vocab, tc);

    DecodeConfig dc;
    dc.max_gen_length = 6;
    int exact = 0;
    for (const AlignedPair& p : pairs)
        if (translate(model, vocab, p.ancient, dc) == p.modern) ++exact;
    double secs = timer.seconds();
    verdict(7, "translation memorization", exact == 16,
            fmt("%d/16 exact after %lld steps, %.1fs", exact,
                static_cast<long long>(report.steps), secs));
}

// --- 8. end-to-end classification ----------------------------------------------
void criterion_classification() {
    Timer timer;
    const std::string label_a = "甲类", label_b = "乙类";
    const std::vector<std::string> labels = {label_a, label_b};
    const std::u32string filler = U"天地玄黄宇宙洪荒日月盈昃";
    Rng rng(888);

    auto make_example = [&](bool is_a) {
        std::u32string text;
        for (int i = 0; i < 8; ++i)
            text.push_back(filler[static_cast<size_t>(rng.below(filler.size()))]);
        char32_t marker = is_a ? U'東' : U'西';
        size_t pos = static_cast<size_t>(rng.below(text.size() + 1));
        text.insert(text.begin() + static_cast<ptrdiff_t>(pos), marker);
        return LabeledText{utf8_encode(std::vector<char32_t>(text.begin(), text.end())),
                           is_a ? label_a : label_b};
    };
    std::vector<LabeledText> train, test;
    for (int i = 0; i < 500; ++i) train.push_back(make_example(i % 2 == 0));
    for (int i = 0; i < 100; ++i) test.push_back(make_example(i % 2 == 1));

    std::vector<std::string> vocab_seed = {utf8_encode(std::vector<char32_t>(filler.begin(), filler.end())),
                                           "東西", label_a, label_b, kClassTemplatePrefix};
    Vocabulary vocab = Vocabulary::build_from_corpus(vocab_seed);

    ModelConfig cfg;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_model = 64;
    cfg.d_ff = 256;
    cfg.context_len = 32;
    cfg.vocab_size = vocab.size();
    GptModel model = GptModel::init(cfg, 31);

    TrainConfig tc;
    tc.learning_rate = 2e-3;
    tc.epochs = 6;
    tc.batch_size = 16;
    tc.max_seq_length = 24;
    tc.seed = 4;
    TrainReport report = finetune_classification(model, train, vocab, tc, kClassTemplatePrefix,
                                                 labels);

    int correct = 0;
    bool in_set = true;
    for (const LabeledText& e : test) {
        auto [label, scores] = classify(model, vocab, e.text, labels);
        if (label == e.label) ++correct;
        in_set = in_set && (label == label_a || label == label_b);
    }
    double acc = correct / 100.0;
    double secs = timer.seconds();
    bool ok = acc >= 0.95 && in_set;
    verdict(8, "end-to-end classification", ok,
            fmt("held-out accuracy %.2f, always in-set: %s, %lld steps, %.1fs", acc,
                in_set ? "yes" : "no", static_cast<long long>(report.steps), secs));
}

// --- 9. determinism & formats ----------------------------------------------------
void criterion_determinism() {
    Timer timer;
    TempDir dir;
    bool ok = true;
    std::string detail;

    std::vector<std::string> corpus = {"甲乙丙丁", "丁丙乙甲", "乙丁甲丙"};
    Vocabulary vocab = Vocabulary::build_from_corpus(corpus);
    auto run = [&](const std::string& out) {
        ModelConfig cfg;
        cfg.n_layers = 2;
        cfg.n_heads = 2;
        cfg.d_model = 32;
        cfg.d_ff = 128;
        cfg.context_len = 16;
        cfg.vocab_size = vocab.size();
        GptModel model = GptModel::init(cfg, 17);
        TrainConfig tc;
        tc.learning_rate = 1e-3;
        tc.epochs = 10;
        tc.batch_size = 2;
        tc.max_seq_length = 8;
        tc.seed = 19;
        pretrain_clm(model, corpus, vocab, tc);
        save_checkpoint(model, vocab.digest(), out);
    };
    run(dir.file("a.gjlm"));
    run(dir.file("b.gjlm"));
    if (guji::testing::read_file(dir.file("a.gjlm")) !=
        guji::testing::read_file(dir.file("b.gjlm"))) {
        ok = false;
        detail = "same-seed checkpoints differ";
    }

    // vocabulary file bitwise roundtrip
    vocab.save(dir.file("v.json"));
    Vocabulary::load(dir.file("v.json")).save(dir.file("v2.json"));
    if (guji::testing::read_file(dir.file("v.json")) !=
        guji::testing::read_file(dir.file("v2.json"))) {
        ok = false;
        detail += " vocab roundtrip differs";
    }

    // checkpoint roundtrip bitwise + corrupt header rejected
    std::string digest;
    GptModel loaded = load_checkpoint(dir.file("a.gjlm"), &digest);
    save_checkpoint(loaded, digest, dir.file("c.gjlm"));
    if (guji::testing::read_file(dir.file("a.gjlm")) !=
        guji::testing::read_file(dir.file("c.gjlm"))) {
        ok = false;
        detail += " checkpoint re-save differs";
    }
    std::string bytes = guji::testing::read_file(dir.file("a.gjlm"));
    bytes[2] ^= 0x40;
    guji::testing::write_file(dir.file("bad.gjlm"), bytes);
    bool rejected = false;
    try {
        load_checkpoint(dir.file("bad.gjlm"));
    } catch (const DataError&) {
        rejected = true;
    }
    if (!rejected) {
        ok = false;
        detail += " corrupt header accepted";
    }
    if (ok)
        detail = fmt("bitwise checkpoints, bitwise file roundtrips, corrupt header rejected, "
                     "%.1fs",
                     timer.seconds());
    verdict(9, "determinism & formats", ok, detail);
}

// --- 10. pipeline fidelity --------------------------------------------------------
void criterion_pipeline() {
    Timer timer;
    bool ok = true;
    std::string detail;

    // exact-boundary pair: 21 chars differing at positions 0 and 10 -> 0.85
    std::string a = "abcdefghijklmnopqrstu";
    std::string b = a;
    b[0] = 'x';
    b[10] = 'y';
    std::vector<AlignedPair> pairs = {{a, b, std::nullopt},
                                      {"甲乙丙丁", "甲乙丙丁", std::nullopt}};
    auto kept = filter_pairs(pairs, 0.85, 0.98);
    if (kept.size() != 1 || kept[0].ancient != a) {
        ok = false;
        detail = fmt("band filter kept %zu pairs", kept.size());
    } else if (!kept[0].similarity || *kept[0].similarity != 34.0 / 40.0) {
        ok = false;
        detail = "cached similarity wrong";
    }

    CorpusStats stats = corpus_stats({"ab", "abcd"});
    if (stats.sentence_count != 2 || stats.total_chars != 6 || stats.mean_length != 3.0 ||
        stats.variance != 1.0) {
        ok = false;
        detail += fmt(" stats {%lld, %lld, %g, %g}", static_cast<long long>(stats.sentence_count),
                      static_cast<long long>(stats.total_chars), stats.mean_length,
                      stats.variance);
    }
    if (ok)
        detail = fmt("0.85 boundary included, identical pair excluded, stats exact, %.1fs",
                     timer.seconds());
    verdict(10, "pipeline fidelity", ok, detail);
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("acceptance suite (OpenMP, %d threads)\n", omp_get_max_threads());
#else
    std::printf("acceptance suite (serial build)\n");
#endif
    criterion_gradients();
    criterion_causality();
    criterion_overfit();
    criterion_perplexity();
    criterion_bleu();
    criterion_class_metrics();
    criterion_translation();
    criterion_classification();
    criterion_determinism();
    criterion_pipeline();
    std::printf("%s: %d/10 criteria passed\n", g_failures == 0 ? "OK" : "FAILED",
                10 - g_failures);
    return g_failures;
}
