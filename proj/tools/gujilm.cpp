// Command-line front end tying the corpus, vocabulary, training, evaluation
// and inference pieces into reproducible pipelines. Reports go to stdout (or
// --out) as JSON; everything else goes to stderr.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "guji/corpus.hpp"
#include "guji/eval.hpp"
#include "guji/model.hpp"
#include "guji/run_config.hpp"
#include "guji/tasks.hpp"
#include "guji/training.hpp"
#include "guji/vocab.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void emit(const std::string& payload, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << payload << "\n";
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw guji::DataError("cannot write " + out_path);
    out << payload << "\n";
    if (!out) throw guji::DataError("failed writing " + out_path);
}

std::vector<std::string> non_empty_lines(const std::string& path) {
    std::vector<std::string> lines;
    for (std::string& line : guji::read_lines(path)) {
        if (!line.empty()) lines.push_back(std::move(line));
    }
    return lines;
}

void write_pairs(const std::vector<guji::AlignedPair>& pairs, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw guji::DataError("cannot write " + path);
    for (const guji::AlignedPair& p : pairs) {
        json rec;
        rec["Ancient"] = p.ancient;
        rec["Chinese"] = p.modern;
        if (p.similarity) rec["similarity"] = *p.similarity;
        out << rec.dump() << "\n";
    }
    if (!out) throw guji::DataError("failed writing " + path);
}

struct LoadedModel {
    guji::GptModel model;
    guji::Vocabulary vocab;
};

// Inference-side loading: the checkpoint's vocabulary digest must match.
LoadedModel load_for_inference(const std::string& model_path, const std::string& vocab_path) {
    LoadedModel lm;
    lm.vocab = guji::Vocabulary::load(vocab_path);
    std::string digest;
    lm.model = guji::load_checkpoint(model_path, &digest);
    if (digest != lm.vocab.digest())
        throw guji::DataError("vocabulary digest mismatch: checkpoint was written with a "
                              "different vocabulary than " + vocab_path);
    return lm;
}

guji::DecodeConfig decode_config_from_flags(int64_t max_gen, const std::string& strategy,
                                            int64_t k, double tau, uint64_t seed) {
    guji::DecodeConfig dc;
    dc.max_gen_length = max_gen;
    dc.k = k;
    dc.tau = tau;
    dc.seed = seed;
    if (strategy == "greedy") {
        dc.strategy = guji::DecodeConfig::Strategy::greedy;
    } else if (strategy == "top_k") {
        dc.strategy = guji::DecodeConfig::Strategy::top_k;
    } else if (strategy == "temperature") {
        dc.strategy = guji::DecodeConfig::Strategy::temperature;
    } else {
        throw guji::ConfigError("unknown decoding strategy \"" + strategy + "\"");
    }
    dc.validate();
    return dc;
}

// Shared by the three training subcommands.
void run_training_command(const std::string& config_path, guji::RunConfig::Task task) {
    guji::RunConfig rc = guji::RunConfig::from_json_file(config_path, task);
    fs::create_directories(rc.output_dir);

    guji::Vocabulary vocab = guji::Vocabulary::load(rc.vocab_file);

    guji::GptModel model;
    if (!rc.init_checkpoint.empty()) {
        std::string digest;
        model = guji::load_checkpoint(rc.init_checkpoint, &digest);
        if (digest != vocab.digest()) {
            if (model.config().vocab_size < vocab.size()) {
                std::cerr << "[gujilm] growing embeddings " << model.config().vocab_size
                          << " -> " << vocab.size()
                          << " rows for the extended vocabulary\n";
                model.grow_vocab(vocab.size(), rc.model_seed);
            } else {
                throw guji::DataError(
                    "vocabulary digest mismatch: checkpoint does not belong to " +
                    rc.vocab_file + " and the vocabulary is not an extension of it");
            }
        }
    } else {
        guji::ModelConfig mc = rc.model;
        mc.vocab_size = vocab.size();
        model = guji::GptModel::init(mc, rc.model_seed);
    }
    if (!rc.max_seq_given) rc.train.max_seq_length = model.config().context_len;

    // echo the effective configuration next to the run outputs
    {
        std::ofstream out(fs::path(rc.output_dir) / "config.json", std::ios::binary);
        if (!out) throw guji::DataError("cannot write config echo in " + rc.output_dir);
        out << rc.to_json() << "\n";
    }

    const std::string ckpt_path = (fs::path(rc.output_dir) / "checkpoint.gjlm").string();
    const std::string digest = vocab.digest();
    guji::CheckpointFn periodic = [&](int64_t step, const guji::GptModel& m) {
        const std::string path =
            (fs::path(rc.output_dir) / ("checkpoint_step" + std::to_string(step) + ".gjlm"))
                .string();
        guji::save_checkpoint(m, digest, path);
        std::cerr << "[gujilm] wrote " << path << "\n";
    };

    guji::TrainReport report;
    if (task == guji::RunConfig::Task::pretrain) {
        std::vector<std::string> texts = non_empty_lines(rc.train_file);
        std::vector<std::string> eval_texts;
        if (rc.train_fraction < 1.0) {
            auto [train_part, held] =
                guji::split(texts, {rc.train_fraction, rc.split_seed});
            texts = std::move(train_part);
            eval_texts = std::move(held);
            std::cerr << "[gujilm] " << texts.size() << " train / " << eval_texts.size()
                      << " held-out sentences\n";
        }
        report = guji::pretrain_clm(model, texts, vocab, rc.train, eval_texts, periodic);
    } else if (task == guji::RunConfig::Task::finetune_translate) {
        std::vector<guji::AlignedPair> pairs = guji::load_aligned(rc.train_file);
        std::vector<guji::AlignedPair> eval_pairs;
        if (rc.train_fraction < 1.0) {
            auto [train_part, held] = guji::split(pairs, {rc.train_fraction, rc.split_seed});
            pairs = std::move(train_part);
            eval_pairs = std::move(held);
            std::cerr << "[gujilm] " << pairs.size() << " train / " << eval_pairs.size()
                      << " held-out pairs\n";
        }
        report = guji::finetune_translation(model, pairs, vocab, rc.train, eval_pairs, periodic);
    } else {
        std::vector<guji::LabeledText> examples = guji::load_labeled(rc.train_file);
        std::vector<std::string> labels = non_empty_lines(rc.labels_file);
        std::vector<guji::LabeledText> eval_examples;
        if (rc.train_fraction < 1.0) {
            auto [train_part, held] = guji::split(examples, {rc.train_fraction, rc.split_seed});
            examples = std::move(train_part);
            eval_examples = std::move(held);
            std::cerr << "[gujilm] " << examples.size() << " train / " << eval_examples.size()
                      << " held-out examples\n";
        }
        report = guji::finetune_classification(model, examples, vocab, rc.train,
                                               rc.template_prefix, labels, eval_examples,
                                               periodic);
    }
    if (report.dropped_examples > 0)
        std::cerr << "[gujilm] dropped " << report.dropped_examples
                  << " over-length examples\n";

    guji::save_checkpoint(model, digest, ckpt_path);
    std::cerr << "[gujilm] wrote " << ckpt_path << "\n";
    emit(report.to_json(), (fs::path(rc.output_dir) / "train_report.json").string());
    std::cout << report.to_json() << "\n";
}

std::vector<std::string> gather_inputs(const std::string& text_arg,
                                       const std::string& input_file) {
    if (!text_arg.empty() && !input_file.empty())
        throw guji::ConfigError("give either an inline text argument or --input, not both");
    if (!input_file.empty()) return non_empty_lines(input_file);
    if (!text_arg.empty()) return {text_arg};
    throw guji::ConfigError("no input: pass a text argument or --input FILE");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"character-level GPT toolkit for classical-Chinese corpora"};
    app.require_subcommand(1);

    // ---- build-vocab -------------------------------------------------------
    std::vector<std::string> bv_inputs;
    std::string bv_base, bv_out;
    auto* bv = app.add_subcommand("build-vocab",
                                  "build or extend a character vocabulary from text files");
    bv->add_option("inputs", bv_inputs, "input text files (one sentence per line)")->required();
    bv->add_option("--base", bv_base, "existing vocabulary to extend");
    bv->add_option("-o,--out", bv_out, "output vocabulary file")->required();

    // ---- filter-pairs ------------------------------------------------------
    std::string fp_in, fp_out;
    double fp_low = 0.85, fp_high = 0.98;
    auto* fp = app.add_subcommand("filter-pairs",
                                  "keep aligned pairs inside a similarity band");
    fp->add_option("input", fp_in, "aligned-pair JSONL file")->required();
    fp->add_option("-o,--out", fp_out, "output JSONL file")->required();
    fp->add_option("--low", fp_low, "band lower bound (inclusive)");
    fp->add_option("--high", fp_high, "band upper bound (inclusive)");

    // ---- corpus-stats ------------------------------------------------------
    std::string cs_in, cs_key, cs_out;
    auto* cs = app.add_subcommand("corpus-stats", "sentence-length statistics as JSON");
    cs->add_option("input", cs_in, "text file (one sentence per line)")->required();
    cs->add_option("--jsonl-key", cs_key, "treat input as JSONL and read this string field");
    cs->add_option("--out", cs_out, "write the JSON report here instead of stdout");

    // ---- split -------------------------------------------------------------
    std::string sp_in, sp_train, sp_held;
    double sp_fraction = 0.9;
    uint64_t sp_seed = 0;
    auto* sp = app.add_subcommand("split", "deterministic train/held-out split of a line file");
    sp->add_option("input", sp_in, "input line file")->required();
    sp->add_option("--fraction", sp_fraction, "train fraction in (0,1)")->required();
    sp->add_option("--seed", sp_seed, "shuffle seed");
    sp->add_option("--o-train", sp_train, "output file for the train part")->required();
    sp->add_option("--o-held", sp_held, "output file for the held-out part")->required();

    // ---- training ----------------------------------------------------------
    std::string pt_config, ft_config, fc_config;
    auto* pt = app.add_subcommand("pretrain", "causal-LM pretraining from a config file");
    pt->add_option("--config", pt_config, "JSON run config")->required();
    auto* ft = app.add_subcommand("finetune-translate",
                                  "ancient->modern translation fine-tuning");
    ft->add_option("--config", ft_config, "JSON run config")->required();
    auto* fc = app.add_subcommand("finetune-classify",
                                  "prompt-based classification fine-tuning");
    fc->add_option("--config", fc_config, "JSON run config")->required();

    // ---- translate ---------------------------------------------------------
    std::string tr_model, tr_vocab, tr_input, tr_text, tr_strategy = "greedy", tr_out;
    int64_t tr_max_gen = 512, tr_k = 10;
    double tr_tau = 1.0;
    uint64_t tr_seed = 0;
    auto* tr = app.add_subcommand("translate", "translate ancient text, one line at a time");
    tr->add_option("--model", tr_model, "checkpoint file")->required();
    tr->add_option("--vocab", tr_vocab, "vocabulary file")->required();
    tr->add_option("--input", tr_input, "file with one source sentence per line");
    tr->add_option("text", tr_text, "inline source sentence");
    tr->add_option("--max-gen-length", tr_max_gen, "generation cap per line");
    tr->add_option("--strategy", tr_strategy, "greedy | top_k | temperature");
    tr->add_option("--k", tr_k, "top_k candidate count");
    tr->add_option("--tau", tr_tau, "sampling temperature");
    tr->add_option("--seed", tr_seed, "sampling seed");
    tr->add_option("--out", tr_out, "write translations here instead of stdout");

    // ---- classify ----------------------------------------------------------
    std::string cl_model, cl_vocab, cl_labels, cl_input, cl_text, cl_template, cl_out;
    bool cl_sum = false;
    auto* cl = app.add_subcommand("classify", "label lines with the prompt template");
    cl->add_option("--model", cl_model, "checkpoint file")->required();
    cl->add_option("--vocab", cl_vocab, "vocabulary file")->required();
    cl->add_option("--labels", cl_labels, "label set, one per line")->required();
    cl->add_option("--input", cl_input, "file with one text per line");
    cl->add_option("text", cl_text, "inline text");
    cl->add_option("--template", cl_template, "prompt template prefix");
    cl->add_flag("--sum-scores", cl_sum, "rank labels by summed instead of mean log-prob");
    cl->add_option("--out", cl_out, "write JSONL results here instead of stdout");

    // ---- eval-* ------------------------------------------------------------
    std::string ep_model, ep_vocab, ep_in, ep_out;
    auto* ep = app.add_subcommand("eval-ppl", "corpus perplexity report");
    ep->add_option("--model", ep_model, "checkpoint file")->required();
    ep->add_option("--vocab", ep_vocab, "vocabulary file")->required();
    ep->add_option("input", ep_in, "text file (one sentence per line)")->required();
    ep->add_option("--out", ep_out, "write the JSON report here instead of stdout");

    std::string eb_cand, eb_ref, eb_out;
    int eb_max_n = 4;
    bool eb_smooth = false;
    auto* eb = app.add_subcommand("eval-bleu", "corpus BLEU report");
    eb->add_option("--candidates", eb_cand, "candidate translations, one per line")->required();
    eb->add_option("--references", eb_ref, "reference translations, one per line")->required();
    eb->add_option("--max-n", eb_max_n, "highest n-gram order");
    eb->add_flag("--smooth", eb_smooth, "add-one smoothing on higher orders");
    eb->add_option("--out", eb_out, "write the JSON report here instead of stdout");

    std::string ec_truths, ec_preds, ec_labels, ec_out;
    auto* ec = app.add_subcommand("eval-cls", "classification metrics report");
    ec->add_option("--truths", ec_truths, "true labels, one per line")->required();
    ec->add_option("--predictions", ec_preds, "predicted labels, one per line")->required();
    ec->add_option("--labels", ec_labels, "label set, one per line")->required();
    ec->add_option("--out", ec_out, "write the JSON report here instead of stdout");

    // single-dash spellings of the split outputs are accepted too
    std::vector<std::string> args;
    for (int i = 0; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "-o-train" || a == "-o-held") a.insert(a.begin(), '-');
        args.push_back(std::move(a));
    }
    std::vector<char*> argp;
    for (std::string& a : args) argp.push_back(a.data());

    try {
        app.parse(argc, argp.data());
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (bv->parsed()) {
            guji::Vocabulary vocab;
            int64_t added = 0;
            std::vector<std::string> texts;
            for (const std::string& path : bv_inputs) {
                auto lines = non_empty_lines(path);
                texts.insert(texts.end(), lines.begin(), lines.end());
            }
            if (!bv_base.empty()) {
                auto [extended, n] = guji::Vocabulary::load(bv_base).extend_with_corpus(texts);
                vocab = std::move(extended);
                added = n;
            } else {
                vocab = guji::Vocabulary::build_from_corpus(texts);
                added = vocab.size() - guji::Vocabulary::kNumSpecials;
            }
            vocab.save(bv_out);
            json j{{"added", added}, {"size", vocab.size()}};
            std::cout << j.dump() << "\n";
        } else if (fp->parsed()) {
            auto pairs = guji::load_aligned(fp_in);
            auto kept = guji::filter_pairs(pairs, fp_low, fp_high);
            write_pairs(kept, fp_out);
            json j{{"kept", kept.size()}, {"dropped", pairs.size() - kept.size()}};
            std::cout << j.dump() << "\n";
        } else if (cs->parsed()) {
            std::vector<std::string> sentences;
            if (cs_key.empty()) {
                sentences = non_empty_lines(cs_in);
            } else {
                size_t line_no = 0;
                for (const std::string& line : guji::read_lines(cs_in)) {
                    ++line_no;
                    if (line.empty()) continue;
                    json rec = json::parse(line, nullptr, false);
                    if (rec.is_discarded() || !rec.is_object() || !rec.contains(cs_key))
                        throw guji::DataError("missing key " + cs_key + " at line " +
                                              std::to_string(line_no));
                    sentences.push_back(rec[cs_key].get<std::string>());
                }
            }
            emit(guji::corpus_stats_to_json(guji::corpus_stats(sentences)), cs_out);
        } else if (sp->parsed()) {
            auto lines = guji::read_lines(sp_in);
            auto [train_part, held] = guji::split(lines, {sp_fraction, sp_seed});
            auto write_lines = [](const std::vector<std::string>& ls, const std::string& path) {
                std::ofstream out(path, std::ios::binary);
                if (!out) throw guji::DataError("cannot write " + path);
                for (const std::string& l : ls) out << l << "\n";
            };
            write_lines(train_part, sp_train);
            write_lines(held, sp_held);
            json j{{"train", train_part.size()}, {"held", held.size()}};
            std::cout << j.dump() << "\n";
        } else if (pt->parsed()) {
            run_training_command(pt_config, guji::RunConfig::Task::pretrain);
        } else if (ft->parsed()) {
            run_training_command(ft_config, guji::RunConfig::Task::finetune_translate);
        } else if (fc->parsed()) {
            run_training_command(fc_config, guji::RunConfig::Task::finetune_classify);
        } else if (tr->parsed()) {
            LoadedModel lm = load_for_inference(tr_model, tr_vocab);
            guji::DecodeConfig dc =
                decode_config_from_flags(tr_max_gen, tr_strategy, tr_k, tr_tau, tr_seed);
            std::string payload;
            for (const std::string& line : gather_inputs(tr_text, tr_input)) {
                payload += guji::translate(lm.model, lm.vocab, line, dc);
                payload += "\n";
            }
            if (!payload.empty()) payload.pop_back();
            emit(payload, tr_out);
        } else if (cl->parsed()) {
            LoadedModel lm = load_for_inference(cl_model, cl_vocab);
            std::vector<std::string> labels = non_empty_lines(cl_labels);
            const std::string tmpl =
                cl_template.empty() ? std::string(guji::kClassTemplatePrefix) : cl_template;
            std::string payload;
            for (const std::string& line : gather_inputs(cl_text, cl_input)) {
                auto [label, scores] =
                    guji::classify(lm.model, lm.vocab, line, labels, tmpl, cl_sum);
                json j;
                j["label"] = label;
                json arr = json::array();
                for (const auto& s : scores) arr.push_back({{"label", s.label}, {"score", s.score}});
                j["scores"] = arr;
                payload += j.dump();
                payload += "\n";
            }
            if (!payload.empty()) payload.pop_back();
            emit(payload, cl_out);
        } else if (ep->parsed()) {
            LoadedModel lm = load_for_inference(ep_model, ep_vocab);
            auto report = guji::perplexity(lm.model, lm.vocab, non_empty_lines(ep_in));
            emit(report.to_json(), ep_out);
        } else if (eb->parsed()) {
            auto report = guji::bleu_corpus(guji::read_lines(eb_cand),
                                            guji::read_lines(eb_ref), eb_max_n, eb_smooth);
            emit(report.to_json(), eb_out);
        } else if (ec->parsed()) {
            auto report =
                guji::classification_report(non_empty_lines(ec_truths),
                                            non_empty_lines(ec_preds), non_empty_lines(ec_labels));
            emit(report.to_json(), ec_out);
        }
    } catch (const guji::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const guji::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const guji::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
