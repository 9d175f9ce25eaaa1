#include "t2s/cli.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "t2s/augment.hpp"
#include "t2s/corpus.hpp"
#include "t2s/error.hpp"
#include "t2s/executor.hpp"
#include "t2s/provider.hpp"
#include "t2s/robustness.hpp"
#include "t2s/simfilter.hpp"
#include "t2s/util.hpp"
#include "t2s/zeroshot.hpp"

namespace t2s {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonPaths {
    std::string tables;
    std::string db_root;
    std::string examples;
};

struct ProviderFlags {
    std::string config_file;
    std::string gen_kind;
    std::string model;
    std::string endpoint;
    std::string embed_kind;
    std::string embed_model;
    int max_parallel = 0;
    int max_retries = -1;
    double temperature = -1.0;
    int batch_size = 0;

    ProviderConfig generation() const {
        ProviderConfig cfg;
        if (!config_file.empty()) {
            json doc = json::parse(util::read_file(config_file));
            if (doc.contains("generation")) cfg = ProviderConfig::from_json(doc["generation"]);
        }
        if (!gen_kind.empty()) cfg.kind = gen_kind;
        if (!model.empty()) cfg.model = model;
        if (!endpoint.empty()) cfg.endpoint = endpoint;
        if (max_parallel > 0) cfg.max_parallel = max_parallel;
        if (max_retries >= 0) cfg.max_retries = max_retries;
        if (temperature >= 0.0) cfg.temperature = temperature;
        cfg.validate();
        return cfg;
    }

    EmbeddingConfig embedding() const {
        EmbeddingConfig cfg;
        if (!config_file.empty()) {
            json doc = json::parse(util::read_file(config_file));
            if (doc.contains("embedding")) cfg = EmbeddingConfig::from_json(doc["embedding"]);
        }
        if (!embed_kind.empty()) cfg.kind = embed_kind;
        if (!embed_model.empty()) cfg.model = embed_model;
        if (batch_size > 0) cfg.batch_size = batch_size;
        cfg.validate();
        return cfg;
    }
};

void add_provider_flags(CLI::App* cmd, ProviderFlags& flags, bool generation, bool embedding) {
    cmd->add_option("--config", flags.config_file, "JSON config file with provider settings");
    if (generation) {
        cmd->add_option("--gen-provider", flags.gen_kind,
                        "generation provider: http, stub-echo, stub-rewrite");
        cmd->add_option("--model", flags.model, "generation model name");
        cmd->add_option("--endpoint", flags.endpoint, "API base URL");
        cmd->add_option("--max-parallel", flags.max_parallel, "max concurrent requests");
        cmd->add_option("--max-retries", flags.max_retries, "retries per request");
        cmd->add_option("--temperature", flags.temperature, "sampling temperature");
    }
    if (embedding) {
        cmd->add_option("--embed-provider", flags.embed_kind, "embedding provider: hash, http");
        cmd->add_option("--embed-model", flags.embed_model, "embedding model name");
        cmd->add_option("--batch-size", flags.batch_size, "embedding batch size");
    }
}

std::string config_hash_of(const json& j) {
    return util::hex64(util::fnv1a64(j.dump()));
}

// ---- validate ----------------------------------------------------------

int cmd_validate(const CommonPaths& paths, const std::vector<std::string>& example_files) {
    DatabaseCatalog catalog = load_catalog(paths.tables, paths.db_root);
    std::cout << "catalog: " << catalog.size() << " schema(s)\n";
    for (const auto& file : example_files) {
        ExampleSet set = load_examples(file, catalog);
        auto groups = group_by_intent(set);
        std::cout << file << ": " << set.size() << " example(s), " << groups.size()
                  << " intent group(s)\n";
    }
    return 0;
}

// ---- augment -----------------------------------------------------------

int cmd_augment(const CommonPaths& paths, const ProviderFlags& flags, const std::string& out,
                const std::string& train_out, int per_intent, std::uint64_t seed, bool resume) {
    ProviderConfig gen_cfg = flags.generation();
    DatabaseCatalog catalog = load_catalog(paths.tables, paths.db_root);
    ExampleSet examples = load_examples(paths.examples, catalog);

    json cfg_json{{"command", "augment"},
                  {"generation", gen_cfg.to_json()},
                  {"per_intent", per_intent},
                  {"seed", seed},
                  {"examples", fs::path(paths.examples).filename().string()}};
    std::string config_hash = config_hash_of(cfg_json);
    json meta = util::artifact_meta(config_hash, seed);

    fs::path out_path(out);
    fs::path partial = out_path;
    partial += ".partial";
    fs::path ckpt = out_path;
    ckpt += ".ckpt";

    AugmentOptions opts;
    opts.per_intent = per_intent;
    opts.rng_seed = seed;
    opts.partial_path = partial;
    opts.checkpoint_path = ckpt;
    opts.config_hash = config_hash;

    if (resume) {
        if (!fs::exists(ckpt) || !fs::exists(partial)) {
            fail(Errc::Usage, "nothing to resume: missing " + ckpt.string());
        }
        json state = json::parse(util::read_file(ckpt));
        if (state.value("config_hash", std::string()) != config_hash) {
            fail(Errc::Usage, "checkpoint was produced with a different configuration");
        }
        opts.resume_groups_done = state.value("groups_done", size_t{0});
        std::cout << "resuming after " << opts.resume_groups_done << " group(s)\n";
    } else {
        fs::remove(partial);
        fs::remove(ckpt);
        util::write_file_atomic(partial, json{{"meta", meta}}.dump() + "\n");
    }

    auto provider = make_generator(gen_cfg);
    augment_corpus(examples, *provider, gen_cfg, opts);

    fs::rename(partial, out_path);
    fs::remove(ckpt);

    AugmentationSet all = read_augmentations(out_path);
    size_t accepted = 0;
    for (const auto& aug : all) {
        if (aug.status == AugmentStatus::Accepted) ++accepted;
    }
    std::cout << "augmentations: " << all.size() << " attempt(s), " << accepted
              << " accepted -> " << out << "\n";

    if (!train_out.empty()) {
        ExampleSet merged = merge_training_set(examples, all);
        save_examples(train_out, merged, meta);
        std::cout << "training set: " << merged.size() << " example(s) -> " << train_out << "\n";
    }
    return 0;
}

// ---- filter / stats ----------------------------------------------------

int cmd_filter(const CommonPaths& paths, const ProviderFlags& flags, const std::string& in,
               const std::string& out, double threshold) {
    DatabaseCatalog catalog = load_catalog(paths.tables, paths.db_root);
    ExampleSet examples = load_examples(paths.examples, catalog);
    AugmentationSet augs = read_augmentations(in);

    EmbeddingConfig embed_cfg = flags.embedding();
    FilterConfig cfg;
    cfg.threshold = threshold;
    cfg.embedding = embed_cfg;
    cfg.batch_size = embed_cfg.batch_size;

    // Score only what is missing a similarity; already-scored items keep
    // their provider's numbers.
    std::vector<size_t> unscored;
    AugmentationSet subset;
    for (size_t i = 0; i < augs.size(); ++i) {
        const auto& aug = augs[i];
        bool active = aug.status == AugmentStatus::Accepted ||
                      aug.status == AugmentStatus::Pending;
        if (active && !aug.similarity) {
            unscored.push_back(i);
            subset.push_back(aug);
        }
    }
    if (!subset.empty()) {
        auto provider = make_embedder(embed_cfg);
        score_augmentations(subset, examples, *provider, cfg);
        for (size_t k = 0; k < unscored.size(); ++k) {
            augs[unscored[k]].similarity = subset[k].similarity;
            augs[unscored[k]].status = subset[k].status;
        }
    }
    filter_by_threshold(augs, threshold);

    json cfg_json{{"command", "filter"},
                  {"threshold", threshold},
                  {"embedding", embed_cfg.to_json()}};
    write_augmentations(out, augs, util::artifact_meta(config_hash_of(cfg_json), 0));

    size_t accepted = 0, rejected = 0;
    for (const auto& aug : augs) {
        if (aug.status == AugmentStatus::Accepted) ++accepted;
        if (aug.status == AugmentStatus::RejectedSimilarity) ++rejected;
    }
    std::cout << "threshold " << threshold << ": " << accepted << " accepted, " << rejected
              << " rejected by similarity -> " << out << "\n";
    return 0;
}

int cmd_stats(const std::string& in, const std::string& json_out) {
    AugmentationSet augs = read_augmentations(in);
    SimilarityStats stats = similarity_stats(augs);
    std::cout << render_histogram(stats);
    if (!json_out.empty()) {
        json doc = stats_to_json(stats);
        doc["meta"] = util::artifact_meta(config_hash_of(json{{"command", "stats"}}), 0);
        util::write_file_atomic(json_out, doc.dump(2) + "\n");
    }
    return 0;
}

// ---- evaluate ----------------------------------------------------------

int cmd_evaluate(const CommonPaths& paths, const std::string& preds, const std::string& out,
                 double timeout_s, size_t row_cap, int jobs) {
    DatabaseCatalog catalog = load_catalog(paths.tables, paths.db_root);
    ExampleSet examples = load_examples(paths.examples, catalog);
    std::vector<std::string> predictions = load_predictions(preds);

    ExecLimits limits;
    limits.timeout_s = timeout_s;
    limits.row_cap = row_cap;
    EvalReport report = evaluate_set(examples, predictions, catalog, limits, jobs);

    json cfg_json{{"command", "evaluate"},
                  {"timeout_s", timeout_s},
                  {"row_cap", row_cap},
                  {"examples", fs::path(paths.examples).filename().string()}};
    json doc = report_to_json(report, util::artifact_meta(config_hash_of(cfg_json), 0));
    if (!out.empty()) util::write_file_atomic(out, doc.dump(2) + "\n");

    std::cout << "accuracy " << util::format_pct1(report.accuracy) << " (" << report.correct
              << "/" << (report.total - report.gold_errors) << " scored, " << report.gold_errors
              << " gold error(s))\n";
    return 0;
}

// ---- robustness --------------------------------------------------------

int cmd_robustness(const std::string& manifest_path, const std::string& format,
                   const std::string& out, bool no_diff) {
    json manifest = json::parse(util::read_file(manifest_path));
    if (!manifest.contains("categories") || !manifest["categories"].is_array() ||
        manifest["categories"].empty()) {
        fail(Errc::EmptyInput, manifest_path + ": manifest needs a non-empty categories array");
    }
    fs::path base = fs::path(manifest_path).parent_path();
    auto resolve = [&](const std::string& p) {
        fs::path path(p);
        return path.is_absolute() ? path : base / path;
    };

    std::vector<RobustnessRow> rows;
    for (const auto& entry : manifest["categories"]) {
        std::string category = entry.at("category").get<std::string>();
        EvalReport pre = report_from_json(json::parse(
            util::read_file(resolve(entry.at("pre").get<std::string>()))));
        EvalReport post = report_from_json(json::parse(
            util::read_file(resolve(entry.at("post").get<std::string>()))));
        rows.push_back(compute_metrics(pre, post, category));
    }
    RobustnessReport report = aggregate_categories(rows);

    ReportFormat fmt = ReportFormat::Text;
    if (format == "markdown") fmt = ReportFormat::Markdown;
    else if (format == "json") fmt = ReportFormat::Json;
    else if (format != "text") fail(Errc::Usage, "unknown format: " + format);

    std::string rendered = render_report(report, fmt, !no_diff);
    if (fmt != ReportFormat::Json) {
        rendered += "Averages are unweighted (macro) over categories.\n";
    }
    if (!out.empty()) {
        util::write_file_atomic(out, rendered);
    } else {
        std::cout << rendered;
    }
    return 0;
}

// ---- prompt / infer ----------------------------------------------------

int cmd_prompt(const CommonPaths& paths, const std::string& out, int index) {
    DatabaseCatalog catalog = load_catalog(paths.tables, paths.db_root);
    ExampleSet examples = load_examples(paths.examples, catalog);
    if (index >= 0 && static_cast<size_t>(index) >= examples.size()) {
        fail(Errc::Usage, "--index out of range");
    }
    if (!out.empty()) {
        std::ostringstream lines;
        lines << json{{"meta", util::artifact_meta(config_hash_of(json{{"command", "prompt"}}), 0)}}
                     .dump()
              << '\n';
        for (size_t i = 0; i < examples.size(); ++i) {
            if (index >= 0 && i != static_cast<size_t>(index)) continue;
            const Example& ex = examples.at(i);
            ZeroShotPrompt p = build_prompt(catalog.at(ex.db_id), ex.question);
            lines << json{{"id", ex.id}, {"db_id", p.db_id}, {"prompt", p.text}}.dump() << '\n';
        }
        util::write_file_atomic(out, lines.str());
        return 0;
    }
    bool first = true;
    for (size_t i = 0; i < examples.size(); ++i) {
        if (index >= 0 && i != static_cast<size_t>(index)) continue;
        const Example& ex = examples.at(i);
        if (!first) std::cout << "\n\n";
        std::cout << build_prompt(catalog.at(ex.db_id), ex.question).text;
        first = false;
    }
    std::cout << "\n";
    return 0;
}

int cmd_infer(const CommonPaths& paths, const ProviderFlags& flags, const std::string& out) {
    ProviderConfig gen_cfg = flags.generation();
    DatabaseCatalog catalog = load_catalog(paths.tables, paths.db_root);
    ExampleSet examples = load_examples(paths.examples, catalog);
    auto provider = make_generator(gen_cfg);

    std::vector<std::string> prompts(examples.size());
    for (size_t i = 0; i < examples.size(); ++i) {
        const Example& ex = examples.at(i);
        prompts[i] = build_prompt(catalog.at(ex.db_id), ex.question).text;
    }

    std::vector<std::string> predictions(examples.size());
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex err_mutex;
    size_t workers = std::min<size_t>(static_cast<size_t>(gen_cfg.max_parallel),
                                      std::max<size_t>(1, examples.size()));
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                size_t i = next.fetch_add(1);
                if (i >= prompts.size() || failed.load()) return;
                try {
                    std::string raw =
                        call_with_retry(*provider, prompts[i], gen_cfg.max_retries);
                    predictions[i] = util::single_line(extract_sql(raw));
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!failed.exchange(true)) first_error = e.what();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failed.load()) fail(Errc::ProviderUnavailable, first_error);

    std::ostringstream content;
    for (const auto& p : predictions) content << p << '\n';
    util::write_file_atomic(out, content.str());

    json cfg_json{{"command", "infer"}, {"generation", gen_cfg.to_json()}};
    util::write_file_atomic(out + ".meta.json",
                            json{{"meta", util::artifact_meta(config_hash_of(cfg_json), 0)}}
                                    .dump(2) +
                                "\n");
    std::cout << predictions.size() << " prediction(s) -> " << out << "\n";
    return 0;
}

// ---- compare -----------------------------------------------------------

int cmd_compare(const std::string& a_path, const std::string& b_path, const std::string& out) {
    EvalReport a = report_from_json(json::parse(util::read_file(a_path)));
    EvalReport b = report_from_json(json::parse(util::read_file(b_path)));
    if (a.ids.size() != b.ids.size()) {
        fail(Errc::SizeMismatch, "reports cover " + std::to_string(a.ids.size()) + " vs " +
                                     std::to_string(b.ids.size()) + " examples");
    }
    json flips = json::array();
    size_t a_only = 0, b_only = 0;
    for (size_t i = 0; i < a.ids.size(); ++i) {
        if (a.ids[i] != b.ids[i]) {
            fail(Errc::DbIdMismatch,
                 "reports disagree on example order at index " + std::to_string(i));
        }
        Outcome oa = a.verdicts[i].outcome, ob = b.verdicts[i].outcome;
        if (oa == ob) continue;
        if (oa == Outcome::Correct) ++a_only;
        if (ob == Outcome::Correct) ++b_only;
        flips.push_back(json{{"id", a.ids[i]}, {"from", outcome_name(oa)}, {"to", outcome_name(ob)}});
    }
    json doc{{"meta", util::artifact_meta(config_hash_of(json{{"command", "compare"}}), 0)},
             {"summary",
              {{"flipped", flips.size()},
               {"a_correct_b_not", a_only},
               {"b_correct_a_not", b_only}}},
             {"flips", std::move(flips)}};
    if (!out.empty()) {
        util::write_file_atomic(out, doc.dump(2) + "\n");
    } else {
        std::cout << doc.dump(2) << "\n";
    }
    return 0;
}

} // namespace

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"text-to-SQL augmentation and robustness evaluation toolkit", "t2s"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    CommonPaths paths;
    ProviderFlags flags;

    auto add_catalog_opts = [&](CLI::App* cmd, bool with_examples) {
        cmd->add_option("--tables", paths.tables, "Spider tables.json")->required();
        cmd->add_option("--db-root", paths.db_root, "directory with <db_id>/<db_id>.sqlite")
            ->required();
        if (with_examples) {
            cmd->add_option("--examples", paths.examples, "examples JSON file")->required();
        }
    };

    // validate
    std::vector<std::string> validate_examples;
    auto* validate = app.add_subcommand("validate", "load and check catalogs and example files");
    add_catalog_opts(validate, false);
    validate->add_option("--examples", validate_examples, "examples JSON file(s)");

    // augment
    std::string aug_out, train_out;
    int per_intent = 2;
    std::uint64_t seed = 0;
    bool resume = false;
    auto* augment = app.add_subcommand("augment", "generate question reformulations");
    add_catalog_opts(augment, true);
    augment->add_option("--out", aug_out, "augmentations JSON-lines output")->required();
    augment->add_option("--train-out", train_out, "merged training set output");
    augment->add_option("--per-intent", per_intent, "reformulations per intent (k)")
        ->check(CLI::Range(1, 7));
    augment->add_option("--seed", seed, "RNG seed");
    augment->add_flag("--resume", resume, "continue an interrupted run");
    add_provider_flags(augment, flags, true, false);

    // filter
    std::string filter_in, filter_out;
    double threshold = 0.5;
    auto* filter = app.add_subcommand("filter", "score and threshold augmentations");
    add_catalog_opts(filter, true);
    filter->add_option("--in", filter_in, "augmentations JSON-lines input")->required();
    filter->add_option("--out", filter_out, "filtered output")->required();
    filter->add_option("--threshold", threshold, "similarity threshold (default 0.5)");
    add_provider_flags(filter, flags, false, true);

    // stats
    std::string stats_in, stats_json;
    auto* stats = app.add_subcommand("stats", "similarity distribution of an augmentation file");
    stats->add_option("--in", stats_in, "augmentations JSON-lines input")->required();
    stats->add_option("--json", stats_json, "also write stats as JSON");

    // evaluate
    std::string preds, eval_out;
    double timeout_s = 30.0;
    size_t row_cap = 100000;
    int jobs = 1;
    auto* evaluate = app.add_subcommand("evaluate", "execution accuracy of predictions");
    add_catalog_opts(evaluate, true);
    evaluate->add_option("--preds", preds, "predictions file, one SQL per line")->required();
    evaluate->add_option("--out", eval_out, "evaluation report JSON output");
    evaluate->add_option("--timeout", timeout_s, "per-query timeout in seconds");
    evaluate->add_option("--row-cap", row_cap, "max rows per denotation");
    evaluate->add_option("--jobs", jobs, "parallel workers")->check(CLI::PositiveNumber);

    // robustness
    std::string manifest, rb_format = "text", rb_out;
    bool no_diff = false;
    auto* robustness = app.add_subcommand("robustness", "pre/post perturbation report");
    robustness->add_option("--manifest", manifest, "manifest JSON with categories")->required();
    robustness->add_option("--format", rb_format, "text, markdown, or json");
    robustness->add_option("--out", rb_out, "write report to a file");
    robustness->add_flag("--no-diff", no_diff, "omit the Diff column");

    // prompt
    std::string prompt_out;
    int prompt_index = -1;
    auto* prompt = app.add_subcommand("prompt", "emit zero-shot parsing prompts");
    add_catalog_opts(prompt, true);
    prompt->add_option("--out", prompt_out, "write prompts as JSON-lines");
    prompt->add_option("--index", prompt_index, "only the example at this index");

    // infer
    std::string infer_out;
    auto* infer = app.add_subcommand("infer", "zero-shot parsing via the configured provider");
    add_catalog_opts(infer, true);
    infer->add_option("--out", infer_out, "predictions output file")->required();
    add_provider_flags(infer, flags, true, false);

    // compare
    std::string cmp_a, cmp_b, cmp_out;
    auto* compare = app.add_subcommand("compare", "flipped verdicts between two reports");
    compare->add_option("--a", cmp_a, "first evaluation report")->required();
    compare->add_option("--b", cmp_b, "second evaluation report")->required();
    compare->add_option("--out", cmp_out, "write flips as JSON");

    std::vector<std::string> argv(args);
    try {
        app.parse(argv.empty() ? std::vector<std::string>{"--help"}
                               : std::vector<std::string>(argv.rbegin(), argv.rend()));
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        std::cout << kToolVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (*validate) return cmd_validate(paths, validate_examples);
        if (*augment) {
            return cmd_augment(paths, flags, aug_out, train_out, per_intent, seed, resume);
        }
        if (*filter) return cmd_filter(paths, flags, filter_in, filter_out, threshold);
        if (*stats) return cmd_stats(stats_in, stats_json);
        if (*evaluate) return cmd_evaluate(paths, preds, eval_out, timeout_s, row_cap, jobs);
        if (*robustness) return cmd_robustness(manifest, rb_format, rb_out, no_diff);
        if (*prompt) return cmd_prompt(paths, prompt_out, prompt_index);
        if (*infer) return cmd_infer(paths, flags, infer_out);
        if (*compare) return cmd_compare(cmp_a, cmp_b, cmp_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == Errc::Usage ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

int dispatch(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return dispatch(args);
}

} // namespace t2s
