#include "t2s/augment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "t2s/error.hpp"
#include "t2s/util.hpp"

namespace t2s {

using nlohmann::json;

namespace {

const std::string kSimplify = "Simplify the following sentence: {Q}";
const std::string kHideDetails =
    "Simplify the sentence by hiding unnecessary details that do not change the meaning: {Q}";
const std::string kSynonyms = "Simplify the following sentence using synonyms: {Q}";
// Two spaces before "substituting", as printed in the source instruction set.
const std::string kSubstitutions = "Make the sentence simpler by  substituting some words in {Q}";
const std::string kExpressDifferently =
    "What are different ways of expressing this question: {Q}";
const std::string kFromExamples =
    "Examples of the question simplification:\n"
    "Original: Find the names of stadiums whose capacity is smaller than the average capacity.\n"
    "Simplified: Which stadiums are smaller than the average?\n"
    "Original: Show the fleet series of aircraft flown by pilots younger than 34.\n"
    "Simplified: Return the fleet series of the planes whose captains are younger than 34.\n"
    "Original: Which cities have the largest population?\n"
    "Simplified: Where do most people live?\n"
    "Original: In which year was most of the ships built?\n"
    "Simplified: When were most of the ships constructed?\n"
    "Original: Tell me the number of orders with \"Second time\" as the order detail.\n"
    "Simplified: How many orders have \"Second time\" as an order detail?\n"
    "Original: {Q}\n"
    "Simplified:";
const std::string kParaphrase = "Give me a paraphrase of the following question: {Q}";

} // namespace

const char* instruction_tag(InstructionKind kind) {
    switch (kind) {
        case InstructionKind::Simplify: return "simplify";
        case InstructionKind::HideDetails: return "hide-details";
        case InstructionKind::Synonyms: return "synonyms";
        case InstructionKind::Substitutions: return "substitutions";
        case InstructionKind::ExpressDifferently: return "express-differently";
        case InstructionKind::FromExamples: return "from-examples";
        case InstructionKind::Paraphrase: return "paraphrase";
    }
    return "simplify";
}

std::optional<InstructionKind> instruction_from_tag(const std::string& tag) {
    for (InstructionKind kind : kAllInstructionKinds) {
        if (tag == instruction_tag(kind)) return kind;
    }
    return std::nullopt;
}

const std::string& prompt_template(InstructionKind kind) {
    switch (kind) {
        case InstructionKind::Simplify: return kSimplify;
        case InstructionKind::HideDetails: return kHideDetails;
        case InstructionKind::Synonyms: return kSynonyms;
        case InstructionKind::Substitutions: return kSubstitutions;
        case InstructionKind::ExpressDifferently: return kExpressDifferently;
        case InstructionKind::FromExamples: return kFromExamples;
        case InstructionKind::Paraphrase: return kParaphrase;
    }
    return kSimplify;
}

std::string render_prompt(InstructionKind kind, const std::string& question) {
    const std::string& tmpl = prompt_template(kind);
    size_t slot = tmpl.find("{Q}");
    std::string out = tmpl;
    out.replace(slot, 3, question);
    return out;
}

const char* augment_status_name(AugmentStatus s) {
    switch (s) {
        case AugmentStatus::Pending: return "pending";
        case AugmentStatus::Accepted: return "accepted";
        case AugmentStatus::RejectedDuplicate: return "rejected_duplicate";
        case AugmentStatus::RejectedSimilarity: return "rejected_similarity";
        case AugmentStatus::RejectedParse: return "rejected_parse";
    }
    return "pending";
}

std::optional<AugmentStatus> augment_status_from_name(const std::string& s) {
    if (s == "pending") return AugmentStatus::Pending;
    if (s == "accepted") return AugmentStatus::Accepted;
    if (s == "rejected_duplicate") return AugmentStatus::RejectedDuplicate;
    if (s == "rejected_similarity") return AugmentStatus::RejectedSimilarity;
    if (s == "rejected_parse") return AugmentStatus::RejectedParse;
    return std::nullopt;
}

std::uint64_t Rng::next() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t Rng::below(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased.
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
        r = next();
    } while (r >= limit);
    return r % n;
}

GenerationPlan plan_kinds(const IntentGroup& group, const ExampleSet& examples, int k, Rng& rng,
                          std::uint64_t run_seed) {
    if (k < 0 || k > static_cast<int>(kAllInstructionKinds.size())) {
        fail(Errc::Usage, "per-intent count must be between 0 and 7, got " + std::to_string(k));
    }
    GenerationPlan plan;
    plan.rng_seed = run_seed;
    const Example* seed = examples.find(group.member_ids.front());
    if (!seed) fail(Errc::UnknownDbId, "group member not found: " + group.member_ids.front());
    plan.seed_question = seed->question;

    std::array<InstructionKind, 7> pool = kAllInstructionKinds;
    for (int i = 0; i < k; ++i) {
        size_t j = static_cast<size_t>(i) + rng.below(pool.size() - static_cast<size_t>(i));
        std::swap(pool[static_cast<size_t>(i)], pool[j]);
        plan.kinds.push_back(pool[static_cast<size_t>(i)]);
    }
    return plan;
}

namespace {

std::string strip_surrounding_quotes(std::string s) {
    s = util::trim(s);
    while (s.size() >= 2) {
        char a = s.front(), b = s.back();
        bool quoted = (a == '"' && b == '"') || (a == '\'' && b == '\'') ||
                      (a == '`' && b == '`');
        if (!quoted) break;
        s = util::trim(s.substr(1, s.size() - 2));
    }
    return s;
}

// "1." / "2)" / "-" / "*" / bullet prefixes at line starts.
std::string strip_list_marker(const std::string& line) {
    size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    size_t start = i;
    if (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) {
        while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
        if (i < line.size() && (line[i] == '.' || line[i] == ')')) {
            return line.substr(i + 1);
        }
        return line.substr(start);
    }
    if (i < line.size() && (line[i] == '-' || line[i] == '*')) return line.substr(i + 1);
    // UTF-8 bullet
    if (line.compare(i, 3, "\xe2\x80\xa2") == 0) return line.substr(i + 3);
    return line.substr(start);
}

bool looks_like_list_item(const std::string& line) {
    size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size()) return false;
    if (line[i] == '-' || line[i] == '*') return true;
    if (line.compare(i, 3, "\xe2\x80\xa2") == 0) return true;
    if (std::isdigit(static_cast<unsigned char>(line[i]))) {
        while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
        return i < line.size() && (line[i] == '.' || line[i] == ')');
    }
    return false;
}

std::vector<std::string> split_lines(const std::string& raw) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : raw) {
        if (c == '\n') {
            lines.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    lines.push_back(cur);
    return lines;
}

} // namespace

std::vector<std::string> parse_generation(InstructionKind kind, const std::string& raw) {
    std::vector<std::string> candidates;
    if (kind == InstructionKind::ExpressDifferently) {
        for (const auto& line : split_lines(raw)) {
            if (util::trim(line).empty()) continue;
            std::string text = looks_like_list_item(line) ? strip_list_marker(line) : line;
            text = strip_surrounding_quotes(text);
            if (text.size() >= 3) candidates.push_back(text);
        }
    } else {
        // First non-empty line block only.
        std::string block;
        for (const auto& line : split_lines(raw)) {
            if (util::trim(line).empty()) {
                if (!block.empty()) break;
                continue;
            }
            if (!block.empty()) block.push_back(' ');
            block += util::trim(line);
        }
        std::string text = strip_surrounding_quotes(block);
        if (text.size() >= 3) candidates.push_back(text);
    }
    if (candidates.empty()) {
        fail(Errc::EmptyGeneration, std::string("no usable candidate for kind ") +
                                        instruction_tag(kind));
    }
    return candidates;
}

std::string normalize_text(const std::string& q) {
    std::string s = util::collapse_whitespace(util::lower_ascii(q));
    for (;;) {
        while (!s.empty() && s.back() == ' ') s.pop_back();
        if (!s.empty() && (s.back() == '.' || s.back() == '?' || s.back() == '!')) {
            s.pop_back();
        } else {
            break;
        }
    }
    return s;
}

namespace {

struct Request {
    size_t group_index;
    size_t kind_index; // position in the plan
    InstructionKind kind;
    std::string prompt;
    std::string source_example_id;
};

struct Response {
    bool ok = false;
    std::string text;   // raw provider output
    std::string error;  // set when !ok
};

// Bounded-parallel provider calls; results land by request index so output
// never depends on scheduling.
void run_window(TextGenProvider& provider, const ProviderConfig& cfg, int backoff_base_ms,
                const std::vector<Request>& requests, std::vector<Response>& responses) {
    responses.assign(requests.size(), Response{});
    std::atomic<size_t> next{0};
    size_t workers = std::min<size_t>(static_cast<size_t>(cfg.max_parallel), requests.size());
    if (workers <= 1) {
        for (size_t i = 0; i < requests.size(); ++i) {
            try {
                responses[i].text =
                    call_with_retry(provider, requests[i].prompt, cfg.max_retries, backoff_base_ms);
                responses[i].ok = true;
            } catch (const Error& e) {
                responses[i].error = e.what();
            }
        }
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                size_t i = next.fetch_add(1);
                if (i >= requests.size()) return;
                try {
                    responses[i].text = call_with_retry(provider, requests[i].prompt,
                                                        cfg.max_retries, backoff_base_ms);
                    responses[i].ok = true;
                } catch (const Error& e) {
                    responses[i].error = e.what();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
}

void append_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) fail(Errc::Io, "cannot append to " + path.string());
    for (const auto& line : lines) out << line << '\n';
}

void write_checkpoint(const std::filesystem::path& path, const std::string& config_hash,
                      size_t groups_done) {
    json ckpt{{"config_hash", config_hash}, {"groups_done", groups_done}};
    util::write_file_atomic(path, ckpt.dump() + "\n");
}

} // namespace

AugmentationSet augment_corpus(const ExampleSet& examples, TextGenProvider& provider,
                               const ProviderConfig& cfg, const AugmentOptions& opts) {
    cfg.validate();
    if (opts.per_intent < 1) fail(Errc::Usage, "per-intent count must be >= 1");

    auto groups = group_by_intent(examples);
    Rng rng(opts.rng_seed);

    // Plans are drawn for every group, including already-persisted ones, so a
    // resumed run consumes the RNG stream identically to an uninterrupted one.
    std::vector<GenerationPlan> plans;
    plans.reserve(groups.size());
    for (size_t g = 0; g < groups.size(); ++g) {
        plans.push_back(plan_kinds(groups[g], examples, opts.per_intent, rng, opts.rng_seed));
        plans.back().group_index = g;
    }

    const bool persist = !opts.partial_path.empty();
    AugmentationSet out;

    size_t first_group = std::min(opts.resume_groups_done, groups.size());
    const size_t window_groups =
        std::max<size_t>(1, static_cast<size_t>(cfg.max_parallel) * 4);

    for (size_t window_start = first_group; window_start < groups.size();
         window_start += window_groups) {
        size_t window_end = std::min(groups.size(), window_start + window_groups);

        std::vector<Request> requests;
        for (size_t g = window_start; g < window_end; ++g) {
            const auto& plan = plans[g];
            for (size_t ki = 0; ki < plan.kinds.size(); ++ki) {
                requests.push_back(Request{g, ki, plan.kinds[ki],
                                           render_prompt(plan.kinds[ki], plan.seed_question),
                                           groups[g].member_ids.front()});
            }
        }

        std::vector<Response> responses;
        run_window(provider, cfg, opts.backoff_base_ms, requests, responses);

        size_t req_idx = 0;
        for (size_t g = window_start; g < window_end; ++g) {
            const auto& group = groups[g];
            const auto& plan = plans[g];

            // Fail before emitting anything for a group with a dead request:
            // completed groups stay persisted, this one reruns on resume.
            for (size_t ki = 0; ki < plan.kinds.size(); ++ki) {
                if (!responses[req_idx + ki].ok) {
                    if (persist) {
                        write_checkpoint(opts.checkpoint_path, opts.config_hash, g);
                    }
                    fail(Errc::ProviderUnavailable,
                         "group " + std::to_string(g) + ": " + responses[req_idx + ki].error);
                }
            }

            std::unordered_set<std::string> taken;
            for (const auto& id : group.member_ids) {
                taken.insert(normalize_text(examples.find(id)->question));
            }

            std::vector<std::string> lines;
            for (size_t ki = 0; ki < plan.kinds.size(); ++ki) {
                const Request& req = requests[req_idx + ki];
                const std::string& raw = responses[req_idx + ki].text;

                std::vector<std::string> candidates;
                try {
                    candidates = parse_generation(req.kind, raw);
                } catch (const Error&) {
                    Augmentation aug;
                    aug.source_example_id = req.source_example_id;
                    aug.kind = req.kind;
                    aug.raw_response = raw;
                    aug.status = AugmentStatus::RejectedParse;
                    if (persist) lines.push_back(augmentation_to_json(aug).dump());
                    out.push_back(std::move(aug));
                    continue;
                }

                for (const auto& candidate : candidates) {
                    Augmentation aug;
                    aug.source_example_id = req.source_example_id;
                    aug.kind = req.kind;
                    aug.text = candidate;
                    aug.raw_response = raw;
                    std::string norm = normalize_text(candidate);
                    if (taken.count(norm)) {
                        aug.status = AugmentStatus::RejectedDuplicate;
                        if (persist) lines.push_back(augmentation_to_json(aug).dump());
                        out.push_back(std::move(aug));
                        continue;
                    }
                    taken.insert(norm);
                    aug.status = AugmentStatus::Accepted;
                    if (persist) lines.push_back(augmentation_to_json(aug).dump());
                    out.push_back(std::move(aug));
                    break; // only the first accepted candidate counts for this request
                }
            }
            req_idx += plan.kinds.size();

            if (persist) {
                append_lines(opts.partial_path, lines);
                write_checkpoint(opts.checkpoint_path, opts.config_hash, g + 1);
            }
        }
    }
    return out;
}

json augmentation_to_json(const Augmentation& aug) {
    json j{{"source_example_id", aug.source_example_id},
           {"kind", instruction_tag(aug.kind)},
           {"text", aug.text},
           {"raw_response", aug.raw_response},
           {"status", augment_status_name(aug.status)}};
    if (aug.similarity) {
        j["similarity"] = *aug.similarity;
    } else {
        j["similarity"] = nullptr;
    }
    return j;
}

Augmentation augmentation_from_json(const json& j) {
    Augmentation aug;
    aug.source_example_id = j.at("source_example_id").get<std::string>();
    auto kind = instruction_from_tag(j.at("kind").get<std::string>());
    if (!kind) fail(Errc::MalformedExample, "unknown augmentation kind: " + j.at("kind").dump());
    aug.kind = *kind;
    aug.text = j.at("text").get<std::string>();
    aug.raw_response = j.value("raw_response", std::string());
    if (j.contains("similarity") && !j["similarity"].is_null()) {
        aug.similarity = j["similarity"].get<double>();
    }
    auto status = augment_status_from_name(j.at("status").get<std::string>());
    if (!status) fail(Errc::MalformedExample, "unknown status: " + j.at("status").dump());
    aug.status = *status;
    return aug;
}

void write_augmentations(const std::filesystem::path& path, const AugmentationSet& augs,
                         const json& meta) {
    std::ostringstream out;
    out << json{{"meta", meta}}.dump() << '\n';
    for (const auto& aug : augs) out << augmentation_to_json(aug).dump() << '\n';
    util::write_file_atomic(path, out.str());
}

AugmentationSet read_augmentations(const std::filesystem::path& path) {
    std::istringstream in(util::read_file(path));
    AugmentationSet augs;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (util::trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail(Errc::MalformedExample,
                 path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (j.is_object() && j.contains("meta") && !j.contains("source_example_id")) {
            continue; // header line
        }
        augs.push_back(augmentation_from_json(j));
    }
    return augs;
}

ExampleSet merge_training_set(const ExampleSet& originals, const AugmentationSet& augs) {
    ExampleSet merged;
    for (const auto& ex : originals.items()) merged.add(ex);
    size_t counter = 0;
    for (const auto& aug : augs) {
        if (aug.status != AugmentStatus::Accepted) continue;
        const Example* src = originals.find(aug.source_example_id);
        if (!src) {
            fail(Errc::UnknownDbId, "augmentation source not found: " + aug.source_example_id);
        }
        Example ex;
        ex.id = "aug:" + std::to_string(counter++);
        ex.db_id = src->db_id;
        ex.question = aug.text;
        ex.gold_sql = src->gold_sql;
        ex.source_tag = instruction_tag(aug.kind);
        merged.add(std::move(ex));
    }
    return merged;
}

} // namespace t2s
