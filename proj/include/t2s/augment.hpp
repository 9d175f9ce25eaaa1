#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "t2s/corpus.hpp"
#include "t2s/provider.hpp"

namespace t2s {

enum class InstructionKind {
    Simplify,
    HideDetails,
    Synonyms,
    Substitutions,
    ExpressDifferently,
    FromExamples,
    Paraphrase,
};

inline constexpr std::array<InstructionKind, 7> kAllInstructionKinds = {
    InstructionKind::Simplify,       InstructionKind::HideDetails,
    InstructionKind::Synonyms,       InstructionKind::Substitutions,
    InstructionKind::ExpressDifferently, InstructionKind::FromExamples,
    InstructionKind::Paraphrase,
};

// Tag strings: simplify, hide-details, synonyms, substitutions,
// express-differently, from-examples, paraphrase.
const char* instruction_tag(InstructionKind kind);
std::optional<InstructionKind> instruction_from_tag(const std::string& tag);

// The raw instruction template with a literal {Q} substitution slot.
const std::string& prompt_template(InstructionKind kind);

// Template with the question substituted; byte-exact to the templates.
std::string render_prompt(InstructionKind kind, const std::string& question);

enum class AugmentStatus {
    Pending,
    Accepted,
    RejectedDuplicate,
    RejectedSimilarity,
    RejectedParse,
};

const char* augment_status_name(AugmentStatus s);
std::optional<AugmentStatus> augment_status_from_name(const std::string& s);

struct Augmentation {
    std::string source_example_id;
    InstructionKind kind = InstructionKind::Simplify;
    std::string text;
    std::string raw_response;
    std::optional<double> similarity;
    AugmentStatus status = AugmentStatus::Pending;
};

using AugmentationSet = std::vector<Augmentation>;

struct GenerationPlan {
    size_t group_index = 0;
    std::vector<InstructionKind> kinds; // distinct, sampled order
    std::string seed_question;
    std::uint64_t rng_seed = 0;
};

// Splitmix64-based deterministic RNG; stable across platforms so seeded runs
// stay byte-identical everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    // Uniform in [0, n); n >= 1.
    std::uint64_t below(std::uint64_t n);

private:
    std::uint64_t state_;
};

// Samples k distinct kinds uniformly without replacement.
GenerationPlan plan_kinds(const IntentGroup& group, const ExampleSet& examples, int k, Rng& rng,
                          std::uint64_t run_seed);

// Strips whitespace/quotes; splits list answers for ExpressDifferently;
// drops candidates shorter than 3 characters. Throws EmptyGeneration when
// nothing survives.
std::vector<std::string> parse_generation(InstructionKind kind, const std::string& raw);

// Lowercases, collapses whitespace, strips terminal {. ? !} runs.
std::string normalize_text(const std::string& q);

struct AugmentOptions {
    int per_intent = 2;         // k
    std::uint64_t rng_seed = 0;
    int backoff_base_ms = 250;  // retry backoff base (tests shrink this)
    // Optional incremental persistence: lines are appended per finished group
    // and a checkpoint is kept so interrupted runs can resume.
    std::filesystem::path partial_path;
    std::filesystem::path checkpoint_path;
    std::string config_hash;
    size_t resume_groups_done = 0;
};

// One provider request per (group, planned kind). A candidate is accepted
// iff its normalized text differs from every member question of the group
// and every earlier accepted candidate of the group.
AugmentationSet augment_corpus(const ExampleSet& examples, TextGenProvider& provider,
                               const ProviderConfig& cfg, const AugmentOptions& opts);

nlohmann::json augmentation_to_json(const Augmentation& aug);
Augmentation augmentation_from_json(const nlohmann::json& j);

// JSON-lines with a {"meta": ...} header line.
void write_augmentations(const std::filesystem::path& path, const AugmentationSet& augs,
                         const nlohmann::json& meta);
AugmentationSet read_augmentations(const std::filesystem::path& path);

// Originals plus accepted augmentations in the example interchange format.
ExampleSet merge_training_set(const ExampleSet& originals, const AugmentationSet& augs);

} // namespace t2s
