#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "t2s/augment.hpp"
#include "t2s/corpus.hpp"
#include "t2s/provider.hpp"

namespace t2s {

struct FilterConfig {
    double threshold = 0.5;
    EmbeddingConfig embedding;
    int batch_size = 64;
};

struct SimilarityStats {
    size_t count = 0;
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
    std::array<size_t, 20> histogram{}; // equal-width bins over [0, 1]
};

// <u,v> / (|u||v|). Throws DimensionMismatch / ZeroVector.
double cosine(std::span<const double> u, std::span<const double> v);

// Scores accepted/pending augmentations against their source questions.
// Batch failures leave items unscored (status pending) with a warning; if
// every batch fails the run aborts with ProviderUnavailable.
void score_augmentations(AugmentationSet& augs, const ExampleSet& examples,
                         EmbeddingProvider& provider, const FilterConfig& cfg);

// Accepted/pending items with similarity >= t stay accepted, below become
// rejected_similarity. Nothing is deleted. Unscored items are an error.
void filter_by_threshold(AugmentationSet& augs, double threshold);

// Over accepted + rejected_similarity items.
SimilarityStats similarity_stats(const AugmentationSet& augs);

nlohmann::json stats_to_json(const SimilarityStats& stats);
std::string render_histogram(const SimilarityStats& stats);

} // namespace t2s
