#include "t2s/simfilter.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

#include "t2s/error.hpp"

namespace t2s {

double cosine(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        fail(Errc::DimensionMismatch,
             std::to_string(u.size()) + " vs " + std::to_string(v.size()));
    }
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) fail(Errc::ZeroVector, "cosine of an all-zero vector");
    double sim = dot / (std::sqrt(nu) * std::sqrt(nv));
    return std::clamp(sim, -1.0, 1.0);
}

void score_augmentations(AugmentationSet& augs, const ExampleSet& examples,
                         EmbeddingProvider& provider, const FilterConfig& cfg) {
    if (cfg.batch_size < 1) fail(Errc::Usage, "batch size must be >= 1");

    std::vector<size_t> pending;
    for (size_t i = 0; i < augs.size(); ++i) {
        const auto& aug = augs[i];
        if (aug.status != AugmentStatus::Accepted && aug.status != AugmentStatus::Pending) {
            continue;
        }
        if (!examples.find(aug.source_example_id)) {
            fail(Errc::UnknownDbId, "augmentation source not found: " + aug.source_example_id);
        }
        pending.push_back(i);
    }
    if (pending.empty()) return;

    size_t batches = 0, failed_batches = 0;
    // Each item contributes an (original, generated) text pair.
    size_t pairs_per_batch = std::max<size_t>(1, static_cast<size_t>(cfg.batch_size) / 2);
    for (size_t start = 0; start < pending.size(); start += pairs_per_batch) {
        size_t end = std::min(pending.size(), start + pairs_per_batch);
        std::vector<std::string> texts;
        texts.reserve((end - start) * 2);
        for (size_t p = start; p < end; ++p) {
            const auto& aug = augs[pending[p]];
            texts.push_back(examples.find(aug.source_example_id)->question);
            texts.push_back(aug.text);
        }
        ++batches;
        std::vector<std::vector<double>> vecs;
        try {
            vecs = provider.embed(texts);
            if (vecs.size() != texts.size()) {
                throw ProviderError("embedding count mismatch", false);
            }
        } catch (const std::exception& e) {
            ++failed_batches;
            std::cerr << "warning: embedding batch failed, items left unscored: " << e.what()
                      << "\n";
            for (size_t p = start; p < end; ++p) {
                augs[pending[p]].similarity.reset();
                augs[pending[p]].status = AugmentStatus::Pending;
            }
            continue;
        }
        for (size_t p = start; p < end; ++p) {
            const auto& orig = vecs[(p - start) * 2];
            const auto& gen = vecs[(p - start) * 2 + 1];
            augs[pending[p]].similarity = cosine(orig, gen);
        }
    }
    if (batches > 0 && failed_batches == batches) {
        fail(Errc::ProviderUnavailable, provider.name() + ": every embedding batch failed");
    }
}

void filter_by_threshold(AugmentationSet& augs, double threshold) {
    for (auto& aug : augs) {
        if (aug.status != AugmentStatus::Accepted && aug.status != AugmentStatus::Pending) {
            continue;
        }
        if (!aug.similarity) {
            fail(Errc::UnscoredAugmentation,
                 "unscored augmentation from " + aug.source_example_id);
        }
        aug.status = (*aug.similarity >= threshold) ? AugmentStatus::Accepted
                                                    : AugmentStatus::RejectedSimilarity;
    }
}

SimilarityStats similarity_stats(const AugmentationSet& augs) {
    SimilarityStats stats;
    double sum = 0.0;
    for (const auto& aug : augs) {
        if (aug.status != AugmentStatus::Accepted &&
            aug.status != AugmentStatus::RejectedSimilarity) {
            continue;
        }
        if (!aug.similarity) {
            fail(Errc::UnscoredAugmentation,
                 "unscored augmentation from " + aug.source_example_id);
        }
        double s = *aug.similarity;
        if (stats.count == 0) {
            stats.min = stats.max = s;
        } else {
            stats.min = std::min(stats.min, s);
            stats.max = std::max(stats.max, s);
        }
        sum += s;
        // Scores land in [i/20, (i+1)/20); out-of-range values clamp to the
        // end bins so the histogram always sums to count.
        int bin = static_cast<int>(std::floor(s * 20.0));
        bin = std::clamp(bin, 0, 19);
        ++stats.histogram[static_cast<size_t>(bin)];
        ++stats.count;
    }
    if (stats.count == 0) fail(Errc::EmptySet, "no scored augmentations");
    stats.mean = sum / static_cast<double>(stats.count);
    return stats;
}

nlohmann::json stats_to_json(const SimilarityStats& stats) {
    nlohmann::json bins = nlohmann::json::array();
    for (size_t i = 0; i < stats.histogram.size(); ++i) {
        bins.push_back(nlohmann::json{{"lo", i / 20.0},
                                      {"hi", (i + 1) / 20.0},
                                      {"count", stats.histogram[i]}});
    }
    return nlohmann::json{{"count", stats.count},
                          {"mean", stats.mean},
                          {"min", stats.min},
                          {"max", stats.max},
                          {"histogram", bins}};
}

std::string render_histogram(const SimilarityStats& stats) {
    size_t peak = *std::max_element(stats.histogram.begin(), stats.histogram.end());
    std::ostringstream out;
    char header[128];
    std::snprintf(header, sizeof(header), "count=%zu mean=%.4f min=%.4f max=%.4f\n",
                  stats.count, stats.mean, stats.min, stats.max);
    out << header;
    for (size_t i = 0; i < stats.histogram.size(); ++i) {
        size_t n = stats.histogram[i];
        size_t width = peak == 0 ? 0 : (n * 50 + peak - 1) / peak;
        char label[32];
        std::snprintf(label, sizeof(label), "[%.2f,%.2f)", i / 20.0, (i + 1) / 20.0);
        out << label << ' ' << std::string(width, '#') << ' ' << n << '\n';
    }
    return out.str();
}

} // namespace t2s
