#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "voir/feedback.hpp"
#include "voir/model.hpp"

namespace voir {

struct ClusteringConfig {
    std::optional<std::size_t> k;  // nullopt = auto: max(1, round(sqrt(n / 2)))
    std::size_t max_iterations = 100;
    std::uint64_t rng_seed = 0;
    double convergence_epsilon = 1e-9;
};

struct KMeansResult {
    std::vector<std::size_t> assignment;  // cluster index per input point
    std::vector<FeatureVector> centroids;
    std::size_t iterations = 0;
};

std::size_t auto_cluster_count(std::size_t n);

// Lloyd's k-means. Initial centres by farthest-point traversal from the
// lexicographically smallest point; `rng_seed` only orders exact ties.
// Empty clusters are reseeded with the point farthest from its centroid.
KMeansResult kmeans(std::span<const FeatureVector> points, const ClusteringConfig& config);

// Clusters every region of the catalog into visual categories (ids 1..k in
// cluster order) and remaps evidence-ledger rows onto the new categories by
// maximum member overlap. Unmatched ledger rows are dropped.
std::vector<VisualCategory> cluster_regions(Catalog& catalog, const ClusteringConfig& config);

struct PropagationResult {
    std::vector<Association> upserts;
    std::vector<RegionId> removed;
};

// Learned d_conf = round(100 * P / (P + N + 1)) with P = 2 * manual + pos, N = neg,
// applied to every member region without a manual association to the term.
int learned_confidence(const EvidenceRow& row);

Association set_manual_association(Catalog& catalog, TermId term, RegionId region);
EvidenceRow record_feedback_evidence(Catalog& catalog, TermId term, RegionId region, Polarity polarity);
PropagationResult propagate_associations(Catalog& catalog, TermId term, CategoryId category);

struct UpdateSummary {
    std::size_t events = 0;
    std::vector<EvidenceKey> touched;
    std::size_t upserts = 0;
    std::size_t removals = 0;
};

// Replays judgments into the ledger, then propagates every touched
// (term, category) row. A no-op for an empty delta.
UpdateSummary periodic_update(Catalog& catalog, std::span<const ResolvedJudgment> judgments);

std::size_t count_confident_associations(const Catalog& catalog, int min_conf = kDefaultMinConfidence);

}  // namespace voir
