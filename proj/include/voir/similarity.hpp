#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "voir/model.hpp"

namespace voir {

// Per-component weights; within each block they sum to 1.
struct IntraWeights {
    std::vector<double> values;

    static IntraWeights uniform(const FeatureSchema& schema);
    void validate(const FeatureSchema& schema) const;

    bool operator==(const IntraWeights&) const = default;
};

// One weight per feature block, summing to 1.
struct InterWeights {
    std::vector<double> values;

    static InterWeights uniform(const FeatureSchema& schema);
    void validate(const FeatureSchema& schema) const;

    bool operator==(const InterWeights&) const = default;
};

struct QueryPoint {
    FeatureVector point;
    IntraWeights intra;
    TermId concept_term_id;
    std::optional<CategoryId> source_category_id;
    // Every relevant vector ever assigned to this point in the session.
    std::vector<FeatureVector> relevant_seen;

    bool operator==(const QueryPoint&) const = default;
};

struct ConceptQuery {
    TermId term_id;
    std::vector<QueryPoint> points;

    bool operator==(const ConceptQuery&) const = default;
};

struct ConceptMatch {
    TermId term_id;
    double best_score = 0.0;
    // Only populated for VOIR-3.
    std::optional<RegionId> best_region_id;
    std::vector<std::pair<RegionId, double>> region_scores;
};

struct RankedResult {
    ImageId image_id;
    double image_score = 0.0;
    std::vector<ConceptMatch> concepts;
};

inline constexpr std::size_t kAllResults = std::numeric_limits<std::size_t>::max();

// sqrt(sum_j w_j (a_j - b_j)^2) over the components of `block`.
double block_distance(const FeatureSchema& schema, std::span<const double> a, std::span<const double> b,
                      const IntraWeights& intra, std::size_t block);

// Per-block similarities S_i = 1 / (1 + d_i).
std::vector<double> block_similarities(const FeatureSchema& schema, const QueryPoint& q, std::span<const double> features);

// S(q, o) = sum_i W_i S_i(q, o).
double point_score(const FeatureSchema& schema, const QueryPoint& q, std::span<const double> features,
                   const InterWeights& inter);

// Max of point_score over the concept's points.
double multipoint_score(const FeatureSchema& schema, std::span<const QueryPoint> points, std::span<const double> features,
                        const InterWeights& inter);

// Per image: best region per concept by multipoint score, image score the
// mean over concepts. Sorted by score descending, then image id ascending.
std::vector<RankedResult> rank(const Catalog& catalog, std::span<const ConceptQuery> query, const InterWeights& inter,
                               std::size_t top_k, Mode mode);

struct BestRegion {
    RegionId region_id;
    double score = 0.0;
};

// Highest-scoring region of `image` for one concept; ties go to the lower id.
BestRegion best_region(const Catalog& catalog, ImageId image, const ConceptQuery& concept_query, const InterWeights& inter);

// Unweighted Euclidean distance over the full vector.
double full_distance(std::span<const double> a, std::span<const double> b);

}  // namespace voir
