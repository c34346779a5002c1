#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "voir/model.hpp"
#include "voir/similarity.hpp"

namespace voir {

struct RocchioParams {
    double beta = 0.75;
    double gamma = 0.25;

    void validate() const;
    bool operator==(const RocchioParams&) const = default;
};

inline constexpr double kDefaultExpansionThreshold = 1.0;
inline constexpr double kWeightFloor = 1e-4;

enum class Granularity { image, region };

struct FeedbackJudgment {
    std::variant<ImageId, RegionId> target;
    Polarity polarity = Polarity::relevant;

    Granularity granularity() const {
        return std::holds_alternative<ImageId>(target) ? Granularity::image : Granularity::region;
    }
    bool operator==(const FeedbackJudgment&) const = default;
};

// A judgment after image-level targets are mapped onto regions; this is what
// the learning loop consumes.
struct ResolvedJudgment {
    TermId term_id;
    RegionId region_id;
    Polarity polarity = Polarity::relevant;

    bool operator==(const ResolvedJudgment&) const = default;
};

struct SessionState {
    std::uint64_t session_id = 0;
    Mode mode = Mode::voir3;
    std::vector<ConceptQuery> concepts;
    InterWeights inter;
    std::uint64_t iteration = 0;
    std::vector<std::vector<FeedbackJudgment>> judgment_history;
    std::vector<ResolvedJudgment> evidence;
    double expansion_threshold = kDefaultExpansionThreshold;
    RocchioParams rocchio;

    bool operator==(const SessionState&) const = default;
};

struct ConceptSeed {
    TermId term_id;
    RegionId example_region_id;
};

// Throws mode_violation unless `mode` accepts judgments of `granularity`:
// VOIR-1 none, VOIR-2 image-level, VOIR-3 region-level.
void check_mode_permits(Mode mode, Granularity granularity);
bool mode_permits(Mode mode, Granularity granularity);

// Each seed region must already be associated with its term.
SessionState open_session(const Catalog& catalog, std::uint64_t session_id, Mode mode, std::span<const ConceptSeed> seeds,
                          RocchioParams rocchio = {}, double expansion_threshold = kDefaultExpansionThreshold);

// Q' = Q + beta * mean(relevant) - gamma * mean(nonrelevant), clamped to [0,1].
FeatureVector rocchio_update(std::span<const double> query, std::span<const FeatureVector> relevant,
                             std::span<const FeatureVector> nonrelevant, const RocchioParams& params);

// w_j proportional to 1 / max(sigma_j, 1e-4), normalized per block;
// sigma is the population standard deviation of the good examples.
IntraWeights reweight_intra(const FeatureSchema& schema, std::span<const FeatureVector> good_examples);

// W_i' = max(W_i (1 + delta_i), 1e-4), renormalized.
InterWeights reweight_inter(const InterWeights& current, std::span<const double> discrimination);

// True iff D_ji / D_jk > thr, where D_ji = |f_j - f_i| and D_jk is the
// smallest distance from f_j to the competing set. Empty competing set gives
// false; D_jk = 0 gives true when D_ji > 0 and false otherwise.
bool should_expand(std::span<const double> evaluated, std::span<const double> candidate,
                   std::span<const FeatureVector> competing, double threshold);

SessionState apply_feedback(const Catalog& catalog, const SessionState& session,
                            std::span<const FeedbackJudgment> judgments);

// Current results for the session (rank over its concept queries).
std::vector<RankedResult> session_results(const Catalog& catalog, const SessionState& session, std::size_t top_k);

}  // namespace voir
