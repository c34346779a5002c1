#include "voir/feedback.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "voir/error.hpp"

namespace voir {

void RocchioParams::validate() const {
    if (!(beta > 0.0) || !std::isfinite(beta)) fail(ErrorCode::invalid_config, "rocchio beta must be positive and finite");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) fail(ErrorCode::invalid_config, "rocchio gamma must be non-negative and finite");
}

bool mode_permits(Mode mode, Granularity granularity) {
    switch (mode) {
        case Mode::voir1: return false;
        case Mode::voir2: return granularity == Granularity::image;
        case Mode::voir3: return granularity == Granularity::region;
    }
    return false;
}

void check_mode_permits(Mode mode, Granularity granularity) {
    if (mode == Mode::voir1) fail(ErrorCode::mode_violation, "voir1 sessions do not support relevance feedback");
    if (!mode_permits(mode, granularity)) {
        fail(ErrorCode::mode_violation, std::string(to_string(mode)) + " sessions do not accept " +
                                            (granularity == Granularity::image ? "image" : "region") + "-level feedback");
    }
}

SessionState open_session(const Catalog& catalog, std::uint64_t session_id, Mode mode, std::span<const ConceptSeed> seeds,
                          RocchioParams rocchio, double expansion_threshold) {
    rocchio.validate();
    if (!(expansion_threshold > 0.0)) fail(ErrorCode::invalid_config, "expansion threshold must be positive");
    if (seeds.empty()) fail(ErrorCode::invalid_query, "a query needs at least one concept");
    const FeatureSchema& schema = catalog.schema();

    SessionState session;
    session.session_id = session_id;
    session.mode = mode;
    session.inter = InterWeights::uniform(schema);
    session.expansion_threshold = expansion_threshold;
    session.rocchio = rocchio;
    std::set<TermId> seen;
    for (const auto& seed : seeds) {
        catalog.term(seed.term_id);
        const Region& example = catalog.region(seed.example_region_id);
        if (!seen.insert(seed.term_id).second) fail(ErrorCode::invalid_query, "concept listed twice in one query");
        const Association* link = catalog.find_association(seed.term_id, seed.example_region_id);
        if (!link || link->d_conf <= 0) {
            fail(ErrorCode::invalid_query, "example region " + std::to_string(seed.example_region_id.value) +
                                               " is not associated with term '" + catalog.term(seed.term_id).label + "'");
        }
        QueryPoint point{example.features, IntraWeights::uniform(schema), seed.term_id, example.category_id, {}};
        session.concepts.push_back(ConceptQuery{seed.term_id, {std::move(point)}});
    }
    return session;
}

FeatureVector rocchio_update(std::span<const double> query, std::span<const FeatureVector> relevant,
                             std::span<const FeatureVector> nonrelevant, const RocchioParams& params) {
    params.validate();
    const std::size_t dim = query.size();
    for (const auto& v : relevant) {
        if (v.size() != dim) fail(ErrorCode::schema_mismatch, "relevant vector does not conform to the query schema");
    }
    for (const auto& v : nonrelevant) {
        if (v.size() != dim) fail(ErrorCode::schema_mismatch, "non-relevant vector does not conform to the query schema");
    }
    FeatureVector next(query.begin(), query.end());
    if (!relevant.empty()) {
        const double n1 = static_cast<double>(relevant.size());
        for (std::size_t j = 0; j < dim; ++j) {
            double sum = 0.0;
            for (const auto& r : relevant) sum += r[j];
            next[j] += params.beta * (sum / n1);
        }
    }
    if (!nonrelevant.empty()) {
        const double n2 = static_cast<double>(nonrelevant.size());
        for (std::size_t j = 0; j < dim; ++j) {
            double sum = 0.0;
            for (const auto& s : nonrelevant) sum += s[j];
            next[j] -= params.gamma * (sum / n2);
        }
    }
    for (double& v : next) v = std::clamp(v, 0.0, 1.0);
    return next;
}

IntraWeights reweight_intra(const FeatureSchema& schema, std::span<const FeatureVector> good_examples) {
    if (good_examples.empty()) fail(ErrorCode::invalid_argument, "intra re-weighting needs at least one good example");
    const std::size_t dim = schema.total_dimension();
    for (const auto& v : good_examples) {
        if (v.size() != dim) fail(ErrorCode::schema_mismatch, "good example does not conform to the schema");
    }
    const double n = static_cast<double>(good_examples.size());
    IntraWeights weights;
    weights.values.resize(dim);
    std::size_t offset = 0;
    for (const auto& block : schema.blocks) {
        double block_sum = 0.0;
        for (std::size_t j = offset; j < offset + block.dimension; ++j) {
            double mean = 0.0;
            for (const auto& v : good_examples) mean += v[j];
            mean /= n;
            double var = 0.0;
            for (const auto& v : good_examples) var += (v[j] - mean) * (v[j] - mean);
            const double sigma = std::sqrt(var / n);
            weights.values[j] = 1.0 / std::max(sigma, kWeightFloor);
            block_sum += weights.values[j];
        }
        for (std::size_t j = offset; j < offset + block.dimension; ++j) weights.values[j] /= block_sum;
        offset += block.dimension;
    }
    return weights;
}

InterWeights reweight_inter(const InterWeights& current, std::span<const double> discrimination) {
    if (discrimination.size() != current.values.size()) {
        fail(ErrorCode::schema_mismatch, "one discrimination value per feature block is required");
    }
    for (double d : discrimination) {
        if (!(d >= -1.0 && d <= 1.0)) fail(ErrorCode::invalid_argument, "discrimination values must lie in [-1,1]");
    }
    if (std::all_of(discrimination.begin(), discrimination.end(), [](double d) { return d == 0.0; })) return current;
    InterWeights next;
    next.values.resize(current.values.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < next.values.size(); ++i) {
        next.values[i] = std::max(current.values[i] * (1.0 + discrimination[i]), kWeightFloor);
        sum += next.values[i];
    }
    for (double& w : next.values) w /= sum;
    return next;
}

bool should_expand(std::span<const double> evaluated, std::span<const double> candidate,
                   std::span<const FeatureVector> competing, double threshold) {
    if (!(threshold > 0.0)) fail(ErrorCode::invalid_config, "expansion threshold must be positive");
    if (competing.empty()) return false;
    const double d_ji = full_distance(evaluated, candidate);
    double d_jk = std::numeric_limits<double>::infinity();
    for (const auto& f : competing) d_jk = std::min(d_jk, full_distance(evaluated, f));
    if (d_jk == 0.0) return d_ji > 0.0;
    return d_ji / d_jk > threshold;
}

namespace {

std::size_t nearest_point(const ConceptQuery& concept_query, std::span<const double> v) {
    std::size_t best = 0;
    double best_distance = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < concept_query.points.size(); ++p) {
        const double d = full_distance(concept_query.points[p].point, v);
        if (d < best_distance) {
            best_distance = d;
            best = p;
        }
    }
    return best;
}

struct Resolved {
    std::size_t concept_index;
    RegionId region_id;
    Polarity polarity;
};

// Region-level judgments go to the concept they score highest under;
// image-level ones fan out to each concept's best-scored region.
std::vector<Resolved> resolve(const Catalog& catalog, const SessionState& session, std::span<const FeedbackJudgment> judgments) {
    std::vector<Resolved> out;
    for (const auto& judgment : judgments) {
        if (const auto* image = std::get_if<ImageId>(&judgment.target)) {
            for (std::size_t c = 0; c < session.concepts.size(); ++c) {
                const BestRegion best = best_region(catalog, *image, session.concepts[c], session.inter);
                out.push_back({c, best.region_id, judgment.polarity});
            }
        } else {
            const RegionId rid = std::get<RegionId>(judgment.target);
            const FeatureVector& v = catalog.region(rid).features;
            std::size_t best_concept = 0;
            double best_score = -1.0;
            for (std::size_t c = 0; c < session.concepts.size(); ++c) {
                const double s = multipoint_score(catalog.schema(), session.concepts[c].points, v, session.inter);
                if (s > best_score) {
                    best_score = s;
                    best_concept = c;
                }
            }
            out.push_back({best_concept, rid, judgment.polarity});
        }
    }
    return out;
}

}  // namespace

SessionState apply_feedback(const Catalog& catalog, const SessionState& session,
                            std::span<const FeedbackJudgment> judgments) {
    if (session.mode == Mode::voir1) fail(ErrorCode::mode_violation, "voir1 sessions do not support relevance feedback");
    std::set<std::pair<int, std::uint64_t>> targets;
    for (const auto& judgment : judgments) {
        check_mode_permits(session.mode, judgment.granularity());
        std::uint64_t raw = 0;
        if (const auto* image = std::get_if<ImageId>(&judgment.target)) {
            catalog.image(*image);
            raw = image->value;
        } else {
            raw = std::get<RegionId>(judgment.target).value;
            catalog.region(RegionId{raw});
        }
        if (!targets.insert({judgment.granularity() == Granularity::image ? 0 : 1, raw}).second) {
            fail(ErrorCode::invalid_argument, "target judged twice in one iteration");
        }
    }

    const FeatureSchema& schema = catalog.schema();
    SessionState next = session;
    const std::vector<Resolved> resolved = resolve(catalog, session, judgments);

    // Per concept, per point: judged vectors bucketed by nearest pre-update point.
    struct Buckets {
        std::vector<FeatureVector> relevant;
        std::vector<FeatureVector> nonrelevant;
    };
    std::vector<std::vector<Buckets>> buckets(session.concepts.size());
    for (std::size_t c = 0; c < session.concepts.size(); ++c) buckets[c].resize(session.concepts[c].points.size());
    std::vector<std::size_t> assigned(resolved.size());
    for (std::size_t r = 0; r < resolved.size(); ++r) {
        const auto& item = resolved[r];
        const FeatureVector& v = catalog.region(item.region_id).features;
        assigned[r] = nearest_point(session.concepts[item.concept_index], v);
        auto& bucket = buckets[item.concept_index][assigned[r]];
        (item.polarity == Polarity::relevant ? bucket.relevant : bucket.nonrelevant).push_back(v);
    }

    // Query-point movement and intra re-weighting.
    for (std::size_t c = 0; c < next.concepts.size(); ++c) {
        for (std::size_t p = 0; p < next.concepts[c].points.size(); ++p) {
            QueryPoint& point = next.concepts[c].points[p];
            const Buckets& bucket = buckets[c][p];
            if (bucket.relevant.empty() && bucket.nonrelevant.empty()) continue;
            point.point = rocchio_update(point.point, bucket.relevant, bucket.nonrelevant, session.rocchio);
            point.relevant_seen.insert(point.relevant_seen.end(), bucket.relevant.begin(), bucket.relevant.end());
            if (!point.relevant_seen.empty()) point.intra = reweight_intra(schema, point.relevant_seen);
        }
    }

    // Inter re-weighting pooled over every judgment, scored against the
    // pre-update point each judged vector was assigned to.
    if (!resolved.empty()) {
        const std::size_t blocks = schema.block_count();
        std::vector<double> rel_sum(blocks, 0.0), non_sum(blocks, 0.0);
        std::size_t rel_n = 0, non_n = 0;
        for (std::size_t r = 0; r < resolved.size(); ++r) {
            const auto& item = resolved[r];
            const QueryPoint& point = session.concepts[item.concept_index].points[assigned[r]];
            const auto sims = block_similarities(schema, point, catalog.region(item.region_id).features);
            auto& sum = item.polarity == Polarity::relevant ? rel_sum : non_sum;
            for (std::size_t i = 0; i < blocks; ++i) sum[i] += sims[i];
            ++(item.polarity == Polarity::relevant ? rel_n : non_n);
        }
        std::vector<double> delta(blocks, 0.0);
        for (std::size_t i = 0; i < blocks; ++i) {
            const double rel_mean = rel_n ? rel_sum[i] / static_cast<double>(rel_n) : 0.0;
            const double non_mean = non_n ? non_sum[i] / static_cast<double>(non_n) : 0.0;
            delta[i] = rel_mean - non_mean;
        }
        next.inter = reweight_inter(session.inter, delta);
    }

    // Query expansion: a relevant example outside the evaluated point's
    // visual category seeds a new query point for the concept.
    for (std::size_t r = 0; r < resolved.size(); ++r) {
        const auto& item = resolved[r];
        if (item.polarity != Polarity::relevant) continue;
        const Region& example = catalog.region(item.region_id);
        const QueryPoint& evaluated = session.concepts[item.concept_index].points[assigned[r]];
        std::vector<FeatureVector> competing;
        for (const auto& [cid, category] : catalog.categories()) {
            if (example.category_id && cid == *example.category_id) continue;
            for (RegionId member : category.member_region_ids) competing.push_back(catalog.region(member).features);
        }
        if (should_expand(evaluated.point, example.features, competing, session.expansion_threshold)) {
            auto& concept_query = next.concepts[item.concept_index];
            concept_query.points.push_back(
                QueryPoint{example.features, IntraWeights::uniform(schema), concept_query.term_id, example.category_id, {}});
        }
    }

    ++next.iteration;
    next.judgment_history.emplace_back(judgments.begin(), judgments.end());
    for (const auto& item : resolved) {
        next.evidence.push_back({session.concepts[item.concept_index].term_id, item.region_id, item.polarity});
    }
    return next;
}

std::vector<RankedResult> session_results(const Catalog& catalog, const SessionState& session, std::size_t top_k) {
    return rank(catalog, session.concepts, session.inter, top_k, session.mode);
}

}  // namespace voir
