#include "voir/similarity.hpp"

#include <algorithm>
#include <cmath>

#include "voir/error.hpp"

namespace voir {

namespace {

constexpr double kSumTolerance = 1e-9;

void check_conforming(const FeatureSchema& schema, std::span<const double> v) {
    if (v.size() != schema.total_dimension()) fail(ErrorCode::schema_mismatch, "vector does not conform to the feature schema");
}

}  // namespace

IntraWeights IntraWeights::uniform(const FeatureSchema& schema) {
    IntraWeights w;
    w.values.reserve(schema.total_dimension());
    for (const auto& block : schema.blocks) {
        w.values.insert(w.values.end(), block.dimension, 1.0 / static_cast<double>(block.dimension));
    }
    return w;
}

void IntraWeights::validate(const FeatureSchema& schema) const {
    if (values.size() != schema.total_dimension()) fail(ErrorCode::schema_mismatch, "intra weights do not match the schema");
    std::size_t offset = 0;
    for (const auto& block : schema.blocks) {
        double sum = 0.0;
        for (std::size_t j = offset; j < offset + block.dimension; ++j) {
            if (!(values[j] >= 0.0) || !std::isfinite(values[j])) fail(ErrorCode::invalid_argument, "negative intra weight");
            sum += values[j];
        }
        if (std::abs(sum - 1.0) > kSumTolerance) fail(ErrorCode::invalid_argument, "intra weights of a block must sum to 1");
        offset += block.dimension;
    }
}

InterWeights InterWeights::uniform(const FeatureSchema& schema) {
    return InterWeights{std::vector<double>(schema.block_count(), 1.0 / static_cast<double>(schema.block_count()))};
}

void InterWeights::validate(const FeatureSchema& schema) const {
    if (values.size() != schema.block_count()) fail(ErrorCode::schema_mismatch, "inter weights do not match the block count");
    double sum = 0.0;
    for (double w : values) {
        if (!(w >= 0.0) || !std::isfinite(w)) fail(ErrorCode::invalid_argument, "negative inter weight");
        sum += w;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) fail(ErrorCode::invalid_argument, "inter weights must sum to 1");
}

double block_distance(const FeatureSchema& schema, std::span<const double> a, std::span<const double> b,
                      const IntraWeights& intra, std::size_t block) {
    check_conforming(schema, a);
    check_conforming(schema, b);
    if (intra.values.size() != a.size()) fail(ErrorCode::schema_mismatch, "intra weights do not match the schema");
    if (block >= schema.block_count()) fail(ErrorCode::schema_mismatch, "block index out of range");
    const std::size_t begin = schema.block_offset(block);
    const std::size_t end = begin + schema.blocks[block].dimension;
    double sum = 0.0;
    for (std::size_t j = begin; j < end; ++j) {
        const double diff = a[j] - b[j];
        sum += intra.values[j] * diff * diff;
    }
    return std::sqrt(sum);
}

std::vector<double> block_similarities(const FeatureSchema& schema, const QueryPoint& q, std::span<const double> features) {
    std::vector<double> out(schema.block_count());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = 1.0 / (1.0 + block_distance(schema, q.point, features, q.intra, i));
    }
    return out;
}

double point_score(const FeatureSchema& schema, const QueryPoint& q, std::span<const double> features,
                   const InterWeights& inter) {
    if (inter.values.size() != schema.block_count()) fail(ErrorCode::schema_mismatch, "inter weights do not match the block count");
    const auto sims = block_similarities(schema, q, features);
    double score = 0.0;
    for (std::size_t i = 0; i < sims.size(); ++i) score += inter.values[i] * sims[i];
    return score;
}

double multipoint_score(const FeatureSchema& schema, std::span<const QueryPoint> points, std::span<const double> features,
                        const InterWeights& inter) {
    if (points.empty()) fail(ErrorCode::invalid_query, "concept has no query points");
    double best = point_score(schema, points.front(), features, inter);
    for (std::size_t p = 1; p < points.size(); ++p) best = std::max(best, point_score(schema, points[p], features, inter));
    return best;
}

BestRegion best_region(const Catalog& catalog, ImageId image, const ConceptQuery& concept_query, const InterWeights& inter) {
    const ImageRecord& record = catalog.image(image);
    BestRegion best{RegionId{}, -1.0};
    for (RegionId rid : record.region_ids) {
        const double s = multipoint_score(catalog.schema(), concept_query.points, catalog.region(rid).features, inter);
        if (s > best.score || (s == best.score && rid < best.region_id)) best = {rid, s};
    }
    return best;
}

std::vector<RankedResult> rank(const Catalog& catalog, std::span<const ConceptQuery> query, const InterWeights& inter,
                               std::size_t top_k, Mode mode) {
    if (query.empty()) fail(ErrorCode::invalid_query, "query has no concepts");
    if (top_k == 0) fail(ErrorCode::invalid_query, "top_k must be at least 1");
    for (const auto& c : query) {
        if (c.points.empty()) fail(ErrorCode::invalid_query, "concept has no query points");
    }
    inter.validate(catalog.schema());

    std::vector<RankedResult> results;
    results.reserve(catalog.images().size());
    for (const auto& [image_id, record] : catalog.images()) {
        RankedResult result{image_id, 0.0, {}};
        double total = 0.0;
        for (const auto& c : query) {
            ConceptMatch match{c.term_id, -1.0, std::nullopt, {}};
            RegionId best_id{};
            for (RegionId rid : record.region_ids) {
                const double s = multipoint_score(catalog.schema(), c.points, catalog.region(rid).features, inter);
                match.region_scores.emplace_back(rid, s);
                if (s > match.best_score || (s == match.best_score && rid < best_id)) {
                    match.best_score = s;
                    best_id = rid;
                }
            }
            if (mode == Mode::voir3) match.best_region_id = best_id;
            total += match.best_score;
            result.concepts.push_back(std::move(match));
        }
        result.image_score = total / static_cast<double>(query.size());
        results.push_back(std::move(result));
    }
    std::sort(results.begin(), results.end(), [](const RankedResult& a, const RankedResult& b) {
        if (a.image_score != b.image_score) return a.image_score > b.image_score;
        return a.image_id < b.image_id;
    });
    if (results.size() > top_k) results.resize(top_k);
    return results;
}

double full_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) fail(ErrorCode::schema_mismatch, "vectors differ in dimension");
    double sum = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double diff = a[j] - b[j];
        sum += diff * diff;
    }
    return std::sqrt(sum);
}

}  // namespace voir
