#include "voir/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "voir/error.hpp"
#include "voir/similarity.hpp"

namespace voir {

std::size_t auto_cluster_count(std::size_t n) {
    const double k = std::round(std::sqrt(static_cast<double>(n) / 2.0));
    return std::max<std::size_t>(1, static_cast<std::size_t>(k));
}

namespace {

double squared_distance(const FeatureVector& a, const FeatureVector& b) {
    double sum = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) sum += (a[j] - b[j]) * (a[j] - b[j]);
    return sum;
}

std::vector<FeatureVector> means(std::span<const FeatureVector> points, const std::vector<std::size_t>& assignment,
                                 std::size_t k) {
    const std::size_t dim = points.front().size();
    std::vector<FeatureVector> out(k, FeatureVector(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = 0; j < dim; ++j) out[assignment[i]][j] += points[i][j];
        ++counts[assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;
        for (double& v : out[c]) v /= static_cast<double>(counts[c]);
    }
    return out;
}

}  // namespace

KMeansResult kmeans(std::span<const FeatureVector> points, const ClusteringConfig& config) {
    const std::size_t n = points.size();
    if (n == 0) fail(ErrorCode::invalid_config, "clustering needs at least one point");
    const std::size_t k = config.k.value_or(auto_cluster_count(n));
    if (k == 0 || k > n) fail(ErrorCode::invalid_config, "k must lie in [1, number of regions]");
    if (config.max_iterations == 0) fail(ErrorCode::invalid_config, "max_iterations must be positive");
    const std::size_t dim = points.front().size();
    for (const auto& p : points) {
        if (p.size() != dim) fail(ErrorCode::schema_mismatch, "clustering input vectors differ in dimension");
    }

    // Seeded priority used only to break exact ties between candidates.
    std::vector<std::size_t> priority(n);
    std::iota(priority.begin(), priority.end(), 0);
    std::mt19937_64 rng(config.rng_seed);
    std::shuffle(priority.begin(), priority.end(), rng);
    auto prefer = [&](std::size_t a, std::size_t b) { return priority[a] < priority[b]; };

    std::size_t first = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (points[i] < points[first] || (points[i] == points[first] && prefer(i, first))) first = i;
    }
    std::vector<FeatureVector> centroids{points[first]};
    std::vector<double> nearest(n);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = squared_distance(points[i], centroids[0]);
    std::vector<bool> chosen(n, false);
    chosen[first] = true;
    while (centroids.size() < k) {
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (chosen[i]) continue;
            if (pick == n || nearest[i] > nearest[pick] || (nearest[i] == nearest[pick] && prefer(i, pick))) pick = i;
        }
        chosen[pick] = true;
        centroids.push_back(points[pick]);
        for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], squared_distance(points[i], centroids.back()));
    }

    KMeansResult result;
    result.assignment.assign(n, 0);
    for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
        result.iterations = iter + 1;
        std::vector<double> own(n);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = squared_distance(points[i], centroids[0]);
            for (std::size_t c = 1; c < k; ++c) {
                const double d = squared_distance(points[i], centroids[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            result.assignment[i] = best;
            own[i] = best_d;
            ++counts[best];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[result.assignment[i]] < 2) continue;
                if (far == n || own[i] > own[far] || (own[i] == own[far] && prefer(i, far))) far = i;
            }
            --counts[result.assignment[far]];
            result.assignment[far] = c;
            own[far] = 0.0;
            counts[c] = 1;
        }
        std::vector<FeatureVector> updated = means(points, result.assignment, k);
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) shift = std::max(shift, std::sqrt(squared_distance(updated[c], centroids[c])));
        centroids = std::move(updated);
        if (shift < config.convergence_epsilon) break;
    }
    result.centroids = std::move(centroids);
    return result;
}

std::vector<VisualCategory> cluster_regions(Catalog& catalog, const ClusteringConfig& config) {
    std::vector<RegionId> ids;
    std::vector<FeatureVector> vectors;
    for (const auto& [id, region] : catalog.regions()) {
        ids.push_back(id);
        vectors.push_back(region.features);
    }
    if (ids.empty()) fail(ErrorCode::invalid_config, "no regions to cluster");
    const KMeansResult result = kmeans(vectors, config);
    const std::size_t k = result.centroids.size();

    std::vector<VisualCategory> categories(k);
    for (std::size_t c = 0; c < k; ++c) categories[c].id = CategoryId{c + 1};
    for (std::size_t i = 0; i < ids.size(); ++i) categories[result.assignment[i]].member_region_ids.push_back(ids[i]);
    // Centroids are recomputed from the final membership.
    for (auto& category : categories) {
        FeatureVector centroid(vectors.front().size(), 0.0);
        for (RegionId member : category.member_region_ids) {
            const auto& f = catalog.region(member).features;
            for (std::size_t j = 0; j < centroid.size(); ++j) centroid[j] += f[j];
        }
        for (double& v : centroid) v /= static_cast<double>(category.member_region_ids.size());
        category.centroid = std::move(centroid);
    }

    // Remap ledger rows by greedy maximum-overlap matching old -> new.
    std::map<std::pair<CategoryId, CategoryId>, std::size_t> overlap;
    for (const auto& category : categories) {
        for (RegionId member : category.member_region_ids) {
            const auto& old = catalog.region(member).category_id;
            if (old) ++overlap[{*old, category.id}];
        }
    }
    std::vector<std::tuple<std::size_t, CategoryId, CategoryId>> candidates;
    for (const auto& [pair, count] : overlap) candidates.emplace_back(count, pair.first, pair.second);
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
        if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
        return std::get<2>(a) < std::get<2>(b);
    });
    std::map<CategoryId, CategoryId> remap;
    std::set<CategoryId> taken;
    for (const auto& [count, old_id, new_id] : candidates) {
        if (remap.count(old_id) || taken.count(new_id)) continue;
        remap.emplace(old_id, new_id);
        taken.insert(new_id);
    }
    EvidenceLedger remapped;
    for (const auto& [key, row] : catalog.ledger()) {
        auto it = remap.find(key.second);
        if (it != remap.end()) remapped[{key.first, it->second}] = row;
    }

    catalog.set_categories(categories);
    catalog.ledger() = std::move(remapped);
    return categories;
}

int learned_confidence(const EvidenceRow& row) {
    const double p = 2.0 * static_cast<double>(row.manual_count) + static_cast<double>(row.pos_events);
    const double n = static_cast<double>(row.neg_events);
    return static_cast<int>(std::lround(100.0 * p / (p + n + 1.0)));
}

Association set_manual_association(Catalog& catalog, TermId term, RegionId region) {
    catalog.term(term);
    const Region& target = catalog.region(region);
    if (const Association* existing = catalog.find_association(term, region); existing && existing->origin == Origin::manual) {
        fail(ErrorCode::conflict, "manual association already exists for this term and region");
    }
    Association manual{term, region, kManualConfidence, Origin::manual, 0, 0};
    if (const Association* existing = catalog.find_association(term, region)) {
        manual.pos_events = existing->pos_events;
        manual.neg_events = existing->neg_events;
    }
    catalog.upsert_association(manual);
    if (target.category_id) {
        ++catalog.ledger()[{term, *target.category_id}].manual_count;
        propagate_associations(catalog, term, *target.category_id);
    }
    return manual;
}

EvidenceRow record_feedback_evidence(Catalog& catalog, TermId term, RegionId region, Polarity polarity) {
    catalog.term(term);
    const Region& target = catalog.region(region);
    if (!target.category_id) fail(ErrorCode::precondition, "region " + std::to_string(region.value) + " is not clustered");
    EvidenceRow& row = catalog.ledger()[{term, *target.category_id}];
    ++(polarity == Polarity::relevant ? row.pos_events : row.neg_events);
    return row;
}

PropagationResult propagate_associations(Catalog& catalog, TermId term, CategoryId category) {
    auto row_it = catalog.ledger().find({term, category});
    if (row_it == catalog.ledger().end()) fail(ErrorCode::not_found, "no evidence recorded for this term and category");
    const EvidenceRow row = row_it->second;
    const int d_conf = learned_confidence(row);

    PropagationResult result;
    for (RegionId member : catalog.category(category).member_region_ids) {
        const Association* existing = catalog.find_association(term, member);
        if (existing && existing->origin == Origin::manual) continue;
        if (d_conf == 0) {
            if (catalog.remove_association(term, member)) result.removed.push_back(member);
            continue;
        }
        Association learned{term, member, d_conf, Origin::learned, row.pos_events, row.neg_events};
        catalog.upsert_association(learned);
        result.upserts.push_back(learned);
    }
    return result;
}

UpdateSummary periodic_update(Catalog& catalog, std::span<const ResolvedJudgment> judgments) {
    UpdateSummary summary;
    std::set<EvidenceKey> touched;
    for (const auto& judgment : judgments) {
        record_feedback_evidence(catalog, judgment.term_id, judgment.region_id, judgment.polarity);
        touched.insert({judgment.term_id, *catalog.region(judgment.region_id).category_id});
        ++summary.events;
    }
    for (const auto& key : touched) {
        const PropagationResult result = propagate_associations(catalog, key.first, key.second);
        summary.upserts += result.upserts.size();
        summary.removals += result.removed.size();
    }
    summary.touched.assign(touched.begin(), touched.end());
    return summary;
}

std::size_t count_confident_associations(const Catalog& catalog, int min_conf) {
    return static_cast<std::size_t>(std::count_if(catalog.associations().begin(), catalog.associations().end(),
                                                  [&](const auto& entry) { return entry.second.d_conf >= min_conf; }));
}

}  // namespace voir
