#include "voir/benchmark.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "voir/error.hpp"
#include "voir/features.hpp"
#include "voir/learning.hpp"

namespace voir {

std::vector<std::string> benchmark_terms(std::size_t concepts) {
    static const char* const names[] = {"tree", "water", "bird", "sky", "flower", "mountain", "building", "grass",
                                        "cloud", "rock", "sand", "snow"};
    std::vector<std::string> out;
    for (std::size_t c = 0; c < concepts; ++c) {
        out.push_back(c < std::size(names) ? names[c] : "concept" + std::to_string(c));
    }
    return out;
}

Catalog make_benchmark(const BenchmarkConfig& config) {
    if (config.concepts == 0 || config.images == 0 || config.regions_per_image == 0) {
        fail(ErrorCode::invalid_config, "benchmark needs concepts, images and regions");
    }
    if (static_cast<std::size_t>(config.image_width) < config.regions_per_image) {
        fail(ErrorCode::invalid_config, "image too narrow for its regions");
    }
    FeatureSchema raw_schema{config.blocks, {}};
    raw_schema.validate();
    const std::size_t dim = raw_schema.total_dimension();
    const auto terms = benchmark_terms(config.concepts);

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> center_dist(0.5 - config.center_spread, 0.5 + config.center_spread);
    std::normal_distribution<double> noise(0.0, config.sigma);
    std::uniform_int_distribution<std::size_t> pick_concept(0, config.concepts - 1);

    std::vector<FeatureVector> centers(config.concepts, FeatureVector(dim));
    for (auto& c : centers) {
        for (double& v : c) v = center_dist(rng);
    }

    struct Draft {
        std::size_t image;
        std::size_t concept_index;
        FeatureVector raw;
    };
    std::vector<Draft> drafts;
    for (std::size_t i = 0; i < config.images; ++i) {
        for (std::size_t r = 0; r < config.regions_per_image; ++r) {
            const std::size_t c = pick_concept(rng);
            FeatureVector v(dim);
            for (std::size_t j = 0; j < dim; ++j) v[j] = centers[c][j] + noise(rng);
            drafts.push_back({i, c, std::move(v)});
        }
    }
    std::vector<FeatureVector> raw;
    for (const auto& d : drafts) raw.push_back(d.raw);
    NormalizedCorpus corpus = normalize_corpus(raw_schema, raw);

    Catalog catalog;
    catalog.set_schema(corpus.schema);
    for (const auto& label : terms) catalog.add_term(label);

    // Regions tile each image in vertical strips.
    const int strip = config.image_width / static_cast<int>(config.regions_per_image);
    std::vector<RegionId> region_ids;
    std::vector<ImageId> image_ids;
    for (std::size_t i = 0; i < config.images; ++i) {
        std::set<std::string> keywords;
        for (std::size_t r = 0; r < config.regions_per_image; ++r) keywords.insert(terms[drafts[i * config.regions_per_image + r].concept_index]);
        ImageRecord image;
        image.key = "img" + std::to_string(i);
        image.source_uri = "synthetic://" + std::to_string(config.seed) + "/" + image.key;
        image.width = config.image_width;
        image.height = config.image_height;
        image.ground_truth_keywords.assign(keywords.begin(), keywords.end());
        image_ids.push_back(catalog.add_image(std::move(image)));
    }
    for (std::size_t d = 0; d < drafts.size(); ++d) {
        const std::size_t i = drafts[d].image;
        const int r = static_cast<int>(d % config.regions_per_image);
        Region region;
        region.image_id = image_ids[i];
        region.key = "img" + std::to_string(i) + "/r" + std::to_string(r);
        region.geometry.box = {r * strip, 0, (r + 1) * strip, config.image_height};
        region.features = std::move(corpus.vectors[d]);
        region.labels = {terms[drafts[d].concept_index]};
        region_ids.push_back(catalog.add_region(std::move(region)));
    }

    ClusteringConfig clustering;
    clustering.rng_seed = config.seed;
    cluster_regions(catalog, clustering);

    for (std::size_t c = 0; c < config.concepts; ++c) {
        std::vector<RegionId> members;
        for (std::size_t d = 0; d < drafts.size(); ++d) {
            if (drafts[d].concept_index == c) members.push_back(region_ids[d]);
        }
        if (members.empty()) continue;
        const RegionId anchor = members[std::uniform_int_distribution<std::size_t>(0, members.size() - 1)(rng)];
        set_manual_association(catalog, *catalog.term_by_label(terms[c]), anchor);
    }
    return catalog;
}

}  // namespace voir
