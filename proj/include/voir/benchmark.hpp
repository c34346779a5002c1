#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "voir/model.hpp"

namespace voir {

// Synthetic stand-in for a small annotated, segmented photo collection.
// Every concept is an isotropic Gaussian blob (sigma per component) around
// its own centre; each region is drawn from one concept's blob and each
// image's keywords are the concepts of its regions.
struct BenchmarkConfig {
    std::size_t concepts = 8;
    std::size_t images = 100;
    std::size_t regions_per_image = 4;
    double sigma = 0.05;
    // Concept centres are drawn uniformly in [0.5 - spread, 0.5 + spread].
    double center_spread = 0.05;
    std::vector<FeatureBlock> blocks{{"color", 8}, {"texture", 8}, {"shape", 4}};
    std::uint64_t seed = 1;
    // Image pixel frame used for the synthetic region geometry.
    int image_width = 96;
    int image_height = 96;
};

std::vector<std::string> benchmark_terms(std::size_t concepts);

// Builds, normalizes and clusters (k = auto) the corpus, then adds one manual
// association per concept on a seeded random region of that concept.
Catalog make_benchmark(const BenchmarkConfig& config);

}  // namespace voir
