#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "voir/model.hpp"

namespace voir {

// Row-major RGB, 8 bits per channel.
struct RasterImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    RasterImage() = default;
    RasterImage(int w, int h);

    std::uint8_t* at(int x, int y) { return &pixels[3 * (static_cast<std::size_t>(y) * width + x)]; }
    const std::uint8_t* at(int x, int y) const { return &pixels[3 * (static_cast<std::size_t>(y) * width + x)]; }
    void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
    bool valid() const;
};

inline constexpr std::size_t kColorBins = 27;
inline constexpr std::size_t kShapeDims = 5;

// Built-in layout: color(27) + shape(5).
FeatureSchema builtin_schema();

// 3 levels per channel; bin = r*9 + g*3 + b.
std::size_t color_bin(std::uint8_t r, std::uint8_t g, std::uint8_t b);

// Raw (pre-normalization) vector under builtin_schema().
// Shape block: relative area, compactness 4*pi*A/P^2 (P = pixels with a
// non-region 4-neighbour, image border included), eccentricity from the
// second central moments of unit pixel squares, centroid x, centroid y.
FeatureVector extract_features(const RasterImage& image, const RegionGeometry& geometry);

struct NormalizedCorpus {
    FeatureSchema schema;
    std::vector<FeatureVector> vectors;
};

// Per-component min-max over the corpus; constant components map to 0.
NormalizedCorpus normalize_corpus(const FeatureSchema& raw_schema, const std::vector<FeatureVector>& raw);

// Maps one raw vector through existing bounds, clamped to [0,1].
FeatureVector apply_bounds(const FeatureSchema& schema, const FeatureVector& raw);

}  // namespace voir
