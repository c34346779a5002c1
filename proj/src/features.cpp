#include "voir/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "voir/error.hpp"

namespace voir {

RasterImage::RasterImage(int w, int h)
    : width(w), height(h), pixels(3 * static_cast<std::size_t>(std::max(w, 0)) * static_cast<std::size_t>(std::max(h, 0)), 0) {}

void RasterImage::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    std::uint8_t* p = at(x, y);
    p[0] = r;
    p[1] = g;
    p[2] = b;
}

bool RasterImage::valid() const {
    return width >= 1 && height >= 1 &&
           pixels.size() == 3 * static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

FeatureSchema builtin_schema() {
    return FeatureSchema{{{"color", kColorBins}, {"shape", kShapeDims}}, {}};
}

std::size_t color_bin(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    auto level = [](std::uint8_t v) { return static_cast<std::size_t>(v) * 3 / 256; };
    return level(r) * 9 + level(g) * 3 + level(b);
}

namespace {

// Dense membership grid over the bounding box.
class RegionMask {
public:
    RegionMask(const RegionGeometry& geometry) : box_(geometry.box) {
        cells_.assign(static_cast<std::size_t>(box_.width()) * box_.height(), geometry.mask ? 0 : 1);
        if (geometry.mask) {
            for (const auto& run : geometry.mask->runs) {
                for (int x = run.x; x < run.x + run.length; ++x) cells_[index(x, run.y)] = 1;
            }
        }
    }

    bool contains(int x, int y) const {
        if (x < box_.x0 || x >= box_.x1 || y < box_.y0 || y >= box_.y1) return false;
        return cells_[index(x, y)] != 0;
    }

    const BoundingBox& box() const { return box_; }

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y - box_.y0) * box_.width() + static_cast<std::size_t>(x - box_.x0);
    }

    BoundingBox box_;
    std::vector<std::uint8_t> cells_;
};

}  // namespace

FeatureVector extract_features(const RasterImage& image, const RegionGeometry& geometry) {
    if (!image.valid()) fail(ErrorCode::invalid_argument, "raster image is malformed");
    const BoundingBox& box = geometry.box;
    if (!box.valid() || box.x0 < 0 || box.y0 < 0 || box.x1 > image.width || box.y1 > image.height) {
        fail(ErrorCode::invalid_region, "region geometry lies outside the image");
    }
    if (geometry.mask && !geometry.mask->within(box)) {
        fail(ErrorCode::invalid_region, "region mask exceeds its bounding box");
    }
    const RegionMask mask(geometry);

    FeatureVector out(kColorBins + kShapeDims, 0.0);
    double count = 0.0;
    double perimeter = 0.0;
    double sum_x = 0.0;
    double sum_y = 0.0;
    for (int y = box.y0; y < box.y1; ++y) {
        for (int x = box.x0; x < box.x1; ++x) {
            if (!mask.contains(x, y)) continue;
            const std::uint8_t* p = image.at(x, y);
            out[color_bin(p[0], p[1], p[2])] += 1.0;
            count += 1.0;
            // Pixel centres sit at (x + 0.5, y + 0.5).
            sum_x += x + 0.5;
            sum_y += y + 0.5;
            if (!mask.contains(x - 1, y) || !mask.contains(x + 1, y) || !mask.contains(x, y - 1) ||
                !mask.contains(x, y + 1)) {
                perimeter += 1.0;
            }
        }
    }
    if (count == 0.0) fail(ErrorCode::invalid_region, "region mask selects no pixels");

    for (std::size_t b = 0; b < kColorBins; ++b) out[b] /= count;

    const double cx = sum_x / count;
    const double cy = sum_y / count;
    // Each pixel is a unit square, contributing 1/12 of extra variance per axis.
    double mxx = 0.0, myy = 0.0, mxy = 0.0;
    for (int y = box.y0; y < box.y1; ++y) {
        for (int x = box.x0; x < box.x1; ++x) {
            if (!mask.contains(x, y)) continue;
            const double dx = x + 0.5 - cx;
            const double dy = y + 0.5 - cy;
            mxx += dx * dx;
            myy += dy * dy;
            mxy += dx * dy;
        }
    }
    mxx = mxx / count + 1.0 / 12.0;
    myy = myy / count + 1.0 / 12.0;
    mxy /= count;
    const double half_trace = 0.5 * (mxx + myy);
    const double spread = std::sqrt(0.25 * (mxx - myy) * (mxx - myy) + mxy * mxy);
    const double major = half_trace + spread;
    const double minor = half_trace - spread;
    const double eccentricity = std::sqrt(std::max(0.0, 1.0 - minor / major));

    const double image_area = static_cast<double>(image.width) * image.height;
    out[kColorBins + 0] = count / image_area;
    out[kColorBins + 1] = 4.0 * std::numbers::pi * count / (perimeter * perimeter);
    out[kColorBins + 2] = eccentricity;
    out[kColorBins + 3] = cx / image.width;
    out[kColorBins + 4] = cy / image.height;
    return out;
}

NormalizedCorpus normalize_corpus(const FeatureSchema& raw_schema, const std::vector<FeatureVector>& raw) {
    raw_schema.validate();
    if (raw.empty()) fail(ErrorCode::invalid_argument, "cannot normalize an empty corpus");
    const std::size_t dim = raw_schema.total_dimension();
    for (const auto& v : raw) {
        if (v.size() != dim) fail(ErrorCode::schema_mismatch, "corpus vectors do not share one schema");
        for (double x : v) {
            if (!std::isfinite(x)) fail(ErrorCode::invalid_argument, "non-finite raw feature component");
        }
    }

    NormalizedCorpus corpus;
    corpus.schema.blocks = raw_schema.blocks;
    corpus.schema.bounds.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        Bounds b{raw.front()[j], raw.front()[j]};
        for (const auto& v : raw) {
            b.min = std::min(b.min, v[j]);
            b.max = std::max(b.max, v[j]);
        }
        corpus.schema.bounds[j] = b;
    }
    corpus.vectors.reserve(raw.size());
    for (const auto& v : raw) corpus.vectors.push_back(apply_bounds(corpus.schema, v));
    return corpus;
}

FeatureVector apply_bounds(const FeatureSchema& schema, const FeatureVector& raw) {
    if (!schema.normalized()) fail(ErrorCode::precondition, "schema carries no normalization bounds");
    if (raw.size() != schema.bounds.size()) fail(ErrorCode::schema_mismatch, "vector does not conform to schema");
    FeatureVector out(raw.size());
    for (std::size_t j = 0; j < raw.size(); ++j) {
        const Bounds& b = schema.bounds[j];
        if (b.max == b.min) {
            out[j] = 0.0;
        } else {
            out[j] = std::clamp((raw[j] - b.min) / (b.max - b.min), 0.0, 1.0);
        }
    }
    return out;
}

}  // namespace voir
