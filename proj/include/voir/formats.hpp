#pragma once
// Line-delimited UTF-8 ingestion formats:
//   features:    image_key TAB region_key TAB x0,y0,x1,y1 TAB block=v1,v2,... [TAB block=...]
//   thesaurus:   term_label TAB parent_label_or_empty
//   annotations: image_key TAB keyword[,keyword...]
// Blank lines and lines starting with '#' are skipped.

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "voir/model.hpp"

namespace voir {

struct FeatureRecord {
    std::string image_key;
    std::string region_key;
    BoundingBox box;
    std::vector<std::pair<std::string, std::vector<double>>> blocks;
};

struct ThesaurusEntry {
    std::string label;
    std::string parent_label;  // empty for roots
};

struct AnnotationRecord {
    std::string image_key;
    std::vector<std::string> keywords;
};

// Geometry-only record for building from rasters (features file without blocks).
struct RegionRecord {
    std::string image_key;
    std::string region_key;
    BoundingBox box;
};

std::vector<FeatureRecord> parse_features(std::istream& in);
std::vector<ThesaurusEntry> parse_thesaurus(std::istream& in);
std::vector<AnnotationRecord> parse_annotations(std::istream& in);
std::vector<RegionRecord> parse_regions(std::istream& in);

// Inserts terms parents-first; rejects unknown parents, cycles and
// case-insensitive duplicate labels.
void load_thesaurus(Catalog& catalog, const std::vector<ThesaurusEntry>& entries);

struct ImportSummary {
    std::size_t images = 0;
    std::size_t regions = 0;
};

// Creates images (declared by `annotations`) and their regions from
// precomputed raw vectors, then normalizes the corpus. The catalog must not
// hold regions yet. Image size is taken from the regions' extents.
ImportSummary import_precomputed(Catalog& catalog, const std::vector<AnnotationRecord>& annotations,
                                 const std::vector<FeatureRecord>& records);

// Extracts built-in features from PNG/PPM files in `image_dir` (key = file
// stem). Without `regions`, each image becomes one full-frame region.
ImportSummary import_images(Catalog& catalog, const std::filesystem::path& image_dir,
                            const std::vector<AnnotationRecord>& annotations,
                            const std::optional<std::vector<RegionRecord>>& regions);

}  // namespace voir
