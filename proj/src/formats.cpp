#include "voir/formats.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "voir/error.hpp"
#include "voir/features.hpp"
#include "voir/raster_io.hpp"

namespace voir {

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t end = text.find(sep, start);
        parts.push_back(text.substr(start, end == std::string::npos ? std::string::npos : end - start));
        if (end == std::string::npos) break;
        start = end + 1;
    }
    return parts;
}

std::string trim(const std::string& text) {
    const auto first = text.find_first_not_of(" \r\n");
    if (first == std::string::npos) return {};
    const auto last = text.find_last_not_of(" \r\n");
    return text.substr(first, last - first + 1);
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
    fail(ErrorCode::parse_error, "line " + std::to_string(line_no) + ": " + what);
}

template <class T>
T parse_number(const std::string& text, std::size_t line_no) {
    const std::string token = trim(text);
    T value{};
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (ec != std::errc() || ptr != end || token.empty()) parse_fail(line_no, "bad number '" + token + "'");
    return value;
}

BoundingBox parse_box(const std::string& text, std::size_t line_no) {
    const auto parts = split(text, ',');
    if (parts.size() != 4) parse_fail(line_no, "bounding box needs x0,y0,x1,y1");
    BoundingBox box{parse_number<int>(parts[0], line_no), parse_number<int>(parts[1], line_no),
                    parse_number<int>(parts[2], line_no), parse_number<int>(parts[3], line_no)};
    if (!box.valid() || box.x0 < 0 || box.y0 < 0) parse_fail(line_no, "bounding box must satisfy 0 <= x0 < x1, 0 <= y0 < y1");
    return box;
}

// Calls `fn(fields, line_no)` for every non-blank, non-comment line.
template <class Fn>
void for_each_line(std::istream& in, Fn&& fn) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty() || line.front() == '#') continue;
        fn(split(line, '\t'), line_no);
    }
}

}  // namespace

std::vector<FeatureRecord> parse_features(std::istream& in) {
    std::vector<FeatureRecord> records;
    for_each_line(in, [&](const std::vector<std::string>& fields, std::size_t line_no) {
        if (fields.size() < 4) parse_fail(line_no, "features record needs image, region, box and at least one block");
        FeatureRecord record{trim(fields[0]), trim(fields[1]), parse_box(fields[2], line_no), {}};
        if (record.image_key.empty() || record.region_key.empty()) parse_fail(line_no, "empty key");
        for (std::size_t f = 3; f < fields.size(); ++f) {
            const auto eq = fields[f].find('=');
            if (eq == std::string::npos) parse_fail(line_no, "feature block must be name=v1,v2,...");
            std::string name = trim(fields[f].substr(0, eq));
            if (name.empty()) parse_fail(line_no, "feature block without a name");
            std::vector<double> values;
            for (const auto& v : split(fields[f].substr(eq + 1), ',')) values.push_back(parse_number<double>(v, line_no));
            record.blocks.emplace_back(std::move(name), std::move(values));
        }
        records.push_back(std::move(record));
    });
    return records;
}

std::vector<ThesaurusEntry> parse_thesaurus(std::istream& in) {
    std::vector<ThesaurusEntry> entries;
    for_each_line(in, [&](const std::vector<std::string>& fields, std::size_t line_no) {
        if (fields.size() > 2) parse_fail(line_no, "thesaurus line has too many fields");
        ThesaurusEntry entry{trim(fields[0]), fields.size() == 2 ? trim(fields[1]) : std::string{}};
        if (entry.label.empty()) parse_fail(line_no, "empty term label");
        entries.push_back(std::move(entry));
    });
    return entries;
}

std::vector<AnnotationRecord> parse_annotations(std::istream& in) {
    std::vector<AnnotationRecord> records;
    for_each_line(in, [&](const std::vector<std::string>& fields, std::size_t line_no) {
        if (fields.size() > 2) parse_fail(line_no, "annotation line has too many fields");
        AnnotationRecord record{trim(fields[0]), {}};
        if (record.image_key.empty()) parse_fail(line_no, "empty image key");
        if (fields.size() == 2) {
            for (const auto& kw : split(fields[1], ',')) {
                std::string keyword = trim(kw);
                if (!keyword.empty()) record.keywords.push_back(std::move(keyword));
            }
        }
        records.push_back(std::move(record));
    });
    return records;
}

std::vector<RegionRecord> parse_regions(std::istream& in) {
    std::vector<RegionRecord> records;
    for_each_line(in, [&](const std::vector<std::string>& fields, std::size_t line_no) {
        if (fields.size() < 3) parse_fail(line_no, "region record needs image, region and box");
        RegionRecord record{trim(fields[0]), trim(fields[1]), parse_box(fields[2], line_no)};
        if (record.image_key.empty() || record.region_key.empty()) parse_fail(line_no, "empty key");
        records.push_back(std::move(record));
    });
    return records;
}

void load_thesaurus(Catalog& catalog, const std::vector<ThesaurusEntry>& entries) {
    std::unordered_map<std::string, const ThesaurusEntry*> by_label;
    for (const auto& entry : entries) {
        if (!by_label.emplace(fold_case(entry.label), &entry).second || catalog.term_by_label(entry.label)) {
            fail(ErrorCode::duplicate_key, "duplicate term label '" + entry.label + "'");
        }
    }
    std::unordered_set<std::string> visiting;
    // Depth-first so parents exist before children; file order kept otherwise.
    auto insert = [&](auto&& self, const ThesaurusEntry& entry) -> TermId {
        if (auto existing = catalog.term_by_label(entry.label)) return *existing;
        const std::string folded = fold_case(entry.label);
        if (!visiting.insert(folded).second) fail(ErrorCode::invalid_argument, "thesaurus cycle through '" + entry.label + "'");
        std::optional<TermId> parent;
        if (!entry.parent_label.empty()) {
            if (auto known = catalog.term_by_label(entry.parent_label)) {
                parent = *known;
            } else {
                auto it = by_label.find(fold_case(entry.parent_label));
                if (it == by_label.end()) {
                    fail(ErrorCode::dangling_key, "term '" + entry.label + "' has unknown parent '" + entry.parent_label + "'");
                }
                parent = self(self, *it->second);
            }
        }
        visiting.erase(folded);
        return catalog.add_term(entry.label, parent);
    };
    for (const auto& entry : entries) insert(insert, entry);
}

namespace {

std::map<std::string, std::vector<std::string>> annotation_index(const std::vector<AnnotationRecord>& annotations) {
    std::map<std::string, std::vector<std::string>> index;
    for (const auto& record : annotations) {
        if (index.count(record.image_key)) fail(ErrorCode::duplicate_key, "image '" + record.image_key + "' annotated twice");
        std::vector<std::string> keywords = record.keywords;
        std::sort(keywords.begin(), keywords.end());
        keywords.erase(std::unique(keywords.begin(), keywords.end()), keywords.end());
        index.emplace(record.image_key, std::move(keywords));
    }
    return index;
}

struct PendingRegion {
    std::string image_key;
    std::string region_key;
    BoundingBox box;
    FeatureVector raw;
};

// Creates images and regions in input order, then normalizes corpus-wide.
ImportSummary commit(Catalog& catalog, const FeatureSchema& raw_schema,
                     const std::map<std::string, std::vector<std::string>>& keywords,
                     const std::map<std::string, std::pair<int, int>>& sizes, std::vector<PendingRegion> pending,
                     const std::map<std::string, std::string>& uris) {
    ImportSummary summary;
    if (pending.empty()) return summary;

    std::vector<FeatureVector> raw;
    raw.reserve(pending.size());
    for (const auto& p : pending) raw.push_back(p.raw);
    NormalizedCorpus corpus = normalize_corpus(raw_schema, raw);

    Catalog staged = catalog;
    staged.set_schema(corpus.schema);
    for (std::size_t i = 0; i < pending.size(); ++i) {
        auto& p = pending[i];
        std::optional<ImageId> image_id = staged.image_by_key(p.image_key);
        if (!image_id) {
            ImageRecord image;
            image.key = p.image_key;
            auto uri = uris.find(p.image_key);
            image.source_uri = uri == uris.end() ? p.image_key : uri->second;
            image.width = sizes.at(p.image_key).first;
            image.height = sizes.at(p.image_key).second;
            image.ground_truth_keywords = keywords.at(p.image_key);
            image_id = staged.add_image(std::move(image));
            ++summary.images;
        }
        Region region;
        region.image_id = *image_id;
        region.key = std::move(p.region_key);
        region.geometry.box = p.box;
        region.features = std::move(corpus.vectors[i]);
        staged.add_region(std::move(region));
        ++summary.regions;
    }
    catalog = std::move(staged);
    return summary;
}

void require_no_regions(const Catalog& catalog) {
    if (!catalog.regions().empty()) fail(ErrorCode::precondition, "import requires a catalog without regions");
}

}  // namespace

ImportSummary import_precomputed(Catalog& catalog, const std::vector<AnnotationRecord>& annotations,
                                 const std::vector<FeatureRecord>& records) {
    require_no_regions(catalog);
    const auto keywords = annotation_index(annotations);

    FeatureSchema raw_schema;
    std::set<std::string> region_keys;
    std::map<std::string, std::pair<int, int>> sizes;
    std::vector<PendingRegion> pending;
    for (const auto& record : records) {
        FeatureSchema layout;
        FeatureVector raw;
        for (const auto& [name, values] : record.blocks) {
            layout.blocks.push_back({name, values.size()});
            raw.insert(raw.end(), values.begin(), values.end());
        }
        if (pending.empty()) {
            layout.validate();
            raw_schema = layout;
        } else if (!raw_schema.same_layout(layout)) {
            fail(ErrorCode::schema_mismatch, "region '" + record.region_key + "' has a different block layout or dimension");
        }
        if (!region_keys.insert(record.region_key).second) {
            fail(ErrorCode::duplicate_key, "duplicate region key '" + record.region_key + "'");
        }
        if (!keywords.count(record.image_key)) {
            fail(ErrorCode::dangling_key, "region '" + record.region_key + "' refers to unknown image '" + record.image_key + "'");
        }
        auto& size = sizes[record.image_key];
        size.first = std::max(size.first, record.box.x1);
        size.second = std::max(size.second, record.box.y1);
        pending.push_back({record.image_key, record.region_key, record.box, std::move(raw)});
    }
    return commit(catalog, raw_schema, keywords, sizes, std::move(pending), {});
}

ImportSummary import_images(Catalog& catalog, const std::filesystem::path& image_dir,
                            const std::vector<AnnotationRecord>& annotations,
                            const std::optional<std::vector<RegionRecord>>& regions) {
    require_no_regions(catalog);
    const auto keywords = annotation_index(annotations);

    std::map<std::string, std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(image_dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = fold_case(entry.path().extension().string());
        if (ext != ".png" && ext != ".ppm") continue;
        const std::string key = entry.path().stem().string();
        if (!files.emplace(key, entry.path()).second) fail(ErrorCode::duplicate_key, "two raster files share key '" + key + "'");
    }

    std::vector<RegionRecord> geometry;
    if (regions) {
        geometry = *regions;
    } else {
        for (const auto& [key, path] : files) geometry.push_back({key, key + "#0", {}});
    }

    std::map<std::string, RasterImage> rasters;
    std::map<std::string, std::pair<int, int>> sizes;
    std::map<std::string, std::string> uris;
    std::set<std::string> region_keys;
    std::vector<PendingRegion> pending;
    for (auto& record : geometry) {
        if (!keywords.count(record.image_key)) {
            fail(ErrorCode::dangling_key, "image '" + record.image_key + "' is not annotated");
        }
        auto file = files.find(record.image_key);
        if (file == files.end()) fail(ErrorCode::dangling_key, "no raster file for image '" + record.image_key + "'");
        if (!region_keys.insert(record.region_key).second) {
            fail(ErrorCode::duplicate_key, "duplicate region key '" + record.region_key + "'");
        }
        auto raster = rasters.find(record.image_key);
        if (raster == rasters.end()) {
            raster = rasters.emplace(record.image_key, read_raster(file->second)).first;
            sizes[record.image_key] = {raster->second.width, raster->second.height};
            uris[record.image_key] = file->second.string();
        }
        if (!regions) record.box = {0, 0, raster->second.width, raster->second.height};
        RegionGeometry geom{record.box, std::nullopt};
        pending.push_back({record.image_key, record.region_key, record.box, extract_features(raster->second, geom)});
    }
    return commit(catalog, builtin_schema(), keywords, sizes, std::move(pending), uris);
}

}  // namespace voir
