#pragma once
// Canonical data model: images, regions, feature schema, thesaurus,
// term-region associations, visual categories and the evidence ledger.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace voir {

template <class Tag>
struct Id {
    std::uint64_t value = 0;

    constexpr auto operator<=>(const Id&) const = default;
    constexpr explicit operator bool() const { return value != 0; }
};

using ImageId = Id<struct ImageTag>;
using RegionId = Id<struct RegionTag>;
using TermId = Id<struct TermTag>;
using CategoryId = Id<struct CategoryTag>;

enum class Mode { voir1, voir2, voir3 };
enum class Polarity { relevant, non_relevant };
enum class Origin { manual, learned };

std::string_view to_string(Mode mode);
std::string_view to_string(Polarity polarity);
std::string_view to_string(Origin origin);
Mode parse_mode(std::string_view text);
Polarity parse_polarity(std::string_view text);

using FeatureVector = std::vector<double>;

struct FeatureBlock {
    std::string name;
    std::size_t dimension = 0;

    bool operator==(const FeatureBlock&) const = default;
};

struct Bounds {
    double min = 0.0;
    double max = 0.0;

    bool operator==(const Bounds&) const = default;
};

// Ordered feature blocks plus per-component normalization bounds.
// `bounds` is empty for a raw (not yet normalized) schema.
struct FeatureSchema {
    std::vector<FeatureBlock> blocks;
    std::vector<Bounds> bounds;

    std::size_t total_dimension() const;
    std::size_t block_count() const { return blocks.size(); }
    std::size_t block_offset(std::size_t block) const;
    std::optional<std::size_t> block_index(std::string_view name) const;
    bool normalized() const { return !bounds.empty(); }
    bool is_constant(std::size_t component) const;
    // Same block names and dimensions, ignoring bounds.
    bool same_layout(const FeatureSchema& other) const { return blocks == other.blocks; }

    // Throws invalid_argument on duplicate names, empty layout or bad bounds.
    void validate() const;

    bool operator==(const FeatureSchema&) const = default;
};

// Half-open pixel rectangle [x0,x1) x [y0,y1).
struct BoundingBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    bool valid() const { return x0 < x1 && y0 < y1; }

    bool operator==(const BoundingBox&) const = default;
};

// Row runs in image coordinates.
struct RunLengthMask {
    struct Run {
        int y = 0;
        int x = 0;
        int length = 0;

        bool operator==(const Run&) const = default;
    };
    std::vector<Run> runs;

    std::size_t pixel_count() const;
    bool within(const BoundingBox& box) const;

    bool operator==(const RunLengthMask&) const = default;
};

struct RegionGeometry {
    BoundingBox box;
    std::optional<RunLengthMask> mask;

    bool operator==(const RegionGeometry&) const = default;
};

struct Region {
    RegionId id;
    ImageId image_id;
    std::string key;
    RegionGeometry geometry;
    FeatureVector features;
    std::optional<CategoryId> category_id;
    // Optional region-level ground truth, only used by oracle users.
    std::vector<std::string> labels;

    bool operator==(const Region&) const = default;
};

struct ImageRecord {
    ImageId id;
    std::string key;
    std::string source_uri;
    int width = 0;
    int height = 0;
    std::vector<RegionId> region_ids;
    std::vector<std::string> ground_truth_keywords;

    bool operator==(const ImageRecord&) const = default;
};

struct Term {
    TermId id;
    std::string label;
    std::optional<TermId> parent_id;

    bool operator==(const Term&) const = default;
};

struct Association {
    TermId term_id;
    RegionId region_id;
    int d_conf = 0;
    Origin origin = Origin::learned;
    std::uint64_t pos_events = 0;
    std::uint64_t neg_events = 0;

    bool operator==(const Association&) const = default;
};

struct VisualCategory {
    CategoryId id;
    std::vector<RegionId> member_region_ids;
    FeatureVector centroid;

    bool operator==(const VisualCategory&) const = default;
};

struct EvidenceRow {
    std::uint64_t manual_count = 0;
    std::uint64_t pos_events = 0;
    std::uint64_t neg_events = 0;

    bool operator==(const EvidenceRow&) const = default;
};

using EvidenceKey = std::pair<TermId, CategoryId>;
using AssociationKey = std::pair<TermId, RegionId>;
using EvidenceLedger = std::map<EvidenceKey, EvidenceRow>;

inline constexpr int kManualConfidence = 100;
inline constexpr int kDefaultMinConfidence = 50;

// In-memory store for everything an index holds. Single-writer: callers
// serialize mutations against readers.
class Catalog {
public:
    const FeatureSchema& schema() const { return schema_; }
    void set_schema(FeatureSchema schema);

    ImageId add_image(ImageRecord image);
    RegionId add_region(Region region);
    TermId add_term(std::string label, std::optional<TermId> parent = std::nullopt);
    // Restores a term with its stored id; parent may be inserted later.
    void restore_term(Term term);

    const ImageRecord& image(ImageId id) const;
    const Region& region(RegionId id) const;
    Region& mutable_region(RegionId id);
    const Term& term(TermId id) const;
    const VisualCategory& category(CategoryId id) const;

    const ImageRecord* find_image(ImageId id) const;
    const Region* find_region(RegionId id) const;
    const Term* find_term(TermId id) const;
    std::optional<TermId> term_by_label(std::string_view label) const;
    std::optional<ImageId> image_by_key(std::string_view key) const;
    std::optional<RegionId> region_by_key(std::string_view key) const;

    const std::map<ImageId, ImageRecord>& images() const { return images_; }
    const std::map<RegionId, Region>& regions() const { return regions_; }
    const std::map<TermId, Term>& terms() const { return terms_; }
    const std::map<CategoryId, VisualCategory>& categories() const { return categories_; }
    const std::map<AssociationKey, Association>& associations() const { return associations_; }

    std::vector<TermId> children(TermId id) const;
    std::vector<TermId> thesaurus_descendants(TermId id) const;
    std::vector<CategoryId> conceptual_to_visual(TermId term, int min_conf = kDefaultMinConfidence) const;

    const Association* find_association(TermId term, RegionId region) const;
    // Rejects a duplicate (term, region) pair with a conflict error.
    void insert_association(Association association);
    void upsert_association(Association association);
    bool remove_association(TermId term, RegionId region);
    std::vector<Association> associations_for_term(TermId term) const;
    std::size_t association_count() const { return associations_.size(); }

    // Replaces the whole clustering; regions not listed become unclustered.
    void set_categories(std::vector<VisualCategory> categories);

    EvidenceLedger& ledger() { return ledger_; }
    const EvidenceLedger& ledger() const { return ledger_; }

    // Full-scan integrity check; throws on the first violation.
    void validate() const;

    bool operator==(const Catalog& other) const;

private:
    FeatureSchema schema_;
    std::map<ImageId, ImageRecord> images_;
    std::map<RegionId, Region> regions_;
    std::map<TermId, Term> terms_;
    std::map<AssociationKey, Association> associations_;
    std::map<CategoryId, VisualCategory> categories_;
    EvidenceLedger ledger_;

    std::unordered_map<std::string, TermId> label_index_;
    std::unordered_map<std::string, ImageId> image_keys_;
    std::unordered_map<std::string, RegionId> region_keys_;

    std::uint64_t next_image_ = 1;
    std::uint64_t next_region_ = 1;
    std::uint64_t next_term_ = 1;
};

std::string fold_case(std::string_view text);

}  // namespace voir

template <class Tag>
struct std::hash<voir::Id<Tag>> {
    std::size_t operator()(const voir::Id<Tag>& id) const noexcept {
        return std::hash<std::uint64_t>{}(id.value);
    }
};
