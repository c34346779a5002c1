#include "voir/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <unordered_set>

#include "voir/error.hpp"

namespace voir {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::not_found: return "not_found";
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::invalid_region: return "invalid_region";
        case ErrorCode::invalid_query: return "invalid_query";
        case ErrorCode::invalid_config: return "invalid_config";
        case ErrorCode::schema_mismatch: return "schema_mismatch";
        case ErrorCode::conflict: return "conflict";
        case ErrorCode::dangling_key: return "dangling_key";
        case ErrorCode::duplicate_key: return "duplicate_key";
        case ErrorCode::unsupported_operation: return "unsupported_operation";
        case ErrorCode::mode_violation: return "mode_violation";
        case ErrorCode::precondition: return "precondition";
        case ErrorCode::degenerate_sample: return "degenerate_sample";
        case ErrorCode::cannot_compose_query: return "cannot_compose_query";
        case ErrorCode::checksum_mismatch: return "checksum_mismatch";
        case ErrorCode::version_mismatch: return "version_mismatch";
        case ErrorCode::partial_file: return "partial_file";
        case ErrorCode::parse_error: return "parse_error";
        case ErrorCode::io_error: return "io_error";
    }
    return "unknown";
}

std::string_view to_string(Mode mode) {
    switch (mode) {
        case Mode::voir1: return "voir1";
        case Mode::voir2: return "voir2";
        case Mode::voir3: return "voir3";
    }
    return "unknown";
}

std::string_view to_string(Polarity polarity) {
    return polarity == Polarity::relevant ? "relevant" : "non-relevant";
}

std::string_view to_string(Origin origin) {
    return origin == Origin::manual ? "manual" : "learned";
}

Mode parse_mode(std::string_view text) {
    const std::string folded = fold_case(text);
    if (folded == "voir1" || folded == "voir-1") return Mode::voir1;
    if (folded == "voir2" || folded == "voir-2") return Mode::voir2;
    if (folded == "voir3" || folded == "voir-3") return Mode::voir3;
    fail(ErrorCode::invalid_argument, "unknown mode '" + std::string(text) + "'");
}

Polarity parse_polarity(std::string_view text) {
    const std::string folded = fold_case(text);
    if (folded == "relevant" || folded == "+") return Polarity::relevant;
    if (folded == "non-relevant" || folded == "non_relevant" || folded == "nonrelevant" || folded == "-") {
        return Polarity::non_relevant;
    }
    fail(ErrorCode::invalid_argument, "unknown polarity '" + std::string(text) + "'");
}

std::string fold_case(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// ---------------------------------------------------------------------------
// FeatureSchema

std::size_t FeatureSchema::total_dimension() const {
    std::size_t total = 0;
    for (const auto& block : blocks) total += block.dimension;
    return total;
}

std::size_t FeatureSchema::block_offset(std::size_t block) const {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < block; ++i) offset += blocks.at(i).dimension;
    return offset;
}

std::optional<std::size_t> FeatureSchema::block_index(std::string_view name) const {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i].name == name) return i;
    }
    return std::nullopt;
}

bool FeatureSchema::is_constant(std::size_t component) const {
    return normalized() && bounds.at(component).min == bounds.at(component).max;
}

void FeatureSchema::validate() const {
    if (blocks.empty()) fail(ErrorCode::invalid_argument, "feature schema has no blocks");
    std::set<std::string> names;
    for (const auto& block : blocks) {
        if (block.name.empty()) fail(ErrorCode::invalid_argument, "feature block with empty name");
        if (block.dimension == 0) fail(ErrorCode::invalid_argument, "feature block '" + block.name + "' has dimension 0");
        if (!names.insert(block.name).second) {
            fail(ErrorCode::invalid_argument, "duplicate feature block '" + block.name + "'");
        }
    }
    if (normalized()) {
        if (bounds.size() != total_dimension()) {
            fail(ErrorCode::invalid_argument, "normalization bounds do not match schema dimension");
        }
        for (const auto& b : bounds) {
            if (!(b.min <= b.max) || !std::isfinite(b.min) || !std::isfinite(b.max)) {
                fail(ErrorCode::invalid_argument, "normalization bound with min > max");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// RunLengthMask

std::size_t RunLengthMask::pixel_count() const {
    std::size_t count = 0;
    for (const auto& run : runs) count += static_cast<std::size_t>(std::max(run.length, 0));
    return count;
}

bool RunLengthMask::within(const BoundingBox& box) const {
    return std::all_of(runs.begin(), runs.end(), [&](const Run& run) {
        return run.length > 0 && run.y >= box.y0 && run.y < box.y1 && run.x >= box.x0 &&
               run.x + run.length <= box.x1;
    });
}

// ---------------------------------------------------------------------------
// Catalog

void Catalog::set_schema(FeatureSchema schema) {
    schema.validate();
    schema_ = std::move(schema);
}

ImageId Catalog::add_image(ImageRecord image) {
    if (!image.id) image.id = ImageId{next_image_};
    if (images_.count(image.id)) fail(ErrorCode::duplicate_key, "duplicate image id " + std::to_string(image.id.value));
    if (!image.key.empty()) {
        if (image_keys_.count(image.key)) fail(ErrorCode::duplicate_key, "duplicate image key '" + image.key + "'");
        image_keys_.emplace(image.key, image.id);
    }
    next_image_ = std::max(next_image_, image.id.value + 1);
    const ImageId id = image.id;
    images_.emplace(id, std::move(image));
    return id;
}

RegionId Catalog::add_region(Region region) {
    auto image_it = images_.find(region.image_id);
    if (image_it == images_.end()) {
        fail(ErrorCode::dangling_key, "region refers to unknown image " + std::to_string(region.image_id.value));
    }
    if (!region.geometry.box.valid()) fail(ErrorCode::invalid_region, "region bounding box is empty");
    if (region.geometry.mask && !region.geometry.mask->within(region.geometry.box)) {
        fail(ErrorCode::invalid_region, "region mask exceeds its bounding box");
    }
    if (!region.id) region.id = RegionId{next_region_};
    if (regions_.count(region.id)) fail(ErrorCode::duplicate_key, "duplicate region id " + std::to_string(region.id.value));
    if (!region.key.empty()) {
        if (region_keys_.count(region.key)) fail(ErrorCode::duplicate_key, "duplicate region key '" + region.key + "'");
        region_keys_.emplace(region.key, region.id);
    }
    next_region_ = std::max(next_region_, region.id.value + 1);
    auto& ids = image_it->second.region_ids;
    if (std::find(ids.begin(), ids.end(), region.id) == ids.end()) ids.push_back(region.id);
    const RegionId id = region.id;
    regions_.emplace(id, std::move(region));
    return id;
}

TermId Catalog::add_term(std::string label, std::optional<TermId> parent) {
    if (parent && !terms_.count(*parent)) {
        fail(ErrorCode::not_found, "unknown parent term " + std::to_string(parent->value));
    }
    Term term{TermId{next_term_}, std::move(label), parent};
    const TermId id = term.id;
    restore_term(std::move(term));
    return id;
}

void Catalog::restore_term(Term term) {
    if (term.label.empty()) fail(ErrorCode::invalid_argument, "term label is empty");
    if (!term.id) fail(ErrorCode::invalid_argument, "term id 0 is reserved");
    if (terms_.count(term.id)) fail(ErrorCode::duplicate_key, "duplicate term id " + std::to_string(term.id.value));
    std::string folded = fold_case(term.label);
    if (label_index_.count(folded)) fail(ErrorCode::duplicate_key, "duplicate term label '" + term.label + "'");
    label_index_.emplace(std::move(folded), term.id);
    next_term_ = std::max(next_term_, term.id.value + 1);
    terms_.emplace(term.id, std::move(term));
}

const ImageRecord& Catalog::image(ImageId id) const {
    if (const auto* found = find_image(id)) return *found;
    fail(ErrorCode::not_found, "unknown image " + std::to_string(id.value));
}

const Region& Catalog::region(RegionId id) const {
    if (const auto* found = find_region(id)) return *found;
    fail(ErrorCode::not_found, "unknown region " + std::to_string(id.value));
}

Region& Catalog::mutable_region(RegionId id) {
    auto it = regions_.find(id);
    if (it == regions_.end()) fail(ErrorCode::not_found, "unknown region " + std::to_string(id.value));
    return it->second;
}

const Term& Catalog::term(TermId id) const {
    if (const auto* found = find_term(id)) return *found;
    fail(ErrorCode::not_found, "unknown term " + std::to_string(id.value));
}

const VisualCategory& Catalog::category(CategoryId id) const {
    auto it = categories_.find(id);
    if (it == categories_.end()) fail(ErrorCode::not_found, "unknown visual category " + std::to_string(id.value));
    return it->second;
}

const ImageRecord* Catalog::find_image(ImageId id) const {
    auto it = images_.find(id);
    return it == images_.end() ? nullptr : &it->second;
}

const Region* Catalog::find_region(RegionId id) const {
    auto it = regions_.find(id);
    return it == regions_.end() ? nullptr : &it->second;
}

const Term* Catalog::find_term(TermId id) const {
    auto it = terms_.find(id);
    return it == terms_.end() ? nullptr : &it->second;
}

std::optional<TermId> Catalog::term_by_label(std::string_view label) const {
    auto it = label_index_.find(fold_case(label));
    if (it == label_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<ImageId> Catalog::image_by_key(std::string_view key) const {
    auto it = image_keys_.find(std::string(key));
    if (it == image_keys_.end()) return std::nullopt;
    return it->second;
}

std::optional<RegionId> Catalog::region_by_key(std::string_view key) const {
    auto it = region_keys_.find(std::string(key));
    if (it == region_keys_.end()) return std::nullopt;
    return it->second;
}

std::vector<TermId> Catalog::children(TermId id) const {
    std::vector<TermId> out;
    for (const auto& [tid, term] : terms_) {
        if (term.parent_id && *term.parent_id == id) out.push_back(tid);
    }
    return out;
}

std::vector<TermId> Catalog::thesaurus_descendants(TermId id) const {
    term(id);
    std::vector<TermId> out;
    std::vector<TermId> stack{id};
    std::unordered_set<TermId> seen;
    while (!stack.empty()) {
        const TermId current = stack.back();
        stack.pop_back();
        if (!seen.insert(current).second) continue;
        out.push_back(current);
        for (TermId child : children(current)) stack.push_back(child);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<CategoryId> Catalog::conceptual_to_visual(TermId term_id, int min_conf) const {
    term(term_id);
    if (min_conf < 0 || min_conf > 100) fail(ErrorCode::invalid_argument, "min_conf must lie in [0,100]");
    std::set<CategoryId> out;
    auto it = associations_.lower_bound({term_id, RegionId{0}});
    for (; it != associations_.end() && it->first.first == term_id; ++it) {
        if (it->second.d_conf < min_conf) continue;
        const Region& r = region(it->second.region_id);
        if (r.category_id) out.insert(*r.category_id);
    }
    return {out.begin(), out.end()};
}

const Association* Catalog::find_association(TermId term_id, RegionId region_id) const {
    auto it = associations_.find({term_id, region_id});
    return it == associations_.end() ? nullptr : &it->second;
}

void Catalog::insert_association(Association association) {
    term(association.term_id);
    region(association.region_id);
    if (association.d_conf < 0 || association.d_conf > 100) fail(ErrorCode::invalid_argument, "d_conf outside [0,100]");
    if (association.origin == Origin::manual && association.d_conf != kManualConfidence) {
        fail(ErrorCode::invalid_argument, "manual associations carry d_conf 100");
    }
    const AssociationKey key{association.term_id, association.region_id};
    if (associations_.count(key)) {
        fail(ErrorCode::conflict, "association already exists for term " + std::to_string(key.first.value) +
                                      " and region " + std::to_string(key.second.value));
    }
    associations_.emplace(key, std::move(association));
}

void Catalog::upsert_association(Association association) {
    const AssociationKey key{association.term_id, association.region_id};
    associations_.erase(key);
    insert_association(std::move(association));
}

bool Catalog::remove_association(TermId term_id, RegionId region_id) {
    return associations_.erase({term_id, region_id}) > 0;
}

std::vector<Association> Catalog::associations_for_term(TermId term_id) const {
    std::vector<Association> out;
    auto it = associations_.lower_bound({term_id, RegionId{0}});
    for (; it != associations_.end() && it->first.first == term_id; ++it) out.push_back(it->second);
    return out;
}

void Catalog::set_categories(std::vector<VisualCategory> categories) {
    for (auto& [id, r] : regions_) r.category_id.reset();
    categories_.clear();
    for (auto& category : categories) {
        if (!category.id) fail(ErrorCode::invalid_argument, "category id 0 is reserved");
        if (category.member_region_ids.empty()) fail(ErrorCode::invalid_argument, "visual category without members");
        for (RegionId member : category.member_region_ids) {
            Region& r = mutable_region(member);
            if (r.category_id) fail(ErrorCode::invalid_argument, "region assigned to two visual categories");
            r.category_id = category.id;
        }
        const CategoryId id = category.id;
        if (!categories_.emplace(id, std::move(category)).second) {
            fail(ErrorCode::duplicate_key, "duplicate category id " + std::to_string(id.value));
        }
    }
}

void Catalog::validate() const {
    if (!schema_.blocks.empty()) schema_.validate();
    const std::size_t dim = schema_.total_dimension();

    for (const auto& [id, image] : images_) {
        if (image.region_ids.empty()) fail(ErrorCode::precondition, "image " + std::to_string(id.value) + " has no regions");
        for (RegionId rid : image.region_ids) {
            const Region* r = find_region(rid);
            if (!r || r->image_id != id) {
                fail(ErrorCode::dangling_key, "image " + std::to_string(id.value) + " lists a region that does not point back");
            }
        }
    }
    for (const auto& [id, r] : regions_) {
        const ImageRecord* owner = find_image(r.image_id);
        if (!owner) fail(ErrorCode::dangling_key, "region " + std::to_string(id.value) + " refers to a missing image");
        if (std::find(owner->region_ids.begin(), owner->region_ids.end(), id) == owner->region_ids.end()) {
            fail(ErrorCode::dangling_key, "region " + std::to_string(id.value) + " missing from its image");
        }
        if (dim != 0 && r.features.size() != dim) {
            fail(ErrorCode::schema_mismatch, "region " + std::to_string(id.value) + " does not conform to the schema");
        }
        for (double v : r.features) {
            if (!std::isfinite(v)) fail(ErrorCode::invalid_argument, "non-finite feature component");
        }
        if (r.category_id && !categories_.count(*r.category_id)) {
            fail(ErrorCode::dangling_key, "region refers to a missing category");
        }
    }
    for (const auto& [id, term] : terms_) {
        // Parent walk must terminate within |terms| steps.
        std::optional<TermId> cursor = term.parent_id;
        std::size_t steps = 0;
        while (cursor) {
            const Term* parent = find_term(*cursor);
            if (!parent) fail(ErrorCode::dangling_key, "term '" + term.label + "' has a missing parent");
            if (++steps > terms_.size()) fail(ErrorCode::invalid_argument, "thesaurus contains a cycle");
            cursor = parent->parent_id;
        }
    }
    for (const auto& [key, a] : associations_) {
        if (!find_term(a.term_id) || !find_region(a.region_id)) {
            fail(ErrorCode::dangling_key, "association refers to a missing term or region");
        }
        if (a.d_conf < 0 || a.d_conf > 100) fail(ErrorCode::invalid_argument, "d_conf outside [0,100]");
        if (a.origin == Origin::manual && a.d_conf != kManualConfidence) {
            fail(ErrorCode::invalid_argument, "manual association with d_conf != 100");
        }
    }
    for (const auto& [id, category] : categories_) {
        FeatureVector mean(dim, 0.0);
        for (RegionId rid : category.member_region_ids) {
            const Region* r = find_region(rid);
            if (!r || r->category_id != id) fail(ErrorCode::dangling_key, "category member does not point back");
            for (std::size_t j = 0; j < dim && j < r->features.size(); ++j) mean[j] += r->features[j];
        }
        if (category.centroid.size() != dim) fail(ErrorCode::schema_mismatch, "category centroid dimension mismatch");
        for (std::size_t j = 0; j < dim; ++j) {
            mean[j] /= static_cast<double>(category.member_region_ids.size());
            if (std::abs(mean[j] - category.centroid[j]) > 1e-9) {
                fail(ErrorCode::invalid_argument, "category centroid is not the member mean");
            }
        }
    }
    for (const auto& [key, row] : ledger_) {
        if (!find_term(key.first) || !categories_.count(key.second)) {
            fail(ErrorCode::dangling_key, "evidence ledger row refers to a missing term or category");
        }
    }
}

bool Catalog::operator==(const Catalog& other) const {
    return schema_ == other.schema_ && images_ == other.images_ && regions_ == other.regions_ &&
           terms_ == other.terms_ && associations_ == other.associations_ && categories_ == other.categories_ &&
           ledger_ == other.ledger_;
}

}  // namespace voir
