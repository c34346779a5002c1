#include "voir/index_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "voir/error.hpp"

namespace voir {

namespace {

constexpr char kMagic[8] = {'V', 'O', 'I', 'R', 'I', 'D', 'X', '\0'};
constexpr std::size_t kHeaderSize = sizeof kMagic + 4 + 8;
constexpr std::size_t kTrailerSize = 4;

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(int v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u64(s.size());
        out_.append(s);
    }
    void vec(const std::vector<double>& v) {
        u64(v.size());
        for (double x : v) f64(x);
    }
    void strings(const std::vector<std::string>& v) {
        u64(v.size());
        for (const auto& s : v) str(s);
    }
    std::string& bytes() { return out_; }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
        return v;
    }
    int i32() { return static_cast<int>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    bool flag() {
        const std::uint8_t v = u8();
        if (v > 1) fail(ErrorCode::parse_error, "corrupt index: bad flag byte");
        return v == 1;
    }
    std::size_t count() {
        const std::uint64_t n = u64();
        if (n > data_.size() - pos_) fail(ErrorCode::parse_error, "corrupt index: element count exceeds payload");
        return static_cast<std::size_t>(n);
    }
    std::string str() {
        const std::size_t n = count();
        std::string s(data_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    std::vector<double> vec() {
        std::vector<double> v(count());
        for (double& x : v) x = f64();
        return v;
    }
    std::vector<std::string> strings() {
        std::vector<std::string> v(count());
        for (auto& s : v) s = str();
        return v;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) fail(ErrorCode::parse_error, "corrupt index: section overruns payload");
    }

    std::string_view data_;
    std::size_t pos_ = 0;
};

std::uint32_t crc(std::string_view bytes) {
    uLong value = crc32(0L, Z_NULL, 0);
    value = crc32(value, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(value);
}

void write_schema(Writer& w, const FeatureSchema& schema) {
    w.u64(schema.blocks.size());
    for (const auto& block : schema.blocks) {
        w.str(block.name);
        w.u64(block.dimension);
    }
    w.u64(schema.bounds.size());
    for (const auto& b : schema.bounds) {
        w.f64(b.min);
        w.f64(b.max);
    }
}

FeatureSchema read_schema(Reader& r) {
    FeatureSchema schema;
    schema.blocks.resize(r.count());
    for (auto& block : schema.blocks) {
        block.name = r.str();
        block.dimension = static_cast<std::size_t>(r.u64());
    }
    schema.bounds.resize(r.count());
    for (auto& b : schema.bounds) {
        b.min = r.f64();
        b.max = r.f64();
    }
    return schema;
}

void write_box(Writer& w, const BoundingBox& box) {
    w.i32(box.x0);
    w.i32(box.y0);
    w.i32(box.x1);
    w.i32(box.y1);
}

BoundingBox read_box(Reader& r) {
    BoundingBox box;
    box.x0 = r.i32();
    box.y0 = r.i32();
    box.x1 = r.i32();
    box.y1 = r.i32();
    return box;
}

}  // namespace

std::string encode_index(const Catalog& catalog, IndexManifest* manifest) {
    Writer w;
    w.u64(catalog.images().size());
    w.u64(catalog.regions().size());
    w.u64(catalog.terms().size());
    w.u64(catalog.associations().size());
    w.u64(catalog.categories().size());
    write_schema(w, catalog.schema());

    for (const auto& [id, image] : catalog.images()) {
        w.u64(id.value);
        w.str(image.key);
        w.str(image.source_uri);
        w.i32(image.width);
        w.i32(image.height);
        w.u64(image.region_ids.size());
        for (RegionId rid : image.region_ids) w.u64(rid.value);
        w.strings(image.ground_truth_keywords);
    }
    for (const auto& [id, region] : catalog.regions()) {
        w.u64(id.value);
        w.u64(region.image_id.value);
        w.str(region.key);
        write_box(w, region.geometry.box);
        w.u8(region.geometry.mask ? 1 : 0);
        if (region.geometry.mask) {
            w.u64(region.geometry.mask->runs.size());
            for (const auto& run : region.geometry.mask->runs) {
                w.i32(run.y);
                w.i32(run.x);
                w.i32(run.length);
            }
        }
        w.vec(region.features);
        w.u8(region.category_id ? 1 : 0);
        if (region.category_id) w.u64(region.category_id->value);
        w.strings(region.labels);
    }
    for (const auto& [id, term] : catalog.terms()) {
        w.u64(id.value);
        w.str(term.label);
        w.u8(term.parent_id ? 1 : 0);
        if (term.parent_id) w.u64(term.parent_id->value);
    }
    for (const auto& [key, a] : catalog.associations()) {
        w.u64(a.term_id.value);
        w.u64(a.region_id.value);
        w.i32(a.d_conf);
        w.u8(a.origin == Origin::manual ? 1 : 0);
        w.u64(a.pos_events);
        w.u64(a.neg_events);
    }
    for (const auto& [id, category] : catalog.categories()) {
        w.u64(id.value);
        w.u64(category.member_region_ids.size());
        for (RegionId rid : category.member_region_ids) w.u64(rid.value);
        w.vec(category.centroid);
    }
    w.u64(catalog.ledger().size());
    for (const auto& [key, row] : catalog.ledger()) {
        w.u64(key.first.value);
        w.u64(key.second.value);
        w.u64(row.manual_count);
        w.u64(row.pos_events);
        w.u64(row.neg_events);
    }

    const std::string payload = std::move(w.bytes());
    Writer file;
    file.bytes().append(kMagic, sizeof kMagic);
    file.u32(kIndexFormatVersion);
    file.u64(payload.size());
    file.bytes().append(payload);
    const std::uint32_t checksum = crc(payload);
    file.u32(checksum);

    if (manifest) {
        *manifest = IndexManifest{kIndexFormatVersion,
                                  catalog.schema(),
                                  catalog.images().size(),
                                  catalog.regions().size(),
                                  catalog.terms().size(),
                                  catalog.associations().size(),
                                  catalog.categories().size(),
                                  checksum};
    }
    return std::move(file.bytes());
}

Catalog decode_index(const std::string& bytes, IndexManifest* manifest) {
    if (bytes.size() < kHeaderSize) fail(ErrorCode::partial_file, "index file is truncated (header)");
    if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) fail(ErrorCode::parse_error, "not an index file");
    Reader header(std::string_view(bytes).substr(sizeof kMagic, 12));
    const std::uint32_t version = header.u32();
    const std::uint64_t payload_size = header.u64();
    if (version != kIndexFormatVersion) {
        fail(ErrorCode::version_mismatch, "index format version " + std::to_string(version) + " is not supported");
    }
    if (bytes.size() - kHeaderSize < payload_size + kTrailerSize) {
        fail(ErrorCode::partial_file, "index file is truncated (payload)");
    }
    if (bytes.size() != kHeaderSize + payload_size + kTrailerSize) {
        fail(ErrorCode::parse_error, "index file has trailing bytes");
    }
    const std::string_view payload = std::string_view(bytes).substr(kHeaderSize, payload_size);
    Reader trailer(std::string_view(bytes).substr(kHeaderSize + payload_size, kTrailerSize));
    const std::uint32_t stored = trailer.u32();
    if (stored != crc(payload)) fail(ErrorCode::checksum_mismatch, "index checksum mismatch");

    Reader r(payload);
    IndexManifest info;
    info.version = version;
    info.checksum = stored;
    info.images = r.u64();
    info.regions = r.u64();
    info.terms = r.u64();
    info.associations = r.u64();
    info.categories = r.u64();
    info.schema = read_schema(r);

    Catalog catalog;
    if (!info.schema.blocks.empty()) catalog.set_schema(info.schema);
    for (std::uint64_t i = 0; i < info.images; ++i) {
        ImageRecord image;
        image.id = ImageId{r.u64()};
        image.key = r.str();
        image.source_uri = r.str();
        image.width = r.i32();
        image.height = r.i32();
        image.region_ids.resize(r.count());
        for (auto& rid : image.region_ids) rid = RegionId{r.u64()};
        image.ground_truth_keywords = r.strings();
        catalog.add_image(std::move(image));
    }
    for (std::uint64_t i = 0; i < info.regions; ++i) {
        Region region;
        region.id = RegionId{r.u64()};
        region.image_id = ImageId{r.u64()};
        region.key = r.str();
        region.geometry.box = read_box(r);
        if (r.flag()) {
            RunLengthMask mask;
            mask.runs.resize(r.count());
            for (auto& run : mask.runs) {
                run.y = r.i32();
                run.x = r.i32();
                run.length = r.i32();
            }
            region.geometry.mask = std::move(mask);
        }
        region.features = r.vec();
        if (r.flag()) region.category_id = CategoryId{r.u64()};
        region.labels = r.strings();
        catalog.add_region(std::move(region));
    }
    for (std::uint64_t i = 0; i < info.terms; ++i) {
        Term term;
        term.id = TermId{r.u64()};
        term.label = r.str();
        if (r.flag()) term.parent_id = TermId{r.u64()};
        catalog.restore_term(std::move(term));
    }
    for (std::uint64_t i = 0; i < info.associations; ++i) {
        Association a;
        a.term_id = TermId{r.u64()};
        a.region_id = RegionId{r.u64()};
        a.d_conf = r.i32();
        a.origin = r.flag() ? Origin::manual : Origin::learned;
        a.pos_events = r.u64();
        a.neg_events = r.u64();
        catalog.insert_association(a);
    }
    // Region category ids are re-derived from category membership.
    std::map<RegionId, std::optional<CategoryId>> stored_categories;
    for (const auto& [id, region] : catalog.regions()) stored_categories[id] = region.category_id;
    std::vector<VisualCategory> categories(static_cast<std::size_t>(info.categories));
    for (auto& category : categories) {
        category.id = CategoryId{r.u64()};
        category.member_region_ids.resize(r.count());
        for (auto& rid : category.member_region_ids) rid = RegionId{r.u64()};
        category.centroid = r.vec();
    }
    catalog.set_categories(std::move(categories));
    for (const auto& [id, region] : catalog.regions()) {
        if (region.category_id != stored_categories[id]) fail(ErrorCode::parse_error, "corrupt index: category membership mismatch");
    }
    const std::size_t ledger_rows = r.count();
    for (std::size_t i = 0; i < ledger_rows; ++i) {
        EvidenceKey key{TermId{r.u64()}, CategoryId{r.u64()}};
        EvidenceRow row;
        row.manual_count = r.u64();
        row.pos_events = r.u64();
        row.neg_events = r.u64();
        catalog.ledger()[key] = row;
    }
    if (!r.done()) fail(ErrorCode::parse_error, "corrupt index: unread payload bytes");
    catalog.validate();
    if (manifest) *manifest = std::move(info);
    return catalog;
}

IndexManifest save_index(const Catalog& catalog, const std::filesystem::path& path) {
    catalog.validate();
    IndexManifest manifest;
    const std::string bytes = encode_index(catalog, &manifest);
    std::filesystem::path temp = path;
    temp += ".tmp";
    {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorCode::io_error, "cannot write " + temp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) fail(ErrorCode::io_error, "short write to " + temp.string());
    }
    std::filesystem::rename(temp, path);
    return manifest;
}

Catalog load_index(const std::filesystem::path& path, IndexManifest* manifest) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io_error, "cannot open " + path.string());
    const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return decode_index(bytes, manifest);
}

}  // namespace voir
