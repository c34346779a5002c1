#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "voir/error.hpp"
#include "voir/features.hpp"
#include "voir/formats.hpp"
#include "voir/raster_io.hpp"

using namespace voir;

namespace {

ErrorCode code_of(const auto& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::io_error;
}

}  // namespace

TEST_CASE("thesaurus descendants") {
    Catalog c;
    const TermId leaf = c.add_term("leaf");
    CHECK(c.thesaurus_descendants(leaf) == std::vector<TermId>{leaf});

    const TermId a = c.add_term("a");
    const TermId b = c.add_term("b", a);
    const TermId cc = c.add_term("c", b);
    CHECK(c.thesaurus_descendants(a) == std::vector<TermId>{a, b, cc});

    const TermId root = c.add_term("animal");
    const TermId x = c.add_term("bird", root);
    const TermId y = c.add_term("fish", root);
    CHECK(c.thesaurus_descendants(root) == std::vector<TermId>{root, x, y});
}

TEST_CASE("term labels are unique ignoring case and lookups fold case") {
    Catalog c;
    const TermId t = c.add_term("Sky");
    CHECK(c.term_by_label("sKY") == t);
    CHECK(code_of([&] { c.add_term("SKY"); }) == ErrorCode::duplicate_key);
    CHECK(code_of([&] { c.add_term("x", TermId{99}); }) == ErrorCode::not_found);
}

TEST_CASE("conceptual to visual mapping filters by confidence") {
    Catalog c;
    c.set_schema(fixture::unit_schema({1}));
    const TermId t = c.add_term("t");
    CHECK(c.conceptual_to_visual(t).empty());

    const auto ids = fixture::add_images(c, {{{0.1}, {0.2}}, {{0.8}}});
    c.set_categories({{CategoryId{1}, {ids[0]}, {0.1}}, {CategoryId{2}, {ids[1]}, {0.2}}, {CategoryId{3}, {ids[2]}, {0.8}}});
    c.insert_association({t, ids[2], kManualConfidence, Origin::manual, 0, 0});
    CHECK(c.conceptual_to_visual(t, 50) == std::vector<CategoryId>{CategoryId{3}});

    Catalog d = c;
    d.remove_association(t, ids[2]);
    d.insert_association({t, ids[0], 40, Origin::learned, 0, 0});
    d.insert_association({t, ids[1], 67, Origin::learned, 0, 0});
    CHECK(d.conceptual_to_visual(t, 50) == std::vector<CategoryId>{CategoryId{2}});
}

TEST_CASE("catalog rejects bad references and validates") {
    Catalog c;
    c.set_schema(fixture::unit_schema({2}));
    Region orphan;
    orphan.image_id = ImageId{7};
    orphan.key = "r";
    orphan.geometry.box = {0, 0, 1, 1};
    orphan.features = {0, 0};
    CHECK(code_of([&] { c.add_region(orphan); }) == ErrorCode::dangling_key);

    fixture::add_images(c, {{{0.1, 0.2}}});
    CHECK_NOTHROW(c.validate());
    Region empty_box = orphan;
    empty_box.image_id = ImageId{1};
    empty_box.key = "r2";
    empty_box.geometry.box = {3, 3, 3, 4};
    CHECK(code_of([&] { c.add_region(empty_box); }) == ErrorCode::invalid_region);
    CHECK(code_of([&] { c.region(RegionId{42}); }) == ErrorCode::not_found);

    // A manual association must carry full confidence.
    const TermId t = c.add_term("t");
    CHECK(code_of([&] { c.insert_association({t, RegionId{1}, 70, Origin::manual, 0, 0}); }) == ErrorCode::invalid_argument);
}

TEST_CASE("colour histogram of a uniform mid-grey square") {
    RasterImage img(4, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) img.set(x, y, 128, 128, 128);
    const auto v = extract_features(img, {{0, 0, 4, 4}, std::nullopt});
    REQUIRE(v.size() == kColorBins + kShapeDims);
    int nonzero = 0;
    for (std::size_t i = 0; i < kColorBins; ++i) nonzero += v[i] != 0.0;
    CHECK(nonzero == 1);
    CHECK(v[color_bin(128, 128, 128)] == 1.0);
    // Full frame: area 1, centroid at the centre.
    CHECK(v[kColorBins + 0] == 1.0);
    CHECK(v[kColorBins + 3] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(v[kColorBins + 4] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("four distinct corner colours split the histogram evenly") {
    RasterImage img(2, 2);
    img.set(0, 0, 0, 0, 0);
    img.set(1, 0, 255, 0, 0);
    img.set(0, 1, 0, 255, 0);
    img.set(1, 1, 0, 0, 255);
    const auto v = extract_features(img, {{0, 0, 2, 2}, std::nullopt});
    for (auto [r, g, b] : {std::tuple{0, 0, 0}, {255, 0, 0}, {0, 255, 0}, {0, 0, 255}}) {
        CHECK(v[color_bin(r, g, b)] == 0.25);
    }
}

TEST_CASE("shape features of masks") {
    RasterImage img(10, 10);
    // Horizontal bar 8x2 versus a square: the bar is more eccentric.
    RunLengthMask bar{{{4, 1, 8}, {5, 1, 8}}};
    const auto vb = extract_features(img, {{1, 4, 9, 6}, bar});
    const auto vs = extract_features(img, {{3, 3, 7, 7}, std::nullopt});
    CHECK(vb[kColorBins + 0] == doctest::Approx(0.16));
    CHECK(vs[kColorBins + 0] == doctest::Approx(0.16));
    CHECK(vb[kColorBins + 2] > vs[kColorBins + 2]);
    CHECK(vs[kColorBins + 2] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(vs[kColorBins + 1] > vb[kColorBins + 1]);
    CHECK(vb[kColorBins + 3] == doctest::Approx(0.5));
    CHECK(vb[kColorBins + 4] == doctest::Approx(0.5));

    CHECK(code_of([&] { extract_features(img, {{5, 5, 12, 8}, std::nullopt}); }) == ErrorCode::invalid_region);
    CHECK(code_of([&] { extract_features(img, {{1, 1, 3, 3}, RunLengthMask{}}); }) == ErrorCode::invalid_region);
}

TEST_CASE("min-max normalization") {
    const FeatureSchema raw{{{"a", 1}}, {}};
    auto one = normalize_corpus(raw, {{3.5}});
    CHECK(one.vectors[0][0] == 0.0);
    CHECK(one.schema.bounds[0] == Bounds{3.5, 3.5});

    auto three = normalize_corpus(raw, {{0}, {5}, {10}});
    CHECK(three.vectors[0][0] == 0.0);
    CHECK(three.vectors[1][0] == 0.5);
    CHECK(three.vectors[2][0] == 1.0);

    auto unit = normalize_corpus(FeatureSchema{{{"a", 2}}, {}}, {{0, 1}, {1, 0}, {0.25, 0.75}});
    CHECK(unit.vectors[2] == FeatureVector{0.25, 0.75});
    CHECK(apply_bounds(three.schema, {20}) == FeatureVector{1.0});
}

TEST_CASE("PPM decoding round trip and truncation") {
    RasterImage img(3, 2);
    img.set(2, 1, 10, 20, 30);
    const auto path = std::filesystem::temp_directory_path() / "voir_test.ppm";
    write_ppm(path, img);
    const RasterImage back = read_raster(path);
    CHECK(back.width == 3);
    CHECK(back.pixels == img.pixels);
    std::ifstream in(path, std::ios::binary);
    std::string bytes{std::istreambuf_iterator<char>(in), {}};
    CHECK(code_of([&] { decode_ppm(bytes.substr(0, bytes.size() - 4)); }) == ErrorCode::partial_file);
    std::filesystem::remove(path);
}

TEST_CASE("precomputed feature import") {
    std::istringstream empty("");
    CHECK(parse_features(empty).empty());

    Catalog c;
    std::istringstream ann("img1\tsky,water\n# comment\n\nimg2\tbird\n");
    std::istringstream feats(
        "img1\tr1\t0,0,4,4\tcolor=0.1,0.2\tshape=1\n"
        "img1\tr2\t4,0,8,6\tcolor=0.3,0.4\tshape=3\n");
    const auto summary = import_precomputed(c, parse_annotations(ann), parse_features(feats));
    CHECK(summary.regions == 2);
    const auto img = c.image_by_key("img1");
    REQUIRE(img);
    CHECK(c.image(*img).region_ids.size() == 2);
    CHECK(c.image(*img).width == 8);
    CHECK(c.region(*c.region_by_key("r2")).features == FeatureVector{1.0, 1.0, 1.0});
    CHECK_NOTHROW(c.validate());

    Catalog d;
    std::istringstream ann2("img1\tsky\n");
    std::istringstream dangling("img9\tr1\t0,0,4,4\tcolor=0.1\n");
    CHECK(code_of([&] { import_precomputed(d, parse_annotations(ann2), parse_features(dangling)); }) ==
          ErrorCode::dangling_key);
    CHECK(d.regions().empty());
}

TEST_CASE("thesaurus loading") {
    Catalog c;
    std::istringstream in("bird\tanimal\nanimal\t\nsparrow\tbird\n");
    load_thesaurus(c, parse_thesaurus(in));
    const auto animal = c.term_by_label("animal");
    REQUIRE(animal);
    CHECK(c.thesaurus_descendants(*animal).size() == 3);

    Catalog d;
    std::istringstream cycle("a\tb\nb\ta\n");
    CHECK_THROWS_AS(load_thesaurus(d, parse_thesaurus(cycle)), Error);
    Catalog e;
    std::istringstream unknown("a\tzzz\n");
    CHECK_THROWS_AS(load_thesaurus(e, parse_thesaurus(unknown)), Error);
}
