#include <doctest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "voir/benchmark.hpp"
#include "voir/error.hpp"
#include "voir/learning.hpp"

using namespace voir;

namespace {

std::vector<FeatureVector> two_blobs(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> noise(0.0, 0.02);
    std::vector<FeatureVector> pts;
    for (std::size_t i = 0; i < n; ++i) {
        const double cx = rng() % 2 ? 0.2 : 0.8;
        const double cy = 0.3;
        pts.push_back({cx + noise(rng), cy + noise(rng)});
    }
    return pts;
}

Catalog clustered(std::vector<std::vector<FeatureVector>> images, std::size_t k) {
    Catalog c;
    c.set_schema(fixture::unit_schema({2}));
    c.add_term("t");
    c.add_term("u");
    fixture::add_images(c, images);
    ClusteringConfig config;
    config.k = k;
    cluster_regions(c, config);
    return c;
}

}  // namespace

TEST_CASE("k-means extremes") {
    const std::vector<FeatureVector> pts{{0.1, 0.2}, {0.5, 0.4}, {0.9, 0.0}};
    ClusteringConfig one;
    one.k = 1;
    const auto r1 = kmeans(pts, one);
    CHECK(r1.centroids.size() == 1);
    CHECK(r1.centroids[0][0] == doctest::Approx(0.5));
    CHECK(r1.centroids[0][1] == doctest::Approx(0.2));

    ClusteringConfig all;
    all.k = 3;
    const auto r3 = kmeans(pts, all);
    std::set<std::size_t> distinct(r3.assignment.begin(), r3.assignment.end());
    CHECK(distinct.size() == 3);
    CHECK(auto_cluster_count(1) == 1);
    CHECK(auto_cluster_count(400) == 14);
}

TEST_CASE("k-means finds the optimal two-blob split") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto pts = two_blobs(rng, 4 + rng() % 9);
        std::size_t left = 0;
        for (const auto& p : pts) left += p[0] < 0.5;
        if (left == 0 || left == pts.size()) continue;
        ClusteringConfig config;
        config.k = 2;
        config.rng_seed = rng();
        const auto r = kmeans(pts, config);
        const std::uint64_t expected = oracle::best_two_partition(pts);
        std::uint64_t got = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (r.assignment[i] != r.assignment[0]) got |= std::uint64_t{1} << i;
        }
        CHECK(got == expected);
    }
}

TEST_CASE("k-means is deterministic") {
    std::mt19937_64 rng(9);
    std::vector<FeatureVector> pts;
    for (int i = 0; i < 60; ++i) pts.push_back(fixture::random_vector(rng, 4));
    ClusteringConfig config;
    config.k = 5;
    config.rng_seed = 77;
    const auto a = kmeans(pts, config);
    const auto b = kmeans(pts, config);
    CHECK(a.assignment == b.assignment);
    CHECK(a.centroids == b.centroids);
}

TEST_CASE("manual associations") {
    Catalog c = clustered({{{0.1, 0.1}, {0.12, 0.1}}, {{0.9, 0.9}}}, 2);
    const TermId t{1};
    const auto a = set_manual_association(c, t, RegionId{1});
    CHECK(a.d_conf == 100);
    CHECK(a.origin == Origin::manual);
    CHECK_THROWS_AS(set_manual_association(c, t, RegionId{1}), Error);

    // Same-category member received a learned association (2/3).
    const Association* learned = c.find_association(t, RegionId{2});
    REQUIRE(learned);
    CHECK(learned->d_conf == 67);
    CHECK(learned->origin == Origin::learned);
    CHECK_FALSE(c.find_association(t, RegionId{3}));

    set_manual_association(c, t, RegionId{2});
    CHECK(c.find_association(t, RegionId{2})->origin == Origin::manual);
    CHECK(c.find_association(t, RegionId{2})->d_conf == 100);
}

TEST_CASE("learned confidence rule") {
    CHECK(learned_confidence({1, 0, 0}) == 67);
    CHECK(learned_confidence({0, 0, 5}) == 0);
    CHECK(learned_confidence({1, 3, 1}) == 71);
}

TEST_CASE("evidence accumulates per term and category") {
    Catalog c = clustered({{{0.1, 0.1}, {0.12, 0.1}, {0.11, 0.12}}, {{0.9, 0.9}}}, 2);
    const TermId t{1};
    auto row = record_feedback_evidence(c, t, RegionId{1}, Polarity::relevant);
    CHECK(row.pos_events == 1);
    row = record_feedback_evidence(c, t, RegionId{1}, Polarity::non_relevant);
    CHECK(row.pos_events == 1);
    CHECK(row.neg_events == 1);

    Catalog d = clustered({{{0.1, 0.1}, {0.12, 0.1}, {0.11, 0.12}}, {{0.9, 0.9}}}, 2);
    for (std::uint64_t r = 1; r <= 3; ++r) record_feedback_evidence(d, t, RegionId{r}, Polarity::relevant);
    const auto category = *d.region(RegionId{1}).category_id;
    CHECK(d.ledger().size() == 1);
    CHECK(d.ledger().at({t, category}).pos_events == 3);
}

TEST_CASE("periodic update") {
    Catalog c = clustered({{{0.1, 0.1}, {0.12, 0.1}, {0.11, 0.12}}, {{0.9, 0.9}, {0.88, 0.9}}}, 2);
    const Catalog before = c;
    const auto none = periodic_update(c, {});
    CHECK(none.events == 0);
    CHECK(c == before);

    const TermId t{1};
    const std::vector<ResolvedJudgment> two{{t, RegionId{1}, Polarity::relevant}, {t, RegionId{2}, Polarity::relevant}};
    const auto s = periodic_update(c, two);
    CHECK(s.touched.size() == 1);
    // P = 2, N = 0: round(200 / 3) = 67 on every member of the category.
    for (std::uint64_t r = 1; r <= 3; ++r) CHECK(c.find_association(t, RegionId{r})->d_conf == 67);
    CHECK_FALSE(c.find_association(t, RegionId{4}));

    const std::vector<ResolvedJudgment> spread{{TermId{2}, RegionId{1}, Polarity::relevant},
                                               {TermId{2}, RegionId{4}, Polarity::relevant}};
    const auto s2 = periodic_update(c, spread);
    CHECK(s2.touched.size() == 2);
    for (std::uint64_t r = 1; r <= 5; ++r) CHECK(c.find_association(TermId{2}, RegionId{r})->d_conf == 50);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("re-clustering keeps the ledger attached to its members") {
    Catalog c = clustered({{{0.1, 0.1}, {0.12, 0.1}}, {{0.9, 0.9}, {0.88, 0.9}}}, 2);
    set_manual_association(c, TermId{1}, RegionId{3});
    ClusteringConfig config;
    config.k = 2;
    config.rng_seed = 3;
    cluster_regions(c, config);
    const auto category = *c.region(RegionId{3}).category_id;
    CHECK(c.ledger().at({TermId{1}, category}).manual_count == 1);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("unclustered regions cannot take evidence") {
    Catalog c;
    c.set_schema(fixture::unit_schema({1}));
    c.add_term("t");
    fixture::add_images(c, {{{0.5}}});
    CHECK_THROWS_AS(record_feedback_evidence(c, TermId{1}, RegionId{1}, Polarity::relevant), Error);
}

TEST_CASE("benchmark corpus is reproducible") {
    BenchmarkConfig config;
    config.seed = 4;
    const Catalog a = make_benchmark(config);
    const Catalog b = make_benchmark(config);
    CHECK(a == b);
    CHECK(a.images().size() == 100);
    CHECK(a.regions().size() == 400);
    CHECK(a.categories().size() == 14);
    CHECK_NOTHROW(a.validate());
}
