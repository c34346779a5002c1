// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>

#include "oracles.hpp"
#include "voir/benchmark.hpp"
#include "voir/error.hpp"
#include "voir/evalstats.hpp"
#include "voir/feedback.hpp"
#include "voir/index_io.hpp"
#include "voir/learning.hpp"
#include "voir/similarity.hpp"

using namespace voir;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int number, bool pass, const std::string& title, const std::string& detail) {
    std::printf("[%s] %2d. %s: %s\n", pass ? "PASS" : "FAIL", number, title.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

void sign_test_table() {
    const auto start = Clock::now();
    struct Cell {
        unsigned plus, minus;
        const char* printed;
    };
    // Enjoyableness and helpfulness rows.
    const Cell cells[] = {{8, 1, "0.0196"}, {8, 1, "0.0196"}, {9, 0, "0.00196"},
                          {9, 0, "0.00196"}, {8, 1, "0.0196"}, {9, 0, "0.00196"}};
    bool ok = true;
    for (const auto& c : cells) ok &= format_p_value(fisher_sign_test(c.plus, c.minus)) == c.printed;
    using boost::multiprecision::cpp_rational;
    ok &= fisher_sign_test_exact(8, 1) == cpp_rational(10, 512);
    ok &= fisher_sign_test_exact(9, 0) == cpp_rational(1, 512);
    const double elapsed = seconds_since(start);
    ok &= elapsed < 1.0;
    report(1, ok, "sign test reproduces the published table",
           fmt("(8,1)->%s (9,0)->%s, exact 10/512 and 1/512, %.4f s (limit 1 s)",
               format_p_value(fisher_sign_test(8, 1)).c_str(), format_p_value(fisher_sign_test(9, 0)).c_str(), elapsed));
}

void counterbalancing() {
    const std::vector<std::vector<std::size_t>> table{{0, 1, 2}, {0, 1, 2}, {0, 1, 2}, {1, 2, 0}, {1, 2, 0},
                                                      {1, 2, 0}, {2, 0, 1}, {2, 0, 1}, {2, 0, 1}};
    const bool ok = counterbalance_plan(9, 3) == table;
    report(2, ok, "counterbalancing plan for 9 subjects and 3 systems", ok ? "all 9 rows match" : "row mismatch");
}

void wilcoxon_fixtures() {
    std::mt19937_64 rng(2024);
    int checked = 0, mismatches = 0;
    while (checked < 200) {
        const std::size_t n = 1 + rng() % 10;
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = static_cast<double>(rng() % 8) / 4.0;
            b[i] = static_cast<double>(rng() % 8) / 4.0;
        }
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) any |= a[i] != b[i];
        if (!any) continue;
        ++checked;
        const bool tail = rng() % 2;
        if (wilcoxon_signed_rank(a, b, tail ? Tail::greater : Tail::less) != oracle::wilcoxon_enumerate(a, b, tail)) {
            ++mismatches;
        }
    }
    report(3, mismatches == 0, "Wilcoxon exact p equals sign-assignment enumeration",
           fmt("%d fixtures, m <= 10, %d mismatches (exact equality)", checked, mismatches));
}

void rocchio_examples() {
    constexpr double tol = 1e-12;
    double worst = 0.0;
    auto err = [&](const FeatureVector& got, const FeatureVector& want) {
        for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::fabs(got[i] - want[i]));
    };
    err(rocchio_update(std::vector<double>{0.3, 0.7}, {}, {}, {0.75, 0.25}), {0.3, 0.7});
    const std::vector<FeatureVector> r1{{0.2, 0.4}};
    err(rocchio_update(std::vector<double>{0.0, 0.0}, r1, {}, {1.0, 0.6}), {0.2, 0.4});
    const std::vector<FeatureVector> r2{{0.3, 0.0}, {0.5, 0.0}};
    const std::vector<FeatureVector> s2{{0.0, 0.2}};
    err(rocchio_update(std::vector<double>{0.1, 0.0}, r2, s2, {0.5, 0.25}), {0.3, 0.0});
    bool ok = worst <= tol;

    // Centroid case: beta 1, gamma 0, zero query.
    std::mt19937_64 rng(4);
    int exact = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<FeatureVector> rel(1 + rng() % 6);
        for (auto& v : rel) v = fixture::random_vector(rng, 5);
        FeatureVector centroid(5, 0.0);
        for (const auto& v : rel)
            for (std::size_t j = 0; j < 5; ++j) centroid[j] += v[j];
        for (double& x : centroid) x /= static_cast<double>(rel.size());
        exact += rocchio_update(FeatureVector(5, 0.0), rel, {}, {1.0, 0.0}) == centroid;
    }
    ok &= exact == 100;
    report(4, ok, "Rocchio update on the worked examples",
           fmt("max error %.3g (limit 1e-12); centroid case exact in %d/100", worst, exact));
}

void intra_weights() {
    std::mt19937_64 rng(55);
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<std::size_t> dims(1 + rng() % 3);
        for (auto& d : dims) d = 1 + rng() % 5;
        const auto schema = fixture::unit_schema(dims);
        const std::size_t dim = schema.total_dimension();
        std::vector<FeatureVector> good(2 + rng() % 7);
        for (auto& v : good) {
            v = fixture::random_vector(rng, dim);
            // Some components constant or nearly so.
            if (rng() % 4 == 0) v[rng() % dim] = 0.5;
        }
        std::vector<double> sigma(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            double mean = 0.0, var = 0.0;
            for (const auto& v : good) mean += v[j];
            mean /= static_cast<double>(good.size());
            for (const auto& v : good) var += (v[j] - mean) * (v[j] - mean);
            sigma[j] = std::sqrt(var / static_cast<double>(good.size()));
        }
        const auto w = reweight_intra(schema, good);
        for (std::size_t b = 0; b < schema.blocks.size(); ++b) {
            const std::size_t off = schema.block_offset(b), n = schema.blocks[b].dimension;
            for (std::size_t x = off; x < off + n; ++x)
                for (std::size_t y = off; y < off + n; ++y)
                    if (sigma[x] < sigma[y] && !(w.values[x] >= w.values[y])) ++violations;
        }
    }
    const auto schema = fixture::unit_schema({3, 4});
    const std::vector<FeatureVector> single{{0.1, 0.5, 0.9, 0.2, 0.3, 0.4, 0.6}};
    const auto u = reweight_intra(schema, single);
    const bool uniform = u.values == std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3, 0.25, 0.25, 0.25, 0.25};
    report(5, violations == 0 && uniform, "intra-block weights order inversely to spread",
           fmt("1000 fixtures, %d ordering violations; single example uniform: %s", violations, uniform ? "exact" : "no"));
}

void rank_oracle() {
    std::mt19937_64 rng(77);
    int order_mismatch = 0;
    double worst = 0.0;
    std::size_t largest = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::size_t> dims(1 + rng() % 3);
        for (auto& d : dims) d = 1 + rng() % 4;
        const auto schema = fixture::unit_schema(dims);
        const std::size_t dim = schema.total_dimension();
        Catalog c;
        c.set_schema(schema);
        // Corpus size drawn up to the 500-region bound.
        const std::size_t target = 1 + rng() % 500;
        std::vector<std::vector<FeatureVector>> images;
        std::size_t regions = 0;
        while (regions < target) {
            auto& img = images.emplace_back(std::min<std::size_t>(1 + rng() % 4, target - regions));
            for (auto& v : img) {
                v = fixture::random_vector(rng, dim);
                // Coarse grid on some corpora to force score ties.
                if (trial % 3 == 0)
                    for (double& x : v) x = std::round(x * 2) / 2;
            }
            regions += img.size();
        }
        largest = std::max(largest, regions);
        fixture::add_images(c, images);

        InterWeights inter{std::vector<double>(dims.size())};
        double total = 0.0;
        for (double& w : inter.values) total += (w = 0.1 + fixture::random_vector(rng, 1)[0]);
        for (double& w : inter.values) w /= total;
        std::vector<ConceptQuery> q;
        for (std::uint64_t t = 1; t <= 1 + rng() % 3; ++t) {
            ConceptQuery cq{TermId{t}, {}};
            for (std::size_t p = 0; p <= rng() % 3; ++p) {
                QueryPoint point{fixture::random_vector(rng, dim), IntraWeights::uniform(schema), TermId{t}, std::nullopt, {}};
                if (trial % 3 == 0)
                    for (double& x : point.point) x = std::round(x * 2) / 2;
                std::vector<FeatureVector> seen(2);
                for (auto& v : seen) v = fixture::random_vector(rng, dim);
                point.intra = reweight_intra(schema, seen);
                cq.points.push_back(point);
            }
            q.push_back(cq);
        }
        const auto got = rank(c, q, inter, kAllResults, Mode::voir3);
        const auto want = oracle::rank(c, q, inter);
        if (got.size() != want.size()) {
            ++order_mismatch;
            continue;
        }
        bool same_order = true;
        for (std::size_t i = 0; i < got.size(); ++i) {
            same_order &= got[i].image_id == want[i].image;
            worst = std::max(worst, std::fabs(got[i].image_score - want[i].score));
        }
        order_mismatch += !same_order;
    }
    report(6, order_mismatch == 0 && worst <= 1e-12 && largest <= 500, "ranking equals the linear-scan oracle",
           fmt("100 corpora (largest %zu regions), %d order mismatches, max score error %.3g (limit 1e-12)", largest,
               order_mismatch, worst));
}

void expansion() {
    Catalog c;
    c.set_schema(fixture::unit_schema({2}));
    const TermId t = c.add_term("target");
    fixture::add_images(c, {{{0.10, 0.10}, {0.90, 0.90}},
                            {{0.12, 0.11}, {0.88, 0.91}},
                            {{0.11, 0.13}, {0.91, 0.87}},
                            {{0.09, 0.12}, {0.90, 0.92}}});
    ClusteringConfig config;
    config.k = 2;
    cluster_regions(c, config);
    set_manual_association(c, t, RegionId{1});
    const std::vector<ConceptSeed> seeds{{t, RegionId{1}}};
    const SessionState s0 = open_session(c, 1, Mode::voir3, seeds);

    const std::vector<FeedbackJudgment> other{{RegionId{4}, Polarity::relevant}};
    const std::vector<FeedbackJudgment> same{{RegionId{3}, Polarity::relevant}};
    const long before = static_cast<long>(s0.concepts[0].points.size());
    const long after_other = static_cast<long>(apply_feedback(c, s0, other).concepts[0].points.size()) - before;
    const long after_same = static_cast<long>(apply_feedback(c, s0, same).concepts[0].points.size()) - before;
    report(7, after_other == 1 && after_same == 0, "query expansion on a two-cluster fixture",
           fmt("other-cluster example %+ld points, same-cluster example %+ld points", after_other, after_same));
}

void benchmark() {
    const auto start = Clock::now();
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 1; s <= 50; ++s) seeds.push_back(s);
    const BenchmarkConfig base;
    const auto result = compare_modes(
        [&](std::uint64_t s) {
            BenchmarkConfig config = base;
            config.seed = s;
            return make_benchmark(config);
        },
        benchmark_terms(base.concepts), seeds, 10);
    const double elapsed = seconds_since(start);
    double m1 = 0, m2 = 0, m3 = 0;
    for (const auto& [mode, mean] : result.mean_precision) {
        (mode == Mode::voir1 ? m1 : mode == Mode::voir2 ? m2 : m3) = mean;
    }
    double p31 = 1.0;
    for (const auto& row : result.rows) {
        if (row.better == Mode::voir3 && row.worse == Mode::voir1) p31 = row.sign_p;
    }
    const bool ok = m3 >= m2 && m2 >= m1 && p31 < 0.05 && elapsed < 120.0;
    std::printf("%s", format_report_table(result).c_str());
    report(8, ok, "simulated-user benchmark, 50 seeds",
           fmt("mean P@10 voir1=%.4f voir2=%.4f voir3=%.4f; VOIR-3 vs VOIR-1 sign p=%.3g (limit 0.05); %.1f s (limit 120 s)",
               m1, m2, m3, p31, elapsed));
}

void learning_loop() {
    Catalog c = make_benchmark({});
    const auto terms = benchmark_terms(8);
    std::size_t after_first = 0, after_tenth = 0;
    const std::size_t initial = count_confident_associations(c);
    for (std::size_t session = 0; session < 10; ++session) {
        const TermId t = *c.term_by_label(terms[session % terms.size()]);
        const SessionTrace trace =
            simulate_session(c, Mode::voir3, OracleUser{t, Granularity::region, 5, session + 1}, 5, 10);
        periodic_update(c, trace.evidence);
        if (session == 0) after_first = count_confident_associations(c);
        after_tenth = count_confident_associations(c);
    }
    c.validate();
    report(9, after_tenth > after_first, "learning loop grows confident associations",
           fmt("d_conf >= 50: start %zu, after 1 session %zu, after 10 sessions %zu", initial, after_first, after_tenth));
}

void persistence() {
    BenchmarkConfig config;
    config.images = 300;
    config.seed = 3;
    Catalog c = make_benchmark(config);
    for (std::size_t session = 0; session < 3; ++session) {
        const SessionTrace trace =
            simulate_session(c, Mode::voir3, OracleUser{TermId{session + 1}, Granularity::region, 5, 9}, 3, 10);
        periodic_update(c, trace.evidence);
    }
    const auto dir = std::filesystem::temp_directory_path() / ("voir_acceptance_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    const auto path = dir / "catalog.idx";
    save_index(c, path);
    const Catalog back = load_index(path);
    const bool equal = back == c;

    std::ifstream in(path, std::ios::binary);
    const std::string bytes{std::istreambuf_iterator<char>(in), {}};
    const auto truncated = dir / "truncated.idx";
    {
        std::ofstream out(truncated, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    Catalog target = back;
    std::string outcome = "loaded without error";
    bool clean = false;
    try {
        target = load_index(truncated);
    } catch (const Error& e) {
        outcome = std::string(to_string(e.code()));
        clean = e.code() == ErrorCode::partial_file && target == back;
    }
    std::filesystem::remove_all(dir);
    report(10, equal && clean, "index round trip and truncated load",
           fmt("%zu images, %zu regions, %zu associations, deep-equal: %s; truncated file -> %s, target untouched: %s",
               c.images().size(), c.regions().size(), c.association_count(), equal ? "yes" : "no", outcome.c_str(),
               clean ? "yes" : "no"));
}

void clustering() {
    BenchmarkConfig config;
    config.seed = 8;
    const Catalog base = make_benchmark(config);
    Catalog a = base, b = base;
    ClusteringConfig cc;
    cc.rng_seed = 123;
    const bool deterministic = cluster_regions(a, cc) == cluster_regions(b, cc) && a == b;

    std::mt19937_64 rng(31);
    std::normal_distribution<double> noise(0.0, 0.03);
    int fixtures = 0, matches = 0;
    while (fixtures < 50) {
        const std::size_t n = 4 + rng() % 9;
        std::vector<FeatureVector> pts;
        for (std::size_t i = 0; i < n; ++i) {
            const bool left = rng() % 2;
            pts.push_back({(left ? 0.2 : 0.8) + noise(rng), 0.5 + noise(rng)});
        }
        std::size_t left = 0;
        for (const auto& p : pts) left += p[0] < 0.5;
        if (left == 0 || left == n) continue;
        ++fixtures;
        ClusteringConfig two;
        two.k = 2;
        two.rng_seed = rng();
        const auto r = kmeans(pts, two);
        std::uint64_t got = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (r.assignment[i] != r.assignment[0]) got |= std::uint64_t{1} << i;
        }
        matches += got == oracle::best_two_partition(pts);
    }
    report(11, deterministic && matches == fixtures, "k-means determinism and optimal two-blob split",
           fmt("repeat run identical: %s; %d/%d two-blob fixtures (4-12 points) match brute force",
               deterministic ? "yes" : "no", matches, fixtures));
}

}  // namespace

int main() {
    const std::pair<int, void (*)()> criteria[] = {{1, sign_test_table}, {2, counterbalancing}, {3, wilcoxon_fixtures},
                                                   {4, rocchio_examples}, {5, intra_weights},   {6, rank_oracle},
                                                   {7, expansion},        {8, benchmark},       {9, learning_loop},
                                                   {10, persistence},     {11, clustering}};
    for (const auto& [number, run] : criteria) {
        try {
            run();
        } catch (const std::exception& e) {
            report(number, false, "criterion raised", e.what());
        }
    }
    std::printf("%d of 11 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
