#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "voir/benchmark.hpp"
#include "voir/error.hpp"
#include "voir/evalstats.hpp"

using namespace voir;

TEST_CASE("precision at k") {
    const std::vector<ImageId> ranked{ImageId{1}, ImageId{2}, ImageId{3}, ImageId{4}, ImageId{5},
                                      ImageId{6}, ImageId{7}, ImageId{8}, ImageId{9}, ImageId{10}};
    CHECK(precision_at_k(ranked, {ranked.begin(), ranked.end()}, 10) == 1.0);
    CHECK(precision_at_k(ranked, {ImageId{99}}, 10) == 0.0);
    CHECK(precision_at_k(ranked, {ImageId{2}, ImageId{5}, ImageId{9}, ImageId{11}}, 10) == doctest::Approx(0.3));
    // Order below the cutoff is irrelevant.
    std::vector<ImageId> shuffled = ranked;
    std::swap(shuffled[0], shuffled[2]);
    CHECK(precision_at_k(shuffled, {ImageId{1}}, 3) == precision_at_k(ranked, {ImageId{1}}, 3));
}

TEST_CASE("wilcoxon small cases") {
    const std::vector<double> a{5, 6, 7, 8, 9}, b{1, 1, 1, 1, 1.5};
    CHECK(wilcoxon_signed_rank(a, b, Tail::greater) == 1.0 / 32);
    CHECK(wilcoxon_signed_rank(a, b, Tail::less) == 1.0);
    CHECK_THROWS_AS(wilcoxon_signed_rank(a, a, Tail::greater), Error);
}

TEST_CASE("wilcoxon exact path matches enumeration") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng() % 12;
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            // Coarse values so ties and zeros occur.
            a[i] = static_cast<double>(rng() % 6);
            b[i] = static_cast<double>(rng() % 6);
        }
        if (a == b) continue;
        bool all_zero = true;
        for (std::size_t i = 0; i < n; ++i) all_zero &= a[i] == b[i];
        if (all_zero) continue;
        CHECK(wilcoxon_signed_rank(a, b, Tail::greater) == oracle::wilcoxon_enumerate(a, b, true));
        CHECK(wilcoxon_signed_rank(a, b, Tail::less) == oracle::wilcoxon_enumerate(a, b, false));
    }
}

TEST_CASE("wilcoxon normal approximation is close to exact for large samples") {
    // m = 22 all-distinct: compare the approximation with exact enumeration.
    std::vector<double> a, b;
    for (int i = 1; i <= 22; ++i) {
        a.push_back(i % 3 == 0 ? -i : i);
        b.push_back(0);
    }
    const double approx = wilcoxon_signed_rank(a, b, Tail::greater);
    const double exact = oracle::wilcoxon_enumerate(a, b, true);
    CHECK(approx == doctest::Approx(exact).epsilon(0.05));
}

TEST_CASE("sign test") {
    CHECK(fisher_sign_test_exact(8, 1) == boost::multiprecision::cpp_rational(10, 512));
    CHECK(fisher_sign_test_exact(9, 0) == boost::multiprecision::cpp_rational(1, 512));
    CHECK(fisher_sign_test(0, 1) == 1.0);
    CHECK(format_p_value(fisher_sign_test(8, 1)) == "0.0196");
    CHECK(format_p_value(fisher_sign_test(9, 0)) == "0.00196");
    for (unsigned n = 1; n <= 40; ++n) {
        CHECK(fisher_sign_test_exact(n, 0) == boost::multiprecision::cpp_rational(1, boost::multiprecision::cpp_int(1) << n));
        for (unsigned k = 0; k <= n; ++k) {
            const auto [num, den] = oracle::binomial_tail(k, n);
            CHECK(fisher_sign_test_exact(k, n - k) == boost::multiprecision::cpp_rational(num, den));
        }
    }
    CHECK_THROWS_AS(fisher_sign_test(0, 0), Error);
}

TEST_CASE("p-value formatting") {
    CHECK(format_p_value(1.0) == "1");
    CHECK(format_p_value(0.5) == "0.5");
    CHECK(format_p_value(0.25) == "0.25");
    CHECK(format_p_value(0.0625) == "0.0625");
}

TEST_CASE("counterbalancing") {
    const auto plan = counterbalance_plan(9, 3);
    REQUIRE(plan.size() == 9);
    for (std::size_t s = 0; s < 9; ++s) {
        const std::size_t g = s / 3;
        CHECK(plan[s] == std::vector<std::size_t>{g % 3, (g + 1) % 3, (g + 2) % 3});
    }
    const auto small = counterbalance_plan(3, 3);
    CHECK(small[1] == std::vector<std::size_t>{1, 2, 0});
    CHECK_THROWS_AS(counterbalance_plan(4, 3), Error);
}

TEST_CASE("simulated sessions") {
    const Catalog c = make_benchmark({});
    const TermId t = *c.term_by_label("tree");
    OracleUser user{t, Granularity::region, 5, 1};
    CHECK(simulate_session(c, Mode::voir1, user, 7, 10).iterations.size() == 1);
    const auto three = simulate_session(c, Mode::voir3, user, 3, 10);
    CHECK(three.iterations.size() == 3);
    CHECK(three.evidence.size() <= 10);

    OracleUser silent{t, Granularity::image, 0, 1};
    const auto flat = simulate_session(c, Mode::voir2, silent, 4, 10);
    for (const auto& it : flat.iterations) CHECK(it.precision == flat.iterations[0].precision);

    // Reproducible for a fixed corpus and seed.
    user.granularity = Granularity::image;
    const auto x = simulate_session(c, Mode::voir2, user, 4, 10);
    const auto y = simulate_session(c, Mode::voir2, user, 4, 10);
    CHECK(x.evidence == y.evidence);
    CHECK(x.final_precision() == y.final_precision());

    Catalog bare = c;
    const TermId orphan = bare.add_term("orphan");
    try {
        simulate_session(bare, Mode::voir3, OracleUser{orphan, Granularity::region, 5, 1}, 3, 10);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::cannot_compose_query);
    }
}

TEST_CASE("comparison report") {
    const std::vector<double> same(12, 0.5);
    const auto flat = build_report(same, same, same);
    for (const auto& row : flat.rows) {
        CHECK(row.no_evidence);
        CHECK(row.sign_p == 1.0);
    }
    CHECK(format_report_table(flat).find("no evidence") != std::string::npos);

    // 8 wins, 1 loss, 3 ties.
    std::vector<double> lo(12, 0.5), hi(12, 0.5);
    for (int i = 0; i < 8; ++i) hi[i] = 0.7;
    hi[8] = 0.3;
    const auto report = build_report(lo, hi, hi);
    CHECK(report.rows[0].plus == 8);
    CHECK(report.rows[0].minus == 1);
    CHECK(format_p_value(report.rows[0].sign_p) == "0.0196");
    CHECK(format_report_csv(report).rfind("pair,plus,minus,sign_p,wilcoxon_p\n", 0) == 0);
    CHECK(format_report_csv(report).find("VOIR-2 vs VOIR-1,8,1,0.01953125,") != std::string::npos);

    CHECK_THROWS_AS(compare_modes([](std::uint64_t) { return make_benchmark({}); }, {"tree"}, {1, 2, 3}, 10), Error);
}
