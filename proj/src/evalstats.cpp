#include "voir/evalstats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "voir/error.hpp"

namespace voir {

namespace bmp = boost::multiprecision;

double precision_at_k(std::span<const ImageId> ranked, const std::set<ImageId>& relevant, std::size_t k) {
    if (k == 0) fail(ErrorCode::invalid_argument, "precision@k needs k >= 1");
    const std::size_t depth = std::min(k, ranked.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < depth; ++i) hits += relevant.count(ranked[i]);
    return static_cast<double>(hits) / static_cast<double>(k);
}

double wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, Tail tail) {
    if (a.size() != b.size() || a.empty()) fail(ErrorCode::invalid_argument, "paired samples must have equal nonzero length");
    std::vector<double> diffs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0) diffs.push_back(d);
    }
    const std::size_t m = diffs.size();
    if (m == 0) fail(ErrorCode::degenerate_sample, "all paired differences are zero");

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return std::abs(diffs[x]) < std::abs(diffs[y]); });

    // Doubled average ranks keep tied ranks integral.
    std::vector<std::uint64_t> rank2(m);
    double tie_term = 0.0;
    for (std::size_t start = 0; start < m;) {
        std::size_t end = start;
        while (end + 1 < m && std::abs(diffs[order[end + 1]]) == std::abs(diffs[order[start]])) ++end;
        const std::uint64_t doubled = (start + 1) + (end + 1);
        for (std::size_t i = start; i <= end; ++i) rank2[order[i]] = doubled;
        const double t = static_cast<double>(end - start + 1);
        tie_term += t * t * t - t;
        start = end + 1;
    }
    std::uint64_t w_plus2 = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (diffs[i] > 0.0) w_plus2 += rank2[i];
    }

    if (m <= kWilcoxonExactLimit) {
        // Null distribution of the doubled W+ by dynamic programming over signs.
        const std::uint64_t total = std::accumulate(rank2.begin(), rank2.end(), std::uint64_t{0});
        std::vector<std::uint64_t> ways(total + 1, 0);
        ways[0] = 1;
        for (std::uint64_t r : rank2) {
            for (std::uint64_t s = total; s >= r; --s) {
                ways[s] += ways[s - r];
                if (s == r) break;
            }
        }
        std::uint64_t tail_count = 0;
        for (std::uint64_t s = 0; s <= total; ++s) {
            if ((tail == Tail::greater && s >= w_plus2) || (tail == Tail::less && s <= w_plus2)) tail_count += ways[s];
        }
        return static_cast<double>(tail_count) / std::ldexp(1.0, static_cast<int>(m));
    }

    const double md = static_cast<double>(m);
    const double w_plus = static_cast<double>(w_plus2) / 2.0;
    const double mean = md * (md + 1.0) / 4.0;
    const double var = md * (md + 1.0) * (2.0 * md + 1.0) / 24.0 - tie_term / 48.0;
    const double sd = std::sqrt(var);
    if (tail == Tail::greater) {
        const double z = (w_plus - mean - 0.5) / sd;
        return 0.5 * std::erfc(z / std::sqrt(2.0));
    }
    const double z = (w_plus - mean + 0.5) / sd;
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

bmp::cpp_rational fisher_sign_test_exact(std::uint64_t n_plus, std::uint64_t n_minus) {
    const std::uint64_t n = n_plus + n_minus;
    if (n == 0) fail(ErrorCode::invalid_argument, "sign test needs at least one untied pair");
    bmp::cpp_int binom = 1;  // C(n, i), walked upward from i = 0
    bmp::cpp_int tail = 0;
    for (std::uint64_t i = 0; i <= n; ++i) {
        if (i >= n_plus) tail += binom;
        binom = binom * (n - i) / (i + 1);
    }
    bmp::cpp_int denominator = 1;
    denominator <<= static_cast<unsigned>(n);
    return bmp::cpp_rational(tail, denominator);
}

double fisher_sign_test(std::uint64_t n_plus, std::uint64_t n_minus) {
    return fisher_sign_test_exact(n_plus, n_minus).convert_to<double>();
}

std::string format_p_value(double p) {
    if (!(p > 0.0)) return "0";
    const int exponent = static_cast<int>(std::floor(std::log10(p)));
    const double scale = std::pow(10.0, 2 - exponent);
    const double scaled = p * scale;
    // Guard against representation noise pushing an exact value up a digit.
    const double up = std::ceil(scaled - 1e-9 * scaled) / scale;
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.3g", up);
    return buffer;
}

std::vector<std::vector<std::size_t>> counterbalance_plan(std::size_t n_subjects, std::size_t n_systems) {
    if (n_systems == 0 || n_subjects == 0 || n_subjects % n_systems != 0) {
        fail(ErrorCode::invalid_config, "subject count must be a positive multiple of the system count");
    }
    const std::size_t group_size = n_subjects / n_systems;
    std::vector<std::vector<std::size_t>> plan(n_subjects, std::vector<std::size_t>(n_systems));
    for (std::size_t s = 0; s < n_subjects; ++s) {
        const std::size_t group = s / group_size;
        for (std::size_t t = 0; t < n_systems; ++t) plan[s][t] = (group + t) % n_systems;
    }
    return plan;
}

std::set<ImageId> relevant_images(const Catalog& catalog, TermId term) {
    const std::string target = fold_case(catalog.term(term).label);
    std::set<ImageId> out;
    for (const auto& [id, image] : catalog.images()) {
        for (const auto& kw : image.ground_truth_keywords) {
            if (fold_case(kw) == target) {
                out.insert(id);
                break;
            }
        }
    }
    return out;
}

namespace {

bool region_is_relevant(const Catalog& catalog, RegionId region_id, const std::string& target, const std::set<ImageId>& images) {
    const Region& r = catalog.region(region_id);
    if (r.labels.empty()) return images.count(r.image_id) > 0;
    return std::any_of(r.labels.begin(), r.labels.end(), [&](const std::string& l) { return fold_case(l) == target; });
}

RegionId initial_example(const Catalog& catalog, TermId term, std::uint64_t seed) {
    const auto associations = catalog.associations_for_term(term);
    if (associations.empty()) {
        fail(ErrorCode::cannot_compose_query, "term '" + catalog.term(term).label + "' has no associated example region");
    }
    int best = -1;
    std::vector<RegionId> tied;
    for (const auto& a : associations) {
        if (a.d_conf > best) {
            best = a.d_conf;
            tied.clear();
        }
        if (a.d_conf == best) tied.push_back(a.region_id);
    }
    std::mt19937_64 rng(seed);
    return tied[std::uniform_int_distribution<std::size_t>(0, tied.size() - 1)(rng)];
}

}  // namespace

SessionTrace simulate_session(const Catalog& catalog, Mode mode, const OracleUser& oracle, std::size_t max_iterations,
                              std::size_t k) {
    if (max_iterations == 0) fail(ErrorCode::invalid_config, "a session needs at least one iteration");
    if (mode != Mode::voir1 && !mode_permits(mode, oracle.granularity)) {
        fail(ErrorCode::invalid_config, "oracle granularity is not legal for " + std::string(to_string(mode)));
    }
    const std::string target = fold_case(catalog.term(oracle.target_term_id).label);
    const std::set<ImageId> relevant = relevant_images(catalog, oracle.target_term_id);
    const ConceptSeed seed{oracle.target_term_id, initial_example(catalog, oracle.target_term_id, oracle.rng_seed)};
    SessionState session = open_session(catalog, oracle.rng_seed, mode, std::span(&seed, 1));

    SessionTrace trace;
    trace.mode = mode;
    std::set<ImageId> judged;
    const std::size_t iterations = mode == Mode::voir1 ? 1 : max_iterations;
    for (std::size_t it = 0; it < iterations; ++it) {
        // VOIR-3 is needed internally to learn which region the oracle sees.
        const auto results = rank(catalog, session.concepts, session.inter, kAllResults,
                                  mode == Mode::voir3 ? Mode::voir3 : Mode::voir1);
        IterationRecord record;
        for (const auto& r : results) record.ranked.push_back(r.image_id);
        record.precision = precision_at_k(record.ranked, relevant, k);
        if (it + 1 < iterations) {
            for (const auto& r : results) {
                if (record.judgments.size() >= oracle.judgments_per_iteration) break;
                if (!judged.insert(r.image_id).second) continue;
                if (mode == Mode::voir2) {
                    const Polarity p = relevant.count(r.image_id) ? Polarity::relevant : Polarity::non_relevant;
                    record.judgments.push_back({r.image_id, p});
                } else {
                    const RegionId shown = *r.concepts.front().best_region_id;
                    const Polarity p = region_is_relevant(catalog, shown, target, relevant) ? Polarity::relevant
                                                                                            : Polarity::non_relevant;
                    record.judgments.push_back({shown, p});
                }
            }
            session = apply_feedback(catalog, session, record.judgments);
        }
        trace.iterations.push_back(std::move(record));
    }
    trace.evidence = session.evidence;
    return trace;
}

ComparisonReport build_report(const std::vector<double>& voir1, const std::vector<double>& voir2,
                              const std::vector<double>& voir3) {
    if (voir1.size() != voir2.size() || voir1.size() != voir3.size() || voir1.empty()) {
        fail(ErrorCode::invalid_argument, "paired score sets must share one nonzero length");
    }
    ComparisonReport report;
    report.samples = voir1.size();
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); };
    report.mean_precision = {{Mode::voir1, mean(voir1)}, {Mode::voir2, mean(voir2)}, {Mode::voir3, mean(voir3)}};

    auto row = [](Mode better, Mode worse, const std::vector<double>& a, const std::vector<double>& b) {
        PairRow r{better, worse, 0, 0, 1.0, 1.0, false};
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] > b[i]) ++r.plus;
            if (a[i] < b[i]) ++r.minus;
        }
        if (r.plus + r.minus == 0) {
            r.no_evidence = true;
            return r;
        }
        r.sign_p = fisher_sign_test(r.plus, r.minus);
        r.wilcoxon_p = wilcoxon_signed_rank(a, b, Tail::greater);
        return r;
    };
    report.rows.push_back(row(Mode::voir2, Mode::voir1, voir2, voir1));
    report.rows.push_back(row(Mode::voir3, Mode::voir2, voir3, voir2));
    report.rows.push_back(row(Mode::voir3, Mode::voir1, voir3, voir1));
    return report;
}

ComparisonReport compare_modes(const CorpusFactory& corpus, const std::vector<std::string>& term_labels,
                               const std::vector<std::uint64_t>& seeds, std::size_t k, const CompareOptions& options) {
    if (seeds.size() < 10) fail(ErrorCode::invalid_config, "mode comparison needs at least 10 seeds");
    if (term_labels.empty()) fail(ErrorCode::invalid_config, "mode comparison needs at least one term");
    std::vector<double> scores[3];
    for (std::uint64_t seed : seeds) {
        const Catalog catalog = corpus(seed);
        for (const auto& label : term_labels) {
            const auto term = catalog.term_by_label(label);
            if (!term) fail(ErrorCode::not_found, "unknown term '" + label + "'");
            const Mode modes[3] = {Mode::voir1, Mode::voir2, Mode::voir3};
            for (std::size_t m = 0; m < 3; ++m) {
                OracleUser oracle{*term, modes[m] == Mode::voir2 ? Granularity::image : Granularity::region,
                                  options.judgments_per_iteration, seed};
                scores[m].push_back(simulate_session(catalog, modes[m], oracle, options.max_iterations, k).final_precision());
            }
        }
    }
    return build_report(scores[0], scores[1], scores[2]);
}

namespace {

std::string pair_name(const PairRow& row) {
    auto label = [](Mode m) {
        switch (m) {
            case Mode::voir1: return "VOIR-1";
            case Mode::voir2: return "VOIR-2";
            case Mode::voir3: return "VOIR-3";
        }
        return "?";
    };
    return std::string(label(row.better)) + " vs " + label(row.worse);
}

}  // namespace

std::string format_report_table(const ComparisonReport& report) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof line, "%-18s %6s %6s %18s %18s\n", "pair", "+", "-", "sign p", "wilcoxon p");
    out << line;
    for (const auto& row : report.rows) {
        const std::string sign = row.no_evidence ? "no evidence" : format_p_value(row.sign_p);
        const std::string wil = row.no_evidence ? "no evidence" : format_p_value(row.wilcoxon_p);
        std::snprintf(line, sizeof line, "%-18s %6zu %6zu %18s %18s\n", pair_name(row).c_str(), row.plus, row.minus,
                      sign.c_str(), wil.c_str());
        out << line;
    }
    out << "\nmean final precision over " << report.samples << " paired sessions:";
    for (const auto& [mode, value] : report.mean_precision) {
        std::snprintf(line, sizeof line, "  %s=%.4f", std::string(to_string(mode)).c_str(), value);
        out << line;
    }
    out << '\n';
    return out.str();
}

std::string format_report_csv(const ComparisonReport& report) {
    std::ostringstream out;
    out << "pair,plus,minus,sign_p,wilcoxon_p\n";
    for (const auto& row : report.rows) {
        char line[160];
        std::snprintf(line, sizeof line, "%s,%zu,%zu,%.17g,%.17g\n", pair_name(row).c_str(), row.plus, row.minus, row.sign_p,
                      row.wilcoxon_p);
        out << line;
    }
    return out.str();
}

}  // namespace voir
