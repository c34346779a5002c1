#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "voir/feedback.hpp"
#include "voir/model.hpp"

namespace voir {

// |top-k ∩ relevant| / k; a short list still divides by k.
double precision_at_k(std::span<const ImageId> ranked, const std::set<ImageId>& relevant, std::size_t k);

// One-tailed direction for paired tests: `greater` tests A > B.
enum class Tail { greater, less };

inline constexpr std::size_t kWilcoxonExactLimit = 20;

// Wilcoxon matched-pairs signed-ranks. Zero differences are dropped, tied
// |d| get average ranks, W+ sums ranks of positive differences. Exact null
// distribution for m <= 20 nonzero pairs, otherwise normal approximation
// with tie and continuity correction.
double wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, Tail tail);

// P(X >= n_plus) for X ~ Binomial(n_plus + n_minus, 1/2), exact.
boost::multiprecision::cpp_rational fisher_sign_test_exact(std::uint64_t n_plus, std::uint64_t n_minus);
double fisher_sign_test(std::uint64_t n_plus, std::uint64_t n_minus);

// Rounds a p-value up to three significant digits, as the published tables
// print them (0.01953125 -> "0.0196").
std::string format_p_value(double p);

// Row per subject; entries are 0-based system indices in task order.
std::vector<std::vector<std::size_t>> counterbalance_plan(std::size_t n_subjects, std::size_t n_systems);

struct OracleUser {
    TermId target_term_id;
    Granularity granularity = Granularity::region;
    std::size_t judgments_per_iteration = 5;
    std::uint64_t rng_seed = 0;
};

struct IterationRecord {
    std::vector<ImageId> ranked;
    std::vector<FeedbackJudgment> judgments;
    double precision = 0.0;
};

struct SessionTrace {
    Mode mode = Mode::voir1;
    std::vector<IterationRecord> iterations;
    std::vector<ResolvedJudgment> evidence;

    double final_precision() const { return iterations.back().precision; }
};

// Images whose ground-truth keywords contain the term's label.
std::set<ImageId> relevant_images(const Catalog& catalog, TermId term);

// Drives one session with an oracle in place of a person. The first query
// uses the target term's highest-d_conf region (seeded choice among ties).
SessionTrace simulate_session(const Catalog& catalog, Mode mode, const OracleUser& oracle, std::size_t max_iterations,
                              std::size_t k);

struct PairRow {
    Mode better = Mode::voir2;
    Mode worse = Mode::voir1;
    std::size_t plus = 0;
    std::size_t minus = 0;
    double sign_p = 1.0;
    double wilcoxon_p = 1.0;
    bool no_evidence = false;  // every pair tied
};

struct ComparisonReport {
    std::vector<PairRow> rows;
    std::vector<std::pair<Mode, double>> mean_precision;
    std::size_t samples = 0;
};

// Paired final precisions per mode (same order for every mode); rows follow
// the published layout: VOIR-2 vs VOIR-1, VOIR-3 vs VOIR-2, VOIR-3 vs VOIR-1.
ComparisonReport build_report(const std::vector<double>& voir1, const std::vector<double>& voir2,
                              const std::vector<double>& voir3);

struct CompareOptions {
    std::size_t max_iterations = 5;
    std::size_t judgments_per_iteration = 5;
};

using CorpusFactory = std::function<Catalog(std::uint64_t seed)>;

// For every seed and term: one session per mode, final precision@k paired.
ComparisonReport compare_modes(const CorpusFactory& corpus, const std::vector<std::string>& term_labels,
                               const std::vector<std::uint64_t>& seeds, std::size_t k, const CompareOptions& options = {});

std::string format_report_table(const ComparisonReport& report);
// Columns: pair,plus,minus,sign_p,wilcoxon_p
std::string format_report_csv(const ComparisonReport& report);

}  // namespace voir
