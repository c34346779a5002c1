// voir: build, cluster, learn, serve and evaluate region-based image indexes.

#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "voir/api.hpp"
#include "voir/benchmark.hpp"
#include "voir/error.hpp"
#include "voir/evalstats.hpp"
#include "voir/formats.hpp"
#include "voir/index_io.hpp"
#include "voir/learning.hpp"

using namespace voir;

namespace {

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io_error, "cannot open " + path);
    return in;
}

void print_manifest(const IndexManifest& m) {
    std::cout << "version " << m.version << ", images " << m.images << ", regions " << m.regions << ", terms "
              << m.terms << ", associations " << m.associations << ", categories " << m.categories << ", dimension "
              << m.schema.total_dimension() << ", crc32 " << std::hex << m.checksum << std::dec << '\n';
}

std::optional<std::size_t> parse_k(const std::string& text) {
    if (fold_case(text) == "auto") return std::nullopt;
    std::size_t pos = 0;
    const unsigned long value = std::stoul(text, &pos);
    if (pos != text.size() || value == 0) fail(ErrorCode::invalid_argument, "--k must be a positive integer or 'auto'");
    return value;
}

// Pairs "a b" per line; '#' comments allowed.
std::pair<std::vector<double>, std::vector<double>> read_pairs(std::istream& in) {
    std::vector<double> a, b;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        double x = 0, y = 0;
        if (!(fields >> x >> y)) fail(ErrorCode::parse_error, "expected two numbers per line: " + line);
        a.push_back(x);
        b.push_back(y);
    }
    return {a, b};
}

Service* active_service = nullptr;

void on_signal(int) {
    if (active_service) active_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Region-based conceptual image retrieval with relevance feedback"};
    app.require_subcommand(1);

    // index
    auto* index = app.add_subcommand("index", "Build and inspect indexes")->require_subcommand(1);

    std::string images_dir, regions_file, features_file, thesaurus_file, annotations_file, out_file;
    auto* build = index->add_subcommand("build", "Ingest images or precomputed features into a new index");
    auto* images_opt = build->add_option("--images", images_dir, "Directory of PNG/PPM images (key = file stem)");
    build->add_option("--regions", regions_file, "Region geometry file for --images")->needs(images_opt);
    auto* features_opt = build->add_option("--features", features_file, "Precomputed feature vectors");
    images_opt->excludes(features_opt);
    build->add_option("--thesaurus", thesaurus_file, "Thesaurus file")->required();
    build->add_option("--annotations", annotations_file, "Image annotations file")->required();
    build->add_option("--out", out_file, "Output index")->required();

    std::string index_file, k_text = "auto";
    std::uint64_t seed = 0;
    auto* cluster = index->add_subcommand("cluster", "Group regions into visual categories");
    cluster->add_option("--index", index_file, "Index to update in place")->required();
    cluster->add_option("--k", k_text, "Number of categories or 'auto'");
    cluster->add_option("--seed", seed, "Tie-breaking seed");

    auto* info = index->add_subcommand("info", "Print the index manifest");
    info->add_option("--index", index_file)->required();

    BenchmarkConfig synth_config;
    auto* synth = index->add_subcommand("synth", "Write a synthetic, clustered benchmark index");
    synth->add_option("--seed", synth_config.seed);
    synth->add_option("--images", synth_config.images);
    synth->add_option("--concepts", synth_config.concepts);
    synth->add_option("--out", out_file)->required();

    // learn
    auto* learn = app.add_subcommand("learn", "Maintain concept-region associations")->require_subcommand(1);
    std::string journal_file;
    auto* update = learn->add_subcommand("update", "Fold a judgment journal into the associations");
    update->add_option("--index", index_file)->required();
    update->add_option("--journal", journal_file)->required();

    std::string term_label, region_key;
    auto* associate = learn->add_subcommand("associate", "Add a manual association");
    associate->add_option("--index", index_file)->required();
    associate->add_option("--term", term_label, "Term label")->required();
    associate->add_option("--region", region_key, "Region key")->required();

    // serve
    std::string host = "127.0.0.1", mode_text = "voir3", static_dir;
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "Run the HTTP retrieval service");
    serve->add_option("--index", index_file)->required();
    serve->add_option("--host", host);
    serve->add_option("--port", port);
    serve->add_option("--mode", mode_text, "Default session mode: voir1, voir2 or voir3");
    serve->add_option("--static", static_dir, "Directory with images/ and regions/ assets");
    serve->add_option("--journal", journal_file, "Append resolved judgments here");

    // eval
    auto* eval = app.add_subcommand("eval", "Offline evaluation")->require_subcommand(1);
    std::size_t seed_count = 50, eval_k = 10;
    CompareOptions compare_options;
    std::string csv_file;
    auto* compare = eval->add_subcommand("compare", "Compare VOIR-1/2/3 with simulated users on the benchmark");
    compare->add_option("--seeds", seed_count, "Number of corpus seeds (>= 10)");
    compare->add_option("--k", eval_k, "Precision cutoff");
    compare->add_option("--iterations", compare_options.max_iterations);
    compare->add_option("--out", csv_file, "Write the report as CSV");

    // stats
    auto* stats = app.add_subcommand("stats", "Significance tests on paired samples from stdin")->require_subcommand(1);
    std::string tail_text = "greater";
    auto* sign = stats->add_subcommand("sign", "Exact sign test; pairs 'a b' per line");
    auto* wilcoxon = stats->add_subcommand("wilcoxon", "Wilcoxon signed-rank test; pairs 'a b' per line");
    wilcoxon->add_option("--tail", tail_text, "greater or less");

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed()) {
            if (images_dir.empty() == features_file.empty()) fail(ErrorCode::invalid_argument, "give exactly one of --images or --features");
            Catalog catalog;
            auto thesaurus_in = open_input(thesaurus_file);
            load_thesaurus(catalog, parse_thesaurus(thesaurus_in));
            auto annotations_in = open_input(annotations_file);
            const auto annotations = parse_annotations(annotations_in);
            ImportSummary summary;
            if (!features_file.empty()) {
                auto features_in = open_input(features_file);
                summary = import_precomputed(catalog, annotations, parse_features(features_in));
            } else {
                std::optional<std::vector<RegionRecord>> regions;
                if (!regions_file.empty()) {
                    auto regions_in = open_input(regions_file);
                    regions = parse_regions(regions_in);
                }
                summary = import_images(catalog, images_dir, annotations, regions);
            }
            std::cout << "imported " << summary.images << " images, " << summary.regions << " regions\n";
            print_manifest(save_index(catalog, out_file));
        } else if (cluster->parsed()) {
            Catalog catalog = load_index(index_file);
            ClusteringConfig config;
            config.k = parse_k(k_text);
            config.rng_seed = seed;
            const auto categories = cluster_regions(catalog, config);
            std::cout << "clustered into " << categories.size() << " categories\n";
            print_manifest(save_index(catalog, index_file));
        } else if (info->parsed()) {
            IndexManifest manifest;
            load_index(index_file, &manifest);
            print_manifest(manifest);
        } else if (synth->parsed()) {
            print_manifest(save_index(make_benchmark(synth_config), out_file));
        } else if (update->parsed()) {
            Catalog catalog = load_index(index_file);
            const auto judgments = read_journal(journal_file);
            const auto before = count_confident_associations(catalog);
            const UpdateSummary summary = periodic_update(catalog, judgments);
            std::cout << summary.events << " events, " << summary.touched.size() << " ledger rows, " << summary.upserts
                      << " upserts, " << summary.removals << " removals; confident associations " << before << " -> "
                      << count_confident_associations(catalog) << '\n';
            save_index(catalog, index_file);
            // Move the consumed journal aside so a rerun cannot count it twice.
            const auto stamp = std::chrono::duration_cast<std::chrono::seconds>(
                std::chrono::system_clock::now().time_since_epoch()).count();
            const std::string applied = journal_file + ".applied." + std::to_string(stamp);
            std::filesystem::rename(journal_file, applied);
            std::cout << "journal moved to " << applied << '\n';
        } else if (associate->parsed()) {
            Catalog catalog = load_index(index_file);
            const auto term = catalog.term_by_label(term_label);
            if (!term) fail(ErrorCode::not_found, "unknown term '" + term_label + "'");
            const auto region = catalog.region_by_key(region_key);
            if (!region) fail(ErrorCode::not_found, "unknown region '" + region_key + "'");
            set_manual_association(catalog, *term, *region);
            save_index(catalog, index_file);
            std::cout << "associated '" << term_label << "' with " << region_key << '\n';
        } else if (serve->parsed()) {
            ServiceConfig config;
            config.default_mode = parse_mode(mode_text);
            if (!static_dir.empty()) config.static_dir = static_dir;
            if (!journal_file.empty()) config.journal = journal_file;
            Service service(load_index(index_file), config);
            active_service = &service;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cout << "listening on http://" << host << ':' << port << std::endl;
            if (!service.serve(host, port)) fail(ErrorCode::io_error, "cannot bind " + host + ":" + std::to_string(port));
            active_service = nullptr;
        } else if (compare->parsed()) {
            std::vector<std::uint64_t> seeds;
            for (std::uint64_t s = 1; s <= seed_count; ++s) seeds.push_back(s);
            const BenchmarkConfig base;
            const auto report = compare_modes(
                [&](std::uint64_t s) {
                    BenchmarkConfig config = base;
                    config.seed = s;
                    return make_benchmark(config);
                },
                benchmark_terms(base.concepts), seeds, eval_k, compare_options);
            std::cout << format_report_table(report);
            if (!csv_file.empty()) {
                std::ofstream out(csv_file);
                if (!out) fail(ErrorCode::io_error, "cannot write " + csv_file);
                out << format_report_csv(report);
            }
        } else if (sign->parsed()) {
            const auto [a, b] = read_pairs(std::cin);
            std::uint64_t plus = 0, minus = 0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (a[i] > b[i]) ++plus;
                if (a[i] < b[i]) ++minus;
            }
            std::cout << "plus " << plus << ", minus " << minus << ", p " << format_p_value(fisher_sign_test(plus, minus))
                      << '\n';
        } else if (wilcoxon->parsed()) {
            const auto [a, b] = read_pairs(std::cin);
            const std::string tail = fold_case(tail_text);
            if (tail != "greater" && tail != "less") fail(ErrorCode::invalid_argument, "--tail must be greater or less");
            const double p = wilcoxon_signed_rank(a, b, tail == "greater" ? Tail::greater : Tail::less);
            std::cout << "n " << a.size() << ", p " << format_p_value(p) << '\n';
        }
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
