#include "voir/api.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>

#include "voir/learning.hpp"
#include "voir/similarity.hpp"

namespace voir {

using nlohmann::json;

struct Service::Http {
    httplib::Server server;
};

namespace {

HttpResponse json_response(int status, const json& body) {
    return {status, "application/json", body.dump()};
}

HttpResponse error_response(int status, std::string_view code, std::string_view message) {
    return json_response(status, json{{"error", {{"code", code}, {"message", message}}}});
}

HttpResponse error_response(const Error& e) {
    return error_response(http_status(e.code()), to_string(e.code()), e.what());
}

std::optional<std::uint64_t> parse_id(std::string_view text) {
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || value == 0) return std::nullopt;
    return value;
}

std::uint64_t id_field(const json& object, const char* field) {
    const auto it = object.find(field);
    if (it == object.end()) fail(ErrorCode::invalid_argument, std::string("missing field '") + field + "'");
    if (!it->is_number_unsigned() || it->get<std::uint64_t>() == 0) {
        fail(ErrorCode::invalid_argument, std::string("field '") + field + "' must be a positive integer");
    }
    return it->get<std::uint64_t>();
}

json parse_body(std::string_view body) {
    json doc = json::parse(body, nullptr, false);
    if (doc.is_discarded()) fail(ErrorCode::parse_error, "request body is not valid JSON");
    if (!doc.is_object()) fail(ErrorCode::invalid_argument, "request body must be a JSON object");
    return doc;
}

std::size_t k_from(const json& doc, std::size_t fallback) {
    const auto it = doc.find("k");
    if (it == doc.end()) return fallback;
    if (!it->is_number_unsigned() || it->get<std::uint64_t>() == 0) fail(ErrorCode::invalid_argument, "'k' must be a positive integer");
    return it->get<std::size_t>();
}

json box_json(const BoundingBox& box) { return json::array({box.x0, box.y0, box.x1, box.y1}); }

json results_json(const Catalog& catalog, const std::vector<RankedResult>& results, Mode mode) {
    json out = json::array();
    for (const auto& r : results) {
        json concepts = json::array();
        for (const auto& c : r.concepts) {
            json entry{{"term_id", c.term_id.value}, {"score", c.best_score}};
            if (mode == Mode::voir3 && c.best_region_id) {
                const Region& region = catalog.region(*c.best_region_id);
                json best{{"region_id", region.id.value}, {"key", region.key}, {"bbox", box_json(region.geometry.box)}};
                if (region.geometry.mask) {
                    json runs = json::array();
                    for (const auto& run : region.geometry.mask->runs) runs.push_back({run.y, run.x, run.length});
                    best["mask"] = std::move(runs);
                }
                entry["best_region"] = std::move(best);
            }
            concepts.push_back(std::move(entry));
        }
        out.push_back({{"image_id", r.image_id.value},
                       {"image_key", catalog.image(r.image_id).key},
                       {"score", r.image_score},
                       {"concepts", std::move(concepts)}});
    }
    return out;
}

json session_json(const Catalog& catalog, const SessionState& state, std::size_t k) {
    return {{"session_id", state.session_id},
            {"mode", to_string(state.mode)},
            {"iteration", state.iteration},
            {"results", results_json(catalog, session_results(catalog, state, k), state.mode)}};
}

json term_tree(const Catalog& catalog, TermId id) {
    json children = json::array();
    for (TermId child : catalog.children(id)) children.push_back(term_tree(catalog, child));
    return {{"id", id.value}, {"label", catalog.term(id).label}, {"children", std::move(children)}};
}

std::vector<std::string_view> split_path(std::string_view path) {
    std::vector<std::string_view> parts;
    while (!path.empty()) {
        const auto slash = path.find('/');
        if (slash != 0) parts.push_back(path.substr(0, slash));
        if (slash == std::string_view::npos) break;
        path.remove_prefix(slash + 1);
    }
    return parts;
}

std::string_view content_type_for(const std::filesystem::path& path) {
    const std::string ext = fold_case(path.extension().string());
    if (ext == ".png") return "image/png";
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".gif") return "image/gif";
    if (ext == ".ppm") return "image/x-portable-pixmap";
    return "application/octet-stream";
}

}  // namespace

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::not_found:
        case ErrorCode::dangling_key:
            return 404;
        case ErrorCode::mode_violation:
        case ErrorCode::conflict:
        case ErrorCode::duplicate_key:
        case ErrorCode::precondition:
            return 409;
        case ErrorCode::unsupported_operation:
            return 405;
        case ErrorCode::io_error:
            return 500;
        default:
            return 400;
    }
}

Service::Service(Catalog catalog, ServiceConfig config) : catalog_(std::move(catalog)), config_(std::move(config)) {
    catalog_.validate();
}

Service::~Service() = default;

HttpResponse Service::handle(std::string_view method, std::string_view path, const QueryParams& params,
                             std::string_view body) {
    try {
        return route(method, path, params, body);
    } catch (const Error& e) {
        return error_response(e);
    } catch (const json::exception& e) {
        return error_response(400, "invalid_argument", e.what());
    } catch (const std::exception& e) {
        return error_response(500, "internal", e.what());
    }
}

HttpResponse Service::route(std::string_view method, std::string_view path, const QueryParams& params,
                            std::string_view body) {
    const auto parts = split_path(path);
    const auto is = [&](std::initializer_list<std::string_view> expected) {
        if (parts.size() != expected.size()) return false;
        std::size_t i = 0;
        for (std::string_view e : expected) {
            if (e != "*" && parts[i] != e) return false;
            ++i;
        }
        return true;
    };
    const auto want = [&](std::string_view m) {
        if (method != m) fail(ErrorCode::unsupported_operation, std::string(method) + " is not allowed on " + std::string(path));
    };
    const auto id_at = [&](std::size_t i) {
        const auto id = parse_id(parts[i]);
        if (!id) fail(ErrorCode::invalid_argument, "bad id '" + std::string(parts[i]) + "'");
        return *id;
    };

    if (is({"api", "thesaurus"})) {
        want("GET");
        return get_thesaurus();
    }
    if (is({"api", "terms", "*", "examples"})) {
        want("GET");
        return get_term_examples(id_at(2));
    }
    if (is({"api", "sessions"})) {
        want("POST");
        return post_session(body);
    }
    if (is({"api", "sessions", "*", "results"})) {
        want("GET");
        return get_results(id_at(2), params);
    }
    if (is({"api", "sessions", "*", "feedback"})) {
        want("POST");
        return post_feedback(id_at(2), body);
    }
    if (is({"api", "images", "*", "thumbnail"})) {
        want("GET");
        return get_static("images", id_at(2));
    }
    if (is({"api", "regions", "*", "crop"})) {
        want("GET");
        return get_static("regions", id_at(2));
    }
    if (is({"api", "associations"})) {
        want("POST");
        return post_association(body);
    }
    return error_response(404, "not_found", "no route for " + std::string(path));
}

HttpResponse Service::get_thesaurus() {
    std::shared_lock lock(catalog_mutex_);
    json roots = json::array();
    for (const auto& [id, term] : catalog_.terms()) {
        if (!term.parent_id) roots.push_back(term_tree(catalog_, id));
    }
    return json_response(200, json{{"terms", std::move(roots)}});
}

HttpResponse Service::get_term_examples(std::uint64_t term_id) {
    std::shared_lock lock(catalog_mutex_);
    const TermId term{term_id};
    catalog_.term(term);
    auto associations = catalog_.associations_for_term(term);
    std::stable_sort(associations.begin(), associations.end(), [](const Association& a, const Association& b) {
        if (a.d_conf != b.d_conf) return a.d_conf > b.d_conf;
        return a.region_id < b.region_id;
    });
    json examples = json::array();
    for (const auto& a : associations) {
        const Region& region = catalog_.region(a.region_id);
        examples.push_back({{"region_id", region.id.value},
                            {"image_id", region.image_id.value},
                            {"key", region.key},
                            {"d_conf", a.d_conf},
                            {"origin", to_string(a.origin)},
                            {"bbox", box_json(region.geometry.box)}});
    }
    return json_response(200, json{{"term_id", term_id}, {"examples", std::move(examples)}});
}

HttpResponse Service::post_session(std::string_view body) {
    const json doc = parse_body(body);
    Mode mode = config_.default_mode;
    if (const auto it = doc.find("mode"); it != doc.end()) {
        if (!it->is_string()) fail(ErrorCode::invalid_argument, "'mode' must be a string");
        mode = parse_mode(it->get<std::string>());
    }
    const auto concepts = doc.find("concepts");
    if (concepts == doc.end() || !concepts->is_array() || concepts->empty()) {
        fail(ErrorCode::invalid_query, "'concepts' must be a non-empty array");
    }
    std::vector<ConceptSeed> seeds;
    for (const auto& c : *concepts) {
        if (!c.is_object()) fail(ErrorCode::invalid_argument, "each concept must be an object");
        seeds.push_back({TermId{id_field(c, "term_id")}, RegionId{id_field(c, "example_region_id")}});
    }
    const std::size_t k = k_from(doc, config_.default_k);

    std::shared_lock lock(catalog_mutex_);
    auto slot = std::make_shared<SessionSlot>();
    slot->state = open_session(catalog_, next_session_id_.fetch_add(1), mode, seeds);
    json out = session_json(catalog_, slot->state, k);
    {
        std::unique_lock sessions(sessions_mutex_);
        sessions_.emplace(slot->state.session_id, slot);
    }
    return json_response(201, out);
}

std::shared_ptr<Service::SessionSlot> Service::find_session(std::uint64_t id) const {
    std::shared_lock lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) fail(ErrorCode::not_found, "unknown session " + std::to_string(id));
    return it->second;
}

HttpResponse Service::get_results(std::uint64_t session_id, const QueryParams& params) {
    std::size_t k = config_.default_k;
    if (const auto it = params.find("k"); it != params.end()) {
        const auto parsed = parse_id(it->second);
        if (!parsed) fail(ErrorCode::invalid_argument, "'k' must be a positive integer");
        k = static_cast<std::size_t>(*parsed);
    }
    auto slot = find_session(session_id);
    std::shared_lock lock(catalog_mutex_);
    std::lock_guard guard(slot->mutex);
    return json_response(200, session_json(catalog_, slot->state, k));
}

HttpResponse Service::post_feedback(std::uint64_t session_id, std::string_view body) {
    auto slot = find_session(session_id);
    const json doc = parse_body(body);
    const auto list = doc.find("judgments");
    if (list == doc.end() || !list->is_array()) fail(ErrorCode::invalid_argument, "'judgments' must be an array");
    std::vector<FeedbackJudgment> judgments;
    for (const auto& j : *list) {
        if (!j.is_object()) fail(ErrorCode::invalid_argument, "each judgment must be an object");
        const bool has_region = j.contains("region_id");
        const bool has_image = j.contains("image_id");
        if (has_region == has_image) fail(ErrorCode::invalid_argument, "a judgment names exactly one of region_id or image_id");
        FeedbackJudgment judgment;
        if (has_region) {
            judgment.target = RegionId{id_field(j, "region_id")};
        } else {
            judgment.target = ImageId{id_field(j, "image_id")};
        }
        const auto polarity = j.find("polarity");
        if (polarity == j.end() || !polarity->is_string()) fail(ErrorCode::invalid_argument, "missing 'polarity'");
        judgment.polarity = parse_polarity(polarity->get<std::string>());
        judgments.push_back(judgment);
    }
    const std::size_t k = k_from(doc, config_.default_k);

    std::shared_lock lock(catalog_mutex_);
    std::lock_guard guard(slot->mutex);
    SessionState next = apply_feedback(catalog_, slot->state, judgments);
    const std::span<const ResolvedJudgment> delta =
        std::span(next.evidence).subspan(slot->state.evidence.size());
    append_journal(delta);
    slot->state = std::move(next);
    json out = session_json(catalog_, slot->state, k);
    out["resolved"] = json::array();
    for (const auto& e : delta) {
        out["resolved"].push_back(
            {{"term_id", e.term_id.value}, {"region_id", e.region_id.value}, {"polarity", to_string(e.polarity)}});
    }
    return json_response(200, out);
}

HttpResponse Service::get_static(std::string_view kind, std::uint64_t id) {
    {
        std::shared_lock lock(catalog_mutex_);
        if (kind == "images") {
            catalog_.image(ImageId{id});
        } else {
            catalog_.region(RegionId{id});
        }
    }
    if (!config_.static_dir) fail(ErrorCode::not_found, "no static asset directory configured");
    const std::filesystem::path dir = *config_.static_dir / std::string(kind);
    for (const char* ext : {".png", ".jpg", ".jpeg", ".gif", ".ppm"}) {
        const auto file = dir / (std::to_string(id) + ext);
        std::ifstream in(file, std::ios::binary);
        if (!in) continue;
        std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
        return {200, std::string(content_type_for(file)), std::move(bytes)};
    }
    fail(ErrorCode::not_found, "no asset for " + std::string(kind) + "/" + std::to_string(id));
}

HttpResponse Service::post_association(std::string_view body) {
    const json doc = parse_body(body);
    const TermId term{id_field(doc, "term_id")};
    const RegionId region{id_field(doc, "region_id")};
    std::unique_lock lock(catalog_mutex_);
    const Association a = set_manual_association(catalog_, term, region);
    return json_response(201, json{{"term_id", a.term_id.value},
                                   {"region_id", a.region_id.value},
                                   {"d_conf", a.d_conf},
                                   {"origin", to_string(a.origin)}});
}

void Service::append_journal(std::span<const ResolvedJudgment> evidence) {
    if (!config_.journal || evidence.empty()) return;
    std::lock_guard guard(journal_mutex_);
    std::ofstream out(*config_.journal, std::ios::app);
    if (!out) fail(ErrorCode::io_error, "cannot append to journal " + config_.journal->string());
    for (const auto& e : evidence) write_journal_line(out, e);
    out.flush();
}

Catalog Service::catalog_snapshot() const {
    std::shared_lock lock(catalog_mutex_);
    return catalog_;
}

std::size_t Service::session_count() const {
    std::shared_lock lock(sessions_mutex_);
    return sessions_.size();
}

namespace {

void install_routes(httplib::Server& server, Service& service) {
    const auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
        QueryParams params;
        for (const auto& [key, value] : req.params) params.emplace(key, value);
        const HttpResponse out = service.handle(req.method, req.path, params, req.body);
        res.status = out.status;
        res.set_content(out.body, out.content_type);
    };
    server.Get(R"(/.*)", forward);
    server.Post(R"(/.*)", forward);
    server.Put(R"(/.*)", forward);
    server.Delete(R"(/.*)", forward);
}

}  // namespace

bool Service::serve(const std::string& host, int port) {
    if (!http_) {
        http_ = std::make_unique<Http>();
        install_routes(http_->server, *this);
    }
    return http_->server.listen(host, port);
}

int Service::bind_any_port(const std::string& host) {
    if (!http_) {
        http_ = std::make_unique<Http>();
        install_routes(http_->server, *this);
    }
    return http_->server.bind_to_any_port(host);
}

bool Service::listen_after_bind() { return http_ && http_->server.listen_after_bind(); }

void Service::stop() {
    if (http_) http_->server.stop();
}

void write_journal_line(std::ostream& out, const ResolvedJudgment& judgment) {
    out << json{{"term_id", judgment.term_id.value},
                {"region_id", judgment.region_id.value},
                {"polarity", to_string(judgment.polarity)}}
               .dump()
        << '\n';
}

std::vector<ResolvedJudgment> read_journal(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io_error, "cannot open journal " + path.string());
    std::vector<ResolvedJudgment> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const json doc = json::parse(line, nullptr, false);
        const auto where = path.string() + ":" + std::to_string(number);
        if (doc.is_discarded() || !doc.is_object()) fail(ErrorCode::parse_error, where + ": not a JSON object");
        try {
            out.push_back({TermId{id_field(doc, "term_id")}, RegionId{id_field(doc, "region_id")},
                           parse_polarity(doc.at("polarity").get<std::string>())});
        } catch (const json::exception&) {
            fail(ErrorCode::parse_error, where + ": missing or malformed 'polarity'");
        } catch (const Error& e) {
            fail(ErrorCode::parse_error, where + ": " + e.what());
        }
    }
    return out;
}

}  // namespace voir
