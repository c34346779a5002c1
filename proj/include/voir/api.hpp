#pragma once
// JSON-over-HTTP retrieval service. `Service::handle` is transport-independent
// so the routing and payloads can be exercised without a socket; `serve`
// binds it to an httplib server.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>

#include "voir/error.hpp"
#include "voir/feedback.hpp"
#include "voir/model.hpp"

namespace voir {

struct ServiceConfig {
    Mode default_mode = Mode::voir3;
    // Holds images/<image_id>.<ext> and regions/<region_id>.<ext>.
    std::optional<std::filesystem::path> static_dir;
    // Resolved judgments are appended here as JSON lines.
    std::optional<std::filesystem::path> journal;
    std::size_t default_k = 20;
};

struct HttpResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

using QueryParams = std::map<std::string, std::string>;

int http_status(ErrorCode code);

class Service {
public:
    Service(Catalog catalog, ServiceConfig config);
    ~Service();

    HttpResponse handle(std::string_view method, std::string_view path, const QueryParams& params, std::string_view body);

    // Blocks until stop() is called. Returns false if the bind fails.
    bool serve(const std::string& host, int port);
    // Binds to an ephemeral port and returns it; call listen_after_bind() next.
    int bind_any_port(const std::string& host);
    bool listen_after_bind();
    void stop();

    // Snapshot for tests and tools.
    Catalog catalog_snapshot() const;
    std::size_t session_count() const;

private:
    struct SessionSlot {
        std::mutex mutex;
        SessionState state;
    };
    struct Http;

    HttpResponse route(std::string_view method, std::string_view path, const QueryParams& params, std::string_view body);
    HttpResponse get_thesaurus();
    HttpResponse get_term_examples(std::uint64_t term_id);
    HttpResponse post_session(std::string_view body);
    HttpResponse get_results(std::uint64_t session_id, const QueryParams& params);
    HttpResponse post_feedback(std::uint64_t session_id, std::string_view body);
    HttpResponse get_static(std::string_view kind, std::uint64_t id);
    HttpResponse post_association(std::string_view body);

    std::shared_ptr<SessionSlot> find_session(std::uint64_t id) const;
    void append_journal(std::span<const ResolvedJudgment> evidence);

    Catalog catalog_;
    ServiceConfig config_;
    mutable std::shared_mutex catalog_mutex_;
    mutable std::shared_mutex sessions_mutex_;
    std::map<std::uint64_t, std::shared_ptr<SessionSlot>> sessions_;
    std::atomic<std::uint64_t> next_session_id_{1};
    std::mutex journal_mutex_;
    std::unique_ptr<Http> http_;
};

// Journal lines: {"term_id":..,"region_id":..,"polarity":"relevant"}
std::vector<ResolvedJudgment> read_journal(const std::filesystem::path& path);
void write_journal_line(std::ostream& out, const ResolvedJudgment& judgment);

}  // namespace voir
