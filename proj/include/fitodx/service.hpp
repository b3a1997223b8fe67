#pragma once
// Diagnosis sessions behind a JSON API, persisted as an append-only JSONL log.
//
// Each log line is {"ts", "session_id", "event"}. A session starts with a
// "created" event followed by the engine's trace events. The log is the
// source of truth: replaying it through the engine rebuilds every session.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fitodx/engine.hpp"
#include "fitodx/wire.hpp"

namespace fitodx {

using Clock = std::chrono::system_clock;

// "2026-10-19T08:15:02.125Z"
std::string format_rfc3339(Clock::time_point t);
std::optional<Clock::time_point> parse_rfc3339(std::string_view s);

// 128 random bits, lowercase hex.
std::string new_session_id();

struct SessionRecord {
    std::string session_id;
    Clock::time_point created_at;
    Clock::time_point updated_at;
    EngineState state;
    std::optional<std::string> client_note;
};

class EventLog {
public:
    explicit EventLog(std::filesystem::path path);

    // Writes the lines with one call and flushes before returning.
    void append(const std::vector<wire::json>& lines);

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    std::mutex mu_;
    std::ofstream out_;
};

struct ReplayReport {
    std::map<std::string, SessionRecord> sessions;
    std::vector<std::string> errors;  // sessions the log could not reproduce
    std::size_t lines = 0;
};

// Rebuilds sessions by feeding each one's logged answers back through the
// engine and checking the regenerated events against the logged ones. Only
// sessions in `only` are rebuilt when it is set. A missing file is empty.
ReplayReport replay_log(const std::shared_ptr<const KnowledgeBase>& kb, const std::filesystem::path& path,
                        const std::optional<std::string>& only = std::nullopt);

struct Reply {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

struct ServiceOptions {
    std::filesystem::path log_path = "sessions.jsonl";
    std::optional<std::filesystem::path> image_dir;
    std::chrono::seconds session_ttl = std::chrono::hours(24);
    std::function<Clock::time_point()> clock = [] { return Clock::now(); };
};

class SessionService {
public:
    // A null kb puts the service in the degraded state: session and catalog
    // endpoints answer 503 with load_error.
    SessionService(std::shared_ptr<const KnowledgeBase> kb, std::string load_error, ServiceOptions options);

    // Loads and validates the file; any failure yields the degraded state.
    static std::unique_ptr<SessionService> from_file(const std::string& kb_path, ServiceOptions options);

    bool ready() const noexcept { return kb_ != nullptr; }
    const std::string& load_error() const noexcept { return load_error_; }
    std::size_t restored_sessions() const noexcept { return restored_; }
    const std::vector<std::string>& replay_errors() const noexcept { return replay_errors_; }

    Reply create_session(std::string_view body);
    Reply answer(const std::string& session_id, std::string_view body);
    Reply get_session(const std::string& session_id);
    Reply explanation(const std::string& session_id);
    Reply kb_summary();
    Reply image(const std::string& relative_path);

    // Drops in-memory sessions idle longer than the TTL; returns how many.
    std::size_t evict_idle();
    std::size_t live_sessions();

private:
    struct Entry {
        explicit Entry(SessionRecord r) : record(std::move(r)) {}
        std::mutex mu;
        SessionRecord record;
        std::atomic<Clock::rep> last_access{0};
    };

    std::shared_ptr<Entry> find(const std::string& id);
    wire::json session_view(const SessionRecord& r) const;
    wire::json log_line(Clock::time_point ts, const std::string& id, wire::json event) const;
    Clock::time_point tick(Clock::time_point previous) const;
    Reply unavailable() const;

    std::shared_ptr<const KnowledgeBase> kb_;
    std::string load_error_;
    ServiceOptions options_;
    std::unique_ptr<EventLog> log_;
    std::size_t restored_ = 0;
    std::vector<std::string> replay_errors_;

    std::mutex table_mu_;
    std::map<std::string, std::shared_ptr<Entry>> table_;
};

// HTTP/1.1 front end for SessionService under the /v1 prefix.
class HttpServer {
public:
    explicit HttpServer(SessionService& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    // Binds without serving. Port 0 picks a free port. Returns the bound port or -1.
    int bind(const std::string& host, int port);
    // Serves until stop(); blocks.
    bool listen_after_bind();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace fitodx
