#include "fitodx/service.hpp"

#include <algorithm>
#include <array>
#include <ctime>
#include <random>
#include <sstream>

#include "fitodx/analysis.hpp"

namespace fitodx {

using wire::json;

std::string format_rfc3339(Clock::time_point t) {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
    std::time_t secs = static_cast<std::time_t>(ms / 1000);
    long frac = static_cast<long>(ms % 1000);
    if (frac < 0) {
        frac += 1000;
        --secs;
    }
    std::tm tm{};
    gmtime_r(&secs, &tm);
    std::array<char, 64> buf{};
    std::snprintf(buf.data(), buf.size(), "%04d-%02d-%02dT%02d:%02d:%02d.%03ldZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, frac);
    return buf.data();
}

std::optional<Clock::time_point> parse_rfc3339(std::string_view s) {
    std::tm tm{};
    int ms = 0;
    char tail = 0;
    std::string str(s);
    int n = std::sscanf(str.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3d%c", &tm.tm_year, &tm.tm_mon, &tm.tm_mday,
                        &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &ms, &tail);
    if (n != 8 || tail != 'Z') return std::nullopt;
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    const std::time_t secs = timegm(&tm);
    return Clock::time_point(std::chrono::seconds(secs)) + std::chrono::milliseconds(ms);
}

std::string new_session_id() {
    static thread_local std::mt19937_64 rng = [] {
        std::random_device rd;
        std::seed_seq seq{rd(), rd(), rd(), rd(), rd(), rd(), rd(), rd()};
        return std::mt19937_64(seq);
    }();
    std::array<char, 33> buf{};
    std::snprintf(buf.data(), buf.size(), "%016llx%016llx", static_cast<unsigned long long>(rng()),
                  static_cast<unsigned long long>(rng()));
    return buf.data();
}

EventLog::EventLog(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    out_.open(path_, std::ios::app | std::ios::binary);
    if (!out_) throw Error("cannot open session log '" + path_.string() + "'");
}

void EventLog::append(const std::vector<json>& lines) {
    std::string chunk;
    for (const auto& l : lines) {
        chunk += l.dump();
        chunk += '\n';
    }
    std::lock_guard lock(mu_);
    out_.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
    out_.flush();
    if (!out_) throw Error("write to session log '" + path_.string() + "' failed");
}

namespace {

struct LoggedSession {
    std::vector<std::pair<std::string, json>> events;  // (ts, event)
};

bool is_prefix(const std::vector<json>& logged, const std::vector<json>& regenerated) {
    if (logged.size() > regenerated.size()) return false;
    return std::equal(logged.begin(), logged.end(), regenerated.begin());
}

std::optional<SessionRecord> rebuild(const std::shared_ptr<const KnowledgeBase>& kb, const std::string& id,
                                     const LoggedSession& logged, std::string& err) {
    const auto& evs = logged.events;
    if (evs.empty() || evs.front().second.value("type", "") != "created") {
        err = id + ": first event is not 'created'";
        return std::nullopt;
    }
    auto created = parse_rfc3339(evs.front().first);
    auto updated = parse_rfc3339(evs.back().first);
    if (!created || !updated) {
        err = id + ": bad timestamp";
        return std::nullopt;
    }

    EngineState state = start_unchecked(kb);
    std::vector<json> recorded;
    try {
        for (std::size_t i = 1; i < evs.size(); ++i) {
            const json& ev = evs[i].second;
            recorded.push_back(ev);
            if (ev.value("type", "") != "asked") continue;
            auto q = parse_global_key(ev.at("question_id").get<std::string>());
            if (!q) throw Error("bad question id");
            submit_answer(state, *q, answer_from_token(ev.at("answer").get<std::string>()));
        }
    } catch (const std::exception& e) {
        err = id + ": " + e.what();
        return std::nullopt;
    }

    std::vector<json> regenerated;
    for (const auto& e : state.trace()) regenerated.push_back(wire::event(e));
    if (!is_prefix(recorded, regenerated)) {
        err = id + ": logged events differ from the engine's replay";
        return std::nullopt;
    }

    SessionRecord r{id, *created, *updated, std::move(state), std::nullopt};
    const json& c = evs.front().second;
    if (c.contains("client_note") && c["client_note"].is_string()) r.client_note = c["client_note"].get<std::string>();
    return r;
}

json error_body(std::string_view code, std::string_view message) {
    return json{{"error", {{"code", code}, {"message", message}}}};
}

Reply reply(int status, const json& body) { return Reply{status, body.dump(), "application/json"}; }

Reply fail(int status, std::string_view code, std::string_view message) {
    return reply(status, error_body(code, message));
}

// Strict request parsing: object only, no unknown keys, string values.
std::optional<json> parse_body(std::string_view body, std::initializer_list<std::string_view> allowed,
                               std::string& err) {
    if (body.find_first_not_of(" \t\r\n") == std::string_view::npos) return json::object();
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        err = "request body must be a JSON object";
        return std::nullopt;
    }
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            err = "unknown field '" + key + "'";
            return std::nullopt;
        }
        if (!value.is_string()) {
            err = "field '" + key + "' must be a string";
            return std::nullopt;
        }
    }
    return j;
}

std::string content_type_for(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".png") return "image/png";
    if (ext == ".bmp") return "image/bmp";
    if (ext == ".gif") return "image/gif";
    if (ext == ".webp") return "image/webp";
    if (ext == ".svg") return "image/svg+xml";
    return "application/octet-stream";
}

bool safe_relative(std::string_view rel) {
    if (rel.empty() || rel.front() == '/') return false;
    if (rel.find('\\') != std::string_view::npos || rel.find('\0') != std::string_view::npos) return false;
    std::size_t start = 0;
    while (start <= rel.size()) {
        std::size_t end = rel.find('/', start);
        if (end == std::string_view::npos) end = rel.size();
        std::string_view seg = rel.substr(start, end - start);
        if (seg.empty() || seg == "." || seg == "..") return false;
        start = end + 1;
    }
    return true;
}

}  // namespace

ReplayReport replay_log(const std::shared_ptr<const KnowledgeBase>& kb, const std::filesystem::path& path,
                        const std::optional<std::string>& only) {
    ReplayReport report;
    std::ifstream in(path, std::ios::binary);
    if (!in) return report;

    std::map<std::string, LoggedSession> logged;
    std::vector<std::string> order;
    std::string line;
    while (std::getline(in, line)) {
        ++report.lines;
        // Quick filter before parsing when rebuilding a single session.
        if (only && line.find(*only) == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("session_id") || !j.contains("event") ||
            !j.contains("ts") || !j["session_id"].is_string() || !j["ts"].is_string()) {
            // A torn final line from an interrupted write carries no acknowledged event.
            continue;
        }
        const std::string id = j["session_id"].get<std::string>();
        if (only && id != *only) continue;
        auto [it, fresh] = logged.try_emplace(id);
        if (fresh) order.push_back(id);
        it->second.events.emplace_back(j["ts"].get<std::string>(), std::move(j["event"]));
    }

    for (const auto& id : order) {
        std::string err;
        if (auto r = rebuild(kb, id, logged[id], err)) {
            report.sessions.emplace(id, std::move(*r));
        } else {
            report.errors.push_back(err);
        }
    }
    return report;
}

SessionService::SessionService(std::shared_ptr<const KnowledgeBase> kb, std::string load_error,
                               ServiceOptions options)
    : kb_(std::move(kb)), load_error_(std::move(load_error)), options_(std::move(options)) {
    if (!kb_) return;
    ReplayReport report = replay_log(kb_, options_.log_path);
    replay_errors_ = std::move(report.errors);
    for (auto& [id, record] : report.sessions) {
        auto entry = std::make_shared<Entry>(std::move(record));
        entry->last_access = options_.clock().time_since_epoch().count();
        table_.emplace(id, std::move(entry));
    }
    restored_ = table_.size();
    log_ = std::make_unique<EventLog>(options_.log_path);
}

std::unique_ptr<SessionService> SessionService::from_file(const std::string& kb_path, ServiceOptions options) {
    ParseResult parsed = load_kb_file(kb_path);
    if (!parsed.ok()) {
        std::string msg = "knowledge base '" + kb_path + "' failed to load";
        for (const auto& d : parsed.diagnostics) {
            if (d.severity == Severity::Error) {
                msg += ": " + format_diagnostic(d);
                break;
            }
        }
        return std::make_unique<SessionService>(nullptr, msg, std::move(options));
    }
    auto kb = std::make_shared<const KnowledgeBase>(std::move(*parsed.kb));
    return std::make_unique<SessionService>(std::move(kb), "", std::move(options));
}

Reply SessionService::unavailable() const { return fail(503, "kb_unavailable", load_error_); }

Clock::time_point SessionService::tick(Clock::time_point previous) const {
    return std::max(options_.clock(), previous);
}

json SessionService::log_line(Clock::time_point ts, const std::string& id, json event) const {
    return json{{"ts", format_rfc3339(ts)}, {"session_id", id}, {"event", std::move(event)}};
}

std::shared_ptr<SessionService::Entry> SessionService::find(const std::string& id) {
    const auto now = options_.clock().time_since_epoch().count();
    {
        std::lock_guard lock(table_mu_);
        auto it = table_.find(id);
        if (it != table_.end()) {
            it->second->last_access = now;
            return it->second;
        }
    }
    // Evicted sessions come back from the log.
    ReplayReport report = replay_log(kb_, options_.log_path, id);
    auto rec = report.sessions.find(id);
    if (rec == report.sessions.end()) return nullptr;
    auto entry = std::make_shared<Entry>(std::move(rec->second));
    entry->last_access = now;
    std::lock_guard lock(table_mu_);
    return table_.try_emplace(id, std::move(entry)).first->second;
}

json SessionService::session_view(const SessionRecord& r) const {
    json asked = json::array();
    for (const auto& ev : r.state.trace()) {
        if (const auto* a = std::get_if<trace::Asked>(&ev)) {
            asked.push_back(
                json{{"question_id", global_key(a->question)}, {"prompt", a->prompt}, {"answer", to_string(a->answer)}});
        }
    }
    json j{{"session_id", r.session_id},
           {"created_at", format_rfc3339(r.created_at)},
           {"updated_at", format_rfc3339(r.updated_at)},
           {"finished", r.state.finished()},
           {"asked", std::move(asked)}};
    if (r.state.pending()) j["pending"] = wire::pending(r.state);
    if (r.state.outcome()) j["result"] = wire::outcome(*r.state.outcome());
    if (r.client_note) j["client_note"] = *r.client_note;
    return j;
}

Reply SessionService::create_session(std::string_view body) {
    if (!ready()) return unavailable();
    std::string err;
    auto req = parse_body(body, {"client_note"}, err);
    if (!req) return fail(400, "bad_request", err);

    evict_idle();

    const auto now = options_.clock();
    std::string id;
    {
        std::lock_guard lock(table_mu_);
        do {
            id = new_session_id();
        } while (table_.count(id));
    }
    std::optional<std::string> note;
    if (req->contains("client_note")) note = (*req)["client_note"].get<std::string>();
    auto entry = std::make_shared<Entry>(SessionRecord{id, now, now, start_unchecked(kb_), note});
    entry->last_access = now.time_since_epoch().count();
    const SessionRecord& r = entry->record;

    json created{{"type", "created"}};
    if (r.client_note) created["client_note"] = *r.client_note;
    std::vector<json> lines{log_line(now, r.session_id, std::move(created))};
    for (const auto& ev : r.state.trace()) lines.push_back(log_line(now, r.session_id, wire::event(ev)));
    log_->append(lines);

    json out{{"session_id", r.session_id}};
    if (r.state.pending()) {
        out["pending"] = wire::pending(r.state);
    } else {
        out["result"] = wire::outcome(*r.state.outcome());
    }
    {
        std::lock_guard lock(table_mu_);
        table_.emplace(r.session_id, entry);
    }
    return reply(201, out);
}

Reply SessionService::answer(const std::string& session_id, std::string_view body) {
    if (!ready()) return unavailable();
    auto entry = find(session_id);
    if (!entry) return fail(404, "not_found", "unknown session '" + session_id + "'");

    std::string err;
    auto req = parse_body(body, {"question_id", "answer"}, err);
    if (!req) return fail(400, "bad_request", err);
    if (!req->contains("answer")) return fail(400, "bad_request", "missing field 'answer'");
    Answer a;
    try {
        a = answer_from_token((*req)["answer"].get<std::string>());
    } catch (const UnknownAnswerToken& e) {
        return fail(422, "invalid_answer", e.what());
    }
    if (!req->contains("question_id")) return fail(400, "bad_request", "missing field 'question_id'");
    const std::string qkey = (*req)["question_id"].get<std::string>();

    std::lock_guard lock(entry->mu);
    SessionRecord& r = entry->record;
    if (r.state.finished()) return fail(409, "session_finished", "session already finished");
    if (global_key(*r.state.pending()) != qkey) {
        return fail(409, "not_pending", "question '" + qkey + "' is not the pending question '" +
                                            global_key(*r.state.pending()) + "'");
    }

    const std::size_t before = r.state.trace().size();
    EngineState next = r.state;
    submit_answer(next, *next.pending(), a);

    const auto ts = tick(r.updated_at);
    std::vector<json> lines;
    for (std::size_t i = before; i < next.trace().size(); ++i) {
        lines.push_back(log_line(ts, r.session_id, wire::event(next.trace()[i])));
    }
    log_->append(lines);
    r.state = std::move(next);
    r.updated_at = ts;

    json out = json::object();
    if (r.state.pending()) {
        out["pending"] = wire::pending(r.state);
    } else {
        out["result"] = wire::outcome(*r.state.outcome());
    }
    return reply(200, out);
}

Reply SessionService::get_session(const std::string& session_id) {
    if (!ready()) return unavailable();
    auto entry = find(session_id);
    if (!entry) return fail(404, "not_found", "unknown session '" + session_id + "'");
    std::lock_guard lock(entry->mu);
    return reply(200, session_view(entry->record));
}

Reply SessionService::explanation(const std::string& session_id) {
    if (!ready()) return unavailable();
    auto entry = find(session_id);
    if (!entry) return fail(404, "not_found", "unknown session '" + session_id + "'");
    std::lock_guard lock(entry->mu);
    if (!entry->record.state.finished()) return fail(409, "session_unfinished", "session has not finished");
    return reply(200, wire::explanation(explain(entry->record.state)));
}

Reply SessionService::kb_summary() {
    if (!ready()) return unavailable();
    return reply(200, wire::summary(summarize_kb(*kb_)));
}

Reply SessionService::image(const std::string& relative_path) {
    if (!options_.image_dir) return fail(404, "not_found", "no image directory configured");
    if (!safe_relative(relative_path)) return fail(400, "bad_path", "invalid image path");

    std::error_code ec;
    const auto root = std::filesystem::weakly_canonical(*options_.image_dir, ec);
    if (ec) return fail(404, "not_found", "image directory unavailable");
    const auto full = std::filesystem::weakly_canonical(root / relative_path, ec);
    if (ec) return fail(404, "not_found", "no such image");
    auto [root_end, _] = std::mismatch(root.begin(), root.end(), full.begin(), full.end());
    if (root_end != root.end()) return fail(400, "bad_path", "image path escapes the image directory");
    if (!std::filesystem::is_regular_file(full, ec)) return fail(404, "not_found", "no such image");

    std::ifstream in(full, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return Reply{200, buf.str(), content_type_for(full)};
}

std::size_t SessionService::evict_idle() {
    const auto now = options_.clock().time_since_epoch().count();
    const auto ttl = std::chrono::duration_cast<Clock::duration>(options_.session_ttl).count();
    std::lock_guard lock(table_mu_);
    return std::erase_if(table_, [&](const auto& kv) { return now - kv.second->last_access.load() > ttl; });
}

std::size_t SessionService::live_sessions() {
    std::lock_guard lock(table_mu_);
    return table_.size();
}

}  // namespace fitodx
