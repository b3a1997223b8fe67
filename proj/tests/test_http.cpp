#include <doctest.h>

#include <httplib.h>

#include <fstream>
#include <thread>

#include "fitodx/service.hpp"
#include "support.hpp"

using namespace fitodx;
using fitodx::testing::reference_kb;
using fitodx::testing::TempDir;
using wire::json;

namespace {

// A service plus HTTP server on an ephemeral port for the lifetime of the object.
class LiveServer {
public:
    explicit LiveServer(ServiceOptions opts, std::shared_ptr<const KnowledgeBase> kb = reference_kb())
        : service_(std::move(kb), kb ? "" : "no knowledge base", std::move(opts)), http_(service_) {
        port_ = http_.bind("127.0.0.1", 0);
        REQUIRE(port_ > 0);
        thread_ = std::thread([this] { http_.listen_after_bind(); });
        http_.wait_until_ready();
    }
    ~LiveServer() {
        http_.stop();
        thread_.join();
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port_);
        c.set_connection_timeout(5);
        c.set_read_timeout(10);
        return c;
    }

private:
    SessionService service_;
    HttpServer http_;
    int port_ = -1;
    std::thread thread_;
};

ServiceOptions options_in(const TempDir& dir) {
    ServiceOptions o;
    o.log_path = dir / "sessions.jsonl";
    o.image_dir = dir / "images";
    return o;
}

json post(httplib::Client& c, const std::string& path, const std::string& body, int expect) {
    auto res = c.Post(path, body, "application/json");
    REQUIRE(res);
    CHECK_MESSAGE(res->status == expect, res->body);
    CHECK(res->get_header_value("Content-Type") == "application/json");
    return json::parse(res->body);
}

json get(httplib::Client& c, const std::string& path, int expect) {
    auto res = c.Get(path);
    REQUIRE(res);
    CHECK_MESSAGE(res->status == expect, res->body);
    return json::parse(res->body);
}

}  // namespace

TEST_CASE("healthz") {
    TempDir dir;
    LiveServer server(options_in(dir));
    auto c = server.client();
    auto res = c.Get("/v1/healthz");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->body == "ok");
    auto missing = c.Get("/v2/healthz");
    REQUIRE(missing);
    CHECK(missing->status == 404);
}

TEST_CASE("a full diagnosis over HTTP") {
    TempDir dir;
    LiveServer server(options_in(dir));
    auto c = server.client();

    json created = post(c, "/v1/sessions", "", 201);
    const std::string id = created["session_id"];
    CHECK(created["pending"]["prompt"] == "es cultivo de arroz ?");

    const AnswerMemo answers = fitodx::testing::damping_off_answers();
    json pending = created["pending"];
    json last;
    int calls = 0;
    while (!pending.is_null()) {
        const std::string q = pending["question_id"];
        last = post(c, "/v1/sessions/" + id + "/answers",
                    json{{"question_id", q}, {"answer", std::string(to_string(answers.at(q)))}}.dump(), 200);
        ++calls;
        pending = last.contains("pending") ? last["pending"] : json();
    }
    CHECK(calls == 19);
    CHECK(last["result"]["diagnosis"]["name"] == "PYTHIUM APHANIDERMATUM (DAMPING OFF)");

    json view = get(c, "/v1/sessions/" + id, 200);
    CHECK(view["asked"].size() == 19);
    CHECK(view["finished"] == true);

    json ex = get(c, "/v1/sessions/" + id + "/explanation", 200);
    CHECK(ex["supporting"].size() == 12);
    CHECK(ex["fired"]["rule"] == "pythium");

    json again = post(c, "/v1/sessions/" + id + "/answers", R"({"question_id": "tabaco.p1", "answer": "no"})", 409);
    CHECK(again["error"]["code"] == "session_finished");
}

TEST_CASE("error statuses over HTTP") {
    TempDir dir;
    LiveServer server(options_in(dir));
    auto c = server.client();
    const std::string id = post(c, "/v1/sessions", "{}", 201)["session_id"];

    get(c, "/v1/sessions/unknown", 404);
    get(c, "/v1/sessions/" + id + "/explanation", 409);
    post(c, "/v1/sessions/unknown/answers", R"({"question_id": "principal.es_arroz", "answer": "si"})", 404);
    post(c, "/v1/sessions/" + id + "/answers", R"({"answer": "quizas"})", 422);
    post(c, "/v1/sessions/" + id + "/answers", R"({"question_id": "principal.es_frijol", "answer": "si"})", 409);
    post(c, "/v1/sessions/" + id + "/answers", R"({"question_id": "principal.es_arroz", "answer": "si", "x": "1"})", 400);
    post(c, "/v1/sessions", R"({"unexpected": "1"})", 400);
    post(c, "/v1/sessions", "{", 400);
}

TEST_CASE("catalog over HTTP") {
    TempDir dir;
    LiveServer server(options_in(dir));
    auto c = server.client();
    json kb = get(c, "/v1/kb", 200);
    REQUIRE(kb["crops"].size() == 7);
    std::vector<std::string> modules;
    for (const auto& crop : kb["crops"]) modules.push_back(crop["module"]);
    CHECK(modules == std::vector<std::string>{"arroz", "tabaco", "tomate", "maiz", "pimiento", "pepino", "frijol"});
}

TEST_CASE("images over HTTP") {
    TempDir dir;
    std::filesystem::create_directories(dir / "images");
    std::ofstream(dir / "images/phytium.jpg", std::ios::binary) << "\xFF\xD8\xFF";
    std::ofstream(dir / "outside.txt") << "secret";
    LiveServer server(options_in(dir));
    auto c = server.client();

    auto ok = c.Get("/v1/images/phytium.jpg");
    REQUIRE(ok);
    CHECK(ok->status == 200);
    CHECK(ok->body == "\xFF\xD8\xFF");
    CHECK(ok->get_header_value("Content-Type") == "image/jpeg");

    auto missing = c.Get("/v1/images/none.jpg");
    REQUIRE(missing);
    CHECK(missing->status == 404);

    auto escape = c.Get("/v1/images/%2E%2E/outside.txt");
    REQUIRE(escape);
    CHECK(escape->status != 200);
    CHECK(escape->body.find("secret") == std::string::npos);
}

TEST_CASE("degraded server") {
    TempDir dir;
    LiveServer server(options_in(dir), nullptr);
    auto c = server.client();
    post(c, "/v1/sessions", "", 503);
    get(c, "/v1/kb", 503);
    auto h = c.Get("/v1/healthz");
    REQUIRE(h);
    CHECK(h->status == 200);
}

TEST_CASE("sessions survive a server restart") {
    TempDir dir;
    std::vector<std::pair<std::string, json>> views;
    {
        LiveServer server(options_in(dir));
        auto c = server.client();
        std::mt19937_64 rng(3);
        for (int i = 0; i < 10; ++i) {
            const AnswerMemo answers = fitodx::testing::random_answers(*reference_kb(), rng);
            const std::string id = post(c, "/v1/sessions", "", 201)["session_id"];
            json view = get(c, "/v1/sessions/" + id, 200);
            // Leave some sessions mid-way.
            int budget = i % 3 == 0 ? 3 : 1000;
            while (view.contains("pending") && budget-- > 0) {
                const std::string q = view["pending"]["question_id"];
                post(c, "/v1/sessions/" + id + "/answers",
                     json{{"question_id", q}, {"answer", std::string(to_string(answers.at(q)))}}.dump(), 200);
                view = get(c, "/v1/sessions/" + id, 200);
            }
            views.emplace_back(id, view);
        }
    }
    LiveServer server(options_in(dir));
    auto c = server.client();
    for (const auto& [id, view] : views) CHECK(get(c, "/v1/sessions/" + id, 200) == view);
}
