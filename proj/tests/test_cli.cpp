#include <doctest.h>

#include <httplib.h>
#include <signal.h>

#include <fstream>
#include <sstream>
#include <thread>

#include "cli.hpp"
#include "fitodx/service.hpp"
#include "process.hpp"
#include "support.hpp"

using namespace fitodx;
using fitodx::testing::TempDir;
using wire::json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args, const std::string& input = "") {
    args.insert(args.begin(), "fitodx");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::istringstream in(input);
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), in, out, err);
    return {code, out.str(), err.str()};
}

std::string kb() { return fitodx::testing::reference_kb_path().string(); }

std::string write_answers(const TempDir& dir, const std::string& name, const json& j) {
    const auto p = dir / name;
    std::ofstream(p) << j.dump();
    return p.string();
}

json answers_json(const AnswerMemo& m) {
    json j = json::object();
    for (const auto& [k, v] : m) j[k] = std::string(to_string(v));
    return j;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("diagnose from an answers file") {
    TempDir dir;
    Run r = run({"diagnose", "--kb", kb(), "--answers", write_answers(dir, "damping_off.json", answers_json(fitodx::testing::damping_off_answers()))});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("PYTHIUM APHANIDERMATUM (DAMPING OFF)\n", 0) == 0);

    AnswerMemo all_no = fitodx::testing::uniform_answers(*fitodx::testing::reference_kb(), Answer::No);
    Run none = run({"diagnose", "--kb", kb(), "--answers", write_answers(dir, "no.json", answers_json(all_no))});
    CHECK(none.code == 3);
    CHECK(none.out.find("no match") != std::string::npos);

    AnswerMemo partial = fitodx::testing::damping_off_answers();
    partial.erase("tabaco.p9");
    Run missing = run({"diagnose", "--kb", kb(), "--answers", write_answers(dir, "partial.json", answers_json(partial))});
    CHECK(missing.code == 4);
    CHECK(missing.err.find("tabaco.p9") != std::string::npos);
}

TEST_CASE("diagnose --trace prints JSON events") {
    TempDir dir;
    Run r = run({"diagnose", "--kb", kb(), "--trace", "--answers",
                 write_answers(dir, "damping_off.json", answers_json(fitodx::testing::damping_off_answers()))});
    CHECK(r.code == 0);
    std::istringstream lines(r.out);
    std::string line;
    int asked = 0;
    while (std::getline(lines, line)) {
        if (line.empty() || line.front() != '{') continue;
        asked += json::parse(line)["type"] == "asked";
    }
    CHECK(asked == 19);
}

TEST_CASE("answers files are strict") {
    TempDir dir;
    json j = answers_json(fitodx::testing::damping_off_answers());
    j["tabaco.p99"] = "si";
    Run unknown = run({"diagnose", "--kb", kb(), "--answers", write_answers(dir, "a.json", j)});
    CHECK(unknown.code == 2);
    CHECK(unknown.err.find("tabaco.p99") != std::string::npos);

    json k = answers_json(fitodx::testing::damping_off_answers());
    k["tabaco.p1"] = "sí";
    CHECK(run({"diagnose", "--kb", kb(), "--answers", write_answers(dir, "b.json", k)}).code == 2);
    k["tabaco.p1"] = true;
    CHECK(run({"diagnose", "--kb", kb(), "--answers", write_answers(dir, "c.json", k)}).code == 2);
    std::ofstream(dir / "d.json") << "[";
    CHECK(run({"diagnose", "--kb", kb(), "--answers", (dir / "d.json").string()}).code == 2);
    CHECK(run({"diagnose", "--kb", kb(), "--answers", (dir / "none.json").string()}).code == 2);
}

TEST_CASE("interactive diagnose") {
    std::string input;
    // Crop questions, with a few invalid tokens and short forms mixed in.
    input += "quizas\nn\nS\nno\nN\nno\nno\n\nno\n";
    for (std::size_t i = 0; i < std::size(fitodx::testing::kDampingOffOrder); ++i) {
        input += fitodx::testing::kDampingOffValues[i] == Answer::Si ? "Sí\n" : "no\n";
    }
    Run r = run({"diagnose", "--kb", kb()}, input);
    CHECK(r.code == 0);
    CHECK(r.out.find("es cultivo de arroz ?") != std::string::npos);
    CHECK(r.out.find("PYTHIUM APHANIDERMATUM (DAMPING OFF)") != std::string::npos);
    CHECK(r.out.find("fired tabaco.pythium") != std::string::npos);
    // Two invalid lines, two re-prompts.
    std::size_t reprompts = 0;
    for (std::size_t p = r.out.find("please answer"); p != std::string::npos; p = r.out.find("please answer", p + 1)) ++reprompts;
    CHECK(reprompts == 2);

    Run eof = run({"diagnose", "--kb", kb()}, "no\n");
    CHECK(eof.code == 2);
}

TEST_CASE("interactive and batch agree") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 20; ++i) {
        const AnswerMemo m = fitodx::testing::random_answers(*fitodx::testing::reference_kb(), rng);
        RunResult batch = run_with_answers(fitodx::testing::reference_kb(), m);
        std::string input;
        for (const auto& e : batch.trace) {
            if (const auto* a = std::get_if<trace::Asked>(&e)) input += std::string(to_string(a->answer)) + "\n";
        }
        Run r = run({"diagnose", "--kb", kb()}, input);
        CHECK(r.code == (is_diagnosed(batch.outcome) ? 0 : 3));
    }
}

TEST_CASE("diagnose with a broken knowledge base") {
    TempDir dir;
    std::ofstream(dir / "bad.fdx") << "kb \"t\" version 1 entry m module m { rule }";
    Run r = run({"diagnose", "--kb", (dir / "bad.fdx").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("error[SYNTAX]") != std::string::npos);
    CHECK(run({"diagnose"}).code == 2);
}

TEST_CASE("lint") {
    Run clean = run({"lint", "--kb", kb()});
    CHECK(clean.code == 0);

    Run shadowed = run({"lint", "--kb", fitodx::testing::data_path("shadowed.fdx").string()});
    CHECK(shadowed.code == 1);
    CHECK(shadowed.out.find("SHADOWED_RULE") != std::string::npos);
    CHECK(shadowed.out.find("witness:") != std::string::npos);

    Run js = run({"lint", "--kb", fitodx::testing::data_path("shadowed.fdx").string(), "--format", "json"});
    CHECK(js.code == 1);
    json j = json::parse(js.out);
    REQUIRE(j["findings"].size() >= 1);
    CHECK(j["findings"][0]["code"] == "SHADOWED_RULE");
    CHECK(j["findings"][0]["severity"] == "error");
    CHECK(j["findings"][0].contains("witness"));

    Run amb = run({"lint", "--kb", fitodx::testing::data_path("ambiguous.fdx").string(), "--format", "json"});
    CHECK(amb.code == 0);
    CHECK(json::parse(amb.out)["findings"][0]["severity"] == "warning");

    CHECK(run({"lint", "--kb", "/nonexistent.fdx"}).code == 2);
    CHECK(run({"lint", "--kb", kb(), "--format", "xml"}).code == 2);
}

TEST_CASE("matrix") {
    TempDir dir;
    const auto out = dir / "tabaco.csv";
    Run r = run({"matrix", "--kb", kb(), "--module", "tabaco", "--out", out.string()});
    CHECK(r.code == 0);
    const std::string csv = slurp(out);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4097);
    CHECK(csv.rfind("p1,p2,p3,p4,p5,p6,p7,p8,p9,p10,p11,p12,result\n", 0) == 0);
    CHECK(csv.find("no,no,si,no,no,no,no,no,si,no,no,si,pythium\n") != std::string::npos);

    Run again = run({"matrix", "--kb", kb(), "--module", "tabaco"});
    CHECK(again.out == csv);

    CHECK(run({"matrix", "--kb", kb(), "--module", "nope"}).code == 2);
    CHECK(run({"matrix", "--kb", kb(), "--module", "tabaco", "--cap", "100"}).code == 1);
    CHECK(run({"matrix", "--kb", "/nonexistent.fdx", "--module", "tabaco"}).code == 2);
}

TEST_CASE("help and usage errors") {
    CHECK(run({"--help"}).code == 0);
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
}

using fitodx::testing::free_port;
using fitodx::testing::spawn;
using fitodx::testing::wait_exit;
using fitodx::testing::wait_healthy;

TEST_CASE("serve: bad knowledge base exits before binding") {
    TempDir dir;
    const pid_t pid = spawn({"serve", "--kb", (dir / "missing.fdx").string(), "--log", (dir / "s.jsonl").string()}, dir / "err.txt");
    CHECK(wait_exit(pid) == 2);
    CHECK(slurp(dir / "err.txt").find("missing.fdx") != std::string::npos);
}

TEST_CASE("serve: answers, stops on SIGINT, keeps every acknowledged event") {
    TempDir dir;
    const int port = free_port();
    const auto log = dir / "s.jsonl";
    // The listen address comes from the environment, the rest from flags.
    const pid_t pid = spawn({"serve", "--kb", kb(), "--log", log.string()}, dir / "err.txt",
                            {{"FITODX_LISTEN", "127.0.0.1:" + std::to_string(port)}, {"FITODX_LOG", (dir / "ignored.jsonl").string()}});
    REQUIRE(wait_healthy(port));

    httplib::Client c("127.0.0.1", port);
    auto created = c.Post("/v1/sessions", "", "application/json");
    REQUIRE(created);
    const std::string id = json::parse(created->body)["session_id"];
    for (const char* q : {"principal.es_arroz", "principal.es_tabaco"}) {
        auto res = c.Post("/v1/sessions/" + id + "/answers", json{{"question_id", q}, {"answer", "no"}}.dump(), "application/json");
        REQUIRE(res);
        CHECK(res->status == 200);
    }

    kill(pid, SIGINT);
    CHECK(wait_exit(pid) == 0);
    CHECK_FALSE(std::filesystem::exists(dir / "ignored.jsonl"));

    ReplayReport report = replay_log(fitodx::testing::reference_kb(), log);
    REQUIRE(report.sessions.count(id) == 1);
    CHECK(report.sessions.at(id).state.memo().size() == 2);
    CHECK(report.errors.empty());
}
