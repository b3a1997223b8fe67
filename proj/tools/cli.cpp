#include "cli.hpp"

#include <csignal>
#include <pthread.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "fitodx/analysis.hpp"
#include "fitodx/dsl.hpp"
#include "fitodx/engine.hpp"
#include "fitodx/service.hpp"
#include "fitodx/wire.hpp"

namespace fitodx::cli {

namespace {

using wire::json;

struct Streams {
    std::istream& in;
    std::ostream& out;
    std::ostream& err;
};

// Parses and validates; diagnostics go to stderr. Warnings do not fail the load.
std::shared_ptr<const KnowledgeBase> load(const std::string& path, std::ostream& err) {
    ParseResult r = load_kb_file(path);
    for (const auto& d : r.diagnostics) err << path << ":" << format_diagnostic(d) << "\n";
    if (!r.ok()) return nullptr;
    return std::make_shared<const KnowledgeBase>(std::move(*r.kb));
}

void print_outcome(const Outcome& outcome, std::ostream& out) {
    if (const auto* d = std::get_if<Diagnosed>(&outcome)) {
        out << d->diagnosis.name << "\n";
        if (!d->diagnosis.info.empty()) out << "\n" << d->diagnosis.info << "\n";
        if (!d->diagnosis.treatment.empty()) out << "\nTratamiento: " << d->diagnosis.treatment << "\n";
        for (const auto& img : d->diagnosis.images) out << "Imagen: " << img << "\n";
    } else {
        out << "no match (last module: " << std::get<NoMatch>(outcome).last_module << ")\n";
    }
}

void print_explanation(const Explanation& ex, std::ostream& out) {
    out << "\nexplanation:\n";
    for (const auto& p : ex.path) out << "  via " << p.module << "." << p.rule << "\n";
    if (ex.fired) {
        out << "  fired " << ex.fired->module << "." << ex.fired->rule << " because:\n";
        for (const auto& s : ex.supporting) {
            out << "    " << global_key(s.question) << " = " << to_string(s.answer) << "  (" << s.prompt << ")\n";
        }
    }
    out << "  rules rejected: " << ex.failed.size() << "\n";
}

int outcome_code(const Outcome& o) { return is_diagnosed(o) ? exit_code::kOk : exit_code::kNoMatch; }

// Strict: the file must be an object whose keys are declared questions and
// whose values are exactly "si" or "no".
std::optional<AnswerMemo> read_answers(const std::string& path, const KnowledgeBase& kb, std::ostream& err) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        err << "cannot open answers file '" << path << "'\n";
        return std::nullopt;
    }
    json doc = json::parse(f, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        err << path << ": expected a JSON object mapping question keys to \"si\" or \"no\"\n";
        return std::nullopt;
    }
    AnswerMemo memo;
    bool ok = true;
    for (const auto& [key, value] : doc.items()) {
        auto q = parse_global_key(key);
        if (!q || !kb.find_question(*q)) {
            err << path << ": unknown question key '" << key << "'\n";
            ok = false;
            continue;
        }
        if (!value.is_string() || (value != "si" && value != "no")) {
            err << path << ": answer for '" << key << "' must be \"si\" or \"no\"\n";
            ok = false;
            continue;
        }
        memo[key] = value == "si" ? Answer::Si : Answer::No;
    }
    if (!ok) return std::nullopt;
    return memo;
}

// si, sí, s, no, n in any case.
std::optional<Answer> read_interactive_token(const std::string& line) {
    std::string t;
    for (char c : line) {
        if (c != ' ' && c != '\t' && c != '\r') t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (t == "s") return Answer::Si;
    if (t == "n") return Answer::No;
    try {
        return answer_from_token(line);
    } catch (const UnknownAnswerToken&) {
        return std::nullopt;
    }
}

int cmd_diagnose(const std::string& kb_path, const std::string& answers_path, bool show_trace, Streams io) {
    auto kb = load(kb_path, io.err);
    if (!kb) return exit_code::kInputError;

    if (!answers_path.empty()) {
        auto memo = read_answers(answers_path, *kb, io.err);
        if (!memo) return exit_code::kInputError;
        try {
            RunResult r = run_with_answers(kb, *memo);
            print_outcome(r.outcome, io.out);
            if (show_trace) {
                for (const auto& e : r.trace) io.out << wire::event(e).dump() << "\n";
            }
            return outcome_code(r.outcome);
        } catch (const MissingAnswer& e) {
            io.err << "missing answer for " << global_key(e.question()) << "\n";
            return exit_code::kMissingAnswer;
        }
    }

    EngineState state = start(kb);
    while (!state.finished()) {
        const QuestionId q = *state.pending();
        io.out << state.pending_prompt() << " [si/no] " << std::flush;
        std::string line;
        if (!std::getline(io.in, line)) {
            io.err << "\ninput ended before a result was reached\n";
            return exit_code::kInputError;
        }
        auto a = read_interactive_token(line);
        if (!a) {
            io.out << "please answer si or no\n";
            continue;
        }
        submit_answer(state, q, *a);
    }
    io.out << "\n";
    print_outcome(*state.outcome(), io.out);
    print_explanation(explain(state), io.out);
    return outcome_code(*state.outcome());
}

int cmd_lint(const std::string& kb_path, const std::string& format, Streams io) {
    auto kb = load(kb_path, io.err);
    if (!kb) return exit_code::kInputError;
    const auto findings = lint(*kb);
    if (format == "json") {
        json arr = json::array();
        for (const auto& f : findings) arr.push_back(wire::finding(f));
        io.out << json{{"findings", std::move(arr)}}.dump(2) << "\n";
    } else {
        for (const auto& f : findings) {
            io.out << (severity_of(f.code) == LintSeverity::Error ? "error" : "warning") << " " << to_string(f.code)
                   << " [" << f.module << "] " << f.message << "\n";
            if (f.proof) {
                io.out << "  witness:";
                for (const auto& l : *f.proof) io.out << " " << l.question.local << "=" << to_string(l.expected);
                io.out << "\n";
            }
        }
        if (findings.empty()) io.out << "no findings\n";
    }
    return has_lint_errors(findings) ? exit_code::kLintErrors : exit_code::kOk;
}

int cmd_matrix(const std::string& kb_path, const std::string& module, const std::string& out_path,
               std::uint64_t cap, Streams io) {
    auto kb = load(kb_path, io.err);
    if (!kb) return exit_code::kInputError;
    const RuleModule* m = kb->find_module(module);
    if (!m) {
        io.err << "unknown module '" << module << "'\n";
        return exit_code::kInputError;
    }
    std::string csv;
    try {
        csv = matrix_to_csv(enumerate_matrix(*m, cap));
    } catch (const TooLarge& e) {
        io.err << e.what() << "\n";
        return exit_code::kTooLarge;
    }
    if (out_path.empty() || out_path == "-") {
        io.out << csv;
        return exit_code::kOk;
    }
    std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
    f << csv;
    if (!f.flush()) {
        io.err << "cannot write '" << out_path << "'\n";
        return exit_code::kInputError;
    }
    return exit_code::kOk;
}

struct ServeConfig {
    std::string kb_path;
    std::string listen = "127.0.0.1:8080";
    std::string log_path = "sessions.jsonl";
    std::string image_dir;
    std::int64_t ttl_seconds = 24 * 3600;
};

int cmd_serve(const ServeConfig& cfg, Streams io) {
    const auto colon = cfg.listen.rfind(':');
    int port = -1;
    if (colon != std::string::npos) {
        try {
            port = std::stoi(cfg.listen.substr(colon + 1));
        } catch (const std::exception&) {
        }
    }
    if (port < 0 || port > 65535) {
        io.err << "bad listen address '" << cfg.listen << "', expected HOST:PORT\n";
        return exit_code::kInputError;
    }
    const std::string host = cfg.listen.substr(0, colon);

    // Signals are taken synchronously by one thread; every thread started
    // after this inherits the blocked mask.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    sigaddset(&signals, SIGUSR1);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    ServiceOptions opts;
    opts.log_path = cfg.log_path;
    if (!cfg.image_dir.empty()) opts.image_dir = cfg.image_dir;
    opts.session_ttl = std::chrono::seconds(cfg.ttl_seconds);
    auto service = SessionService::from_file(cfg.kb_path, opts);
    if (!service->ready()) {
        io.err << service->load_error() << "\n";
        return exit_code::kInputError;
    }
    for (const auto& e : service->replay_errors()) io.err << "replay: " << e << "\n";

    HttpServer server(*service);
    const int bound = server.bind(host, port);
    if (bound < 0) {
        io.err << "cannot bind " << cfg.listen << "\n";
        return exit_code::kInputError;
    }
    io.err << "fitodx: " << service->restored_sessions() << " sessions restored, listening on http://" << host << ":"
           << bound << "/v1\n";

    std::thread signal_thread([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
    });

    std::mutex mu;
    std::condition_variable cv;
    bool stopping = false;
    std::thread sweeper([&] {
        const auto period = std::min<std::chrono::seconds>(opts.session_ttl, std::chrono::seconds(60));
        std::unique_lock lock(mu);
        while (!cv.wait_for(lock, std::max(period, std::chrono::seconds(1)), [&] { return stopping; })) {
            service->evict_idle();
        }
    });

    server.listen_after_bind();

    {
        std::lock_guard lock(mu);
        stopping = true;
    }
    cv.notify_all();
    sweeper.join();
    // Wakes the signal thread when the server stopped on its own.
    kill(getpid(), SIGUSR1);
    signal_thread.join();
    io.err << "fitodx: stopped\n";
    return exit_code::kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
    Streams io{in, out, err};
    CLI::App app{"Crop pest and disease diagnosis from rule-based knowledge bases", "fitodx"};
    app.require_subcommand(1);

    std::string kb_path;
    auto* diagnose = app.add_subcommand("diagnose", "Run a diagnosis interactively or from an answers file");
    std::string answers_path;
    bool show_trace = false;
    diagnose->add_option("--kb", kb_path, "Knowledge base file")->required();
    diagnose->add_option("--answers", answers_path, "JSON object of \"module.question\": \"si\"|\"no\"");
    diagnose->add_flag("--trace", show_trace, "Print the trace events as JSON lines (batch mode)");

    auto* lint_cmd = app.add_subcommand("lint", "Report shadowed, unsatisfiable and ambiguous rules");
    std::string format = "text";
    lint_cmd->add_option("--kb", kb_path, "Knowledge base file")->required();
    lint_cmd->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));

    auto* matrix = app.add_subcommand("matrix", "Write a module's decision matrix as CSV");
    std::string module, out_path;
    std::uint64_t cap = kDefaultMatrixCap;
    matrix->add_option("--kb", kb_path, "Knowledge base file")->required();
    matrix->add_option("--module", module, "Module name")->required();
    matrix->add_option("--out", out_path, "Output path; stdout when omitted");
    matrix->add_option("--cap", cap, "Largest number of rows to enumerate");

    auto* serve = app.add_subcommand("serve", "Serve the /v1 HTTP API");
    ServeConfig cfg;
    serve->add_option("--kb", cfg.kb_path, "Knowledge base file")->envname("FITODX_KB")->required();
    serve->add_option("--listen", cfg.listen, "HOST:PORT")->envname("FITODX_LISTEN");
    serve->add_option("--log", cfg.log_path, "Session log (JSONL)")->envname("FITODX_LOG");
    serve->add_option("--images", cfg.image_dir, "Directory served under /v1/images")->envname("FITODX_IMAGES");
    serve->add_option("--ttl", cfg.ttl_seconds, "Idle seconds before a session leaves memory")
        ->envname("FITODX_TTL")
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_code::kOk : exit_code::kInputError;
    }

    try {
        if (*diagnose) return cmd_diagnose(kb_path, answers_path, show_trace, io);
        if (*lint_cmd) return cmd_lint(kb_path, format, io);
        if (*matrix) return cmd_matrix(kb_path, module, out_path, cap, io);
        return cmd_serve(cfg, io);
    } catch (const InvalidKb& e) {
        for (const auto& d : e.diagnostics()) err << format_diagnostic(d) << "\n";
        return exit_code::kInputError;
    }
}

}  // namespace fitodx::cli
