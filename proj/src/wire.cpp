#include "fitodx/wire.hpp"

namespace fitodx::wire {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

json answered(const QuestionId& q, const std::string& prompt, Answer a) {
    return json{{"question_id", global_key(q)}, {"prompt", prompt}, {"answer", to_string(a)}};
}

}  // namespace

json diagnosis(const Diagnosis& d) {
    return json{{"name", d.name}, {"info", d.info}, {"treatment", d.treatment}, {"images", d.images}};
}

json outcome(const Outcome& o) {
    return std::visit(overloaded{
                          [](const Diagnosed& d) {
                              return json{{"status", "diagnosed"},
                                          {"module", d.module},
                                          {"rule", d.rule},
                                          {"diagnosis", diagnosis(d.diagnosis)}};
                          },
                          [](const NoMatch& n) {
                              return json{{"status", "no_match"}, {"module", n.last_module}};
                          },
                      },
                      o);
}

json event(const TraceEvent& e) {
    return std::visit(overloaded{
                          [](const trace::Asked& a) {
                              json j{{"type", "asked"}};
                              j.update(answered(a.question, a.prompt, a.answer));
                              return j;
                          },
                          [](const trace::RuleFailed& f) {
                              return json{{"type", "rule_failed"},
                                          {"module", f.module},
                                          {"rule", f.rule},
                                          {"failed_at", global_key(f.failed_at)}};
                          },
                          [](const trace::RuleFired& f) {
                              return json{{"type", "rule_fired"}, {"module", f.module}, {"rule", f.rule}};
                          },
                          [](const trace::Dispatched& d) {
                              return json{{"type", "dispatched"}, {"from", d.from_module}, {"to", d.to_module}};
                          },
                          [](const trace::Finished& f) {
                              return json{{"type", "finished"}, {"outcome", outcome(f.outcome)}};
                          },
                      },
                      e);
}

json pending(const EngineState& state) {
    return json{{"question_id", global_key(*state.pending())},
                {"prompt", state.pending_prompt()},
                {"ordinal", state.memo().size() + 1}};
}

json explanation(const Explanation& ex) {
    json j{{"outcome", outcome(ex.outcome)}};
    if (ex.fired) j["fired"] = json{{"module", ex.fired->module}, {"rule", ex.fired->rule}};
    json supporting = json::array();
    for (const auto& s : ex.supporting) supporting.push_back(answered(s.question, s.prompt, s.answer));
    j["supporting"] = std::move(supporting);
    json path = json::array();
    for (const auto& p : ex.path) path.push_back(json{{"module", p.module}, {"rule", p.rule}});
    j["path"] = std::move(path);
    json failed = json::array();
    for (const auto& f : ex.failed) {
        failed.push_back(json{{"module", f.module}, {"rule", f.rule}, {"failed_at", global_key(f.failed_at)}});
    }
    j["failed"] = std::move(failed);
    return j;
}

json finding(const LintFinding& f) {
    json j{{"code", to_string(f.code)},
           {"severity", severity_of(f.code) == LintSeverity::Error ? "error" : "warning"},
           {"module", f.module},
           {"subjects", f.subjects},
           {"message", f.message}};
    if (f.proof) {
        json w = json::object();
        for (const auto& l : *f.proof) w[l.question.local] = to_string(l.expected);
        j["witness"] = std::move(w);
    }
    return j;
}

json diagnostic(const ParseDiagnostic& d) {
    json j{{"severity", d.severity == Severity::Error ? "error" : "warning"}, {"code", d.code}, {"message", d.message}};
    if (d.span) {
        j["span"] = json{{"line", d.span->line}, {"column", d.span->column}, {"offset", d.span->offset}};
    }
    return j;
}

json summary(const KbSummary& s) {
    json crops = json::array();
    for (const auto& c : s.crops) {
        crops.push_back(json{{"module", c.module}, {"question_count", c.question_count}, {"diagnoses", c.diagnoses}});
    }
    return json{{"title", s.title}, {"version", s.version}, {"crops", std::move(crops)}};
}

}  // namespace fitodx::wire
