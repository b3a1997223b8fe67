// Python bindings. Structured values cross the boundary as JSON text in the
// same shapes the HTTP API uses; the fitodx package decodes them.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fitodx/analysis.hpp"
#include "fitodx/dsl.hpp"
#include "fitodx/engine.hpp"
#include "fitodx/wire.hpp"

namespace py = pybind11;
using namespace fitodx;
using wire::json;

namespace {

// The binding holds knowledge bases by non-const pointer because pybind11
// holders cannot be const; nothing exposed mutates one.
using KbPtr = std::shared_ptr<KnowledgeBase>;

// Raised to Python as KbError with the diagnostics attached as JSON.
struct KbErrorInfo {
    std::string message;
    std::string diagnostics;
};

KbPtr from_result(ParseResult r) {
    if (!r.ok()) {
        json diags = json::array();
        std::string first;
        for (const auto& d : r.diagnostics) {
            diags.push_back(wire::diagnostic(d));
            if (first.empty() && d.severity == Severity::Error) first = format_diagnostic(d);
        }
        throw KbErrorInfo{first, diags.dump()};
    }
    return std::make_shared<KnowledgeBase>(std::move(*r.kb));
}

AnswerMemo to_memo(const std::map<std::string, std::string>& answers) {
    AnswerMemo memo;
    for (const auto& [k, v] : answers) memo[k] = answer_from_token(v);
    return memo;
}

std::string trace_json(const std::vector<TraceEvent>& trace) {
    json out = json::array();
    for (const auto& e : trace) out.push_back(wire::event(e));
    return out.dump();
}

QuestionId question_or_throw(const std::string& key) {
    auto q = parse_global_key(key);
    if (!q) throw py::value_error("not a question id: '" + key + "'");
    return *q;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "fitodx expert-system shell";

    // Exception types live for the whole process, so plain handles suffice.
    static PyObject* base_error = PyErr_NewException("fitodx._core.FitodxError", PyExc_RuntimeError, nullptr);
    static PyObject* kb_error = PyErr_NewException("fitodx._core.KbError", base_error, nullptr);
    static PyObject* missing_answer = PyErr_NewException("fitodx._core.MissingAnswer", base_error, nullptr);
    static PyObject* not_pending = PyErr_NewException("fitodx._core.NotPending", base_error, nullptr);
    static PyObject* session_finished = PyErr_NewException("fitodx._core.SessionFinished", base_error, nullptr);
    m.attr("FitodxError") = py::handle(base_error);
    m.attr("KbError") = py::handle(kb_error);
    m.attr("MissingAnswer") = py::handle(missing_answer);
    m.attr("NotPending") = py::handle(not_pending);
    m.attr("SessionFinished") = py::handle(session_finished);

    py::register_exception_translator([](std::exception_ptr p) {
        auto raise = [](PyObject* type, const std::string& message, auto&& decorate) {
            py::object err = py::handle(type)(message);
            decorate(err);
            PyErr_SetObject(type, err.ptr());
        };
        auto plain = [](py::object&) {};
        try {
            if (p) std::rethrow_exception(p);
        } catch (const KbErrorInfo& e) {
            raise(kb_error, e.message, [&](py::object& err) { err.attr("diagnostics_json") = e.diagnostics; });
        } catch (const InvalidKb& e) {
            json diags = json::array();
            for (const auto& d : e.diagnostics()) diags.push_back(wire::diagnostic(d));
            raise(kb_error, e.what(), [&](py::object& err) { err.attr("diagnostics_json") = diags.dump(); });
        } catch (const MissingAnswer& e) {
            raise(missing_answer, e.what(), [&](py::object& err) {
                err.attr("question_id") = global_key(e.question());
                err.attr("trace_json") = trace_json(e.partial_trace());
            });
        } catch (const NotPending& e) {
            raise(not_pending, e.what(), plain);
        } catch (const SessionFinished& e) {
            raise(session_finished, e.what(), plain);
        } catch (const UnknownAnswerToken& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const Error& e) {
            raise(base_error, e.what(), plain);
        }
    });

    py::class_<KnowledgeBase, KbPtr>(m, "KnowledgeBase")
        .def_property_readonly("title", [](const KnowledgeBase& kb) { return kb.title; })
        .def_property_readonly("version", [](const KnowledgeBase& kb) { return kb.version; })
        .def_property_readonly("entry", [](const KnowledgeBase& kb) { return kb.entry; })
        .def_property_readonly("modules",
                               [](const KnowledgeBase& kb) {
                                   std::vector<std::string> names;
                                   for (const auto& mod : kb.modules) names.push_back(mod.name);
                                   return names;
                               })
        .def("serialize", [](const KnowledgeBase& kb) { return serialize_kb(kb); })
        .def("summary_json", [](const KnowledgeBase& kb) { return wire::summary(summarize_kb(kb)).dump(); })
        .def("lint_json",
             [](const KnowledgeBase& kb) {
                 json out = json::array();
                 for (const auto& f : lint(kb)) out.push_back(wire::finding(f));
                 return out.dump();
             })
        .def("matrix_csv",
             [](const KnowledgeBase& kb, const std::string& module, std::uint64_t cap) {
                 const RuleModule* mod = kb.find_module(module);
                 if (!mod) throw py::key_error("no module named '" + module + "'");
                 return matrix_to_csv(enumerate_matrix(*mod, cap));
             },
             py::arg("module"), py::arg("cap") = kDefaultMatrixCap)
        .def("__eq__", [](const KnowledgeBase& a, const KnowledgeBase& b) { return a == b; })
        .def("__repr__", [](const KnowledgeBase& kb) {
            return "<KnowledgeBase '" + kb.title + "' version " + std::to_string(kb.version) + ">";
        });

    m.def("parse_kb", [](const std::string& text) { return from_result(parse_kb(text)); }, py::arg("text"));
    m.def("load_kb", [](const std::string& path) { return from_result(load_kb_file(path)); }, py::arg("path"));

    m.def(
        "run_with_answers",
        [](const KbPtr& kb, const std::map<std::string, std::string>& answers) {
            RunResult r = run_with_answers(kb, to_memo(answers));
            return std::make_pair(wire::outcome(r.outcome).dump(), trace_json(r.trace));
        },
        py::arg("kb"), py::arg("answers"));

    m.def(
        "classify_kb",
        [](const KbPtr& kb, const std::map<std::string, std::string>& answers) {
            return wire::outcome(classify_kb(*kb, to_memo(answers))).dump();
        },
        py::arg("kb"), py::arg("answers"));

    py::class_<EngineState>(m, "Session")
        .def(py::init([](const KbPtr& kb) { return start(kb); }), py::arg("kb"))
        .def_property_readonly("finished", &EngineState::finished)
        .def_property_readonly("pending_json",
                               [](const EngineState& s) -> std::optional<std::string> {
                                   if (!s.pending()) return std::nullopt;
                                   return wire::pending(s).dump();
                               })
        .def_property_readonly("outcome_json",
                               [](const EngineState& s) -> std::optional<std::string> {
                                   if (!s.outcome()) return std::nullopt;
                                   return wire::outcome(*s.outcome()).dump();
                               })
        .def_property_readonly("trace_json", [](const EngineState& s) { return trace_json(s.trace()); })
        .def("answer",
             [](EngineState& s, const std::string& question_id, const std::string& answer) {
                 submit_answer(s, question_or_throw(question_id), answer_from_token(answer));
             },
             py::arg("question_id"), py::arg("answer"))
        .def("explanation_json", [](const EngineState& s) { return wire::explanation(explain(s)).dump(); });
}
