#pragma once
// JSON shapes shared by the HTTP service, the session log and the CLI.

#include <json.hpp>

#include "fitodx/analysis.hpp"
#include "fitodx/dsl.hpp"
#include "fitodx/engine.hpp"

namespace fitodx::wire {

using json = nlohmann::ordered_json;

json diagnosis(const Diagnosis& d);

// {"status": "diagnosed", "module", "rule", "diagnosis": {...}}
// {"status": "no_match", "module"}
json outcome(const Outcome& o);

// {"type": "asked" | "rule_failed" | "rule_fired" | "dispatched" | "finished", ...}
json event(const TraceEvent& e);

// {"question_id", "prompt", "ordinal"}; ordinal counts from 1.
json pending(const EngineState& state);

json explanation(const Explanation& ex);

json finding(const LintFinding& f);

json diagnostic(const ParseDiagnostic& d);

json summary(const KbSummary& s);

}  // namespace fitodx::wire
