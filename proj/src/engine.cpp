#include "fitodx/engine.hpp"

#include <algorithm>
#include <cassert>

namespace fitodx {

namespace {

std::string summarize(const std::vector<ParseDiagnostic>& diags) {
    std::string msg = "invalid knowledge base";
    for (const auto& d : diags) {
        if (d.severity == Severity::Error) {
            msg += ": " + format_diagnostic(d);
            break;
        }
    }
    return msg;
}

std::size_t module_index(const KnowledgeBase& kb, std::string_view name) {
    auto it = std::find_if(kb.modules.begin(), kb.modules.end(),
                           [&](const RuleModule& m) { return m.name == name; });
    assert(it != kb.modules.end());
    return static_cast<std::size_t>(it - kb.modules.begin());
}

}  // namespace

InvalidKb::InvalidKb(std::vector<ParseDiagnostic> diagnostics)
    : Error(summarize(diagnostics)), diagnostics_(std::move(diagnostics)) {}

NotPending::NotPending(const QuestionId& q)
    : Error("question '" + global_key(q) + "' is not the pending question"), question_(q) {}

MissingAnswer::MissingAnswer(const QuestionId& q, std::vector<TraceEvent> partial_trace)
    : Error("no answer given for question '" + global_key(q) + "'"), question_(q), trace_(std::move(partial_trace)) {}

const std::string& EngineState::pending_prompt() const {
    if (!pending_) throw Error("no pending question");
    return kb_->find_question(*pending_)->text;
}

void EngineState::step() {
    const KnowledgeBase& kb = *kb_;
    for (;;) {
        const RuleModule& mod = kb.modules[cursor_.module];
        if (cursor_.rule == mod.rules.size()) {
            outcome_ = NoMatch{mod.name};
            trace_.push_back(trace::Finished{*outcome_});
            return;
        }
        const Rule& rule = mod.rules[cursor_.rule];
        if (cursor_.literal == rule.literals.size()) {
            trace_.push_back(trace::RuleFired{mod.name, rule.id});
            if (const auto* d = std::get_if<Diagnose>(&rule.consequent)) {
                outcome_ = Diagnosed{mod.name, rule.id, d->diagnosis};
                trace_.push_back(trace::Finished{*outcome_});
                return;
            }
            const auto& target = std::get<Dispatch>(rule.consequent).target;
            trace_.push_back(trace::Dispatched{mod.name, target});
            cursor_ = Cursor{module_index(kb, target), 0, 0};
            continue;
        }

        const Literal& lit = rule.literals[cursor_.literal];
        auto it = memo_.find(global_key(lit.question));
        if (it == memo_.end()) {
            pending_ = lit.question;
            return;
        }
        if (it->second == lit.expected) {
            ++cursor_.literal;
        } else {
            trace_.push_back(trace::RuleFailed{mod.name, rule.id, lit.question});
            ++cursor_.rule;
            cursor_.literal = 0;
        }
    }
}

EngineState start(std::shared_ptr<const KnowledgeBase> kb) {
    auto diags = validate_kb(*kb);
    if (has_errors(diags)) throw InvalidKb(std::move(diags));
    return start_unchecked(std::move(kb));
}

EngineState start_unchecked(std::shared_ptr<const KnowledgeBase> kb) {
    EngineState state(std::move(kb));
    state.cursor_ = Cursor{module_index(*state.kb_, state.kb_->entry), 0, 0};
    state.step();
    return state;
}

void submit_answer(EngineState& state, const QuestionId& q, Answer a) {
    if (state.outcome_) throw SessionFinished();
    if (!state.pending_ || *state.pending_ != q) throw NotPending(q);

    const auto [it, fresh] = state.memo_.emplace(global_key(q), a);
    assert(fresh && "answer memo is write-once");
    (void)it;
    (void)fresh;
    state.trace_.push_back(trace::Asked{q, state.kb_->find_question(q)->text, a});
    state.pending_.reset();
    state.step();
}

std::vector<QuestionId> asked_questions(const EngineState& state) {
    std::vector<QuestionId> out;
    for (const auto& ev : state.trace()) {
        if (const auto* a = std::get_if<trace::Asked>(&ev)) out.push_back(a->question);
    }
    return out;
}

RunResult run_with_answers(std::shared_ptr<const KnowledgeBase> kb, const AnswerMemo& answers) {
    EngineState state = start(std::move(kb));
    while (!state.finished()) {
        const QuestionId q = *state.pending();
        auto it = answers.find(global_key(q));
        if (it == answers.end()) throw MissingAnswer(q, state.trace());
        submit_answer(state, q, it->second);
    }
    return RunResult{*state.outcome(), state.trace()};
}

RunResult run_with_answers(const KnowledgeBase& kb, const AnswerMemo& answers) {
    return run_with_answers(std::make_shared<const KnowledgeBase>(kb), answers);
}

Explanation explain(const EngineState& state) {
    if (!state.finished()) throw SessionUnfinished();

    Explanation ex{*state.outcome(), std::nullopt, {}, {}, {}};
    for (const auto& ev : state.trace()) {
        if (const auto* f = std::get_if<trace::RuleFailed>(&ev)) {
            ex.failed.push_back(*f);
        } else if (const auto* r = std::get_if<trace::RuleFired>(&ev)) {
            ex.path.push_back(FiredRule{r->module, r->rule});
        }
    }

    const auto* dx = std::get_if<Diagnosed>(&ex.outcome);
    if (!dx) return ex;

    // Last fired rule is the diagnosing one; the rest are dispatches.
    ex.path.pop_back();
    ex.fired = FiredRule{dx->module, dx->rule};
    const Rule* rule = state.kb().find_module(dx->module)->find_rule(dx->rule);

    std::vector<std::string> keys;
    for (const auto& lit : rule->literals) keys.push_back(global_key(lit.question));
    for (const auto& ev : state.trace()) {
        const auto* a = std::get_if<trace::Asked>(&ev);
        if (a && std::find(keys.begin(), keys.end(), global_key(a->question)) != keys.end()) {
            ex.supporting.push_back(SupportingAnswer{a->question, a->prompt, a->answer});
        }
    }
    return ex;
}

}  // namespace fitodx
