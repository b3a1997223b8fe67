#pragma once
// Backward-chaining evaluation of a knowledge base, one question at a time.
//
// Rules of the current module are tried in declaration order and their
// literals in listed order. An unanswered question suspends evaluation until
// submit_answer supplies it; an answer that contradicts a literal fails the
// rule and evaluation moves to the next one. Answers are memoized for the
// whole session, so no question is ever asked twice. A satisfied rule either
// diagnoses (the session ends) or dispatches into another module, with no way
// back: a dispatched module that matches nothing ends the session as NoMatch.

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fitodx/dsl.hpp"
#include "fitodx/model.hpp"

namespace fitodx {

class InvalidKb : public Error {
public:
    explicit InvalidKb(std::vector<ParseDiagnostic> diagnostics);
    const std::vector<ParseDiagnostic>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<ParseDiagnostic> diagnostics_;
};

class NotPending : public Error {
public:
    explicit NotPending(const QuestionId& q);
    const QuestionId& question() const noexcept { return question_; }

private:
    QuestionId question_;
};

class SessionFinished : public Error {
public:
    SessionFinished() : Error("session already finished") {}
};

class SessionUnfinished : public Error {
public:
    SessionUnfinished() : Error("session has not finished") {}
};

namespace trace {

struct Asked {
    QuestionId question;
    std::string prompt;
    Answer answer;
    friend bool operator==(const Asked&, const Asked&) = default;
};

struct RuleFailed {
    std::string module;
    std::string rule;
    QuestionId failed_at;
    friend bool operator==(const RuleFailed&, const RuleFailed&) = default;
};

struct RuleFired {
    std::string module;
    std::string rule;
    friend bool operator==(const RuleFired&, const RuleFired&) = default;
};

struct Dispatched {
    std::string from_module;
    std::string to_module;
    friend bool operator==(const Dispatched&, const Dispatched&) = default;
};

struct Finished {
    Outcome outcome;
    friend bool operator==(const Finished&, const Finished&) = default;
};

}  // namespace trace

using TraceEvent =
    std::variant<trace::Asked, trace::RuleFailed, trace::RuleFired, trace::Dispatched, trace::Finished>;

class MissingAnswer : public Error {
public:
    MissingAnswer(const QuestionId& q, std::vector<TraceEvent> partial_trace);
    const QuestionId& question() const noexcept { return question_; }
    // Events produced before evaluation stopped at question().
    const std::vector<TraceEvent>& partial_trace() const noexcept { return trace_; }

private:
    QuestionId question_;
    std::vector<TraceEvent> trace_;
};

// Global question key -> answer. Write-once per key.
using AnswerMemo = std::map<std::string, Answer>;

struct Cursor {
    std::size_t module = 0;  // index into KnowledgeBase::modules
    std::size_t rule = 0;    // == rules.size() is the end-of-module sentinel
    std::size_t literal = 0;
    friend bool operator==(const Cursor&, const Cursor&) = default;
};

class EngineState {
public:
    const KnowledgeBase& kb() const noexcept { return *kb_; }
    const std::shared_ptr<const KnowledgeBase>& kb_ptr() const noexcept { return kb_; }
    const AnswerMemo& memo() const noexcept { return memo_; }
    const std::vector<TraceEvent>& trace() const noexcept { return trace_; }
    const Cursor& cursor() const noexcept { return cursor_; }
    const std::optional<QuestionId>& pending() const noexcept { return pending_; }
    const std::optional<Outcome>& outcome() const noexcept { return outcome_; }
    bool finished() const noexcept { return outcome_.has_value(); }

    // Prompt text of the pending question.
    const std::string& pending_prompt() const;

private:
    friend EngineState start(std::shared_ptr<const KnowledgeBase> kb);
    friend EngineState start_unchecked(std::shared_ptr<const KnowledgeBase> kb);
    friend void submit_answer(EngineState& state, const QuestionId& q, Answer a);

    explicit EngineState(std::shared_ptr<const KnowledgeBase> kb) : kb_(std::move(kb)) {}
    void step();

    std::shared_ptr<const KnowledgeBase> kb_;
    AnswerMemo memo_;
    std::vector<TraceEvent> trace_;
    Cursor cursor_;
    std::optional<QuestionId> pending_;
    std::optional<Outcome> outcome_;
};

// Validates the knowledge base (throws InvalidKb on any error) and runs
// evaluation up to the first question.
EngineState start(std::shared_ptr<const KnowledgeBase> kb);

// As start, for a knowledge base the caller has already validated.
EngineState start_unchecked(std::shared_ptr<const KnowledgeBase> kb);

// Answers the pending question and evaluates up to the next question or the end.
// Throws SessionFinished, or NotPending when q is not the awaited question.
void submit_answer(EngineState& state, const QuestionId& q, Answer a);

// Value-returning form.
inline EngineState answered(EngineState state, const QuestionId& q, Answer a) {
    submit_answer(state, q, a);
    return state;
}

// Questions in first-ask order.
std::vector<QuestionId> asked_questions(const EngineState& state);

struct RunResult {
    Outcome outcome;
    std::vector<TraceEvent> trace;
};

// Drives a session from a preset answer source keyed by global question key.
// Throws MissingAnswer when evaluation needs a question absent from the map.
RunResult run_with_answers(std::shared_ptr<const KnowledgeBase> kb, const AnswerMemo& answers);
RunResult run_with_answers(const KnowledgeBase& kb, const AnswerMemo& answers);

struct SupportingAnswer {
    QuestionId question;
    std::string prompt;
    Answer answer;
    friend bool operator==(const SupportingAnswer&, const SupportingAnswer&) = default;
};

struct FiredRule {
    std::string module;
    std::string rule;
    friend bool operator==(const FiredRule&, const FiredRule&) = default;
};

struct Explanation {
    Outcome outcome;
    std::optional<FiredRule> fired;            // the diagnosing rule
    std::vector<SupportingAnswer> supporting;  // its literals, in ask order
    std::vector<FiredRule> path;               // dispatch rules that led there
    std::vector<trace::RuleFailed> failed;     // every rule tried and rejected
};

// Throws SessionUnfinished.
Explanation explain(const EngineState& state);

}  // namespace fitodx
