#pragma once
// Static analysis of knowledge bases and the brute-force reference classifier.
//
// classify() is the naive reading of first-match rule semantics: scan the
// rules in order and return the first one whose literals all hold under a
// total assignment. It never asks, never memoizes and never suspends, which
// makes it the oracle the engine is checked against.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fitodx/model.hpp"

namespace fitodx {

// Local question id -> answer, for one module.
using Assignment = std::map<std::string, Answer>;

class IncompleteAssignment : public Error {
public:
    explicit IncompleteAssignment(const QuestionId& q);
    const QuestionId& question() const noexcept { return question_; }

private:
    QuestionId question_;
};

class TooLarge : public Error {
public:
    TooLarge(std::size_t questions, std::uint64_t cap);
    std::size_t questions() const noexcept { return questions_; }
    std::uint64_t cap() const noexcept { return cap_; }

private:
    std::size_t questions_;
    std::uint64_t cap_;
};

struct RuleMatch {
    std::size_t index = 0;
    std::string rule;
    Consequent consequent;
    friend bool operator==(const RuleMatch&, const RuleMatch&) = default;
};

// nullopt is NoMatch. Throws IncompleteAssignment if any question referenced
// by the module's rules is unassigned.
std::optional<RuleMatch> classify(const RuleModule& module, const Assignment& assignment);

// Composes classify along the dispatch path from the entry module, with
// answers keyed by global question key.
Outcome classify_kb(const KnowledgeBase& kb, const std::map<std::string, Answer>& answers);

// Questions referenced by the module's rules, in declaration order.
std::vector<std::string> referenced_questions(const RuleModule& module);

inline constexpr std::uint64_t kDefaultMatrixCap = std::uint64_t{1} << 16;

struct MatrixRow {
    std::vector<Answer> answers;  // parallel to DecisionMatrix::questions
    std::optional<RuleMatch> result;
};

struct DecisionMatrix {
    std::string module;
    std::vector<std::string> questions;
    std::vector<MatrixRow> rows;
};

// Every total assignment over the referenced questions, in lexicographic
// order with the first question most significant and No < Si.
DecisionMatrix enumerate_matrix(const RuleModule& module, std::uint64_t cap = kDefaultMatrixCap);

// Header "q1,q2,...,result"; cells si/no; result is a rule id or NO_MATCH.
std::string matrix_to_csv(const DecisionMatrix& matrix);

enum class LintCode {
    ShadowedRule,
    UnsatisfiableRule,
    DuplicateDiagnosisName,
    UnusedQuestion,
    AmbiguousPair,
};

enum class LintSeverity { Error, Warning };

std::string_view to_string(LintCode code) noexcept;
LintSeverity severity_of(LintCode code) noexcept;

struct LintFinding {
    LintCode code;
    std::string module;
    std::vector<std::string> subjects;  // rule or question ids, primary subject first
    std::string message;
    std::optional<std::vector<Literal>> proof;  // witness assignment, declaration order
};

// Expects a knowledge base that passed validate_kb.
std::vector<LintFinding> lint(const KnowledgeBase& kb);

bool has_lint_errors(const std::vector<LintFinding>& findings) noexcept;

// Catalog view: every module except the entry, with its distinct diagnosis
// names in rule order.
struct CropSummary {
    std::string module;
    std::size_t question_count = 0;
    std::vector<std::string> diagnoses;
};

struct KbSummary {
    std::string title;
    std::uint64_t version = 0;
    std::vector<CropSummary> crops;
};

KbSummary summarize_kb(const KnowledgeBase& kb);

}  // namespace fitodx
