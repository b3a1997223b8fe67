#pragma once
// Core data model for diagnosis knowledge bases.
//
// A knowledge base is an ordered list of rule modules. Each module declares
// yes/no questions and an ordered list of conjunctive rules; a rule either
// diagnoses or dispatches evaluation into another module. Everything here is
// a plain value type and immutable once handed to the engine.

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fitodx {

// Ordering matters: enumeration treats No < Si.
enum class Answer : std::uint8_t { No = 0, Si = 1 };

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnknownAnswerToken : public Error {
public:
    explicit UnknownAnswerToken(std::string token);
    const std::string& token() const noexcept { return token_; }

private:
    std::string token_;
};

// Accepts "si", "sí" and "no", ignoring ASCII case and surrounding whitespace.
Answer answer_from_token(std::string_view token);

// Canonical token: "si" or "no".
std::string_view to_string(Answer a) noexcept;

inline Answer negate(Answer a) noexcept { return a == Answer::Si ? Answer::No : Answer::Si; }

// [a-z_][a-z0-9_]*
bool is_identifier(std::string_view s) noexcept;

struct QuestionId {
    std::string module;
    std::string local;

    friend bool operator==(const QuestionId&, const QuestionId&) = default;
    friend auto operator<=>(const QuestionId&, const QuestionId&) = default;
};

// "module.local". Injective because '.' never occurs in an identifier.
std::string global_key(const QuestionId& q);

// Inverse of global_key; nullopt unless both halves are identifiers.
std::optional<QuestionId> parse_global_key(std::string_view key);

struct Question {
    QuestionId id;
    std::string text;

    friend bool operator==(const Question&, const Question&) = default;
};

struct Literal {
    QuestionId question;
    Answer expected = Answer::Si;

    friend bool operator==(const Literal&, const Literal&) = default;
};

struct Diagnosis {
    std::string name;
    std::string info;
    std::string treatment;
    std::vector<std::string> images;

    friend bool operator==(const Diagnosis&, const Diagnosis&) = default;
};

struct Diagnose {
    Diagnosis diagnosis;
    friend bool operator==(const Diagnose&, const Diagnose&) = default;
};

struct Dispatch {
    std::string target;
    friend bool operator==(const Dispatch&, const Dispatch&) = default;
};

using Consequent = std::variant<Diagnose, Dispatch>;

struct Rule {
    std::string id;
    std::vector<Literal> literals;  // evaluation order, significant
    Consequent consequent;

    friend bool operator==(const Rule&, const Rule&) = default;
};

struct RuleModule {
    std::string name;
    std::vector<Question> questions;
    std::vector<Rule> rules;  // priority order, first match wins

    const Question* find_question(std::string_view local) const noexcept;
    const Rule* find_rule(std::string_view id) const noexcept;

    friend bool operator==(const RuleModule&, const RuleModule&) = default;
};

struct KnowledgeBase {
    std::string title;
    std::uint64_t version = 0;
    std::string entry;
    std::vector<RuleModule> modules;

    const RuleModule* find_module(std::string_view name) const noexcept;
    const Question* find_question(const QuestionId& q) const noexcept;

    friend bool operator==(const KnowledgeBase&, const KnowledgeBase&) = default;
};

struct Diagnosed {
    std::string module;
    std::string rule;
    Diagnosis diagnosis;

    friend bool operator==(const Diagnosed&, const Diagnosed&) = default;
};

struct NoMatch {
    std::string last_module;
    friend bool operator==(const NoMatch&, const NoMatch&) = default;
};

using Outcome = std::variant<Diagnosed, NoMatch>;

inline bool is_diagnosed(const Outcome& o) noexcept { return std::holds_alternative<Diagnosed>(o); }

}  // namespace fitodx
