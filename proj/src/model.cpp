#include "fitodx/model.hpp"

#include <algorithm>

namespace fitodx {

UnknownAnswerToken::UnknownAnswerToken(std::string token)
    : Error("unknown answer token '" + token + "' (expected si or no)"), token_(std::move(token)) {}

namespace {

bool is_space(char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

Answer answer_from_token(std::string_view token) {
    std::string_view t = token;
    while (!t.empty() && is_space(t.front())) t.remove_prefix(1);
    while (!t.empty() && is_space(t.back())) t.remove_suffix(1);

    std::string lowered(t);
    for (char& c : lowered) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    // "sí" / "SÍ": s + U+00ED / U+00CD
    if (lowered == "si" || lowered == "s\xC3\xAD" || lowered == "s\xC3\x8D") return Answer::Si;
    if (lowered == "no") return Answer::No;
    throw UnknownAnswerToken(std::string(token));
}

std::string_view to_string(Answer a) noexcept { return a == Answer::Si ? "si" : "no"; }

bool is_identifier(std::string_view s) noexcept {
    if (s.empty()) return false;
    auto head = [](char c) { return (c >= 'a' && c <= 'z') || c == '_'; };
    auto tail = [&](char c) { return head(c) || (c >= '0' && c <= '9'); };
    return head(s.front()) && std::all_of(s.begin() + 1, s.end(), tail);
}

std::string global_key(const QuestionId& q) { return q.module + "." + q.local; }

std::optional<QuestionId> parse_global_key(std::string_view key) {
    auto dot = key.find('.');
    if (dot == std::string_view::npos) return std::nullopt;
    QuestionId q{std::string(key.substr(0, dot)), std::string(key.substr(dot + 1))};
    if (!is_identifier(q.module) || !is_identifier(q.local)) return std::nullopt;
    return q;
}

const Question* RuleModule::find_question(std::string_view local) const noexcept {
    auto it = std::find_if(questions.begin(), questions.end(),
                           [&](const Question& q) { return q.id.local == local; });
    return it == questions.end() ? nullptr : &*it;
}

const Rule* RuleModule::find_rule(std::string_view id) const noexcept {
    auto it = std::find_if(rules.begin(), rules.end(), [&](const Rule& r) { return r.id == id; });
    return it == rules.end() ? nullptr : &*it;
}

const RuleModule* KnowledgeBase::find_module(std::string_view name) const noexcept {
    auto it = std::find_if(modules.begin(), modules.end(),
                           [&](const RuleModule& m) { return m.name == name; });
    return it == modules.end() ? nullptr : &*it;
}

const Question* KnowledgeBase::find_question(const QuestionId& q) const noexcept {
    const RuleModule* m = find_module(q.module);
    return m ? m->find_question(q.local) : nullptr;
}

}  // namespace fitodx
