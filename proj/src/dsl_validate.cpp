#include <map>
#include <set>
#include <sstream>
#include <string>

#include "dsl_internal.hpp"

namespace fitodx {

namespace detail {

namespace {

class Validator {
public:
    Validator(const KnowledgeBase& kb, const SourceMap* spans) : kb_(kb), spans_(spans) {}

    std::vector<ParseDiagnostic> run() {
        check_modules();
        check_entry();
        for (std::size_t m = 0; m < kb_.modules.size(); ++m) check_module(m);
        check_dispatch_graph();
        return std::move(out_);
    }

private:
    void report(Severity sev, std::string_view code, std::optional<SourceSpan> span, std::string msg) {
        out_.push_back(ParseDiagnostic{sev, span, std::string(code), std::move(msg)});
    }
    void error(std::string_view code, std::optional<SourceSpan> span, std::string msg) {
        report(Severity::Error, code, span, std::move(msg));
    }

    std::optional<SourceSpan> module_span(std::size_t m) const {
        if (!spans_ || m >= spans_->modules.size()) return std::nullopt;
        return spans_->modules[m].name;
    }
    std::optional<SourceSpan> question_span(std::size_t m, std::size_t q) const {
        if (!spans_ || m >= spans_->modules.size() || q >= spans_->modules[m].questions.size())
            return std::nullopt;
        return spans_->modules[m].questions[q];
    }
    const RuleSpans* rule_spans(std::size_t m, std::size_t r) const {
        if (!spans_ || m >= spans_->modules.size() || r >= spans_->modules[m].rules.size())
            return nullptr;
        return &spans_->modules[m].rules[r];
    }
    std::optional<SourceSpan> rule_span(std::size_t m, std::size_t r) const {
        const RuleSpans* rs = rule_spans(m, r);
        return rs ? std::optional(rs->id) : std::nullopt;
    }
    std::optional<SourceSpan> literal_span(std::size_t m, std::size_t r, std::size_t l) const {
        const RuleSpans* rs = rule_spans(m, r);
        if (!rs || l >= rs->literals.size()) return std::nullopt;
        return rs->literals[l];
    }
    std::optional<SourceSpan> consequent_span(std::size_t m, std::size_t r) const {
        const RuleSpans* rs = rule_spans(m, r);
        return rs ? std::optional(rs->consequent) : std::nullopt;
    }

    void check_modules() {
        std::set<std::string> seen;
        for (std::size_t m = 0; m < kb_.modules.size(); ++m) {
            const auto& name = kb_.modules[m].name;
            if (!is_identifier(name)) {
                error(codes::kBadIdent, module_span(m), "invalid module name '" + name + "'");
            }
            if (!seen.insert(name).second) {
                error(codes::kDupModule, module_span(m), "duplicate module '" + name + "'");
            } else {
                index_.emplace(name, m);
            }
        }
    }

    void check_entry() {
        std::optional<SourceSpan> span;
        if (spans_) span = spans_->entry;
        if (!index_.count(kb_.entry)) {
            error(codes::kNoEntry, span, "entry module '" + kb_.entry + "' is not defined");
        }
    }

    void check_module(std::size_t m) {
        const RuleModule& mod = kb_.modules[m];

        std::set<std::string> questions;
        for (std::size_t q = 0; q < mod.questions.size(); ++q) {
            const Question& question = mod.questions[q];
            const auto& local = question.id.local;
            if (!is_identifier(local)) {
                error(codes::kBadIdent, question_span(m, q), "invalid question id '" + local + "'");
            }
            if (question.id.module != mod.name) {
                error(codes::kBadIdent, question_span(m, q),
                      "question '" + local + "' is qualified with module '" + question.id.module +
                          "' but declared in '" + mod.name + "'");
            }
            if (question.text.empty()) {
                error(codes::kEmptyText, question_span(m, q), "question '" + local + "' has empty text");
            }
            if (!questions.insert(local).second) {
                error(codes::kDupQuestion, question_span(m, q),
                      "duplicate question '" + local + "' in module '" + mod.name + "'");
            }
        }

        std::set<std::string> rules;
        for (std::size_t r = 0; r < mod.rules.size(); ++r) {
            const Rule& rule = mod.rules[r];
            if (!is_identifier(rule.id)) {
                error(codes::kBadIdent, rule_span(m, r), "invalid rule id '" + rule.id + "'");
            }
            if (!rules.insert(rule.id).second) {
                error(codes::kDupRule, rule_span(m, r),
                      "duplicate rule '" + rule.id + "' in module '" + mod.name + "'");
            }
            if (rule.literals.empty()) {
                error(codes::kEmptyRule, rule_span(m, r), "rule '" + rule.id + "' has no literals");
            }
            check_literals(m, r, questions);
            check_consequent(m, r);
        }
    }

    void check_literals(std::size_t m, std::size_t r, const std::set<std::string>& declared) {
        const RuleModule& mod = kb_.modules[m];
        const Rule& rule = mod.rules[r];
        std::map<std::string, Answer> seen;
        for (std::size_t l = 0; l < rule.literals.size(); ++l) {
            const Literal& lit = rule.literals[l];
            const auto& local = lit.question.local;
            if (lit.question.module != mod.name) {
                error(codes::kUndefQuestion, literal_span(m, r, l),
                      "rule '" + rule.id + "' refers to question '" + global_key(lit.question) +
                          "' outside module '" + mod.name + "'");
                continue;
            }
            if (!declared.count(local)) {
                error(codes::kUndefQuestion, literal_span(m, r, l),
                      "rule '" + rule.id + "' refers to undeclared question '" + local + "'");
            }
            auto [it, fresh] = seen.emplace(local, lit.expected);
            if (fresh) continue;
            if (it->second != lit.expected) {
                error(codes::kContradiction, literal_span(m, r, l),
                      "rule '" + rule.id + "' requires '" + local + "' to be both si and no");
            } else {
                error(codes::kDupLiteral, literal_span(m, r, l),
                      "rule '" + rule.id + "' repeats literal '" + local + "'");
            }
        }
    }

    void check_consequent(std::size_t m, std::size_t r) {
        const Rule& rule = kb_.modules[m].rules[r];
        if (const auto* d = std::get_if<Diagnose>(&rule.consequent)) {
            if (d->diagnosis.name.empty()) {
                error(codes::kEmptyText, consequent_span(m, r),
                      "rule '" + rule.id + "' diagnoses an empty name");
            }
            return;
        }
        const auto& target = std::get<Dispatch>(rule.consequent).target;
        if (!index_.count(target)) {
            error(codes::kUndefModule, consequent_span(m, r),
                  "rule '" + rule.id + "' dispatches to undefined module '" + target + "'");
        }
    }

    struct Edge {
        std::size_t target;
        std::size_t rule;
    };

    void check_dispatch_graph() {
        const std::size_t n = kb_.modules.size();
        std::vector<std::vector<Edge>> edges(n);
        for (std::size_t m = 0; m < n; ++m) {
            // Duplicate module names resolve to the first declaration.
            if (index_.at(kb_.modules[m].name) != m) continue;
            const auto& rules = kb_.modules[m].rules;
            for (std::size_t r = 0; r < rules.size(); ++r) {
                if (const auto* d = std::get_if<Dispatch>(&rules[r].consequent)) {
                    auto it = index_.find(d->target);
                    if (it != index_.end()) edges[m].push_back({it->second, r});
                }
            }
        }

        enum class Color { White, Grey, Black };
        std::vector<Color> color(n, Color::White);
        std::vector<std::size_t> path;

        // Iterative DFS; each back edge is one reported cycle.
        for (std::size_t root = 0; root < n; ++root) {
            if (color[root] != Color::White) continue;
            std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
            color[root] = Color::Grey;
            path.push_back(root);
            while (!stack.empty()) {
                auto& [node, next] = stack.back();
                if (next == edges[node].size()) {
                    color[node] = Color::Black;
                    path.pop_back();
                    stack.pop_back();
                    continue;
                }
                const Edge e = edges[node][next++];
                if (color[e.target] == Color::Grey) {
                    report_cycle(path, node, e);
                } else if (color[e.target] == Color::White) {
                    color[e.target] = Color::Grey;
                    path.push_back(e.target);
                    stack.push_back({e.target, 0});
                }
            }
        }

        auto entry = index_.find(kb_.entry);
        if (entry == index_.end()) return;
        std::vector<bool> reached(n, false);
        std::vector<std::size_t> work{entry->second};
        reached[entry->second] = true;
        while (!work.empty()) {
            std::size_t m = work.back();
            work.pop_back();
            for (const Edge& e : edges[m]) {
                if (!reached[e.target]) {
                    reached[e.target] = true;
                    work.push_back(e.target);
                }
            }
        }
        for (std::size_t m = 0; m < n; ++m) {
            if (!reached[m] && index_.at(kb_.modules[m].name) == m) {
                report(Severity::Warning, codes::kUnreachableModule, module_span(m),
                       "module '" + kb_.modules[m].name + "' is not reachable from entry '" +
                           kb_.entry + "'");
            }
        }
    }

    void report_cycle(const std::vector<std::size_t>& path, std::size_t from, const Edge& e) {
        std::ostringstream msg;
        msg << "dispatch cycle: ";
        bool on = false;
        for (std::size_t m : path) {
            if (m == e.target) on = true;
            if (on) msg << kb_.modules[m].name << " -> ";
        }
        msg << kb_.modules[e.target].name;
        error(codes::kDispatchCycle, consequent_span(from, e.rule), msg.str());
    }

    const KnowledgeBase& kb_;
    const SourceMap* spans_;
    std::map<std::string, std::size_t> index_;
    std::vector<ParseDiagnostic> out_;
};

}  // namespace

std::vector<ParseDiagnostic> validate_with_spans(const KnowledgeBase& kb, const SourceMap* spans) {
    return Validator(kb, spans).run();
}

std::optional<std::size_t> find_invalid_utf8(std::string_view text) noexcept {
    const auto* s = reinterpret_cast<const unsigned char*>(text.data());
    const std::size_t n = text.size();
    std::size_t i = 0;
    while (i < n) {
        const unsigned char c = s[i];
        if (c < 0x80) {
            ++i;
            continue;
        }
        std::size_t len;
        std::uint32_t cp;
        if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return i;
        }
        if (i + len > n) return i;
        for (std::size_t k = 1; k < len; ++k) {
            if ((s[i + k] & 0xC0) != 0x80) return i;
            cp = (cp << 6) | (s[i + k] & 0x3F);
        }
        const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
                              (len == 4 && cp < 0x10000);
        if (overlong || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return i;
        i += len;
    }
    return std::nullopt;
}

}  // namespace detail

std::vector<ParseDiagnostic> validate_kb(const KnowledgeBase& kb) {
    return detail::validate_with_spans(kb, nullptr);
}

bool has_errors(const std::vector<ParseDiagnostic>& diags) noexcept {
    for (const auto& d : diags) {
        if (d.severity == Severity::Error) return true;
    }
    return false;
}

std::string format_diagnostic(const ParseDiagnostic& d) {
    std::string out;
    if (d.span) out += std::to_string(d.span->line) + ":" + std::to_string(d.span->column) + ": ";
    out += d.severity == Severity::Error ? "error" : "warning";
    out += "[" + d.code + "]: " + d.message;
    return out;
}

}  // namespace fitodx
