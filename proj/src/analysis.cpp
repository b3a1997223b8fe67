#include "fitodx/analysis.hpp"

#include <algorithm>
#include <set>

namespace fitodx {

IncompleteAssignment::IncompleteAssignment(const QuestionId& q)
    : Error("assignment has no value for question '" + global_key(q) + "'"), question_(q) {}

TooLarge::TooLarge(std::size_t questions, std::uint64_t cap)
    : Error("module references " + std::to_string(questions) + " questions; 2^" +
            std::to_string(questions) + " assignments exceed the cap of " + std::to_string(cap)),
      questions_(questions),
      cap_(cap) {}

std::vector<std::string> referenced_questions(const RuleModule& module) {
    std::set<std::string> used;
    std::vector<std::string> undeclared;
    for (const Rule& r : module.rules) {
        for (const Literal& l : r.literals) {
            if (used.insert(l.question.local).second && !module.find_question(l.question.local)) {
                undeclared.push_back(l.question.local);
            }
        }
    }
    std::vector<std::string> out;
    for (const Question& q : module.questions) {
        if (used.count(q.id.local)) out.push_back(q.id.local);
    }
    out.insert(out.end(), undeclared.begin(), undeclared.end());
    return out;
}

std::optional<RuleMatch> classify(const RuleModule& module, const Assignment& assignment) {
    for (const Rule& r : module.rules) {
        for (const Literal& l : r.literals) {
            if (!assignment.count(l.question.local)) {
                throw IncompleteAssignment(QuestionId{module.name, l.question.local});
            }
        }
    }
    for (std::size_t i = 0; i < module.rules.size(); ++i) {
        const Rule& r = module.rules[i];
        bool holds = std::all_of(r.literals.begin(), r.literals.end(), [&](const Literal& l) {
            return assignment.at(l.question.local) == l.expected;
        });
        if (holds) return RuleMatch{i, r.id, r.consequent};
    }
    return std::nullopt;
}

Outcome classify_kb(const KnowledgeBase& kb, const std::map<std::string, Answer>& answers) {
    const RuleModule* mod = kb.find_module(kb.entry);
    if (!mod) throw Error("entry module '" + kb.entry + "' is not defined");
    for (std::size_t hops = 0; hops <= kb.modules.size(); ++hops) {
        Assignment local;
        const std::string prefix = mod->name + ".";
        for (const auto& [key, a] : answers) {
            if (key.compare(0, prefix.size(), prefix) == 0) local.emplace(key.substr(prefix.size()), a);
        }
        auto match = classify(*mod, local);
        if (!match) return NoMatch{mod->name};
        if (const auto* d = std::get_if<Diagnose>(&match->consequent)) {
            return Diagnosed{mod->name, match->rule, d->diagnosis};
        }
        const auto& target = std::get<Dispatch>(match->consequent).target;
        mod = kb.find_module(target);
        if (!mod) throw Error("dispatch to undefined module '" + target + "'");
    }
    throw Error("dispatch cycle");
}

DecisionMatrix enumerate_matrix(const RuleModule& module, std::uint64_t cap) {
    DecisionMatrix m;
    m.module = module.name;
    m.questions = referenced_questions(module);
    const std::size_t n = m.questions.size();
    if (n >= 63 || (std::uint64_t{1} << n) > cap) throw TooLarge(n, cap);

    const std::uint64_t total = std::uint64_t{1} << n;
    m.rows.reserve(total);
    Assignment assignment;
    for (std::uint64_t bits = 0; bits < total; ++bits) {
        MatrixRow row;
        row.answers.resize(n);
        for (std::size_t q = 0; q < n; ++q) {
            // First question is the most significant bit.
            const bool si = (bits >> (n - 1 - q)) & 1u;
            row.answers[q] = si ? Answer::Si : Answer::No;
            assignment[m.questions[q]] = row.answers[q];
        }
        row.result = classify(module, assignment);
        m.rows.push_back(std::move(row));
    }
    return m;
}

std::string matrix_to_csv(const DecisionMatrix& matrix) {
    std::string out;
    for (const auto& q : matrix.questions) out += q + ",";
    out += "result\n";
    for (const auto& row : matrix.rows) {
        for (Answer a : row.answers) {
            out += to_string(a);
            out += ',';
        }
        out += row.result ? row.result->rule : "NO_MATCH";
        out += '\n';
    }
    return out;
}

std::string_view to_string(LintCode code) noexcept {
    switch (code) {
        case LintCode::ShadowedRule: return "SHADOWED_RULE";
        case LintCode::UnsatisfiableRule: return "UNSATISFIABLE_RULE";
        case LintCode::DuplicateDiagnosisName: return "DUPLICATE_DIAGNOSIS_NAME";
        case LintCode::UnusedQuestion: return "UNUSED_QUESTION";
        case LintCode::AmbiguousPair: return "AMBIGUOUS_PAIR";
    }
    return "UNKNOWN";
}

LintSeverity severity_of(LintCode code) noexcept {
    switch (code) {
        case LintCode::UnusedQuestion:
        case LintCode::AmbiguousPair: return LintSeverity::Warning;
        default: return LintSeverity::Error;
    }
}

bool has_lint_errors(const std::vector<LintFinding>& findings) noexcept {
    return std::any_of(findings.begin(), findings.end(),
                       [](const LintFinding& f) { return severity_of(f.code) == LintSeverity::Error; });
}

namespace {

using LiteralSet = std::map<std::string, Answer>;

LiteralSet literal_set(const Rule& r) {
    LiteralSet s;
    for (const Literal& l : r.literals) s.emplace(l.question.local, l.expected);
    return s;
}

bool contradictory(const Rule& r) {
    LiteralSet seen;
    for (const Literal& l : r.literals) {
        auto [it, fresh] = seen.emplace(l.question.local, l.expected);
        if (!fresh && it->second != l.expected) return true;
    }
    return false;
}

bool subset(const LiteralSet& a, const LiteralSet& b) {
    return std::all_of(a.begin(), a.end(), [&](const auto& kv) {
        auto it = b.find(kv.first);
        return it != b.end() && it->second == kv.second;
    });
}

bool compatible(const LiteralSet& a, const LiteralSet& b) {
    return std::all_of(a.begin(), a.end(), [&](const auto& kv) {
        auto it = b.find(kv.first);
        return it == b.end() || it->second == kv.second;
    });
}

class ModuleLinter {
public:
    ModuleLinter(const RuleModule& mod, std::vector<LintFinding>& out) : mod_(mod), out_(out) {
        order_ = referenced_questions(mod);
        for (const Question& q : mod.questions) {
            if (std::find(order_.begin(), order_.end(), q.id.local) == order_.end()) {
                unused_.push_back(q.id.local);
            }
        }
        for (const Rule& r : mod.rules) sets_.push_back(literal_set(r));
        try {
            matrix_ = enumerate_matrix(mod);
        } catch (const TooLarge&) {
        }
    }

    void run() {
        const auto& rules = mod_.rules;
        std::vector<bool> dead(rules.size(), false);

        for (std::size_t b = 0; b < rules.size(); ++b) {
            if (contradictory(rules[b])) {
                dead[b] = true;
                add(LintCode::UnsatisfiableRule, {rules[b].id},
                    "rule '" + rules[b].id + "' can never fire: its literals contradict each other",
                    std::nullopt);
                continue;
            }
            for (std::size_t a = 0; a < b && !dead[b]; ++a) {
                if (dead[a] && contradictory(rules[a])) continue;
                if (subset(sets_[a], sets_[b])) {
                    dead[b] = true;
                    confirm_never_fires(b);
                    add(LintCode::ShadowedRule, {rules[b].id, rules[a].id},
                        "rule '" + rules[b].id + "' is shadowed by earlier rule '" + rules[a].id +
                            "': every answer set satisfying it also satisfies '" + rules[a].id + "'",
                        witness(sets_[b]));
                }
            }
            if (!dead[b]) check_covered(b, dead);
        }

        for (std::size_t b = 0; b < rules.size(); ++b) {
            for (std::size_t a = 0; a < b; ++a) {
                if (dead[a] || dead[b] || !compatible(sets_[a], sets_[b])) continue;
                LiteralSet both = sets_[a];
                both.insert(sets_[b].begin(), sets_[b].end());
                add(LintCode::AmbiguousPair, {rules[a].id, rules[b].id},
                    "rules '" + rules[a].id + "' and '" + rules[b].id +
                        "' can both be satisfied; declaration order picks '" + rules[a].id + "'",
                    witness(both));
            }
        }

        std::map<std::string, std::vector<std::string>> by_name;
        std::vector<std::string> names;
        for (const Rule& r : rules) {
            if (const auto* d = std::get_if<Diagnose>(&r.consequent)) {
                auto& ids = by_name[d->diagnosis.name];
                if (ids.empty()) names.push_back(d->diagnosis.name);
                ids.push_back(r.id);
            }
        }
        for (const auto& name : names) {
            const auto& ids = by_name[name];
            if (ids.size() < 2) continue;
            add(LintCode::DuplicateDiagnosisName, ids,
                "diagnosis name '" + name + "' is used by " + std::to_string(ids.size()) + " rules",
                std::nullopt);
        }

        for (const auto& q : unused_) {
            add(LintCode::UnusedQuestion, {q}, "question '" + q + "' is not used by any rule", std::nullopt);
        }
    }

private:
    void add(LintCode code, std::vector<std::string> subjects, std::string msg,
             std::optional<std::vector<Literal>> proof) {
        out_.push_back(LintFinding{code, mod_.name, std::move(subjects), std::move(msg), std::move(proof)});
    }

    std::vector<Literal> witness(const LiteralSet& s) const {
        std::vector<Literal> w;
        for (const auto& q : order_) {
            auto it = s.find(q);
            if (it != s.end()) w.push_back(Literal{{mod_.name, q}, it->second});
        }
        return w;
    }

    bool row_satisfies(const MatrixRow& row, std::size_t rule) const {
        for (std::size_t q = 0; q < order_.size(); ++q) {
            auto it = sets_[rule].find(order_[q]);
            if (it != sets_[rule].end() && it->second != row.answers[q]) return false;
        }
        return true;
    }

    void confirm_never_fires(std::size_t rule) const {
        if (!matrix_) return;
        for (const auto& row : matrix_->rows) {
            if (row.result && row.result->index == rule) {
                throw std::logic_error("subset shadowing contradicted by enumeration for rule '" +
                                       mod_.rules[rule].id + "'");
            }
        }
    }

    // A rule can also be starved by several earlier rules together. Only
    // decidable here by enumeration, so it is checked when within the cap.
    void check_covered(std::size_t b, std::vector<bool>& dead) {
        if (!matrix_) return;
        const MatrixRow* first = nullptr;
        std::set<std::size_t> takers;
        for (const auto& row : matrix_->rows) {
            if (!row_satisfies(row, b)) continue;
            if (!row.result || row.result->index == b) return;
            if (!first) first = &row;
            takers.insert(row.result->index);
        }
        if (!first) return;
        dead[b] = true;
        std::vector<std::string> subjects{mod_.rules[b].id};
        std::string names;
        for (std::size_t t : takers) {
            subjects.push_back(mod_.rules[t].id);
            names += (names.empty() ? "'" : ", '") + mod_.rules[t].id + "'";
        }
        std::vector<Literal> w;
        for (std::size_t q = 0; q < order_.size(); ++q) {
            w.push_back(Literal{{mod_.name, order_[q]}, first->answers[q]});
        }
        add(LintCode::ShadowedRule, std::move(subjects),
            "rule '" + mod_.rules[b].id + "' is shadowed by the earlier rules " + names +
                " taken together",
            std::move(w));
    }

    const RuleModule& mod_;
    std::vector<LintFinding>& out_;
    std::vector<std::string> order_;
    std::vector<std::string> unused_;
    std::vector<LiteralSet> sets_;
    std::optional<DecisionMatrix> matrix_;
};

}  // namespace

std::vector<LintFinding> lint(const KnowledgeBase& kb) {
    std::vector<LintFinding> out;
    for (const RuleModule& mod : kb.modules) ModuleLinter(mod, out).run();
    return out;
}

KbSummary summarize_kb(const KnowledgeBase& kb) {
    KbSummary s{kb.title, kb.version, {}};
    for (const RuleModule& mod : kb.modules) {
        if (mod.name == kb.entry) continue;
        CropSummary crop{mod.name, mod.questions.size(), {}};
        for (const Rule& r : mod.rules) {
            const auto* d = std::get_if<Diagnose>(&r.consequent);
            if (d && std::find(crop.diagnoses.begin(), crop.diagnoses.end(), d->diagnosis.name) ==
                         crop.diagnoses.end()) {
                crop.diagnoses.push_back(d->diagnosis.name);
            }
        }
        s.crops.push_back(std::move(crop));
    }
    return s;
}

}  // namespace fitodx
