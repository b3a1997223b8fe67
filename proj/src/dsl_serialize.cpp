#include <string>

#include "fitodx/dsl.hpp"

namespace fitodx {

std::string quote(std::string_view text) {
    std::string out;
    out.reserve(text.size() + 2);
    out.push_back('"');
    for (char c : text) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

std::string serialize_kb(const KnowledgeBase& kb) {
    std::string out;
    out += "kb " + quote(kb.title) + " version " + std::to_string(kb.version) + " entry " + kb.entry + "\n";

    for (const RuleModule& mod : kb.modules) {
        out += "\nmodule " + mod.name + " {\n";
        for (const Question& q : mod.questions) {
            out += "  question " + q.id.local + " " + quote(q.text) + "\n";
        }
        for (const Rule& rule : mod.rules) {
            out += "\n  rule " + rule.id + " {\n";
            for (const Literal& lit : rule.literals) {
                out += "    " + lit.question.local + " = " + std::string(to_string(lit.expected)) + "\n";
            }
            if (const auto* d = std::get_if<Dispatch>(&rule.consequent)) {
                out += "    dispatch " + d->target + "\n";
            } else {
                const Diagnosis& dx = std::get<Diagnose>(rule.consequent).diagnosis;
                out += "    diagnose {\n";
                out += "      name: " + quote(dx.name) + "\n";
                if (!dx.info.empty()) out += "      info: " + quote(dx.info) + "\n";
                if (!dx.treatment.empty()) out += "      treatment: " + quote(dx.treatment) + "\n";
                for (const auto& img : dx.images) out += "      image: " + quote(img) + "\n";
                out += "    }\n";
            }
            out += "  }\n";
        }
        out += "}\n";
    }
    return out;
}

}  // namespace fitodx
