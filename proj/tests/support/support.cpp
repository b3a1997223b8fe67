#include "support.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fitodx::testing {

namespace {

const char* const kCrops[] = {"arroz", "tabaco", "tomate", "maiz", "pimiento", "pepino", "frijol"};

std::string random_text(std::mt19937_64& rng, std::size_t min_len) {
    static const char* const pieces[] = {"a",  "b",  "q",   " ",  "ñ",  "°",      "\"",   "\\", "\n", "\t",
                                         "é",  "?",  "{",   "}",  "=",  "module", "rule", "si", "no", "#",
                                         ":",  "x1", "más", "\r", "ü",  "diagnose"};
    std::uniform_int_distribution<std::size_t> len(min_len, 12);
    std::uniform_int_distribution<std::size_t> pick(0, std::size(pieces) - 1);
    std::string s;
    for (std::size_t i = 0, n = len(rng); i < n; ++i) s += pieces[pick(rng)];
    return s;
}

}  // namespace

TempDir::TempDir() {
    static std::mt19937_64 rng{std::random_device{}()};
    const auto base = std::filesystem::temp_directory_path();
    do {
        path_ = base / ("fitodx-test-" + std::to_string(rng()));
    } while (!std::filesystem::create_directory(path_));
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::filesystem::path reference_kb_path() { return FITODX_REFERENCE_KB; }

std::filesystem::path data_path(const std::string& name) { return std::filesystem::path(FITODX_TEST_DATA) / name; }

std::shared_ptr<const KnowledgeBase> reference_kb() {
    static const std::shared_ptr<const KnowledgeBase> kb = [] {
        ParseResult r = load_kb_file(reference_kb_path().string());
        if (!r.ok()) throw std::runtime_error("reference knowledge base failed to parse");
        return std::make_shared<const KnowledgeBase>(std::move(*r.kb));
    }();
    return kb;
}

KnowledgeBase parse_or_die(const std::string& source) {
    ParseResult r = parse_kb(source);
    if (!r.ok()) {
        std::string msg = "parse failed:";
        for (const auto& d : r.diagnostics) msg += "\n  " + format_diagnostic(d);
        throw std::runtime_error(msg);
    }
    return std::move(*r.kb);
}

AnswerMemo crop_answers(const std::string& crop) {
    AnswerMemo m;
    for (const char* c : kCrops) m[std::string("principal.es_") + c] = crop == c ? Answer::Si : Answer::No;
    return m;
}

AnswerMemo damping_off_answers() {
    AnswerMemo m = crop_answers("tabaco");
    for (std::size_t i = 0; i < std::size(kDampingOffOrder); ++i) m[std::string("tabaco.") + kDampingOffOrder[i]] = kDampingOffValues[i];
    return m;
}

AnswerMemo rule_answers(const RuleModule& module, const std::string& rule_id) {
    AnswerMemo m;
    const Rule* r = module.find_rule(rule_id);
    if (!r) throw std::runtime_error("no rule " + rule_id + " in " + module.name);
    for (const auto& l : r->literals) m[global_key(l.question)] = l.expected;
    return m;
}

AnswerMemo uniform_answers(const KnowledgeBase& kb, Answer a) {
    AnswerMemo m;
    for (const auto& mod : kb.modules) {
        for (const auto& q : mod.questions) m[global_key(q.id)] = a;
    }
    return m;
}

AnswerMemo random_answers(const KnowledgeBase& kb, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(0.5);
    AnswerMemo m;
    for (const auto& mod : kb.modules) {
        for (const auto& q : mod.questions) m[global_key(q.id)] = coin(rng) ? Answer::Si : Answer::No;
    }
    return m;
}

KnowledgeBase random_kb(std::mt19937_64& rng, const RandomKbShape& shape) {
    auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    std::bernoulli_distribution coin(0.5);

    KnowledgeBase kb;
    kb.title = random_text(rng, 0);
    kb.version = std::uniform_int_distribution<std::uint64_t>()(rng);
    const int n_modules = uniform(1, shape.max_modules);
    for (int mi = 0; mi < n_modules; ++mi) kb.modules.push_back(RuleModule{"m" + std::to_string(mi), {}, {}});
    kb.entry = "m0";

    for (int mi = 0; mi < n_modules; ++mi) {
        RuleModule& mod = kb.modules[mi];
        const int n_questions = uniform(1, shape.max_questions);
        for (int qi = 0; qi < n_questions; ++qi) {
            mod.questions.push_back({{mod.name, "q" + std::to_string(qi)}, random_text(rng, 1)});
        }
        const int n_rules = uniform(0, shape.max_rules);
        for (int ri = 0; ri < n_rules; ++ri) {
            Rule r;
            r.id = "r" + std::to_string(ri);
            std::vector<int> order(n_questions);
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng);
            order.resize(uniform(1, n_questions));
            for (int qi : order) r.literals.push_back({mod.questions[qi].id, coin(rng) ? Answer::Si : Answer::No});
            if (mi + 1 < n_modules && uniform(0, 2) == 0) {
                r.consequent = Dispatch{"m" + std::to_string(uniform(mi + 1, n_modules - 1))};
            } else {
                Diagnosis d;
                d.name = random_text(rng, 1);
                if (coin(rng)) d.info = random_text(rng, 0);
                if (coin(rng)) d.treatment = random_text(rng, 0);
                for (int i = 0, n = uniform(0, 2); i < n; ++i) d.images.push_back(random_text(rng, 1));
                r.consequent = Diagnose{std::move(d)};
            }
            mod.rules.push_back(std::move(r));
        }
    }
    return kb;
}

}  // namespace fitodx::testing
