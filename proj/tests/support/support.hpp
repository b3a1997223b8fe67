#pragma once
// Helpers shared by the test binaries: the shipped reference knowledge base,
// canned answer maps for known diagnoses and a generator of random valid KBs.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "fitodx/dsl.hpp"
#include "fitodx/engine.hpp"

namespace fitodx::testing {

std::filesystem::path reference_kb_path();
std::filesystem::path data_path(const std::string& name);

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// Parsed once per process.
std::shared_ptr<const KnowledgeBase> reference_kb();

// Parses or fails the current test with the diagnostics.
KnowledgeBase parse_or_die(const std::string& source);

// The crop-selection answers that route to `crop` (one si, six no).
AnswerMemo crop_answers(const std::string& crop);

// Routing to tabaco plus the twelve damping-off answers.
AnswerMemo damping_off_answers();

// The twelve tobacco answers in the damping-off rule's literal order.
inline constexpr const char* kDampingOffOrder[] = {"p1", "p3", "p2", "p4", "p9", "p12",
                                             "p7", "p10", "p5", "p6", "p8", "p11"};
inline constexpr Answer kDampingOffValues[] = {Answer::No, Answer::Si, Answer::No, Answer::No, Answer::Si, Answer::Si,
                                         Answer::No, Answer::No, Answer::No, Answer::No, Answer::No, Answer::No};

// The literal vector of a rule as global answers, for building satisfying maps.
AnswerMemo rule_answers(const RuleModule& module, const std::string& rule_id);

// Every question of the KB answered `a`.
AnswerMemo uniform_answers(const KnowledgeBase& kb, Answer a);

// A random total assignment over every question of the KB.
AnswerMemo random_answers(const KnowledgeBase& kb, std::mt19937_64& rng);

struct RandomKbShape {
    int max_modules = 4;
    int max_questions = 6;
    int max_rules = 6;
};

// Always passes validate_kb without errors: module i only dispatches to
// modules with a larger index, literals in one rule use distinct questions,
// and names and prompts are never empty. Text fields exercise escapes,
// non-ASCII and keyword-like words.
KnowledgeBase random_kb(std::mt19937_64& rng, const RandomKbShape& shape = {});

}  // namespace fitodx::testing
