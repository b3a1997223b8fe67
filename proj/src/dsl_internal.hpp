#pragma once
// Shared between the parser and the validator: where each model element came
// from in the source text, so validation diagnostics can carry spans.

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "fitodx/dsl.hpp"

namespace fitodx::detail {

struct RuleSpans {
    SourceSpan id;
    std::vector<SourceSpan> literals;
    SourceSpan consequent;  // dispatch target or the "diagnose" keyword
};

struct ModuleSpans {
    SourceSpan name;
    std::vector<SourceSpan> questions;
    std::vector<RuleSpans> rules;
};

struct SourceMap {
    SourceSpan entry;
    std::vector<ModuleSpans> modules;
};

std::vector<ParseDiagnostic> validate_with_spans(const KnowledgeBase& kb, const SourceMap* spans);

// Byte offset of the first invalid UTF-8 sequence, if any.
std::optional<std::size_t> find_invalid_utf8(std::string_view text) noexcept;

}  // namespace fitodx::detail
