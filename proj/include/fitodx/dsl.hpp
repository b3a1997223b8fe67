#pragma once
// Text format (.fdx) for knowledge bases: parser, canonical serializer and
// structural validator.
//
//   kb_file    := "kb" STRING "version" INT "entry" IDENT module*
//   module     := "module" IDENT "{" (question | rule)* "}"
//   question   := "question" IDENT STRING
//   rule       := "rule" IDENT "{" literal+ consequent "}"
//   literal    := IDENT "=" ("si" | "no")
//   consequent := "dispatch" IDENT
//               | "diagnose" "{" "name" ":" STRING ("info" ":" STRING)?
//                    ("treatment" ":" STRING)? ("image" ":" STRING)* "}"
//
// Keywords are contextual, so any identifier may also be used as a name.
// '#' starts a comment running to the end of the line.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fitodx/model.hpp"

namespace fitodx {

struct SourceSpan {
    std::size_t line = 1;    // 1-based
    std::size_t column = 1;  // 1-based, in Unicode scalar values
    std::size_t offset = 0;  // 0-based byte offset

    friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
};

enum class Severity { Error, Warning };

// Stable diagnostic codes.
namespace codes {
inline constexpr std::string_view kIo = "IO";
inline constexpr std::string_view kEncoding = "ENCODING";
inline constexpr std::string_view kSyntax = "SYNTAX";
inline constexpr std::string_view kBadIdent = "BAD_IDENT";
inline constexpr std::string_view kEmptyText = "EMPTY_TEXT";
inline constexpr std::string_view kEmptyRule = "EMPTY_RULE";
inline constexpr std::string_view kDupModule = "DUP_MODULE";
inline constexpr std::string_view kDupQuestion = "DUP_QUESTION";
inline constexpr std::string_view kDupRule = "DUP_RULE";
inline constexpr std::string_view kDupLiteral = "DUP_LITERAL";
inline constexpr std::string_view kUndefQuestion = "UNDEF_QUESTION";
inline constexpr std::string_view kUndefModule = "UNDEF_MODULE";
inline constexpr std::string_view kDispatchCycle = "DISPATCH_CYCLE";
inline constexpr std::string_view kContradiction = "CONTRADICTION";
inline constexpr std::string_view kNoEntry = "NO_ENTRY";
inline constexpr std::string_view kUnreachableModule = "UNREACHABLE_MODULE";
}  // namespace codes

struct ParseDiagnostic {
    Severity severity = Severity::Error;
    // Always set for diagnostics produced from source text. Knowledge bases
    // built in memory have no source, so validate_kb leaves it empty.
    std::optional<SourceSpan> span;
    std::string code;
    std::string message;
};

bool has_errors(const std::vector<ParseDiagnostic>& diags) noexcept;

// "3:14: error[SYNTAX]: expected '{'"
std::string format_diagnostic(const ParseDiagnostic& d);

struct ParseResult {
    std::optional<KnowledgeBase> kb;  // set iff diagnostics hold no Error
    std::vector<ParseDiagnostic> diagnostics;

    bool ok() const noexcept { return kb.has_value(); }
};

ParseResult parse_kb(std::string_view source);

// Canonical form: two-space indentation, one declaration per line, LF endings.
std::string serialize_kb(const KnowledgeBase& kb);

// Every model invariant. Empty iff the knowledge base is well formed and every
// module is reachable from the entry.
std::vector<ParseDiagnostic> validate_kb(const KnowledgeBase& kb);

// Escaped, quoted STRING token.
std::string quote(std::string_view text);

// Reads and parses a file; I/O failures are reported as a single diagnostic.
ParseResult load_kb_file(const std::string& path);

}  // namespace fitodx
