#include <charconv>
#include <fstream>
#include <sstream>

#include "dsl_internal.hpp"

namespace fitodx {

namespace {

using detail::ModuleSpans;
using detail::RuleSpans;
using detail::SourceMap;

enum class Tok { Ident, String, Int, LBrace, RBrace, Equals, Colon, Bad, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;  // identifier/int spelling, or the decoded string value
    SourceSpan span;
};

std::string describe(const Token& t) {
    switch (t.kind) {
        case Tok::Ident: return "'" + t.text + "'";
        case Tok::String: return "string literal";
        case Tok::Int: return "integer " + t.text;
        case Tok::LBrace: return "'{'";
        case Tok::RBrace: return "'}'";
        case Tok::Equals: return "'='";
        case Tok::Colon: return "':'";
        case Tok::Bad: return "invalid token";
        case Tok::End: return "end of input";
    }
    return "token";
}

class Lexer {
public:
    Lexer(std::string_view src, std::vector<ParseDiagnostic>& diags) : src_(src), diags_(diags) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_trivia();
            Token t = next();
            const bool end = t.kind == Tok::End;
            out.push_back(std::move(t));
            if (end) return out;
        }
    }

private:
    bool at_end() const { return pos_ >= src_.size(); }
    char peek() const { return src_[pos_]; }

    void advance() {
        const auto c = static_cast<unsigned char>(src_[pos_++]);
        if (c == '\n') {
            ++span_.line;
            span_.column = 1;
        } else if ((c & 0xC0) != 0x80) {
            ++span_.column;
        }
        span_.offset = pos_;
    }

    void skip_trivia() {
        while (!at_end()) {
            char c = peek();
            if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
                advance();
            } else if (c == '#') {
                while (!at_end() && peek() != '\n') advance();
            } else {
                return;
            }
        }
    }

    void error(const SourceSpan& at, std::string msg) {
        diags_.push_back(ParseDiagnostic{Severity::Error, at, std::string(codes::kSyntax), std::move(msg)});
    }

    static bool word_char(char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
    }

    Token next() {
        Token t;
        t.span = span_;
        if (at_end()) return t;

        const char c = peek();
        switch (c) {
            case '{': advance(); t.kind = Tok::LBrace; return t;
            case '}': advance(); t.kind = Tok::RBrace; return t;
            case '=': advance(); t.kind = Tok::Equals; return t;
            case ':': advance(); t.kind = Tok::Colon; return t;
            case '"': return string_token(t);
            default: break;
        }

        if (word_char(c)) {
            std::size_t start = pos_;
            while (!at_end() && word_char(peek())) advance();
            t.text = std::string(src_.substr(start, pos_ - start));
            bool digits = t.text.find_first_not_of("0123456789") == std::string::npos;
            if (digits) {
                t.kind = Tok::Int;
            } else if (is_identifier(t.text)) {
                t.kind = Tok::Ident;
            } else {
                t.kind = Tok::Bad;
                error(t.span, "invalid identifier '" + t.text + "' (use [a-z_][a-z0-9_]*)");
            }
            return t;
        }

        std::size_t start = pos_;
        advance();
        while (!at_end() && (static_cast<unsigned char>(peek()) & 0xC0) == 0x80) advance();
        t.kind = Tok::Bad;
        error(t.span, "unexpected character '" + std::string(src_.substr(start, pos_ - start)) + "'");
        return t;
    }

    Token string_token(Token& t) {
        advance();  // opening quote
        for (;;) {
            if (at_end() || peek() == '\n') {
                t.kind = Tok::Bad;
                error(t.span, "unterminated string literal");
                return t;
            }
            char c = peek();
            if (c == '"') {
                advance();
                t.kind = Tok::String;
                return t;
            }
            if (c != '\\') {
                t.text.push_back(c);
                advance();
                continue;
            }
            SourceSpan esc = span_;
            advance();
            if (at_end()) continue;  // reported as unterminated
            switch (peek()) {
                case '"': t.text.push_back('"'); break;
                case '\\': t.text.push_back('\\'); break;
                case 'n': t.text.push_back('\n'); break;
                case 't': t.text.push_back('\t'); break;
                default: {
                    if (peek() == '\n') continue;  // reported as unterminated
                    error(esc, "invalid escape sequence in string literal");
                    // Keep scanning so the closing quote is still found.
                    advance();
                    while (!at_end() && (static_cast<unsigned char>(peek()) & 0xC0) == 0x80) advance();
                    continue;
                }
            }
            advance();
        }
    }

    std::string_view src_;
    std::vector<ParseDiagnostic>& diags_;
    std::size_t pos_ = 0;
    SourceSpan span_;
};

// Thrown inside the parser to unwind to the nearest recovery point.
struct SyntaxError {};

class Parser {
public:
    Parser(std::vector<Token> toks, std::vector<ParseDiagnostic>& diags)
        : toks_(std::move(toks)), diags_(diags) {}

    void parse(KnowledgeBase& kb, SourceMap& map) {
        try {
            parse_header(kb, map);
        } catch (const SyntaxError&) {
            recover();
        }
        while (!at(Tok::End)) {
            if (!is_word("module")) {
                try {
                    fail("expected 'module'");
                } catch (const SyntaxError&) {
                    ++pos_;
                    recover();
                }
                continue;
            }
            RuleModule mod;
            ModuleSpans spans;
            const std::size_t start = pos_;
            try {
                parse_module(mod, spans);
                kb.modules.push_back(std::move(mod));
                map.modules.push_back(std::move(spans));
            } catch (const SyntaxError&) {
                if (pos_ == start) ++pos_;
                recover();
            }
        }
    }

private:
    const Token& cur() const { return toks_[pos_]; }
    const Token& ahead(std::size_t k) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
    bool at(Tok k) const { return cur().kind == k; }
    bool is_word(std::string_view w) const { return at(Tok::Ident) && cur().text == w; }

    [[noreturn]] void fail(std::string msg) {
        // Lexer already reported bad tokens.
        if (!at(Tok::Bad)) {
            diags_.push_back(ParseDiagnostic{Severity::Error, cur().span, std::string(codes::kSyntax),
                                             msg + ", found " + describe(cur())});
        }
        throw SyntaxError{};
    }

    void recover() {
        while (!at(Tok::End) && !is_word("module")) ++pos_;
    }

    Token expect(Tok k, std::string_view what) {
        if (!at(k)) fail("expected " + std::string(what));
        return toks_[pos_++];
    }

    void keyword(std::string_view w) {
        if (!is_word(w)) fail("expected '" + std::string(w) + "'");
        ++pos_;
    }

    std::uint64_t integer() {
        Token t = expect(Tok::Int, "integer");
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (ec != std::errc{} || p != t.text.data() + t.text.size()) {
            --pos_;
            fail("integer out of range");
        }
        return v;
    }

    void parse_header(KnowledgeBase& kb, SourceMap& map) {
        keyword("kb");
        kb.title = expect(Tok::String, "string literal (knowledge base title)").text;
        keyword("version");
        kb.version = integer();
        keyword("entry");
        Token entry = expect(Tok::Ident, "entry module name");
        kb.entry = entry.text;
        map.entry = entry.span;
    }

    void parse_module(RuleModule& mod, ModuleSpans& spans) {
        keyword("module");
        Token name = expect(Tok::Ident, "module name");
        mod.name = name.text;
        spans.name = name.span;
        expect(Tok::LBrace, "'{'");
        while (!at(Tok::RBrace)) {
            if (is_word("question")) {
                ++pos_;
                Token id = expect(Tok::Ident, "question id");
                Token text = expect(Tok::String, "question text");
                mod.questions.push_back(Question{{mod.name, id.text}, text.text});
                spans.questions.push_back(id.span);
            } else if (is_word("rule")) {
                parse_rule(mod, spans);
            } else {
                fail("expected 'question', 'rule' or '}'");
            }
        }
        ++pos_;
    }

    void parse_rule(RuleModule& mod, ModuleSpans& spans) {
        keyword("rule");
        Token id = expect(Tok::Ident, "rule id");
        Rule rule;
        RuleSpans rs;
        rule.id = id.text;
        rs.id = id.span;
        expect(Tok::LBrace, "'{'");

        while (at(Tok::Ident) && ahead(1).kind == Tok::Equals) {
            Token q = toks_[pos_];
            pos_ += 2;
            Answer expected;
            if (is_word("si")) {
                expected = Answer::Si;
            } else if (is_word("no")) {
                expected = Answer::No;
            } else {
                fail("expected 'si' or 'no'");
            }
            ++pos_;
            rule.literals.push_back(Literal{{mod.name, q.text}, expected});
            rs.literals.push_back(q.span);
        }

        if (is_word("dispatch") || is_word("diagnose")) {
            if (rule.literals.empty()) fail("rule '" + rule.id + "' needs at least one literal before its consequent");
        } else {
            fail(rule.literals.empty() ? "expected literal 'question = si|no'"
                                       : "expected literal, 'dispatch' or 'diagnose'");
        }

        if (is_word("dispatch")) {
            ++pos_;
            Token target = expect(Tok::Ident, "module name after 'dispatch'");
            rule.consequent = Dispatch{target.text};
            rs.consequent = target.span;
        } else {
            rs.consequent = cur().span;
            ++pos_;
            rule.consequent = Diagnose{parse_diagnosis()};
        }
        expect(Tok::RBrace, "'}' closing rule '" + rule.id + "'");

        mod.rules.push_back(std::move(rule));
        spans.rules.push_back(std::move(rs));
    }

    std::string field(std::string_view name) {
        keyword(name);
        expect(Tok::Colon, "':'");
        return expect(Tok::String, "string literal").text;
    }

    Diagnosis parse_diagnosis() {
        expect(Tok::LBrace, "'{'");
        Diagnosis d;
        d.name = field("name");
        if (is_word("info")) d.info = field("info");
        if (is_word("treatment")) d.treatment = field("treatment");
        while (is_word("image")) d.images.push_back(field("image"));
        expect(Tok::RBrace, "'}' closing diagnose block (fields go in order name, info, treatment, image)");
        return d;
    }

    std::vector<Token> toks_;
    std::vector<ParseDiagnostic>& diags_;
    std::size_t pos_ = 0;
};

SourceSpan span_at(std::string_view text, std::size_t offset) {
    SourceSpan s;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (c == '\n') {
            ++s.line;
            s.column = 1;
        } else if ((c & 0xC0) != 0x80) {
            ++s.column;
        }
    }
    s.offset = std::min(offset, text.size());
    return s;
}

}  // namespace

ParseResult parse_kb(std::string_view source) {
    ParseResult result;
    auto& diags = result.diagnostics;

    if (source.size() >= 3 && source.substr(0, 3) == "\xEF\xBB\xBF") {
        diags.push_back({Severity::Error, SourceSpan{}, std::string(codes::kEncoding),
                         "byte order mark is not allowed"});
        return result;
    }
    if (auto bad = detail::find_invalid_utf8(source)) {
        diags.push_back({Severity::Error, span_at(source, *bad), std::string(codes::kEncoding),
                         "invalid UTF-8 byte sequence"});
        return result;
    }

    Lexer lexer(source, diags);
    std::vector<Token> tokens = lexer.run();

    KnowledgeBase kb;
    SourceMap map;
    Parser(std::move(tokens), diags).parse(kb, map);
    if (has_errors(diags)) return result;

    auto semantic = detail::validate_with_spans(kb, &map);
    diags.insert(diags.end(), semantic.begin(), semantic.end());
    if (!has_errors(diags)) result.kb = std::move(kb);
    return result;
}

ParseResult load_kb_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        ParseResult r;
        r.diagnostics.push_back({Severity::Error, std::nullopt, std::string(codes::kIo),
                                 "cannot open knowledge base '" + path + "'"});
        return r;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_kb(buf.str());
}

}  // namespace fitodx
