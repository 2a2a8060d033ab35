#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace pkgscan {

enum class TokenKind { string, identifier, op, punct };

struct Token {
    TokenKind kind;
    std::string text;  // for strings: inner content, quotes stripped, escapes raw
    std::size_t byte_offset = 0;
};

enum class LexLang { js, py };

struct TokenStream {
    std::string file;
    LexLang language = LexLang::js;
    std::vector<Token> tokens;
    bool lex_error = false;
};

/// Best-effort Python lexer: strings (quote styles, prefixes, triple quotes),
/// identifiers, operators, punctuation. Comments and numbers are skipped.
/// Never throws; malformed input degrades with lex_error set.
TokenStream lex_python(std::string_view content);

/// Best-effort JavaScript lexer. Template literals yield one string token
/// with the inner text verbatim; regex literals are skipped via a
/// previous-lexeme heuristic.
TokenStream lex_javascript(std::string_view content);

/// package.json lexer: for well-formed JSON, keys and string values become
/// string tokens and structural characters punctuation; malformed input
/// falls back to the JavaScript lexer with lex_error set.
TokenStream lex_package_json(std::string_view content);

/// Replaces invalid UTF-8 sequences with U+FFFD. Returns true when the input
/// was already valid.
bool sanitize_utf8(std::string_view input, std::string& out);

}  // namespace pkgscan
