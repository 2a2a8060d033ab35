#include "pkgscan/lexer.hpp"

#include <array>
#include <cctype>

#include <json.hpp>

namespace pkgscan {

namespace {

constexpr std::string_view kReplacement = "\xEF\xBF\xBD";  // U+FFFD

bool is_ident_start(char c, bool js) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || (js && c == '$');
}

bool is_ident_cont(char c, bool js) {
    return is_ident_start(c, js) || (c >= '0' && c <= '9');
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_punct_only(std::string_view text) {
    for (char c : text) {
        if (std::string_view("()[]{},:;.").find(c) == std::string_view::npos) return false;
    }
    return true;
}

// Longest-match operator/punctuation tables, longest first.
const std::array<std::string_view, 26> kPyOps = {
    "**=", "//=", ">>=", "<<=", "...", "==", "!=", "<=", ">=", "->", ":=",
    "+=", "-=", "*=", "/=", "%=", "@=", "&=", "|=", "^=", ">>", "<<", "**",
    "//", "!",  "~"};

const std::array<std::string_view, 34> kJsOps = {
    ">>>=", "===", "!==", ">>>", "**=", "<<=", ">>=", "&&=", "||=", "?\?=",
    "...",  "=>",  "==",  "!=",  "<=",  ">=",  "&&",  "||",  "?\?",  "?.",
    "++",   "--",  "+=",  "-=",  "*=",  "/=",  "%=",  "&=",  "|=",  "^=",
    "<<",   ">>",  "**",  "~"};

constexpr std::string_view kSingleOps = "+-*/%=<>&|^~!?@";
constexpr std::string_view kSinglePunct = "()[]{},:;.";

class Cursor {
public:
    Cursor(std::string_view text, TokenStream& out) : text_(text), out_(out) {}

    bool done() const { return pos_ >= text_.size(); }
    char peek(std::size_t ahead = 0) const {
        return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
    }
    std::size_t pos() const { return pos_; }
    void advance(std::size_t n = 1) { pos_ += n; }

    bool starts_with(std::string_view s) const {
        return text_.compare(pos_, s.size(), s) == 0;
    }

    void emit(TokenKind kind, std::string text, std::size_t offset) {
        out_.tokens.push_back(Token{kind, std::move(text), offset});
    }

    std::string_view slice(std::size_t from, std::size_t to) const {
        return text_.substr(from, to - from);
    }

    void flag_error() { out_.lex_error = true; }

private:
    std::string_view text_;
    TokenStream& out_;
    std::size_t pos_ = 0;
};

// Scans a quoted body starting right after the delimiter. Backslash escape
// pairs are consumed but kept raw. Returns the inner text end; on EOF without
// a closing delimiter the error flag is set.
std::size_t scan_quoted(Cursor& cur, std::string_view closer) {
    while (!cur.done()) {
        if (cur.peek() == '\\') {
            cur.advance(2);
            continue;
        }
        if (cur.starts_with(closer)) {
            std::size_t inner_end = cur.pos();
            cur.advance(closer.size());
            return inner_end;
        }
        cur.advance();
    }
    cur.flag_error();
    return cur.pos();
}

void lex_operator_or_skip(Cursor& cur, bool js) {
    const auto try_table = [&](auto const& table) -> bool {
        for (std::string_view op : table) {
            if (cur.starts_with(op)) {
                cur.emit(is_punct_only(op) ? TokenKind::punct : TokenKind::op,
                         std::string(op), cur.pos());
                cur.advance(op.size());
                return true;
            }
        }
        return false;
    };
    if (js ? try_table(kJsOps) : try_table(kPyOps)) return;

    char c = cur.peek();
    if (kSinglePunct.find(c) != std::string_view::npos) {
        cur.emit(TokenKind::punct, std::string(1, c), cur.pos());
        cur.advance();
    } else if (kSingleOps.find(c) != std::string_view::npos) {
        cur.emit(TokenKind::op, std::string(1, c), cur.pos());
        cur.advance();
    } else {
        cur.advance();  // bytes outside the grammar are skipped
    }
}

// Numbers never become tokens; this consumes one numeric literal.
void skip_number(Cursor& cur) {
    if (cur.peek() == '0' && (cur.peek(1) == 'x' || cur.peek(1) == 'X' ||
                              cur.peek(1) == 'o' || cur.peek(1) == 'O' ||
                              cur.peek(1) == 'b' || cur.peek(1) == 'B')) {
        cur.advance(2);
        while (std::isalnum(static_cast<unsigned char>(cur.peek())) || cur.peek() == '_') {
            cur.advance();
        }
        return;
    }
    while (is_digit(cur.peek()) || cur.peek() == '_') cur.advance();
    if (cur.peek() == '.' && is_digit(cur.peek(1))) {
        cur.advance();
        while (is_digit(cur.peek()) || cur.peek() == '_') cur.advance();
    }
    if ((cur.peek() == 'e' || cur.peek() == 'E') &&
        (is_digit(cur.peek(1)) ||
         ((cur.peek(1) == '+' || cur.peek(1) == '-') && is_digit(cur.peek(2))))) {
        cur.advance(2);
        while (is_digit(cur.peek())) cur.advance();
    }
    // trailing bigint/imaginary suffixes
    while (std::isalpha(static_cast<unsigned char>(cur.peek()))) cur.advance();
}

bool is_py_string_prefix(std::string_view text) {
    if (text.empty() || text.size() > 2) return false;
    for (char c : text) {
        if (std::string_view("rbfuRBFU").find(c) == std::string_view::npos) return false;
    }
    return true;
}

}  // namespace

bool sanitize_utf8(std::string_view input, std::string& out) {
    out.clear();
    out.reserve(input.size());
    bool clean = true;
    std::size_t i = 0;
    const auto cont = [&](std::size_t k) {
        return i + k < input.size() &&
               (static_cast<unsigned char>(input[i + k]) & 0xC0) == 0x80;
    };
    while (i < input.size()) {
        unsigned char b = static_cast<unsigned char>(input[i]);
        std::size_t len = 0;
        if (b < 0x80) {
            len = 1;
        } else if (b >= 0xC2 && b <= 0xDF && cont(1)) {
            len = 2;
        } else if (b == 0xE0 && i + 1 < input.size() &&
                   static_cast<unsigned char>(input[i + 1]) >= 0xA0 &&
                   static_cast<unsigned char>(input[i + 1]) <= 0xBF && cont(2)) {
            len = 3;
        } else if (b == 0xED && i + 1 < input.size() &&
                   static_cast<unsigned char>(input[i + 1]) >= 0x80 &&
                   static_cast<unsigned char>(input[i + 1]) <= 0x9F && cont(2)) {
            len = 3;
        } else if (b >= 0xE1 && b <= 0xEF && b != 0xED && cont(1) && cont(2)) {
            len = 3;
        } else if (b == 0xF0 && i + 1 < input.size() &&
                   static_cast<unsigned char>(input[i + 1]) >= 0x90 &&
                   static_cast<unsigned char>(input[i + 1]) <= 0xBF && cont(2) && cont(3)) {
            len = 4;
        } else if (b >= 0xF1 && b <= 0xF3 && cont(1) && cont(2) && cont(3)) {
            len = 4;
        } else if (b == 0xF4 && i + 1 < input.size() &&
                   static_cast<unsigned char>(input[i + 1]) >= 0x80 &&
                   static_cast<unsigned char>(input[i + 1]) <= 0x8F && cont(2) && cont(3)) {
            len = 4;
        }
        if (len == 0) {
            out.append(kReplacement);
            clean = false;
            ++i;
        } else {
            out.append(input.substr(i, len));
            i += len;
        }
    }
    return clean;
}

TokenStream lex_python(std::string_view content) {
    TokenStream stream;
    stream.language = LexLang::py;
    std::string text;
    if (!sanitize_utf8(content, text)) stream.lex_error = true;

    Cursor cur(text, stream);
    while (!cur.done()) {
        char c = cur.peek();
        if (std::isspace(static_cast<unsigned char>(c))) {
            cur.advance();
            continue;
        }
        if (c == '#') {
            while (!cur.done() && cur.peek() != '\n') cur.advance();
            continue;
        }
        if (c == '\\') {  // line continuation
            cur.advance();
            continue;
        }
        if (is_ident_start(c, /*js=*/false)) {
            std::size_t start = cur.pos();
            while (is_ident_cont(cur.peek(), false)) cur.advance();
            std::string word(cur.slice(start, cur.pos()));
            char next = cur.peek();
            if ((next == '\'' || next == '"') && is_py_string_prefix(word)) {
                // string prefix; the quote scan below emits the token
                char q = next;
                std::string_view triple = q == '\'' ? "'''" : "\"\"\"";
                std::string_view single(&q, 1);
                bool is_triple = cur.starts_with(triple);
                cur.advance(is_triple ? 3 : 1);
                std::size_t inner_start = cur.pos();
                std::size_t inner_end = scan_quoted(cur, is_triple ? triple : single);
                cur.emit(TokenKind::string, std::string(cur.slice(inner_start, inner_end)),
                         start);
                continue;
            }
            cur.emit(TokenKind::identifier, std::move(word), start);
            continue;
        }
        if (c == '\'' || c == '"') {
            std::size_t start = cur.pos();
            std::string_view triple = c == '\'' ? "'''" : "\"\"\"";
            std::string_view single(&c, 1);
            bool is_triple = cur.starts_with(triple);
            cur.advance(is_triple ? 3 : 1);
            std::size_t inner_start = cur.pos();
            std::size_t inner_end = scan_quoted(cur, is_triple ? triple : single);
            cur.emit(TokenKind::string, std::string(cur.slice(inner_start, inner_end)), start);
            continue;
        }
        if (is_digit(c) || (c == '.' && is_digit(cur.peek(1)))) {
            skip_number(cur);
            continue;
        }
        lex_operator_or_skip(cur, /*js=*/false);
    }
    return stream;
}

namespace {

// Lexeme categories feeding the regex-vs-division heuristic. `/` starts a
// regex only at file start, after an operator, or after an opening
// punctuation from `( , [ { ; :`.
enum class JsCtx { start, regex_allowed, value };

void skip_js_regex(Cursor& cur) {
    cur.advance();  // leading '/'
    bool in_class = false;
    while (!cur.done()) {
        char c = cur.peek();
        if (c == '\\') {
            cur.advance(2);
            continue;
        }
        if (c == '[') in_class = true;
        if (c == ']') in_class = false;
        if (c == '/' && !in_class) {
            cur.advance();
            while (std::isalpha(static_cast<unsigned char>(cur.peek()))) cur.advance();
            return;
        }
        if (c == '\n') {  // regexes cannot span lines; treat as lex noise
            return;
        }
        cur.advance();
    }
    cur.flag_error();
}

}  // namespace

TokenStream lex_javascript(std::string_view content) {
    TokenStream stream;
    stream.language = LexLang::js;
    std::string text;
    if (!sanitize_utf8(content, text)) stream.lex_error = true;

    Cursor cur(text, stream);
    JsCtx ctx = JsCtx::start;
    while (!cur.done()) {
        char c = cur.peek();
        if (std::isspace(static_cast<unsigned char>(c))) {
            cur.advance();
            continue;
        }
        if (cur.starts_with("//")) {
            while (!cur.done() && cur.peek() != '\n') cur.advance();
            continue;
        }
        if (cur.starts_with("/*")) {
            cur.advance(2);
            while (!cur.done() && !cur.starts_with("*/")) cur.advance();
            if (cur.done()) {
                cur.flag_error();
            } else {
                cur.advance(2);
            }
            continue;
        }
        if (is_ident_start(c, /*js=*/true)) {
            std::size_t start = cur.pos();
            while (is_ident_cont(cur.peek(), true)) cur.advance();
            cur.emit(TokenKind::identifier, std::string(cur.slice(start, cur.pos())), start);
            ctx = JsCtx::value;
            continue;
        }
        if (c == '\'' || c == '"' || c == '`') {
            std::size_t start = cur.pos();
            cur.advance();
            std::size_t inner_start = cur.pos();
            std::string_view closer(&c, 1);
            std::size_t inner_end = scan_quoted(cur, closer);
            cur.emit(TokenKind::string, std::string(cur.slice(inner_start, inner_end)), start);
            ctx = JsCtx::value;
            continue;
        }
        if (is_digit(c) || (c == '.' && is_digit(cur.peek(1)))) {
            skip_number(cur);
            ctx = JsCtx::value;
            continue;
        }
        if (c == '/' && ctx != JsCtx::value) {
            skip_js_regex(cur);
            ctx = JsCtx::value;
            continue;
        }
        std::size_t before = stream.tokens.size();
        lex_operator_or_skip(cur, /*js=*/true);
        if (stream.tokens.size() > before) {
            const Token& tok = stream.tokens.back();
            if (tok.kind == TokenKind::op) {
                ctx = JsCtx::regex_allowed;
            } else {
                static const std::string_view openers = "(,[{;:";
                ctx = (tok.text.size() == 1 &&
                       openers.find(tok.text[0]) != std::string_view::npos)
                          ? JsCtx::regex_allowed
                          : JsCtx::value;
            }
        }
    }
    return stream;
}

TokenStream lex_package_json(std::string_view content) {
    bool only_ws = true;
    for (char c : content) {
        if (!std::isspace(static_cast<unsigned char>(c))) {
            only_ws = false;
            break;
        }
    }
    if (only_ws) {
        TokenStream stream;
        stream.language = LexLang::js;
        return stream;
    }

    if (!nlohmann::json::accept(content)) {
        TokenStream stream = lex_javascript(content);
        stream.lex_error = true;
        return stream;
    }

    // Input is valid JSON; a direct scan yields tokens with true offsets.
    TokenStream stream;
    stream.language = LexLang::js;
    Cursor cur(content, stream);
    while (!cur.done()) {
        char c = cur.peek();
        if (std::isspace(static_cast<unsigned char>(c))) {
            cur.advance();
            continue;
        }
        if (c == '"') {
            std::size_t start = cur.pos();
            cur.advance();
            std::size_t inner_start = cur.pos();
            std::size_t inner_end = scan_quoted(cur, "\"");
            cur.emit(TokenKind::string, std::string(cur.slice(inner_start, inner_end)), start);
            continue;
        }
        if (std::string_view("{}[],:").find(c) != std::string_view::npos) {
            cur.emit(TokenKind::punct, std::string(1, c), cur.pos());
            cur.advance();
            continue;
        }
        if (c == '-' || is_digit(c)) {
            cur.advance();
            skip_number(cur);
            continue;
        }
        // true / false / null; always make progress
        cur.advance();
        while (!cur.done() && std::isalpha(static_cast<unsigned char>(cur.peek()))) {
            cur.advance();
        }
    }
    return stream;
}

}  // namespace pkgscan
