#include "ekt/mwp_lang.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <optional>
#include <unordered_map>

#include "ekt/util.hpp"

namespace ekt::lang {

ParseError::ParseError(std::size_t line, std::size_t column, const std::string& message)
    : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message)
    , line_(line)
    , column_(column)
    , reason_(message)
{
}

std::string_view to_string(EvalErrorKind kind) noexcept
{
    switch (kind) {
    case EvalErrorKind::UndefinedVariable:
        return "undefined_variable";
    case EvalErrorKind::DivisionByZero:
        return "division_by_zero";
    case EvalErrorKind::NonFiniteResult:
        return "non_finite_result";
    case EvalErrorKind::MissingAnswer:
        return "missing_answer";
    }
    return "unknown";
}

EvalError::EvalError(EvalErrorKind kind, const std::string& message)
    : Error(message)
    , kind_(kind)
{
}

char to_char(BinaryOp op) noexcept
{
    switch (op) {
    case BinaryOp::Add:
        return '+';
    case BinaryOp::Sub:
        return '-';
    case BinaryOp::Mul:
        return '*';
    case BinaryOp::Div:
        return '/';
    }
    return '?';
}

bool Program::assigns_answer() const noexcept
{
    return std::any_of(statements_.begin(), statements_.end(), [this](const Statement& s) {
        return symbols_[s.target] == "answer";
    });
}

namespace {

constexpr std::array<std::string_view, 38> kPythonKeywords = {
    "False", "None", "True", "and", "as", "assert", "async", "await",
    "break", "class", "continue", "def", "del", "elif", "else", "except",
    "finally", "for", "from", "global", "if", "import", "in", "is",
    "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try",
    "while", "with", "yield", "match", "case", "print",
};

bool is_keyword(std::string_view word)
{
    // `print` is a builtin rather than a keyword, but a bare `print` line is
    // still outside the subset and gets the same diagnostic.
    return std::find(kPythonKeywords.begin(), kPythonKeywords.end(), word) != kPythonKeywords.end();
}

bool is_ident_start(char c)
{
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool is_ident_char(char c)
{
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool is_digit(char c)
{
    return c >= '0' && c <= '9';
}

enum class TokenKind : std::uint8_t { Ident, Number, Plus, Minus, Star, Slash, LParen, RParen, Assign, End };

struct Token {
    TokenKind kind = TokenKind::End;
    std::string_view text;
    std::size_t column = 0; // 1-based
    double number = 0.0;
};

std::string describe(const Token& token)
{
    if (token.kind == TokenKind::End) {
        return "end of line";
    }
    return "'" + std::string(token.text) + "'";
}

// Splits one logical line (comment already removed) into tokens.
class LineLexer {
public:
    LineLexer(std::string_view line, std::size_t line_no)
        : line_(line)
        , line_no_(line_no)
    {
    }

    std::vector<Token> run()
    {
        std::vector<Token> tokens;
        while (true) {
            skip_spaces();
            if (pos_ >= line_.size()) {
                tokens.push_back(Token{TokenKind::End, {}, pos_ + 1, 0.0});
                return tokens;
            }
            tokens.push_back(next());
        }
    }

private:
    void skip_spaces()
    {
        while (pos_ < line_.size() && (line_[pos_] == ' ' || line_[pos_] == '\t' || line_[pos_] == '\r')) {
            ++pos_;
        }
    }

    [[noreturn]] void fail(std::size_t at, const std::string& message) const
    {
        throw ParseError(line_no_, at + 1, message);
    }

    Token single(TokenKind kind)
    {
        Token t{kind, line_.substr(pos_, 1), pos_ + 1, 0.0};
        ++pos_;
        return t;
    }

    Token next()
    {
        const char c = line_[pos_];
        const char following = pos_ + 1 < line_.size() ? line_[pos_ + 1] : '\0';
        if (is_digit(c) || (c == '.' && is_digit(following))) {
            return number();
        }
        if (is_ident_start(c)) {
            return identifier();
        }
        switch (c) {
        case '+':
            return single(TokenKind::Plus);
        case '-':
            return single(TokenKind::Minus);
        case '*':
            if (following == '*') {
                fail(pos_, "exponentiation '**' is not supported");
            }
            return single(TokenKind::Star);
        case '/':
            if (following == '/') {
                fail(pos_, "floor division '//' is not supported");
            }
            return single(TokenKind::Slash);
        case '(':
            return single(TokenKind::LParen);
        case ')':
            return single(TokenKind::RParen);
        case '=':
            if (following == '=') {
                fail(pos_, "comparisons are not supported");
            }
            return single(TokenKind::Assign);
        case '<':
        case '>':
        case '!':
            fail(pos_, "comparisons are not supported");
        case '"':
        case '\'':
            fail(pos_, "string literals are not supported");
        case '%':
            fail(pos_, "modulo '%' is not supported");
        default:
            break;
        }
        if (static_cast<unsigned char>(c) >= 0x80) {
            fail(pos_, "non-ASCII character");
        }
        fail(pos_, std::string("unexpected character '") + c + "'");
    }

    Token number()
    {
        const std::size_t start = pos_;
        while (pos_ < line_.size() && is_digit(line_[pos_])) {
            ++pos_;
        }
        if (pos_ < line_.size() && line_[pos_] == '.') {
            ++pos_;
            while (pos_ < line_.size() && is_digit(line_[pos_])) {
                ++pos_;
            }
        }
        if (pos_ < line_.size() && (line_[pos_] == 'e' || line_[pos_] == 'E')) {
            std::size_t look = pos_ + 1;
            if (look < line_.size() && (line_[look] == '+' || line_[look] == '-')) {
                ++look;
            }
            if (look < line_.size() && is_digit(line_[look])) {
                pos_ = look;
                while (pos_ < line_.size() && is_digit(line_[pos_])) {
                    ++pos_;
                }
            }
        }
        if (pos_ < line_.size() && (is_ident_char(line_[pos_]) || line_[pos_] == '.')) {
            fail(pos_, "malformed numeric literal");
        }
        const std::string_view text = line_.substr(start, pos_ - start);
        const auto value = util::parse_real(text);
        if (!value) {
            fail(start, "malformed numeric literal");
        }
        return Token{TokenKind::Number, text, start + 1, *value};
    }

    Token identifier()
    {
        const std::size_t start = pos_;
        while (pos_ < line_.size() && is_ident_char(line_[pos_])) {
            ++pos_;
        }
        const std::string_view word = line_.substr(start, pos_ - start);
        if (is_keyword(word)) {
            fail(start, "unsupported construct '" + std::string(word) + "'");
        }
        return Token{TokenKind::Ident, word, start + 1, 0.0};
    }

    std::string_view line_;
    std::size_t line_no_;
    std::size_t pos_ = 0;
};

} // namespace

class Parser {
public:
    explicit Parser(std::string_view source)
    {
        program_.source_ = std::string(source);
    }

    Program run()
    {
        const auto lines = util::split_lines(program_.source_);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            parse_line(lines[i], i + 1);
        }
        return std::move(program_);
    }

private:
    void parse_line(std::string_view raw, std::size_t line_no)
    {
        std::string_view line = raw.substr(0, std::min(raw.find('#'), raw.size()));
        if (util::trim(line).empty()) {
            return;
        }
        if (line.front() == ' ' || line.front() == '\t') {
            throw ParseError(line_no, 1, "unexpected indent");
        }
        if (program_.statements_.size() >= kMaxStatements) {
            throw ParseError(line_no, 1, "program exceeds " + std::to_string(kMaxStatements) + " statements");
        }
        tokens_ = LineLexer(line, line_no).run();
        cursor_ = 0;
        line_no_ = line_no;

        const Token& target = peek();
        if (target.kind != TokenKind::Ident) {
            fail(target, "expected assignment target, found " + describe(target));
        }
        advance();
        const Token& eq = peek();
        if (eq.kind != TokenKind::Assign) {
            const bool augmented = (eq.kind == TokenKind::Plus || eq.kind == TokenKind::Minus
                                    || eq.kind == TokenKind::Star || eq.kind == TokenKind::Slash)
                && cursor_ + 1 < tokens_.size() && tokens_[cursor_ + 1].kind == TokenKind::Assign;
            if (augmented) {
                fail(eq, "augmented assignment is not supported");
            }
            if (eq.kind == TokenKind::LParen) {
                fail(eq, "function calls are not supported");
            }
            fail(eq, "expected '=', found " + describe(eq));
        }
        advance();
        std::size_t depth = 0;
        const ExprId expr = parse_expr(depth, 0);
        if (peek().kind != TokenKind::End) {
            fail(peek(), "unexpected " + describe(peek()));
        }
        program_.statements_.push_back(Statement{intern(target.text), expr, line_no});
    }

    // Each parse_* returns the node id and reports the subtree depth.
    ExprId parse_expr(std::size_t& depth, std::size_t nesting)
    {
        ExprId lhs = parse_term(depth, nesting);
        while (peek().kind == TokenKind::Plus || peek().kind == TokenKind::Minus) {
            const BinaryOp op = peek().kind == TokenKind::Plus ? BinaryOp::Add : BinaryOp::Sub;
            const Token& op_token = advance();
            std::size_t rhs_depth = 0;
            const ExprId rhs = parse_term(rhs_depth, nesting);
            lhs = binary(op, lhs, rhs, depth, rhs_depth, op_token);
        }
        return lhs;
    }

    ExprId parse_term(std::size_t& depth, std::size_t nesting)
    {
        ExprId lhs = parse_unary(depth, nesting);
        while (peek().kind == TokenKind::Star || peek().kind == TokenKind::Slash) {
            const BinaryOp op = peek().kind == TokenKind::Star ? BinaryOp::Mul : BinaryOp::Div;
            const Token& op_token = advance();
            std::size_t rhs_depth = 0;
            const ExprId rhs = parse_unary(rhs_depth, nesting);
            lhs = binary(op, lhs, rhs, depth, rhs_depth, op_token);
        }
        return lhs;
    }

    ExprId parse_unary(std::size_t& depth, std::size_t nesting)
    {
        if (nesting > kMaxExprDepth) {
            fail(peek(), "expression nesting exceeds depth " + std::to_string(kMaxExprDepth));
        }
        if (peek().kind == TokenKind::Minus) {
            const Token& op_token = advance();
            std::size_t inner = 0;
            const ExprId operand = parse_unary(inner, nesting + 1);
            depth = inner + 1;
            check_depth(depth, op_token);
            return push(ExprNode{ExprKind::Negate, BinaryOp::Add, 0.0, 0, operand, 0});
        }
        if (peek().kind == TokenKind::Plus) {
            fail(peek(), "unary '+' is not supported");
        }
        return parse_primary(depth, nesting);
    }

    ExprId parse_primary(std::size_t& depth, std::size_t nesting)
    {
        const Token& token = peek();
        switch (token.kind) {
        case TokenKind::Number:
            advance();
            depth = 1;
            return push(ExprNode{ExprKind::Number, BinaryOp::Add, token.number, 0, 0, 0});
        case TokenKind::Ident: {
            advance();
            if (peek().kind == TokenKind::LParen) {
                fail(token, "function calls are not supported");
            }
            depth = 1;
            return push(ExprNode{ExprKind::Variable, BinaryOp::Add, 0.0, intern(token.text), 0, 0});
        }
        case TokenKind::LParen: {
            advance();
            std::size_t inner = 0;
            const ExprId operand = parse_expr(inner, nesting + 1);
            if (peek().kind != TokenKind::RParen) {
                fail(peek(), "expected ')', found " + describe(peek()));
            }
            advance();
            depth = inner + 1;
            check_depth(depth, token);
            return push(ExprNode{ExprKind::Paren, BinaryOp::Add, 0.0, 0, operand, 0});
        }
        default:
            fail(token, "expected expression, found " + describe(token));
        }
    }

    ExprId binary(BinaryOp op, ExprId lhs, ExprId rhs, std::size_t& depth, std::size_t rhs_depth, const Token& at)
    {
        depth = std::max(depth, rhs_depth) + 1;
        check_depth(depth, at);
        return push(ExprNode{ExprKind::Binary, op, 0.0, 0, lhs, rhs});
    }

    void check_depth(std::size_t depth, const Token& at) const
    {
        if (depth > kMaxExprDepth) {
            fail(at, "expression depth exceeds " + std::to_string(kMaxExprDepth));
        }
    }

    ExprId push(const ExprNode& node)
    {
        program_.nodes_.push_back(node);
        return static_cast<ExprId>(program_.nodes_.size() - 1);
    }

    SymbolId intern(std::string_view name)
    {
        const auto [it, inserted] = symbol_index_.try_emplace(std::string(name), static_cast<SymbolId>(program_.symbols_.size()));
        if (inserted) {
            program_.symbols_.emplace_back(name);
        }
        return it->second;
    }

    const Token& peek() const { return tokens_[cursor_]; }

    const Token& advance()
    {
        const Token& t = tokens_[cursor_];
        if (t.kind != TokenKind::End) {
            ++cursor_;
        }
        return t;
    }

    [[noreturn]] void fail(const Token& at, const std::string& message) const
    {
        throw ParseError(line_no_, at.column, message);
    }

    Program program_;
    std::unordered_map<std::string, SymbolId> symbol_index_;
    std::vector<Token> tokens_;
    std::size_t cursor_ = 0;
    std::size_t line_no_ = 0;
};

Program parse_program(std::string_view source)
{
    return Parser(source).run();
}

namespace {

class Evaluator {
public:
    explicit Evaluator(const Program& program)
        : program_(program)
        , values_(program.symbols().size())
    {
    }

    double run()
    {
        for (const Statement& statement : program_.statements()) {
            line_ = statement.line;
            const double value = eval(statement.expr);
            values_[statement.target] = value;
        }
        const auto& symbols = program_.symbols();
        const auto it = std::find(symbols.begin(), symbols.end(), "answer");
        if (it == symbols.end() || !values_[static_cast<std::size_t>(it - symbols.begin())]) {
            throw EvalError(EvalErrorKind::MissingAnswer, "program never assigns 'answer'");
        }
        return *values_[static_cast<std::size_t>(it - symbols.begin())];
    }

private:
    double eval(ExprId id)
    {
        const ExprNode& node = program_.node(id);
        switch (node.kind) {
        case ExprKind::Number:
            return finite(node.number);
        case ExprKind::Variable: {
            const auto& slot = values_[node.symbol];
            if (!slot) {
                throw EvalError(EvalErrorKind::UndefinedVariable,
                                "line " + std::to_string(line_) + ": name '" + program_.symbol(node.symbol)
                                    + "' is not defined");
            }
            return *slot;
        }
        case ExprKind::Negate:
            return -eval(node.lhs);
        case ExprKind::Paren:
            return eval(node.lhs);
        case ExprKind::Binary: {
            const double lhs = eval(node.lhs);
            const double rhs = eval(node.rhs);
            switch (node.op) {
            case BinaryOp::Add:
                return finite(lhs + rhs);
            case BinaryOp::Sub:
                return finite(lhs - rhs);
            case BinaryOp::Mul:
                return finite(lhs * rhs);
            case BinaryOp::Div:
                if (rhs == 0.0) {
                    throw EvalError(EvalErrorKind::DivisionByZero,
                                    "line " + std::to_string(line_) + ": division by zero");
                }
                return finite(lhs / rhs);
            }
        }
        }
        return 0.0;
    }

    double finite(double value) const
    {
        if (!std::isfinite(value)) {
            throw EvalError(EvalErrorKind::NonFiniteResult,
                            "line " + std::to_string(line_) + ": non-finite intermediate value");
        }
        return value;
    }

    const Program& program_;
    std::vector<std::optional<double>> values_;
    std::size_t line_ = 0;
};

} // namespace

double evaluate(const Program& program)
{
    return Evaluator(program).run();
}

std::string format_expr(const Program& program, ExprId id)
{
    const ExprNode& node = program.node(id);
    switch (node.kind) {
    case ExprKind::Number:
        return util::format_real(node.number);
    case ExprKind::Variable:
        return program.symbol(node.symbol);
    case ExprKind::Negate:
        return "-" + format_expr(program, node.lhs);
    case ExprKind::Paren:
        return "(" + format_expr(program, node.lhs) + ")";
    case ExprKind::Binary:
        return format_expr(program, node.lhs) + " " + to_char(node.op) + " " + format_expr(program, node.rhs);
    }
    return {};
}

std::string format_program(const Program& program)
{
    std::string out;
    for (const Statement& statement : program.statements()) {
        if (!out.empty()) {
            out += '\n';
        }
        out += program.symbol(statement.target);
        out += " = ";
        out += format_expr(program, statement.expr);
    }
    return out;
}

} // namespace ekt::lang
