#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ekt/errors.hpp"

// Straight-line arithmetic programs of the form teachers are prompted to
// write:
//
//     # comment
//     n0 = 40
//     t0 = 3 * n0
//     answer = (t0 - n0) / 2
//
// Grammar (one statement per line, Python-compatible subset):
//
//     statement := IDENT '=' expr
//     expr      := term (('+' | '-') term)*
//     term      := unary (('*' | '/') unary)*
//     unary     := '-' unary | primary
//     primary   := NUMBER | IDENT | '(' expr ')'
//
// Anything else (calls, keywords, strings, comparisons, '**', '//', '%',
// augmented assignment, indentation) is a ParseError.
namespace ekt::lang {

inline constexpr std::size_t kMaxStatements = 1000;
inline constexpr std::size_t kMaxExprDepth = 64;

class ParseError : public Error {
public:
    ParseError(std::size_t line, std::size_t column, const std::string& message);

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::size_t line_;
    std::size_t column_;
    std::string reason_;
};

enum class EvalErrorKind : std::uint8_t {
    UndefinedVariable,
    DivisionByZero,
    NonFiniteResult,
    MissingAnswer,
};

std::string_view to_string(EvalErrorKind kind) noexcept;

class EvalError : public Error {
public:
    EvalError(EvalErrorKind kind, const std::string& message);

    EvalErrorKind kind() const noexcept { return kind_; }

private:
    EvalErrorKind kind_;
};

using ExprId = std::uint32_t;
using SymbolId = std::uint32_t;

enum class ExprKind : std::uint8_t { Number, Variable, Negate, Binary, Paren };
enum class BinaryOp : std::uint8_t { Add, Sub, Mul, Div };

char to_char(BinaryOp op) noexcept;

/// One node of an expression tree. Children are indices into the owning
/// Program's node pool; which fields are meaningful depends on `kind`.
struct ExprNode {
    ExprKind kind = ExprKind::Number;
    BinaryOp op = BinaryOp::Add;
    double number = 0.0;    // Number
    SymbolId symbol = 0;    // Variable
    ExprId lhs = 0;         // Negate, Paren: operand; Binary: left
    ExprId rhs = 0;         // Binary: right
};

struct Statement {
    SymbolId target = 0;
    ExprId expr = 0;
    std::size_t line = 0; // 1-based source line
};

/// A parsed program. Immutable after parse_program returns; copies are
/// independent and may be shared across threads.
class Program {
public:
    const std::vector<Statement>& statements() const noexcept { return statements_; }
    const std::vector<ExprNode>& nodes() const noexcept { return nodes_; }
    const ExprNode& node(ExprId id) const { return nodes_.at(id); }
    const std::vector<std::string>& symbols() const noexcept { return symbols_; }
    const std::string& symbol(SymbolId id) const { return symbols_.at(id); }
    const std::string& source() const noexcept { return source_; }

    /// True when some statement assigns `answer`.
    bool assigns_answer() const noexcept;

private:
    friend class Parser;

    std::vector<Statement> statements_;
    std::vector<ExprNode> nodes_;
    std::vector<std::string> symbols_;
    std::string source_;
};

/// Parses untrusted text. Blank lines and `#` comments are skipped.
/// Throws ParseError (with 1-based line and column) for anything outside the
/// grammar or beyond the statement and depth bounds.
Program parse_program(std::string_view source);

/// Executes statements in order in double precision and returns the last
/// value bound to `answer`. Throws EvalError.
double evaluate(const Program& program);

/// Canonical text for the program: one statement per line, single spaces
/// around binary operators, parentheses preserved, literals in shortest
/// round-trip form. Parsing the result yields a program that evaluates
/// identically.
std::string format_program(const Program& program);

std::string format_expr(const Program& program, ExprId id);

} // namespace ekt::lang
