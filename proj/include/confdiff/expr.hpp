#pragma once

// Closed-form scalar expressions in (x, y): parsing, evaluation, printing and
// exact symbolic partial derivatives.
//
// Grammar (standard precedence, '^' binds tightest and is right-associative,
// unary minus binds tighter than '*' and '/'):
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?
//   primary := number | name | name '(' expr ')' | '(' expr ')'
//
// Names: x, y, r (= sqrt(x^2+y^2)), pi, e. Functions: sin cos tan asin acos
// atan exp log sqrt abs neg sign.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "confdiff/error.hpp"
#include "confdiff/linalg.hpp"

namespace confdiff::expr {

enum class Var { x, y };

enum class Op : std::uint8_t {
    constant,
    var_x,
    var_y,
    add,
    sub,
    mul,
    div,
    pow,
    neg,
    sin,
    cos,
    tan,
    asin,
    acos,
    atan,
    exp,
    log,
    sqrt,
    abs,
    sign,
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    Op op{Op::constant};
    double value{};
    NodePtr lhs;  // operand of unary nodes
    NodePtr rhs;
};

namespace detail {

struct FunctionName {
    std::string_view name;
    Op op;
};

inline constexpr std::array<FunctionName, 12> kFunctions{{
    {"sin", Op::sin},
    {"cos", Op::cos},
    {"tan", Op::tan},
    {"asin", Op::asin},
    {"acos", Op::acos},
    {"atan", Op::atan},
    {"exp", Op::exp},
    {"log", Op::log},
    {"sqrt", Op::sqrt},
    {"abs", Op::abs},
    {"neg", Op::neg},
    {"sign", Op::sign},
}};

inline std::optional<Op> function_op(std::string_view name) {
    for (const auto& f : kFunctions) {
        if (f.name == name) return f.op;
    }
    return std::nullopt;
}

inline std::string_view function_name(Op op) {
    for (const auto& f : kFunctions) {
        if (f.op == op) return f.name;
    }
    return "?";
}

inline bool is_binary(Op op) {
    return op == Op::add || op == Op::sub || op == Op::mul || op == Op::div || op == Op::pow;
}

inline char binary_symbol(Op op) {
    switch (op) {
        case Op::add: return '+';
        case Op::sub: return '-';
        case Op::mul: return '*';
        case Op::div: return '/';
        default: return '^';
    }
}

/// Shortest decimal representation that round-trips to the same double.
inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), end);
}

inline void print_node(const Node& n, std::string& out) {
    switch (n.op) {
        case Op::constant:
            if (std::signbit(n.value)) {
                out += "(-";
                out += format_double(-n.value);
                out += ')';
            } else {
                out += format_double(n.value);
            }
            return;
        case Op::var_x: out += 'x'; return;
        case Op::var_y: out += 'y'; return;
        case Op::neg:
            out += "(-";
            print_node(*n.lhs, out);
            out += ')';
            return;
        default: break;
    }
    if (is_binary(n.op)) {
        out += '(';
        print_node(*n.lhs, out);
        out += ' ';
        out += binary_symbol(n.op);
        out += ' ';
        print_node(*n.rhs, out);
        out += ')';
        return;
    }
    out += function_name(n.op);
    out += '(';
    print_node(*n.lhs, out);
    out += ')';
}

}  // namespace detail

/// Immutable expression tree. Copies share nodes; evaluation is reentrant.
class Expr {
public:
    Expr() : Expr(constant(0.0)) {}
    explicit Expr(NodePtr root) : root_(std::move(root)) {}

    static Expr constant(double v) {
        return Expr(std::make_shared<const Node>(Node{Op::constant, v, nullptr, nullptr}));
    }
    static Expr variable(Var v) {
        return Expr(std::make_shared<const Node>(
            Node{v == Var::x ? Op::var_x : Op::var_y, 0.0, nullptr, nullptr}));
    }
    static Expr unary(Op op, const Expr& arg) {
        return Expr(std::make_shared<const Node>(Node{op, 0.0, arg.root_, nullptr}));
    }
    static Expr binary(Op op, const Expr& lhs, const Expr& rhs) {
        return Expr(std::make_shared<const Node>(Node{op, 0.0, lhs.root_, rhs.root_}));
    }

    const Node& root() const { return *root_; }
    const NodePtr& root_ptr() const { return root_; }

    bool is_constant() const { return root_->op == Op::constant; }
    /// True when the tree does not reference `v`.
    bool independent_of(Var v) const { return !references(*root_, v); }

    double operator()(double x, double y) const;
    double operator()(Vec2 p) const { return (*this)(p.x, p.y); }

    std::string to_string() const {
        std::string out;
        detail::print_node(*root_, out);
        return out;
    }

    friend Expr operator+(const Expr& a, const Expr& b) { return binary(Op::add, a, b); }
    friend Expr operator-(const Expr& a, const Expr& b) { return binary(Op::sub, a, b); }
    friend Expr operator*(const Expr& a, const Expr& b) { return binary(Op::mul, a, b); }
    friend Expr operator/(const Expr& a, const Expr& b) { return binary(Op::div, a, b); }
    friend Expr operator-(const Expr& a) { return unary(Op::neg, a); }

private:
    static bool references(const Node& n, Var v) {
        if (n.op == Op::var_x) return v == Var::x;
        if (n.op == Op::var_y) return v == Var::y;
        return (n.lhs && references(*n.lhs, v)) || (n.rhs && references(*n.rhs, v));
    }

    NodePtr root_;
};

inline Expr pow(const Expr& a, const Expr& b) { return Expr::binary(Op::pow, a, b); }

inline std::string print(const Expr& e) { return e.to_string(); }

// ---------------------------------------------------------------------------
// Evaluation

namespace detail {

[[noreturn]] inline void domain_fail(const char* what, const Node& n) {
    std::string text;
    print_node(n, text);
    throw DomainError(what, text);
}

inline double eval_node(const Node& n, double x, double y) {
    double r = 0.0;
    switch (n.op) {
        case Op::constant: return n.value;
        case Op::var_x: return x;
        case Op::var_y: return y;
        case Op::add: r = eval_node(*n.lhs, x, y) + eval_node(*n.rhs, x, y); break;
        case Op::sub: r = eval_node(*n.lhs, x, y) - eval_node(*n.rhs, x, y); break;
        case Op::mul: r = eval_node(*n.lhs, x, y) * eval_node(*n.rhs, x, y); break;
        case Op::div: {
            const double num = eval_node(*n.lhs, x, y);
            const double den = eval_node(*n.rhs, x, y);
            if (den == 0.0) domain_fail("division by zero", n);
            r = num / den;
            break;
        }
        case Op::pow: {
            const double base = eval_node(*n.lhs, x, y);
            const double ex = eval_node(*n.rhs, x, y);
            if (base == 0.0 && ex < 0.0) domain_fail("zero raised to a negative power", n);
            if (base < 0.0 && ex != std::trunc(ex)) {
                domain_fail("negative base with non-integer exponent", n);
            }
            r = std::pow(base, ex);
            break;
        }
        case Op::neg: return -eval_node(*n.lhs, x, y);
        case Op::sin: r = std::sin(eval_node(*n.lhs, x, y)); break;
        case Op::cos: r = std::cos(eval_node(*n.lhs, x, y)); break;
        case Op::tan: r = std::tan(eval_node(*n.lhs, x, y)); break;
        case Op::asin:
        case Op::acos: {
            const double a = eval_node(*n.lhs, x, y);
            if (a < -1.0 || a > 1.0) domain_fail("argument outside [-1, 1]", n);
            r = n.op == Op::asin ? std::asin(a) : std::acos(a);
            break;
        }
        case Op::atan: r = std::atan(eval_node(*n.lhs, x, y)); break;
        case Op::exp: r = std::exp(eval_node(*n.lhs, x, y)); break;
        case Op::log: {
            const double a = eval_node(*n.lhs, x, y);
            if (!(a > 0.0)) domain_fail("logarithm of a non-positive value", n);
            r = std::log(a);
            break;
        }
        case Op::sqrt: {
            const double a = eval_node(*n.lhs, x, y);
            if (a < 0.0) domain_fail("square root of a negative value", n);
            r = std::sqrt(a);
            break;
        }
        case Op::abs: return std::abs(eval_node(*n.lhs, x, y));
        case Op::sign: {
            const double a = eval_node(*n.lhs, x, y);
            if (a == 0.0) domain_fail("sign is undefined at zero", n);
            return a > 0.0 ? 1.0 : -1.0;
        }
    }
    if (!std::isfinite(r)) domain_fail("non-finite result", n);
    return r;
}

}  // namespace detail

inline double Expr::operator()(double x, double y) const {
    return detail::eval_node(*root_, x, y);
}

/// Evaluates `e` at (x, y). Throws DomainError outside the domain of any
/// sub-expression.
inline double evaluate(const Expr& e, double x, double y) { return e(x, y); }
inline double evaluate(const Expr& e, Vec2 p) { return e(p.x, p.y); }

// ---------------------------------------------------------------------------
// Symbolic differentiation (unsimplified trees)

namespace detail {

inline Expr derive(const NodePtr& np, Var v) {
    const Node& n = *np;
    const Expr self(np);
    const auto d = [&](const NodePtr& c) { return derive(c, v); };
    const auto c = [](double k) { return Expr::constant(k); };

    switch (n.op) {
        case Op::constant: return c(0.0);
        case Op::var_x: return c(v == Var::x ? 1.0 : 0.0);
        case Op::var_y: return c(v == Var::y ? 1.0 : 0.0);
        default: break;
    }

    const Expr a(n.lhs);
    const Expr da = d(n.lhs);
    switch (n.op) {
        case Op::add: return da + d(n.rhs);
        case Op::sub: return da - d(n.rhs);
        case Op::mul: {
            const Expr b(n.rhs);
            return da * b + a * d(n.rhs);
        }
        case Op::div: {
            const Expr b(n.rhs);
            return (da * b - a * d(n.rhs)) / pow(b, c(2.0));
        }
        case Op::pow: {
            const Expr b(n.rhs);
            if (n.rhs->op == Op::constant) {
                return b * pow(a, c(n.rhs->value - 1.0)) * da;
            }
            if (n.lhs->op == Op::constant) {
                return self * Expr::unary(Op::log, a) * d(n.rhs);
            }
            return self * (d(n.rhs) * Expr::unary(Op::log, a) + b * da / a);
        }
        case Op::neg: return -da;
        case Op::sin: return Expr::unary(Op::cos, a) * da;
        case Op::cos: return -Expr::unary(Op::sin, a) * da;
        case Op::tan: return da / pow(Expr::unary(Op::cos, a), c(2.0));
        case Op::asin: return da / Expr::unary(Op::sqrt, c(1.0) - pow(a, c(2.0)));
        case Op::acos: return -da / Expr::unary(Op::sqrt, c(1.0) - pow(a, c(2.0)));
        case Op::atan: return da / (c(1.0) + pow(a, c(2.0)));
        case Op::exp: return self * da;
        case Op::log: return da / a;
        case Op::sqrt: return da / (c(2.0) * self);
        case Op::abs: return Expr::unary(Op::sign, a) * da;
        // zero wherever sign is defined; keeps the undefined point at a == 0
        case Op::sign: return c(0.0) * self;
        default: return c(0.0);
    }
}

}  // namespace detail

/// Exact partial derivative of `e` with respect to `v`.
inline Expr differentiate(const Expr& e, Var v) { return detail::derive(e.root_ptr(), v); }

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

enum class Tok { number, name, plus, minus, star, slash, caret, lparen, rparen, comma, end };

struct Token {
    Tok kind;
    std::string_view text;
    double number{};
    int column{};  // 1-based
};

inline std::vector<Token> tokenize(std::string_view s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const char ch = s[i];
        const int col = static_cast<int>(i) + 1;
        if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
            ++i;
            continue;
        }
        const auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
        if (is_digit(ch) || (ch == '.' && i + 1 < s.size() && is_digit(s[i + 1]))) {
            std::size_t j = i;
            while (j < s.size() && is_digit(s[j])) ++j;
            if (j < s.size() && s[j] == '.') {
                ++j;
                while (j < s.size() && is_digit(s[j])) ++j;
            }
            if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
                if (k < s.size() && is_digit(s[k])) {
                    while (k < s.size() && is_digit(s[k])) ++k;
                    j = k;
                }
            }
            double v = 0.0;
            const auto res = std::from_chars(s.data() + i, s.data() + j, v);
            if (res.ec != std::errc{} || res.ptr != s.data() + j) {
                throw ParseError("malformed number '" + std::string(s.substr(i, j - i)) + "'", col,
                                 "");
            }
            out.push_back({Tok::number, s.substr(i, j - i), v, col});
            i = j;
            continue;
        }
        const auto is_alpha = [](char c) {
            return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
        };
        if (is_alpha(ch)) {
            std::size_t j = i;
            while (j < s.size() && (is_alpha(s[j]) || is_digit(s[j]))) ++j;
            out.push_back({Tok::name, s.substr(i, j - i), 0.0, col});
            i = j;
            continue;
        }
        Tok kind{};
        switch (ch) {
            case '+': kind = Tok::plus; break;
            case '-': kind = Tok::minus; break;
            case '*': kind = Tok::star; break;
            case '/': kind = Tok::slash; break;
            case '^': kind = Tok::caret; break;
            case '(': kind = Tok::lparen; break;
            case ')': kind = Tok::rparen; break;
            case ',': kind = Tok::comma; break;
            default:
                throw ParseError("unexpected character '" + std::string(1, ch) + "'", col,
                                 "number, name, operator or parenthesis");
        }
        out.push_back({kind, s.substr(i, 1), 0.0, col});
        ++i;
    }
    out.push_back({Tok::end, {}, 0.0, static_cast<int>(s.size()) + 1});
    return out;
}

inline constexpr const char* kOperand = "one of: number, name, '(', '-'";
inline constexpr const char* kOperator = "one of: '+', '-', '*', '/', '^'";

class Parser {
public:
    explicit Parser(std::string_view text) : tokens_(tokenize(text)) {}

    Expr parse_all() {
        Expr e = parse_expr();
        if (peek().kind != Tok::end) {
            if (peek().kind == Tok::rparen) {
                throw ParseError("unmatched ')'", peek().column, std::string(kOperator) + ", end of input");
            }
            throw ParseError("unexpected '" + std::string(peek().text) + "'", peek().column,
                             std::string(kOperator) + ", end of input");
        }
        return e;
    }

private:
    const Token& peek() const { return tokens_[pos_]; }
    const Token& next() { return tokens_[pos_++]; }

    Expr parse_expr() {
        Expr lhs = parse_term();
        while (peek().kind == Tok::plus || peek().kind == Tok::minus) {
            const Op op = next().kind == Tok::plus ? Op::add : Op::sub;
            lhs = Expr::binary(op, lhs, parse_term());
        }
        return lhs;
    }

    Expr parse_term() {
        Expr lhs = parse_unary();
        while (peek().kind == Tok::star || peek().kind == Tok::slash) {
            const Op op = next().kind == Tok::star ? Op::mul : Op::div;
            lhs = Expr::binary(op, lhs, parse_unary());
        }
        return lhs;
    }

    Expr parse_unary() {
        if (peek().kind == Tok::minus) {
            next();
            return -parse_unary();
        }
        return parse_power();
    }

    Expr parse_power() {
        Expr base = parse_primary();
        if (peek().kind == Tok::caret) {
            next();
            return pow(base, parse_unary());
        }
        return base;
    }

    // Consumes ')' closing the parenthesis opened at `open_column`.
    void close_paren(int open_column) {
        if (peek().kind == Tok::rparen) {
            next();
            return;
        }
        if (peek().kind == Tok::end) {
            throw ParseError("unbalanced parenthesis opened here", open_column,
                             "')' or one of: '+', '-', '*', '/', '^'");
        }
        throw ParseError("unexpected '" + std::string(peek().text) + "'", peek().column,
                         "')' or one of: '+', '-', '*', '/', '^'");
    }

    Expr parse_primary() {
        const Token tok = next();
        switch (tok.kind) {
            case Tok::number: return Expr::constant(tok.number);
            case Tok::lparen: {
                Expr inner = parse_expr();
                close_paren(tok.column);
                return inner;
            }
            case Tok::name: return parse_name(tok);
            case Tok::end: throw ParseError("unexpected end of input", tok.column, kOperand);
            default:
                throw ParseError("unexpected '" + std::string(tok.text) + "'", tok.column, kOperand);
        }
    }

    Expr parse_name(const Token& tok) {
        const std::string_view name = tok.text;
        if (name == "x") return Expr::variable(Var::x);
        if (name == "y") return Expr::variable(Var::y);
        if (name == "r") {
            const Expr x = Expr::variable(Var::x);
            const Expr y = Expr::variable(Var::y);
            const Expr two = Expr::constant(2.0);
            return Expr::unary(Op::sqrt, pow(x, two) + pow(y, two));
        }
        if (name == "pi") return Expr::constant(std::numbers::pi);
        if (name == "e") return Expr::constant(std::numbers::e);

        const auto op = function_op(name);
        if (!op) {
            throw ParseError("unknown identifier '" + std::string(name) + "'", tok.column,
                             "x, y, r, pi, e or a function name");
        }
        if (peek().kind != Tok::lparen) {
            throw ParseError("function '" + std::string(name) + "' needs an argument list",
                             peek().column, "'('");
        }
        const Token open = next();
        std::vector<Expr> args;
        args.push_back(parse_expr());
        while (peek().kind == Tok::comma) {
            next();
            args.push_back(parse_expr());
        }
        close_paren(open.column);
        if (args.size() != 1) {
            throw ParseError("function '" + std::string(name) + "' takes 1 argument, got " +
                                 std::to_string(args.size()),
                             tok.column, "");
        }
        return Expr::unary(*op, args.front());
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses `text` into an expression tree. Throws ParseError with a 1-based
/// column and the set of tokens that would have been accepted.
inline Expr parse(std::string_view text) { return detail::Parser(text).parse_all(); }

}  // namespace confdiff::expr
