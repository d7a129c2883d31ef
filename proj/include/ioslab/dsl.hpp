#pragma once

// Descriptor language for finite-dimensional systems. Grammar: docs/descriptor_grammar.md

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ioslab/errors.hpp"
#include "ioslab/system.hpp"

namespace ioslab::dsl {

enum class Op { num, state, input, param, constant, neg, add, sub, mul, div, call };

enum class Builtin { sin, cos, exp, ln, sqrt, abs, min, max, sat, atan2, pow };

struct BuiltinInfo {
    const char* name;
    Builtin id;
    int arity;
};

inline constexpr std::array<BuiltinInfo, 11> builtins{{
    {"sin", Builtin::sin, 1}, {"cos", Builtin::cos, 1}, {"exp", Builtin::exp, 1}, {"ln", Builtin::ln, 1},
    {"sqrt", Builtin::sqrt, 1}, {"abs", Builtin::abs, 1}, {"min", Builtin::min, 2}, {"max", Builtin::max, 2},
    {"sat", Builtin::sat, 1}, {"atan2", Builtin::atan2, 2}, {"pow", Builtin::pow, 2},
}};

inline const BuiltinInfo* find_builtin(const std::string& name)
{
    for (const auto& b : builtins)
        if (name == b.name) return &b;
    return nullptr;
}

/// Expression tree; positions are ignored by equality.
struct Expr {
    Op op = Op::num;
    double value = 0.0;        // literal
    std::size_t index = 0;     // state / input index
    std::string name;          // parameter, constant or function name
    std::vector<Expr> args;
    int line = 0, col = 0;

    friend bool operator==(const Expr& a, const Expr& b)
    {
        return a.op == b.op && a.index == b.index && a.name == b.name && a.args == b.args &&
               (a.op != Op::num || a.value == b.value);
    }
};

struct SystemSpecDoc {
    std::size_t state_dim = 0;
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    TimeSet time_set = TimeSet::continuous;
    std::vector<std::pair<std::string, double>> params;
    std::vector<Expr> rhs;
    std::vector<Expr> outputs;
    bool declared_dim_x = false, declared_dim_u = false, declared_dim_y = false;

    friend bool operator==(const SystemSpecDoc&, const SystemSpecDoc&) = default;
};

// ===================================================================
// lexer
// ===================================================================

namespace detail {

enum class Tok { number, ident, plus, minus, star, slash, lparen, rparen, comma, assign, newline, end };

struct Token {
    Tok kind;
    std::string text;
    double number = 0.0;
    int line, col;
};

inline std::vector<Token> lex(const std::string& src)
{
    std::vector<Token> out;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto push = [&](Tok k, std::string t, int c) { out.push_back(Token{k, std::move(t), 0.0, line, c}); };
    while (i < src.size()) {
        const char ch = src[i];
        if (ch == '#') {
            while (i < src.size() && src[i] != '\n') {
                ++i;
                ++col;
            }
            continue;
        }
        if (ch == '\n') {
            push(Tok::newline, "\\n", col);
            ++i;
            ++line;
            col = 1;
            continue;
        }
        if (ch == ' ' || ch == '\t' || ch == '\r') {
            ++i;
            ++col;
            continue;
        }
        const int start_col = col;
        if (std::isdigit(static_cast<unsigned char>(ch)) || (ch == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            std::size_t j = i;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            if (j < src.size() && src[j] == '.') {
                ++j;
                while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            }
            if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
                if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
                    while (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) ++k;
                    j = k;
                }
            }
            const std::string text = src.substr(i, j - i);
            Token t{Tok::number, text, std::strtod(text.c_str(), nullptr), line, start_col};
            out.push_back(t);
            col += static_cast<int>(j - i);
            i = j;
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
            std::size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
            push(Tok::ident, src.substr(i, j - i), start_col);
            col += static_cast<int>(j - i);
            i = j;
            continue;
        }
        Tok k;
        switch (ch) {
        case '+': k = Tok::plus; break;
        case '-': k = Tok::minus; break;
        case '*': k = Tok::star; break;
        case '/': k = Tok::slash; break;
        case '(': k = Tok::lparen; break;
        case ')': k = Tok::rparen; break;
        case ',': k = Tok::comma; break;
        case '=': k = Tok::assign; break;
        default:
            throw parse_error(parse_error::kind::syntax, line, col, std::string("unexpected character '") + ch + "'");
        }
        push(k, std::string(1, ch), start_col);
        ++i;
        ++col;
    }
    push(Tok::end, "<end>", col);
    return out;
}

/// Index suffix of names like x12, dx0, y3; nullopt if the rest is not all digits.
inline std::optional<std::size_t> indexed(const std::string& s, const std::string& prefix)
{
    if (s.size() <= prefix.size() || s.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
    std::size_t v = 0;
    for (std::size_t i = prefix.size(); i < s.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
        v = v * 10 + static_cast<std::size_t>(s[i] - '0');
    }
    return v;
}

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : t_(std::move(toks)) {}

    struct Line {
        std::string key;
        std::optional<std::size_t> index;
        Expr expr;
        double literal = 0.0;
        std::string word;
        int line, col;
    };

    std::vector<Line> document()
    {
        std::vector<Line> lines;
        while (peek().kind != Tok::end) {
            if (peek().kind == Tok::newline) {
                ++p_;
                continue;
            }
            lines.push_back(statement());
            if (peek().kind != Tok::newline && peek().kind != Tok::end)
                fail(peek(), "expected end of line");
        }
        return lines;
    }

private:
    std::vector<Token> t_;
    std::size_t p_ = 0;

    const Token& peek() const { return t_[p_]; }
    const Token& next() { return t_[p_++]; }

    [[noreturn]] static void fail(const Token& t, const std::string& msg)
    {
        throw parse_error(parse_error::kind::syntax, t.line, t.col, msg + (t.kind == Tok::newline || t.kind == Tok::end ? " (found end of line)" : " (found '" + t.text + "')"));
    }

    const Token& expect(Tok k, const char* what)
    {
        if (peek().kind != k) fail(peek(), std::string("expected ") + what);
        return next();
    }

    Line statement()
    {
        const Token& key = expect(Tok::ident, "a key");
        Line ln{key.text, std::nullopt, {}, 0.0, {}, key.line, key.col};
        if (key.text == "param") {
            const Token& name = expect(Tok::ident, "a parameter name");
            ln.word = name.text;
            expect(Tok::assign, "'='");
            double sign = 1.0;
            if (peek().kind == Tok::minus) {
                next();
                sign = -1.0;
            }
            ln.literal = sign * expect(Tok::number, "a numeric literal").number;
            return ln;
        }
        expect(Tok::assign, "'='");
        if (key.text == "dim_x" || key.text == "dim_u" || key.text == "dim_y") {
            const Token& n = expect(Tok::number, "an integer");
            if (n.number != std::floor(n.number) || n.text.find_first_of(".eE") != std::string::npos)
                fail(n, "expected an integer");
            ln.literal = n.number;
            return ln;
        }
        if (key.text == "time") {
            const Token& w = expect(Tok::ident, "'continuous' or 'discrete'");
            if (w.text != "continuous" && w.text != "discrete") fail(w, "expected 'continuous' or 'discrete'");
            ln.word = w.text;
            return ln;
        }
        if (auto i = indexed(key.text, "dx")) {
            ln.key = "dx";
            ln.index = i;
        } else if (auto j = indexed(key.text, "y")) {
            ln.key = "y";
            ln.index = j;
        } else {
            throw parse_error(parse_error::kind::syntax, key.line, key.col, "unknown key '" + key.text + "'");
        }
        ln.expr = expr();
        return ln;
    }

    Expr node(Op op, const Token& at)
    {
        Expr e;
        e.op = op;
        e.line = at.line;
        e.col = at.col;
        return e;
    }

    Expr expr()
    {
        Expr lhs = term();
        while (peek().kind == Tok::plus || peek().kind == Tok::minus) {
            const Token& op = next();
            Expr e = node(op.kind == Tok::plus ? Op::add : Op::sub, op);
            e.args.push_back(std::move(lhs));
            e.args.push_back(term());
            lhs = std::move(e);
        }
        return lhs;
    }

    Expr term()
    {
        Expr lhs = unary();
        while (peek().kind == Tok::star || peek().kind == Tok::slash) {
            const Token& op = next();
            Expr e = node(op.kind == Tok::star ? Op::mul : Op::div, op);
            e.args.push_back(std::move(lhs));
            e.args.push_back(unary());
            lhs = std::move(e);
        }
        return lhs;
    }

    Expr unary()
    {
        if (peek().kind == Tok::minus) {
            const Token& op = next();
            Expr e = node(Op::neg, op);
            e.args.push_back(unary());
            return e;
        }
        return primary();
    }

    Expr primary()
    {
        const Token& t = peek();
        if (t.kind == Tok::number) {
            next();
            Expr e = node(Op::num, t);
            e.value = t.number;
            return e;
        }
        if (t.kind == Tok::lparen) {
            next();
            Expr e = expr();
            expect(Tok::rparen, "')'");
            return e;
        }
        if (t.kind == Tok::ident) {
            next();
            if (peek().kind == Tok::lparen) {
                next();
                Expr e = node(Op::call, t);
                e.name = t.text;
                e.args.push_back(expr());
                while (peek().kind == Tok::comma) {
                    next();
                    e.args.push_back(expr());
                }
                expect(Tok::rparen, "')' or ','");
                return e;
            }
            Expr e = node(Op::param, t);
            e.name = t.text;
            if (auto i = indexed(t.text, "x")) {
                e.op = Op::state;
                e.index = *i;
                e.name.clear();
            } else if (auto j = indexed(t.text, "u")) {
                e.op = Op::input;
                e.index = *j;
                e.name.clear();
            } else if (t.text == "pi") {
                e.op = Op::constant;
            }
            return e;
        }
        fail(t, "expected expression");
    }
};

inline void max_indices(const Expr& e, std::optional<std::size_t>& xs, std::optional<std::size_t>& us)
{
    if (e.op == Op::state) xs = std::max(xs.value_or(0), e.index);
    if (e.op == Op::input) us = std::max(us.value_or(0), e.index);
    for (const auto& a : e.args) max_indices(a, xs, us);
}

inline void validate(const Expr& e, const SystemSpecDoc& doc)
{
    using K = parse_error::kind;
    switch (e.op) {
    case Op::state:
        if (e.index >= doc.state_dim)
            throw parse_error(K::dimension_mismatch, e.line, e.col, "state index x" + std::to_string(e.index) + " exceeds dim_x");
        break;
    case Op::input:
        if (e.index >= doc.input_dim)
            throw parse_error(K::dimension_mismatch, e.line, e.col, "input index u" + std::to_string(e.index) + " exceeds dim_u");
        break;
    case Op::param: {
        bool found = false;
        for (const auto& [n, v] : doc.params) found = found || n == e.name;
        if (!found) throw parse_error(K::unknown_identifier, e.line, e.col, "unknown identifier '" + e.name + "'");
        break;
    }
    case Op::call: {
        const BuiltinInfo* b = find_builtin(e.name);
        if (!b) throw parse_error(K::unknown_identifier, e.line, e.col, "unknown function '" + e.name + "'");
        if (static_cast<int>(e.args.size()) != b->arity)
            throw parse_error(K::syntax, e.line, e.col,
                              "function '" + e.name + "' takes " + std::to_string(b->arity) + " argument(s)");
        break;
    }
    default: break;
    }
    for (const auto& a : e.args) validate(a, doc);
}

} // namespace detail

/// Parses and validates a descriptor document.
[[nodiscard]] inline SystemSpecDoc parse_system(const std::string& text)
{
    using K = parse_error::kind;
    detail::Parser parser(detail::lex(text));
    const auto lines = parser.document();

    SystemSpecDoc doc;
    std::map<std::size_t, std::pair<Expr, int>> dx, ys;
    std::optional<std::size_t> dim_x, dim_u, dim_y;
    int last_line = 1;
    for (const auto& ln : lines) {
        last_line = ln.line;
        if (ln.key == "param") {
            for (const auto& [n, v] : doc.params)
                if (n == ln.word) throw parse_error(K::syntax, ln.line, ln.col, "duplicate parameter '" + ln.word + "'");
            if (ln.word == "pi" || detail::indexed(ln.word, "x") || detail::indexed(ln.word, "u") || find_builtin(ln.word))
                throw parse_error(K::syntax, ln.line, ln.col, "parameter name '" + ln.word + "' is reserved");
            doc.params.emplace_back(ln.word, ln.literal);
        } else if (ln.key == "dim_x") {
            dim_x = static_cast<std::size_t>(ln.literal);
        } else if (ln.key == "dim_u") {
            dim_u = static_cast<std::size_t>(ln.literal);
        } else if (ln.key == "dim_y") {
            dim_y = static_cast<std::size_t>(ln.literal);
        } else if (ln.key == "time") {
            doc.time_set = ln.word == "discrete" ? TimeSet::discrete : TimeSet::continuous;
        } else {
            auto& target = ln.key == "dx" ? dx : ys;
            if (target.count(*ln.index))
                throw parse_error(K::dimension_mismatch, ln.line, ln.col, "duplicate definition of " + ln.key + std::to_string(*ln.index));
            target.emplace(*ln.index, std::make_pair(ln.expr, ln.line));
        }
    }

    auto contiguous = [&](const std::map<std::size_t, std::pair<Expr, int>>& m, std::optional<std::size_t> declared,
                          const std::string& key, std::vector<Expr>& out) {
        const std::size_t n = declared.value_or(m.empty() ? 0 : m.rbegin()->first + 1);
        for (const auto& [i, e] : m)
            if (i >= n)
                throw parse_error(K::dimension_mismatch, e.second, 1, key + std::to_string(i) + " exceeds the declared dimension");
        for (std::size_t i = 0; i < n; ++i) {
            auto it = m.find(i);
            if (it == m.end())
                throw parse_error(K::dimension_mismatch, last_line, 1, "missing definition of " + key + std::to_string(i));
            out.push_back(it->second.first);
        }
        return n;
    };
    doc.state_dim = contiguous(dx, dim_x, "dx", doc.rhs);
    doc.output_dim = contiguous(ys, dim_y, "y", doc.outputs);
    if (doc.state_dim == 0) throw parse_error(K::dimension_mismatch, last_line, 1, "no state equations (dx0 = ...)");
    doc.declared_dim_x = dim_x.has_value();
    doc.declared_dim_y = dim_y.has_value();
    doc.declared_dim_u = dim_u.has_value();

    std::optional<std::size_t> max_x, max_u;
    for (const auto& e : doc.rhs) detail::max_indices(e, max_x, max_u);
    for (const auto& e : doc.outputs) detail::max_indices(e, max_x, max_u);
    doc.input_dim = dim_u.value_or(max_u ? *max_u + 1 : 0);

    for (const auto& e : doc.rhs) detail::validate(e, doc);
    for (const auto& e : doc.outputs) detail::validate(e, doc);
    return doc;
}

// ===================================================================
// printer
// ===================================================================

namespace detail {

inline int precedence(const Expr& e)
{
    switch (e.op) {
    case Op::add:
    case Op::sub: return 1;
    case Op::mul:
    case Op::div: return 2;
    case Op::neg: return 3;
    default: return 4;
    }
}

inline std::string fmt_number(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string print_expr(const Expr& e)
{
    auto wrap = [](const Expr& c, bool paren) { return paren ? "(" + print_expr(c) + ")" : print_expr(c); };
    switch (e.op) {
    case Op::num: return fmt_number(e.value);
    case Op::state: return "x" + std::to_string(e.index);
    case Op::input: return "u" + std::to_string(e.index);
    case Op::param:
    case Op::constant: return e.name;
    case Op::neg: return "-" + wrap(e.args[0], precedence(e.args[0]) < 3);
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div: {
        const int p = precedence(e);
        const char* sym = e.op == Op::add ? " + " : e.op == Op::sub ? " - " : e.op == Op::mul ? " * " : " / ";
        return wrap(e.args[0], precedence(e.args[0]) < p) + sym + wrap(e.args[1], precedence(e.args[1]) <= p);
    }
    case Op::call: {
        std::string s = e.name + "(";
        for (std::size_t i = 0; i < e.args.size(); ++i) s += (i ? ", " : "") + print_expr(e.args[i]);
        return s + ")";
    }
    }
    return "";
}

} // namespace detail

[[nodiscard]] inline std::string print_expr(const Expr& e) { return detail::print_expr(e); }

/// Canonical descriptor text; parse_system(print_system(d)) == d.
[[nodiscard]] inline std::string print_system(const SystemSpecDoc& doc)
{
    std::ostringstream os;
    if (doc.declared_dim_x) os << "dim_x = " << doc.state_dim << '\n';
    if (doc.declared_dim_u) os << "dim_u = " << doc.input_dim << '\n';
    if (doc.declared_dim_y) os << "dim_y = " << doc.output_dim << '\n';
    if (doc.time_set == TimeSet::discrete) os << "time = discrete\n";
    for (const auto& [n, v] : doc.params) os << "param " << n << " = " << detail::fmt_number(v) << '\n';
    for (std::size_t i = 0; i < doc.rhs.size(); ++i) os << "dx" << i << " = " << detail::print_expr(doc.rhs[i]) << '\n';
    for (std::size_t j = 0; j < doc.outputs.size(); ++j) os << "y" << j << " = " << detail::print_expr(doc.outputs[j]) << '\n';
    return os.str();
}

// ===================================================================
// compiler
// ===================================================================

/// Postfix program over a value stack; constants are folded at compile time.
class Program {
public:
    enum class Code : unsigned char { push, state, input, neg, add, sub, mul, div, call };
    struct Instr {
        Code code;
        Builtin fn = Builtin::sin;
        std::size_t index = 0;
        double value = 0.0;
    };

    static constexpr std::size_t max_depth = 256;

    Program() = default;
    explicit Program(std::vector<Instr> code) : code_(std::move(code)) {}

    [[nodiscard]] double run(ConstSpan x, ConstSpan u) const
    {
        std::array<double, max_depth> st;
        std::size_t sp = 0;
        for (const auto& in : code_) {
            switch (in.code) {
            case Code::push: st[sp++] = in.value; break;
            case Code::state: st[sp++] = x[in.index]; break;
            case Code::input: st[sp++] = u[in.index]; break;
            case Code::neg: st[sp - 1] = -st[sp - 1]; break;
            case Code::call: {
                const int ar = arity(in.fn);
                const double r = apply(in.fn, st[sp - static_cast<std::size_t>(ar)], ar == 2 ? st[sp - 1] : 0.0);
                sp -= static_cast<std::size_t>(ar);
                st[sp++] = r;
                break;
            }
            default: {
                const double b = st[--sp];
                st[sp - 1] = binary(in.code, st[sp - 1], b);
            }
            }
        }
        return st[0];
    }

    [[nodiscard]] const std::vector<Instr>& code() const { return code_; }
    [[nodiscard]] bool is_constant() const { return code_.size() == 1 && code_[0].code == Code::push; }

    static int arity(Builtin f)
    {
        for (const auto& b : builtins)
            if (b.id == f) return b.arity;
        return 1;
    }

    static double binary(Code c, double a, double b)
    {
        switch (c) {
        case Code::add: return a + b;
        case Code::sub: return a - b;
        case Code::mul: return a * b;
        case Code::div: return b == 0.0 ? std::numeric_limits<double>::quiet_NaN() : a / b;
        default: return std::numeric_limits<double>::quiet_NaN();
        }
    }

    static double apply(Builtin f, double a, double b)
    {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        if (std::isnan(a) || std::isnan(b)) return nan;
        switch (f) {
        case Builtin::sin: return std::sin(a);
        case Builtin::cos: return std::cos(a);
        case Builtin::exp: return std::exp(a);
        case Builtin::ln: return a > 0.0 ? std::log(a) : nan;
        case Builtin::sqrt: return a >= 0.0 ? std::sqrt(a) : nan;
        case Builtin::abs: return std::abs(a);
        case Builtin::min: return std::min(a, b);
        case Builtin::max: return std::max(a, b);
        case Builtin::sat: return std::min(a, 1.0);
        case Builtin::atan2: return std::atan2(a, b);
        case Builtin::pow: return std::pow(a, b);
        }
        return nan;
    }

private:
    std::vector<Instr> code_;
};

namespace detail {

inline void emit(const Expr& e, const std::map<std::string, double>& params, std::vector<Program::Instr>& out)
{
    using C = Program::Code;
    switch (e.op) {
    case Op::num: out.push_back({C::push, Builtin::sin, 0, e.value}); return;
    case Op::param: out.push_back({C::push, Builtin::sin, 0, params.at(e.name)}); return;
    case Op::constant: out.push_back({C::push, Builtin::sin, 0, std::numbers::pi}); return;
    case Op::state: out.push_back({C::state, Builtin::sin, e.index, 0.0}); return;
    case Op::input: out.push_back({C::input, Builtin::sin, e.index, 0.0}); return;
    default: break;
    }
    const std::size_t mark = out.size();
    for (const auto& a : e.args) emit(a, params, out);
    // fold when every operand compiled to a single constant push
    bool folded = true;
    std::size_t pos = mark;
    std::vector<double> vals;
    for (std::size_t k = 0; k < e.args.size(); ++k) {
        if (pos >= out.size() || out[pos].code != C::push) {
            folded = false;
            break;
        }
        vals.push_back(out[pos].value);
        ++pos;
    }
    folded = folded && pos == out.size();
    Program::Instr in{C::neg, Builtin::sin, 0, 0.0};
    switch (e.op) {
    case Op::neg: in.code = C::neg; break;
    case Op::add: in.code = C::add; break;
    case Op::sub: in.code = C::sub; break;
    case Op::mul: in.code = C::mul; break;
    case Op::div: in.code = C::div; break;
    case Op::call:
        in.code = C::call;
        in.fn = find_builtin(e.name)->id;
        break;
    default: break;
    }
    if (folded) {
        double v;
        if (in.code == C::neg) v = -vals[0];
        else if (in.code == C::call) v = Program::apply(in.fn, vals[0], vals.size() > 1 ? vals[1] : 0.0);
        else v = Program::binary(in.code, vals[0], vals[1]);
        out.resize(mark);
        out.push_back({C::push, Builtin::sin, 0, v});
        return;
    }
    out.push_back(in);
}

inline std::size_t stack_depth(const std::vector<Program::Instr>& code)
{
    std::size_t sp = 0, mx = 0;
    for (const auto& in : code) {
        using C = Program::Code;
        if (in.code == C::push || in.code == C::state || in.code == C::input) ++sp;
        else if (in.code == C::call) sp = sp - static_cast<std::size_t>(Program::arity(in.fn)) + 1;
        else if (in.code != C::neg) --sp;
        mx = std::max(mx, sp);
    }
    return mx;
}

} // namespace detail

[[nodiscard]] inline Program compile_expr(const Expr& e, const std::map<std::string, double>& params)
{
    std::vector<Program::Instr> code;
    detail::emit(e, params, code);
    if (detail::stack_depth(code) > Program::max_depth) throw domain_error("expression too deeply nested");
    return Program(std::move(code));
}

/// SystemModel interpreting the descriptor's expressions.
[[nodiscard]] inline SystemModel compile(const SystemSpecDoc& doc, const std::string& name = "descriptor")
{
    const std::map<std::string, double> params(doc.params.begin(), doc.params.end());
    auto rhs = std::make_shared<std::vector<Program>>();
    auto out = std::make_shared<std::vector<Program>>();
    for (const auto& e : doc.rhs) rhs->push_back(compile_expr(e, params));
    for (const auto& e : doc.outputs) out->push_back(compile_expr(e, params));

    SystemModel s;
    s.name = name;
    s.time_set = doc.time_set;
    s.state_dim = doc.state_dim;
    s.input_dim = doc.input_dim;
    s.output_dim = doc.output_dim;
    s.rhs = [rhs](ConstSpan x, ConstSpan u, MutSpan dx) {
        for (std::size_t i = 0; i < rhs->size(); ++i) dx[i] = (*rhs)[i].run(x, u);
    };
    s.output = [out](ConstSpan x, ConstSpan u, MutSpan y) {
        for (std::size_t j = 0; j < out->size(); ++j) y[j] = (*out)[j].run(x, u);
    };
    s.notes = "compiled from descriptor; Lipschitz continuity of the right-hand side is not checked";
    return s;
}

} // namespace ioslab::dsl
