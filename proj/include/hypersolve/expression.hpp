#pragma once

#include "hypersolve/errors.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace hypersolve {

/// Arithmetic expressions over x, y, z and t used for initial data and exact
/// solutions in configuration files.
///
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := ('+' | '-') unary | power
///   power   := primary ('^' unary)?
///   primary := number | name | name '(' expr ')' | '(' expr ')'
///
/// Names: x y z t pi; functions: sin cos exp sqrt abs.
class Expression {
public:
    static Expression parse(std::string_view text, std::string_view allowed_vars = "xyz")
    {
        Parser p{text, allowed_vars, 0};
        Expression e;
        e.root_ = p.parse_expr();
        p.skip_ws();
        if (p.pos != text.size()) p.fail("unexpected '" + std::string(1, text[p.pos]) + "'");
        e.text_ = std::string(text);
        return e;
    }

    /// x may be shorter than 3; missing coordinates read as 0.
    [[nodiscard]] double operator()(const double* x, std::size_t m, double t = 0.0) const
    {
        double vars[4] = {0.0, 0.0, 0.0, t};
        for (std::size_t i = 0; i < m && i < 3; ++i) vars[i] = x[i];
        return eval(*root_, vars);
    }

    [[nodiscard]] const std::string& text() const noexcept { return text_; }

private:
    enum class Op { num, var, neg, add, sub, mul, div, pow, sin, cos, exp, sqrt, abs };

    struct Node {
        Op op = Op::num;
        double value = 0.0;
        int var = 0;
        std::shared_ptr<const Node> a, b;
    };
    using NodePtr = std::shared_ptr<const Node>;

    static NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr)
    {
        auto n = std::make_shared<Node>();
        n->op = op;
        n->a = std::move(a);
        n->b = std::move(b);
        return n;
    }

    struct Parser {
        std::string_view s;
        std::string_view vars;
        std::size_t pos;

        [[noreturn]] void fail(const std::string& what) const
        {
            throw InputError("expression \"" + std::string(s) + "\": " + what + " at column " +
                             std::to_string(pos + 1));
        }

        void skip_ws()
        {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }

        bool eat(char c)
        {
            skip_ws();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }

        NodePtr parse_expr()
        {
            NodePtr lhs = parse_term();
            for (;;) {
                if (eat('+')) lhs = make(Op::add, lhs, parse_term());
                else if (eat('-')) lhs = make(Op::sub, lhs, parse_term());
                else return lhs;
            }
        }

        NodePtr parse_term()
        {
            NodePtr lhs = parse_unary();
            for (;;) {
                if (eat('*')) lhs = make(Op::mul, lhs, parse_unary());
                else if (eat('/')) lhs = make(Op::div, lhs, parse_unary());
                else return lhs;
            }
        }

        NodePtr parse_unary()
        {
            if (eat('-')) return make(Op::neg, parse_unary());
            if (eat('+')) return parse_unary();
            return parse_power();
        }

        NodePtr parse_power()
        {
            NodePtr base = parse_primary();
            if (eat('^')) return make(Op::pow, base, parse_unary());
            return base;
        }

        NodePtr parse_primary()
        {
            skip_ws();
            if (pos >= s.size()) fail("unexpected end of input");
            const char c = s[pos];
            if (c == '(') {
                ++pos;
                NodePtr e = parse_expr();
                if (!eat(')')) fail("expected ')'");
                return e;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
            if (std::isalpha(static_cast<unsigned char>(c))) return parse_name();
            fail("unexpected '" + std::string(1, c) + "'");
        }

        NodePtr parse_number()
        {
            const std::string rest(s.substr(pos));
            char* end = nullptr;
            const double v = std::strtod(rest.c_str(), &end);
            if (end == rest.c_str()) fail("malformed number");
            pos += static_cast<std::size_t>(end - rest.c_str());
            auto n = std::make_shared<Node>();
            n->value = v;
            return n;
        }

        NodePtr parse_name()
        {
            const std::size_t start = pos;
            while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
            const std::string_view name = s.substr(start, pos - start);
            if (name == "pi") {
                auto n = std::make_shared<Node>();
                n->value = std::numbers::pi;
                return n;
            }
            if (name.size() == 1 && vars.find(name[0]) != std::string_view::npos) {
                auto n = std::make_shared<Node>();
                n->op = Op::var;
                n->var = name[0] == 't' ? 3 : name[0] - 'x';
                return n;
            }
            static constexpr std::pair<std::string_view, Op> functions[] = {
                {"sin", Op::sin}, {"cos", Op::cos}, {"exp", Op::exp}, {"sqrt", Op::sqrt}, {"abs", Op::abs}};
            for (const auto& [fname, op] : functions) {
                if (name != fname) continue;
                if (!eat('(')) fail("expected '(' after " + std::string(name));
                NodePtr arg = parse_expr();
                if (!eat(')')) fail("expected ')'");
                return make(op, arg);
            }
            pos = start;
            fail("unknown name '" + std::string(name) + "'");
        }
    };

    static double eval(const Node& n, const double* vars)
    {
        switch (n.op) {
        case Op::num: return n.value;
        case Op::var: return vars[n.var];
        case Op::neg: return -eval(*n.a, vars);
        case Op::add: return eval(*n.a, vars) + eval(*n.b, vars);
        case Op::sub: return eval(*n.a, vars) - eval(*n.b, vars);
        case Op::mul: return eval(*n.a, vars) * eval(*n.b, vars);
        case Op::div: return eval(*n.a, vars) / eval(*n.b, vars);
        case Op::pow: return std::pow(eval(*n.a, vars), eval(*n.b, vars));
        case Op::sin: return std::sin(eval(*n.a, vars));
        case Op::cos: return std::cos(eval(*n.a, vars));
        case Op::exp: return std::exp(eval(*n.a, vars));
        case Op::sqrt: return std::sqrt(eval(*n.a, vars));
        case Op::abs: return std::abs(eval(*n.a, vars));
        }
        return 0.0;
    }

    NodePtr root_;
    std::string text_;
};

} // namespace hypersolve
