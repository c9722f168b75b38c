#pragma once
// Tiny arithmetic-expression evaluator for coefficient and data fields.
//
// Grammar:  expr   := term (('+'|'-') term)*
//           term   := factor (('*'|'/') factor)*
//           factor := ('+'|'-') factor | primary ('^' factor)?
//           primary:= number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//
// Variables: x, y, t (time), nx, ny (outward boundary normal).
// Functions: abs, exp, log, sin, cos, sqrt, min, max, pow.  Constant: pi.

#include <cctype>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "core.hpp"

namespace ibvp {

/// Evaluation environment for one point sample.
struct EvalEnv {
    double x = 0.0;
    double y = 0.0;
    double t = 0.0;
    double nx = 0.0;
    double ny = 0.0;
};

class Expr {
  public:
    virtual ~Expr() = default;
    virtual double eval(const EvalEnv& e) const = 0;
};

using ExprPtr = std::shared_ptr<const Expr>;

namespace detail {

struct Const final : Expr {
    double v;
    explicit Const(double v_) : v(v_) {}
    double eval(const EvalEnv&) const override { return v; }
};

struct Var final : Expr {
    int which;  // 0:x 1:y 2:t 3:nx 4:ny
    explicit Var(int w) : which(w) {}
    double eval(const EvalEnv& e) const override {
        switch (which) {
            case 0: return e.x;
            case 1: return e.y;
            case 2: return e.t;
            case 3: return e.nx;
            default: return e.ny;
        }
    }
};

struct Binary final : Expr {
    char op;
    ExprPtr a, b;
    Binary(char op_, ExprPtr a_, ExprPtr b_) : op(op_), a(std::move(a_)), b(std::move(b_)) {}
    double eval(const EvalEnv& e) const override {
        double l = a->eval(e), r = b->eval(e);
        switch (op) {
            case '+': return l + r;
            case '-': return l - r;
            case '*': return l * r;
            case '/': return l / r;
            default: return std::pow(l, r);
        }
    }
};

struct Neg final : Expr {
    ExprPtr a;
    explicit Neg(ExprPtr a_) : a(std::move(a_)) {}
    double eval(const EvalEnv& e) const override { return -a->eval(e); }
};

struct Call final : Expr {
    int fn;  // 0:abs 1:exp 2:log 3:sin 4:cos 5:sqrt 6:min 7:max 8:pow
    std::vector<ExprPtr> args;
    double eval(const EvalEnv& e) const override {
        double a0 = args[0]->eval(e);
        switch (fn) {
            case 0: return std::fabs(a0);
            case 1: return std::exp(a0);
            case 2: return std::log(a0);
            case 3: return std::sin(a0);
            case 4: return std::cos(a0);
            case 5: return std::sqrt(a0);
            case 6: return std::min(a0, args[1]->eval(e));
            case 7: return std::max(a0, args[1]->eval(e));
            default: return std::pow(a0, args[1]->eval(e));
        }
    }
};

class Parser {
  public:
    explicit Parser(const std::string& s) : s_(s) {}

    ExprPtr parse() {
        ExprPtr e = expr();
        skip_ws();
        if (pos_ != s_.size())
            throw validation_error("expression: trailing characters at position " + std::to_string(pos_) + " in '" + s_ + "'");
        return e;
    }

  private:
    const std::string& s_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool eat(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    char peek() {
        skip_ws();
        return pos_ < s_.size() ? s_[pos_] : '\0';
    }

    ExprPtr expr() {
        ExprPtr e = term();
        for (;;) {
            if (eat('+'))
                e = std::make_shared<Binary>('+', e, term());
            else if (eat('-'))
                e = std::make_shared<Binary>('-', e, term());
            else
                return e;
        }
    }
    ExprPtr term() {
        ExprPtr e = factor();
        for (;;) {
            if (eat('*'))
                e = std::make_shared<Binary>('*', e, factor());
            else if (eat('/'))
                e = std::make_shared<Binary>('/', e, factor());
            else
                return e;
        }
    }
    ExprPtr factor() {
        if (eat('-')) return std::make_shared<Neg>(factor());
        if (eat('+')) return factor();
        ExprPtr base = primary();
        if (eat('^')) return std::make_shared<Binary>('^', base, factor());
        return base;
    }
    ExprPtr primary() {
        skip_ws();
        if (pos_ >= s_.size()) throw validation_error("expression: unexpected end of input in '" + s_ + "'");
        char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (c == '(') {
            ++pos_;
            ExprPtr e = expr();
            if (!eat(')')) throw validation_error("expression: missing ')' in '" + s_ + "'");
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return ident();
        throw validation_error(std::string("expression: unexpected character '") + c + "' in '" + s_ + "'");
    }
    ExprPtr number() {
        std::size_t end = pos_;
        while (end < s_.size() &&
               (std::isdigit(static_cast<unsigned char>(s_[end])) || s_[end] == '.' || s_[end] == 'e' ||
                s_[end] == 'E' ||
                ((s_[end] == '+' || s_[end] == '-') && end > pos_ && (s_[end - 1] == 'e' || s_[end - 1] == 'E'))))
            ++end;
        double v = std::strtod(s_.substr(pos_, end - pos_).c_str(), nullptr);
        pos_ = end;
        return std::make_shared<Const>(v);
    }
    ExprPtr ident() {
        std::size_t end = pos_;
        while (end < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_'))
            ++end;
        std::string name = s_.substr(pos_, end - pos_);
        pos_ = end;
        if (name == "x") return std::make_shared<Var>(0);
        if (name == "y") return std::make_shared<Var>(1);
        if (name == "t") return std::make_shared<Var>(2);
        if (name == "nx") return std::make_shared<Var>(3);
        if (name == "ny") return std::make_shared<Var>(4);
        if (name == "pi") return std::make_shared<Const>(kPi);
        static const char* fns[] = {"abs", "exp", "log", "sin", "cos", "sqrt", "min", "max", "pow"};
        for (int i = 0; i < 9; ++i) {
            if (name == fns[i]) {
                if (!eat('(')) throw validation_error("expression: expected '(' after " + name);
                auto call = std::make_shared<Call>();
                call->fn = i;
                call->args.push_back(expr());
                while (eat(',')) call->args.push_back(expr());
                if (!eat(')')) throw validation_error("expression: missing ')' after " + name + " arguments");
                std::size_t want = (i >= 6) ? 2 : 1;
                if (call->args.size() != want)
                    throw validation_error("expression: " + name + " takes " + std::to_string(want) + " argument(s)");
                return call;
            }
        }
        throw validation_error("expression: unknown identifier '" + name + "'");
    }
};

}  // namespace detail

/// Parses an expression string; throws validation_error on malformed input.
inline ExprPtr parse_expr(const std::string& s) { return detail::Parser(s).parse(); }

/// Convenience: parse + point evaluation.
inline double eval_expr(const ExprPtr& e, double x, double y, double t = 0.0, double nx = 0.0,
                        double ny = 0.0) {
    EvalEnv env;
    env.x = x;
    env.y = y;
    env.t = t;
    env.nx = nx;
    env.ny = ny;
    return e->eval(env);
}

}  // namespace ibvp
