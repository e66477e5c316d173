#include "cfh/expr.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace cfh {

namespace {

ExprPtr node(Op op, ExprPtr a = nullptr, ExprPtr b = nullptr) {
    auto e = std::make_shared<Expr>();
    e->op = op;
    e->lhs = std::move(a);
    e->rhs = std::move(b);
    return e;
}

int precedence(const Expr& e) {
    switch (e.op) {
        case Op::Add:
        case Op::Sub: return 1;
        case Op::Mul: return 2;
        case Op::Neg: return 3;
        case Op::Constant: return e.value < 0.0 ? 3 : 4;
        default: return 4;
    }
}

void print(const Expr& e, std::string& out);

void print_operand(const Expr& e, bool parens, std::string& out) {
    if (parens) out += '(';
    print(e, out);
    if (parens) out += ')';
}

void print(const Expr& e, std::string& out) {
    switch (e.op) {
        case Op::Constant: out += format_number(e.value); break;
        case Op::Symbol: out += e.name; break;
        case Op::Indicator:
            out += "ind(";
            print(*e.lhs, out);
            out += ')';
            break;
        case Op::Neg:
            out += '-';
            // A bare "-2" reads back as a negative literal, so negated constants keep parens.
            print_operand(*e.lhs, precedence(*e.lhs) < 4 || e.lhs->op == Op::Constant, out);
            break;
        case Op::Add:
        case Op::Sub:
        case Op::Mul: {
            int p = precedence(e);
            print_operand(*e.lhs, precedence(*e.lhs) < p, out);
            out += e.op == Op::Add ? " + " : (e.op == Op::Sub ? " - " : " * ");
            print_operand(*e.rhs, precedence(*e.rhs) <= p, out);
            break;
        }
    }
}

Polynomial poly_mul(const Polynomial& a, const Polynomial& b) {
    Polynomial out;
    for (const auto& [ma, ca] : a) {
        for (const auto& [mb, cb] : b) {
            std::map<std::string, int> powers;
            for (const auto& [s, k] : ma) powers[s] += k;
            for (const auto& [s, k] : mb) powers[s] += k;
            Monomial m(powers.begin(), powers.end());
            out[m] += ca * cb;
        }
    }
    return out;
}

void prune(Polynomial& p) {
    for (auto it = p.begin(); it != p.end();) {
        if (it->second == 0.0)
            it = p.erase(it);
        else
            ++it;
    }
}

}  // namespace

ExprPtr make_constant(double v) {
    auto e = std::make_shared<Expr>();
    e->op = Op::Constant;
    e->value = v;
    return e;
}

ExprPtr make_symbol(std::string name) {
    auto e = std::make_shared<Expr>();
    e->op = Op::Symbol;
    e->name = std::move(name);
    return e;
}

ExprPtr make_add(ExprPtr a, ExprPtr b) { return node(Op::Add, std::move(a), std::move(b)); }
ExprPtr make_sub(ExprPtr a, ExprPtr b) { return node(Op::Sub, std::move(a), std::move(b)); }
ExprPtr make_mul(ExprPtr a, ExprPtr b) { return node(Op::Mul, std::move(a), std::move(b)); }
ExprPtr make_neg(ExprPtr a) { return node(Op::Neg, std::move(a)); }
ExprPtr make_indicator(ExprPtr a) { return node(Op::Indicator, std::move(a)); }

std::string format_number(double v) {
    if (v == 0.0) return "0";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string to_string(const Expr& e) {
    std::string out;
    print(e, out);
    return out;
}

bool structurally_equal(const Expr& a, const Expr& b) {
    if (a.op != b.op) return false;
    switch (a.op) {
        case Op::Constant: return a.value == b.value;
        case Op::Symbol: return a.name == b.name;
        case Op::Neg:
        case Op::Indicator: return structurally_equal(*a.lhs, *b.lhs);
        default: return structurally_equal(*a.lhs, *b.lhs) && structurally_equal(*a.rhs, *b.rhs);
    }
}

void collect_symbols(const Expr& e, std::set<std::string>& out) {
    if (e.op == Op::Symbol) out.insert(e.name);
    if (e.lhs) collect_symbols(*e.lhs, out);
    if (e.rhs) collect_symbols(*e.rhs, out);
}

bool contains_indicator(const Expr& e) {
    if (e.op == Op::Indicator) return true;
    return (e.lhs && contains_indicator(*e.lhs)) || (e.rhs && contains_indicator(*e.rhs));
}

double evaluate_expr(const Expr& e, const std::function<double(const std::string&)>& lookup) {
    switch (e.op) {
        case Op::Constant: return e.value;
        case Op::Symbol: return lookup(e.name);
        case Op::Add: return evaluate_expr(*e.lhs, lookup) + evaluate_expr(*e.rhs, lookup);
        case Op::Sub: return evaluate_expr(*e.lhs, lookup) - evaluate_expr(*e.rhs, lookup);
        case Op::Mul: return evaluate_expr(*e.lhs, lookup) * evaluate_expr(*e.rhs, lookup);
        case Op::Neg: return -evaluate_expr(*e.lhs, lookup);
        case Op::Indicator: return evaluate_expr(*e.lhs, lookup) > 0.0 ? 1.0 : 0.0;
    }
    return 0.0;
}

ExprPtr rename_symbols(const ExprPtr& e, const std::map<std::string, std::string>& renames) {
    if (e->op == Op::Symbol) {
        auto it = renames.find(e->name);
        return it == renames.end() ? e : make_symbol(it->second);
    }
    if (e->op == Op::Constant) return e;
    auto copy = std::make_shared<Expr>(*e);
    if (e->lhs) copy->lhs = rename_symbols(e->lhs, renames);
    if (e->rhs) copy->rhs = rename_symbols(e->rhs, renames);
    return copy;
}

Polynomial expand(const Expr& e) {
    Polynomial out;
    switch (e.op) {
        case Op::Constant:
            out[{}] = e.value;
            break;
        case Op::Symbol:
            out[{{e.name, 1}}] = 1.0;
            break;
        case Op::Add:
        case Op::Sub: {
            out = expand(*e.lhs);
            double sign = e.op == Op::Add ? 1.0 : -1.0;
            for (const auto& [m, c] : expand(*e.rhs)) out[m] += sign * c;
            break;
        }
        case Op::Mul:
            out = poly_mul(expand(*e.lhs), expand(*e.rhs));
            break;
        case Op::Neg:
            out = expand(*e.lhs);
            for (auto& [m, c] : out) c = -c;
            break;
        case Op::Indicator:
            throw std::invalid_argument("cannot expand an indicator into a polynomial");
    }
    prune(out);
    return out;
}

}  // namespace cfh
