// Expression trees for phenotype formulas: constants, symbols, + - *, unary
// minus, and an indicator ind(e) = 1 if e > 0 else 0.
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace cfh {

enum class Op { Constant, Symbol, Add, Sub, Mul, Neg, Indicator };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    Op op = Op::Constant;
    double value = 0.0;  // Constant
    std::string name;    // Symbol
    ExprPtr lhs;         // unary operand or left operand
    ExprPtr rhs;
};

ExprPtr make_constant(double v);
ExprPtr make_symbol(std::string name);
ExprPtr make_add(ExprPtr a, ExprPtr b);
ExprPtr make_sub(ExprPtr a, ExprPtr b);
ExprPtr make_mul(ExprPtr a, ExprPtr b);
ExprPtr make_neg(ExprPtr a);
ExprPtr make_indicator(ExprPtr a);

// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

// Canonical text; parse(to_string(e)) is structurally equal to e.
std::string to_string(const Expr& e);

bool structurally_equal(const Expr& a, const Expr& b);

void collect_symbols(const Expr& e, std::set<std::string>& out);
bool contains_indicator(const Expr& e);

double evaluate_expr(const Expr& e, const std::function<double(const std::string&)>& lookup);

ExprPtr rename_symbols(const ExprPtr& e, const std::map<std::string, std::string>& renames);

// ── Polynomial expansion ────────────────────────────────────────────────────
// A monomial is a sorted list of (symbol, power); the empty list is the constant.
using Monomial = std::vector<std::pair<std::string, int>>;
using Polynomial = std::map<Monomial, double>;

// Expands an indicator-free expression. Throws std::invalid_argument on Indicator.
Polynomial expand(const Expr& e);

}  // namespace cfh
