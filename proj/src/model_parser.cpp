#include "cfh/model.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cfh {

namespace {

// ── Lexer ───────────────────────────────────────────────────────────────────

enum class Tok { Number, Ident, Punct, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    double number = 0.0;
    int column = 0;
};

class Lexer {
public:
    Lexer(std::string_view src, int line, int column_offset)
        : src_(src), line_(line), offset_(column_offset) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        std::size_t i = 0;
        while (i < src_.size()) {
            char c = src_[i];
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++i;
                continue;
            }
            Token t;
            t.column = offset_ + static_cast<int>(i) + 1;
            if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < src_.size() &&
                                                                std::isdigit(static_cast<unsigned char>(src_[i + 1])))) {
                std::size_t j = i;
                while (j < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[j])) || src_[j] == '.')) ++j;
                if (j < src_.size() && (src_[j] == 'e' || src_[j] == 'E')) {
                    std::size_t k = j + 1;
                    if (k < src_.size() && (src_[k] == '+' || src_[k] == '-')) ++k;
                    if (k < src_.size() && std::isdigit(static_cast<unsigned char>(src_[k]))) {
                        while (k < src_.size() && std::isdigit(static_cast<unsigned char>(src_[k]))) ++k;
                        j = k;
                    }
                }
                t.kind = Tok::Number;
                t.text = std::string(src_.substr(i, j - i));
                auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
                if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size())
                    throw ModelError("malformed number '" + t.text + "'", line_, t.column);
                i = j;
            } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::size_t j = i;
                while (j < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_')) ++j;
                t.kind = Tok::Ident;
                t.text = std::string(src_.substr(i, j - i));
                i = j;
            } else if (std::string_view("+-*/(),:>=~").find(c) != std::string_view::npos) {
                t.kind = Tok::Punct;
                t.text = std::string(1, c);
                ++i;
            } else {
                throw ModelError(std::string("unexpected character '") + c + "'", line_, t.column);
            }
            out.push_back(std::move(t));
        }
        Token end;
        end.column = offset_ + static_cast<int>(src_.size()) + 1;
        out.push_back(end);
        return out;
    }

private:
    std::string_view src_;
    int line_;
    int offset_;
};

// ── Recursive-descent parser over one line ──────────────────────────────────

class LineParser {
public:
    LineParser(std::vector<Token> toks, int line) : toks_(std::move(toks)), line_(line) {}

    const Token& peek() const { return toks_[pos_]; }
    bool at_end() const { return peek().kind == Tok::End; }
    Token next() { return toks_[pos_ == toks_.size() - 1 ? pos_ : pos_++]; }

    bool accept(const std::string& punct) {
        if (peek().kind == Tok::Punct && peek().text == punct) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(const std::string& punct) {
        if (!accept(punct)) fail("expected '" + punct + "'" + found());
    }

    std::string ident(const std::string& what) {
        if (peek().kind != Tok::Ident) fail("expected " + what + found());
        return next().text;
    }

    void expect_end() {
        if (!at_end()) fail("unexpected trailing input" + found());
    }

    [[noreturn]] void fail(const std::string& msg) const { throw ModelError(msg, line_, peek().column); }

    std::string found() const {
        if (at_end()) return ", found end of line";
        return ", found '" + peek().text + "'";
    }

    // expr := term (('+'|'-') term)*
    ExprPtr expression(bool allow_indicator) {
        ExprPtr lhs = term(allow_indicator);
        for (;;) {
            if (accept("+"))
                lhs = make_add(lhs, term(allow_indicator));
            else if (accept("-"))
                lhs = make_sub(lhs, term(allow_indicator));
            else
                return lhs;
        }
    }

    // term := unary (('*' unary) | ('/' numeric-constant))*
    ExprPtr term(bool allow_indicator) {
        ExprPtr lhs = unary(allow_indicator);
        for (;;) {
            if (accept("*")) {
                lhs = make_mul(lhs, unary(allow_indicator));
            } else if (peek().kind == Tok::Punct && peek().text == "/") {
                int col = peek().column;
                ++pos_;
                ExprPtr rhs = unary(allow_indicator);
                std::set<std::string> syms;
                collect_symbols(*rhs, syms);
                if (!syms.empty() || contains_indicator(*rhs))
                    throw ModelError("division is only allowed by a numeric constant", line_, col);
                double d = evaluate_expr(*rhs, [](const std::string&) { return 0.0; });
                if (d == 0.0) throw ModelError("division by zero", line_, col);
                lhs = make_mul(lhs, make_constant(1.0 / d));
            } else {
                return lhs;
            }
        }
    }

    // unary := '-' unary | primary; a minus directly before a literal folds into it.
    ExprPtr unary(bool allow_indicator) {
        if (accept("-")) {
            if (peek().kind == Tok::Number) return make_constant(-next().number);
            return make_neg(unary(allow_indicator));
        }
        return primary(allow_indicator);
    }

    ExprPtr primary(bool allow_indicator) {
        const Token& t = peek();
        if (t.kind == Tok::Number) return make_constant(next().number);
        if (t.kind == Tok::Ident) {
            Token id = next();
            if (id.text == "ind" && peek().kind == Tok::Punct && peek().text == "(") {
                if (!allow_indicator)
                    throw ModelError("indicator must be the outermost operation of the phenotype", line_, id.column);
                ++pos_;
                ExprPtr arg = expression(false);
                if (accept(">")) {
                    ExprPtr rhs = expression(false);
                    bool zero = rhs->op == Op::Constant && rhs->value == 0.0;
                    if (!zero) arg = make_sub(arg, rhs);
                }
                expect(")");
                return make_indicator(arg);
            }
            return make_symbol(id.text);
        }
        if (accept("(")) {
            ExprPtr e = expression(allow_indicator);
            expect(")");
            return e;
        }
        fail("expected a number, symbol or '('" + found());
    }

    // A numeric argument: an expression without symbols.
    double number_arg() {
        int col = peek().column;
        ExprPtr e = expression(false);
        std::set<std::string> syms;
        collect_symbols(*e, syms);
        if (!syms.empty()) throw ModelError("expected a numeric value, found symbol '" + *syms.begin() + "'", line_, col);
        double v = evaluate_expr(*e, [](const std::string&) { return 0.0; });
        if (!std::isfinite(v)) throw ModelError("numeric value is not finite", line_, col);
        return v;
    }

    int line() const { return line_; }

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    int line_;
};

DistributionSpec parse_distribution(LineParser& p) {
    int col = p.peek().column;
    std::string kind = p.ident("a distribution name");
    p.expect("(");
    DistributionSpec d;
    if (kind == "normal") {
        double m = p.number_arg();
        p.expect(",");
        int vcol = p.peek().column;
        double v = p.number_arg();
        if (v < 0.0) throw ModelError("negative variance in normal distribution", p.line(), vcol);
        d = DistributionSpec::normal(m, v);
    } else if (kind == "bernoulli" || kind == "hwe") {
        int pcol = p.peek().column;
        double prob = p.number_arg();
        if (!(prob >= 0.0 && prob <= 1.0)) throw ModelError("probability outside [0,1]", p.line(), pcol);
        d = kind == "hwe" ? DistributionSpec::hwe(prob) : DistributionSpec::bernoulli(prob);
    } else if (kind == "discrete") {
        std::vector<double> values, probs;
        do {
            values.push_back(p.number_arg());
            p.expect(":");
            int pcol = p.peek().column;
            double prob = p.number_arg();
            if (!(prob >= 0.0 && prob <= 1.0)) throw ModelError("probability outside [0,1]", p.line(), pcol);
            probs.push_back(prob);
        } while (p.accept(","));
        double total = 0.0;
        for (double q : probs) total += q;
        if (std::abs(total - 1.0) > 1e-9) throw ModelError("discrete probabilities must sum to 1", p.line(), col);
        d = DistributionSpec::discrete(std::move(values), std::move(probs));
    } else {
        throw ModelError("unknown distribution '" + kind + "'", p.line(), col);
    }
    p.expect(")");
    return d;
}

std::string_view strip_comment(std::string_view line) {
    auto hash = line.find('#');
    return hash == std::string_view::npos ? line : line.substr(0, hash);
}

}  // namespace

ExprPtr parse_expression(std::string_view text) {
    LineParser p(Lexer(text, 1, 0).run(), 1);
    ExprPtr e = p.expression(true);
    p.expect_end();
    return e;
}

PhenotypeModel parse_model(std::string_view text) {
    PhenotypeModel model;
    bool have_phenotype = false, have_mode = false;
    int line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view raw = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        std::string_view body = strip_comment(raw);

        LineParser p(Lexer(body, line_no, 0).run(), line_no);
        if (p.at_end()) continue;

        int col = p.peek().column;
        std::string head = p.ident("'symbol', 'phenotype' or 'mode'");
        if (head == "mode") {
            if (have_mode) throw ModelError("mode declared twice", line_no, col);
            p.expect("=");
            int mcol = p.peek().column;
            std::string m = p.ident("population or within_family");
            if (m == "population")
                model.mode = FamilyMode::Population;
            else if (m == "within_family")
                model.mode = FamilyMode::WithinFamily;
            else
                throw ModelError("unknown mode '" + m + "'", line_no, mcol);
            p.expect_end();
            have_mode = true;
        } else if (head == "phenotype" || head == "Y") {
            if (have_phenotype) throw ModelError("phenotype declared twice", line_no, col);
            p.expect("=");
            int ecol = p.peek().column;
            model.phenotype = p.expression(true);
            p.expect_end();
            const Expr& top = *model.phenotype;
            if (top.op == Op::Indicator ? contains_indicator(*top.lhs) : contains_indicator(top))
                throw ModelError("indicator must be the outermost operation of the phenotype", line_no, ecol);
            have_phenotype = true;
        } else if (head == "symbol") {
            SymbolBinding b;
            int ncol = p.peek().column;
            b.name = p.ident("a symbol name");
            if (b.name == "ind") throw ModelError("'ind' is reserved", line_no, ncol);
            if (model.find(b.name)) throw ModelError("symbol '" + b.name + "' declared twice", line_no, ncol);
            p.expect(":");
            int rcol = p.peek().column;
            std::string role = p.ident("a role");
            if (role == "derived") {
                b.role = Role::Derived;
                p.expect("=");
                b.formula = p.expression(false);
            } else if (role == "sibling") {
                b.role = Role::Sibling;
                p.expect("(");
                b.source = p.ident("a genotype symbol");
                p.expect(")");
            } else {
                if (role == "genotype")
                    b.role = Role::Genotype;
                else if (role == "observed")
                    b.role = Role::Observed;
                else if (role == "latent")
                    b.role = Role::Latent;
                else if (role == "family")
                    b.role = Role::Family;
                else
                    throw ModelError("unknown role '" + role + "'", line_no, rcol);
                p.expect("~");
                b.dist = parse_distribution(p);
            }
            p.expect_end();
            model.symbols.push_back(std::move(b));
        } else {
            throw ModelError("unknown statement '" + head + "'", line_no, col);
        }
    }
    if (!have_phenotype) throw ModelError("missing 'phenotype = ...' line", line_no, 1);
    validate(model);
    return model;
}

PhenotypeModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_model(ss.str());
}

}  // namespace cfh
