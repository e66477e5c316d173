// =============================================================================
// model.hpp -- structural phenotype models Y(g, x, e) and their text format.
//
// Model files are line oriented; '#' starts a comment:
//
//   mode = population | within_family
//   symbol <name> : genotype ~ hwe(p) | bernoulli(p) | discrete(v:p, ...)
//   symbol <name> : observed ~ <distribution>      independent observed environment
//   symbol <name> : latent ~ <distribution>        unobserved, per individual
//   symbol <name> : family ~ <distribution>        unobserved, shared by siblings
//   symbol <name> : derived = <expr>               function of parents / observed
//   symbol <name> : sibling(<genotype>)            co-sibling's dosage
//   phenotype = <expr>                             ("Y = <expr>" also accepted)
//
// Distributions: normal(mean, variance), bernoulli(p), hwe(p),
// discrete(v1:p1, v2:p2, ...). Numeric arguments may be written as
// fractions such as 1/16.
//
// Expressions use + - * ( ), numeric literals, symbols, division by a
// numeric constant, and ind(e) or ind(a > b) as the outermost operation.
// In within_family mode every genotype symbol g has implicit parental
// symbols gf (father) and gm (mother) usable in derived formulas.
// =============================================================================
#pragma once

#include "cfh/expr.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cfh {

class ModelError : public std::runtime_error {
public:
    ModelError(const std::string& message, int line = 0, int column = 0);
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

enum class Role { Genotype, Observed, Latent, Family, Derived, Sibling };

enum class FamilyMode { Population, WithinFamily };

struct DistributionSpec {
    enum class Kind { Normal, Bernoulli, Hwe, Discrete };
    Kind kind = Kind::Normal;
    double mean = 0.0;      // normal
    double variance = 0.0;  // normal
    double p = 0.0;         // bernoulli, hwe
    std::vector<double> values;  // discrete, in declaration order
    std::vector<double> probs;

    static DistributionSpec normal(double mean, double variance);
    static DistributionSpec bernoulli(double p);
    static DistributionSpec hwe(double p);
    static DistributionSpec discrete(std::vector<double> values, std::vector<double> probs);

    bool is_normal() const { return kind == Kind::Normal; }
    // (value, probability) atoms with positive mass, sorted by value; empty for normal.
    std::vector<std::pair<double, double>> atoms() const;
    double dist_mean() const;
    double dist_variance() const;
    std::string to_string() const;
};

struct SymbolBinding {
    std::string name;
    Role role = Role::Latent;
    DistributionSpec dist;  // genotype / observed / latent / family
    ExprPtr formula;        // derived
    std::string source;     // sibling: the genotype symbol it mirrors
};

class PhenotypeModel {
public:
    FamilyMode mode = FamilyMode::Population;
    std::vector<SymbolBinding> symbols;
    ExprPtr phenotype;

    const SymbolBinding* find(const std::string& name) const;
    std::vector<std::string> genotype_names() const;
    // For a parental symbol name such as "g1f" returns {"g1", 0} (father) or
    // {"g1", 1} (mother); nullopt otherwise or in population mode.
    std::optional<std::pair<std::string, int>> parental(const std::string& name) const;
};

// Throws ModelError on any violated invariant.
void validate(const PhenotypeModel& model);

PhenotypeModel parse_model(std::string_view text);
PhenotypeModel load_model(const std::string& path);

// Parses a single expression (no indicator restriction is applied).
ExprPtr parse_expression(std::string_view text);

std::string print_model(const PhenotypeModel& model);
bool structurally_equal(const PhenotypeModel& a, const PhenotypeModel& b);

// Assignment must cover every non-derived symbol used; derived symbols are
// computed from their formulas when absent. Throws std::out_of_range naming a
// missing symbol.
double evaluate(const PhenotypeModel& model, const std::map<std::string, double>& assignment);

enum class EngineClass { LinearGaussian, ProbitGaussian, GeneralMonteCarlo };

EngineClass classify(const PhenotypeModel& model);
std::string to_string(EngineClass c);
std::string to_string(Role r);

// Symbols whose values are continuous random draws that stay random in the
// analytic engine (normal latent / family symbols).
bool is_normal_noise(const SymbolBinding& b);

// FNV-1a 64-bit digest of print_model(), as 16 hex digits.
std::string model_digest(const PhenotypeModel& model);

}  // namespace cfh
