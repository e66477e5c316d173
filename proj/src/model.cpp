#include "cfh/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <set>

namespace cfh {

ModelError::ModelError(const std::string& message, int line, int column)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message
                                  : message),
      line_(line),
      column_(column) {}

// ── DistributionSpec ────────────────────────────────────────────────────────

DistributionSpec DistributionSpec::normal(double mean, double variance) {
    if (!(variance >= 0.0) || !std::isfinite(variance) || !std::isfinite(mean))
        throw ModelError("normal distribution needs finite mean and variance >= 0");
    DistributionSpec d;
    d.kind = Kind::Normal;
    d.mean = mean;
    d.variance = variance;
    return d;
}

DistributionSpec DistributionSpec::bernoulli(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ModelError("bernoulli probability outside [0,1]");
    DistributionSpec d;
    d.kind = Kind::Bernoulli;
    d.p = p;
    return d;
}

DistributionSpec DistributionSpec::hwe(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ModelError("allele frequency outside [0,1]");
    DistributionSpec d;
    d.kind = Kind::Hwe;
    d.p = p;
    return d;
}

DistributionSpec DistributionSpec::discrete(std::vector<double> values, std::vector<double> probs) {
    if (values.empty() || values.size() != probs.size())
        throw ModelError("discrete distribution needs matching values and probabilities");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (!(probs[i] >= 0.0) || !std::isfinite(values[i])) throw ModelError("invalid discrete distribution entry");
        total += probs[i];
    }
    if (std::abs(total - 1.0) > 1e-9) throw ModelError("discrete probabilities must sum to 1");
    DistributionSpec d;
    d.kind = Kind::Discrete;
    d.values = std::move(values);
    d.probs = std::move(probs);
    return d;
}

std::vector<std::pair<double, double>> DistributionSpec::atoms() const {
    std::vector<std::pair<double, double>> out;
    switch (kind) {
        case Kind::Normal: return out;
        case Kind::Bernoulli:
            out = {{0.0, 1.0 - p}, {1.0, p}};
            break;
        case Kind::Hwe:
            out = {{0.0, (1.0 - p) * (1.0 - p)}, {1.0, 2.0 * p * (1.0 - p)}, {2.0, p * p}};
            break;
        case Kind::Discrete: {
            std::map<double, double> merged;
            for (std::size_t i = 0; i < values.size(); ++i) merged[values[i]] += probs[i];
            out.assign(merged.begin(), merged.end());
            break;
        }
    }
    out.erase(std::remove_if(out.begin(), out.end(), [](const auto& a) { return a.second <= 0.0; }), out.end());
    return out;
}

double DistributionSpec::dist_mean() const {
    if (kind == Kind::Normal) return mean;
    double m = 0.0;
    for (const auto& [v, q] : atoms()) m += v * q;
    return m;
}

double DistributionSpec::dist_variance() const {
    if (kind == Kind::Normal) return variance;
    double m = dist_mean(), s = 0.0;
    for (const auto& [v, q] : atoms()) s += q * (v - m) * (v - m);
    return s;
}

std::string DistributionSpec::to_string() const {
    switch (kind) {
        case Kind::Normal: return "normal(" + format_number(mean) + ", " + format_number(variance) + ")";
        case Kind::Bernoulli: return "bernoulli(" + format_number(p) + ")";
        case Kind::Hwe: return "hwe(" + format_number(p) + ")";
        case Kind::Discrete: {
            std::string s = "discrete(";
            for (std::size_t i = 0; i < values.size(); ++i) {
                if (i) s += ", ";
                s += format_number(values[i]) + ":" + format_number(probs[i]);
            }
            return s + ")";
        }
    }
    return {};
}

namespace {

bool same_dist(const DistributionSpec& a, const DistributionSpec& b) {
    return a.kind == b.kind && a.mean == b.mean && a.variance == b.variance && a.p == b.p && a.values == b.values &&
           a.probs == b.probs;
}

}  // namespace

// ── PhenotypeModel ──────────────────────────────────────────────────────────

const SymbolBinding* PhenotypeModel::find(const std::string& name) const {
    for (const auto& s : symbols)
        if (s.name == name) return &s;
    return nullptr;
}

std::vector<std::string> PhenotypeModel::genotype_names() const {
    std::vector<std::string> out;
    for (const auto& s : symbols)
        if (s.role == Role::Genotype) out.push_back(s.name);
    return out;
}

std::optional<std::pair<std::string, int>> PhenotypeModel::parental(const std::string& name) const {
    if (mode != FamilyMode::WithinFamily || name.size() < 2) return std::nullopt;
    char last = name.back();
    if (last != 'f' && last != 'm') return std::nullopt;
    const SymbolBinding* g = find(name.substr(0, name.size() - 1));
    if (!g || g->role != Role::Genotype) return std::nullopt;
    return std::make_pair(g->name, last == 'f' ? 0 : 1);
}

bool is_normal_noise(const SymbolBinding& b) {
    return (b.role == Role::Latent || b.role == Role::Family) && b.dist.is_normal();
}

void validate(const PhenotypeModel& model) {
    if (!model.phenotype) throw ModelError("model has no phenotype expression");
    std::set<std::string> seen;
    std::set<std::string> sibling_sources;
    for (const auto& b : model.symbols) {
        if (!seen.insert(b.name).second) throw ModelError("symbol '" + b.name + "' declared twice");
        if (model.parental(b.name))
            throw ModelError("symbol '" + b.name + "' clashes with an implicit parental genotype name");
        switch (b.role) {
            case Role::Genotype: {
                if (b.dist.is_normal()) throw ModelError("genotype '" + b.name + "' must have a discrete distribution");
                for (const auto& [v, q] : b.dist.atoms()) {
                    (void)q;
                    if (v < 0.0) throw ModelError("genotype '" + b.name + "' has a negative dosage");
                }
                if (model.mode == FamilyMode::WithinFamily && b.dist.kind != DistributionSpec::Kind::Hwe)
                    throw ModelError("within_family mode needs hwe(p) genotypes so Mendelian transmission applies ('" +
                                     b.name + "')");
                break;
            }
            case Role::Observed:
            case Role::Latent:
            case Role::Family:
                if (b.dist.is_normal() && !(b.dist.variance >= 0.0)) throw ModelError("negative variance");
                break;
            case Role::Derived: {
                if (!b.formula) throw ModelError("derived symbol '" + b.name + "' has no formula");
                if (contains_indicator(*b.formula))
                    throw ModelError("derived symbol '" + b.name + "' may not use an indicator");
                std::set<std::string> used;
                collect_symbols(*b.formula, used);
                for (const auto& u : used) {
                    if (model.parental(u)) continue;
                    const SymbolBinding* d = model.find(u);
                    if (!d) throw ModelError("unbound symbol '" + u + "' in derived symbol '" + b.name + "'");
                    bool earlier = false;
                    for (const auto& s : model.symbols) {
                        if (&s == &b) break;
                        if (s.name == u) earlier = true;
                    }
                    if (d->role == Role::Derived && !earlier)
                        throw ModelError("derived symbol '" + b.name + "' refers to a later derived symbol '" + u + "'");
                    if (d->role != Role::Observed && d->role != Role::Derived && d->role != Role::Sibling)
                        throw ModelError("derived symbol '" + b.name + "' may only use parental, sibling, observed or "
                                         "derived symbols, not '" + u + "'");
                }
                break;
            }
            case Role::Sibling: {
                if (model.mode != FamilyMode::WithinFamily)
                    throw ModelError("sibling symbol '" + b.name + "' needs within_family mode");
                const SymbolBinding* src = model.find(b.source);
                if (!src || src->role != Role::Genotype)
                    throw ModelError("sibling symbol '" + b.name + "' must mirror a genotype symbol");
                if (!sibling_sources.insert(b.source).second)
                    throw ModelError("genotype '" + b.source + "' has more than one sibling symbol");
                break;
            }
        }
    }
    if (model.phenotype->op == Op::Indicator) {
        if (contains_indicator(*model.phenotype->lhs))
            throw ModelError("indicator must be the outermost operation of the phenotype");
    } else if (contains_indicator(*model.phenotype)) {
        throw ModelError("indicator must be the outermost operation of the phenotype");
    }
    std::set<std::string> used;
    collect_symbols(*model.phenotype, used);
    for (const auto& u : used) {
        if (model.parental(u)) continue;
        if (!model.find(u)) throw ModelError("unbound symbol '" + u + "'");
    }
}

std::string print_model(const PhenotypeModel& model) {
    std::string out = "mode = ";
    out += model.mode == FamilyMode::Population ? "population\n" : "within_family\n";
    for (const auto& b : model.symbols) {
        out += "symbol " + b.name + " : ";
        switch (b.role) {
            case Role::Derived: out += "derived = " + to_string(*b.formula); break;
            case Role::Sibling: out += "sibling(" + b.source + ")"; break;
            default: out += to_string(b.role) + " ~ " + b.dist.to_string(); break;
        }
        out += '\n';
    }
    out += "phenotype = " + to_string(*model.phenotype) + "\n";
    return out;
}

bool structurally_equal(const PhenotypeModel& a, const PhenotypeModel& b) {
    if (a.mode != b.mode || a.symbols.size() != b.symbols.size()) return false;
    for (std::size_t i = 0; i < a.symbols.size(); ++i) {
        const auto& x = a.symbols[i];
        const auto& y = b.symbols[i];
        if (x.name != y.name || x.role != y.role || x.source != y.source) return false;
        if (x.role == Role::Derived) {
            if (!structurally_equal(*x.formula, *y.formula)) return false;
        } else if (x.role != Role::Sibling && !same_dist(x.dist, y.dist)) {
            return false;
        }
    }
    return structurally_equal(*a.phenotype, *b.phenotype);
}

double evaluate(const PhenotypeModel& model, const std::map<std::string, double>& assignment) {
    std::function<double(const std::string&)> lookup = [&](const std::string& name) -> double {
        auto it = assignment.find(name);
        if (it != assignment.end()) return it->second;
        const SymbolBinding* b = model.find(name);
        if (b && b->role == Role::Derived) return evaluate_expr(*b->formula, lookup);
        throw std::out_of_range("assignment is missing symbol '" + name + "'");
    };
    return evaluate_expr(*model.phenotype, lookup);
}

EngineClass classify(const PhenotypeModel& model) {
    const Expr& arg = model.phenotype->op == Op::Indicator ? *model.phenotype->lhs : *model.phenotype;
    Polynomial poly = expand(arg);
    for (const auto& [mono, coef] : poly) {
        (void)coef;
        int normal_degree = 0;
        for (const auto& [name, power] : mono) {
            const SymbolBinding* b = model.find(name);
            if (b && is_normal_noise(*b)) normal_degree += power;
        }
        if (normal_degree > 1) return EngineClass::GeneralMonteCarlo;
    }
    return model.phenotype->op == Op::Indicator ? EngineClass::ProbitGaussian : EngineClass::LinearGaussian;
}

std::string to_string(EngineClass c) {
    switch (c) {
        case EngineClass::LinearGaussian: return "linear-gaussian";
        case EngineClass::ProbitGaussian: return "probit-gaussian";
        case EngineClass::GeneralMonteCarlo: return "general-mc";
    }
    return {};
}

std::string to_string(Role r) {
    switch (r) {
        case Role::Genotype: return "genotype";
        case Role::Observed: return "observed";
        case Role::Latent: return "latent";
        case Role::Family: return "family";
        case Role::Derived: return "derived";
        case Role::Sibling: return "sibling";
    }
    return {};
}

std::string model_digest(const PhenotypeModel& model) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : print_model(model)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace cfh
