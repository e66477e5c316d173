#include "cfh/engine.hpp"
#include "cfh/genetics.hpp"
#include "cfh/normal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>

namespace cfh {

namespace {

bool same_binding(const SymbolBinding& a, const SymbolBinding& b) {
    if (a.role != b.role || a.source != b.source) return false;
    if (a.role == Role::Derived) return structurally_equal(*a.formula, *b.formula);
    if (a.role == Role::Sibling) return true;
    const auto& x = a.dist;
    const auto& y = b.dist;
    return x.kind == y.kind && x.mean == y.mean && x.variance == y.variance && x.p == y.p && x.values == y.values &&
           x.probs == y.probs;
}

struct Choice {
    double value;
    double prob;
};

// Mixed-radix product of per-variable choice lists.
template <typename Visit>
void for_each_combo(const std::vector<std::vector<Choice>>& vars, Visit visit) {
    std::vector<std::size_t> idx(vars.size(), 0);
    for (const auto& v : vars)
        if (v.empty()) return;
    for (;;) {
        visit(idx);
        std::size_t k = 0;
        while (k < vars.size()) {
            if (++idx[k] < vars[k].size()) break;
            idx[k] = 0;
            ++k;
        }
        if (k == vars.size()) return;
    }
}

constexpr double kMatchTol = 1e-12;

}  // namespace

World::World(const std::vector<PhenotypeModel>& models, const EngineOptions& options,
             const std::map<std::string, double>& conditioning) {
    if (models.empty()) throw std::invalid_argument("at least one model is required");
    for (const auto& m : models) validate(m);
    mode = models[0].mode;

    // ── Merge symbol tables ────────────────────────────────────────────────
    std::vector<SymbolBinding> syms;
    std::map<std::string, std::size_t> sym_index;
    std::set<std::string> first_genotypes;
    for (const auto& g : models[0].genotype_names()) first_genotypes.insert(g);
    for (const auto& m : models) {
        if (m.mode != mode) throw std::invalid_argument("binding mismatch: models use different modes");
        std::set<std::string> gs;
        for (const auto& g : m.genotype_names()) gs.insert(g);
        if (gs != first_genotypes) throw std::invalid_argument("binding mismatch: models declare different genotypes");
        for (const auto& b : m.symbols) {
            auto it = sym_index.find(b.name);
            if (it != sym_index.end()) {
                if (!same_binding(syms[it->second], b))
                    throw std::invalid_argument("binding mismatch for symbol '" + b.name + "'");
                continue;
            }
            sym_index[b.name] = syms.size();
            syms.push_back(b);
        }
    }
    const PhenotypeModel& base = models[0];

    // ── Slots ──────────────────────────────────────────────────────────────
    auto add_slot = [&](const std::string& name) {
        auto s = static_cast<std::uint32_t>(n_slots++);
        slot_of[name] = s;
        return s;
    };
    std::vector<const SymbolBinding*> genos, observed, derived, siblings;
    for (const auto& b : syms) {
        switch (b.role) {
            case Role::Genotype: genos.push_back(&b); break;
            case Role::Observed: observed.push_back(&b); break;
            case Role::Derived: derived.push_back(&b); break;
            case Role::Sibling: siblings.push_back(&b); break;
            default: break;
        }
    }
    std::map<std::string, std::size_t> locus_of;
    for (const auto* g : genos) {
        locus_of[g->name] = geno_slots.size();
        geno_slots.push_back(add_slot(g->name));
        std::vector<double> sup, pr;
        for (const auto& [v, p] : g->dist.atoms()) {
            sup.push_back(v);
            pr.push_back(p);
        }
        geno_support.push_back(sup);
        geno_marginal.push_back(pr);
    }
    std::vector<std::array<std::uint32_t, 2>> parent_slots;
    if (mode == FamilyMode::WithinFamily)
        for (const auto* g : genos) parent_slots.push_back({add_slot(g->name + "f"), add_slot(g->name + "m")});
    for (const auto* s : siblings) {
        sibling_slots.push_back(add_slot(s->name));
        sibling_locus.push_back(static_cast<std::uint32_t>(locus_of.at(s->source)));
    }
    std::vector<std::uint32_t> observed_slots;
    for (const auto* o : observed) observed_slots.push_back(add_slot(o->name));
    has_observed = !observed.empty();
    std::vector<std::uint32_t> derived_slots;
    for (const auto* d : derived) derived_slots.push_back(add_slot(d->name));
    for (const auto& b : syms) {
        if ((b.role == Role::Latent || b.role == Role::Family) && !b.dist.is_normal()) {
            LatentDiscrete ld;
            ld.slot = add_slot(b.name);
            ld.atoms = b.dist.atoms();
            ld.family = b.role == Role::Family;
            latent_discrete.push_back(ld);
        }
    }
    for (const auto& b : syms) {
        if (is_normal_noise(b)) {
            NormalSlot ns;
            ns.slot = add_slot(b.name);
            ns.mean = b.dist.mean;
            ns.sd = std::sqrt(b.dist.variance);
            ns.family = b.role == Role::Family;
            normals.push_back(ns);
        }
    }

    n_tuples = 1;
    for (const auto& s : geno_support) n_tuples *= s.size();

    // ── Conditioning ───────────────────────────────────────────────────────
    std::vector<std::optional<double>> geno_fixed(genos.size());
    std::vector<std::array<std::optional<double>, 2>> parent_fixed(genos.size());
    std::map<std::uint32_t, double> stratum_filter;  // sibling / derived slots
    std::vector<std::optional<double>> observed_fixed(observed.size());
    for (const auto& [name, value] : conditioning) {
        if (auto par = base.parental(name)) {
            if (value != 0.0 && value != 1.0 && value != 2.0)
                throw std::invalid_argument("parental genotype '" + name + "' must be 0, 1 or 2");
            parent_fixed[locus_of.at(par->first)][static_cast<std::size_t>(par->second)] = value;
            continue;
        }
        auto it = sym_index.find(name);
        if (it == sym_index.end()) throw std::invalid_argument("cannot condition on unknown symbol '" + name + "'");
        const SymbolBinding& b = syms[it->second];
        switch (b.role) {
            case Role::Genotype: {
                std::size_t l = locus_of.at(name);
                const auto& sup = geno_support[l];
                if (std::find(sup.begin(), sup.end(), value) == sup.end())
                    throw std::invalid_argument("value " + format_number(value) + " is outside the support of '" +
                                                name + "'");
                geno_fixed[l] = value;
                break;
            }
            case Role::Observed: {
                std::size_t k = static_cast<std::size_t>(
                    std::find(observed.begin(), observed.end(), &b) - observed.begin());
                if (!b.dist.is_normal()) {
                    bool found = false;
                    for (const auto& [v, p] : b.dist.atoms())
                        if (v == value && p > 0.0) found = true;
                    if (!found)
                        throw std::invalid_argument("value " + format_number(value) +
                                                    " is outside the support of '" + name + "'");
                }
                observed_fixed[k] = value;
                break;
            }
            case Role::Sibling:
            case Role::Derived: stratum_filter[slot_of.at(name)] = value; break;
            default: throw std::invalid_argument("cannot condition on latent symbol '" + name + "'");
        }
    }

    // ── Parental combinations ──────────────────────────────────────────────
    std::vector<std::vector<Choice>> parent_vars;  // two per locus: father, mother
    if (mode == FamilyMode::WithinFamily) {
        for (std::size_t l = 0; l < genos.size(); ++l) {
            for (int side = 0; side < 2; ++side) {
                std::vector<Choice> ch;
                for (std::size_t i = 0; i < geno_support[l].size(); ++i) {
                    double v = geno_support[l][i];
                    if (parent_fixed[l][static_cast<std::size_t>(side)] &&
                        *parent_fixed[l][static_cast<std::size_t>(side)] != v)
                        continue;
                    ch.push_back({v, geno_marginal[l][i]});
                }
                parent_vars.push_back(ch);
            }
        }
    }
    std::vector<std::vector<Choice>> env_vars;
    for (std::size_t k = 0; k < observed.size(); ++k) {
        const auto& d = observed[k]->dist;
        std::vector<Choice> ch;
        if (observed_fixed[k]) {
            ch.push_back({*observed_fixed[k], 1.0});
        } else if (d.is_normal()) {
            if (d.variance == 0.0) {
                ch.push_back({d.mean, 1.0});
            } else {
                QuadratureRule gh = gauss_hermite_normal(options.hermite_nodes);
                double sd = std::sqrt(d.variance);
                for (std::size_t i = 0; i < gh.nodes.size(); ++i) ch.push_back({d.mean + sd * gh.nodes[i], gh.weights[i]});
            }
        } else {
            for (const auto& [v, p] : d.atoms()) ch.push_back({v, p});
        }
        env_vars.push_back(ch);
    }

    double n_parent = 1.0, n_env = 1.0;
    for (const auto& v : parent_vars) n_parent *= static_cast<double>(v.size());
    for (const auto& v : env_vars) n_env *= static_cast<double>(v.size());
    double n_sib = std::pow(3.0, static_cast<double>(siblings.size()));
    if (n_parent * n_env * n_sib * static_cast<double>(n_tuples) > static_cast<double>(options.max_cells))
        throw std::invalid_argument("model is too large to enumerate exactly (" +
                                    format_number(n_parent * n_env * n_sib * static_cast<double>(n_tuples)) +
                                    " cells)");

    // Enumerate parent combos once.
    struct ParentCombo {
        std::vector<double> dosage;  // father, mother per locus
        double prob;
    };
    std::vector<ParentCombo> parent_combos;
    for_each_combo(parent_vars, [&](const std::vector<std::size_t>& idx) {
        ParentCombo pc{{}, 1.0};
        for (std::size_t k = 0; k < idx.size(); ++k) {
            pc.dosage.push_back(parent_vars[k][idx[k]].value);
            pc.prob *= parent_vars[k][idx[k]].prob;
        }
        parent_combos.push_back(pc);
    });
    struct EnvCombo {
        std::vector<double> values;
        double prob;
    };
    std::vector<EnvCombo> env_combos;
    for_each_combo(env_vars, [&](const std::vector<std::size_t>& idx) {
        EnvCombo ec{{}, 1.0};
        for (std::size_t k = 0; k < idx.size(); ++k) {
            ec.values.push_back(env_vars[k][idx[k]].value);
            ec.prob *= env_vars[k][idx[k]].prob;
        }
        env_combos.push_back(ec);
    });

    auto child_prob = [](double f, double m, double c) {
        double tf = 0.5 * f, tm = 0.5 * m;
        if (c == 0.0) return (1.0 - tf) * (1.0 - tm);
        if (c == 1.0) return tf * (1.0 - tm) + (1.0 - tf) * tm;
        if (c == 2.0) return tf * tm;
        return 0.0;
    };

    std::vector<std::vector<double>> tuple_vals(n_tuples);
    for (std::uint32_t t = 0; t < n_tuples; ++t) tuple_vals[t] = tuple_values(t);

    // Derived formulas are evaluated by name against the stratum's slots.
    std::vector<Stratum> raw;
    double total = 0.0;
    for (std::uint32_t pid = 0; pid < parent_combos.size(); ++pid) {
        const auto& pc = parent_combos[pid];
        // Sibling choices given these parents.
        std::vector<std::vector<Choice>> sib_vars;
        for (std::size_t k = 0; k < siblings.size(); ++k) {
            std::size_t l = sibling_locus[k];
            std::vector<Choice> ch;
            for (double c : {0.0, 1.0, 2.0}) {
                double p = child_prob(pc.dosage[2 * l], pc.dosage[2 * l + 1], c);
                if (p > 0.0) ch.push_back({c, p});
            }
            sib_vars.push_back(ch);
        }
        for (std::uint32_t eid = 0; eid < env_combos.size(); ++eid) {
            const auto& ec = env_combos[eid];
            for_each_combo(sib_vars, [&](const std::vector<std::size_t>& idx) {
                Stratum st;
                st.parent_id = pid;
                st.env_id = eid;
                st.values.assign(n_slots, 0.0);
                st.weight = pc.prob * ec.prob;
                for (std::size_t l = 0; l < parent_slots.size(); ++l) {
                    st.values[parent_slots[l][0]] = pc.dosage[2 * l];
                    st.values[parent_slots[l][1]] = pc.dosage[2 * l + 1];
                }
                for (std::size_t k = 0; k < observed_slots.size(); ++k) st.values[observed_slots[k]] = ec.values[k];
                std::uint32_t sib_id = 0, radix = 1;
                for (std::size_t k = 0; k < idx.size(); ++k) {
                    double v = sib_vars[k][idx[k]].value;
                    st.values[sibling_slots[k]] = v;
                    st.weight *= sib_vars[k][idx[k]].prob;
                    sib_id += static_cast<std::uint32_t>(v) * radix;
                    radix *= 3;
                }
                st.sib_id = sib_id;
                for (std::size_t k = 0; k < derived.size(); ++k) {
                    st.values[derived_slots[k]] = evaluate_expr(*derived[k]->formula, [&](const std::string& n) {
                        return st.values[slot_of.at(n)];
                    });
                }
                for (const auto& [slot, v] : stratum_filter)
                    if (std::abs(st.values[slot] - v) > kMatchTol) return;

                for (std::uint32_t t = 0; t < n_tuples; ++t) {
                    const auto& tv = tuple_vals[t];
                    bool ok = true;
                    for (std::size_t l = 0; l < tv.size() && ok; ++l)
                        if (geno_fixed[l] && *geno_fixed[l] != tv[l]) ok = false;
                    if (!ok) continue;
                    double p = 1.0;
                    if (mode == FamilyMode::WithinFamily) {
                        for (std::size_t l = 0; l < tv.size(); ++l)
                            p *= child_prob(pc.dosage[2 * l], pc.dosage[2 * l + 1], tv[l]);
                    } else {
                        p = tuple_marginal(t);
                    }
                    if (p > 0.0) st.genos.emplace_back(t, p);
                }
                raw.push_back(std::move(st));
            });
        }
    }

    for (auto& st : raw) {
        double sp = 0.0;
        for (const auto& g : st.genos) sp += g.second;
        st.weight *= sp;
        total += st.weight;
        if (sp > 0.0)
            for (auto& g : st.genos) g.second /= sp;
    }
    if (!(total > 0.0)) throw std::domain_error("degenerate stratum: the conditioning event has probability 0");
    for (auto& st : raw) {
        if (st.weight <= 0.0) continue;
        st.weight /= total;
        stratum_lookup_[{st.parent_id, st.env_id, st.sib_id}] = static_cast<std::uint32_t>(strata.size());
        strata.push_back(std::move(st));
    }

    // ── Latent atoms ───────────────────────────────────────────────────────
    for (int fam = 1; fam >= 0; --fam) {
        std::vector<std::vector<Choice>> vars;
        std::vector<std::uint32_t> slots;
        for (const auto& ld : latent_discrete) {
            if (ld.family != static_cast<bool>(fam)) continue;
            std::vector<Choice> ch;
            for (const auto& [v, p] : ld.atoms) ch.push_back({v, p});
            vars.push_back(ch);
            slots.push_back(ld.slot);
        }
        std::vector<Atom>& target = fam ? family_atoms : individual_atoms;
        for_each_combo(vars, [&](const std::vector<std::size_t>& idx) {
            Atom a;
            for (std::size_t k = 0; k < idx.size(); ++k) {
                a.values.emplace_back(slots[k], vars[k][idx[k]].value);
                a.prob *= vars[k][idx[k]].prob;
            }
            target.push_back(a);
        });
    }

    // ── Compile outputs ────────────────────────────────────────────────────
    std::map<std::uint32_t, int> normal_index;
    for (std::size_t k = 0; k < normals.size(); ++k) normal_index[normals[k].slot] = static_cast<int>(k);
    for (const auto& m : models) {
        CompiledOutput out;
        out.label = to_string(*m.phenotype);
        out.indicator = m.phenotype->op == Op::Indicator;
        out.cls = classify(m);
        const Expr& arg = out.indicator ? *m.phenotype->lhs : *m.phenotype;
        for (const auto& [mono, coef] : expand(arg)) {
            CompiledTerm full{coef, {}, -1};
            CompiledTerm an{coef, {}, -1};
            for (const auto& [name, power] : mono) {
                std::uint32_t slot = slot_of.at(name);
                full.factors.emplace_back(slot, power);
                auto it = normal_index.find(slot);
                if (it != normal_index.end() && power == 1 && an.normal < 0)
                    an.normal = it->second;
                else
                    an.factors.emplace_back(slot, power);
            }
            out.full.push_back(full);
            if (out.cls != EngineClass::GeneralMonteCarlo) out.analytic.push_back(an);
        }
        outputs.push_back(std::move(out));
    }
}

std::vector<double> World::tuple_values(std::uint32_t tuple) const {
    std::vector<double> v(geno_support.size());
    for (std::size_t l = 0; l < geno_support.size(); ++l) {
        std::size_t n = geno_support[l].size();
        v[l] = geno_support[l][tuple % n];
        tuple /= static_cast<std::uint32_t>(n);
    }
    return v;
}

double World::tuple_marginal(std::uint32_t tuple) const {
    double p = 1.0;
    for (std::size_t l = 0; l < geno_support.size(); ++l) {
        std::size_t n = geno_support[l].size();
        p *= geno_marginal[l][tuple % n];
        tuple /= static_cast<std::uint32_t>(n);
    }
    return p;
}

std::uint32_t World::tuple_index(const std::vector<double>& values) const {
    if (values.size() != geno_support.size()) throw std::invalid_argument("genotype tuple has the wrong length");
    std::uint32_t idx = 0, radix = 1;
    for (std::size_t l = 0; l < values.size(); ++l) {
        const auto& sup = geno_support[l];
        auto it = std::find(sup.begin(), sup.end(), values[l]);
        if (it == sup.end()) throw std::invalid_argument("genotype value " + format_number(values[l]) + " is off-support");
        idx += static_cast<std::uint32_t>(it - sup.begin()) * radix;
        radix *= static_cast<std::uint32_t>(sup.size());
    }
    return idx;
}

std::size_t World::stratum_with_sib(std::uint32_t parent_id, std::uint32_t env_id, std::uint32_t sib_id) const {
    auto it = stratum_lookup_.find({parent_id, env_id, sib_id});
    return it == stratum_lookup_.end() ? npos : it->second;
}

std::size_t World::sibling_stratum(std::uint32_t parent_id, std::uint32_t env_id, std::uint32_t tuple) const {
    if (sibling_slots.empty()) return stratum_with_sib(parent_id, env_id, 0);
    std::vector<double> tv = tuple_values(tuple);
    std::uint32_t sib_id = 0, radix = 1;
    for (std::size_t k = 0; k < sibling_slots.size(); ++k) {
        sib_id += static_cast<std::uint32_t>(tv[sibling_locus[k]]) * radix;
        radix *= 3;
    }
    return stratum_with_sib(parent_id, env_id, sib_id);
}

void World::fill(CellRef c, std::vector<double>& vals) const {
    vals = strata[c.stratum].values;
    std::uint32_t t = c.tuple;
    for (std::size_t l = 0; l < geno_support.size(); ++l) {
        std::size_t n = geno_support[l].size();
        vals[geno_slots[l]] = geno_support[l][t % n];
        t /= static_cast<std::uint32_t>(n);
    }
}

bool World::needs_monte_carlo() const {
    for (const auto& o : outputs)
        if (o.cls == EngineClass::GeneralMonteCarlo) return true;
    return false;
}

}  // namespace cfh
