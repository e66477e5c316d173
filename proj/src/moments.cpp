#include "cfh/moments.hpp"
#include "cfh/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

namespace cfh {

void require_positive_variance(double var_y, double second_moment) {
    if (!(var_y > 1e-12 * std::max(1.0, second_moment))) throw DegeneratePhenotype();
}

std::vector<double> decomposition_components(const World& w, const MomentBackend& be, std::size_t out) {
    double m1 = 0.0, m2 = 0.0, sum_mx2 = 0.0, e_var_gx = 0.0, e_var_mean = 0.0;
    for (std::uint32_t s = 0; s < w.strata.size(); ++s) {
        const auto& st = w.strata[s];
        double ms = 0.0, ss = 0.0, mu2 = 0.0;
        for (const auto& [t, p] : st.genos) {
            CellRef c{s, t};
            double mu = be.mean(out, c);
            double sec = be.second(out, c);
            ms += p * mu;
            ss += p * sec;
            mu2 += p * mu * mu;
        }
        m1 += st.weight * ms;
        m2 += st.weight * ss;
        sum_mx2 += st.weight * ms * ms;
        e_var_gx += st.weight * (ss - mu2);
        e_var_mean += st.weight * (mu2 - ms * ms);
    }
    double var_y = m2 - m1 * m1;
    require_positive_variance(var_y, m2);
    double var_mean_x = sum_mx2 - m1 * m1;
    return {var_y, var_mean_x, m2 - sum_mx2, e_var_gx, e_var_mean};
}

VarianceDecomposition variance_decomposition(const Analysis& a, std::size_t out) {
    auto r = a.run([&](const MomentBackend& be) { return decomposition_components(a.world(), be, out); });
    return {r[0], r[1], r[2], r[3], r[4]};
}

VarianceDecomposition variance_decomposition(const PhenotypeModel& model, const EngineOptions& options) {
    Analysis a({model}, options);
    return variance_decomposition(a, 0);
}

namespace {

MarginalLaw merge_laws(const std::vector<std::pair<double, MarginalLaw>>& parts) {
    std::vector<NormalComponent> comps;
    for (const auto& [w, law] : parts) {
        for (const auto& c : law.components()) comps.push_back({w * c.weight, c.mean, c.sd});
        for (std::size_t i = 0; i < law.atom_values().size(); ++i)
            comps.push_back({w * law.atom_probs()[i], law.atom_values()[i], 0.0});
    }
    return MarginalLaw::mixture(std::move(comps));
}

}  // namespace

ConditionalLaw cond_moments(const PhenotypeModel& model, const StratumAssignment& stratum, const EngineOptions& options) {
    Analysis a({model}, options, stratum);
    const World& w = a.world();
    auto r = a.run([&](const MomentBackend& be) {
        double m = 0.0, s2 = 0.0;
        for (std::uint32_t s = 0; s < w.strata.size(); ++s)
            for (const auto& [t, p] : w.strata[s].genos) {
                m += w.strata[s].weight * p * be.mean(0, {s, t});
                s2 += w.strata[s].weight * p * be.second(0, {s, t});
            }
        return std::vector<double>{m, std::max(0.0, s2 - m * m)};
    });
    ConditionalLaw law;
    law.mean = r[0].value;
    law.variance = r[1].value;
    law.method = r[0].method;
    law.se_mean = r[0].se;
    law.se_variance = r[1].se;
    if (a.monte_carlo()) {
        law.seed = options.seed;
        law.n = options.mc_n;
    } else if (w.outputs[0].indicator) {
        law.exact_form = MarginalLaw::bernoulli(std::clamp(law.mean, 0.0, 1.0));
    } else {
        std::vector<std::pair<double, MarginalLaw>> parts;
        for (std::uint32_t s = 0; s < w.strata.size(); ++s)
            for (const auto& [t, p] : w.strata[s].genos)
                parts.emplace_back(w.strata[s].weight * p, a.full_backend().law(0, {s, t}));
        law.exact_form = merge_laws(parts);
    }
    return law;
}

ConditionalLaw diff_moments(const PhenotypeModel& model, const StratumAssignment& g, const StratumAssignment& g_prime,
                            const StratumAssignment& stratum, const EngineOptions& options) {
    StratumAssignment env;
    for (const auto& [k, v] : stratum) {
        const SymbolBinding* b = model.find(k);
        if (b && b->role == Role::Genotype) continue;
        env[k] = v;
    }
    Analysis a({model}, options, env);
    const World& w = a.world();
    auto tuple_of = [&](const StratumAssignment& asg) {
        std::vector<double> v;
        for (const auto& name : model.genotype_names()) {
            auto it = asg.find(name);
            if (it == asg.end()) throw std::invalid_argument("genotype assignment is missing '" + name + "'");
            v.push_back(it->second);
        }
        return w.tuple_index(v);
    };
    std::uint32_t t1 = tuple_of(g), t2 = tuple_of(g_prime);
    auto r = a.run([&](const MomentBackend& be) {
        double m = 0.0, s2 = 0.0;
        for (std::uint32_t s = 0; s < w.strata.size(); ++s) {
            CellRef a1{s, t1}, a2{s, t2};
            double wt = w.strata[s].weight;
            m += wt * (be.mean(0, a1) - be.mean(0, a2));
            if (t1 != t2) s2 += wt * (be.second(0, a1) + be.second(0, a2) - 2.0 * be.cross(0, a1, 0, a2, Sharing::All));
        }
        return std::vector<double>{m, std::max(0.0, s2 - m * m)};
    });
    ConditionalLaw law;
    law.mean = r[0].value;
    law.variance = r[1].value;
    law.method = r[0].method;
    law.se_mean = r[0].se;
    law.se_variance = r[1].se;
    if (a.monte_carlo()) {
        law.seed = options.seed;
        law.n = options.mc_n;
    }
    return law;
}

// ── Simulation ──────────────────────────────────────────────────────────────

namespace {

double draw_from(const DistributionSpec& d, std::mt19937_64& rng) {
    if (d.is_normal()) {
        std::normal_distribution<double> z(0.0, 1.0);
        return d.mean + std::sqrt(d.variance) * z(rng);
    }
    double u = uniform01(rng);
    auto atoms = d.atoms();
    double c = 0.0;
    for (const auto& [v, p] : atoms) {
        c += p;
        if (u <= c) return v;
    }
    return atoms.back().first;
}

int transmit(int father, int mother, std::mt19937_64& rng) {
    auto allele = [&](int dosage) {
        if (dosage == 0) return 0;
        if (dosage == 2) return 1;
        return uniform01(rng) < 0.5 ? 1 : 0;
    };
    int a = allele(father);
    return a + allele(mother);
}

}  // namespace

SampleTable mc_sample(const PhenotypeModel& model, std::size_t n, std::uint64_t seed, Coupling coupling,
                      std::size_t threads) {
    validate(model);
    if (n == 0) throw std::invalid_argument("mc_sample needs n >= 1");
    const bool wf = model.mode == FamilyMode::WithinFamily;

    std::vector<const SymbolBinding*> genos, observed, derived, siblings, latent;
    for (const auto& b : model.symbols) {
        switch (b.role) {
            case Role::Genotype: genos.push_back(&b); break;
            case Role::Observed: observed.push_back(&b); break;
            case Role::Derived: derived.push_back(&b); break;
            case Role::Sibling: siblings.push_back(&b); break;
            default: latent.push_back(&b); break;
        }
    }

    // Slot layout: genotypes, parents, siblings, observed, derived, latent.
    std::unordered_map<std::string, std::size_t> slot;
    std::size_t n_slots = 0;
    for (const auto* b : genos) slot[b->name] = n_slots++;
    std::size_t parent0 = n_slots;
    if (wf)
        for (const auto* b : genos) {
            slot[b->name + "f"] = n_slots++;
            slot[b->name + "m"] = n_slots++;
        }
    for (const auto* b : siblings) slot[b->name] = n_slots++;
    for (const auto* b : observed) slot[b->name] = n_slots++;
    for (const auto* b : derived) slot[b->name] = n_slots++;
    for (const auto* b : latent) slot[b->name] = n_slots++;
    std::map<std::string, std::size_t> locus;
    for (std::size_t l = 0; l < genos.size(); ++l) locus[genos[l]->name] = l;

    SampleTable tab;
    for (const auto* b : genos) tab.genotype_names.push_back(b->name);
    if (wf)
        for (const auto* b : genos) {
            tab.parent_names.push_back(b->name + "f");
            tab.parent_names.push_back(b->name + "m");
        }
    for (const auto* b : siblings) tab.x_names.push_back(b->name);
    for (const auto* b : observed) tab.x_names.push_back(b->name);
    for (const auto* b : derived) tab.x_names.push_back(b->name);
    tab.parents.assign(tab.parent_names.size(), std::vector<double>(n));
    tab.g.assign(genos.size(), std::vector<double>(n));
    tab.g_prime.assign(genos.size(), std::vector<double>(n));
    tab.x.assign(tab.x_names.size(), std::vector<double>(n));
    tab.y.resize(n);
    tab.y_prime.resize(n);

    constexpr std::size_t kChunk = 1 << 16;
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    parallel_for(chunks, threads, [&](std::size_t chunk) {
        auto rng = make_stream(seed, chunk, 0x5A3);
        // Fresh environment for Y' comes from its own stream so that Y and G do
        // not depend on the coupling.
        auto fresh = make_stream(seed, chunk, 0x5A4);
        std::vector<double> vals(n_slots, 0.0);
        auto lookup = [&](const std::string& name) { return vals[slot.at(name)]; };
        std::size_t lo = chunk * kChunk, hi = std::min(n, lo + kChunk);
        std::vector<double> gp(genos.size());
        for (std::size_t i = lo; i < hi; ++i) {
            for (std::size_t l = 0; l < genos.size(); ++l) {
                if (wf) {
                    double f = draw_from(genos[l]->dist, rng);
                    double m = draw_from(genos[l]->dist, rng);
                    vals[parent0 + 2 * l] = f;
                    vals[parent0 + 2 * l + 1] = m;
                    tab.parents[2 * l][i] = f;
                    tab.parents[2 * l + 1][i] = m;
                    vals[l] = transmit(static_cast<int>(f), static_cast<int>(m), rng);
                    gp[l] = transmit(static_cast<int>(f), static_cast<int>(m), rng);
                } else {
                    vals[l] = draw_from(genos[l]->dist, rng);
                    gp[l] = draw_from(genos[l]->dist, rng);
                }
            }
            for (const auto* b : siblings) {
                std::size_t l = locus.at(b->source);
                vals[slot.at(b->name)] = transmit(static_cast<int>(vals[parent0 + 2 * l]),
                                                  static_cast<int>(vals[parent0 + 2 * l + 1]), rng);
            }
            for (const auto* b : observed) vals[slot.at(b->name)] = draw_from(b->dist, rng);
            for (const auto* b : derived) vals[slot.at(b->name)] = evaluate_expr(*b->formula, lookup);
            for (const auto* b : latent) vals[slot.at(b->name)] = draw_from(b->dist, rng);

            for (std::size_t l = 0; l < genos.size(); ++l) {
                tab.g[l][i] = vals[l];
                tab.g_prime[l][i] = gp[l];
            }
            for (std::size_t k = 0; k < tab.x_names.size(); ++k) tab.x[k][i] = vals[slot.at(tab.x_names[k])];
            tab.y[i] = evaluate_expr(*model.phenotype, lookup);

            for (std::size_t l = 0; l < genos.size(); ++l) vals[l] = gp[l];
            if (coupling == Coupling::None)
                for (const auto* b : latent) vals[slot.at(b->name)] = draw_from(b->dist, fresh);
            tab.y_prime[i] = evaluate_expr(*model.phenotype, lookup);
        }
    });
    return tab;
}

void write_sample_csv(const SampleTable& t, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    std::string header;
    for (const auto& n : t.x_names) header += n + ",";
    for (const auto& n : t.genotype_names) header += n + ",";
    out << header << "y\n";
    for (std::size_t i = 0; i < t.rows(); ++i) {
        std::string line;
        for (const auto& c : t.x) line += format_number(c[i]) + ",";
        for (const auto& c : t.g) line += format_number(c[i]) + ",";
        line += format_number(t.y[i]);
        out << line << '\n';
    }
}

}  // namespace cfh
