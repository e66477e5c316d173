#include "cfh/estimands.hpp"
#include "cfh/coupling.hpp"
#include "cfh/moments.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace cfh {

std::string to_string(CounterfactualKind k) {
    switch (k) {
        case CounterfactualKind::Unrelated: return "unrelated";
        case CounterfactualKind::Fraternal: return "fraternal";
        case CounterfactualKind::Adopted: return "adopted";
    }
    return "unrelated";
}

CounterfactualKind parse_kind(const std::string& text) {
    if (text == "unrelated") return CounterfactualKind::Unrelated;
    if (text == "fraternal") return CounterfactualKind::Fraternal;
    if (text == "adopted") return CounterfactualKind::Adopted;
    throw std::invalid_argument("unknown counterfactual kind '" + text + "' (expected unrelated, fraternal or adopted)");
}

CounterfactualKind default_kind(FamilyMode mode) {
    return mode == FamilyMode::WithinFamily ? CounterfactualKind::Fraternal : CounterfactualKind::Unrelated;
}

namespace {

double var_y_of(const World& w, const MomentBackend& be, std::size_t out) {
    return decomposition_components(w, be, out)[0];
}

double overall_mean(const World& w, const MomentBackend& be, std::size_t out) {
    double m = 0.0;
    for (std::uint32_t s = 0; s < w.strata.size(); ++s)
        for (const auto& [t, p] : w.strata[s].genos) m += w.strata[s].weight * p * be.mean(out, {s, t});
    return m;
}

// E[(Ya - Yb)^2] for two cells with the environment shared.
double diff_second(const MomentBackend& be, std::size_t out, CellRef a, CellRef b) {
    return be.second(out, a) + be.second(out, b) - 2.0 * be.cross(out, a, out, b, Sharing::All);
}

// {E[D], E[D^2]} for D = Y(G) - Y(G') under the given kind.
std::pair<double, double> diff_moments_kind(const World& w, const MomentBackend& be, std::size_t out,
                                            CounterfactualKind kind) {
    double ed = 0.0, ed2 = 0.0;
    if (kind == CounterfactualKind::Adopted) {
        for (std::uint32_t s = 0; s < w.strata.size(); ++s) {
            const auto& st = w.strata[s];
            for (const auto& [t, p] : st.genos) {
                CellRef a{s, t};
                double mu_a = be.mean(out, a);
                for (std::uint32_t u = 0; u < w.n_tuples; ++u) {
                    double q = w.tuple_marginal(u);
                    if (q <= 0.0) continue;
                    CellRef b{s, u};
                    double wt = st.weight * p * q;
                    ed += wt * (mu_a - be.mean(out, b));
                    if (u != t) ed2 += wt * diff_second(be, out, a, b);
                }
            }
        }
        return {ed, ed2};
    }
    if (kind == CounterfactualKind::Unrelated && w.mode == FamilyMode::WithinFamily) {
        std::map<std::uint32_t, std::vector<std::uint32_t>> by_env;
        std::map<std::uint32_t, double> env_weight;
        for (std::uint32_t s = 0; s < w.strata.size(); ++s) {
            by_env[w.strata[s].env_id].push_back(s);
            env_weight[w.strata[s].env_id] += w.strata[s].weight;
        }
        for (const auto& [env, members] : by_env) {
            double W = env_weight[env];
            for (std::uint32_t s : members)
                for (const auto& [t, p] : w.strata[s].genos) {
                    CellRef a{s, t};
                    double mu_a = be.mean(out, a);
                    for (std::uint32_t s2 : members)
                        for (const auto& [t2, p2] : w.strata[s2].genos) {
                            CellRef b{s2, t2};
                            double wt = w.strata[s].weight * p * (w.strata[s2].weight / W) * p2;
                            ed += wt * (mu_a - be.mean(out, b));
                            if (s != s2 || t != t2) ed2 += wt * diff_second(be, out, a, b);
                        }
                }
        }
        return {ed, ed2};
    }
    for (std::uint32_t s = 0; s < w.strata.size(); ++s) {
        const auto& st = w.strata[s];
        for (std::size_t i = 0; i < st.genos.size(); ++i)
            for (std::size_t j = 0; j < st.genos.size(); ++j) {
                if (i == j) continue;
                CellRef a{s, st.genos[i].first}, b{s, st.genos[j].first};
                double wt = st.weight * st.genos[i].second * st.genos[j].second;
                ed += wt * (be.mean(out, a) - be.mean(out, b));
                ed2 += wt * diff_second(be, out, a, b);
            }
    }
    return {ed, ed2};
}

void check_kind(const World& w, CounterfactualKind kind) {
    if (w.mode == FamilyMode::Population && kind != CounterfactualKind::Unrelated)
        throw std::invalid_argument("counterfactual kind '" + to_string(kind) + "' needs a within_family model");
}

// Per-tuple marginal probability and E(Y | G = t).
void genetic_means(const World& w, const MomentBackend& be, std::size_t out, std::vector<double>& prob,
                   std::vector<double>& mean) {
    prob.assign(w.n_tuples, 0.0);
    mean.assign(w.n_tuples, 0.0);
    for (std::uint32_t s = 0; s < w.strata.size(); ++s)
        for (const auto& [t, p] : w.strata[s].genos) {
            double wt = w.strata[s].weight * p;
            prob[t] += wt;
            mean[t] += wt * be.mean(out, {s, t});
        }
    for (std::size_t t = 0; t < prob.size(); ++t)
        if (prob[t] > 0.0) mean[t] /= prob[t];
}

}  // namespace

Estimate xi(const Analysis& a, CounterfactualKind kind, std::size_t out) {
    check_kind(a.world(), kind);
    return a.run1([&](const MomentBackend& be) {
        double vy = var_y_of(a.world(), be, out);
        auto [ed, ed2] = diff_moments_kind(a.world(), be, out, kind);
        return (ed2 - ed * ed) / (2.0 * vy);
    });
}

Estimate xi(const PhenotypeModel& model, CounterfactualKind kind, const EngineOptions& options) {
    Analysis a({model}, options);
    return xi(a, kind, 0);
}

Estimate potential_outcome_correlation(const Analysis& a, std::size_t out) {
    const World& w = a.world();
    return a.run1([&](const MomentBackend& be) {
        double vy = var_y_of(w, be, out);
        double m = overall_mean(w, be, out);
        double c = 0.0;
        for (std::uint32_t s = 0; s < w.strata.size(); ++s) {
            const auto& st = w.strata[s];
            for (const auto& [t, p] : st.genos)
                for (const auto& [t2, p2] : st.genos)
                    c += st.weight * p * p2 * be.cross(out, {s, t}, out, {s, t2}, Sharing::All);
        }
        return (c - m * m) / vy;
    });
}

Estimate broad_h2(const Analysis& a, std::size_t out) {
    const World& w = a.world();
    return a.run1([&](const MomentBackend& be) {
        double vy = var_y_of(w, be, out);
        std::vector<double> prob, mean;
        genetic_means(w, be, out, prob, mean);
        double m = 0.0, m2 = 0.0;
        for (std::size_t t = 0; t < prob.size(); ++t) {
            m += prob[t] * mean[t];
            m2 += prob[t] * mean[t] * mean[t];
        }
        return std::max(0.0, m2 - m * m) / vy;
    });
}

Estimate broad_h2(const PhenotypeModel& model, const EngineOptions& options) {
    Analysis a({model}, options);
    return broad_h2(a, 0);
}

Estimate narrow_h2(const Analysis& a, std::size_t out) {
    const World& w = a.world();
    const std::size_t k = w.geno_slots.size();
    return a.run1([&](const MomentBackend& be) {
        double vy = var_y_of(w, be, out);
        if (k == 0) return 0.0;
        std::vector<double> prob, mean;
        genetic_means(w, be, out, prob, mean);
        Eigen::VectorXd gbar = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
        double ybar = 0.0;
        std::vector<Eigen::VectorXd> dos(w.n_tuples);
        for (std::uint32_t t = 0; t < w.n_tuples; ++t) {
            auto v = w.tuple_values(t);
            dos[t] = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(k));
            gbar += prob[t] * dos[t];
            ybar += prob[t] * mean[t];
        }
        Eigen::MatrixXd C = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
        Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
        for (std::uint32_t t = 0; t < w.n_tuples; ++t) {
            if (prob[t] <= 0.0) continue;
            Eigen::VectorXd d = dos[t] - gbar;
            C += prob[t] * d * d.transpose();
            c += prob[t] * d * (mean[t] - ybar);
        }
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(C);
        cod.setThreshold(1e-12);
        Eigen::VectorXd beta = cod.solve(c);
        return std::max(0.0, static_cast<double>(beta.dot(C * beta))) / vy;
    });
}

Estimate narrow_h2(const PhenotypeModel& model, const EngineOptions& options) {
    Analysis a({model}, options);
    return narrow_h2(a, 0);
}

MomentBounds moment_bounds(const Analysis& a, std::size_t out) {
    auto r = a.run([&](const MomentBackend& be) {
        auto d = decomposition_components(a.world(), be, out);
        return std::vector<double>{d[4] / d[0], d[2] / d[0]};
    });
    return {r[0], r[1]};
}

MomentBounds moment_bounds(const PhenotypeModel& model, const EngineOptions& options) {
    Analysis a({model}, options);
    return moment_bounds(a, 0);
}

TwinQuantities twin_quantities(const Analysis& a, std::size_t out) {
    const World& w = a.world();
    if (w.mode != FamilyMode::WithinFamily) throw std::invalid_argument("twin quantities need a within_family model");
    auto r = a.run([&](const MomentBackend& be) {
        double vy = var_y_of(w, be, out);
        double m = overall_mean(w, be, out);
        double mz = 0.0, dz = 0.0;
        for (std::uint32_t s = 0; s < w.strata.size(); ++s) {
            const auto& st = w.strata[s];
            for (const auto& [t, p] : st.genos) {
                mz += st.weight * p * be.cross(out, {s, t}, out, {s, t}, Sharing::FamilyOnly);
                for (const auto& [t2, p2] : st.genos)
                    dz += st.weight * p * p2 * be.cross(out, {s, t}, out, {s, t2}, Sharing::FamilyOnly);
            }
        }
        double rho_mz = (mz - m * m) / vy;
        double rho_dz = (dz - m * m) / vy;
        return std::vector<double>{rho_mz, rho_dz, 2.0 * (rho_mz - rho_dz)};
    });
    return {r[0], r[1], r[2]};
}

TwinQuantities twin_quantities(const PhenotypeModel& model, const EngineOptions& options) {
    Analysis a({model}, options);
    return twin_quantities(a, 0);
}

// ── Sibling model ───────────────────────────────────────────────────────────

PhenotypeModel SiblingModel::to_model() const {
    if (!f_direct || !f_indirect) throw std::invalid_argument("sibling model needs f_direct and f_indirect");
    for (const ExprPtr& e : {f_direct, f_indirect}) {
        std::set<std::string> used;
        collect_symbols(*e, used);
        for (const auto& u : used)
            if (u != "g") throw std::invalid_argument("sibling model effects may only use the symbol g, not '" + u + "'");
        if (contains_indicator(*e)) throw std::invalid_argument("sibling model effects cannot contain ind()");
    }
    if (var_f < 0.0 || var_e < 0.0) throw std::invalid_argument("sibling model variances must be nonnegative");
    PhenotypeModel m;
    m.mode = FamilyMode::WithinFamily;
    m.symbols.push_back({"g", Role::Genotype, DistributionSpec::hwe(p), nullptr, ""});
    m.symbols.push_back({"gs", Role::Sibling, {}, nullptr, "g"});
    m.symbols.push_back({"fam", Role::Family, DistributionSpec::normal(0.0, var_f), nullptr, ""});
    m.symbols.push_back({"e", Role::Latent, DistributionSpec::normal(0.0, var_e), nullptr, ""});
    ExprPtr indirect = rename_symbols(f_indirect, {{"g", "gs"}});
    m.phenotype = make_add(make_add(make_add(f_direct, indirect), make_symbol("fam")), make_symbol("e"));
    validate(m);
    return m;
}

RdrQuantities rdr_quantities(const SiblingModel& sm, const EngineOptions& options) {
    PhenotypeModel m = sm.to_model();
    Analysis a({m}, options);
    double vd = 0.0, md = 0.0, m2 = 0.0;
    for (const auto& [g, q] : DistributionSpec::hwe(sm.p).atoms()) {
        double v = evaluate_expr(*sm.f_direct, [&](const std::string&) { return g; });
        md += q * v;
        m2 += q * v * v;
    }
    vd = std::max(0.0, m2 - md * md);
    RdrQuantities r;
    r.h2_rdr = a.run1([&](const MomentBackend& be) { return vd / var_y_of(a.world(), be, 0); });
    r.xi_fraternal = xi(a, CounterfactualKind::Fraternal, 0);
    r.xi_adopted = xi(a, CounterfactualKind::Adopted, 0);
    return r;
}

Estimate genetic_correlation(const PhenotypeModel& model_y, const PhenotypeModel& model_z,
                             const EngineOptions& options) {
    Analysis a({model_y, model_z}, options);
    const World& w = a.world();
    return a.run1([&](const MomentBackend& be) {
        double vy = var_y_of(w, be, 0);
        double vz = var_y_of(w, be, 1);
        double edy = 0.0, edz = 0.0, edd = 0.0;
        for (std::uint32_t s = 0; s < w.strata.size(); ++s) {
            const auto& st = w.strata[s];
            for (std::size_t i = 0; i < st.genos.size(); ++i)
                for (std::size_t j = 0; j < st.genos.size(); ++j) {
                    if (i == j) continue;
                    CellRef a1{s, st.genos[i].first}, b1{s, st.genos[j].first};
                    double wt = st.weight * st.genos[i].second * st.genos[j].second;
                    edy += wt * (be.mean(0, a1) - be.mean(0, b1));
                    edz += wt * (be.mean(1, a1) - be.mean(1, b1));
                    edd += wt * (be.cross(0, a1, 1, a1, Sharing::All) - be.cross(0, a1, 1, b1, Sharing::All) -
                                 be.cross(0, b1, 1, a1, Sharing::All) + be.cross(0, b1, 1, b1, Sharing::All));
                }
        }
        return (edd - edy * edz) / (2.0 * std::sqrt(vy * vz));
    });
}

// ── Report ──────────────────────────────────────────────────────────────────

const Estimate* HeritabilityReport::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return &e.estimate;
    return nullptr;
}

double HeritabilityReport::value(const std::string& name) const {
    const Estimate* e = find(name);
    if (!e) throw std::out_of_range("report has no entry '" + name + "'");
    return e->value;
}

namespace {

// a <= b within four standard errors (plus rounding).
bool leq(const Estimate& a, const Estimate& b) {
    double slack = 4.0 * std::sqrt(a.se * a.se + b.se * b.se) + 1e-9;
    return a.value <= b.value + slack;
}

bool leq(const Estimate& a, double b) { return a.value <= b + 4.0 * a.se + 1e-9; }
bool geq(const Estimate& a, double b) { return a.value >= b - 4.0 * a.se - 1e-9; }

}  // namespace

HeritabilityReport report(const PhenotypeModel& model, const EngineOptions& options,
                          std::optional<CounterfactualKind> kind) {
    Analysis a({model}, options);
    HeritabilityReport rep;
    rep.kind = kind.value_or(default_kind(model.mode));
    check_kind(a.world(), rep.kind);
    rep.digest = model_digest(model);
    rep.engine_class = classify(model);

    auto bounds = moment_bounds(a);
    Estimate x = xi(a, rep.kind);
    rep.entries.push_back({"narrow_h2", narrow_h2(a)});
    rep.entries.push_back({"broad_H2", broad_h2(a)});
    rep.entries.push_back({"xi", x});
    rep.entries.push_back({"xi_l_prime", bounds.xi_l_prime});
    rep.entries.push_back({"xi_l", xi_l(a)});
    rep.entries.push_back({"xi_u", xi_u(a)});
    rep.entries.push_back({"xi_u_prime", bounds.xi_u_prime});
    if (model.mode == FamilyMode::WithinFamily) {
        auto tw = twin_quantities(a);
        rep.entries.push_back({"h2_twin", tw.h2_twin});
        rep.entries.push_back({"rho_MZ", tw.rho_mz});
        rep.entries.push_back({"rho_DZ", tw.rho_dz});
        Estimate adopted = rep.kind == CounterfactualKind::Adopted ? x : xi(a, CounterfactualKind::Adopted);
        if (rep.kind != CounterfactualKind::Adopted) rep.entries.push_back({"xi_adopted", adopted});
        if (adopted.value > 1.0)
            rep.warnings.push_back("xi_adopted = " + format_number(adopted.value) +
                                   " exceeds 1; reported without clamping");
    }

    std::vector<std::string> problems;
    auto get = [&](const char* n) { return *rep.find(n); };
    // The chain needs G' independent of G given the stratum.
    bool chain = rep.kind == CounterfactualKind::Fraternal || model.mode == FamilyMode::Population;
    if (rep.kind != CounterfactualKind::Adopted)
        if (!geq(x, 0.0) || !leq(x, 1.0)) problems.push_back("xi outside [0, 1]");
    if (chain) {
        if (!leq(get("xi_l_prime"), get("xi_l"))) problems.push_back("xi_l_prime > xi_l");
        if (!leq(get("xi_l"), x)) problems.push_back("xi_l > xi");
        if (!leq(x, get("xi_u"))) problems.push_back("xi > xi_u");
        if (!leq(x, get("xi_u_prime"))) problems.push_back("xi > xi_u_prime");
    }
    if (!geq(get("narrow_h2"), 0.0)) problems.push_back("narrow_h2 < 0");
    if (!leq(get("narrow_h2"), get("broad_H2"))) problems.push_back("narrow_h2 > broad_H2");
    if (!leq(get("broad_H2"), 1.0)) problems.push_back("broad_H2 > 1");
    if (!problems.empty()) {
        std::ostringstream msg;
        msg << "report invariants violated:";
        for (const auto& p : problems) msg << ' ' << p << ';';
        for (const auto& e : rep.entries) msg << ' ' << e.name << '=' << format_number(e.estimate.value);
        throw InconsistencyError(msg.str());
    }
    return rep;
}

}  // namespace cfh
