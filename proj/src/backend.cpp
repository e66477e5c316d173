#include "cfh/engine.hpp"
#include "cfh/normal.hpp"
#include "cfh/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cfh {

std::string to_string(Method m) {
    switch (m) {
        case Method::Analytic: return "analytic";
        case Method::MonteCarlo: return "monte-carlo";
        case Method::PlugIn: return "plug-in";
    }
    return "analytic";
}

namespace {

double ipow(double x, int p) {
    switch (p) {
        case 1: return x;
        case 2: return x * x;
        default: {
            double r = 1.0;
            for (int i = 0; i < p; ++i) r *= x;
            return r;
        }
    }
}

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

double form_mean(const GaussForm& f, bool indicator) {
    if (!indicator) return f.mean;
    double s = std::sqrt(norm2(f.noise));
    if (s == 0.0) return f.mean > 0.0 ? 1.0 : 0.0;
    return norm_cdf(f.mean / s);
}

double form_second(const GaussForm& f, bool indicator) {
    if (indicator) return form_mean(f, true);
    return f.mean * f.mean + norm2(f.noise);
}

// E[a * b] for two Gaussian forms whose noise is shared on the masked normals.
double form_cross(const GaussForm& a, bool ia, const GaussForm& b, bool ib, const std::vector<char>& shared) {
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t k = 0; k < a.noise.size(); ++k) {
        if (shared[k]) cov += a.noise[k] * b.noise[k];
        va += a.noise[k] * a.noise[k];
        vb += b.noise[k] * b.noise[k];
    }
    if (!ia && !ib) return a.mean * b.mean + cov;
    if (ia && ib) {
        double sa = std::sqrt(va), sb = std::sqrt(vb);
        double pa = sa == 0.0 ? (a.mean > 0.0 ? 1.0 : 0.0) : norm_cdf(a.mean / sa);
        double pb = sb == 0.0 ? (b.mean > 0.0 ? 1.0 : 0.0) : norm_cdf(b.mean / sb);
        if (sa == 0.0 || sb == 0.0) return pa * pb;
        double rho = cov / (sa * sb);
        return bvn_cdf(a.mean / sa, b.mean / sb, rho);
    }
    // One linear form L and one indicator form T: E[L 1(T > 0)] by Stein's identity.
    const GaussForm& lin = ia ? b : a;
    const GaussForm& ind = ia ? a : b;
    double st = std::sqrt(ia ? va : vb);
    if (st == 0.0) return ind.mean > 0.0 ? lin.mean : 0.0;
    double t = ind.mean / st;
    return lin.mean * norm_cdf(t) + cov / st * norm_pdf(t);
}

}  // namespace

// ── Exact backend ───────────────────────────────────────────────────────────

AnalyticBackend::AnalyticBackend(const World& world) : w_(world) {
    if (world.needs_monte_carlo())
        throw std::invalid_argument("model is outside the analytic class; use the Monte Carlo backend");
}

void AnalyticBackend::form(std::size_t out, CellRef c, const World::Atom& fam, const World::Atom& ind,
                           GaussForm& f) const {
    thread_local std::vector<double> vals;
    w_.fill(c, vals);
    for (const auto& [slot, v] : fam.values) vals[slot] = v;
    for (const auto& [slot, v] : ind.values) vals[slot] = v;
    f.mean = 0.0;
    f.noise.assign(w_.normals.size(), 0.0);
    for (const auto& term : w_.outputs[out].analytic) {
        double v = term.coef;
        for (const auto& [slot, power] : term.factors) v *= ipow(vals[slot], power);
        if (term.normal < 0) {
            f.mean += v;
        } else {
            const auto& ns = w_.normals[static_cast<std::size_t>(term.normal)];
            f.mean += v * ns.mean;
            f.noise[static_cast<std::size_t>(term.normal)] += v * ns.sd;
        }
    }
}

double AnalyticBackend::mean(std::size_t out, CellRef c) const {
    bool ind = w_.outputs[out].indicator;
    GaussForm f;
    double s = 0.0;
    for (const auto& fa : w_.family_atoms)
        for (const auto& ia : w_.individual_atoms) {
            form(out, c, fa, ia, f);
            s += fa.prob * ia.prob * form_mean(f, ind);
        }
    return s;
}

double AnalyticBackend::second(std::size_t out, CellRef c) const {
    bool ind = w_.outputs[out].indicator;
    GaussForm f;
    double s = 0.0;
    for (const auto& fa : w_.family_atoms)
        for (const auto& ia : w_.individual_atoms) {
            form(out, c, fa, ia, f);
            s += fa.prob * ia.prob * form_second(f, ind);
        }
    return s;
}

double AnalyticBackend::cross(std::size_t oa, CellRef a, std::size_t ob, CellRef b, Sharing sharing) const {
    if (sharing == Sharing::None) return mean(oa, a) * mean(ob, b);
    bool ia = w_.outputs[oa].indicator, ib = w_.outputs[ob].indicator;
    std::vector<char> shared(w_.normals.size(), 1);
    if (sharing == Sharing::FamilyOnly)
        for (std::size_t k = 0; k < shared.size(); ++k) shared[k] = w_.normals[k].family ? 1 : 0;

    double s = 0.0;
    GaussForm fa, fb;
    if (sharing == Sharing::All) {
        for (const auto& f : w_.family_atoms)
            for (const auto& i : w_.individual_atoms) {
                form(oa, a, f, i, fa);
                form(ob, b, f, i, fb);
                s += f.prob * i.prob * form_cross(fa, ia, fb, ib, shared);
            }
        return s;
    }
    std::vector<GaussForm> as(w_.individual_atoms.size()), bs(w_.individual_atoms.size());
    for (const auto& f : w_.family_atoms) {
        for (std::size_t i = 0; i < as.size(); ++i) {
            form(oa, a, f, w_.individual_atoms[i], as[i]);
            form(ob, b, f, w_.individual_atoms[i], bs[i]);
        }
        double inner = 0.0;
        for (std::size_t i = 0; i < as.size(); ++i)
            for (std::size_t j = 0; j < bs.size(); ++j)
                inner += w_.individual_atoms[i].prob * w_.individual_atoms[j].prob *
                         form_cross(as[i], ia, bs[j], ib, shared);
        s += f.prob * inner;
    }
    return s;
}

MarginalLaw AnalyticBackend::law(std::size_t out, CellRef c) const {
    if (w_.outputs[out].indicator) return MarginalLaw::bernoulli(std::clamp(mean(out, c), 0.0, 1.0));
    std::vector<NormalComponent> comps;
    GaussForm f;
    for (const auto& fa : w_.family_atoms)
        for (const auto& ia : w_.individual_atoms) {
            form(out, c, fa, ia, f);
            comps.push_back({fa.prob * ia.prob, f.mean, std::sqrt(norm2(f.noise))});
        }
    return MarginalLaw::mixture(std::move(comps));
}

// ── Draw bank ───────────────────────────────────────────────────────────────

namespace {
constexpr std::size_t kChunk = 1 << 16;
}

DrawBank::DrawBank(const World& world, std::size_t n, std::uint64_t seed, std::size_t threads) : n_(n) {
    if (n == 0) throw std::invalid_argument("Monte Carlo sample size must be positive");
    const std::size_t nn = world.normals.size();
    const std::size_t nv = nn + world.latent_discrete.size();
    primary_.assign(nv, std::vector<double>(n));
    secondary_.assign(nv, std::vector<double>());
    for (std::size_t k = 0; k < nv; ++k) {
        bool family = k < nn ? world.normals[k].family : world.latent_discrete[k - nn].family;
        if (!family) secondary_[k].resize(n);
    }
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    parallel_for(nv * chunks * 2, threads, [&](std::size_t job) {
        std::size_t copy = job % 2;
        std::size_t k = (job / 2) % nv;
        std::size_t chunk = job / 2 / nv;
        std::vector<double>& col = copy == 0 ? primary_[k] : secondary_[k];
        if (col.empty()) return;
        auto rng = make_stream(seed, chunk, 1 + k + copy * 0x10000);
        std::size_t lo = chunk * kChunk, hi = std::min(n, lo + kChunk);
        if (k < nn) {
            const auto& ns = world.normals[k];
            std::normal_distribution<double> gauss(0.0, 1.0);
            for (std::size_t i = lo; i < hi; ++i) col[i] = ns.mean + ns.sd * gauss(rng);
        } else {
            const auto& atoms = world.latent_discrete[k - nn].atoms;
            std::vector<double> cum;
            for (const auto& a : atoms) cum.push_back((cum.empty() ? 0.0 : cum.back()) + a.second);
            for (std::size_t i = lo; i < hi; ++i) {
                double u = uniform01(rng) * cum.back();
                auto j = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
                col[i] = atoms[std::min(j, atoms.size() - 1)].first;
            }
        }
    });
}

// ── Monte Carlo backend ─────────────────────────────────────────────────────

MonteCarloBackend::MonteCarloBackend(const World& world, std::shared_ptr<const DrawBank> bank, std::size_t lo,
                                     std::size_t hi)
    : w_(world), bank_(std::move(bank)), lo_(lo), hi_(hi) {
    if (!(hi > lo) || hi > bank_->size()) throw std::invalid_argument("invalid draw range");
}

std::shared_ptr<const std::vector<double>> MonteCarloBackend::values(std::size_t out, CellRef c, bool sibling) const {
    std::uint64_t key = ((static_cast<std::uint64_t>(out) * w_.strata.size() + c.stratum) * w_.n_tuples + c.tuple) * 2 +
                        (sibling ? 1 : 0);
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    const std::size_t nn = w_.normals.size();
    std::vector<int> bank_of(w_.n_slots, -1);
    for (std::size_t k = 0; k < nn; ++k) bank_of[w_.normals[k].slot] = static_cast<int>(k);
    for (std::size_t k = 0; k < w_.latent_discrete.size(); ++k)
        bank_of[w_.latent_discrete[k].slot] = static_cast<int>(nn + k);

    std::vector<double> vals;
    w_.fill(c, vals);
    const std::size_t m = hi_ - lo_;
    auto y = std::make_shared<std::vector<double>>(m, 0.0);
    for (const auto& term : w_.outputs[out].full) {
        double fixed = term.coef;
        std::vector<std::pair<const double*, int>> latent;
        for (const auto& [slot, power] : term.factors) {
            int k = bank_of[slot];
            if (k < 0) {
                fixed *= ipow(vals[slot], power);
            } else {
                auto kk = static_cast<std::size_t>(k);
                const std::vector<double>& col =
                    (sibling && !bank_->secondary(kk).empty()) ? bank_->secondary(kk) : bank_->primary(kk);
                latent.emplace_back(col.data() + lo_, power);
            }
        }
        if (fixed == 0.0) continue;
        if (latent.empty()) {
            for (double& v : *y) v += fixed;
            continue;
        }
        for (std::size_t i = 0; i < m; ++i) {
            double p = fixed;
            for (const auto& [col, power] : latent) p *= ipow(col[i], power);
            (*y)[i] += p;
        }
    }
    if (w_.outputs[out].indicator)
        for (double& v : *y) v = v > 0.0 ? 1.0 : 0.0;

    std::lock_guard<std::mutex> lock(mu_);
    auto [it, inserted] = cache_.emplace(key, y);
    return it->second;
}

double MonteCarloBackend::mean(std::size_t out, CellRef c) const {
    auto v = values(out, c, false);
    return std::accumulate(v->begin(), v->end(), 0.0) / static_cast<double>(v->size());
}

double MonteCarloBackend::second(std::size_t out, CellRef c) const {
    auto v = values(out, c, false);
    double s = 0.0;
    for (double x : *v) s += x * x;
    return s / static_cast<double>(v->size());
}

double MonteCarloBackend::cross(std::size_t oa, CellRef a, std::size_t ob, CellRef b, Sharing sharing) const {
    if (sharing == Sharing::None) return mean(oa, a) * mean(ob, b);
    auto va = values(oa, a, false);
    auto vb = values(ob, b, sharing == Sharing::FamilyOnly);
    double s = 0.0;
    for (std::size_t i = 0; i < va->size(); ++i) s += (*va)[i] * (*vb)[i];
    return s / static_cast<double>(va->size());
}

MarginalLaw MonteCarloBackend::law(std::size_t out, CellRef c) const {
    return MarginalLaw::empirical(*values(out, c, false));
}

// ── Analysis ────────────────────────────────────────────────────────────────

Analysis::Analysis(std::vector<PhenotypeModel> models, EngineOptions options,
                   const std::map<std::string, double>& conditioning)
    : models_(std::move(models)), options_(options) {
    world_ = std::make_unique<World>(models_, options_, conditioning);
    monte_carlo_ = world_->needs_monte_carlo();
    if (!monte_carlo_) {
        analytic_ = std::make_unique<AnalyticBackend>(*world_);
    } else {
        if (options_.batches < 2 || options_.mc_n < options_.batches)
            throw std::invalid_argument("Monte Carlo needs at least 2 batches and mc_n >= batches");
        bank_ = std::make_shared<DrawBank>(*world_, options_.mc_n, options_.seed, options_.threads);
    }
}

const MomentBackend& Analysis::full_backend() const {
    if (analytic_) return *analytic_;
    std::lock_guard<std::mutex> lock(full_mu_);
    if (!full_mc_) full_mc_ = std::make_unique<MonteCarloBackend>(*world_, bank_, 0, bank_->size());
    return *full_mc_;
}

std::vector<Estimate> Analysis::run(const Fn& fn) const {
    if (!monte_carlo_) {
        std::vector<double> v = fn(*analytic_);
        std::vector<Estimate> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = {v[i], 0.0, Method::Analytic};
        return out;
    }
    const std::size_t B = options_.batches;
    const std::size_t per = bank_->size() / B;
    std::vector<std::vector<double>> batch;
    for (std::size_t b = 0; b < B; ++b) {
        MonteCarloBackend be(*world_, bank_, b * per, (b + 1) * per);
        batch.push_back(fn(be));
    }
    std::vector<Estimate> out(batch[0].size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::vector<double> col;
        for (const auto& r : batch) col.push_back(r[i]);
        out[i] = batch_means(col);
    }
    return out;
}

Estimate Analysis::run1(const std::function<double(const MomentBackend&)>& fn) const {
    return run([&](const MomentBackend& be) { return std::vector<double>{fn(be)}; })[0];
}

Estimate batch_means(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("batch_means needs at least one value");
    const double n = static_cast<double>(values.size());
    double m = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    double se = values.size() > 1 ? std::sqrt(s / (n - 1.0) / n) : 0.0;
    return {m, se, Method::MonteCarlo};
}

}  // namespace cfh
