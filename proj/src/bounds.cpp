#include "cfh/coupling.hpp"
#include "cfh/moments.hpp"
#include "cfh/rng.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <unordered_map>

namespace cfh {

namespace {

// Conditional laws of every cell, deduplicated by canonical key for exact laws.
struct CellLaws {
    std::vector<std::vector<std::size_t>> id;  // [stratum][k] for strata[s].genos[k]
    std::vector<MarginalLaw> laws;
};

CellLaws collect_laws(const World& w, const MomentBackend& be, std::size_t out) {
    CellLaws cl;
    std::map<std::vector<double>, std::size_t> seen;
    cl.id.resize(w.strata.size());
    for (std::uint32_t s = 0; s < w.strata.size(); ++s) {
        for (const auto& [t, p] : w.strata[s].genos) {
            (void)p;
            MarginalLaw law = be.law(out, {s, t});
            if (be.exact()) {
                auto [it, inserted] = seen.emplace(law.key(), cl.laws.size());
                if (inserted) cl.laws.push_back(std::move(law));
                cl.id[s].push_back(it->second);
            } else {
                cl.id[s].push_back(cl.laws.size());
                cl.laws.push_back(std::move(law));
            }
        }
    }
    return cl;
}

template <typename Msd>
double coupling_sum(const World& w, const CellLaws& cl, Msd msd) {
    double total = 0.0;
    for (std::size_t s = 0; s < w.strata.size(); ++s) {
        const auto& genos = w.strata[s].genos;
        double inner = 0.0;
        for (std::size_t i = 0; i < genos.size(); ++i)
            for (std::size_t j = 0; j < genos.size(); ++j) {
                if (i == j) continue;
                inner += genos[i].second * genos[j].second * msd(cl.id[s][i], cl.id[s][j]);
            }
        total += w.strata[s].weight * inner;
    }
    return total;
}

class PairMemo {
public:
    template <typename F>
    double get(std::size_t a, std::size_t b, F f) {
        if (a == b) return f(a, b);
        std::uint64_t key = (static_cast<std::uint64_t>(std::min(a, b)) << 32) | std::max(a, b);
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        double v = f(a, b);
        memo_.emplace(key, v);
        return v;
    }

private:
    std::unordered_map<std::uint64_t, double> memo_;
};

double var_y_of(const Analysis& a, const MomentBackend& be, std::size_t out) {
    return decomposition_components(a.world(), be, out)[0];
}

double exact_bound(const Analysis& a, const MomentBackend& be, std::size_t out, bool counter) {
    double var_y = var_y_of(a, be, out);
    CellLaws cl = collect_laws(a.world(), be, out);
    PairMemo memo;
    double sum = coupling_sum(a.world(), cl, [&](std::size_t i, std::size_t j) {
        if (!counter && i == j) return 0.0;
        return memo.get(i, j, [&](std::size_t x, std::size_t y) {
            return counter ? countermonotone_msd(cl.laws[x], cl.laws[y]) : comonotone_msd(cl.laws[x], cl.laws[y]);
        });
    });
    return sum / (2.0 * var_y);
}

bool closed_form_pair(const MarginalLaw& a, const MarginalLaw& b) {
    using K = MarginalLaw::Kind;
    return (a.kind() == K::Normal && b.kind() == K::Normal) || (a.kind() == K::Discrete && b.kind() == K::Discrete);
}

// Sorted-sample estimate: N draws per distinct conditional law, seeded by the
// law's ordinal, with batch-means standard error over 10 sub-samples.
Estimate sorted_sample_xi_l(const Analysis& a, std::size_t out) {
    const MomentBackend& be = a.full_backend();
    const World& w = a.world();
    const std::size_t N = a.options().mc_n;
    const std::size_t B = std::max<std::size_t>(2, a.options().batches);
    const std::size_t per = N / B;
    if (per == 0) throw std::invalid_argument("sorted-sample coupling needs mc_n >= batches");
    double var_y = var_y_of(a, be, out);
    CellLaws cl = collect_laws(w, be, out);

    struct Sampled {
        MarginalLaw full;
        std::vector<MarginalLaw> batch;
    };
    std::vector<std::optional<Sampled>> sampled(cl.laws.size());
    auto sample = [&](std::size_t k) -> const Sampled& {
        if (!sampled[k]) {
            auto rng = make_stream(a.options().seed, k, 0x51);
            std::vector<double> raw = cl.laws[k].draw(N, rng);
            Sampled s{MarginalLaw::empirical(raw), {}};
            for (std::size_t b = 0; b < B; ++b)
                s.batch.push_back(MarginalLaw::empirical(std::vector<double>(
                    raw.begin() + static_cast<std::ptrdiff_t>(b * per),
                    raw.begin() + static_cast<std::ptrdiff_t>((b + 1) * per))));
            sampled[k] = std::move(s);
        }
        return *sampled[k];
    };

    bool any_sampled = false;
    PairMemo memo;
    std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> batch_memo;
    std::vector<double> batch_totals(B, 0.0);
    double total = 0.0;
    for (std::size_t s = 0; s < w.strata.size(); ++s) {
        const auto& genos = w.strata[s].genos;
        for (std::size_t i = 0; i < genos.size(); ++i)
            for (std::size_t j = 0; j < genos.size(); ++j) {
                std::size_t x = cl.id[s][i], y = cl.id[s][j];
                if (x == y) continue;
                double wt = w.strata[s].weight * genos[i].second * genos[j].second;
                const MarginalLaw& la = cl.laws[x];
                const MarginalLaw& lb = cl.laws[y];
                if (closed_form_pair(la, lb)) {
                    double v = memo.get(x, y, [&](std::size_t, std::size_t) { return comonotone_msd(la, lb); });
                    total += wt * v;
                    for (double& bt : batch_totals) bt += wt * v;
                    continue;
                }
                any_sampled = true;
                auto key = std::make_pair(std::min(x, y), std::max(x, y));
                auto it = batch_memo.find(key);
                if (it == batch_memo.end()) {
                    const Sampled& sa = sample(key.first);
                    const Sampled& sb = sample(key.second);
                    std::vector<double> v{comonotone_msd(sa.full, sb.full)};
                    for (std::size_t b = 0; b < B; ++b) v.push_back(comonotone_msd(sa.batch[b], sb.batch[b]));
                    it = batch_memo.emplace(key, std::move(v)).first;
                }
                total += wt * it->second[0];
                for (std::size_t b = 0; b < B; ++b) batch_totals[b] += wt * it->second[b + 1];
            }
    }
    Estimate e{total / (2.0 * var_y), 0.0, Method::Analytic};
    if (any_sampled) {
        for (double& bt : batch_totals) bt /= 2.0 * var_y;
        Estimate bm = batch_means(batch_totals);
        e.se = bm.se;
        e.method = Method::MonteCarlo;
    }
    return e;
}

Estimate bound(const Analysis& a, std::size_t out, bool counter) {
    if (!a.monte_carlo()) {
        if (!counter && a.options().xi_l_method == XiLowerMethod::SortedSample) return sorted_sample_xi_l(a, out);
        return {exact_bound(a, a.full_backend(), out, counter), 0.0, Method::Analytic};
    }
    // Value from every draw; standard error from the per-batch estimates.
    double value = exact_bound(a, a.full_backend(), out, counter);
    Estimate se = a.run1([&](const MomentBackend& be) { return exact_bound(a, be, out, counter); });
    return {value, se.se, Method::MonteCarlo};
}

double mixture_variance(const std::vector<WeightedLaw>& laws) {
    double m = 0.0, s2 = 0.0, wsum = 0.0;
    for (const auto& l : laws) {
        double mu = l.law.mean();
        wsum += l.weight;
        m += l.weight * mu;
        s2 += l.weight * (l.law.variance() + mu * mu);
    }
    if (std::abs(wsum - 1.0) > 1e-9) throw std::invalid_argument("law weights must sum to 1");
    double v = s2 - m * m;
    require_positive_variance(v, s2);
    return v;
}

double from_laws(const std::vector<WeightedLaw>& laws, bool counter) {
    double var_y = mixture_variance(laws);
    double sum = 0.0;
    for (std::size_t i = 0; i < laws.size(); ++i)
        for (std::size_t j = 0; j < laws.size(); ++j) {
            if (i == j) continue;
            double v = counter ? countermonotone_msd(laws[i].law, laws[j].law)
                               : comonotone_msd(laws[i].law, laws[j].law);
            sum += laws[i].weight * laws[j].weight * v;
        }
    return sum / (2.0 * var_y);
}

}  // namespace

Estimate xi_l(const Analysis& analysis, std::size_t out) { return bound(analysis, out, false); }
Estimate xi_u(const Analysis& analysis, std::size_t out) { return bound(analysis, out, true); }

Estimate xi_l(const PhenotypeModel& model, const EngineOptions& options) {
    Analysis a({model}, options);
    return xi_l(a, 0);
}

Estimate xi_u(const PhenotypeModel& model, const EngineOptions& options) {
    Analysis a({model}, options);
    return xi_u(a, 0);
}

double xi_l_from_laws(const std::vector<WeightedLaw>& laws) { return from_laws(laws, false); }
double xi_u_from_laws(const std::vector<WeightedLaw>& laws) { return from_laws(laws, true); }

}  // namespace cfh
