#include "cfh/marginal.hpp"
#include "cfh/normal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>

namespace cfh {

// ── z grid shared by all smooth pairs ───────────────────────────────────────
// Composite 8-point Gauss-Legendre on [-9, 9] in panels of width 0.1, with the
// standard normal density folded into the weights. The grid is symmetric, so
// node j and node n-1-j are negatives of each other.

namespace {

constexpr double kZRange = 9.0;
constexpr double kPanelWidth = 0.1;
constexpr std::size_t kPanelNodes = 8;

struct ZGrid {
    std::vector<double> z;
    std::vector<double> w;
};

void append_panels(double lo, double hi, std::vector<double>& z, std::vector<double>& w) {
    static const QuadratureRule gl = gauss_legendre(kPanelNodes);
    if (!(hi > lo)) return;
    auto panels = static_cast<std::size_t>(std::ceil((hi - lo) / kPanelWidth - 1e-9));
    if (panels == 0) panels = 1;
    double width = (hi - lo) / static_cast<double>(panels);
    for (std::size_t p = 0; p < panels; ++p) {
        double a = lo + width * static_cast<double>(p);
        double mid = a + 0.5 * width;
        for (std::size_t k = 0; k < kPanelNodes; ++k) {
            double zz = mid + 0.5 * width * gl.nodes[k];
            z.push_back(zz);
            w.push_back(0.5 * width * gl.weights[k] * norm_pdf(zz));
        }
    }
}

const ZGrid& z_grid() {
    static const ZGrid grid = [] {
        ZGrid g;
        append_panels(-kZRange, kZRange, g.z, g.w);
        return g;
    }();
    return grid;
}

}  // namespace

struct MarginalLaw::GridCache {
    std::once_flag once;
    std::vector<double> q;
};

// ── Construction ────────────────────────────────────────────────────────────

MarginalLaw MarginalLaw::normal(double mean, double variance) {
    if (!(variance >= 0.0) || !std::isfinite(mean) || !std::isfinite(variance))
        throw std::invalid_argument("normal law needs finite mean and variance >= 0");
    return mixture({{1.0, mean, std::sqrt(variance)}});
}

MarginalLaw MarginalLaw::bernoulli(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("bernoulli probability outside [0,1]");
    return discrete({0.0, 1.0}, {1.0 - p, p});
}

MarginalLaw MarginalLaw::discrete(std::vector<double> values, std::vector<double> probs) {
    if (values.size() != probs.size() || values.empty())
        throw std::invalid_argument("discrete law needs matching, non-empty values and probs");
    std::vector<NormalComponent> comps;
    for (std::size_t i = 0; i < values.size(); ++i) comps.push_back({probs[i], values[i], 0.0});
    return mixture(std::move(comps));
}

MarginalLaw MarginalLaw::mixture(std::vector<NormalComponent> components) {
    MarginalLaw law;
    double total = 0.0;
    std::map<std::pair<double, double>, double> cont;
    std::map<double, double> atoms;
    for (const auto& c : components) {
        if (!(c.weight >= 0.0) || !std::isfinite(c.mean) || !(c.sd >= 0.0) || !std::isfinite(c.sd))
            throw std::invalid_argument("invalid mixture component");
        if (c.weight == 0.0) continue;
        total += c.weight;
        if (c.sd == 0.0)
            atoms[c.mean] += c.weight;
        else
            cont[{c.mean, c.sd}] += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("law weights must sum to 1");
    for (const auto& [ms, w] : cont) law.comps_.push_back({w / total, ms.first, ms.second});
    for (const auto& [v, w] : atoms) {
        law.atom_values_.push_back(v);
        law.atom_probs_.push_back(w / total);
    }
    if (law.atom_values_.empty())
        law.kind_ = law.comps_.size() == 1 ? Kind::Normal : Kind::Mixture;
    else
        law.kind_ = law.comps_.empty() ? Kind::Discrete : Kind::Mixture;
    law.cache_ = std::make_shared<GridCache>();
    return law;
}

MarginalLaw MarginalLaw::empirical(std::vector<double> sample) {
    if (sample.empty()) throw std::invalid_argument("empirical law needs at least one draw");
    MarginalLaw law;
    law.kind_ = Kind::Empirical;
    std::stable_sort(sample.begin(), sample.end());
    law.sample_ = std::move(sample);
    law.cache_ = std::make_shared<GridCache>();
    return law;
}

// ── Moments and distribution function ───────────────────────────────────────

double MarginalLaw::mean() const {
    if (kind_ == Kind::Empirical)
        return std::accumulate(sample_.begin(), sample_.end(), 0.0) / static_cast<double>(sample_.size());
    double m = 0.0;
    for (const auto& c : comps_) m += c.weight * c.mean;
    for (std::size_t i = 0; i < atom_values_.size(); ++i) m += atom_probs_[i] * atom_values_[i];
    return m;
}

double MarginalLaw::variance() const {
    double m = mean();
    if (kind_ == Kind::Empirical) {
        double s = 0.0;
        for (double v : sample_) s += (v - m) * (v - m);
        return s / static_cast<double>(sample_.size());
    }
    double s = 0.0;
    for (const auto& c : comps_) s += c.weight * (c.sd * c.sd + (c.mean - m) * (c.mean - m));
    for (std::size_t i = 0; i < atom_values_.size(); ++i)
        s += atom_probs_[i] * (atom_values_[i] - m) * (atom_values_[i] - m);
    return s;
}

double MarginalLaw::cdf(double y) const {
    if (kind_ == Kind::Empirical) {
        auto it = std::upper_bound(sample_.begin(), sample_.end(), y);
        return static_cast<double>(it - sample_.begin()) / static_cast<double>(sample_.size());
    }
    double f = 0.0;
    for (const auto& c : comps_) f += c.weight * norm_cdf((y - c.mean) / c.sd);
    for (std::size_t i = 0; i < atom_values_.size(); ++i)
        if (atom_values_[i] <= y) f += atom_probs_[i];
    return std::min(f, 1.0);
}

// ── Quantiles ───────────────────────────────────────────────────────────────

double MarginalLaw::quantile(double u) const {
    if (!(u >= 0.0 && u <= 1.0)) throw std::domain_error("quantile level outside [0,1]");
    if (kind_ == Kind::Empirical) {
        auto n = static_cast<double>(sample_.size());
        auto k = static_cast<std::size_t>(std::ceil(u * n));
        if (k == 0) k = 1;
        return sample_[std::min(k, sample_.size()) - 1];
    }
    if (u <= 0.0) return comps_.empty() ? atom_values_.front() : -std::numeric_limits<double>::infinity();
    if (u >= 1.0) return comps_.empty() ? atom_values_.back() : std::numeric_limits<double>::infinity();
    return quantile_z(norm_quantile(u));
}

double MarginalLaw::quantile_z(double z) const {
    if (kind_ == Kind::Empirical) return quantile(norm_cdf(z));
    if (kind_ == Kind::Normal) return comps_[0].mean + comps_[0].sd * z;

    // Lower half compares F(y) with u = Phi(z); upper half compares the
    // survival function with 1 - u = Phi(-z). Both are monotone, and the
    // answer is the smallest y with F(y) >= u.
    const bool upper = z > 0.0;
    const double target = upper ? norm_cdf(-z) : norm_cdf(z);
    const std::size_t na = atom_values_.size();

    auto cont = [&](double y) {
        double s = 0.0;
        for (const auto& c : comps_) {
            double t = (y - c.mean) / c.sd;
            s += c.weight * (upper ? norm_sf(t) : norm_cdf(t));
        }
        return s;
    };

    // Atoms: Q is flat on the jump of F at each atom.
    if (na > 0) {
        double below = 0.0;  // atom mass strictly below the current atom
        double total_atoms = 0.0;
        for (double p : atom_probs_) total_atoms += p;
        for (std::size_t i = 0; i < na; ++i) {
            double v = atom_values_[i];
            double p = atom_probs_[i];
            double c = comps_.empty() ? 0.0 : cont(v);
            if (!upper) {
                double left = c + below;  // F(v-)
                if (left < target && target <= left + p) return v;
            } else {
                double above = total_atoms - below - p;  // mass strictly above v
                double right = c + above;                // S(v)
                if (right <= target && target < right + p) return v;
            }
            below += p;
        }
        if (comps_.empty()) {
            // Numerical edge: fall back to the cumulative scan.
            return upper ? atom_values_.back() : atom_values_.front();
        }
    }

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& c : comps_) {
        lo = std::min(lo, c.mean + c.sd * z);
        hi = std::max(hi, c.mean + c.sd * z);
    }
    for (double v : atom_values_) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double span = std::max(1.0, hi - lo);
    lo -= 1e-9 * span;
    hi += 1e-9 * span;

    // g(y) > 0 means y is at or beyond the quantile.
    auto g = [&](double y) {
        if (!upper) {
            double f = cont(y);
            for (std::size_t i = 0; i < na; ++i)
                if (atom_values_[i] <= y) f += atom_probs_[i];
            return f - target;
        }
        double s = cont(y);
        for (std::size_t i = 0; i < na; ++i)
            if (atom_values_[i] > y) s += atom_probs_[i];
        return target - s;
    };
    auto density = [&](double y) {
        double d = 0.0;
        for (const auto& c : comps_) d += c.weight * norm_pdf((y - c.mean) / c.sd) / c.sd;
        return d;
    };

    double y = 0.0;
    {
        double w = 0.0;
        for (const auto& c : comps_) {
            y += c.weight * (c.mean + c.sd * z);
            w += c.weight;
        }
        y = std::clamp(y / w, lo, hi);
    }
    for (int iter = 0; iter < 200; ++iter) {
        double gy = g(y);
        if (gy == 0.0) return y;
        if (gy > 0.0)
            hi = y;
        else
            lo = y;
        double d = density(y);
        double next = (d > 0.0) ? y - gy / d : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - y) <= 1e-15 * std::max(1.0, std::abs(y)) || hi - lo <= 1e-15 * std::max(1.0, std::abs(y)))
            return next;
        y = next;
    }
    return y;
}

const std::vector<double>& MarginalLaw::grid_quantiles() const {
    std::call_once(cache_->once, [this] {
        const ZGrid& grid = z_grid();
        cache_->q.resize(grid.z.size());
        for (std::size_t j = 0; j < grid.z.size(); ++j) cache_->q[j] = quantile_z(grid.z[j]);
    });
    return cache_->q;
}

std::vector<double> MarginalLaw::key() const {
    std::vector<double> k{static_cast<double>(kind_), static_cast<double>(comps_.size())};
    for (const auto& c : comps_) k.insert(k.end(), {c.weight, c.mean, c.sd});
    k.push_back(static_cast<double>(atom_values_.size()));
    for (std::size_t i = 0; i < atom_values_.size(); ++i) k.insert(k.end(), {atom_values_[i], atom_probs_[i]});
    k.push_back(static_cast<double>(sample_.size()));
    k.insert(k.end(), sample_.begin(), sample_.end());
    return k;
}

std::vector<double> MarginalLaw::draw(std::size_t n, std::mt19937_64& rng) const {
    std::vector<double> out(n);
    if (kind_ == Kind::Empirical) {
        std::uniform_int_distribution<std::size_t> pick(0, sample_.size() - 1);
        for (auto& v : out) v = sample_[pick(rng)];
        return out;
    }
    // Cumulative weights over components followed by atoms.
    std::vector<double> cum;
    for (const auto& c : comps_) cum.push_back((cum.empty() ? 0.0 : cum.back()) + c.weight);
    for (double p : atom_probs_) cum.push_back((cum.empty() ? 0.0 : cum.back()) + p);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& v : out) {
        std::size_t k = 0;
        if (cum.size() > 1) {
            double u = unif(rng) * cum.back();
            k = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
            if (k >= cum.size()) k = cum.size() - 1;
        }
        if (k < comps_.size())
            v = comps_[k].mean + comps_[k].sd * gauss(rng);
        else
            v = atom_values_[k - comps_.size()];
    }
    return out;
}

// ── Couplings ───────────────────────────────────────────────────────────────

namespace {

// Both laws purely discrete: integrate the step quantile functions exactly.
double discrete_msd(const MarginalLaw& a, const MarginalLaw& b, bool counter) {
    std::vector<double> bv = b.atom_values(), bp = b.atom_probs();
    if (counter) {
        std::reverse(bv.begin(), bv.end());
        std::reverse(bp.begin(), bp.end());
    }
    const auto& av = a.atom_values();
    const auto& ap = a.atom_probs();
    std::size_t i = 0, j = 0;
    double ra = ap[0], rb = bp[0], total = 0.0;
    while (i < av.size() && j < bv.size()) {
        double step = std::min(ra, rb);
        double d = av[i] - bv[j];
        total += step * d * d;
        ra -= step;
        rb -= step;
        if (ra <= 1e-15) {
            if (++i < av.size()) ra = ap[i];
        }
        if (rb <= 1e-15) {
            if (++j < bv.size()) rb = bp[j];
        }
    }
    return total;
}

double empirical_msd(const MarginalLaw& a, const MarginalLaw& b, bool counter) {
    const auto& x = a.sample();
    const auto& y = b.sample();
    if (x.size() != y.size())
        throw std::invalid_argument("empirical laws must have equal sample sizes (" + std::to_string(x.size()) +
                                    " vs " + std::to_string(y.size()) + ")");
    const std::size_t n = x.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = x[i] - (counter ? y[n - 1 - i] : y[i]);
        s += d * d;
    }
    return s / static_cast<double>(n);
}

// z locations where the quantile function has a jump or a kink.
void breakpoints(const MarginalLaw& law, bool negate, std::vector<double>& out) {
    if (law.atom_values().empty()) return;
    double below = 0.0;
    for (std::size_t i = 0; i < law.atom_values().size(); ++i) {
        double v = law.atom_values()[i];
        double cont = 0.0;
        for (const auto& c : law.components()) cont += c.weight * norm_cdf((v - c.mean) / c.sd);
        double left = cont + below;
        double right = left + law.atom_probs()[i];
        for (double u : {left, right}) {
            if (u > 0.0 && u < 1.0) {
                double z = norm_quantile(u);
                if (std::abs(z) < kZRange) out.push_back(negate ? -z : z);
            }
        }
        below += law.atom_probs()[i];
    }
}

double quadrature_msd(const MarginalLaw& a, const MarginalLaw& b, bool counter) {
    const bool smooth = a.atom_values().empty() && b.atom_values().empty();
    double total = 0.0;
    if (smooth) {
        const ZGrid& grid = z_grid();
        const auto& qa = a.grid_quantiles();
        const auto& qb = b.grid_quantiles();
        const std::size_t n = grid.z.size();
        for (std::size_t j = 0; j < n; ++j) {
            double d = qa[j] - (counter ? qb[n - 1 - j] : qb[j]);
            total += grid.w[j] * d * d;
        }
        return total;
    }
    std::vector<double> cuts{-kZRange, kZRange};
    breakpoints(a, false, cuts);
    breakpoints(b, counter, cuts);
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> z, w;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) append_panels(cuts[k], cuts[k + 1], z, w);
    for (std::size_t j = 0; j < z.size(); ++j) {
        double d = a.quantile_z(z[j]) - b.quantile_z(counter ? -z[j] : z[j]);
        total += w[j] * d * d;
    }
    return total;
}

double msd(const MarginalLaw& a, const MarginalLaw& b, bool counter) {
    using K = MarginalLaw::Kind;
    if (a.kind() == K::Empirical || b.kind() == K::Empirical) {
        if (a.kind() != b.kind())
            throw std::invalid_argument("cannot couple an empirical law with an exact law; sample both sides");
        return empirical_msd(a, b, counter);
    }
    if (a.kind() == K::Normal && b.kind() == K::Normal) {
        const auto& x = a.components()[0];
        const auto& y = b.components()[0];
        double dm = x.mean - y.mean;
        double ds = counter ? x.sd + y.sd : x.sd - y.sd;
        return dm * dm + ds * ds;
    }
    if (a.kind() == K::Discrete && b.kind() == K::Discrete) return discrete_msd(a, b, counter);
    return quadrature_msd(a, b, counter);
}

}  // namespace

double comonotone_msd(const MarginalLaw& a, const MarginalLaw& b) { return msd(a, b, false); }

double countermonotone_msd(const MarginalLaw& a, const MarginalLaw& b) { return msd(a, b, true); }

}  // namespace cfh
