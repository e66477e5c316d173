#include "cfh/plant.hpp"
#include "cfh/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cfh {

namespace {

double mean_sq(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

void require_zero_sum(double sum, double scale, const std::string& what) {
    if (std::abs(sum) > 1e-9 * std::max(1.0, scale))
        throw std::invalid_argument("fixed-effects design violates the constraint " + what + " = 0");
}

}  // namespace

void PlantDesign::validate() const {
    if (n_x == 0 || n_r == 0) throw std::invalid_argument("plant design needs n_x >= 1 and n_r >= 1");
    if (sigma2_e < 0.0) throw std::invalid_argument("plant design variances must be nonnegative");
    if (mode == PlantMode::Random) {
        if (sigma2_g < 0.0 || sigma2_x < 0.0 || sigma2_gx < 0.0)
            throw std::invalid_argument("plant design variances must be nonnegative");
        return;
    }
    if (alpha.size() < 2) throw std::invalid_argument("fixed-effects design needs at least two genotypes");
    if (n_g != alpha.size()) throw std::invalid_argument("n_g does not match the length of alpha");
    if (beta.size() != n_x) throw std::invalid_argument("beta must have n_x entries");
    if (gamma.size() != n_g) throw std::invalid_argument("gamma must have n_g rows");
    for (const auto& row : gamma)
        if (row.size() != n_x) throw std::invalid_argument("every gamma row must have n_x entries");
    double sa = 0.0, scale = 0.0;
    for (double a : alpha) {
        sa += a;
        scale += std::abs(a);
    }
    require_zero_sum(sa, scale, "sum_g alpha(g)");
    double sb = 0.0;
    scale = 0.0;
    for (double b : beta) {
        sb += b;
        scale += std::abs(b);
    }
    require_zero_sum(sb, scale, "sum_x beta(x)");
    for (std::size_t g = 0; g < n_g; ++g) {
        double s = 0.0;
        scale = 0.0;
        for (double c : gamma[g]) {
            s += c;
            scale += std::abs(c);
        }
        require_zero_sum(s, scale, "sum_x gamma(g, x)");
    }
    for (std::size_t x = 0; x < n_x; ++x) {
        double s = 0.0;
        scale = 0.0;
        for (std::size_t g = 0; g < n_g; ++g) {
            s += gamma[g][x];
            scale += std::abs(gamma[g][x]);
        }
        require_zero_sum(s, scale, "sum_g gamma(g, x)");
    }
}

double PlantDesign::var_g() const { return mode == PlantMode::Random ? sigma2_g : mean_sq(alpha); }
double PlantDesign::var_x() const { return mode == PlantMode::Random ? sigma2_x : mean_sq(beta); }

double PlantDesign::var_gx() const {
    if (mode == PlantMode::Random) return sigma2_gx;
    std::vector<double> all;
    for (const auto& row : gamma) all.insert(all.end(), row.begin(), row.end());
    return mean_sq(all);
}

PlantDesign parse_plant_design(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("plant design is not valid JSON: ") + e.what());
    }
    PlantDesign d;
    try {
        std::string mode = j.at("mode").get<std::string>();
        if (mode == "fixed")
            d.mode = PlantMode::Fixed;
        else if (mode == "random")
            d.mode = PlantMode::Random;
        else
            throw std::invalid_argument("plant design mode must be \"fixed\" or \"random\"");
        d.n_x = j.at("n_x").get<std::size_t>();
        d.n_r = j.at("n_r").get<std::size_t>();
        d.mu = j.value("mu", 0.0);
        d.sigma2_e = j.at("sigma2_e").get<double>();
        if (d.mode == PlantMode::Fixed) {
            d.alpha = j.at("alpha").get<std::vector<double>>();
            d.beta = j.at("beta").get<std::vector<double>>();
            d.gamma = j.contains("gamma") ? j.at("gamma").get<std::vector<std::vector<double>>>()
                                          : std::vector<std::vector<double>>(d.alpha.size(),
                                                                             std::vector<double>(d.n_x, 0.0));
            d.n_g = j.value("n_g", d.alpha.size());
        } else {
            d.n_g = j.value("n_g", std::size_t{0});
            d.sigma2_g = j.at("sigma2_g").get<double>();
            d.sigma2_x = j.at("sigma2_x").get<double>();
            d.sigma2_gx = j.at("sigma2_gx").get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("plant design: ") + e.what());
    }
    d.validate();
    return d;
}

PlantDesign load_plant_design(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read plant design '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_plant_design(ss.str());
}

PlantHeritability plant_heritability(const PlantDesign& d) {
    d.validate();
    const double nx = static_cast<double>(d.n_x), nr = static_cast<double>(d.n_r);
    const double sg = d.var_g(), sx = d.var_x(), sgx = d.var_gx(), se = d.sigma2_e;
    PlantHeritability h;
    double noise = se / (nx * nr);
    if (d.mode == PlantMode::Fixed) {
        if (sg + noise <= 0.0) throw std::domain_error("degenerate plant design: entry means have zero variance");
        h.xi = sg / (sg + noise);
    } else {
        double den = sg + sx / nx + sgx / nx + noise;
        if (den <= 0.0) throw std::domain_error("degenerate plant design: entry means have zero variance");
        h.xi = (sg + sgx / nx) / den;
    }
    double hden = sg + sgx / nx + noise;
    h.h2_plant = hden > 0.0 ? sg / hden : 0.0;
    return h;
}

PlantSimulation simulate_plant(const PlantDesign& d, std::size_t replicates, std::uint64_t seed, std::size_t threads) {
    d.validate();
    constexpr std::size_t B = 10;
    if (replicates < 2 * B) throw std::invalid_argument("plant simulation needs at least 20 replicates");
    const std::size_t per = replicates / B;
    const std::size_t nx = d.n_x, nr = d.n_r;
    const bool random = d.mode == PlantMode::Random;

    // Per batch: sums for Var(D), Var(Ybar), Var(alpha), Var(Ybar - betabar).
    struct Acc {
        double d1 = 0, d2 = 0, y1 = 0, y2 = 0, a1 = 0, a2 = 0, z1 = 0, z2 = 0;
    };
    std::vector<Acc> acc(B);
    parallel_for(B, threads, [&](std::size_t b) {
        auto rng = make_stream(seed, b, 0x91A);
        std::normal_distribution<double> z(0.0, 1.0);
        std::uniform_int_distribution<std::size_t> pick(0, d.n_g > 0 ? d.n_g - 1 : 0);
        const double sde = std::sqrt(d.sigma2_e);
        Acc& A = acc[b];
        for (std::size_t r = 0; r < per; ++r) {
            double alpha_g, alpha_h, betabar = 0.0, gbar_g = 0.0, gbar_h = 0.0, ebar = 0.0;
            if (random) {
                alpha_g = std::sqrt(d.sigma2_g) * z(rng);
                alpha_h = std::sqrt(d.sigma2_g) * z(rng);
                for (std::size_t x = 0; x < nx; ++x) {
                    betabar += std::sqrt(d.sigma2_x) * z(rng);
                    gbar_g += std::sqrt(d.sigma2_gx) * z(rng);
                    gbar_h += std::sqrt(d.sigma2_gx) * z(rng);
                }
            } else {
                std::size_t g = pick(rng), h = pick(rng);
                alpha_g = d.alpha[g];
                alpha_h = d.alpha[h];
                for (std::size_t x = 0; x < nx; ++x) {
                    betabar += d.beta[x];
                    gbar_g += d.gamma[g][x];
                    gbar_h += d.gamma[h][x];
                }
            }
            for (std::size_t k = 0; k < nx * nr; ++k) ebar += sde * z(rng);
            betabar /= static_cast<double>(nx);
            gbar_g /= static_cast<double>(nx);
            gbar_h /= static_cast<double>(nx);
            ebar /= static_cast<double>(nx * nr);
            double yg = d.mu + alpha_g + betabar + gbar_g + ebar;
            double yh = d.mu + alpha_h + betabar + gbar_h + ebar;
            double diff = yg - yh;
            A.d1 += diff;
            A.d2 += diff * diff;
            A.y1 += yg;
            A.y2 += yg * yg;
            A.a1 += alpha_g;
            A.a2 += alpha_g * alpha_g;
            A.z1 += yg - betabar;
            A.z2 += (yg - betabar) * (yg - betabar);
        }
    });
    auto var = [&](double s1, double s2) {
        double n = static_cast<double>(per);
        return (s2 - s1 * s1 / n) / (n - 1.0);
    };
    std::vector<double> xs, hs;
    for (const auto& A : acc) {
        double vy = var(A.y1, A.y2);
        if (vy <= 0.0) throw std::domain_error("degenerate plant design: entry means have zero variance");
        xs.push_back(var(A.d1, A.d2) / (2.0 * vy));
        hs.push_back(var(A.a1, A.a2) / var(A.z1, A.z2));
    }
    PlantSimulation out;
    out.xi = batch_means(xs);
    if (random) out.h2_plant = batch_means(hs);
    return out;
}

}  // namespace cfh
