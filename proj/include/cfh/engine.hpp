// =============================================================================
// engine.hpp -- exact enumeration of strata and genotype cells for one or more
// phenotype models, and the moment backends every estimand is built on.
//
// A stratum fixes everything the bounds condition on: parental genotypes
// (within-family mode), sibling genotypes, and observed environment symbols
// (normal ones on Gauss-Hermite nodes). Derived symbols are computed per
// stratum. A cell is a (stratum, genotype tuple) pair.
//
// Backends answer three questions about cells, per compiled output:
//   mean(c)          E[Y | cell]
//   second(c)        E[Y^2 | cell]
//   cross(a, b, s)   E[Ya * Yb] when the latent symbols are shared per s
// plus the full conditional law of Y in a cell for the coupling bounds.
// =============================================================================
#pragma once

#include "cfh/marginal.hpp"
#include "cfh/model.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace cfh {

enum class XiLowerMethod { Quadrature, SortedSample };

struct EngineOptions {
    std::uint64_t seed = 20240917;
    std::size_t mc_n = 1'000'000;      // draws per stratum for Monte Carlo work
    std::size_t batches = 10;          // batch means for Monte Carlo standard errors
    std::size_t threads = 0;           // 0 = hardware concurrency
    std::size_t hermite_nodes = 32;    // quadrature nodes per observed normal symbol
    std::size_t max_cells = 4'000'000;
    XiLowerMethod xi_l_method = XiLowerMethod::Quadrature;
};

// PlugIn marks estimates computed from observed data.
enum class Method { Analytic, MonteCarlo, PlugIn };
std::string to_string(Method m);

struct Estimate {
    double value = 0.0;
    double se = 0.0;
    Method method = Method::Analytic;
};

// Which latent symbols two evaluations share.
enum class Sharing {
    All,         // same individual, or two potential outcomes of one individual
    FamilyOnly,  // siblings: family-role symbols shared, latent ones independent
    None,        // independent individuals
};

struct CellRef {
    std::uint32_t stratum = 0;
    std::uint32_t tuple = 0;
};

struct CompiledTerm {
    double coef = 0.0;
    std::vector<std::pair<std::uint32_t, int>> factors;  // (slot, power)
    int normal = -1;  // index into World::normals for the single linear noise factor
};

struct CompiledOutput {
    std::string label;
    bool indicator = false;
    EngineClass cls = EngineClass::LinearGaussian;
    std::vector<CompiledTerm> analytic;  // noise factor split out (not for general-mc)
    std::vector<CompiledTerm> full;      // every factor, normals as slots
};

class World {
public:
    // All models must agree on the bindings of shared symbol names and on the
    // mode. `conditioning` fixes genotype, parental, sibling, observed or
    // derived symbols; the world is then the conditional law given them.
    World(const std::vector<PhenotypeModel>& models, const EngineOptions& options,
          const std::map<std::string, double>& conditioning = {});

    struct Stratum {
        double weight = 0.0;
        std::vector<double> values;  // full slot vector with stratum slots filled
        std::vector<std::pair<std::uint32_t, double>> genos;  // (tuple, P(tuple | stratum))
        std::uint32_t parent_id = 0;
        std::uint32_t sib_id = 0;
        std::uint32_t env_id = 0;
    };

    struct Atom {
        double prob = 1.0;
        std::vector<std::pair<std::uint32_t, double>> values;  // (slot, value)
    };

    struct NormalSlot {
        std::uint32_t slot = 0;
        double mean = 0.0;
        double sd = 0.0;
        bool family = false;
    };

    struct LatentDiscrete {
        std::uint32_t slot = 0;
        std::vector<std::pair<double, double>> atoms;
        bool family = false;
    };

    FamilyMode mode = FamilyMode::Population;
    std::size_t n_slots = 0;
    std::map<std::string, std::uint32_t> slot_of;

    std::vector<std::uint32_t> geno_slots;
    std::vector<std::vector<double>> geno_support;
    std::vector<std::vector<double>> geno_marginal;  // per locus, aligned with support
    std::size_t n_tuples = 0;

    std::vector<Stratum> strata;
    std::vector<Atom> family_atoms;
    std::vector<Atom> individual_atoms;
    std::vector<NormalSlot> normals;
    std::vector<LatentDiscrete> latent_discrete;
    std::vector<CompiledOutput> outputs;
    std::vector<std::uint32_t> sibling_locus;  // locus index mirrored by each sibling slot
    std::vector<std::uint32_t> sibling_slots;
    bool has_observed = false;

    std::vector<double> tuple_values(std::uint32_t tuple) const;
    double tuple_marginal(std::uint32_t tuple) const;
    // Tuple index for the given per-locus values; throws when a value is off-support.
    std::uint32_t tuple_index(const std::vector<double>& values) const;

    // Stratum with the given parents and environment whose sibling slots hold
    // the given tuple's dosages; npos when absent.
    std::size_t sibling_stratum(std::uint32_t parent_id, std::uint32_t env_id, std::uint32_t tuple) const;
    // Stratum sharing everything except the sibling genotypes; npos when absent.
    std::size_t stratum_with_sib(std::uint32_t parent_id, std::uint32_t env_id, std::uint32_t sib_id) const;

    // Fills `vals` with the slot values of a cell plus latent discrete atoms.
    void fill(CellRef c, std::vector<double>& vals) const;

    bool needs_monte_carlo() const;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, std::uint32_t> stratum_lookup_;
};

// Gaussian form of Y's argument given all discrete symbols: mean + noise . Z
// where Z are the independent standardized normal symbols.
struct GaussForm {
    double mean = 0.0;
    std::vector<double> noise;
};

class MomentBackend {
public:
    virtual ~MomentBackend() = default;
    virtual double mean(std::size_t out, CellRef c) const = 0;
    virtual double second(std::size_t out, CellRef c) const = 0;
    virtual double cross(std::size_t oa, CellRef a, std::size_t ob, CellRef b, Sharing s) const = 0;
    virtual MarginalLaw law(std::size_t out, CellRef c) const = 0;
    virtual bool exact() const = 0;
    // Size of the common-random-number sample (0 for exact backends).
    virtual std::size_t draws() const = 0;
};

class AnalyticBackend final : public MomentBackend {
public:
    explicit AnalyticBackend(const World& world);
    double mean(std::size_t out, CellRef c) const override;
    double second(std::size_t out, CellRef c) const override;
    double cross(std::size_t oa, CellRef a, std::size_t ob, CellRef b, Sharing s) const override;
    MarginalLaw law(std::size_t out, CellRef c) const override;
    bool exact() const override { return true; }
    std::size_t draws() const override { return 0; }

    void form(std::size_t out, CellRef c, const World::Atom& fam, const World::Atom& ind, GaussForm& f) const;

private:
    const World& w_;
};

// Common random numbers: one bank of latent draws shared by every cell, plus
// an independent copy of the non-family symbols for sibling evaluations.
class DrawBank {
public:
    DrawBank(const World& world, std::size_t n, std::uint64_t seed, std::size_t threads);
    std::size_t size() const { return n_; }
    // Column of draws for latent slot k (index into World::normals then latent_discrete).
    const std::vector<double>& primary(std::size_t k) const { return primary_[k]; }
    const std::vector<double>& secondary(std::size_t k) const { return secondary_[k]; }

private:
    std::size_t n_;
    std::vector<std::vector<double>> primary_;
    std::vector<std::vector<double>> secondary_;
};

class MonteCarloBackend final : public MomentBackend {
public:
    MonteCarloBackend(const World& world, std::shared_ptr<const DrawBank> bank, std::size_t lo, std::size_t hi);
    double mean(std::size_t out, CellRef c) const override;
    double second(std::size_t out, CellRef c) const override;
    double cross(std::size_t oa, CellRef a, std::size_t ob, CellRef b, Sharing s) const override;
    MarginalLaw law(std::size_t out, CellRef c) const override;
    bool exact() const override { return false; }
    std::size_t draws() const override { return hi_ - lo_; }

    // Y over the draw range for a cell; `sibling` uses the secondary bank for
    // non-family latent symbols.
    std::shared_ptr<const std::vector<double>> values(std::size_t out, CellRef c, bool sibling) const;

private:
    const World& w_;
    std::shared_ptr<const DrawBank> bank_;
    std::size_t lo_, hi_;
    mutable std::mutex mu_;
    mutable std::unordered_map<std::uint64_t, std::shared_ptr<const std::vector<double>>> cache_;
};

// Holds a world and runs estimand functions on the right backend(s): once on
// the exact backend, or once per batch of draws with batch-means errors.
class Analysis {
public:
    Analysis(std::vector<PhenotypeModel> models, EngineOptions options,
             const std::map<std::string, double>& conditioning = {});

    const World& world() const { return *world_; }
    const EngineOptions& options() const { return options_; }
    const std::vector<PhenotypeModel>& models() const { return models_; }
    bool monte_carlo() const { return monte_carlo_; }

    using Fn = std::function<std::vector<double>(const MomentBackend&)>;
    std::vector<Estimate> run(const Fn& fn) const;
    Estimate run1(const std::function<double(const MomentBackend&)>& fn) const;

    // Backend over every draw (or the exact backend).
    const MomentBackend& full_backend() const;

private:
    std::vector<PhenotypeModel> models_;
    EngineOptions options_;
    std::unique_ptr<World> world_;
    bool monte_carlo_ = false;
    std::unique_ptr<AnalyticBackend> analytic_;
    std::shared_ptr<const DrawBank> bank_;
    mutable std::unique_ptr<MonteCarloBackend> full_mc_;
    mutable std::mutex full_mu_;
};

// Aggregates batch estimates into (mean, standard error of the mean).
Estimate batch_means(const std::vector<double>& values);

}  // namespace cfh
