#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

#include "phireg/model.hpp"
#include "phireg/survey_data.hpp"

namespace phireg {

using Rng = std::mt19937_64;

/// Mixes `seed` with `keys` (SplitMix64 finaliser) into an independent seed.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

/// Generator for the substream keyed by `keys`, e.g. (h, i) for one cluster.
Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

enum class Family { multinomial, m_inflated, random_clumped, dirichlet_multinomial };

Family parse_family(const std::string& name);
std::string to_string(Family family);

/// Overdispersed multinomial family with intra-cluster correlation rho;
/// Cov(y) = nu m Delta(pi), nu = 1 + rho^2 (m - 1).
struct OverdispersionSpec {
    Family family = Family::multinomial;
    double rho = 0.0;
    std::uint64_t seed = 0;

    static OverdispersionSpec from_rho2(Family family, double rho2, std::uint64_t seed);
    void validate() const;
    double nu(int m) const { return 1.0 + rho * rho * (m - 1); }
};

/// Whole-cluster relabelling: with probability `fraction` the count at
/// category c moves to category permutation[c] (zero-based).
struct ContaminationSpec {
    double fraction = 0.0;
    /// Empty means the cyclic default c -> c - 1 (mod d+1); for three
    /// categories, 1, 2, 3 become 3, 1, 2.
    std::vector<Index> permutation;

    std::vector<Index> resolved(Index categories) const;
    void validate(Index categories) const;
};

Vector sample_multinomial(int m, const Vector& pi, Rng& rng);

/// One cluster's count vector of size m. Dirichlet-multinomial with rho = 0
/// falls back to the plain multinomial.
Vector sample_cluster(const OverdispersionSpec& spec, int m, const CategoryProbs& pi, Rng& rng);

Vector contaminate(const Vector& counts, const ContaminationSpec& spec, Rng& rng);

/// Stratified design with iid standard normal covariates (intercept prepended)
/// and unit weights.
struct SimulationDesign {
    int strata = 4;
    int clusters_per_stratum = 10;
    int cluster_size = 20;
    /// Optional per-cluster sizes in (h, i) order; overrides cluster_size.
    std::vector<int> cluster_sizes;
    BetaMatrix beta;
};

/// Reproducible dataset: cluster (h, i) draws covariates and counts from
/// substream (seed, h, i) and its contamination from a separate substream, so
/// the clean counts do not depend on the contamination setting.
SurveyDataset generate_dataset(const SimulationDesign& design, const OverdispersionSpec& spec,
                               const ContaminationSpec& contamination);

}  // namespace phireg
