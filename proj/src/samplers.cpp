#include "phireg/samplers.hpp"

#include <algorithm>
#include <cmath>

#include "phireg/errors.hpp"

namespace phireg {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

int binomial(int n, double p, Rng& rng) {
    if (n <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    return std::binomial_distribution<int>(n, p)(rng);
}

double beta_variate(double a, double b, Rng& rng) {
    const double x = std::gamma_distribution<double>(a, 1.0)(rng);
    const double y = std::gamma_distribution<double>(b, 1.0)(rng);
    if (x + y > 0.0) return x / (x + y);
    // Both gammas underflowed (tiny shapes): the beta mass sits at the ends.
    return std::bernoulli_distribution(a / (a + b))(rng) ? 1.0 : 0.0;
}

Index categorical(const Vector& pi, Rng& rng) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (Index s = 0; s + 1 < pi.size(); ++s) {
        acc += pi(s);
        if (u < acc) return s;
    }
    return pi.size() - 1;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t state = splitmix64(seed);
    for (std::uint64_t k : keys) state = splitmix64(state ^ splitmix64(k + 0x632BE59BD9B4E019ull));
    return state;
}

Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    const std::uint64_t s = derive_seed(seed, keys);
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
    return Rng(seq);
}

Family parse_family(const std::string& name) {
    if (name == "multinomial") return Family::multinomial;
    if (name == "m_inflated") return Family::m_inflated;
    if (name == "random_clumped") return Family::random_clumped;
    if (name == "dirichlet_multinomial") return Family::dirichlet_multinomial;
    throw ValidationError("unknown family '" + name +
                          "' (multinomial, m_inflated, random_clumped, dirichlet_multinomial)");
}

std::string to_string(Family family) {
    switch (family) {
        case Family::multinomial: return "multinomial";
        case Family::m_inflated: return "m_inflated";
        case Family::random_clumped: return "random_clumped";
        case Family::dirichlet_multinomial: return "dirichlet_multinomial";
    }
    return "unknown";
}

OverdispersionSpec OverdispersionSpec::from_rho2(Family family, double rho2, std::uint64_t seed) {
    if (!(rho2 >= 0.0 && rho2 < 1.0)) throw DomainError("rho^2 must lie in [0, 1)");
    return OverdispersionSpec{family, std::sqrt(rho2), seed};
}

void OverdispersionSpec::validate() const {
    if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("rho must lie in [0, 1)");
}

std::vector<Index> ContaminationSpec::resolved(Index categories) const {
    if (!permutation.empty()) return permutation;
    std::vector<Index> sigma(static_cast<std::size_t>(categories));
    for (Index c = 0; c < categories; ++c) sigma[static_cast<std::size_t>(c)] = (c + categories - 1) % categories;
    return sigma;
}

void ContaminationSpec::validate(Index categories) const {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw DomainError("contamination fraction must lie in [0, 1]");
    if (permutation.empty()) return;
    if (static_cast<Index>(permutation.size()) != categories)
        throw DimensionError("permutation arity does not match the number of categories");
    std::vector<bool> seen(permutation.size(), false);
    for (Index c : permutation) {
        if (c < 0 || c >= categories || seen[static_cast<std::size_t>(c)])
            throw ValidationError("contamination map is not a permutation");
        seen[static_cast<std::size_t>(c)] = true;
    }
}

Vector sample_multinomial(int m, const Vector& pi, Rng& rng) {
    Vector y = Vector::Zero(pi.size());
    int remaining = m;
    double mass = 1.0;
    for (Index s = 0; s + 1 < pi.size() && remaining > 0; ++s) {
        const double p = mass > 0.0 ? std::clamp(pi(s) / mass, 0.0, 1.0) : 1.0;
        const int draw = binomial(remaining, p, rng);
        y(s) = draw;
        remaining -= draw;
        mass -= pi(s);
    }
    y(pi.size() - 1) += remaining;
    return y;
}

Vector sample_cluster(const OverdispersionSpec& spec, int m, const CategoryProbs& probs, Rng& rng) {
    spec.validate();
    if (m < 1) throw DomainError("cluster size must be >= 1");
    const Vector& pi = probs.values();
    const double rho2 = spec.rho * spec.rho;

    switch (spec.family) {
        case Family::multinomial:
            return sample_multinomial(m, pi, rng);

        case Family::m_inflated: {
            if (std::bernoulli_distribution(rho2)(rng)) {
                Vector y = Vector::Zero(pi.size());
                y(categorical(pi, rng)) = m;
                return y;
            }
            return sample_multinomial(m, pi, rng);
        }

        case Family::random_clumped: {
            const Index clump = categorical(pi, rng);
            const int k1 = binomial(m, spec.rho, rng);
            Vector y = sample_multinomial(m - k1, pi, rng);
            y(clump) += k1;
            return y;
        }

        case Family::dirichlet_multinomial: {
            if (spec.rho == 0.0) return sample_multinomial(m, pi, rng);
            const double c = (1.0 - rho2) / rho2;
            const Index d = pi.size() - 1;
            Vector y = Vector::Zero(pi.size());
            int remaining = m;
            for (Index r = 0; r < d; ++r) {
                const double a1 = c * pi(r);
                const double a2 = c * pi.tail(d - r).sum();  // c (1 - sum_{l<=r} pi_l)
                const int draw = binomial(remaining, beta_variate(a1, a2, rng), rng);
                y(r) = draw;
                remaining -= draw;
            }
            y(d) = remaining;
            return y;
        }
    }
    throw DomainError("unknown overdispersion family");
}

Vector contaminate(const Vector& counts, const ContaminationSpec& spec, Rng& rng) {
    spec.validate(counts.size());
    if (spec.fraction <= 0.0) return counts;
    if (!std::bernoulli_distribution(spec.fraction)(rng)) return counts;
    const auto sigma = spec.resolved(counts.size());
    Vector out(counts.size());
    for (Index c = 0; c < counts.size(); ++c) out(sigma[static_cast<std::size_t>(c)]) = counts(c);
    return out;
}

SurveyDataset generate_dataset(const SimulationDesign& design, const OverdispersionSpec& spec,
                               const ContaminationSpec& contamination) {
    spec.validate();
    if (design.strata < 1 || design.clusters_per_stratum < 1) throw DomainError("design needs H >= 1 and n_h >= 1");
    const Index total = static_cast<Index>(design.strata) * design.clusters_per_stratum;
    if (!design.cluster_sizes.empty() && static_cast<Index>(design.cluster_sizes.size()) != total)
        throw DimensionError("per-cluster size list must have H * n_h entries");
    if (design.beta.size() == 0) throw DimensionError("design has no beta");
    const Index categories = design.beta.free_categories() + 1;
    const Index k1 = design.beta.covariates();
    contamination.validate(categories);

    std::vector<ClusterRecord> records;
    records.reserve(static_cast<std::size_t>(total));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::size_t position = 0;
    for (int h = 1; h <= design.strata; ++h) {
        for (int i = 1; i <= design.clusters_per_stratum; ++i, ++position) {
            Rng rng = substream(spec.seed, {static_cast<std::uint64_t>(h), static_cast<std::uint64_t>(i), 0});
            ClusterRecord rec;
            rec.stratum = h;
            rec.cluster = i;
            rec.weight = 1.0;
            rec.size = design.cluster_sizes.empty() ? design.cluster_size : design.cluster_sizes[position];
            rec.covariates.resize(k1);
            rec.covariates(0) = 1.0;
            for (Index j = 1; j < k1; ++j) rec.covariates(j) = normal(rng);
            rec.counts = sample_cluster(spec, rec.size, link(design.beta, rec.covariates), rng);
            if (contamination.fraction > 0.0) {
                Rng crng = substream(spec.seed, {static_cast<std::uint64_t>(h), static_cast<std::uint64_t>(i), 1});
                rec.counts = contaminate(rec.counts, contamination, crng);
            }
            records.push_back(std::move(rec));
        }
    }
    return SurveyDataset(std::move(records));
}

}  // namespace phireg
