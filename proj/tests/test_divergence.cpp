#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "phireg/divergence.hpp"
#include "phireg/errors.hpp"

using namespace phireg;

namespace {

double numeric_divergence(double lambda, const SurveyDataset& data, const Vector& b, Index d, Index k1) {
    return divergence(CressieReadLambda(lambda), data, BetaMatrix::from_flat(b, d, k1));
}

}  // namespace

TEST_SUITE("divergence") {

TEST_CASE("lambda must exceed -1") {
    CHECK_THROWS_AS(CressieReadLambda(-1.0), DomainError);
    CHECK_THROWS_AS(CressieReadLambda(std::nan("")), DomainError);
    CHECK(CressieReadLambda(0.0).is_kl());
    CHECK_FALSE(CressieReadLambda(-0.5).is_kl());
}

TEST_CASE("phi at hand-computed points") {
    // lambda = 1: (x - 1)^2 / 2
    CHECK(phi(CressieReadLambda(1.0), 3.0) == doctest::Approx(2.0));
    // lambda = -0.5: 2 (sqrt(x) - 1)^2
    CHECK(phi(CressieReadLambda(-0.5), 4.0) == doctest::Approx(2.0));
    // lambda = 0: x log x - x + 1
    CHECK(phi(CressieReadLambda(0.0), 2.0) == doctest::Approx(2 * std::log(2.0) - 1));
    for (double l : {-0.5, -0.3, 0.0, 2.0 / 3.0, 1.0}) {
        CHECK(phi(CressieReadLambda(l), 1.0) == doctest::Approx(0.0));
        CHECK(phi(CressieReadLambda(l), 0.0) == doctest::Approx(1.0 / (1.0 + l)));
    }
    CHECK_THROWS_AS(phi(CressieReadLambda(0.5), -1.0), DomainError);
}

TEST_CASE("phi is continuous at lambda = 0") {
    for (double x : {0.0, 0.3, 1.7, 12.0})
        CHECK(phi(CressieReadLambda(1e-9), x) == doctest::Approx(phi(CressieReadLambda(0.0), x)).epsilon(1e-7));
}

TEST_CASE("generator derivatives and phi''(1) = 1") {
    for (double l : {-0.5, 0.0, 2.0 / 3.0}) {
        const auto g = cressie_read_generator(CressieReadLambda(l));
        CHECK(g.second_derivative_at_one == doctest::Approx(1.0));
        const double x = 1.7, h = 1e-6;
        CHECK(g.derivative(x) == doctest::Approx((g.value(x + h) - g.value(x - h)) / (2 * h)).epsilon(1e-7));
    }
}

TEST_CASE("KL and Pearson members match direct formulas") {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 5; ++t) {
        const auto b = oracle::random_beta(rng, 2, 1);
        const auto data = oracle::random_dataset(rng, 2, 1, 25, b);
        const auto at = oracle::random_beta(rng, 2, 1);
        CHECK(divergence(CressieReadLambda(0.0), data, BetaMatrix(at)) ==
              doctest::Approx(oracle::kl_divergence(data, at)).epsilon(1e-12));
        CHECK(divergence(CressieReadLambda(1.0), data, BetaMatrix(at)) ==
              doctest::Approx(oracle::pearson_divergence(data, at)).epsilon(1e-12));
    }
}

TEST_CASE("lambda = 0 estimating function is w (y* - m pi*) (x) x") {
    std::mt19937_64 rng(8);
    const auto b = oracle::random_beta(rng, 2, 2);
    const auto data = oracle::random_dataset(rng, 2, 2, 10, b);
    for (const auto& rec : data.records()) {
        const Vector u = estimating_function_cluster(CressieReadLambda(0.0), rec, BetaMatrix(b));
        const auto pi = oracle::softmax_baseline(b, rec.covariates);
        for (Index r = 0; r < 2; ++r)
            for (Index j = 0; j < 3; ++j)
                CHECK(u(r * 3 + j) == doctest::Approx(rec.weight * (rec.counts(r) - rec.size * pi(r)) *
                                                      rec.covariates(j)));
    }
}

TEST_CASE("summed estimating function is -tau times the divergence gradient") {
    std::mt19937_64 rng(99);
    for (double l : {-0.5, -0.3, 0.0, 0.5, 2.0 / 3.0, 1.0}) {
        const auto b0 = oracle::random_beta(rng, 2, 2);
        const auto data = oracle::random_dataset(rng, 2, 2, 30, b0);
        const Vector at = oracle::flat(oracle::random_beta(rng, 2, 2, 0.5));
        const Vector u = estimating_function(CressieReadLambda(l), data, BetaMatrix::from_flat(at, 2, 3));
        const double h = 1e-5;
        for (Index q = 0; q < at.size(); ++q) {
            Vector up = at, dn = at;
            up(q) += h;
            dn(q) -= h;
            const double grad =
                (numeric_divergence(l, data, up, 2, 3) - numeric_divergence(l, data, dn, 2, 3)) / (2 * h);
            CHECK(u(q) == doctest::Approx(-data.tau() * grad).epsilon(1e-6));
        }
    }
}

TEST_CASE("Cressie-Read and general phi forms agree") {
    std::mt19937_64 rng(4);
    const auto b = oracle::random_beta(rng, 2, 1);
    const auto data = oracle::random_dataset(rng, 2, 1, 12, b, 2, 2, 6);  // small m, zero counts likely
    for (double l : {-0.5, 0.0, 0.5, 2.0 / 3.0, 1.0}) {
        const auto gen = cressie_read_generator(CressieReadLambda(l));
        for (const auto& rec : data.records()) {
            const Vector a = estimating_function_cluster(CressieReadLambda(l), rec, BetaMatrix(b));
            const Vector g = estimating_function_cluster_generic(gen, rec, BetaMatrix(b));
            CHECK((a - g).norm() <= 1e-10 * (1.0 + a.norm()));
        }
    }
}

TEST_CASE("divergence vanishes when counts equal their expectation") {
    std::mt19937_64 rng(6);
    const auto b = oracle::random_beta(rng, 1, 1);
    auto data = oracle::random_dataset(rng, 1, 1, 8, b);
    std::vector<ClusterRecord> recs = data.records();
    for (auto& r : recs) r.counts = r.size * oracle::softmax_baseline(b, r.covariates);
    const SurveyDataset exact(recs);
    for (double l : {-0.5, 0.0, 1.0}) {
        CHECK(std::abs(divergence(CressieReadLambda(l), exact, BetaMatrix(b))) < 1e-13);
        CHECK(estimating_function(CressieReadLambda(l), exact, BetaMatrix(b)).norm() < 1e-11);
    }
}

}
