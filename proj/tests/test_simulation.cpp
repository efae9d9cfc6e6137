#include <doctest.h>

#include "phireg/errors.hpp"
#include "phireg/simulation.hpp"
#include "test_util.hpp"

using namespace phireg;

namespace {

ExperimentPlan tiny_plan(int R) {
    ExperimentPlan plan;
    plan.lambdas = {-0.5, 0.0};
    plan.nh_grid = {5, 10};
    plan.replicates = R;
    plan.seed = 99;
    return plan;
}

}  // namespace

TEST_SUITE("sim-harness") {

TEST_CASE("plan JSON round trip and defaults") {
    const ExperimentPlan def;
    CHECK(def.lambdas.size() == 4);
    CHECK(def.nh_grid.front() == 10);
    CHECK(def.nh_grid.back() == 60);
    CHECK(def.null_beta().coefficients()(0, 1) == -0.9);
    CHECK(def.alternative_beta().coefficients()(0, 1) == -1.5);

    auto plan = tiny_plan(3);
    plan.family = Family::random_clumped;
    plan.permutation = {1, 2, 0};
    const auto back = plan_from_json_text(plan_to_json_text(plan));
    CHECK(back.lambdas == plan.lambdas);
    CHECK(back.nh_grid == plan.nh_grid);
    CHECK(back.replicates == 3);
    CHECK(back.family == Family::random_clumped);
    CHECK(back.permutation == plan.permutation);
    CHECK(back.seed == 99);
}

TEST_CASE("plan validation") {
    CHECK_THROWS_AS(plan_from_json_text("{\"replicats\": 3}"), ValidationError);
    CHECK_THROWS_AS(plan_from_json_text("{\"replicates\": 0}"), ValidationError);
    CHECK_THROWS_AS(plan_from_json_text("{\"nh_grid\": []}"), ValidationError);
    CHECK_THROWS_AS(plan_from_json_text("{\"lambdas\": [-1.5]}"), DomainError);
    CHECK_THROWS_AS(plan_from_json_text("{\"replicates\": \"ten\"}"), ValidationError);
    CHECK_THROWS_AS(plan_from_json_text("[1, 2"), ValidationError);
    CHECK_THROWS_AS(plan_from_json_text("{\"test_index\": 6}"), ValidationError);
}

TEST_CASE("R = 2 gives one row per cell with proportions in {0, 0.5, 1}") {
    const auto plan = tiny_plan(2);
    const auto cells = run_experiment(plan, 1);
    CHECK(cells.size() == 2 * 2 * 2);
    for (const auto& c : cells) {
        CHECK(c.replicates == 2);
        const int ok = 2 - c.nonconverged_null;
        if (ok == 2) {
            CHECK((c.level == 0.0 || c.level == 0.5 || c.level == 1.0));
            CHECK(c.rmse >= 0.0);
        }
        if (2 - c.nonconverged_alt == 2) CHECK((c.power == 0.0 || c.power == 0.5 || c.power == 1.0));
    }
}

TEST_CASE("replicates are deterministic and shared across lambdas") {
    const auto plan = tiny_plan(1);
    const auto a = simulate_replicate(plan, 5, true, 0, false);
    const auto b = simulate_replicate(plan, 5, true, 0, false);
    REQUIRE(a.size() == 2);
    CHECK(a[0].statistic == b[0].statistic);
    CHECK(a[1].squared_error == b[1].squared_error);
    CHECK(a[0].statistic != a[1].statistic);
}

TEST_CASE("thread count does not change results") {
    const auto plan = tiny_plan(6);
    const auto one = run_experiment(plan, 1);
    const auto three = run_experiment(plan, 3);
    REQUIRE(one.size() == three.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
        CHECK(one[i].rmse == three[i].rmse);
        CHECK(one[i].level == three[i].level);
        CHECK(one[i].power == three[i].power);
    }
}

TEST_CASE("parallel_for visits every index once and forwards exceptions") {
    std::vector<int> hits(100, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
    CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                        if (i == 7) throw ValidationError("boom");
                    }),
                    ValidationError);
}

TEST_CASE("report files: header-only when empty, long format otherwise") {
    testutil::TempDir dir;
    emit_report({}, dir.path().string());
    CHECK(testutil::slurp(dir.file("plot_data.csv")) == "lambda,nh,contaminated,metric,value,nonconverged\n");
    CHECK(testutil::count_lines(testutil::slurp(dir.file("results.csv"))) == 1);

    CellResult c;
    c.lambda = -0.5;
    c.nh = 10;
    c.contaminated = true;
    c.replicates = 4;
    c.rmse = 0.25;
    c.level = 0.5;
    c.power = 0.75;
    c.nonconverged_null = 1;
    emit_report({c}, dir.path().string());
    const std::string plot = testutil::slurp(dir.file("plot_data.csv"));
    CHECK(plot.find("-0.5,10,1,rmse,0.25,1\n") != std::string::npos);
    CHECK(plot.find("-0.5,10,1,power,0.75,0\n") != std::string::npos);
    CHECK(testutil::count_lines(plot) == 4);
    CHECK(testutil::count_lines(testutil::slurp(dir.file("results.csv"))) == 2);
}

TEST_CASE("RMSE shrinks from n_h = 10 to n_h = 60 for clean lambda = 0") {
    ExperimentPlan plan;
    plan.lambdas = {0.0};
    plan.nh_grid = {10, 60};
    plan.replicates = 40;
    plan.run_power = false;
    const auto cells = run_experiment(plan, 0);
    double r10 = 0, r60 = 0;
    for (const auto& c : cells)
        if (!c.contaminated) (c.nh == 10 ? r10 : r60) = c.rmse;
    CHECK(r60 < r10);
}

}
