#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "test_util.hpp"

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = phireg::cli::dispatch(args, out, err);
    return {code, out.str(), err.str()};
}

}  // namespace

TEST_SUITE("cli-app") {

TEST_CASE("generate, fit, test pipeline") {
    testutil::TempDir dir;
    const auto data = dir.file("d.csv");
    REQUIRE(run({"generate", "--H", "4", "--nh", "10", "--m", "20", "--seed", "42", "--out", data, "--quiet"}).code == 0);
    const auto manifest = nlohmann::json::parse(testutil::slurp(data + ".manifest.json"));
    CHECK(manifest["seed"] == 42);
    CHECK(manifest["subcommand"] == "generate");

    const auto fit = dir.file("f.json");
    REQUIRE(run({"fit", "--data", data, "--lambda", "-0.5", "--out", fit}).code == 0);
    const auto fj = nlohmann::json::parse(testutil::slurp(fit));
    CHECK(fj["converged"] == true);
    CHECK(fj["beta_hat"].size() == 2);
    CHECK(fj["beta_flat"].size() == 6);
    CHECK(fj["V_hat"].size() == 6);
    CHECK(fj["manifest"]["inputs"].contains(data));

    testutil::spit(dir.file("M.csv"), "0\n1\n0\n0\n0\n0\n");
    testutil::spit(dir.file("m.csv"), "-0.9\n");
    const auto t = run({"test", "--fit", fit, "--M", dir.file("M.csv"), "--m", dir.file("m.csv")});
    REQUIRE(t.code == 0);
    const auto w = nlohmann::json::parse(t.out);
    CHECK(w["statistic"].get<double>() >= 0.0);
    CHECK(w["df"] == 1);
    CHECK(w["reject_at"].contains("0.05"));

    // A row-vector M file is accepted as well.
    testutil::spit(dir.file("Mrow.csv"), "0,1,0,0,0,0\n");
    const auto t2 = run({"test", "--fit", fit, "--M", dir.file("Mrow.csv"), "--m", dir.file("m.csv")});
    CHECK(nlohmann::json::parse(t2.out)["statistic"] == w["statistic"]);
}

TEST_CASE("same seed, same file") {
    testutil::TempDir dir;
    run({"generate", "--seed", "5", "--out", dir.file("a.csv"), "--quiet"});
    run({"generate", "--seed", "5", "--out", dir.file("b.csv"), "--quiet"});
    run({"generate", "--seed", "6", "--out", dir.file("c.csv"), "--quiet"});
    CHECK(testutil::slurp(dir.file("a.csv")) == testutil::slurp(dir.file("b.csv")));
    CHECK(testutil::slurp(dir.file("a.csv")) != testutil::slurp(dir.file("c.csv")));
    const auto r = run({"generate", "--out", dir.file("d.csv")});
    CHECK(r.err.find("seed: 42") != std::string::npos);
}

TEST_CASE("counts that do not sum to m exit 1 naming the row") {
    testutil::TempDir dir;
    testutil::spit(dir.file("bad.csv"), "stratum,cluster,m,y1,y2\n1,1,3,1,2\n1,2,4,1,2\n");
    const auto r = run({"fit", "--data", dir.file("bad.csv")});
    CHECK(r.code == 1);
    CHECK(r.err.find("row 3") != std::string::npos);
}

TEST_CASE("usage errors exit 1") {
    CHECK(run({}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
    const auto r = run({"fit", "--data", "x.csv", "--bogus", "1"});
    CHECK(r.code == 1);
    CHECK(r.err.find("Usage") != std::string::npos);
    CHECK(run({"fit", "--data", "/nonexistent/x.csv"}).code == 1);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("non-converged fit writes partial JSON and exits 2") {
    testutil::TempDir dir;
    run({"generate", "--seed", "3", "--out", dir.file("d.csv"), "--quiet"});
    const auto r = run({"fit", "--data", dir.file("d.csv"), "--lambda", "-0.5", "--init", "zeros", "--max-iter", "1",
                        "--tol", "1e-15", "--out", dir.file("f.json")});
    CHECK(r.code == 2);
    const auto fj = nlohmann::json::parse(testutil::slurp(dir.file("f.json")));
    CHECK(fj["converged"] == false);
    CHECK(run({"test", "--fit", dir.file("f.json"), "--M", dir.file("d.csv"), "--m", dir.file("d.csv")}).code == 1);
}

TEST_CASE("power and samplesize in scalar mode") {
    const auto p = nlohmann::json::parse(run({"power", "--ell", "0.04", "--sigma-w", "0.4", "--n", "400"}).out);
    CHECK(p["power"].get<double>() == doctest::Approx(0.93572).epsilon(1e-4));
    const auto s =
        nlohmann::json::parse(run({"samplesize", "--ell", "0.04", "--sigma-w", "0.4", "--target", "0.8"}).out);
    CHECK(s["n"] == 222);
    CHECK(run({"samplesize", "--ell", "0", "--sigma-w", "0"}).code == 1);
}

TEST_CASE("influence subcommand") {
    testutil::TempDir dir;
    run({"generate", "--seed", "8", "--out", dir.file("d.csv"), "--quiet"});
    run({"fit", "--data", dir.file("d.csv"), "--out", dir.file("f.json")});
    testutil::spit(dir.file("M.csv"), "0,1,0,0,0,0\n");
    testutil::spit(dir.file("m.csv"), "-0.9\n");
    const auto r = run({"influence", "--data", dir.file("d.csv"), "--beta", dir.file("f.json"), "--lambda", "-0.5",
                        "--stratum", "2", "--cluster", "3", "--category", "1", "--M", dir.file("M.csv"), "--m",
                        dir.file("m.csv")});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["if"].size() == 6);
    CHECK(j["if2_wald"].get<double>() >= 0.0);
    CHECK(run({"influence", "--data", dir.file("d.csv"), "--beta", dir.file("f.json"), "--stratum", "9",
               "--cluster", "3", "--category", "1"})
              .code == 1);
}

TEST_CASE("simulate with R = 10 writes one row per cell") {
    testutil::TempDir dir;
    testutil::spit(dir.file("plan.json"), R"({"replicates": 10, "nh_grid": [5, 10], "lambdas": [-0.5, 0]})");
    const auto r = run({"simulate", "--plan", dir.file("plan.json"), "--out", dir.file("res"), "--quiet"});
    REQUIRE(r.code == 0);
    CHECK(testutil::count_lines(testutil::slurp(dir.file("res/results.csv"))) == 1 + 2 * 2 * 2);
    const auto m = nlohmann::json::parse(testutil::slurp(dir.file("res/manifest.json")));
    CHECK(m["config"]["replicates"] == 10);
    CHECK(m["seed"] == 20190101);
}

}
