#include "cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "phireg/detail/text.hpp"
#include "phireg/errors.hpp"
#include "phireg/estimator.hpp"
#include "phireg/inference.hpp"
#include "phireg/json_io.hpp"
#include "phireg/robustness.hpp"
#include "phireg/samplers.hpp"
#include "phireg/simulation.hpp"
#include "phireg/survey_data.hpp"

namespace phireg::cli {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::uint64_t kDefaultSeed = 42;

struct Globals {
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    bool quiet = false;
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Plain numeric CSV, no header.
Matrix read_numeric_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        std::vector<double> values;
        for (auto field : detail::split_commas(line)) {
            double v = 0.0;
            if (!detail::parse_real(field, v))
                throw ParseError(row, "'" + std::string(field) + "' is not a number in " + path);
            values.push_back(v);
        }
        if (!rows.empty() && values.size() != rows.front().size())
            throw ParseError(row, "row length differs from the first row in " + path);
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw ValidationError("'" + path + "' holds no numbers");
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
    return m;
}

// M is stored parameters x r; a file written as r x parameters is accepted too.
LinearHypothesis read_hypothesis(const std::string& m_path, const std::string& rhs_path, Index parameters) {
    Matrix M = read_numeric_csv(m_path);
    if (M.rows() != parameters && M.cols() == parameters) M.transposeInPlace();
    if (M.rows() != parameters)
        throw DimensionError("M has " + std::to_string(M.rows()) + " rows, expected " + std::to_string(parameters));
    const Matrix rhs = read_numeric_csv(rhs_path);
    const Vector m = Eigen::Map<const Vector>(rhs.data(), rhs.size());
    return LinearHypothesis(M, m);
}

// Inline JSON ("[[...]]") or a file; a fit file contributes its beta_hat.
json read_json_arg(const std::string& arg) {
    const auto first = arg.find_first_not_of(" \t");
    const std::string text = (first != std::string::npos && (arg[first] == '[' || arg[first] == '{'))
                                 ? arg
                                 : read_text(arg);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError("'" + arg + "' is not valid JSON: " + e.what());
    }
}

BetaMatrix read_beta(const std::string& arg, Index free_categories, Index covariates) {
    json j = read_json_arg(arg);
    if (j.is_object()) {
        if (!j.contains("beta_hat")) throw ValidationError("JSON object for beta needs a beta_hat field");
        j = j["beta_hat"];
    }
    return BetaMatrix(matrix_from_json(j.dump(), free_categories, covariates));
}

std::optional<Matrix> read_v_from(const std::string& arg, Index parameters) {
    if (arg.empty()) return std::nullopt;
    json j = read_json_arg(arg);
    if (j.is_object()) {
        if (!j.contains("V_hat")) throw ValidationError("JSON object for V needs a V_hat field");
        j = j["V_hat"];
    }
    return matrix_from_json(j.dump(), parameters, parameters);
}

void emit(const json& doc, const std::string& out_path, std::ostream& out) {
    if (out_path.empty() || out_path == "-")
        out << doc.dump(2) << '\n';
    else
        write_text(out_path, doc.dump(2));
}

json manifest_json(const RunManifest& m) { return json::parse(m.to_json()); }

void add_input(RunManifest& m, const std::string& path) {
    if (!path.empty() && std::filesystem::is_regular_file(path)) m.inputs.emplace_back(path, file_digest(path));
}

InitKind parse_init(const std::string& s) {
    if (s == "zeros") return InitKind::zeros;
    if (s == "pmle") return InitKind::pmle_first;
    throw ValidationError("--init must be zeros or pmle");
}

GScore parse_gscore(const std::string& s) {
    if (s == "kl") return GScore::kl;
    if (s == "lambda") return GScore::lambda;
    throw ValidationError("--g-score must be kl or lambda");
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Minimum phi-divergence estimation and Wald-type tests for clustered multinomial survey data",
                 "phireg"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "Random seed for stochastic subcommands");
    app.add_option("--threads", g.threads, "Worker threads (0 = available parallelism)");
    app.add_flag("--quiet", g.quiet, "Suppress progress and diagnostics on stderr");

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "Fit the minimum Cressie-Read divergence estimator");
    fit_cmd->fallthrough();
    std::string fit_data, fit_out, fit_init = "pmle", fit_gscore = "kl";
    double fit_lambda = 0.0, fit_tol = 1e-8;
    int fit_max_iter = 200;
    fit_cmd->add_option("--data", fit_data, "Survey CSV")->required();
    fit_cmd->add_option("--lambda", fit_lambda, "Cressie-Read lambda (> -1)");
    fit_cmd->add_option("--init", fit_init, "zeros | pmle");
    fit_cmd->add_option("--tol", fit_tol, "Score norm tolerance");
    fit_cmd->add_option("--max-iter", fit_max_iter, "Newton iteration cap");
    fit_cmd->add_option("--g-score", fit_gscore, "Score inside G: kl | lambda");
    fit_cmd->add_option("--out", fit_out, "Output JSON (default stdout)");

    // test
    auto* test_cmd = app.add_subcommand("test", "Wald-type test of M'beta = m from a fit");
    test_cmd->fallthrough();
    std::string test_fit, test_M, test_m, test_out;
    double test_alpha = 0.05;
    test_cmd->add_option("--fit", test_fit, "Fit JSON")->required();
    test_cmd->add_option("--M", test_M, "Hypothesis matrix CSV (parameters x r)")->required();
    test_cmd->add_option("--m", test_m, "Right-hand side CSV (r values)")->required();
    test_cmd->add_option("--alpha", test_alpha, "Significance level");
    test_cmd->add_option("--out", test_out, "Output JSON (default stdout)");

    // power and samplesize share their inputs
    struct PlanningArgs {
        std::string beta, M, m, fit, V, out;
        double alpha = 0.05;
        std::optional<double> ell, sigma_w;
        double df = 1.0;
    };
    auto add_planning = [](CLI::App* cmd, PlanningArgs& a) {
        cmd->fallthrough();
        cmd->add_option("--beta", a.beta, "Alternative beta0 (JSON file or inline)");
        cmd->add_option("--M", a.M, "Hypothesis matrix CSV");
        cmd->add_option("--m", a.m, "Right-hand side CSV");
        cmd->add_option("--fit", a.fit, "Fit JSON supplying V_hat");
        cmd->add_option("--V", a.V, "Covariance JSON (overrides --fit)");
        cmd->add_option("--alpha", a.alpha, "Significance level");
        cmd->add_option("--ell", a.ell, "ell* directly (scalar mode)");
        cmd->add_option("--sigma-w", a.sigma_w, "sigma_W directly (scalar mode)");
        cmd->add_option("--df", a.df, "Hypothesis rank r (scalar mode)");
        cmd->add_option("--out", a.out, "Output JSON (default stdout)");
    };
    auto* power_cmd = app.add_subcommand("power", "Approximate power at a fixed alternative");
    PlanningArgs power_args;
    Index power_n = 0;
    add_planning(power_cmd, power_args);
    power_cmd->add_option("--n", power_n, "Number of clusters")->required();

    auto* ss_cmd = app.add_subcommand("samplesize", "Clusters needed for a target power");
    PlanningArgs ss_args;
    double ss_target = 0.8;
    add_planning(ss_cmd, ss_args);
    ss_cmd->add_option("--target", ss_target, "Target power pi0");

    // influence
    auto* inf_cmd = app.add_subcommand("influence", "Influence function under point contamination of one cluster");
    inf_cmd->fallthrough();
    std::string inf_data, inf_beta, inf_M, inf_m, inf_V, inf_out;
    double inf_lambda = 0.0;
    long inf_stratum = 0, inf_cluster = 0;
    Index inf_category = 1;
    inf_cmd->add_option("--data", inf_data, "Survey CSV")->required();
    inf_cmd->add_option("--beta", inf_beta, "beta0 as JSON, or a fit JSON")->required();
    inf_cmd->add_option("--lambda", inf_lambda, "Cressie-Read lambda");
    inf_cmd->add_option("--stratum", inf_stratum, "Stratum label h")->required();
    inf_cmd->add_option("--cluster", inf_cluster, "Cluster label i")->required();
    inf_cmd->add_option("--category", inf_category, "Contaminating category s (1-based)")->required();
    inf_cmd->add_option("--M", inf_M, "Hypothesis matrix CSV for the Wald influence");
    inf_cmd->add_option("--m", inf_m, "Right-hand side CSV");
    inf_cmd->add_option("--V", inf_V, "Covariance JSON (default: fit V_hat or the sandwich at beta0)");
    inf_cmd->add_option("--out", inf_out, "Output JSON (default stdout)");

    // generate
    auto* gen_cmd = app.add_subcommand("generate", "Draw a synthetic stratified cluster dataset");
    gen_cmd->fallthrough();
    int gen_H = 4, gen_nh = 10, gen_m = 20;
    std::string gen_beta, gen_family = "m_inflated", gen_out;
    double gen_rho2 = 0.5, gen_cont = 0.0;
    gen_cmd->add_option("--H", gen_H, "Strata");
    gen_cmd->add_option("--nh", gen_nh, "Clusters per stratum");
    gen_cmd->add_option("--m", gen_m, "Cluster size");
    gen_cmd->add_option("--beta", gen_beta, "beta as JSON (file or inline); default is the simulation null");
    gen_cmd->add_option("--family", gen_family, "multinomial | m_inflated | random_clumped | dirichlet_multinomial");
    gen_cmd->add_option("--rho2", gen_rho2, "Intra-cluster correlation rho^2");
    gen_cmd->add_option("--contaminate", gen_cont, "Contamination fraction");
    gen_cmd->add_option("--out", gen_out, "Output CSV")->required();

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Run a Monte Carlo experiment plan");
    sim_cmd->fallthrough();
    std::string sim_plan, sim_out;
    std::optional<int> sim_replicates;
    sim_cmd->add_option("--plan", sim_plan, "Plan JSON")->required();
    sim_cmd->add_option("--out", sim_out, "Output directory")->required();
    sim_cmd->add_option("--replicates", sim_replicates, "Override the plan's R");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }
    if (*seed_opt) g.seed = seed_value;

    const auto start = Clock::now();
    auto note = [&](const std::string& msg) {
        if (!g.quiet) err << msg << '\n';
    };

    try {
        if (*fit_cmd) {
            const SurveyDataset data = load_dataset(fit_data);
            FitConfig config;
            config.lambda = CressieReadLambda(fit_lambda);
            config.init = parse_init(fit_init);
            config.gradient_tolerance = fit_tol;
            config.max_iterations = fit_max_iter;
            config.g_score = parse_gscore(fit_gscore);
            const FitResult result = fit(data, config);

            RunManifest m;
            m.subcommand = "fit";
            m.config_json = json{{"lambda", fit_lambda}, {"init", fit_init}, {"tol", fit_tol},
                                 {"max_iter", fit_max_iter}, {"g_score", fit_gscore}}
                                .dump();
            add_input(m, fit_data);
            m.timings.emplace_back("total", seconds_since(start));
            json doc = json::parse(fit_to_json(result));
            doc["manifest"] = manifest_json(m);
            emit(doc, fit_out, out);
            for (const auto& w : result.warnings) note("warning: " + w);
            if (!result.converged) {
                err << "error: fit did not converge after " << result.iterations
                    << " iterations (score norm " << result.score_norm << ")\n";
                return 2;
            }
            return 0;
        }

        if (*test_cmd) {
            const FitResult f = load_fit(test_fit);
            const LinearHypothesis hyp = read_hypothesis(test_M, test_m, f.beta_hat.size());
            const WaldReport report = wald_test(f, hyp, test_alpha);
            RunManifest m;
            m.subcommand = "test";
            m.config_json = json{{"alpha", test_alpha}}.dump();
            add_input(m, test_fit);
            add_input(m, test_M);
            add_input(m, test_m);
            m.timings.emplace_back("total", seconds_since(start));
            json doc = json::parse(wald_to_json(report));
            doc["manifest"] = manifest_json(m);
            emit(doc, test_out, out);
            return 0;
        }

        if (*power_cmd || *ss_cmd) {
            const bool is_power = power_cmd->parsed();
            const PlanningArgs& a = is_power ? power_args : ss_args;
            json doc;
            doc["alpha"] = a.alpha;
            double ell = 0.0, sigma_w = 0.0, df = a.df;
            if (a.ell && a.sigma_w) {
                ell = *a.ell;
                sigma_w = *a.sigma_w;
            } else {
                if (a.beta.empty() || a.M.empty() || a.m.empty())
                    throw ValidationError("give --ell and --sigma-w, or --beta, --M, --m and a V source");
                std::optional<FitResult> f;
                if (!a.fit.empty()) f = load_fit(a.fit);
                const json bj = read_json_arg(a.beta);
                const Matrix bm = matrix_from_json((bj.is_object() ? bj.at("beta_hat") : bj).dump());
                const BetaMatrix beta0(bm.cols() == 1 && f ? Matrix(BetaMatrix::from_flat(
                                                                 bm.col(0), f->beta_hat.free_categories(),
                                                                 f->beta_hat.covariates())
                                                                 .coefficients())
                                                           : bm);
                const Index p = beta0.size();
                std::optional<Matrix> V = read_v_from(a.V, p);
                if (!V && f) V = f->V_hat;
                if (!V) throw ValidationError("no covariance source: give --V or --fit");
                if (V->rows() != p) throw DimensionError("V does not match the size of beta");
                const LinearHypothesis hyp = read_hypothesis(a.M, a.m, p);
                ell = ell_star(beta0.flatten(), hyp, *V);
                sigma_w = std::sqrt(sigma_w_sq(beta0.flatten(), hyp, *V));
                df = static_cast<double>(hyp.rank());
            }
            doc["ell_star"] = ell;
            doc["sigma_w"] = sigma_w;
            doc["df"] = df;
            RunManifest m;
            m.subcommand = is_power ? "power" : "samplesize";
            add_input(m, a.fit);
            add_input(m, a.M);
            add_input(m, a.m);
            if (is_power) {
                doc["n"] = power_n;
                doc["power"] = approximate_power(ell, sigma_w, df, power_n, a.alpha);
                m.config_json = json{{"alpha", a.alpha}, {"n", power_n}}.dump();
            } else {
                doc["target_power"] = ss_target;
                const Index n = required_sample_size(ell, sigma_w, df, a.alpha, ss_target);
                doc["n"] = n;
                doc["power_at_n"] = approximate_power(ell, sigma_w, df, n, a.alpha);
                m.config_json = json{{"alpha", a.alpha}, {"target_power", ss_target}}.dump();
            }
            m.timings.emplace_back("total", seconds_since(start));
            doc["manifest"] = manifest_json(m);
            emit(doc, a.out, out);
            return 0;
        }

        if (*inf_cmd) {
            const SurveyDataset data = load_dataset(inf_data);
            const BetaMatrix beta0 = read_beta(inf_beta, data.num_categories() - 1, data.num_covariates());
            const CressieReadLambda lambda(inf_lambda);
            if (inf_category < 1 || inf_category > data.num_categories())
                throw ValidationError("--category must lie in 1.." + std::to_string(data.num_categories()));
            const auto point =
                ContaminationPoint::at_category(inf_stratum, inf_cluster, data.num_categories(), inf_category - 1);

            std::optional<LinearHypothesis> hyp;
            std::optional<Matrix> V;
            if (!inf_M.empty() || !inf_m.empty()) {
                if (inf_M.empty() || inf_m.empty()) throw ValidationError("--M and --m go together");
                hyp = read_hypothesis(inf_M, inf_m, beta0.size());
                V = read_v_from(inf_V, beta0.size());
                if (!V) {
                    const json bj = read_json_arg(inf_beta);
                    if (bj.is_object() && bj.contains("V_hat"))
                        V = matrix_from_json(bj["V_hat"].dump(), beta0.size(), beta0.size());
                }
                if (!V) V = sandwich(j_hat(data, beta0), g_hat(data, beta0));
            }
            const InfluenceReport report =
                influence(data, beta0, lambda, point, hyp ? &*hyp : nullptr, V ? &*V : nullptr);
            RunManifest m;
            m.subcommand = "influence";
            m.config_json = json{{"lambda", inf_lambda}, {"stratum", inf_stratum}, {"cluster", inf_cluster},
                                 {"category", inf_category}}
                                .dump();
            add_input(m, inf_data);
            add_input(m, inf_beta);
            m.timings.emplace_back("total", seconds_since(start));
            json doc = json::parse(influence_to_json(report, inf_lambda));
            doc["manifest"] = manifest_json(m);
            emit(doc, inf_out, out);
            return 0;
        }

        if (*gen_cmd) {
            const std::uint64_t seed = g.seed.value_or(kDefaultSeed);
            if (!g.seed) note("seed: " + std::to_string(seed) + " (default)");
            SimulationDesign design;
            design.strata = gen_H;
            design.clusters_per_stratum = gen_nh;
            design.cluster_size = gen_m;
            if (gen_H < 1 || gen_nh < 1 || gen_m < 1) throw ValidationError("--H, --nh and --m must be >= 1");
            design.beta = gen_beta.empty() ? ExperimentPlan{}.null_beta()
                                           : BetaMatrix(matrix_from_json(read_json_arg(gen_beta).dump()));
            if (design.beta.free_categories() < 1) throw DimensionError("beta needs at least one row");
            const auto spec = OverdispersionSpec::from_rho2(parse_family(gen_family), gen_rho2, seed);
            const ContaminationSpec cont{gen_cont, {}};
            const SurveyDataset data = generate_dataset(design, spec, cont);
            save_dataset(gen_out, data);

            const Vector flat = design.beta.flatten();
            RunManifest m;
            m.subcommand = "generate";
            m.seed = seed;
            m.config_json = json{{"H", gen_H}, {"nh", gen_nh}, {"m", gen_m}, {"family", gen_family},
                                 {"rho2", gen_rho2}, {"contaminate", gen_cont},
                                 {"beta", std::vector<double>(flat.data(), flat.data() + flat.size())},
                                 {"free_categories", design.beta.free_categories()}}
                                .dump();
            m.timings.emplace_back("total", seconds_since(start));
            write_text(gen_out + ".manifest.json", m.to_json());
            return 0;
        }

        if (*sim_cmd) {
            ExperimentPlan plan = load_plan(sim_plan);
            if (g.seed) plan.seed = *g.seed;
            if (sim_replicates) plan.replicates = *sim_replicates;
            plan.validate();
            std::filesystem::create_directories(sim_out);
            const auto results = run_experiment(plan, g.threads, [&](const std::vector<CellResult>& so_far) {
                emit_report(so_far, sim_out);
                if (!so_far.empty())
                    note("n_h=" + std::to_string(so_far.back().nh) +
                         (so_far.back().contaminated ? " contaminated" : " clean") + " done");
            });
            emit_report(results, sim_out);

            RunManifest m;
            m.subcommand = "simulate";
            m.seed = plan.seed;
            m.config_json = plan_to_json_text(plan);
            add_input(m, sim_plan);
            double total_cell = 0.0;
            for (std::size_t c = 0; c < results.size(); c += plan.lambdas.size()) total_cell += results[c].wall_time;
            m.timings.emplace_back("cells", total_cell);
            m.timings.emplace_back("total", seconds_since(start));
            write_text((std::filesystem::path(sim_out) / "manifest.json").string(), m.to_json());
            return 0;
        }
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        if (const auto* rd = dynamic_cast<const RankDeficiencyError*>(&e)) {
            std::ostringstream dir;
            dir << rd->null_direction().transpose();
            err << "null direction: " << dir.str() << '\n';
        }
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    err << app.help();
    return 1;
}

int dispatch(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return dispatch(args, std::cout, std::cerr);
}

}  // namespace phireg::cli
