#include "phireg/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "phireg/detail/text.hpp"
#include "phireg/errors.hpp"
#include "phireg/estimator.hpp"
#include "phireg/inference.hpp"

namespace phireg {

using nlohmann::json;

void ExperimentPlan::validate() const {
    if (lambdas.empty()) throw ValidationError("plan needs at least one lambda");
    for (double l : lambdas) CressieReadLambda{l};
    if (nh_grid.empty()) throw ValidationError("plan needs at least one n_h");
    for (int nh : nh_grid)
        if (nh < 1) throw ValidationError("n_h values must be >= 1");
    if (replicates < 1) throw ValidationError("replicates must be >= 1");
    if (!(rho2 >= 0.0 && rho2 < 1.0)) throw ValidationError("rho2 must lie in [0, 1)");
    if (!(contamination >= 0.0 && contamination <= 1.0)) throw ValidationError("contamination must lie in [0, 1]");
    if (strata < 1 || cluster_size < 1) throw ValidationError("strata and cluster_size must be >= 1");
    if (free_categories < 1 || beta_null.empty() || static_cast<Index>(beta_null.size()) % free_categories != 0)
        throw ValidationError("beta_null length must be a multiple of free_categories");
    if (test_index < 0 || test_index >= static_cast<Index>(beta_null.size()))
        throw ValidationError("test_index out of range");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
    ContaminationSpec{contamination, permutation}.validate(free_categories + 1);
}

BetaMatrix ExperimentPlan::null_beta() const {
    const Vector flat = Eigen::Map<const Vector>(beta_null.data(), static_cast<Index>(beta_null.size()));
    return BetaMatrix::from_flat(flat, free_categories, flat.size() / free_categories);
}

BetaMatrix ExperimentPlan::alternative_beta() const {
    Vector flat = null_beta().flatten();
    flat(test_index) = alt_value;
    return BetaMatrix::from_flat(flat, free_categories, flat.size() / free_categories);
}

namespace {

const std::set<std::string> kPlanKeys{
    "lambdas", "nh_grid", "replicates", "family", "rho2", "contamination", "permutation", "strata",
    "cluster_size", "beta_null", "free_categories", "test_index", "null_value", "alt_value", "alpha",
    "run_power", "seed"};

}  // namespace

ExperimentPlan plan_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("plan is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("plan must be a JSON object");
    for (const auto& item : j.items())
        if (!kPlanKeys.count(item.key())) throw ValidationError("unknown plan field '" + item.key() + "'");

    ExperimentPlan plan;
    try {
        if (j.contains("lambdas")) plan.lambdas = j["lambdas"].get<std::vector<double>>();
        if (j.contains("nh_grid")) plan.nh_grid = j["nh_grid"].get<std::vector<int>>();
        if (j.contains("replicates")) plan.replicates = j["replicates"].get<int>();
        if (j.contains("family")) plan.family = parse_family(j["family"].get<std::string>());
        if (j.contains("rho2")) plan.rho2 = j["rho2"].get<double>();
        if (j.contains("contamination")) plan.contamination = j["contamination"].get<double>();
        if (j.contains("permutation")) plan.permutation = j["permutation"].get<std::vector<Index>>();
        if (j.contains("strata")) plan.strata = j["strata"].get<int>();
        if (j.contains("cluster_size")) plan.cluster_size = j["cluster_size"].get<int>();
        if (j.contains("beta_null")) plan.beta_null = j["beta_null"].get<std::vector<double>>();
        if (j.contains("free_categories")) plan.free_categories = j["free_categories"].get<Index>();
        if (j.contains("test_index")) plan.test_index = j["test_index"].get<Index>();
        if (j.contains("null_value")) plan.null_value = j["null_value"].get<double>();
        if (j.contains("alt_value")) plan.alt_value = j["alt_value"].get<double>();
        if (j.contains("alpha")) plan.alpha = j["alpha"].get<double>();
        if (j.contains("run_power")) plan.run_power = j["run_power"].get<bool>();
        if (j.contains("seed")) plan.seed = j["seed"].get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed plan field: ") + e.what());
    }
    plan.validate();
    return plan;
}

ExperimentPlan load_plan(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open plan '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return plan_from_json_text(buf.str());
}

std::string plan_to_json_text(const ExperimentPlan& plan) {
    json j;
    j["lambdas"] = plan.lambdas;
    j["nh_grid"] = plan.nh_grid;
    j["replicates"] = plan.replicates;
    j["family"] = to_string(plan.family);
    j["rho2"] = plan.rho2;
    j["contamination"] = plan.contamination;
    j["permutation"] = plan.permutation;
    j["strata"] = plan.strata;
    j["cluster_size"] = plan.cluster_size;
    j["beta_null"] = plan.beta_null;
    j["free_categories"] = plan.free_categories;
    j["test_index"] = plan.test_index;
    j["null_value"] = plan.null_value;
    j["alt_value"] = plan.alt_value;
    j["alpha"] = plan.alpha;
    j["run_power"] = plan.run_power;
    j["seed"] = plan.seed;
    return j.dump(2);
}

std::vector<ReplicateFit> simulate_replicate(const ExperimentPlan& plan, int nh, bool contaminated, int replicate,
                                             bool alternative) {
    SimulationDesign design;
    design.strata = plan.strata;
    design.clusters_per_stratum = nh;
    design.cluster_size = plan.cluster_size;
    design.beta = alternative ? plan.alternative_beta() : plan.null_beta();

    const std::uint64_t seed = derive_seed(
        plan.seed, {static_cast<std::uint64_t>(nh), static_cast<std::uint64_t>(replicate), alternative ? 1u : 0u});
    const auto spec = OverdispersionSpec::from_rho2(plan.family, plan.rho2, seed);
    const ContaminationSpec cont{contaminated ? plan.contamination : 0.0, plan.permutation};
    const SurveyDataset data = generate_dataset(design, spec, cont);

    const Vector truth = design.beta.flatten();
    const auto hyp = LinearHypothesis::coordinate(truth.size(), plan.test_index, plan.null_value);

    // The pseudo-likelihood fit warm-starts every other lambda.
    std::optional<BetaMatrix> pmle;
    auto fit_lambda = [&](double lambda) -> std::optional<FitResult> {
        FitConfig config;
        config.lambda = CressieReadLambda(lambda);
        if (lambda != 0.0 && pmle) {
            config.init = InitKind::user;
            config.user_init = pmle;
        } else {
            config.init = InitKind::zeros;
        }
        try {
            FitResult r = phireg::fit(data, config);
            if (lambda == 0.0 && r.converged) pmle = r.beta_hat;
            return r;
        } catch (const NumericalError&) {
            return std::nullopt;
        }
    };
    if (std::find(plan.lambdas.begin(), plan.lambdas.end(), 0.0) == plan.lambdas.end()) fit_lambda(0.0);

    std::vector<ReplicateFit> out;
    out.reserve(plan.lambdas.size());
    // Fit lambda = 0 first so the warm start exists regardless of plan order.
    std::vector<std::optional<FitResult>> fits(plan.lambdas.size());
    for (std::size_t l = 0; l < plan.lambdas.size(); ++l)
        if (plan.lambdas[l] == 0.0) fits[l] = fit_lambda(0.0);
    for (std::size_t l = 0; l < plan.lambdas.size(); ++l)
        if (plan.lambdas[l] != 0.0) fits[l] = fit_lambda(plan.lambdas[l]);

    for (const auto& f : fits) {
        ReplicateFit rep;
        if (f && f->converged) {
            try {
                const WaldReport w = wald_test(*f, hyp, plan.alpha);
                rep.statistic = w.statistic;
                rep.reject = w.reject;
                rep.squared_error = (f->beta_hat.flatten() - truth).squaredNorm();
                rep.converged = true;
            } catch (const NumericalError&) {
                rep.converged = false;
            }
        }
        out.push_back(rep);
    }
    return out;
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

std::vector<CellResult> run_experiment(const ExperimentPlan& plan, unsigned threads,
                                       const std::function<void(const std::vector<CellResult>&)>& on_cell) {
    plan.validate();
    std::vector<CellResult> results;
    const std::size_t L = plan.lambdas.size();
    const std::size_t R = static_cast<std::size_t>(plan.replicates);

    for (int nh : plan.nh_grid) {
        for (bool contaminated : {false, true}) {
            const auto start = std::chrono::steady_clock::now();
            std::vector<std::vector<ReplicateFit>> null_fits(R), alt_fits(R);
            parallel_for(R, threads, [&](std::size_t r) {
                null_fits[r] = simulate_replicate(plan, nh, contaminated, static_cast<int>(r), false);
                if (plan.run_power) alt_fits[r] = simulate_replicate(plan, nh, contaminated, static_cast<int>(r), true);
            });
            const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

            for (std::size_t l = 0; l < L; ++l) {
                CellResult cell;
                cell.lambda = plan.lambdas[l];
                cell.nh = nh;
                cell.contaminated = contaminated;
                cell.replicates = plan.replicates;
                cell.wall_time = seconds;
                double sq = 0.0;
                int ok = 0, rejects = 0;
                for (std::size_t r = 0; r < R; ++r) {  // ordered reduction
                    const ReplicateFit& f = null_fits[r][l];
                    if (!f.converged) {
                        ++cell.nonconverged_null;
                        continue;
                    }
                    ++ok;
                    sq += f.squared_error;
                    rejects += f.reject ? 1 : 0;
                }
                const double nan = std::numeric_limits<double>::quiet_NaN();
                cell.rmse = ok > 0 ? std::sqrt(sq / ok) : nan;
                cell.level = ok > 0 ? static_cast<double>(rejects) / ok : nan;
                cell.level_se = ok > 0 ? std::sqrt(cell.level * (1.0 - cell.level) / ok) : nan;
                if (plan.run_power) {
                    int ok_alt = 0, rejects_alt = 0;
                    for (std::size_t r = 0; r < R; ++r) {
                        const ReplicateFit& f = alt_fits[r][l];
                        if (!f.converged) {
                            ++cell.nonconverged_alt;
                            continue;
                        }
                        ++ok_alt;
                        rejects_alt += f.reject ? 1 : 0;
                    }
                    cell.power = ok_alt > 0 ? static_cast<double>(rejects_alt) / ok_alt : nan;
                    cell.power_se = ok_alt > 0 ? std::sqrt(cell.power * (1.0 - cell.power) / ok_alt) : nan;
                } else {
                    cell.power = cell.power_se = nan;
                }
                results.push_back(cell);
            }
            if (on_cell) on_cell(results);
        }
    }
    return results;
}

void emit_report(const std::vector<CellResult>& results, const std::string& directory) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(directory, ec);
    const fs::path dir(directory);
    std::ofstream table(dir / "results.csv");
    std::ofstream plot(dir / "plot_data.csv");
    if (!table || !plot) throw ValidationError("cannot write report files into '" + directory + "'");

    using detail::format_real;
    table << "lambda,nh,contaminated,replicates,rmse,level,level_se,power,power_se,nonconverged_null,nonconverged_alt\n";
    plot << "lambda,nh,contaminated,metric,value,nonconverged\n";
    for (const auto& c : results) {
        const std::string key = format_real(c.lambda) + ',' + std::to_string(c.nh) + ',' + (c.contaminated ? "1" : "0");
        table << key << ',' << c.replicates << ',' << format_real(c.rmse) << ',' << format_real(c.level) << ','
              << format_real(c.level_se) << ',' << format_real(c.power) << ',' << format_real(c.power_se) << ','
              << c.nonconverged_null << ',' << c.nonconverged_alt << '\n';
        plot << key << ",rmse," << format_real(c.rmse) << ',' << c.nonconverged_null << '\n';
        plot << key << ",level," << format_real(c.level) << ',' << c.nonconverged_null << '\n';
        if (!std::isnan(c.power)) plot << key << ",power," << format_real(c.power) << ',' << c.nonconverged_alt << '\n';
    }
}

}  // namespace phireg
