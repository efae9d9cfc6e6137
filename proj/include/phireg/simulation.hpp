#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "phireg/model.hpp"
#include "phireg/samplers.hpp"

namespace phireg {

/// Monte Carlo plan: for each n_h and each of the clean / contaminated
/// settings, `replicates` datasets are drawn under the null beta and under
/// the alternative, and every lambda is fitted to the same datasets.
struct ExperimentPlan {
    std::vector<double> lambdas{-0.5, -0.3, 0.0, 2.0 / 3.0};
    std::vector<int> nh_grid{10, 20, 30, 40, 50, 60};
    int replicates = 1000;
    Family family = Family::m_inflated;
    double rho2 = 0.5;
    /// Contamination fraction of the contaminated cells.
    double contamination = 0.1;
    std::vector<Index> permutation;
    int strata = 4;
    int cluster_size = 20;
    /// Null beta, flattened row-major, with `free_categories` rows.
    std::vector<double> beta_null{0.0, -0.9, 0.1, 0.6, -1.2, 0.8};
    Index free_categories = 2;
    /// Tested coordinate of the flattened beta, its null value and the value
    /// used to generate the power datasets.
    Index test_index = 1;
    double null_value = -0.9;
    double alt_value = -1.5;
    double alpha = 0.05;
    bool run_power = true;
    std::uint64_t seed = 20190101;

    void validate() const;
    BetaMatrix null_beta() const;
    BetaMatrix alternative_beta() const;
};

ExperimentPlan load_plan(const std::string& path);
ExperimentPlan plan_from_json_text(const std::string& text);
std::string plan_to_json_text(const ExperimentPlan& plan);

struct CellResult {
    double lambda = 0.0;
    int nh = 0;
    bool contaminated = false;
    int replicates = 0;
    double rmse = 0.0;
    double level = 0.0;
    double level_se = 0.0;
    double power = 0.0;
    double power_se = 0.0;
    int nonconverged_null = 0;
    int nonconverged_alt = 0;
    double wall_time = 0.0;
};

/// Outcome of fitting one lambda to one replicate dataset.
struct ReplicateFit {
    bool converged = false;
    double squared_error = 0.0;  // ||beta_hat - beta_true||^2
    double statistic = 0.0;      // Wald statistic for the plan's hypothesis
    bool reject = false;
};

/// Fits every plan lambda to replicate `replicate` of cell (nh, contaminated).
/// `alternative` selects the power dataset. Deterministic in its arguments.
std::vector<ReplicateFit> simulate_replicate(const ExperimentPlan& plan, int nh, bool contaminated, int replicate,
                                             bool alternative);

/// Runs fn(0) .. fn(count-1) on `threads` workers (0 = hardware concurrency).
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

/// All cells in (n_h, contaminated, lambda) order. `on_cell` sees the
/// results accumulated so far after each (n_h, contaminated) block.
std::vector<CellResult> run_experiment(const ExperimentPlan& plan, unsigned threads = 0,
                                       const std::function<void(const std::vector<CellResult>&)>& on_cell = {});

/// Writes `results.csv` (one row per cell) and `plot_data.csv` (long format:
/// lambda, nh, contaminated, metric, value, nonconverged) into `directory`.
void emit_report(const std::vector<CellResult>& results, const std::string& directory);

}  // namespace phireg
