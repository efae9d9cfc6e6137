#pragma once

#include <optional>
#include <string>
#include <vector>

#include "phireg/divergence.hpp"
#include "phireg/model.hpp"
#include "phireg/survey_data.hpp"

namespace phireg {

enum class InitKind { zeros, pmle_first, user };

/// Which per-cluster score enters G_hat: the pseudo-likelihood score (kl) or
/// the estimating function of the fitting lambda.
enum class GScore { kl, lambda };

struct StepControl {
    double shrink = 0.5;
    double min_step = 1e-12;
    double armijo = 1e-4;
};

struct FitConfig {
    CressieReadLambda lambda{0.0};
    int max_iterations = 200;
    /// Infinity norm of the summed estimating function at convergence.
    double gradient_tolerance = 1e-8;
    StepControl step;
    InitKind init = InitKind::pmle_first;
    std::optional<BetaMatrix> user_init;
    GScore g_score = GScore::kl;

    void validate() const;
};

struct FitResult {
    BetaMatrix beta_hat;
    double lambda = 0.0;
    double score_norm = 0.0;
    double objective = 0.0;
    Matrix J_hat;
    Matrix G_hat;
    /// J^{-1} G J^{-1}; empty when the fit did not converge and J was singular.
    Matrix V_hat;
    Index n_clusters = 0;
    bool converged = false;
    int iterations = 0;
    /// Divergence at the start value and after every accepted step.
    std::vector<double> objective_path;
    std::vector<std::string> warnings;
};

/// Minimises the Cressie-Read divergence between the empirical and model
/// probability vectors by damped Newton steps.
///
/// The gradient comes from the estimating equations; the Hessian from
/// symmetric finite differences of that gradient. Steps backtrack on the
/// divergence. Running out of iterations is reported through
/// `FitResult::converged`, not thrown. A singular J_hat at the final iterate
/// throws RankDeficiencyError.
FitResult fit(const SurveyDataset& data, const FitConfig& config);

/// (1/n) sum w m Delta(pi*) (x) x x'.
Matrix j_hat(const SurveyDataset& data, const BetaMatrix& beta);

/// (1/n) sum (u_hi - u/n)(u_hi - u/n)'. With GScore::kl the u_hi are the
/// pseudo-likelihood scores regardless of `lambda`.
Matrix g_hat(const SurveyDataset& data, const BetaMatrix& beta, GScore which = GScore::kl,
             CressieReadLambda lambda = CressieReadLambda(0.0));

/// Condition number above which J is treated as singular.
inline constexpr double kMaxCondition = 1e12;

/// J^{-1} G J^{-1}, symmetrised. Throws IllConditionedError carrying the
/// condition estimate when J is not safely invertible.
Matrix sandwich(const Matrix& J, const Matrix& G);

}  // namespace phireg
