#include "phireg/estimator.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "phireg/detail/reduce.hpp"
#include "phireg/detail/text.hpp"
#include "phireg/errors.hpp"

namespace phireg {

void FitConfig::validate() const {
    if (max_iterations < 1) throw ValidationError("max_iterations must be >= 1");
    if (!(gradient_tolerance > 0.0)) throw ValidationError("gradient_tolerance must be > 0");
    if (!(step.shrink > 0.0 && step.shrink < 1.0)) throw ValidationError("step shrink must lie in (0, 1)");
    if (!(step.min_step > 0.0)) throw ValidationError("minimum step must be > 0");
    if (!(step.armijo > 0.0 && step.armijo < 0.5)) throw ValidationError("Armijo constant must lie in (0, 0.5)");
    if (init == InitKind::user && !user_init) throw ValidationError("user initialisation requested without a start value");
}

namespace {

struct Problem {
    const SurveyDataset& data;
    CressieReadLambda lambda;
    Index d;
    Index k1;

    BetaMatrix unflatten(const Vector& b) const { return BetaMatrix::from_flat(b, d, k1); }

    double objective(const Vector& b) const {
        try {
            return divergence(lambda, data, unflatten(b));
        } catch (const DomainError&) {
            return std::numeric_limits<double>::infinity();
        }
    }

    Vector score(const Vector& b) const { return estimating_function(lambda, data, unflatten(b)); }

    // Gradient of the divergence objective.
    Vector gradient(const Vector& b) const { return -score(b) / data.tau(); }

    Matrix hessian(const Vector& b) const {
        const Index p = b.size();
        Matrix h(p, p);
        for (Index j = 0; j < p; ++j) {
            const double step = 1e-5 * std::max(1.0, std::abs(b(j)));
            Vector up = b, down = b;
            up(j) += step;
            down(j) -= step;
            h.col(j) = (gradient(up) - gradient(down)) / (up(j) - down(j));
        }
        return 0.5 * (h + h.transpose());
    }
};

// Every cluster's observed proportions are matched and some fitted
// probability has collapsed to zero: the optimum sits at infinity.
bool predicts_perfectly(const SurveyDataset& data, const BetaMatrix& beta) {
    bool degenerate = false;
    for (const auto& rec : data.records()) {
        if (rec.weight <= 0.0) continue;
        const Vector pi = link(beta, rec.covariates).values();
        if ((rec.counts / rec.size - pi).lpNorm<Eigen::Infinity>() > 1e-4) return false;
        degenerate = degenerate || pi.minCoeff() < 1e-6;
    }
    return degenerate;
}

// Solves (H + mu I) p = -g with the smallest mu in {0, mu0, 10 mu0, ...}
// giving a positive definite system.
Vector newton_direction(const Matrix& hess, const Vector& grad) {
    const double scale = std::max(hess.diagonal().cwiseAbs().maxCoeff(), 1e-12);
    double mu = 0.0;
    for (int attempt = 0; attempt < 40; ++attempt) {
        Matrix shifted = hess;
        shifted.diagonal().array() += mu;
        Eigen::LLT<Matrix> llt(shifted);
        if (llt.info() == Eigen::Success) {
            Vector dir = llt.solve(-grad);
            if (dir.allFinite() && dir.dot(grad) < 0.0) return dir;
        }
        mu = mu == 0.0 ? 1e-8 * scale : mu * 10.0;
    }
    return -grad;
}

constexpr double kMaxStep = 10.0;
constexpr double kSeparationThreshold = 25.0;

}  // namespace

FitResult fit(const SurveyDataset& data, const FitConfig& config) {
    config.validate();
    const Index d = data.num_categories() - 1;
    const Index k1 = data.num_covariates();
    const Index p = d * k1;

    Index informative = 0;
    for (const auto& r : data.records())
        if (r.weight > 0.0) ++informative;
    if (informative < p)
        throw ValidationError("only " + std::to_string(informative) + " clusters with positive weight for " +
                              std::to_string(p) + " parameters");

    Vector beta = Vector::Zero(p);
    switch (config.init) {
        case InitKind::zeros:
            break;
        case InitKind::user:
            if (config.user_init->free_categories() != d || config.user_init->covariates() != k1)
                throw DimensionError("initial beta does not match the dataset dimensions");
            beta = config.user_init->flatten();
            break;
        case InitKind::pmle_first:
            if (!config.lambda.is_kl()) {
                FitConfig kl = config;
                kl.lambda = CressieReadLambda(0.0);
                kl.init = InitKind::zeros;
                try {
                    const FitResult pmle = fit(data, kl);
                    if (pmle.converged) beta = pmle.beta_hat.flatten();
                } catch (const NumericalError&) {
                    // fall back to zeros
                }
            }
            break;
    }

    const Problem problem{data, config.lambda, d, k1};
    FitResult result;
    result.lambda = config.lambda.value();
    result.n_clusters = data.num_clusters();

    Vector score = problem.score(beta);
    double f = problem.objective(beta);
    result.objective_path.push_back(f);
    int iter = 0;
    bool converged = score.lpNorm<Eigen::Infinity>() <= config.gradient_tolerance;
    while (!converged && iter < config.max_iterations) {
        ++iter;
        const Vector grad = -score / data.tau();
        Vector dir = newton_direction(problem.hessian(beta), grad);
        const double len = dir.lpNorm<Eigen::Infinity>();
        if (len > kMaxStep) dir *= kMaxStep / len;

        const double slope = grad.dot(dir);
        const double noise = 1e-13 * std::max(1.0, std::abs(f));
        const double old_norm = score.lpNorm<Eigen::Infinity>();
        bool accepted = false;
        for (double t = 1.0; t >= config.step.min_step; t *= config.step.shrink) {
            const Vector trial = beta + t * dir;
            const double f_trial = problem.objective(trial);
            if (!std::isfinite(f_trial)) continue;
            const bool armijo = f_trial <= f + config.step.armijo * t * slope;
            bool flat_but_better = false;
            Vector trial_score;
            if (!armijo && f_trial <= f + noise) {
                // The decrease is below rounding of the objective; fall back to the score norm.
                trial_score = problem.score(trial);
                flat_but_better = trial_score.lpNorm<Eigen::Infinity>() < old_norm;
            }
            if (armijo || flat_but_better) {
                beta = trial;
                f = f_trial;
                score = flat_but_better ? trial_score : problem.score(beta);
                result.objective_path.push_back(f);
                accepted = true;
                break;
            }
        }
        converged = score.lpNorm<Eigen::Infinity>() <= config.gradient_tolerance;
        if (!accepted) break;
    }

    result.beta_hat = problem.unflatten(beta);
    result.iterations = iter;
    result.score_norm = score.lpNorm<Eigen::Infinity>();
    result.objective = problem.objective(beta);
    result.converged = converged;
    if (beta.lpNorm<Eigen::Infinity>() > kSeparationThreshold)
        result.warnings.push_back("possible separation: |beta| reached " +
                                  detail::format_real(beta.lpNorm<Eigen::Infinity>()));
    else if (predicts_perfectly(data, result.beta_hat))
        result.warnings.push_back("possible separation: fitted probabilities reproduce every cluster with some "
                                  "probabilities at 0");
    if (!converged)
        result.warnings.push_back("did not converge after " + std::to_string(iter) +
                                  " iterations; score norm " + detail::format_real(result.score_norm));

    result.J_hat = j_hat(data, result.beta_hat);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(result.J_hat);
    const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (!(eig.eigenvalues()(0) > top / kMaxCondition)) {
        if (converged) {
            std::ostringstream msg;
            msg << "J_hat is singular (eigenvalue " << eig.eigenvalues()(0) << " of " << top
                << "); null direction:";
            for (Index j = 0; j < p; ++j) msg << ' ' << eig.eigenvectors()(j, 0);
            throw RankDeficiencyError(msg.str(), eig.eigenvectors().col(0));
        }
        result.warnings.push_back("J_hat is singular at the last iterate");
        return result;
    }
    result.G_hat = g_hat(data, result.beta_hat, config.g_score, config.lambda);
    result.V_hat = sandwich(result.J_hat, result.G_hat);
    return result;
}

Matrix j_hat(const SurveyDataset& data, const BetaMatrix& beta) {
    const Index d = beta.free_categories();
    const Index k1 = beta.covariates();
    const auto& recs = data.records();
    Matrix sum = detail::pairwise_sum<Matrix>(0, recs.size(), [&](std::size_t i) {
        const auto& r = recs[i];
        const Vector& x = r.covariates;
        const Matrix delta = delta_matrix(link(beta, x)).topLeftCorner(d, d);
        const Matrix xx = x * x.transpose();
        Matrix term(d * k1, d * k1);
        for (Index a = 0; a < d; ++a)
            for (Index b = 0; b < d; ++b) term.block(a * k1, b * k1, k1, k1) = delta(a, b) * xx;
        return Matrix(r.weight * r.size * term);
    });
    return sum / static_cast<double>(data.num_clusters());
}

Matrix g_hat(const SurveyDataset& data, const BetaMatrix& beta, GScore which, CressieReadLambda lambda) {
    const CressieReadLambda used = which == GScore::kl ? CressieReadLambda(0.0) : lambda;
    const auto& recs = data.records();
    const double n = static_cast<double>(recs.size());
    std::vector<Vector> u;
    u.reserve(recs.size());
    for (const auto& r : recs) u.push_back(estimating_function_cluster(used, r, beta));
    const Vector mean = detail::pairwise_sum<Vector>(0, u.size(), [&](std::size_t i) { return u[i]; }) / n;
    const Matrix sum = detail::pairwise_sum<Matrix>(0, u.size(), [&](std::size_t i) {
        const Vector c = u[i] - mean;
        return Matrix(c * c.transpose());
    });
    return sum / n;
}

Matrix sandwich(const Matrix& J, const Matrix& G) {
    if (J.rows() != J.cols() || G.rows() != J.rows() || G.cols() != J.cols())
        throw DimensionError("sandwich needs square J and G of equal size");
    const Matrix Js = 0.5 * (J + J.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(Js);
    const Vector& values = eig.eigenvalues();
    const double top = values.cwiseAbs().maxCoeff();
    const double bottom = values(0);
    const double condition = bottom > 0.0 ? top / bottom : std::numeric_limits<double>::infinity();
    if (!(condition <= kMaxCondition))
        throw IllConditionedError("J is ill-conditioned (condition estimate " + detail::format_real(condition) + ")",
                                  condition);
    const Matrix& Q = eig.eigenvectors();
    const Vector inv = values.cwiseInverse();
    const Matrix inner = inv.asDiagonal() * (Q.transpose() * G * Q) * inv.asDiagonal();
    const Matrix V = Q * inner * Q.transpose();
    return 0.5 * (V + V.transpose());
}

}  // namespace phireg
