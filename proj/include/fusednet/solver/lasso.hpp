#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "fusednet/design.hpp"
#include "fusednet/errors.hpp"
#include "fusednet/solver/active_step.hpp"
#include "fusednet/solver/fused.hpp"
#include "fusednet/solver/model.hpp"

namespace fusednet {

/// Single-habitat design from a plain matrix/vector pair.
inline GroupedDesign single_group_design(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    GroupedDesign d;
    d.predictors = x;
    d.response = y;
    d.group.assign(static_cast<std::size_t>(y.size()), 0);
    d.n_groups = 1;
    return d;
}

/// Pooled: one intercept for all rows. PerHabitat: rows centered within their habitat.
enum class Intercept { Pooled, PerHabitat };

/**
 * @brief Standardized sufficient statistics for the plain lasso
 *   sum (y - X beta)^2 + lambda * ||beta||_1
 * with one coefficient vector shared by every row.
 */
class LassoProblem {
public:
    explicit LassoProblem(const GroupedDesign& design, Intercept intercept = Intercept::Pooled) {
        if (design.rows() < 1) throw DataError("lasso needs at least one row");
        const auto centred = intercept == Intercept::Pooled ? design.pooled() : design;
        centering_ = compute_centering(centred);
        const auto data = standardize(centering_, centred);
        gram_.noalias() = data.z.transpose() * data.z;
        xty_.noalias() = data.z.transpose() * data.y;
        yty_ = data.y.squaredNorm();
    }

    LassoProblem(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) : LassoProblem(single_group_design(x, y)) {}

    Eigen::Index p() const { return xty_.size(); }
    const Centering& centering() const { return centering_; }
    const Eigen::MatrixXd& gram() const { return gram_; }
    const Eigen::VectorXd& xty() const { return xty_; }
    double yty() const { return yty_; }

    /// Smallest lambda with an all-zero solution: 2 * ||X'y||_inf.
    double lambda_max() const { return p() == 0 ? 0.0 : 2.0 * xty_.cwiseAbs().maxCoeff(); }

private:
    Centering centering_;
    Eigen::MatrixXd gram_;
    Eigen::VectorXd xty_;
    double yty_ = 0.0;
};

namespace detail {

inline double soft_threshold(double v, double t) { return v > t ? v - t : (v < -t ? v + t : 0.0); }

inline double lasso_gap(const Eigen::VectorXd& beta, const Eigen::VectorXd& grad, double lambda) {
    double gap = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j)
        gap = std::max(gap, beta(j) != 0.0 ? std::abs(grad(j) + lambda * sgn(beta(j)))
                                           : std::max(0.0, std::abs(grad(j)) - lambda));
    return gap;
}

}  // namespace detail

/// Cyclic coordinate descent with support polishing, certified by the KKT residual.
inline LassoFit solve_lasso(const LassoProblem& problem, double lambda, const SolverOptions& options = {},
                            const Eigen::VectorXd* warm_start = nullptr) {
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
    if (!(options.tol > 0.0)) throw ConfigError("tol must be positive");
    const auto p = problem.p();
    const auto& g = problem.gram();
    const auto& c = problem.xty();
    const auto& active_cols = problem.centering().active;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    if (warm_start) {
        if (warm_start->size() != p) throw DataError("warm start does not match the predictor count");
        beta = *warm_start;
        for (Eigen::Index j = 0; j < p; ++j)
            if (!active_cols[static_cast<std::size_t>(j)]) beta(j) = 0.0;
    }
    Eigen::VectorXd g_beta = g * beta;

    auto objective = [&] { return problem.yty() - 2.0 * c.dot(beta) + beta.dot(g_beta) + lambda * beta.lpNorm<1>(); };
    auto gap_now = [&] { return detail::lasso_gap(beta, 2.0 * (g_beta - c), lambda); };
    auto update = [&](Eigen::Index j) {
        if (!active_cols[static_cast<std::size_t>(j)]) return 0.0;
        const double a = g(j, j);
        const double q = c(j) - g_beta(j) + a * beta(j);
        const double next = detail::soft_threshold(q, lambda / 2.0) / a;
        const double delta = next - beta(j);
        if (delta != 0.0) {
            beta(j) = next;
            g_beta.noalias() += delta * g.col(j);
        }
        return std::abs(delta);
    };

    SolverDiagnostics diag;
    diag.objective_trace.push_back(objective());
    double gap = gap_now();
    long iter = 0;
    std::vector<Eigen::Index> support;

    auto pattern = [&] {
        std::size_t h = 1469598103934665603ull;
        for (Eigen::Index j = 0; j < p; ++j) h = (h ^ static_cast<std::size_t>(detail::sgn(beta(j)) + 1.0)) * 1099511628211ull;
        return h;
    };
    // Sign-frozen quadratic on the support, minimized within its sign region.
    enum class Polish { Certified, Improved, Unchanged };
    auto polish = [&] {
        std::vector<Eigen::Index> free;
        for (Eigen::Index j = 0; j < p; ++j)
            if (beta(j) != 0.0) free.push_back(j);
        const auto m = static_cast<Eigen::Index>(free.size());
        if (m == 0) return Polish::Unchanged;
        Eigen::MatrixXd h(m, m);
        Eigen::VectorXd rhs(m), z0(m);
        for (Eigen::Index k = 0; k < m; ++k) {
            const auto jk = free[static_cast<std::size_t>(k)];
            z0(k) = beta(jk);
            rhs(k) = 2.0 * c(jk) - lambda * detail::sgn(beta(jk));
            for (Eigen::Index l = 0; l < m; ++l) h(k, l) = 2.0 * g(jk, free[static_cast<std::size_t>(l)]);
        }
        const auto target = detail::bounded_newton_step(h, rhs, z0, {});
        if (!target) return Polish::Unchanged;
        const Eigen::VectorXd saved = beta;
        const Eigen::VectorXd saved_g = g_beta;
        const double current = diag.objective_trace.back();
        for (Eigen::Index k = 0; k < m; ++k) beta(free[static_cast<std::size_t>(k)]) = (*target)(k);
        g_beta.noalias() = g * beta;
        const double polished_objective = objective();
        if (polished_objective <= current + 1e-12 * (1.0 + std::abs(current))) {
            diag.objective_trace.push_back(polished_objective);
            diag.polished = true;
            gap = gap_now();
            if (gap <= options.tol) return Polish::Certified;
            if (polished_objective < current) return Polish::Improved;
            diag.objective_trace.pop_back();
        }
        beta = saved;
        g_beta = saved_g;
        return Polish::Unchanged;
    };
    while (gap > options.tol) {
        if (iter >= options.max_iter)
            throw NotConvergedError("lasso solver did not reach KKT tolerance within " + std::to_string(options.max_iter) +
                                        " sweeps",
                                    std::vector<double>(beta.data(), beta.data() + beta.size()), gap);
        for (Eigen::Index j = 0; j < p; ++j) update(j);
        ++iter;
        diag.objective_trace.push_back(objective());
        gap = gap_now();
        if (gap <= options.tol) break;

        support.clear();
        for (Eigen::Index j = 0; j < p; ++j)
            if (beta(j) != 0.0) support.push_back(j);
        if (options.polish && polish() == Polish::Certified) break;

        bool done = false;
        std::size_t last_pattern = pattern();
        int stable = 0;
        for (int pass = 1; pass <= 1000 && iter < options.max_iter; ++pass) {
            double change = 0.0;
            for (auto j : support) change = std::max(change, update(j));
            ++iter;
            diag.objective_trace.push_back(objective());
            if (change <= 1e-11) break;
            const std::size_t current = pattern();
            stable = current == last_pattern ? stable + 1 : 0;
            last_pattern = current;
            if (options.polish && stable == 2) {
                const auto result = polish();
                if (result == Polish::Certified) {
                    done = true;
                    break;
                }
                if (result == Polish::Improved) {
                    last_pattern = pattern();
                    stable = 0;
                }
            }
        }
        if (done) break;
        gap = gap_now();
    }

    LassoFit fit;
    fit.beta = beta;
    fit.lambda = lambda;
    fit.centering = problem.centering();
    diag.iterations = iter;
    diag.kkt_residual = gap_now();
    fit_monitor().record(diag.kkt_residual, options.tol);
    fit.diagnostics = std::move(diag);
    return fit;
}

inline LassoFit fit_lasso(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda, double tol = 1e-6,
                          long max_iter = 100000) {
    const LassoProblem problem(x, y);
    return solve_lasso(problem, lambda, SolverOptions{tol, max_iter, true});
}

/// Lasso objective evaluated row by row with the fit's standardization.
inline double lasso_objective(const LassoFit& fit, const GroupedDesign& design) {
    const auto data = standardize(fit.centering, fit.centering.n_groups() == 1 ? design.pooled() : design);
    return (data.y - data.z * fit.beta).squaredNorm() + fit.lambda * fit.beta.lpNorm<1>();
}

inline double lasso_objective(const LassoFit& fit, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    return lasso_objective(fit, single_group_design(x, y));
}

/// KKT residual of a lasso fit, gradients recomputed from the rows.
inline double lasso_kkt_residual(const LassoFit& fit, const GroupedDesign& design, double lambda) {
    const auto data = standardize(fit.centering, fit.centering.n_groups() == 1 ? design.pooled() : design);
    const Eigen::VectorXd grad = -2.0 * data.z.transpose() * (data.y - data.z * fit.beta);
    return detail::lasso_gap(fit.beta, grad, lambda);
}

inline double lasso_kkt_residual(const LassoFit& fit, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda) {
    return lasso_kkt_residual(fit, single_group_design(x, y), lambda);
}

}  // namespace fusednet
