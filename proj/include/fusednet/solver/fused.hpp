#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fusednet/design.hpp"
#include "fusednet/errors.hpp"
#include "fusednet/solver/active_step.hpp"
#include "fusednet/solver/block.hpp"
#include "fusednet/solver/model.hpp"
#include "fusednet/solver/subgradient.hpp"

namespace fusednet {

struct SolverOptions {
    double tol = 1e-6;       // certified KKT residual
    long max_iter = 100000;  // coordinate sweeps
    bool polish = true;
};

/**
 * @brief Sufficient statistics of one standardized grouped design.
 *
 * Built once per training set and reused for every (lambda, gamma) on a path.
 */
class FusedProblem {
public:
    explicit FusedProblem(const GroupedDesign& design) : centering_(compute_centering(design)) {
        S_ = design.n_groups;
        p_ = design.p();
        const auto data = standardize(centering_, design);
        gram_.assign(static_cast<std::size_t>(S_), Eigen::MatrixXd::Zero(p_, p_));
        xty_.assign(static_cast<std::size_t>(S_), Eigen::VectorXd::Zero(p_));
        yty_.assign(static_cast<std::size_t>(S_), 0.0);
        std::vector<std::vector<Eigen::Index>> rows(static_cast<std::size_t>(S_));
        for (Eigen::Index i = 0; i < design.rows(); ++i)
            rows[static_cast<std::size_t>(design.group[static_cast<std::size_t>(i)])].push_back(i);
        for (int s = 0; s < S_; ++s) {
            const auto& r = rows[static_cast<std::size_t>(s)];
            Eigen::MatrixXd zs(static_cast<Eigen::Index>(r.size()), p_);
            Eigen::VectorXd ys(static_cast<Eigen::Index>(r.size()));
            for (std::size_t k = 0; k < r.size(); ++k) {
                zs.row(static_cast<Eigen::Index>(k)) = data.z.row(r[k]);
                ys(static_cast<Eigen::Index>(k)) = data.y(r[k]);
            }
            gram_[static_cast<std::size_t>(s)].noalias() = zs.transpose() * zs;
            xty_[static_cast<std::size_t>(s)].noalias() = zs.transpose() * ys;
            yty_[static_cast<std::size_t>(s)] = ys.squaredNorm();
        }
    }

    int n_groups() const { return S_; }
    Eigen::Index p() const { return p_; }
    const Centering& centering() const { return centering_; }
    const Eigen::MatrixXd& gram(int s) const { return gram_[static_cast<std::size_t>(s)]; }
    const Eigen::VectorXd& xty(int s) const { return xty_[static_cast<std::size_t>(s)]; }
    double yty(int s) const { return yty_[static_cast<std::size_t>(s)]; }

    /**
     * Smallest lambda giving the all-zero solution at this gamma. Derived from
     * the zero-point subgradient condition: the global coefficient needs
     * lambda >= |2 sum_s x_sj'y_s| and every habitat subset A needs
     * lambda*|A| >= |2 sum_{s in A} x_sj'y_s| - gamma*cut(A).
     */
    double zero_threshold(double gamma, const Eigen::MatrixXd& w) const {
        double threshold = 0.0;
        for (Eigen::Index j = 0; j < p_; ++j) {
            double total = 0.0;
            for (int s = 0; s < S_; ++s) total += xty(s)(j);
            threshold = std::max(threshold, 2.0 * std::abs(total));
            for (unsigned mask = 1; mask < (1u << S_); ++mask) {
                double sum = 0.0;
                double cut = 0.0;
                for (int s = 0; s < S_; ++s) {
                    if (!(mask >> s & 1u)) continue;
                    sum += xty(s)(j);
                    for (int t = 0; t < S_; ++t)
                        if (!(mask >> t & 1u)) cut += w(s, t);
                }
                threshold = std::max(threshold, (2.0 * std::abs(sum) - gamma * cut) / std::popcount(mask));
            }
        }
        return threshold;
    }

    /// Zero threshold without fusion; anchors the lambda grid.
    double lambda_max() const {
        double threshold = 0.0;
        for (Eigen::Index j = 0; j < p_; ++j) {
            double total = 0.0;
            for (int s = 0; s < S_; ++s) {
                total += xty(s)(j);
                threshold = std::max(threshold, 2.0 * std::abs(xty(s)(j)));
            }
            threshold = std::max(threshold, 2.0 * std::abs(total));
        }
        return threshold;
    }

private:
    Centering centering_;
    int S_ = 0;
    Eigen::Index p_ = 0;
    std::vector<Eigen::MatrixXd> gram_;
    std::vector<Eigen::VectorXd> xty_;
    std::vector<double> yty_;
};

namespace detail {

class FusedSolverState {
public:
    FusedSolverState(const FusedProblem& problem, double lambda, double gamma, const Eigen::MatrixXd& w)
        : pb_(problem), lambda_(lambda), gamma_(gamma), w_(w), block_(problem.n_groups(), lambda, gamma, w) {
        S_ = pb_.n_groups();
        p_ = pb_.p();
        b_ = Eigen::VectorXd::Zero(p_);
        u_ = Eigen::MatrixXd::Zero(S_, p_);
        g_beta_ = Eigen::MatrixXd::Zero(p_, S_);
        a_.resize(static_cast<std::size_t>(S_));
        q_.resize(static_cast<std::size_t>(S_));
        beta_new_.resize(static_cast<std::size_t>(S_));
        beta_old_.resize(static_cast<std::size_t>(S_));
        gu_.resize(static_cast<std::size_t>(S_));
        uj_.resize(static_cast<std::size_t>(S_));
    }

    void set(const FusedCoefficients& c) {
        b_ = c.beta0;
        for (int s = 0; s < S_; ++s) u_.row(s) = c.deviations[static_cast<std::size_t>(s)].transpose();
        for (Eigen::Index j = 0; j < p_; ++j) {
            if (!pb_.centering().active[static_cast<std::size_t>(j)]) {
                b_(j) = 0.0;
                u_.col(j).setZero();
            }
        }
        refresh();
    }

    FusedCoefficients coefficients() const {
        FusedCoefficients c;
        c.beta0 = b_;
        for (int s = 0; s < S_; ++s) c.deviations.push_back(u_.row(s).transpose());
        return c;
    }

    void refresh() {
        for (int s = 0; s < S_; ++s) g_beta_.col(s).noalias() = pb_.gram(s) * group_beta(s);
    }

    Eigen::VectorXd group_beta(int s) const { return b_ + u_.row(s).transpose(); }

    double objective() const {
        double value = 0.0;
        for (int s = 0; s < S_; ++s) {
            const Eigen::VectorXd beta = group_beta(s);
            value += pb_.yty(s) - 2.0 * pb_.xty(s).dot(beta) + beta.dot(g_beta_.col(s));
        }
        value += lambda_ * (b_.lpNorm<1>() + u_.lpNorm<1>());
        for (int s = 0; s < S_; ++s)
            for (int t = s + 1; t < S_; ++t)
                if (w_(s, t) != 0.0) value += gamma_ * w_(s, t) * (u_.row(s) - u_.row(t)).lpNorm<1>();
        return value;
    }

    double kkt() {
        double gap = 0.0;
        for (Eigen::Index j = 0; j < p_; ++j) {
            double gb = 0.0;
            for (int s = 0; s < S_; ++s) {
                gu_[static_cast<std::size_t>(s)] = 2.0 * (g_beta_(j, s) - pb_.xty(s)(j));
                gb += gu_[static_cast<std::size_t>(s)];
                uj_[static_cast<std::size_t>(s)] = u_(s, j);
            }
            gap = std::max(gap, block_subgradient_gap(b_(j), gb, uj_, gu_, lambda_, gamma_, w_));
        }
        return gap;
    }

    /// Hash of the sign and tie structure of the coefficients.
    std::size_t pattern() const {
        std::size_t h = 1469598103934665603ull;
        auto mix = [&h](std::size_t v) { h = (h ^ v) * 1099511628211ull; };
        for (Eigen::Index j = 0; j < p_; ++j) {
            mix(static_cast<std::size_t>(sgn(b_(j)) + 1.0));
            for (int s = 0; s < S_; ++s) {
                mix(static_cast<std::size_t>(sgn(u_(s, j)) + 1.0));
                for (int t = s + 1; t < S_; ++t) mix(u_(s, j) == u_(t, j) ? 7u : 11u);
            }
        }
        return h;
    }

    bool block_nonzero(Eigen::Index j) const { return b_(j) != 0.0 || u_.col(j).cwiseAbs().maxCoeff() != 0.0; }

    /// Exact minimization over predictor j's block; returns the largest coefficient change.
    double update(Eigen::Index j) {
        if (!pb_.centering().active[static_cast<std::size_t>(j)]) return 0.0;
        double total_q = 0.0;
        double max_q = 0.0;
        for (int s = 0; s < S_; ++s) {
            const double a = pb_.gram(s)(j, j);
            const double beta = b_(j) + u_(s, j);
            a_[static_cast<std::size_t>(s)] = a;
            q_[static_cast<std::size_t>(s)] = pb_.xty(s)(j) - g_beta_(j, s) + a * beta;
            total_q += q_[static_cast<std::size_t>(s)];
            max_q = std::max(max_q, std::abs(q_[static_cast<std::size_t>(s)]));
        }
        if (!block_nonzero(j) && 2.0 * std::abs(total_q) <= lambda_ && 2.0 * max_q <= lambda_) return 0.0;

        for (int s = 0; s < S_; ++s) beta_old_[static_cast<std::size_t>(s)] = b_(j) + u_(s, j);
        double b_new = 0.0;
        block_.solve(a_, q_, beta_new_, b_new);
        double change = std::abs(b_new - b_(j));
        b_(j) = b_new;
        for (int s = 0; s < S_; ++s) {
            const double beta_new = beta_new_[static_cast<std::size_t>(s)];
            u_(s, j) = beta_new - b_new;
            const double delta = beta_new - beta_old_[static_cast<std::size_t>(s)];
            if (delta != 0.0) g_beta_.col(s).noalias() += delta * pb_.gram(s).col(j);
            change = std::max(change, std::abs(delta));
        }
        return change;
    }

    enum class PolishResult { Certified, Improved, Unchanged };

    /**
     * Re-solves the smooth problem on the current support: exact zeros stay
     * zero, tied deviations stay tied, and every sign is frozen, which leaves a
     * quadratic in the free cluster values, minimized within that region by
     * bounded_newton_step. The move is kept only if the objective does not
     * increase.
     */
    PolishResult polish(double tol, double current_objective, double& new_objective, double& new_gap) {
        struct Var {
            Eigen::Index j;
            unsigned mask;
            std::vector<int> members;  // deviation rows; empty for the global part
            double linear;
            double value;
        };
        std::vector<Var> vars;
        for (Eigen::Index j = 0; j < p_; ++j) {
            if (!pb_.centering().active[static_cast<std::size_t>(j)]) continue;
            if (b_(j) != 0.0) vars.push_back({j, (1u << S_) - 1u, {}, lambda_ * sgn(b_(j)), b_(j)});
            std::vector<bool> seen(static_cast<std::size_t>(S_), false);
            for (int s = 0; s < S_; ++s) {
                if (seen[static_cast<std::size_t>(s)]) continue;
                const double v = u_(s, j);
                Var var{j, 0u, {}, 0.0, v};
                for (int t = s; t < S_; ++t)
                    if (u_(t, j) == v) {
                        seen[static_cast<std::size_t>(t)] = true;
                        var.mask |= 1u << t;
                        var.members.push_back(t);
                    }
                if (v == 0.0) continue;
                var.linear = lambda_ * static_cast<double>(var.members.size()) * sgn(v);
                for (int m : var.members)
                    for (int t = 0; t < S_; ++t)
                        if (!(var.mask >> t & 1u)) var.linear += gamma_ * w_(m, t) * sgn(v - u_(t, j));
                vars.push_back(std::move(var));
            }
        }
        const auto m = static_cast<Eigen::Index>(vars.size());
        if (m == 0) return PolishResult::Unchanged;
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, m);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
        for (Eigen::Index k = 0; k < m; ++k) {
            const auto& vk = vars[static_cast<std::size_t>(k)];
            for (int s = 0; s < S_; ++s)
                if (vk.mask >> s & 1u) rhs(k) += 2.0 * pb_.xty(s)(vk.j);
            rhs(k) -= vk.linear;
            for (Eigen::Index l = k; l < m; ++l) {
                const auto& vl = vars[static_cast<std::size_t>(l)];
                const unsigned both = vk.mask & vl.mask;
                double sum = 0.0;
                for (int s = 0; s < S_; ++s)
                    if (both >> s & 1u) sum += pb_.gram(s)(vk.j, vl.j);
                h(k, l) = h(l, k) = 2.0 * sum;
            }
        }
        Eigen::VectorXd z0(m);
        std::vector<std::pair<Eigen::Index, Eigen::Index>> ordered;
        for (Eigen::Index k = 0; k < m; ++k) {
            const auto& vk = vars[static_cast<std::size_t>(k)];
            z0(k) = vk.value;
            if (vk.members.empty()) continue;
            for (Eigen::Index l = k + 1; l < m; ++l) {
                const auto& vl = vars[static_cast<std::size_t>(l)];
                if (vl.j == vk.j && !vl.members.empty()) ordered.push_back({k, l});
            }
        }
        const auto step = bounded_newton_step(h, rhs, z0, ordered);
        if (!step) return PolishResult::Unchanged;
        const Eigen::VectorXd& target = *step;

        const Eigen::VectorXd b_saved = b_;
        const Eigen::MatrixXd u_saved = u_;
        const Eigen::MatrixXd g_saved = g_beta_;
        for (Eigen::Index k = 0; k < m; ++k) {
            const auto& var = vars[static_cast<std::size_t>(k)];
            if (var.members.empty())
                b_(var.j) = target(k);
            else
                for (int s : var.members) u_(s, var.j) = target(k);
        }
        refresh();
        new_objective = objective();
        const double slack = 1e-12 * (1.0 + std::abs(current_objective));
        if (new_objective <= current_objective + slack) {
            new_gap = kkt();
            if (new_gap <= tol) return PolishResult::Certified;
            if (new_objective < current_objective) return PolishResult::Improved;
        }
        b_ = b_saved;
        u_ = u_saved;
        g_beta_ = g_saved;
        return PolishResult::Unchanged;
    }

    Eigen::Index p() const { return p_; }

private:
    const FusedProblem& pb_;
    double lambda_;
    double gamma_;
    Eigen::MatrixXd w_;
    FusionBlockSolver block_;
    int S_ = 0;
    Eigen::Index p_ = 0;
    Eigen::VectorXd b_;
    Eigen::MatrixXd u_;       // habitats x p
    Eigen::MatrixXd g_beta_;  // p x habitats: gram_s * beta_s
    std::vector<double> a_, q_, beta_new_, beta_old_, gu_, uj_;
};

}  // namespace detail

/**
 * @brief Minimize the fused objective on a prepared problem.
 *
 * Block coordinate descent with exact block minimization (so the objective
 * never increases between sweeps), sweeping the full predictor set and then
 * the current support, followed by a support-restricted polish. Returns only
 * once the KKT residual is at most `options.tol`.
 */
inline FusedFit solve_fused(const FusedProblem& problem, double lambda, double gamma, const Eigen::MatrixXd& weights,
                            const SolverOptions& options = {}, const FusedCoefficients* warm_start = nullptr) {
    if (!(lambda >= 0.0) || !(gamma >= 0.0)) throw ConfigError("lambda and gamma must be non-negative");
    if (!(options.tol > 0.0)) throw ConfigError("tol must be positive");
    validate_weights(weights, problem.n_groups());

    detail::FusedSolverState state(problem, lambda, gamma, weights);
    if (warm_start) {
        if (warm_start->beta0.size() != problem.p() ||
            static_cast<int>(warm_start->deviations.size()) != problem.n_groups())
            throw DataError("warm start does not match the problem dimensions");
        state.set(*warm_start);
    }

    SolverDiagnostics diag;
    double objective = state.objective();
    diag.objective_trace.push_back(objective);
    double gap = state.kkt();
    long iter = 0;
    const auto p = problem.p();
    std::vector<Eigen::Index> active;

    while (gap > options.tol) {
        if (iter >= options.max_iter)
            throw NotConvergedError("fused solver did not reach KKT tolerance within " + std::to_string(options.max_iter) +
                                        " sweeps (residual " + std::to_string(gap) + ")",
                                    [&] {
                                        const auto c = state.coefficients();
                                        std::vector<double> flat(c.beta0.data(), c.beta0.data() + c.beta0.size());
                                        for (const auto& u : c.deviations) flat.insert(flat.end(), u.data(), u.data() + u.size());
                                        return flat;
                                    }(),
                                    gap);
        for (Eigen::Index j = 0; j < p; ++j) state.update(j);
        ++iter;
        objective = state.objective();
        diag.objective_trace.push_back(objective);
        gap = state.kkt();
        if (gap <= options.tol) break;

        if (options.polish) {
            double polished_objective = 0.0;
            double polished_gap = 0.0;
            const auto result = state.polish(options.tol, objective, polished_objective, polished_gap);
            if (result != detail::FusedSolverState::PolishResult::Unchanged) {
                objective = polished_objective;
                diag.objective_trace.push_back(objective);
                diag.polished = true;
            }
            if (result == detail::FusedSolverState::PolishResult::Certified) {
                gap = polished_gap;
                break;
            }
        }

        active.clear();
        for (Eigen::Index j = 0; j < p; ++j)
            if (state.block_nonzero(j)) active.push_back(j);
        bool done = false;
        std::size_t last_pattern = state.pattern();
        int stable = 0;
        for (int pass = 1; pass <= 1000 && iter < options.max_iter; ++pass) {
            double change = 0.0;
            for (auto j : active) change = std::max(change, state.update(j));
            ++iter;
            diag.objective_trace.push_back(state.objective());
            if (change <= 1e-11) break;
            const std::size_t pattern = state.pattern();
            stable = pattern == last_pattern ? stable + 1 : 0;
            last_pattern = pattern;
            if (options.polish && stable == 2) {
                double polished_objective = 0.0;
                double polished_gap = 0.0;
                const auto result = state.polish(options.tol, diag.objective_trace.back(), polished_objective, polished_gap);
                if (result != detail::FusedSolverState::PolishResult::Unchanged) {
                    diag.objective_trace.push_back(polished_objective);
                    diag.polished = true;
                    last_pattern = state.pattern();
                    stable = 0;
                }
                if (result == detail::FusedSolverState::PolishResult::Certified) {
                    gap = polished_gap;
                    done = true;
                    break;
                }
            }
        }
        objective = diag.objective_trace.back();
        if (done) break;
    }

    FusedFit fit;
    fit.coef = state.coefficients();
    fit.lambda = lambda;
    fit.gamma = gamma;
    fit.weights = weights;
    fit.centering = problem.centering();
    diag.iterations = iter;
    diag.kkt_residual = state.kkt();
    fit_monitor().record(diag.kkt_residual, options.tol);
    fit.diagnostics = std::move(diag);
    return fit;
}

inline FusedFit fit_fused(const GroupedDesign& design, double lambda, double gamma, const Eigen::MatrixXd& weights,
                          double tol = 1e-6, long max_iter = 100000) {
    const FusedProblem problem(design);
    return solve_fused(problem, lambda, gamma, weights, SolverOptions{tol, max_iter, true});
}

namespace detail {

inline void check_fit_matches(const FusedFit& fit, const GroupedDesign& design) {
    design.validate();
    if (design.p() != fit.p()) throw DataError("design has " + std::to_string(design.p()) + " predictors, fit has " +
                                               std::to_string(fit.p()));
    if (design.n_groups != fit.n_groups()) throw DataError("design and fit disagree on the habitat count");
}

}  // namespace detail

/**
 * @brief The fused objective evaluated row by row on `design`, standardized
 * with the statistics stored in `fit`.
 */
inline double fused_objective(const FusedFit& fit, const GroupedDesign& design) {
    detail::check_fit_matches(fit, design);
    const auto data = standardize(fit.centering, design);
    double value = 0.0;
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        const int s = design.group[static_cast<std::size_t>(i)];
        const double r = data.y(i) - data.z.row(i).dot(fit.group_beta(s));
        value += r * r;
    }
    double l1 = fit.coef.beta0.lpNorm<1>();
    for (const auto& u : fit.coef.deviations) l1 += u.lpNorm<1>();
    value += fit.lambda * l1;
    const int S = fit.n_groups();
    for (int s = 0; s < S; ++s)
        for (int t = s + 1; t < S; ++t)
            value += fit.gamma * fit.weights(s, t) *
                     (fit.coef.deviations[static_cast<std::size_t>(s)] - fit.coef.deviations[static_cast<std::size_t>(t)])
                         .lpNorm<1>();
    return value;
}

/**
 * @brief Sup-norm distance from zero to the objective's subdifferential at `fit`.
 *
 * Gradients are recomputed from the rows of `design`, independently of the
 * solver's cached statistics. Zero certifies optimality.
 */
inline double kkt_residual(const FusedFit& fit, const GroupedDesign& design, double lambda, double gamma,
                           const Eigen::MatrixXd& weights) {
    detail::check_fit_matches(fit, design);
    const int S = fit.n_groups();
    const auto p = fit.p();
    const auto data = standardize(fit.centering, design);
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(S, p);
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        const int s = design.group[static_cast<std::size_t>(i)];
        const double r = data.y(i) - data.z.row(i).dot(fit.group_beta(s));
        grad.row(s) -= 2.0 * r * data.z.row(i);
    }
    double gap = 0.0;
    std::vector<double> gu(static_cast<std::size_t>(S));
    std::vector<double> u(static_cast<std::size_t>(S));
    for (Eigen::Index j = 0; j < p; ++j) {
        for (int s = 0; s < S; ++s) {
            gu[static_cast<std::size_t>(s)] = grad(s, j);
            u[static_cast<std::size_t>(s)] = fit.coef.deviations[static_cast<std::size_t>(s)](j);
        }
        gap = std::max(gap, detail::block_subgradient_gap(fit.coef.beta0(j), grad.col(j).sum(), u, gu, lambda, gamma,
                                                          weights));
    }
    return gap;
}

}  // namespace fusednet
