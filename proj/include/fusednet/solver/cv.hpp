#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "fusednet/design.hpp"
#include "fusednet/errors.hpp"
#include "fusednet/rng.hpp"
#include "fusednet/solver/fused.hpp"
#include "fusednet/solver/lasso.hpp"

namespace fusednet {

/// Hyperparameter grid and inner cross-validation settings.
struct CvOptions {
    int lambda_count = 50;
    double lambda_min_ratio = 1e-3;
    int gamma_count = 10;
    double gamma_min_ratio = 1e-2;  // relative to lambda_max
    double gamma_max_ratio = 1e2;
    int inner_folds = 5;
    SolverOptions solver{};
};

/// `count` log-spaced values from `lambda_max` down to `lambda_max * min_ratio`.
inline std::vector<double> lambda_grid(double lambda_max, int count, double min_ratio) {
    if (count < 1) throw ConfigError("lambda grid needs at least one value");
    if (!(lambda_max > 0.0)) return {0.0};
    if (count == 1) return {lambda_max};
    std::vector<double> grid(static_cast<std::size_t>(count));
    const double step = std::log(min_ratio) / (count - 1);
    for (int i = 0; i < count; ++i) grid[static_cast<std::size_t>(i)] = lambda_max * std::exp(step * i);
    return grid;
}

/// `count` log-spaced values from `scale*min_ratio` up to `scale*max_ratio`.
inline std::vector<double> gamma_grid(double scale, int count, double min_ratio, double max_ratio) {
    if (count < 1) throw ConfigError("gamma grid needs at least one value");
    if (!(scale > 0.0)) return {0.0};
    if (count == 1) return {scale * max_ratio};
    std::vector<double> grid(static_cast<std::size_t>(count));
    const double lo = std::log(min_ratio);
    const double step = (std::log(max_ratio) - lo) / (count - 1);
    for (int i = 0; i < count; ++i) grid[static_cast<std::size_t>(i)] = scale * std::exp(lo + step * i);
    return grid;
}

namespace detail {

inline double mean_squared_error(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual) {
    return (predicted - actual).squaredNorm() / static_cast<double>(actual.size());
}

inline bool strictly_better(double candidate, double best) {
    return candidate < best - 1e-12 * std::max(1.0, std::abs(best));
}

inline void check_descending(const std::vector<double>& grid, const char* name) {
    if (grid.empty()) throw ConfigError(std::string(name) + " grid is empty");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (grid[i] > grid[i - 1]) throw ConfigError(std::string(name) + " grid must be sorted in descending order");
}

/// Inner fold label per row; rows of each habitat are shuffled and dealt separately.
inline std::vector<int> stratified_folds(const std::vector<int>& group, int n_groups, int folds, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<int> label(group.size(), 0);
    for (int s = 0; s < n_groups; ++s) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < group.size(); ++i)
            if (group[i] == s) rows.push_back(i);
        rng.shuffle(rows);
        for (std::size_t r = 0; r < rows.size(); ++r) label[rows[r]] = static_cast<int>(r % static_cast<std::size_t>(folds));
    }
    return label;
}

inline void split_by_fold(const std::vector<int>& label, int fold, std::vector<std::size_t>& train,
                          std::vector<std::size_t>& test) {
    train.clear();
    test.clear();
    for (std::size_t i = 0; i < label.size(); ++i) (label[i] == fold ? test : train).push_back(i);
}

}  // namespace detail

struct CvLassoResult {
    LassoFit fit;
    std::vector<double> cv_mse;  // per grid value
    std::size_t selected = 0;
};

/**
 * @brief Select lambda by inner K-fold CV on the training rows, then refit.
 *
 * Ties go to the larger lambda. With fewer rows than folds the split becomes
 * leave-one-out. With per-habitat intercepts the inner folds are stratified
 * by habitat.
 */
inline CvLassoResult cv_lasso(const GroupedDesign& design, const std::vector<double>& grid, int inner_folds,
                              std::uint64_t seed, const SolverOptions& solver = {},
                              Intercept intercept = Intercept::Pooled) {
    detail::check_descending(grid, "lambda");
    if (inner_folds < 2) throw ConfigError("inner_folds must be at least 2");
    design.validate();
    const auto data = intercept == Intercept::Pooled ? design.pooled() : design;
    std::vector<int> sizes(static_cast<std::size_t>(data.n_groups), 0);
    for (int g : data.group) ++sizes[static_cast<std::size_t>(g)];
    const int smallest = *std::min_element(sizes.begin(), sizes.end());
    if (smallest < 2) throw DataError("cross-validation needs at least two training rows per habitat");
    const int folds = std::min(inner_folds, smallest);
    const auto label = detail::stratified_folds(data.group, data.n_groups, folds, seed);

    std::vector<double> total(grid.size(), 0.0);
    std::vector<std::size_t> train, test;
    for (int k = 0; k < folds; ++k) {
        detail::split_by_fold(label, k, train, test);
        const auto tr = data.subset(train);
        const auto te = data.subset(test);
        const LassoProblem problem(tr, intercept);
        Eigen::VectorXd warm = Eigen::VectorXd::Zero(problem.p());
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const auto fit = solve_lasso(problem, grid[g], solver, &warm);
            warm = fit.beta;
            total[g] += detail::mean_squared_error(predict(fit, te.predictors, te.group), te.response);
        }
    }

    CvLassoResult out;
    out.cv_mse.resize(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) out.cv_mse[g] = total[g] / folds;
    for (std::size_t g = 1; g < grid.size(); ++g)
        if (detail::strictly_better(out.cv_mse[g], out.cv_mse[out.selected])) out.selected = g;
    out.fit = solve_lasso(LassoProblem(data, intercept), grid[out.selected], solver);
    return out;
}

struct CvFusedResult {
    FusedFit fit;
    Eigen::MatrixXd cv_mse;  // lambda index x gamma index
    std::size_t lambda_index = 0;
    std::size_t gamma_index = 0;
};

/**
 * @brief Select (lambda, gamma) by inner CV stratified by habitat, then refit.
 *
 * Every habitat contributes rows to every inner fold. Ties go to the larger
 * lambda, then the larger gamma.
 */
inline CvFusedResult cv_fused(const GroupedDesign& design, const std::vector<double>& lambdas,
                              const std::vector<double>& gammas, const Eigen::MatrixXd& weights, int inner_folds,
                              std::uint64_t seed, const SolverOptions& solver = {}) {
    detail::check_descending(lambdas, "lambda");
    if (gammas.empty()) throw ConfigError("gamma grid is empty");
    if (inner_folds < 2) throw ConfigError("inner_folds must be at least 2");
    design.validate();
    std::vector<int> sizes(static_cast<std::size_t>(design.n_groups), 0);
    for (int g : design.group) ++sizes[static_cast<std::size_t>(g)];
    const int smallest = *std::min_element(sizes.begin(), sizes.end());
    if (smallest < 2) throw DataError("every habitat needs at least two training rows for cross-validation");
    const int folds = std::min(inner_folds, smallest);
    const auto label = detail::stratified_folds(design.group, design.n_groups, folds, seed);

    const auto nl = lambdas.size();
    const auto ng = gammas.size();
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nl), static_cast<Eigen::Index>(ng));
    std::vector<std::size_t> train, test;
    for (int k = 0; k < folds; ++k) {
        detail::split_by_fold(label, k, train, test);
        const auto tr = design.subset(train);
        const auto te = design.subset(test);
        const FusedProblem problem(tr);
        FusedCoefficients row_start;
        bool have_row_start = false;
        for (std::size_t gi = 0; gi < ng; ++gi) {
            FusedCoefficients warm;
            bool have_warm = false;
            for (std::size_t li = 0; li < nl; ++li) {
                const FusedCoefficients* start = have_warm ? &warm : (have_row_start ? &row_start : nullptr);
                auto fit = solve_fused(problem, lambdas[li], gammas[gi], weights, solver, start);
                if (li == 0) {
                    row_start = fit.coef;
                    have_row_start = true;
                }
                warm = std::move(fit.coef);
                have_warm = true;
                fit.coef = warm;
                total(static_cast<Eigen::Index>(li), static_cast<Eigen::Index>(gi)) +=
                    detail::mean_squared_error(predict(fit, te.predictors, te.group), te.response);
            }
        }
    }

    CvFusedResult out;
    out.cv_mse = total / folds;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t li = 0; li < nl; ++li)
        for (std::size_t gi = ng; gi-- > 0;) {
            const double v = out.cv_mse(static_cast<Eigen::Index>(li), static_cast<Eigen::Index>(gi));
            const bool take = std::isinf(best) ? v < best : detail::strictly_better(v, best);
            const bool larger_gamma_tie = !std::isinf(best) && !detail::strictly_better(v, best) &&
                                          !detail::strictly_better(best, v) && li == out.lambda_index &&
                                          gammas[gi] > gammas[out.gamma_index];
            if (take || larger_gamma_tie) {
                best = v;
                out.lambda_index = li;
                out.gamma_index = gi;
            }
        }
    out.fit = solve_fused(FusedProblem(design), lambdas[out.lambda_index], gammas[out.gamma_index], weights, solver);
    return out;
}

/// Grids anchored at the training data's zero-solution threshold.
inline std::vector<double> default_lambda_grid(double lambda_max, const CvOptions& o) {
    return lambda_grid(lambda_max, o.lambda_count, o.lambda_min_ratio);
}

inline std::vector<double> default_gamma_grid(double lambda_max, const CvOptions& o) {
    return gamma_grid(lambda_max, o.gamma_count, o.gamma_min_ratio, o.gamma_max_ratio);
}

inline CvLassoResult cv_lasso(const GroupedDesign& design, const CvOptions& o, std::uint64_t seed,
                              Intercept intercept = Intercept::Pooled) {
    const LassoProblem probe(design, intercept);
    return cv_lasso(design, default_lambda_grid(probe.lambda_max(), o), o.inner_folds, seed, o.solver, intercept);
}

inline CvFusedResult cv_fused(const GroupedDesign& design, const Eigen::MatrixXd& weights, const CvOptions& o,
                              std::uint64_t seed) {
    const FusedProblem probe(design);
    const double lmax = probe.lambda_max();
    return cv_fused(design, default_lambda_grid(lmax, o), default_gamma_grid(lmax, o), weights, o.inner_folds, seed,
                    o.solver);
}

}  // namespace fusednet
