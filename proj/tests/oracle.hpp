#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "fusednet/design.hpp"
#include "fusednet/solver/model.hpp"

namespace oracle {

/// Standardized per-habitat blocks of a tiny fused problem.
struct TinyProblem {
    int S = 0;
    Eigen::Index p = 0;
    std::vector<Eigen::MatrixXd> z;
    std::vector<Eigen::VectorXd> y;
    double lambda = 0.0;
    double gamma = 0.0;
    Eigen::MatrixXd w;
};

/// Objective on theta = (beta0, u^1, ..., u^S), written out term by term.
inline double objective(const TinyProblem& t, const std::vector<double>& theta) {
    const auto p = static_cast<std::size_t>(t.p);
    double value = 0.0;
    for (int s = 0; s < t.S; ++s) {
        Eigen::VectorXd beta(t.p);
        for (std::size_t j = 0; j < p; ++j)
            beta(static_cast<Eigen::Index>(j)) = theta[j] + theta[(static_cast<std::size_t>(s) + 1) * p + j];
        value += (t.y[static_cast<std::size_t>(s)] - t.z[static_cast<std::size_t>(s)] * beta).squaredNorm();
    }
    for (double v : theta) value += t.lambda * std::abs(v);
    for (int s = 0; s < t.S; ++s)
        for (int r = s + 1; r < t.S; ++r)
            for (std::size_t j = 0; j < p; ++j)
                value += t.gamma * t.w(s, r) *
                         std::abs(theta[(static_cast<std::size_t>(s) + 1) * p + j] -
                                  theta[(static_cast<std::size_t>(r) + 1) * p + j]);
    return value;
}

/**
 * @brief Coarse-to-fine grid search over the box [-3, 3]^dim.
 *
 * Each level scans a 9-point lattice per coordinate around the incumbent and
 * then shrinks the window to two lattice steps.
 */
inline double grid_search(const TinyProblem& t) {
    const auto dim = static_cast<std::size_t>((t.S + 1) * t.p);
    constexpr int points = 9;
    std::vector<double> centre(dim, 0.0), best_point(dim, 0.0), current(dim);
    double best = objective(t, centre);
    double half = 3.0;
    while (half >= 1e-9) {
        const double step = 2.0 * half / (points - 1);
        std::vector<int> idx(dim, 0);
        while (true) {
            for (std::size_t k = 0; k < dim; ++k) current[k] = std::clamp(centre[k] - half + step * idx[k], -3.0, 3.0);
            const double v = objective(t, current);
            if (v < best) {
                best = v;
                best_point = current;
            }
            std::size_t k = 0;
            while (k < dim && ++idx[k] == points) idx[k++] = 0;
            if (k == dim) break;
        }
        centre = best_point;
        half = 2.0 * step;
    }
    return best;
}

/// Tiny problem in the standardized coordinates recorded in `c`.
inline TinyProblem make_problem(const fusednet::GroupedDesign& d, const fusednet::Centering& c, double lambda,
                                double gamma, const Eigen::MatrixXd& w) {
    TinyProblem t;
    t.S = d.n_groups;
    t.p = d.p();
    t.lambda = lambda;
    t.gamma = gamma;
    t.w = w;
    const auto data = fusednet::standardize(c, d);
    for (int s = 0; s < t.S; ++s) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < d.rows(); ++i)
            if (d.group[static_cast<std::size_t>(i)] == s) rows.push_back(i);
        Eigen::MatrixXd z(static_cast<Eigen::Index>(rows.size()), t.p);
        Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t k = 0; k < rows.size(); ++k) {
            z.row(static_cast<Eigen::Index>(k)) = data.z.row(rows[k]);
            y(static_cast<Eigen::Index>(k)) = data.y(rows[k]);
        }
        t.z.push_back(z);
        t.y.push_back(y);
    }
    return t;
}

}  // namespace oracle
