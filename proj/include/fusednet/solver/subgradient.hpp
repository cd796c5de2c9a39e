#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace fusednet::detail {

inline double sgn(double v) { return (v > 0.0) - (v < 0.0); }

/**
 * @brief Sup-norm distance from 0 to the subdifferential of one predictor's block.
 *
 * The block holds the global coefficient `b` and the habitat deviations `u`
 * with smooth gradients `grad_b`, `grad_u`. Penalty:
 *   lambda*|b| + lambda*sum|u_s| + gamma*sum_{s<t} w_st*|u_s - u_t|.
 *
 * Deviations sharing an exact value form a cluster whose fusion subgradients
 * are free in [-1, 1]; a cluster sitting at zero additionally has free lasso
 * subgradients. Whether a subgradient choice leaves residual at most eps is a
 * transshipment feasibility question, which reduces to a cut condition over
 * every subset A of the cluster:
 *   |sum_A h| <= gamma*cut(A) + |A|*(eps + lambda*[cluster at zero]).
 */
inline double block_subgradient_gap(double b, double grad_b, std::span<const double> u,
                                    std::span<const double> grad_u, double lambda, double gamma,
                                    const Eigen::MatrixXd& w) {
    double gap = b != 0.0 ? std::abs(grad_b + lambda * sgn(b)) : std::max(0.0, std::abs(grad_b) - lambda);

    const std::size_t S = u.size();
    std::vector<std::size_t> order(S);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) { return u[a] < u[c]; });

    std::vector<std::size_t> cluster;
    std::vector<double> h;
    for (std::size_t start = 0; start < S;) {
        std::size_t stop = start;
        while (stop < S && u[order[stop]] == u[order[start]]) ++stop;
        cluster.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(stop));
        const double v = u[cluster.front()];
        const bool at_zero = v == 0.0;

        h.assign(cluster.size(), 0.0);
        for (std::size_t k = 0; k < cluster.size(); ++k) {
            const auto s = cluster[k];
            double hs = grad_u[s] + (at_zero ? 0.0 : lambda * sgn(v));
            for (std::size_t t = 0; t < S; ++t)
                if (u[t] != v) hs += gamma * w(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) * sgn(v - u[t]);
            h[k] = hs;
        }

        const std::size_t m = cluster.size();
        if (m == 1) {
            gap = std::max(gap, at_zero ? std::max(0.0, std::abs(h[0]) - lambda) : std::abs(h[0]));
        } else {
            const unsigned full = (1u << m) - 1u;
            for (unsigned mask = 1; mask <= full; ++mask) {
                double sum = 0.0;
                double cut = 0.0;
                for (std::size_t a = 0; a < m; ++a) {
                    if (!(mask >> a & 1u)) continue;
                    sum += h[a];
                    for (std::size_t c = 0; c < m; ++c)
                        if (!(mask >> c & 1u))
                            cut += w(static_cast<Eigen::Index>(cluster[a]), static_cast<Eigen::Index>(cluster[c]));
                }
                const double size = std::popcount(mask);
                const double need = (std::abs(sum) - gamma * cut - (at_zero ? lambda * size : 0.0)) / size;
                gap = std::max(gap, need);
            }
        }
        start = stop;
    }
    return gap;
}

}  // namespace fusednet::detail
