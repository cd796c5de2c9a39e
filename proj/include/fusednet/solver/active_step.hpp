#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace fusednet::detail {

/**
 * @brief Step for the smooth piece q(z) = z'hz/2 - rhs'z of a piecewise
 * quadratic objective, restricted to the region where every entry of `z0`
 * keeps its sign and every listed pair keeps its order.
 *
 * The direction is the Newton step, or, when h is singular and the gradient
 * has a null-space part, that part (along which q is unbounded inside the
 * region). The step length is the exact line-search minimizer capped at the
 * first boundary; the entry or pair that reaches the boundary is snapped to an
 * exact zero or tie. Returns nothing when no descent direction exists.
 */
inline std::optional<Eigen::VectorXd> bounded_newton_step(const Eigen::MatrixXd& h, const Eigen::VectorXd& rhs,
                                                          const Eigen::VectorXd& z0,
                                                          const std::vector<std::pair<Eigen::Index, Eigen::Index>>& ordered) {
    const auto m = z0.size();
    if (m == 0) return std::nullopt;
    const Eigen::VectorXd g = h * z0 - rhs;
    Eigen::VectorXd d;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
    if (ok) {
        d = ldlt.solve(-g);
        ok = d.allFinite() && (h * d + g).norm() <= 1e-9 * (1.0 + g.norm());
    }
    bool ray = false;
    if (!ok) {
        d = h.completeOrthogonalDecomposition().solve(-g);
        if (!d.allFinite()) return std::nullopt;
        const Eigen::VectorXd null_part = -g - h * d;
        if (null_part.norm() > 1e-10 * (1.0 + g.norm())) {
            d = null_part;
            ray = true;
        }
    }
    const double slope = g.dot(d);
    if (!(slope < 0.0)) return std::nullopt;
    const double curvature = d.dot(h * d);

    double step = ray ? std::numeric_limits<double>::infinity() : 1.0;
    Eigen::Index hit_zero = -1;
    std::pair<Eigen::Index, Eigen::Index> hit_tie{-1, -1};
    for (Eigen::Index k = 0; k < m; ++k) {
        if (z0(k) * d(k) < 0.0) {
            const double t = -z0(k) / d(k);
            if (t < step) {
                step = t;
                hit_zero = k;
                hit_tie = {-1, -1};
            }
        }
    }
    for (const auto& [k, l] : ordered) {
        const double gap0 = z0(k) - z0(l);
        const double rate = d(k) - d(l);
        if (gap0 * rate < 0.0) {
            const double t = -gap0 / rate;
            if (t < step) {
                step = t;
                hit_zero = -1;
                hit_tie = {k, l};
            }
        }
    }
    if (!ray && curvature > 0.0 && -slope / curvature < step) {
        step = -slope / curvature;
        hit_zero = -1;
        hit_tie = {-1, -1};
    }
    if (!(step > 0.0) || !std::isfinite(step)) return std::nullopt;

    Eigen::VectorXd target = step == 1.0 ? Eigen::VectorXd(z0 + d) : Eigen::VectorXd(z0 + step * d);
    if (hit_zero >= 0) target(hit_zero) = 0.0;
    if (hit_tie.first >= 0) target(hit_tie.second) = target(hit_tie.first);
    return target;
}

}  // namespace fusednet::detail
