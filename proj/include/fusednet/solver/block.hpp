#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fusednet/errors.hpp"

namespace fusednet::detail {

/**
 * @brief Exact minimizer of one predictor's block of the fused objective.
 *
 * With the other predictors held fixed, the block problem in the habitat
 * coefficients beta_s = b + u_s reads
 *
 *   sum_s (a_s beta_s^2 - 2 q_s beta_s) + lambda*|b - 0| + lambda*sum_s |beta_s - b|
 *     + gamma * sum_{s<t} w_st |beta_s - beta_t|,
 *
 * i.e. separable convex node costs plus a weighted total-variation term on a
 * small graph: one node per habitat, one free node for `b` and one anchor
 * pinned at zero. Such problems are solved exactly by level-set decomposition:
 * for a level alpha, the nodes lying strictly above alpha form the minimal
 * minimizer of  A -> sum_{i in A} f_i'(alpha) + cut(A),  a minimum cut found
 * here by enumeration because the graph has at most 16 nodes.
 */
class FusionBlockSolver {
public:
    static constexpr int kMaxGroups = 14;

    FusionBlockSolver(int n_groups, double lambda, double gamma, const Eigen::MatrixXd& weights)
        : S_(n_groups), n_(n_groups + 2) {
        if (n_groups < 1 || n_groups > kMaxGroups)
            throw ConfigError("the fused solver supports 1 to " + std::to_string(kMaxGroups) + " habitats");
        edge_.assign(static_cast<std::size_t>(n_ * n_), 0.0);
        auto set_edge = [&](int i, int j, double v) {
            edge_[static_cast<std::size_t>(i * n_ + j)] = v;
            edge_[static_cast<std::size_t>(j * n_ + i)] = v;
        };
        for (int s = 0; s < S_; ++s) {
            for (int t = s + 1; t < S_; ++t) set_edge(s, t, gamma * weights(s, t));
            set_edge(s, b_node(), lambda);
        }
        set_edge(b_node(), anchor_node(), lambda);

        internal_.assign(std::size_t{1} << n_, 0.0);
        for (unsigned mask = 1; mask < (1u << n_); ++mask) {
            const int i = std::countr_zero(mask);
            const unsigned rest = mask & (mask - 1u);
            double sum = internal_[rest];
            for (unsigned r = rest; r != 0; r &= r - 1u) sum += edge(i, std::countr_zero(r));
            internal_[mask] = sum;
        }
        scratch_sum_.resize(std::size_t{1} << n_);
        scratch_mask_.resize(std::size_t{1} << n_);
    }

    /**
     * Node costs f_s(x) = a_s x^2 - 2 q_s x (a_s >= 0). Writes the habitat
     * coefficients to `beta` and the global part to `b`; members of a fused
     * cluster receive bit-identical values, and clusters tied to the anchor are
     * exactly zero.
     */
    void solve(std::span<const double> a, std::span<const double> q, std::span<double> beta, double& b) {
        a_ = a;
        q_ = q;
        Forces e{};
        const unsigned all = (1u << n_) - 1u;
        solve_level(all, e, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
        for (int s = 0; s < S_; ++s) beta[static_cast<std::size_t>(s)] = x_[static_cast<std::size_t>(s)];
        b = x_[static_cast<std::size_t>(b_node())];
    }

private:
    using Forces = std::array<double, kMaxGroups + 2>;

    int b_node() const { return S_; }
    int anchor_node() const { return S_ + 1; }
    double edge(int i, int j) const { return edge_[static_cast<std::size_t>(i * n_ + j)]; }
    double cut(unsigned within, unsigned side) const { return internal_[within] - internal_[side] - internal_[within ^ side]; }

    // Right derivative of node i's cost plus its external linear force, at alpha.
    double slope(int i, double alpha, const Forces& e) const {
        if (i < S_) return 2.0 * a_[static_cast<std::size_t>(i)] * alpha - 2.0 * q_[static_cast<std::size_t>(i)] + e[static_cast<std::size_t>(i)];
        return e[static_cast<std::size_t>(i)];
    }

    // Minimal minimizer of sign*sum_A slope + cut_C(A) over subsets of `candidates`.
    unsigned min_cut_side(unsigned C, unsigned candidates, const std::array<double, kMaxGroups + 2>& slopes,
                          double sign, double threshold) {
        const int k = std::popcount(candidates);
        std::array<int, kMaxGroups + 2> nodes{};
        int idx = 0;
        for (unsigned r = candidates; r != 0; r &= r - 1u) nodes[static_cast<std::size_t>(idx++)] = std::countr_zero(r);

        double best = 0.0;
        unsigned best_mask = 0;
        int best_bits = 0;
        scratch_sum_[0] = 0.0;
        scratch_mask_[0] = 0;
        for (unsigned m = 1; m < (1u << k); ++m) {
            const int low = std::countr_zero(m);
            const unsigned prev = m & (m - 1u);
            const int node = nodes[static_cast<std::size_t>(low)];
            scratch_sum_[m] = scratch_sum_[prev] + slopes[static_cast<std::size_t>(node)];
            scratch_mask_[m] = scratch_mask_[prev] | (1u << node);
            const double value = sign * scratch_sum_[m] + cut(C, scratch_mask_[m]);
            const int bits = std::popcount(m);
            if (value < best || (value == best && best_mask != 0 && bits < best_bits)) {
                best = value;
                best_mask = scratch_mask_[m];
                best_bits = bits;
            }
        }
        return best < -threshold ? best_mask : 0u;
    }

    void solve_level(unsigned C, const Forces& e, double lo, double hi) {
        const unsigned anchor_bit = 1u << anchor_node();
        double alpha;
        if (C & anchor_bit) {
            alpha = 0.0;
        } else {
            double quad = 0.0;
            double lin = 0.0;
            for (unsigned r = C; r != 0; r &= r - 1u) {
                const int i = std::countr_zero(r);
                if (i < S_) {
                    quad += a_[static_cast<std::size_t>(i)];
                    lin += 2.0 * q_[static_cast<std::size_t>(i)];
                }
                lin -= e[static_cast<std::size_t>(i)];
            }
            if (quad > 0.0) {
                alpha = lin / (2.0 * quad);
            } else if (lin > 0.0) {
                alpha = hi;
            } else if (lin < 0.0) {
                alpha = lo;
            } else {
                alpha = std::isfinite(lo) ? lo : (std::isfinite(hi) ? hi : 0.0);
            }
            if (!std::isfinite(alpha)) alpha = std::isfinite(lo) ? lo : (std::isfinite(hi) ? hi : 0.0);
            alpha = std::clamp(alpha, lo, hi);
        }

        std::array<double, kMaxGroups + 2> slopes{};
        double scale = internal_[C];
        for (unsigned r = C & ~anchor_bit; r != 0; r &= r - 1u) {
            const int i = std::countr_zero(r);
            slopes[static_cast<std::size_t>(i)] = slope(i, alpha, e);
            scale += std::abs(slopes[static_cast<std::size_t>(i)]);
        }
        const double threshold = 1e-13 * scale + std::numeric_limits<double>::min();
        const unsigned candidates = C & ~anchor_bit;
        unsigned up = min_cut_side(C, candidates, slopes, 1.0, threshold);
        unsigned down = min_cut_side(C, candidates & ~up, slopes, -1.0, threshold);
        // The whole set pushing past alpha only happens when alpha sits on a bound.
        if (up == C) up = 0;
        if (down == C) down = 0;

        for (unsigned r = C & ~up & ~down; r != 0; r &= r - 1u) x_[static_cast<std::size_t>(std::countr_zero(r))] = alpha;
        if (up != 0) {
            Forces eu = e;
            for (unsigned r = up; r != 0; r &= r - 1u) {
                const int i = std::countr_zero(r);
                for (unsigned o = C & ~up; o != 0; o &= o - 1u) eu[static_cast<std::size_t>(i)] += edge(i, std::countr_zero(o));
            }
            solve_level(up, eu, alpha, hi);
        }
        if (down != 0) {
            Forces ed = e;
            for (unsigned r = down; r != 0; r &= r - 1u) {
                const int i = std::countr_zero(r);
                for (unsigned o = C & ~down; o != 0; o &= o - 1u) ed[static_cast<std::size_t>(i)] -= edge(i, std::countr_zero(o));
            }
            solve_level(down, ed, lo, alpha);
        }
    }

    int S_;
    int n_;
    std::vector<double> edge_;
    std::vector<double> internal_;
    std::vector<double> scratch_sum_;
    std::vector<unsigned> scratch_mask_;
    std::span<const double> a_;
    std::span<const double> q_;
    std::array<double, kMaxGroups + 2> x_{};
};

}  // namespace fusednet::detail
