#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fusednet/data_model.hpp"
#include "fusednet/errors.hpp"
#include "fusednet/network.hpp"
#include "fusednet/rng.hpp"

namespace fusednet {

struct SynthSpec {
    int S = 3;
    int D = 15;
    int n_per_group = 40;
    double shared_density = 0.10;
    double specific_density = 0.05;
    double effect_low = 0.4;
    double effect_high = 0.8;
    double noise_sd = 1.0;
    std::uint64_t seed = 1;
    int k_folds = 5;
    double specific_zero_prob = 0.5;  // chance that a varying edge is absent in a habitat
    double log_median = 1.5;          // centre of log10 abundance
    double log_scale = 0.5;           // log10 units per latent unit
    double tau = kDefaultTauDiff;

    void validate() const {
        if (S < 1) throw ConfigError("S must be at least 1");
        if (D < 2) throw ConfigError("D must be at least 2");
        if (S > 26 * 26) throw ConfigError("too many habitats");
        if (n_per_group < k_folds) throw ConfigError("n_per_group must be at least K");
        if (!(shared_density >= 0.0 && shared_density <= 1.0) || !(specific_density >= 0.0 && specific_density <= 1.0) ||
            shared_density + specific_density > 1.0)
            throw ConfigError("densities must lie in [0,1] and sum to at most 1");
        if (!(effect_low >= 0.0) || !(effect_high >= effect_low)) throw ConfigError("need 0 <= effect_low <= effect_high");
        if (!(noise_sd > 0.0)) throw ConfigError("noise_sd must be positive");
        if (!(specific_zero_prob >= 0.0 && specific_zero_prob < 1.0)) throw ConfigError("specific_zero_prob must lie in [0,1)");
        if (!(log_scale > 0.0)) throw ConfigError("log_scale must be positive");
        if (!(tau >= 0.0)) throw ConfigError("tau must be non-negative");
    }
};

struct SynthResult {
    AbundanceTable raw;                    // integer counts, not yet transformed
    PreparedDataset dataset;               // standard pipeline applied, no taxa filtered
    std::vector<Eigen::MatrixXd> weights;  // signed truth association per habitat
    std::vector<GroupNetwork> truth_networks;
    std::vector<DiffNetwork> truth_diffs;  // every habitat pair s < t
    double sparsity = 0.0;                 // of the raw counts
};

namespace detail {

inline std::string habitat_name(int s) {
    std::string name = "h";
    if (s >= 26) name += static_cast<char>('a' + s / 26 - 1);
    name += static_cast<char>('a' + s % 26);
    return name;
}

inline std::string padded(const std::string& prefix, std::size_t i, std::size_t total) {
    std::string digits = std::to_string(i + 1);
    const std::size_t width = std::to_string(total).size();
    return prefix + std::string(width - digits.size(), '0') + digits;
}

}  // namespace detail

/**
 * @brief Grouped abundance data with known shared and habitat-specific structure.
 *
 * Each habitat s has a symmetric weight matrix W_s. Shared edges carry one
 * weight in every habitat; varying edges draw per habitat (possibly zero).
 * Latent log-abundances follow N(0, noise_sd^2 * Omega_s^{-1}) with
 * Omega_s = diag(delta) - W_s and delta_i = 1.5 * max_s sum_j |W_s(i,j)| (1 for
 * taxa without any association),
 * so regressing taxon i on the others gives coefficients W_s(i,j) / delta_i.
 * Counts are round(10^(log_median + log_scale*z) - 1), clipped at zero.
 */
inline SynthResult generate(const SynthSpec& spec) {
    spec.validate();
    const int S = spec.S;
    const int D = spec.D;
    Rng rng(derive_seed(spec.seed, "simulate"));

    auto magnitude = [&] {
        const double m = rng.uniform(spec.effect_low, spec.effect_high);
        return rng.below(2) == 0 ? m : -m;
    };

    std::vector<Eigen::MatrixXd> w(static_cast<std::size_t>(S), Eigen::MatrixXd::Zero(D, D));
    for (int i = 0; i < D; ++i)
        for (int j = i + 1; j < D; ++j) {
            const double u = rng.uniform();
            if (u < spec.shared_density) {
                const double v = magnitude();
                for (auto& ws : w) ws(i, j) = ws(j, i) = v;
            } else if (u < spec.shared_density + spec.specific_density) {
                for (auto& ws : w) {
                    const double v = rng.uniform() < spec.specific_zero_prob ? 0.0 : magnitude();
                    ws(i, j) = ws(j, i) = v;
                }
            }
        }

    Eigen::VectorXd delta = Eigen::VectorXd::Zero(D);
    for (const auto& ws : w)
        for (int i = 0; i < D; ++i) delta(i) = std::max(delta(i), 1.5 * ws.row(i).cwiseAbs().sum());
    for (int i = 0; i < D; ++i)
        if (delta(i) == 0.0) delta(i) = 1.0;

    SynthResult out;
    auto& t = out.raw;
    for (int j = 0; j < D; ++j) t.taxa.push_back(detail::padded("taxon", static_cast<std::size_t>(j), static_cast<std::size_t>(D)));
    for (int s = 0; s < S; ++s) t.group_names.push_back(detail::habitat_name(s));
    const auto N = static_cast<std::size_t>(S) * static_cast<std::size_t>(spec.n_per_group);
    t.counts.resize(static_cast<Eigen::Index>(N), D);

    std::size_t row = 0;
    for (int s = 0; s < S; ++s) {
        Eigen::MatrixXd omega = -w[static_cast<std::size_t>(s)];
        omega.diagonal() = delta;
        Eigen::LLT<Eigen::MatrixXd> llt;
        bool ok = false;
        for (int attempt = 0; attempt < 10; ++attempt) {
            llt.compute(omega);
            if (llt.info() == Eigen::Success) {
                ok = true;
                break;
            }
            omega.diagonal() *= 1.5;
        }
        if (!ok) throw NumericalError("truth precision matrix is not positive definite");
        // Omega = L L', so z = L'^{-1} e has covariance Omega^{-1}.
        const Eigen::MatrixXd upper = llt.matrixU();
        for (int n = 0; n < spec.n_per_group; ++n, ++row) {
            Eigen::VectorXd e(D);
            for (int j = 0; j < D; ++j) e(j) = rng.normal();
            const Eigen::VectorXd z = upper.triangularView<Eigen::Upper>().solve(e) * spec.noise_sd;
            for (int j = 0; j < D; ++j) {
                const double log_abundance = spec.log_median + spec.log_scale * z(j);
                t.counts(static_cast<Eigen::Index>(row), j) = std::max(0.0, std::round(std::pow(10.0, log_abundance) - 1.0));
            }
            t.samples.push_back(detail::padded("sample", row, N));
            t.group.push_back(s);
        }
    }
    t.validate();
    out.sparsity = sparsity(t);
    out.dataset = preprocess(t, spec.k_folds, 0.0, spec.seed);
    out.weights = w;
    for (int s = 0; s < S; ++s)
        out.truth_networks.push_back(symmetrize(w[static_cast<std::size_t>(s)], t.taxa, t.group_names[static_cast<std::size_t>(s)]));
    out.truth_diffs = all_diff_networks(out.truth_networks, spec.tau);
    return out;
}

}  // namespace fusednet
