#pragma once

#include <algorithm>
#include <cmath>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fusednet/design.hpp"
#include "fusednet/errors.hpp"

namespace fusednet {

/**
 * @brief Training statistics used to standardize predictors and center responses.
 *
 * Responses and predictors are centered per habitat (equivalent to an
 * unpenalized per-habitat intercept); predictor columns are then divided by
 * a pooled scale so coefficients are comparable across habitats. Columns with
 * zero within-habitat variance are inactive and carry an exact-zero coefficient.
 */
struct Centering {
    std::vector<double> y_mean;  // per habitat
    Eigen::MatrixXd x_mean;      // habitats x p
    Eigen::VectorXd x_scale;     // p
    std::vector<bool> active;    // p

    int n_groups() const { return static_cast<int>(y_mean.size()); }
    Eigen::Index p() const { return x_scale.size(); }
};

inline Centering compute_centering(const GroupedDesign& design) {
    design.validate();
    const int S = design.n_groups;
    const auto p = design.p();
    Centering c;
    c.y_mean.assign(static_cast<std::size_t>(S), 0.0);
    c.x_mean = Eigen::MatrixXd::Zero(S, p);
    std::vector<double> count(static_cast<std::size_t>(S), 0.0);
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        const auto s = static_cast<std::size_t>(design.group[static_cast<std::size_t>(i)]);
        count[s] += 1.0;
        c.y_mean[s] += design.response(i);
        c.x_mean.row(static_cast<Eigen::Index>(s)) += design.predictors.row(i);
    }
    for (int s = 0; s < S; ++s) {
        const auto n_s = count[static_cast<std::size_t>(s)];
        if (n_s == 0.0) throw DataError("habitat " + std::to_string(s) + " has no training rows");
        c.y_mean[static_cast<std::size_t>(s)] /= n_s;
        c.x_mean.row(s) /= n_s;
    }
    Eigen::VectorXd ss = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd max_abs = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        const auto s = design.group[static_cast<std::size_t>(i)];
        const Eigen::RowVectorXd centered = design.predictors.row(i) - c.x_mean.row(s);
        ss += centered.transpose().cwiseAbs2();
        max_abs = max_abs.cwiseMax(design.predictors.row(i).transpose().cwiseAbs());
    }
    c.x_scale.resize(p);
    c.active.assign(static_cast<std::size_t>(p), true);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double scale = std::sqrt(ss(j) / static_cast<double>(design.rows()));
        if (!(scale > 1e-12 * std::max(1.0, max_abs(j)))) {
            c.x_scale(j) = 1.0;
            c.active[static_cast<std::size_t>(j)] = false;
        } else {
            c.x_scale(j) = scale;
        }
    }
    return c;
}

/// Standardized predictor row for habitat `s`; inactive columns are zero.
inline Eigen::RowVectorXd standardize_row(const Centering& c, const Eigen::Ref<const Eigen::RowVectorXd>& x, int s) {
    Eigen::RowVectorXd z = (x - c.x_mean.row(s)).cwiseQuotient(c.x_scale.transpose());
    for (Eigen::Index j = 0; j < z.size(); ++j)
        if (!c.active[static_cast<std::size_t>(j)]) z(j) = 0.0;
    return z;
}

/// Standardized predictors and centered responses of `design` under `c`.
struct StandardizedData {
    Eigen::MatrixXd z;
    Eigen::VectorXd y;
};

inline StandardizedData standardize(const Centering& c, const GroupedDesign& design) {
    if (design.p() != c.p()) throw DataError("predictor count does not match the fit");
    if (design.n_groups > c.n_groups()) throw DataError("design has more habitats than the fit");
    StandardizedData out;
    out.z.resize(design.rows(), design.p());
    out.y.resize(design.rows());
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        const int s = design.group[static_cast<std::size_t>(i)];
        out.z.row(i) = standardize_row(c, design.predictors.row(i), s);
        out.y(i) = design.response(i) - c.y_mean[static_cast<std::size_t>(s)];
    }
    return out;
}

/**
 * @brief Process-wide tally of returned fits and the worst certified KKT
 * residual among them.
 */
class FitMonitor {
public:
    void record(double kkt_residual, double tol) {
        std::lock_guard<std::mutex> lock(mutex_);
        ++fits_;
        max_kkt_ = std::max(max_kkt_, kkt_residual);
        max_tol_ = std::max(max_tol_, tol);
    }
    long fits() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return fits_;
    }
    double max_kkt() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return max_kkt_;
    }
    double max_tol() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return max_tol_;
    }
    void reset() {
        std::lock_guard<std::mutex> lock(mutex_);
        fits_ = 0;
        max_kkt_ = 0.0;
        max_tol_ = 0.0;
    }

private:
    mutable std::mutex mutex_;
    long fits_ = 0;
    double max_kkt_ = 0.0;
    double max_tol_ = 0.0;
};

inline FitMonitor& fit_monitor() {
    static FitMonitor monitor;
    return monitor;
}

struct SolverDiagnostics {
    long iterations = 0;
    double kkt_residual = 0.0;
    bool polished = false;
    std::vector<double> objective_trace;
};

/// Global part plus one deviation vector per habitat (standardized scale).
struct FusedCoefficients {
    Eigen::VectorXd beta0;
    std::vector<Eigen::VectorXd> deviations;

    Eigen::VectorXd group_beta(int s) const { return beta0 + deviations[static_cast<std::size_t>(s)]; }
};

struct FusedFit {
    FusedCoefficients coef;
    double lambda = 0.0;
    double gamma = 0.0;
    Eigen::MatrixXd weights;
    Centering centering;
    SolverDiagnostics diagnostics;

    int n_groups() const { return static_cast<int>(coef.deviations.size()); }
    Eigen::Index p() const { return coef.beta0.size(); }
    Eigen::VectorXd group_beta(int s) const { return coef.group_beta(s); }
};

struct LassoFit {
    Eigen::VectorXd beta;  // standardized scale
    double lambda = 0.0;
    Centering centering;   // one habitat, or one per habitat when centred within habitats
    SolverDiagnostics diagnostics;
};

struct FeaturelessFit {
    double constant = 0.0;
};

inline FeaturelessFit fit_featureless(const Eigen::VectorXd& y) {
    if (y.size() == 0) throw DataError("featureless fit needs at least one response");
    return FeaturelessFit{y.mean()};
}

/// Default fusion weights: every habitat pair linked with weight 1.
inline Eigen::MatrixXd uniform_weights(int n_groups) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Ones(n_groups, n_groups);
    w.diagonal().setZero();
    return w;
}

inline void validate_weights(const Eigen::MatrixXd& w, int n_groups) {
    if (w.rows() != n_groups || w.cols() != n_groups) throw ConfigError("fusion weights must be S x S");
    for (int s = 0; s < n_groups; ++s) {
        if (w(s, s) != 0.0) throw ConfigError("fusion weights need a zero diagonal");
        for (int t = 0; t < n_groups; ++t) {
            if (!(w(s, t) >= 0.0) || !std::isfinite(w(s, t))) throw ConfigError("fusion weights must be non-negative");
            if (w(s, t) != w(t, s)) throw ConfigError("fusion weights must be symmetric");
        }
    }
}

inline Eigen::VectorXd predict(const FusedFit& fit, const Eigen::MatrixXd& x, int group) {
    if (group < 0 || group >= fit.n_groups())
        throw DataError("habitat index " + std::to_string(group) + " is not part of the fused fit");
    if (x.cols() != fit.p()) throw DataError("predictor count does not match the fit");
    const Eigen::VectorXd beta = fit.group_beta(group);
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        out(i) = standardize_row(fit.centering, x.row(i), group).dot(beta) +
                 fit.centering.y_mean[static_cast<std::size_t>(group)];
    return out;
}

/// Row-wise habitat labels.
inline Eigen::VectorXd predict(const FusedFit& fit, const Eigen::MatrixXd& x, const std::vector<int>& groups) {
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        out(i) = predict(fit, x.row(i), groups[static_cast<std::size_t>(i)])(0);
    return out;
}

inline Eigen::VectorXd predict(const LassoFit& fit, const Eigen::MatrixXd& x, int group) {
    if (group < 0 || group >= fit.centering.n_groups())
        throw DataError("habitat index " + std::to_string(group) + " is not part of the lasso fit");
    if (x.cols() != fit.beta.size()) throw DataError("predictor count does not match the fit");
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        out(i) = standardize_row(fit.centering, x.row(i), group).dot(fit.beta) +
                 fit.centering.y_mean[static_cast<std::size_t>(group)];
    return out;
}

/// Pooled-intercept fits only; per-habitat fits need the habitat of each row.
inline Eigen::VectorXd predict(const LassoFit& fit, const Eigen::MatrixXd& x) {
    if (fit.centering.n_groups() != 1) throw DataError("this lasso fit was centred per habitat; pass habitat labels");
    return predict(fit, x, 0);
}

inline Eigen::VectorXd predict(const LassoFit& fit, const Eigen::MatrixXd& x, const std::vector<int>& groups) {
    if (static_cast<Eigen::Index>(groups.size()) != x.rows()) throw DataError("one habitat label per row is required");
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const int g = fit.centering.n_groups() == 1 ? 0 : groups[static_cast<std::size_t>(i)];
        out(i) = predict(fit, x.row(i), g)(0);
    }
    return out;
}

inline Eigen::VectorXd predict(const FeaturelessFit& fit, const Eigen::MatrixXd& x) {
    return Eigen::VectorXd::Constant(x.rows(), fit.constant);
}

}  // namespace fusednet
