#pragma once

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "fusednet/errors.hpp"

namespace fusednet {

struct PairedTest {
    double mean_diff = 0.0;
    double sd = 0.0;
    double se = 0.0;
    double t_statistic = 0.0;
    double df = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double p_value = 1.0;
    std::size_t n_pairs = 0;
};

/**
 * @brief Two-sided paired t-test and 95% (or `level`) confidence interval on
 * the differences `d`.
 *
 * With zero spread the interval collapses to the mean and p is 1 when the
 * mean is zero, 0 otherwise.
 */
inline PairedTest paired_t_test(const std::vector<double>& d, double level = 0.95) {
    if (d.size() < 2) throw DataError("a paired comparison needs at least two pairs");
    PairedTest r;
    r.n_pairs = d.size();
    const double n = static_cast<double>(d.size());
    r.mean_diff = std::accumulate(d.begin(), d.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : d) ss += (v - r.mean_diff) * (v - r.mean_diff);
    r.sd = std::sqrt(ss / (n - 1.0));
    r.se = r.sd / std::sqrt(n);
    r.df = n - 1.0;
    if (r.se == 0.0) {
        r.t_statistic = r.mean_diff == 0.0 ? 0.0 : std::copysign(INFINITY, r.mean_diff);
        r.ci_low = r.ci_high = r.mean_diff;
        r.p_value = r.mean_diff == 0.0 ? 1.0 : 0.0;
        return r;
    }
    const boost::math::students_t dist(r.df);
    r.t_statistic = r.mean_diff / r.se;
    const double t_crit = boost::math::quantile(boost::math::complement(dist, (1.0 - level) / 2.0));
    r.ci_low = r.mean_diff - t_crit * r.se;
    r.ci_high = r.mean_diff + t_crit * r.se;
    r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t_statistic))));
    return r;
}

/// log10 of a p-value, clamped so that p = 0 stays finite.
inline double log10_p(double p) { return std::log10(std::max(p, DBL_MIN)); }

}  // namespace fusednet
