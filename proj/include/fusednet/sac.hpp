#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "fusednet/data_model.hpp"
#include "fusednet/design.hpp"
#include "fusednet/errors.hpp"
#include "fusednet/rng.hpp"
#include "fusednet/solver/cv.hpp"
#include "fusednet/solver/model.hpp"
#include "fusednet/stats.hpp"
#include "fusednet/text_io.hpp"

namespace fusednet {

enum class Scenario { Same, All };

inline const char* scenario_name(Scenario s) { return s == Scenario::Same ? "Same" : "All"; }

enum class Algorithm { FusedAll, LassoSame, LassoAll, FeaturelessSame, FeaturelessAll };

inline const std::vector<Algorithm>& all_algorithms() {
    static const std::vector<Algorithm> v{Algorithm::FusedAll, Algorithm::LassoSame, Algorithm::LassoAll,
                                          Algorithm::FeaturelessSame, Algorithm::FeaturelessAll};
    return v;
}

inline std::string algorithm_label(Algorithm a) {
    switch (a) {
        case Algorithm::FusedAll: return "fused_all";
        case Algorithm::LassoSame: return "lasso_same";
        case Algorithm::LassoAll: return "lasso_all";
        case Algorithm::FeaturelessSame: return "featureless_same";
        case Algorithm::FeaturelessAll: return "featureless_all";
    }
    return "";
}

/// Accepts the canonical labels plus "fuser_all" as an alias of "fused_all".
inline Algorithm parse_algorithm(const std::string& label) {
    if (label == "fuser_all") return Algorithm::FusedAll;
    for (auto a : all_algorithms())
        if (algorithm_label(a) == label) return a;
    throw ConfigError("unknown algorithm '" + label + "'");
}

inline Scenario scenario_of(Algorithm a) {
    return (a == Algorithm::LassoSame || a == Algorithm::FeaturelessSame) ? Scenario::Same : Scenario::All;
}

/// Train/test rows for one (scenario, habitat, fold) cell.
struct SplitPlan {
    Scenario scenario = Scenario::Same;
    int habitat = 0;
    int fold = 0;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
};

inline SplitPlan make_split(const PreparedDataset& ds, Scenario scenario, int habitat, int fold) {
    SplitPlan plan{scenario, habitat, fold, {}, {}};
    const auto& g = ds.table.group;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const bool in_fold = ds.fold[i] == fold;
        if (g[i] == habitat && in_fold)
            plan.test_rows.push_back(i);
        else if (!in_fold && (scenario == Scenario::All || g[i] == habitat))
            plan.train_rows.push_back(i);
    }
    return plan;
}

/// One plan per (habitat, fold), habitat-major.
inline std::vector<SplitPlan> enumerate_splits(const PreparedDataset& ds, Scenario scenario) {
    std::vector<SplitPlan> plans;
    for (int s = 0; s < static_cast<int>(ds.table.n_groups()); ++s)
        for (int k = 0; k < ds.k_folds; ++k) plans.push_back(make_split(ds, scenario, s, k));
    return plans;
}

inline double mse(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual) {
    if (predicted.size() != actual.size()) throw DataError("mse: length mismatch");
    if (actual.size() == 0) throw DataError("mse: empty vectors");
    return (predicted - actual).squaredNorm() / static_cast<double>(actual.size());
}

struct CvRecord {
    std::string dataset;
    std::string algorithm;
    Scenario scenario = Scenario::Same;
    std::string taxon;
    std::string habitat;
    int fold = 0;  // 0-based
    double mse = 0.0;
    // Canonical sort positions.
    std::size_t taxon_index = 0;
    int habitat_index = 0;
};

struct FailedCell {
    std::string algorithm;
    std::string taxon;
    std::string habitat;
    int fold = 0;
    std::string message;
};

struct SacOptions {
    std::string dataset_label = "dataset";
    CvOptions cv{};
    unsigned threads = 0;  // 0: hardware concurrency
    Intercept lasso_all_intercept = Intercept::Pooled;
};

struct SacResult {
    std::vector<CvRecord> records;
    std::vector<FailedCell> failures;
};

namespace detail {

inline bool record_less(const CvRecord& a, const CvRecord& b) {
    return std::tie(a.dataset, a.algorithm, a.taxon_index, a.habitat_index, a.fold) <
           std::tie(b.dataset, b.algorithm, b.taxon_index, b.habitat_index, b.fold);
}

inline unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

/// Runs `n` independent jobs on a pool of workers.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(n, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

struct SacUnit {
    Algorithm algorithm;
    std::size_t taxon;
    int fold;
    int habitat;  // -1 for All-scenario units, which score every habitat
};

inline std::vector<std::size_t> fold_complement(const PreparedDataset& ds, int fold, int habitat) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.fold.size(); ++i)
        if (ds.fold[i] != fold && (habitat < 0 || ds.table.group[i] == habitat)) rows.push_back(i);
    return rows;
}

}  // namespace detail

/// Seed for the inner CV of one (taxon, outer fold) cell, shared by all algorithms.
inline std::uint64_t inner_cv_seed(std::uint64_t seed, std::size_t taxon, int fold, int k_folds) {
    return derive_seed(seed, "inner_cv", static_cast<std::uint64_t>(taxon) * static_cast<std::uint64_t>(k_folds) +
                                             static_cast<std::uint64_t>(fold));
}

/**
 * @brief Taxon-wise Same-All cross-validation.
 *
 * Each (algorithm, taxon, fold) for All-scenario algorithms, and each
 * (algorithm, taxon, fold, habitat) for Same-scenario ones, is an independent
 * job. A failing fit becomes a FailedCell for the habitats it would have
 * scored. Records come back in canonical order regardless of scheduling.
 */
inline SacResult run_sac(const PreparedDataset& ds, const std::vector<Algorithm>& algorithms, int k_folds,
                         std::uint64_t seed, const SacOptions& options = {}) {
    if (k_folds != ds.k_folds)
        throw ConfigError("K=" + std::to_string(k_folds) + " does not match the dataset's " + std::to_string(ds.k_folds) +
                          " folds");
    if (algorithms.empty()) throw ConfigError("no algorithms requested");
    const auto& t = ds.table;
    const int S = static_cast<int>(t.n_groups());
    const auto D = t.n_taxa();
    if (D < 2) throw DataError("taxon-wise cross-validation needs at least two taxa");

    std::vector<Algorithm> algos;
    for (auto a : algorithms)
        if (std::find(algos.begin(), algos.end(), a) == algos.end()) algos.push_back(a);

    std::vector<GroupedDesign> tasks;
    tasks.reserve(D);
    for (std::size_t d = 0; d < D; ++d) tasks.push_back(build_taxon_task(ds, d));

    std::vector<detail::SacUnit> units;
    for (auto a : algos)
        for (std::size_t d = 0; d < D; ++d)
            for (int k = 0; k < k_folds; ++k) {
                if (scenario_of(a) == Scenario::All)
                    units.push_back({a, d, k, -1});
                else
                    for (int s = 0; s < S; ++s) units.push_back({a, d, k, s});
            }

    std::vector<std::vector<CvRecord>> unit_records(units.size());
    std::vector<std::vector<FailedCell>> unit_failures(units.size());
    const Eigen::MatrixXd weights = uniform_weights(S);

    detail::parallel_for(units.size(), options.threads, [&](std::size_t u) {
        const auto& unit = units[u];
        const auto& task = tasks[unit.taxon];
        const auto label = algorithm_label(unit.algorithm);
        std::vector<int> habitats;
        if (unit.habitat >= 0)
            habitats.push_back(unit.habitat);
        else
            for (int s = 0; s < S; ++s) habitats.push_back(s);

        try {
            const auto train = task.subset(detail::fold_complement(ds, unit.fold, unit.habitat));
            const auto cv_seed = inner_cv_seed(seed, unit.taxon, unit.fold, k_folds);
            std::optional<FusedFit> fused;
            std::optional<LassoFit> lasso;
            std::optional<FeaturelessFit> featureless;
            switch (unit.algorithm) {
                case Algorithm::FusedAll: fused = cv_fused(train, weights, options.cv, cv_seed).fit; break;
                case Algorithm::LassoSame: lasso = cv_lasso(train, options.cv, cv_seed).fit; break;
                case Algorithm::LassoAll: lasso = cv_lasso(train, options.cv, cv_seed, options.lasso_all_intercept).fit; break;
                case Algorithm::FeaturelessSame:
                case Algorithm::FeaturelessAll: featureless = fit_featureless(train.response); break;
            }
            for (int s : habitats) {
                const auto plan = make_split(ds, scenario_of(unit.algorithm), s, unit.fold);
                const auto test = task.subset(plan.test_rows);
                Eigen::VectorXd pred;
                if (fused)
                    pred = predict(*fused, test.predictors, s);
                else if (lasso)
                    pred = predict(*lasso, test.predictors, test.group);
                else
                    pred = predict(*featureless, test.predictors);
                CvRecord r;
                r.dataset = options.dataset_label;
                r.algorithm = label;
                r.scenario = scenario_of(unit.algorithm);
                r.taxon = t.taxa[unit.taxon];
                r.habitat = t.group_names[static_cast<std::size_t>(s)];
                r.fold = unit.fold;
                r.mse = mse(pred, test.response);
                r.taxon_index = unit.taxon;
                r.habitat_index = s;
                unit_records[u].push_back(std::move(r));
            }
        } catch (const std::exception& e) {
            unit_records[u].clear();
            for (int s : habitats)
                unit_failures[u].push_back(
                    {label, t.taxa[unit.taxon], t.group_names[static_cast<std::size_t>(s)], unit.fold, e.what()});
        }
    });

    SacResult result;
    for (std::size_t u = 0; u < units.size(); ++u) {
        result.records.insert(result.records.end(), unit_records[u].begin(), unit_records[u].end());
        result.failures.insert(result.failures.end(), unit_failures[u].begin(), unit_failures[u].end());
    }
    std::sort(result.records.begin(), result.records.end(), detail::record_less);
    return result;
}

// ---------------------------------------------------------------------------
// Aggregation and paired comparison.

enum class RecordKey { Dataset, Algorithm, Scenario, Taxon, Habitat, Fold };

inline std::string record_key_value(const CvRecord& r, RecordKey k) {
    switch (k) {
        case RecordKey::Dataset: return r.dataset;
        case RecordKey::Algorithm: return r.algorithm;
        case RecordKey::Scenario: return scenario_name(r.scenario);
        case RecordKey::Taxon: return r.taxon;
        case RecordKey::Habitat: return r.habitat;
        case RecordKey::Fold: return std::to_string(r.fold + 1);
    }
    return "";
}

struct AggregateRow {
    std::vector<std::string> key;
    double mean = 0.0;
    std::size_t count = 0;
};

/// Mean MSE per combination of `by`; rows ordered by key.
inline std::vector<AggregateRow> aggregate(const std::vector<CvRecord>& records, const std::vector<RecordKey>& by) {
    if (records.empty()) throw DataError("no records to aggregate");
    std::map<std::vector<std::string>, std::pair<double, std::size_t>> acc;
    for (const auto& r : records) {
        std::vector<std::string> key;
        for (auto k : by) key.push_back(record_key_value(r, k));
        auto& slot = acc[key];
        slot.first += r.mse;
        ++slot.second;
    }
    std::vector<AggregateRow> out;
    for (const auto& [key, v] : acc) out.push_back({key, v.first / static_cast<double>(v.second), v.second});
    return out;
}

struct ComparisonSummary {
    std::string dataset;
    std::string algorithm_a;
    std::string algorithm_b;
    double mean_diff = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double p_value = 1.0;
    std::size_t n_pairs = 0;
};

inline const std::vector<RecordKey>& default_pairing() {
    static const std::vector<RecordKey> keys{RecordKey::Dataset, RecordKey::Taxon, RecordKey::Habitat, RecordKey::Fold};
    return keys;
}

/**
 * @brief Paired t comparison of MSE_a - MSE_b over cells matched on `pairing`.
 *
 * Cells present for only one algorithm are dropped. Negative mean_diff means
 * algorithm a predicts better.
 */
inline ComparisonSummary paired_compare(const std::vector<CvRecord>& records, const std::string& algorithm_a,
                                        const std::string& algorithm_b,
                                        const std::vector<RecordKey>& pairing = default_pairing()) {
    std::map<std::vector<std::string>, double> a_cells, b_cells;
    for (const auto& r : records) {
        if (r.algorithm != algorithm_a && r.algorithm != algorithm_b) continue;
        std::vector<std::string> key;
        for (auto k : pairing) key.push_back(record_key_value(r, k));
        if (r.algorithm == algorithm_a) a_cells[key] = r.mse;
        if (r.algorithm == algorithm_b) b_cells[key] = r.mse;
    }
    std::vector<double> d;
    for (const auto& [key, v] : a_cells) {
        const auto it = b_cells.find(key);
        if (it != b_cells.end()) d.push_back(v - it->second);
    }
    if (d.size() < 2)
        throw DataError("comparing '" + algorithm_a + "' with '" + algorithm_b + "' needs at least two paired cells, found " +
                        std::to_string(d.size()));
    const auto test = paired_t_test(d);
    ComparisonSummary c;
    c.dataset = records.empty() ? "" : records.front().dataset;
    c.algorithm_a = algorithm_a;
    c.algorithm_b = algorithm_b;
    c.mean_diff = test.mean_diff;
    c.ci_low = test.ci_low;
    c.ci_high = test.ci_high;
    c.p_value = test.p_value;
    c.n_pairs = test.n_pairs;
    return c;
}

// ---------------------------------------------------------------------------
// Report files.

inline std::string records_to_csv(const std::vector<CvRecord>& records) {
    std::string out = "dataset,algorithm,scenario,taxon,habitat,fold,mse\n";
    for (const auto& r : records)
        out += r.dataset + "," + r.algorithm + "," + scenario_name(r.scenario) + "," + r.taxon + "," + r.habitat + "," +
               std::to_string(r.fold + 1) + "," + text::format_double(r.mse) + "\n";
    return out;
}

inline std::vector<CvRecord> records_from_csv(const std::filesystem::path& path) {
    const auto rows = text::read_rows(path, ',');
    if (rows.empty() || rows[0].size() != 7 || rows[0][0] != "dataset") throw DataError("'" + path.string() + "' is not a records file");
    std::vector<CvRecord> out;
    std::map<std::string, std::size_t> taxon_order;
    std::map<std::string, int> habitat_order;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.size() != 7) throw DataError("records row " + std::to_string(i + 1) + " has " + std::to_string(row.size()) + " fields");
        CvRecord r;
        r.dataset = row[0];
        r.algorithm = row[1];
        if (row[2] != "Same" && row[2] != "All") throw DataError("records row " + std::to_string(i + 1) + ": bad scenario");
        r.scenario = row[2] == "Same" ? Scenario::Same : Scenario::All;
        r.taxon = row[3];
        r.habitat = row[4];
        r.fold = std::stoi(row[5]) - 1;
        r.mse = text::parse_double_or_throw(row[6], "records mse");
        r.taxon_index = taxon_order.emplace(r.taxon, taxon_order.size()).first->second;
        r.habitat_index = habitat_order.emplace(r.habitat, static_cast<int>(habitat_order.size())).first->second;
        out.push_back(std::move(r));
    }
    return out;
}

inline std::string comparisons_to_csv(const std::vector<ComparisonSummary>& rows) {
    std::string out = "dataset,algo_a,algo_b,mean_diff,ci_low,ci_high,p_value,log10_p,n_pairs\n";
    for (const auto& c : rows)
        out += c.dataset + "," + c.algorithm_a + "," + c.algorithm_b + "," + text::format_double(c.mean_diff) + "," +
               text::format_double(c.ci_low) + "," + text::format_double(c.ci_high) + "," +
               text::format_double(c.p_value) + "," + text::format_double(log10_p(c.p_value)) + "," +
               std::to_string(c.n_pairs) + "\n";
    return out;
}

}  // namespace fusednet
