#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "fusednet/errors.hpp"
#include "fusednet/rng.hpp"
#include "fusednet/text_io.hpp"

namespace fusednet {

/**
 * @brief Sample-by-taxon abundance matrix with a habitat label per sample.
 *
 * Habitat indices are 0-based internally and follow the lexicographic order of
 * `group_names`. Files and reports use the names.
 */
struct AbundanceTable {
    std::vector<std::string> taxa;
    std::vector<std::string> samples;
    Eigen::MatrixXd counts;          // samples x taxa
    std::vector<int> group;          // habitat index per sample
    std::vector<std::string> group_names;
    bool transformed = false;

    std::size_t n_samples() const { return samples.size(); }
    std::size_t n_taxa() const { return taxa.size(); }
    std::size_t n_groups() const { return group_names.size(); }

    std::vector<std::size_t> group_sizes() const {
        std::vector<std::size_t> sizes(n_groups(), 0);
        for (int g : group) ++sizes[static_cast<std::size_t>(g)];
        return sizes;
    }

    std::vector<std::size_t> rows_of_group(int g) const {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < group.size(); ++i)
            if (group[i] == g) rows.push_back(i);
        return rows;
    }

    std::size_t taxon_index(const std::string& name) const {
        const auto it = std::find(taxa.begin(), taxa.end(), name);
        if (it == taxa.end()) throw DataError("unknown taxon '" + name + "'");
        return static_cast<std::size_t>(it - taxa.begin());
    }

    int group_index(const std::string& name) const {
        const auto it = std::find(group_names.begin(), group_names.end(), name);
        if (it == group_names.end()) throw DataError("unknown habitat '" + name + "'");
        return static_cast<int>(it - group_names.begin());
    }

    /// Throws DataError when any structural invariant is broken.
    void validate() const {
        if (static_cast<std::size_t>(counts.rows()) != samples.size() ||
            static_cast<std::size_t>(counts.cols()) != taxa.size())
            throw DataError("count matrix shape does not match sample/taxon lists");
        if (group.size() != samples.size()) throw DataError("every sample needs exactly one habitat");
        if (std::set<std::string>(taxa.begin(), taxa.end()).size() != taxa.size())
            throw DataError("duplicate taxon identifiers");
        if (std::set<std::string>(samples.begin(), samples.end()).size() != samples.size())
            throw DataError("duplicate sample identifiers");
        std::vector<bool> seen(group_names.size(), false);
        for (int g : group) {
            if (g < 0 || static_cast<std::size_t>(g) >= group_names.size())
                throw DataError("habitat index out of range");
            seen[static_cast<std::size_t>(g)] = true;
        }
        if (std::find(seen.begin(), seen.end(), false) != seen.end())
            throw DataError("habitat indices are not contiguous");
        for (Eigen::Index i = 0; i < counts.rows(); ++i)
            for (Eigen::Index j = 0; j < counts.cols(); ++j)
                if (!(counts(i, j) >= 0.0) || !std::isfinite(counts(i, j)))
                    throw DataError("invalid abundance at sample '" + samples[static_cast<std::size_t>(i)] +
                                    "', taxon '" + taxa[static_cast<std::size_t>(j)] + "'");
    }

    /// Subset of rows, keeping their relative order.
    AbundanceTable select_rows(const std::vector<std::size_t>& rows) const {
        AbundanceTable out;
        out.taxa = taxa;
        out.group_names = group_names;
        out.transformed = transformed;
        out.counts.resize(static_cast<Eigen::Index>(rows.size()), counts.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            out.samples.push_back(samples[rows[r]]);
            out.group.push_back(group[rows[r]]);
            out.counts.row(static_cast<Eigen::Index>(r)) = counts.row(static_cast<Eigen::Index>(rows[r]));
        }
        return out;
    }
};

/// Parameters that shaped a prepared dataset, recorded for provenance.
struct PreprocessParams {
    double min_prevalence = 0.10;
    int k_folds = 5;
    std::uint64_t seed = 0;
    std::size_t samples_dropped = 0;
    std::size_t taxa_dropped = 0;
};

/// Transformed, balanced, filtered table with a fixed K-fold label per sample.
struct PreparedDataset {
    AbundanceTable table;
    std::vector<int> fold;  // 0-based fold per sample
    int k_folds = 0;
    std::uint64_t seed = 0;
    PreprocessParams params;
};

/**
 * @brief Load an abundance matrix and its habitat metadata.
 *
 * The matrix has taxa in the header row and sample ids in the first column.
 * Metadata is a two-column `sample_id,group` table; extra metadata rows are
 * ignored, missing ones are an error.
 */
inline AbundanceTable load_table(const std::filesystem::path& path, const std::filesystem::path& metadata_path) {
    const auto rows = text::read_rows(path, text::delimiter_for(path));
    if (rows.size() < 2) throw DataError("'" + path.string() + "' has no sample rows");
    AbundanceTable t;
    t.taxa.assign(rows[0].begin() + 1, rows[0].end());
    if (t.taxa.empty()) throw DataError("'" + path.string() + "' has no taxon columns");

    const auto meta = text::read_rows(metadata_path, text::delimiter_for(metadata_path));
    if (meta.empty() || meta[0].size() < 2 || meta[0][0] != "sample_id" || meta[0][1] != "group")
        throw DataError("metadata header must be 'sample_id,group'");
    std::unordered_map<std::string, std::string> group_of;
    for (std::size_t r = 1; r < meta.size(); ++r) {
        if (meta[r].size() < 2) throw DataError("metadata row " + std::to_string(r + 1) + " has fewer than 2 fields");
        group_of[meta[r][0]] = meta[r][1];
    }

    const auto n = rows.size() - 1;
    const auto d = t.taxa.size();
    t.counts.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::vector<std::string> group_label(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = rows[i + 1];
        if (row.size() != d + 1)
            throw DataError("row " + std::to_string(i + 2) + " has " + std::to_string(row.size()) + " fields, expected " +
                            std::to_string(d + 1));
        t.samples.push_back(row[0]);
        for (std::size_t j = 0; j < d; ++j) {
            double v;
            if (!text::parse_double(row[j + 1], v) || v < 0.0)
                throw DataError("invalid count '" + row[j + 1] + "' at row " + std::to_string(i + 2) + " (sample '" +
                                row[0] + "'), column " + std::to_string(j + 2) + " (taxon '" + t.taxa[j] + "')");
            t.counts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
        const auto it = group_of.find(row[0]);
        if (it == group_of.end()) throw DataError("sample '" + row[0] + "' is missing from the metadata");
        group_label[i] = it->second;
    }

    std::set<std::string> names(group_label.begin(), group_label.end());
    t.group_names.assign(names.begin(), names.end());
    for (const auto& g : group_label) t.group.push_back(t.group_index(g));
    t.validate();
    return t;
}

/// log10(x + 1) on every entry; zeros stay zero.
inline AbundanceTable log_transform(const AbundanceTable& table) {
    if (table.transformed) throw DataError("table is already log-transformed");
    AbundanceTable out = table;
    out.counts = table.counts.unaryExpr([](double x) { return std::log10(x + 1.0); });
    out.transformed = true;
    return out;
}

/// Common group size after balancing: min(floor(mean size), smallest size).
inline std::size_t balanced_group_size(const std::vector<std::size_t>& sizes) {
    const auto total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    const auto mean_floor = total / sizes.size();
    return std::min(mean_floor, *std::min_element(sizes.begin(), sizes.end()));
}

/**
 * @brief Subsample every habitat down to a common size without replacement.
 *
 * Retained samples keep their input order.
 */
inline AbundanceTable balance_groups(const AbundanceTable& table, std::uint64_t seed) {
    if (table.n_groups() == 0) throw DataError("table has no habitats");
    const auto sizes = table.group_sizes();
    if (std::find(sizes.begin(), sizes.end(), std::size_t{0}) != sizes.end())
        throw DataError("every habitat must contain at least one sample");
    const auto target = balanced_group_size(sizes);

    Rng rng(seed);
    std::vector<std::size_t> keep;
    for (std::size_t g = 0; g < table.n_groups(); ++g) {
        auto rows = table.rows_of_group(static_cast<int>(g));
        rng.shuffle(rows);
        rows.resize(target);
        keep.insert(keep.end(), rows.begin(), rows.end());
    }
    std::sort(keep.begin(), keep.end());
    return table.select_rows(keep);
}

/// Keeps the taxa whose fraction of non-zero samples is at least `min_prevalence`.
inline AbundanceTable filter_low_prevalence(const AbundanceTable& table, double min_prevalence) {
    if (table.n_samples() == 0 || table.n_taxa() == 0) throw DataError("cannot filter an empty table");
    if (!(min_prevalence >= 0.0 && min_prevalence <= 1.0)) throw ConfigError("min_prevalence must lie in [0, 1]");
    const auto n = static_cast<double>(table.n_samples());
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < table.counts.cols(); ++j) {
        const auto present = (table.counts.col(j).array() > 0.0).count();
        if (static_cast<double>(present) / n >= min_prevalence) keep.push_back(j);
    }
    if (keep.empty())
        throw DataError("all taxa fall below the prevalence threshold; choose a lower --min-prevalence");

    AbundanceTable out = table;
    out.taxa.clear();
    out.counts.resize(table.counts.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
        out.taxa.push_back(table.taxa[static_cast<std::size_t>(keep[c])]);
        out.counts.col(static_cast<Eigen::Index>(c)) = table.counts.col(keep[c]);
    }
    return out;
}

/**
 * @brief Within each habitat, shuffle and deal samples round-robin into K folds.
 */
inline PreparedDataset assign_folds(const AbundanceTable& table, int k_folds, std::uint64_t seed) {
    if (k_folds < 2) throw ConfigError("K must be at least 2");
    const auto sizes = table.group_sizes();
    for (std::size_t g = 0; g < sizes.size(); ++g)
        if (sizes[g] < static_cast<std::size_t>(k_folds))
            throw DataError("habitat '" + table.group_names[g] + "' has " + std::to_string(sizes[g]) +
                            " samples, fewer than K=" + std::to_string(k_folds));

    PreparedDataset ds;
    ds.table = table;
    ds.k_folds = k_folds;
    ds.seed = seed;
    ds.fold.assign(table.n_samples(), 0);
    Rng rng(seed);
    for (std::size_t g = 0; g < table.n_groups(); ++g) {
        auto rows = table.rows_of_group(static_cast<int>(g));
        rng.shuffle(rows);
        for (std::size_t r = 0; r < rows.size(); ++r) ds.fold[rows[r]] = static_cast<int>(r % static_cast<std::size_t>(k_folds));
    }
    ds.params.k_folds = k_folds;
    ds.params.seed = seed;
    return ds;
}

/// Fraction of exactly-zero entries.
inline double sparsity(const AbundanceTable& table) {
    if (table.counts.size() == 0) return 0.0;
    return static_cast<double>((table.counts.array() == 0.0).count()) / static_cast<double>(table.counts.size());
}

/**
 * @brief transform -> balance -> filter -> folds, with named seed streams
 * derived from one master seed.
 */
inline PreparedDataset preprocess(const AbundanceTable& raw, int k_folds, double min_prevalence, std::uint64_t seed) {
    const auto logged = log_transform(raw);
    const auto balanced = balance_groups(logged, derive_seed(seed, "balance"));
    const auto filtered = filter_low_prevalence(balanced, min_prevalence);
    auto ds = assign_folds(filtered, k_folds, derive_seed(seed, "folds"));
    ds.seed = seed;
    ds.params.seed = seed;
    ds.params.min_prevalence = min_prevalence;
    ds.params.samples_dropped = raw.n_samples() - balanced.n_samples();
    ds.params.taxa_dropped = balanced.n_taxa() - filtered.n_taxa();
    return ds;
}

// ---------------------------------------------------------------------------
// Dataset directory: matrix.csv plus a flat key=value sidecar (dataset.txt).

inline std::string matrix_to_csv(const AbundanceTable& t) {
    std::string out = "sample_id";
    for (const auto& taxon : t.taxa) out += "," + taxon;
    out += "\n";
    for (std::size_t i = 0; i < t.n_samples(); ++i) {
        out += t.samples[i];
        for (std::size_t j = 0; j < t.n_taxa(); ++j)
            out += "," + text::format_double(t.counts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        out += "\n";
    }
    return out;
}

inline std::string metadata_to_csv(const AbundanceTable& t) {
    std::string out = "sample_id,group\n";
    for (std::size_t i = 0; i < t.n_samples(); ++i)
        out += t.samples[i] + "," + t.group_names[static_cast<std::size_t>(t.group[i])] + "\n";
    return out;
}

inline void save_dataset(const PreparedDataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    text::write_file(dir / "matrix.csv", matrix_to_csv(ds.table));
    std::string meta;
    meta += "format=fusednet-dataset-1\n";
    meta += "transformed=" + std::string(ds.table.transformed ? "true" : "false") + "\n";
    meta += "k_folds=" + std::to_string(ds.k_folds) + "\n";
    meta += "seed=" + std::to_string(ds.seed) + "\n";
    meta += "min_prevalence=" + text::format_double(ds.params.min_prevalence) + "\n";
    meta += "samples_dropped=" + std::to_string(ds.params.samples_dropped) + "\n";
    meta += "taxa_dropped=" + std::to_string(ds.params.taxa_dropped) + "\n";
    meta += "n_samples=" + std::to_string(ds.table.n_samples()) + "\n";
    meta += "n_taxa=" + std::to_string(ds.table.n_taxa()) + "\n";
    meta += "n_groups=" + std::to_string(ds.table.n_groups()) + "\n";
    for (std::size_t i = 0; i < ds.table.n_samples(); ++i)
        meta += "sample." + ds.table.samples[i] + "=" +
                ds.table.group_names[static_cast<std::size_t>(ds.table.group[i])] + "," +
                std::to_string(ds.fold[i] + 1) + "\n";
    text::write_file(dir / "dataset.txt", meta);
}

inline PreparedDataset load_dataset(const std::filesystem::path& dir) {
    const auto rows = text::read_rows(dir / "matrix.csv", ',');
    if (rows.size() < 2) throw DataError("dataset matrix has no rows");
    std::map<std::string, std::string> kv;
    std::vector<std::pair<std::string, std::string>> sample_lines;
    for (const auto& line : text::read_rows(dir / "dataset.txt", '\n')) {
        const auto& s = line[0];
        const auto eq = s.find('=');
        if (eq == std::string::npos) continue;
        auto key = s.substr(0, eq);
        auto value = s.substr(eq + 1);
        if (key.rfind("sample.", 0) == 0)
            sample_lines.emplace_back(key.substr(7), value);
        else
            kv[key] = value;
    }
    if (kv["format"] != "fusednet-dataset-1") throw DataError("'" + dir.string() + "' is not a dataset directory");

    PreparedDataset ds;
    auto& t = ds.table;
    t.taxa.assign(rows[0].begin() + 1, rows[0].end());
    t.transformed = kv["transformed"] == "true";
    ds.k_folds = std::stoi(kv.at("k_folds"));
    ds.seed = std::stoull(kv.at("seed"));
    ds.params.k_folds = ds.k_folds;
    ds.params.seed = ds.seed;
    ds.params.min_prevalence = text::parse_double_or_throw(kv.at("min_prevalence"), "min_prevalence");
    ds.params.samples_dropped = std::stoull(kv.at("samples_dropped"));
    ds.params.taxa_dropped = std::stoull(kv.at("taxa_dropped"));

    std::unordered_map<std::string, std::pair<std::string, int>> info;
    std::set<std::string> names;
    for (const auto& [id, value] : sample_lines) {
        const auto comma = value.rfind(',');
        if (comma == std::string::npos) throw DataError("malformed sample line for '" + id + "'");
        info[id] = {value.substr(0, comma), std::stoi(value.substr(comma + 1)) - 1};
        names.insert(value.substr(0, comma));
    }
    t.group_names.assign(names.begin(), names.end());
    const auto n = rows.size() - 1;
    t.counts.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(t.taxa.size()));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = rows[i + 1];
        if (row.size() != t.taxa.size() + 1) throw DataError("dataset row " + std::to_string(i + 2) + " is ragged");
        t.samples.push_back(row[0]);
        for (std::size_t j = 0; j < t.taxa.size(); ++j)
            t.counts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                text::parse_double_or_throw(row[j + 1], "dataset cell");
        const auto it = info.find(row[0]);
        if (it == info.end()) throw DataError("sample '" + row[0] + "' has no fold record");
        t.group.push_back(t.group_index(it->second.first));
        ds.fold.push_back(it->second.second);
    }
    t.validate();
    return ds;
}

}  // namespace fusednet
