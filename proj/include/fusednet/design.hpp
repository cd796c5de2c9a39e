#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fusednet/data_model.hpp"
#include "fusednet/errors.hpp"

namespace fusednet {

/**
 * @brief One taxon-wise regression task: the target taxon's abundance as
 * response, every other taxon (original column order) as predictors.
 */
struct GroupedDesign {
    Eigen::VectorXd response;
    Eigen::MatrixXd predictors;
    std::vector<int> group;  // habitat index per row
    int n_groups = 0;
    std::string target_taxon;
    std::vector<std::string> predictor_taxa;

    Eigen::Index rows() const { return response.size(); }
    Eigen::Index p() const { return predictors.cols(); }

    void validate() const {
        if (predictors.rows() != response.size() || static_cast<Eigen::Index>(group.size()) != response.size())
            throw DataError("design rows disagree between response, predictors and habitat labels");
        if (n_groups < 1) throw DataError("design needs at least one habitat");
        for (int g : group)
            if (g < 0 || g >= n_groups) throw DataError("design habitat index out of range");
    }

    /// Rows `idx` in the given order; keeps n_groups so habitat indices stay stable.
    GroupedDesign subset(const std::vector<std::size_t>& idx) const {
        GroupedDesign out;
        out.n_groups = n_groups;
        out.target_taxon = target_taxon;
        out.predictor_taxa = predictor_taxa;
        out.response.resize(static_cast<Eigen::Index>(idx.size()));
        out.predictors.resize(static_cast<Eigen::Index>(idx.size()), predictors.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const auto i = static_cast<Eigen::Index>(idx[r]);
            out.response(static_cast<Eigen::Index>(r)) = response(i);
            out.predictors.row(static_cast<Eigen::Index>(r)) = predictors.row(i);
            out.group.push_back(group[idx[r]]);
        }
        return out;
    }

    /// Same rows with every habitat label collapsed to one group.
    GroupedDesign pooled() const {
        GroupedDesign out = *this;
        out.n_groups = 1;
        std::fill(out.group.begin(), out.group.end(), 0);
        return out;
    }
};

/// Builds the task for taxon `d` (by index) from a prepared dataset.
inline GroupedDesign build_taxon_task(const PreparedDataset& ds, std::size_t d) {
    const auto& t = ds.table;
    if (d >= t.n_taxa()) throw DataError("taxon index " + std::to_string(d) + " out of range");
    if (t.n_taxa() < 2) throw DataError("a taxon-wise task needs at least two taxa");
    GroupedDesign g;
    g.target_taxon = t.taxa[d];
    g.n_groups = static_cast<int>(t.n_groups());
    g.group = t.group;
    g.response = t.counts.col(static_cast<Eigen::Index>(d));
    const auto D = static_cast<Eigen::Index>(t.n_taxa());
    g.predictors.resize(t.counts.rows(), D - 1);
    Eigen::Index c = 0;
    for (Eigen::Index j = 0; j < D; ++j) {
        if (j == static_cast<Eigen::Index>(d)) continue;
        g.predictors.col(c++) = t.counts.col(j);
        g.predictor_taxa.push_back(t.taxa[static_cast<std::size_t>(j)]);
    }
    return g;
}

inline GroupedDesign build_taxon_task(const PreparedDataset& ds, const std::string& taxon) {
    return build_taxon_task(ds, ds.table.taxon_index(taxon));
}

/// Maps predictor column `j` of taxon `d`'s task back to the table's taxon index.
inline std::size_t predictor_to_taxon(std::size_t d, std::size_t j) { return j < d ? j : j + 1; }

}  // namespace fusednet
