#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

#include <Eigen/Dense>

#include "fusednet/data_model.hpp"
#include "fusednet/design.hpp"
#include "fusednet/rng.hpp"

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("fusednet_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline Eigen::MatrixXd normal_matrix(fusednet::Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

/// Grouped design with per-habitat coefficient columns `beta` (p x S).
inline fusednet::GroupedDesign grouped_design(fusednet::Rng& rng, int n_per_group, const Eigen::MatrixXd& beta,
                                              double noise_sd) {
    const auto p = beta.rows();
    const auto S = static_cast<int>(beta.cols());
    fusednet::GroupedDesign d;
    d.n_groups = S;
    d.predictors = normal_matrix(rng, static_cast<Eigen::Index>(n_per_group) * S, p);
    d.response.resize(d.predictors.rows());
    for (int s = 0; s < S; ++s)
        for (int i = 0; i < n_per_group; ++i) {
            const Eigen::Index r = static_cast<Eigen::Index>(s) * n_per_group + i;
            d.group.push_back(s);
            d.response(r) = d.predictors.row(r).dot(beta.col(s)) + noise_sd * rng.normal();
        }
    return d;
}

/// Small raw table with `sizes[g]` samples in habitat g and strictly positive counts.
inline fusednet::AbundanceTable raw_table(const std::vector<std::size_t>& sizes, std::size_t taxa, std::uint64_t seed) {
    fusednet::Rng rng(seed);
    fusednet::AbundanceTable t;
    for (std::size_t j = 0; j < taxa; ++j) t.taxa.push_back("t" + std::to_string(j));
    std::size_t n = 0;
    for (auto s : sizes) n += s;
    t.counts.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(taxa));
    std::size_t row = 0;
    for (std::size_t g = 0; g < sizes.size(); ++g) {
        t.group_names.push_back("g" + std::to_string(g));
        for (std::size_t i = 0; i < sizes[g]; ++i, ++row) {
            t.samples.push_back("s" + std::to_string(row));
            t.group.push_back(static_cast<int>(g));
            for (std::size_t j = 0; j < taxa; ++j)
                t.counts(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j)) = 1.0 + static_cast<double>(rng.below(200));
        }
    }
    return t;
}

}  // namespace testutil
