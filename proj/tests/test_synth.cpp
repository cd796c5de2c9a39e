#include <gtest/gtest.h>

#include "fusednet/synth.hpp"
#include "fusednet/text_io.hpp"
#include "test_util.hpp"

using namespace fusednet;

TEST(Synth, NoSpecificEdgesMeansEmptyTruthDiffs) {
    SynthSpec spec;
    spec.specific_density = 0.0;
    spec.shared_density = 0.3;
    const auto r = generate(spec);
    ASSERT_EQ(r.truth_diffs.size(), 3u);
    for (const auto& d : r.truth_diffs) EXPECT_EQ(d.present_count(), 0u);
    EXPECT_FALSE(r.truth_networks[0].edges.empty());
}

TEST(Synth, SpecificOnlyEdgesAllDiffer) {
    SynthSpec spec;
    spec.shared_density = 0.0;
    spec.specific_density = 0.3;
    spec.seed = 5;
    const auto r = generate(spec);
    std::set<std::pair<std::size_t, std::size_t>> truth_edges, diff_edges;
    for (const auto& n : r.truth_networks)
        for (const auto& e : n.edges) truth_edges.insert({e.a, e.b});
    for (const auto& d : r.truth_diffs)
        for (const auto& e : d.edges)
            if (e.present) diff_edges.insert({e.a, e.b});
    EXPECT_FALSE(truth_edges.empty());
    EXPECT_EQ(truth_edges, diff_edges);
}

TEST(Synth, DeterministicGivenSeed) {
    SynthSpec spec;
    spec.seed = 42;
    const auto a = generate(spec);
    const auto b = generate(spec);
    EXPECT_EQ(matrix_to_csv(a.raw), matrix_to_csv(b.raw));
    EXPECT_EQ(matrix_to_csv(a.dataset.table), matrix_to_csv(b.dataset.table));
    EXPECT_EQ(a.dataset.fold, b.dataset.fold);
    for (std::size_t i = 0; i < a.truth_diffs.size(); ++i) EXPECT_EQ(to_json(a.truth_diffs[i]), to_json(b.truth_diffs[i]));
    spec.seed = 43;
    EXPECT_NE(matrix_to_csv(generate(spec).raw), matrix_to_csv(a.raw));
}

TEST(Synth, ShapeCountsAndTruthConsistency) {
    SynthSpec spec;
    spec.S = 4;
    spec.D = 9;
    spec.n_per_group = 10;
    spec.shared_density = 0.3;
    spec.specific_density = 0.3;
    spec.seed = 3;
    const auto r = generate(spec);
    EXPECT_EQ(r.raw.n_samples(), 40u);
    EXPECT_EQ(r.raw.n_taxa(), 9u);
    EXPECT_EQ(r.dataset.table.group_sizes(), (std::vector<std::size_t>{10, 10, 10, 10}));
    EXPECT_TRUE(r.dataset.table.transformed);
    for (Eigen::Index i = 0; i < r.raw.counts.rows(); ++i)
        for (Eigen::Index j = 0; j < r.raw.counts.cols(); ++j) {
            const double v = r.raw.counts(i, j);
            EXPECT_GE(v, 0.0);
            EXPECT_EQ(v, std::round(v));
        }
    EXPECT_GE(r.sparsity, 0.0);
    EXPECT_LE(r.sparsity, 1.0);
    std::size_t k = 0;
    for (int s = 0; s < 4; ++s)
        for (int t = s + 1; t < 4; ++t, ++k) {
            const auto& d = r.truth_diffs[k];
            for (const auto& e : d.edges) {
                const double diff = r.weights[static_cast<std::size_t>(s)](static_cast<Eigen::Index>(e.a), static_cast<Eigen::Index>(e.b)) -
                                    r.weights[static_cast<std::size_t>(t)](static_cast<Eigen::Index>(e.a), static_cast<Eigen::Index>(e.b));
                EXPECT_EQ(e.diff, diff);
                EXPECT_EQ(e.present, std::abs(diff) > spec.tau);
            }
        }
}

TEST(Synth, MedianCountsInRealisticRange) {
    const auto r = generate(SynthSpec{});
    std::vector<double> v(r.raw.counts.data(), r.raw.counts.data() + r.raw.counts.size());
    std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
    const double median = v[v.size() / 2];
    EXPECT_GE(median, 10.0);
    EXPECT_LE(median, 100.0);
}

TEST(Synth, ValidationRejectsBadSpecs) {
    SynthSpec spec;
    spec.shared_density = 0.7;
    spec.specific_density = 0.5;
    EXPECT_THROW(generate(spec), ConfigError);
    spec = SynthSpec{};
    spec.n_per_group = 3;
    EXPECT_THROW(generate(spec), ConfigError);
    spec = SynthSpec{};
    spec.noise_sd = 0.0;
    EXPECT_THROW(generate(spec), ConfigError);
}
