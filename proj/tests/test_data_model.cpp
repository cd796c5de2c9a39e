#include <gtest/gtest.h>

#include <set>

#include "fusednet/data_model.hpp"
#include "fusednet/text_io.hpp"
#include "test_util.hpp"

using namespace fusednet;
using testutil::TempDir;

namespace {

AbundanceTable write_and_load(const TempDir& dir, const std::string& matrix, const std::string& meta) {
    text::write_file(dir / "m.csv", matrix);
    text::write_file(dir / "meta.csv", meta);
    return load_table(dir / "m.csv", dir / "meta.csv");
}

std::string message_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST(LoadTable, MinimalInput) {
    TempDir dir;
    const auto t = write_and_load(dir, "sample_id,A,B,C\ns1,1,0,3\ns2,0,5,2\n", "sample_id,group\ns1,b\ns2,a\n");
    EXPECT_EQ(t.n_samples(), 2u);
    EXPECT_EQ(t.n_taxa(), 3u);
    EXPECT_EQ(t.n_groups(), 2u);
    EXPECT_FALSE(t.transformed);
    EXPECT_EQ(t.group_names, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(t.group, (std::vector<int>{1, 0}));
    EXPECT_DOUBLE_EQ(t.counts(1, 1), 5.0);
}

TEST(LoadTable, TabSeparatedByExtension) {
    TempDir dir;
    text::write_file(dir / "m.tsv", "id\tA\tB\nx\t1\t2\ny\t3\t4\n");
    text::write_file(dir / "meta.tsv", "sample_id\tgroup\nx\tg\ny\tg\n");
    const auto t = load_table(dir / "m.tsv", dir / "meta.tsv");
    EXPECT_EQ(t.n_taxa(), 2u);
    EXPECT_DOUBLE_EQ(t.counts(1, 0), 3.0);
}

TEST(LoadTable, NecromassShape) {
    TempDir dir;
    std::string matrix = "sample_id";
    for (int j = 0; j < 36; ++j) matrix += ",otu" + std::to_string(j);
    matrix += "\n";
    std::string meta = "sample_id,group\n";
    const int sizes[5] = {15, 14, 14, 13, 13};
    int id = 0;
    for (int g = 0; g < 5; ++g)
        for (int i = 0; i < sizes[g]; ++i, ++id) {
            matrix += "s" + std::to_string(id);
            for (int j = 0; j < 36; ++j) matrix += "," + std::to_string((id * 7 + j) % 11);
            matrix += "\n";
            meta += "s" + std::to_string(id) + ",site" + std::to_string(g) + "\n";
        }
    const auto t = write_and_load(dir, matrix, meta);
    EXPECT_EQ(t.n_samples(), 69u);
    EXPECT_EQ(t.n_taxa(), 36u);
    EXPECT_EQ(t.n_groups(), 5u);
}

TEST(LoadTable, NegativeCountNamesTheCell) {
    TempDir dir;
    const auto msg = message_of([&] { write_and_load(dir, "sample_id,A,B\ns1,1,-3\n", "sample_id,group\ns1,a\n"); });
    EXPECT_NE(msg.find("-3"), std::string::npos);
    EXPECT_NE(msg.find("s1"), std::string::npos);
    EXPECT_NE(msg.find("'B'"), std::string::npos);
}

TEST(LoadTable, NonNumericCountRejected) {
    TempDir dir;
    EXPECT_THROW(write_and_load(dir, "sample_id,A\ns1,abc\n", "sample_id,group\ns1,a\n"), DataError);
}

TEST(LoadTable, MissingSampleInMetadataNamesTheSample) {
    TempDir dir;
    const auto msg =
        message_of([&] { write_and_load(dir, "sample_id,A\ns1,1\nlost,2\n", "sample_id,group\ns1,a\n"); });
    EXPECT_NE(msg.find("lost"), std::string::npos);
}

TEST(LoadTable, DuplicateIdsRejected) {
    TempDir dir;
    EXPECT_THROW(write_and_load(dir, "sample_id,A,A\ns1,1,2\n", "sample_id,group\ns1,a\n"), DataError);
    EXPECT_THROW(write_and_load(dir, "sample_id,A\ns1,1\ns1,2\n", "sample_id,group\ns1,a\n"), DataError);
}

TEST(LogTransform, KnownValues) {
    auto t = testutil::raw_table({1}, 3, 1);
    t.counts.row(0) << 0.0, 99.0, 9.0;
    const auto l = log_transform(t);
    EXPECT_EQ(l.counts(0, 0), 0.0);
    EXPECT_EQ(l.counts(0, 1), 2.0);
    EXPECT_EQ(l.counts(0, 2), 1.0);
    EXPECT_TRUE(l.transformed);
}

TEST(LogTransform, RejectsTransformedInput) {
    const auto l = log_transform(testutil::raw_table({2}, 2, 1));
    EXPECT_THROW(log_transform(l), DataError);
}

TEST(LogTransform, PreservesSparsity) {
    auto t = testutil::raw_table({4, 4}, 5, 3);
    t.counts(0, 0) = 0.0;
    t.counts(3, 2) = 0.0;
    t.counts(7, 4) = 0.0;
    EXPECT_DOUBLE_EQ(sparsity(log_transform(t)), sparsity(t));
}

TEST(BalanceGroups, AlreadyBalancedKeepsEverything) {
    const auto t = testutil::raw_table({10, 10, 10}, 3, 5);
    const auto b = balance_groups(t, 42);
    EXPECT_EQ(b.group_sizes(), (std::vector<std::size_t>{10, 10, 10}));
    EXPECT_EQ(b.samples, t.samples);
}

TEST(BalanceGroups, TargetIsMinOfMeanAndSmallest) {
    EXPECT_EQ(balanced_group_size({12, 9, 6}), 6u);
    const auto b = balance_groups(testutil::raw_table({12, 9, 6}, 3, 5), 42);
    EXPECT_EQ(b.group_sizes(), (std::vector<std::size_t>{6, 6, 6}));
}

TEST(BalanceGroups, DeterministicAndOrderPreserving) {
    const auto t = testutil::raw_table({12, 9, 6}, 3, 5);
    const auto a = balance_groups(t, 7);
    const auto b = balance_groups(t, 7);
    EXPECT_EQ(a.samples, b.samples);
    std::vector<std::size_t> pos;
    for (const auto& s : a.samples)
        pos.push_back(static_cast<std::size_t>(std::find(t.samples.begin(), t.samples.end(), s) - t.samples.begin()));
    EXPECT_TRUE(std::is_sorted(pos.begin(), pos.end()));
}

TEST(FilterPrevalence, ZeroThresholdIsIdentity) {
    auto t = testutil::raw_table({5, 5}, 4, 2);
    t.counts.col(1).setZero();
    EXPECT_EQ(filter_low_prevalence(t, 0.0).taxa, t.taxa);
}

TEST(FilterPrevalence, BoundaryInclusive) {
    auto t = testutil::raw_table({10}, 3, 2);
    t.counts.col(0).tail(7).setZero();  // present in 3 of 10
    t.counts.col(1).tail(5).setZero();  // present in 5 of 10
    const auto f = filter_low_prevalence(t, 0.5);
    EXPECT_EQ(f.taxa, (std::vector<std::string>{"t1", "t2"}));
}

TEST(FilterPrevalence, ExactTenPercentIsKept) {
    auto t = testutil::raw_table({30}, 2, 2);
    t.counts.col(0).tail(27).setZero();  // 3 of 30
    EXPECT_EQ(filter_low_prevalence(t, 0.1).n_taxa(), 2u);
}

TEST(FilterPrevalence, AllFilteredIsRejected) {
    auto t = testutil::raw_table({4}, 2, 2);
    t.counts.setZero();
    EXPECT_THROW(filter_low_prevalence(t, 0.5), DataError);
}

TEST(AssignFolds, EvenDivision) {
    const auto ds = assign_folds(testutil::raw_table({10}, 2, 1), 5, 3);
    std::vector<int> sizes(5, 0);
    for (int f : ds.fold) ++sizes[static_cast<std::size_t>(f)];
    EXPECT_EQ(sizes, (std::vector<int>{2, 2, 2, 2, 2}));
}

TEST(AssignFolds, RoundRobinRemainder) {
    const auto ds = assign_folds(testutil::raw_table({11}, 2, 1), 5, 3);
    std::vector<int> sizes(5, 0);
    for (int f : ds.fold) ++sizes[static_cast<std::size_t>(f)];
    std::sort(sizes.begin(), sizes.end());
    EXPECT_EQ(sizes, (std::vector<int>{2, 2, 2, 2, 3}));
}

TEST(AssignFolds, PerGroupBalanceAndDeterminism) {
    const auto t = testutil::raw_table({7, 9, 12}, 2, 1);
    const auto a = assign_folds(t, 3, 11);
    const auto b = assign_folds(t, 3, 11);
    EXPECT_EQ(a.fold, b.fold);
    for (int g = 0; g < 3; ++g) {
        std::vector<int> sizes(3, 0);
        for (auto r : t.rows_of_group(g)) ++sizes[static_cast<std::size_t>(a.fold[r])];
        EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()), 1);
        EXPECT_GT(*std::min_element(sizes.begin(), sizes.end()), 0);
    }
}

TEST(AssignFolds, GroupSmallerThanKNamesGroup) {
    const auto msg = message_of([] { assign_folds(testutil::raw_table({6, 2}, 2, 1), 3, 1); });
    EXPECT_NE(msg.find("g1"), std::string::npos);
    EXPECT_THROW(assign_folds(testutil::raw_table({6}, 2, 1), 1, 1), ConfigError);
}

TEST(Sparsity, Examples) {
    auto t = testutil::raw_table({2}, 2, 1);
    t.counts(0, 1) = 0.0;
    EXPECT_DOUBLE_EQ(sparsity(t), 0.25);
    t.counts.setZero();
    EXPECT_DOUBLE_EQ(sparsity(t), 1.0);
    t.counts.setOnes();
    EXPECT_DOUBLE_EQ(sparsity(t), 0.0);
}

TEST(Preprocess, ByteIdenticalSerialization) {
    const auto raw = testutil::raw_table({12, 9, 6}, 6, 9);
    TempDir dir;
    save_dataset(preprocess(raw, 3, 0.1, 2024), dir / "a");
    save_dataset(preprocess(raw, 3, 0.1, 2024), dir / "b");
    EXPECT_EQ(text::read_file(dir / "a" / "matrix.csv"), text::read_file(dir / "b" / "matrix.csv"));
    EXPECT_EQ(text::read_file(dir / "a" / "dataset.txt"), text::read_file(dir / "b" / "dataset.txt"));
}

TEST(Preprocess, RoundTripThroughDirectory) {
    const auto ds = preprocess(testutil::raw_table({8, 10}, 5, 4), 4, 0.0, 77);
    EXPECT_EQ(ds.table.group_sizes(), (std::vector<std::size_t>{8, 8}));
    EXPECT_EQ(ds.params.samples_dropped, 2u);
    TempDir dir;
    save_dataset(ds, dir.path());
    const auto back = load_dataset(dir.path());
    EXPECT_EQ(back.table.samples, ds.table.samples);
    EXPECT_EQ(back.table.taxa, ds.table.taxa);
    EXPECT_EQ(back.table.group, ds.table.group);
    EXPECT_EQ(back.fold, ds.fold);
    EXPECT_EQ(back.k_folds, 4);
    EXPECT_EQ(back.seed, 77u);
    EXPECT_TRUE(back.table.transformed);
    EXPECT_EQ((back.table.counts - ds.table.counts).cwiseAbs().maxCoeff(), 0.0);
}
