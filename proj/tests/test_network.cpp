#include <gtest/gtest.h>

#include "fusednet/network.hpp"
#include "fusednet/synth.hpp"
#include "test_util.hpp"

using namespace fusednet;

namespace {

const std::vector<std::string> kTaxa{"A", "B", "C"};

GroupNetwork net_with(const std::string& habitat, std::vector<Edge> edges) {
    return GroupNetwork{kTaxa, habitat, std::move(edges)};
}

TaxonModel model(const std::string& taxon, std::vector<Eigen::VectorXd> betas) { return {taxon, std::move(betas), 0, 0}; }

}  // namespace

TEST(CoefficientMatrix, NullFitsGiveZeroMatrix) {
    std::vector<TaxonModel> models;
    for (const auto& t : kTaxa) models.push_back(model(t, {Eigen::VectorXd::Zero(2)}));
    EXPECT_TRUE(coefficient_matrix(models, kTaxa, 0).isZero(0.0));
}

TEST(CoefficientMatrix, ReassemblesOriginalIndexing) {
    std::vector<TaxonModel> models{model("A", {(Eigen::VectorXd(2) << 0.4, 0.0).finished()}),
                                   model("B", {(Eigen::VectorXd(2) << 0.0, -0.1).finished()}),
                                   model("C", {(Eigen::VectorXd(2) << 0.3, 0.2).finished()})};
    const auto c = coefficient_matrix(models, kTaxa, 0);
    EXPECT_EQ(c(0, 1), 0.4);
    EXPECT_EQ(c(1, 2), -0.1);
    EXPECT_EQ(c(2, 0), 0.3);
    EXPECT_EQ(c(2, 1), 0.2);
    EXPECT_TRUE(c.diagonal().isZero(0.0));
    models.pop_back();
    try {
        coefficient_matrix(models, kTaxa, 0);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("'C'"), std::string::npos);
    }
}

TEST(Symmetrize, UnionAndAverage) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(3, 3);
    c(0, 1) = 0.4;
    c(1, 2) = c(2, 1) = -0.7;
    const auto net = symmetrize(c, kTaxa, "h");
    ASSERT_EQ(net.edges.size(), 2u);
    EXPECT_EQ(net.edges[0].a, 0u);
    EXPECT_EQ(net.edges[0].b, 1u);
    EXPECT_DOUBLE_EQ(net.edges[0].weight, 0.2);
    EXPECT_DOUBLE_EQ(net.edges[1].weight, -0.7);
    EXPECT_TRUE(symmetrize(Eigen::MatrixXd::Zero(3, 3), kTaxa).edges.empty());
}

TEST(Symmetrize, RoundOffIsNotAnEdgeAndMaxAbsRule) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(3, 3);
    c(0, 2) = 1e-9;
    c(0, 1) = 0.3;
    c(1, 0) = -0.5;
    const auto avg = symmetrize(c, kTaxa);
    ASSERT_EQ(avg.edges.size(), 1u);
    EXPECT_DOUBLE_EQ(avg.edges[0].weight, -0.1);
    EXPECT_DOUBLE_EQ(symmetrize(c, kTaxa, "", EdgeWeightRule::MaxAbs).edges[0].weight, -0.5);
}

TEST(DiffNetwork, VaryingEdge) {
    const auto d = diff_network(net_with("s", {{0, 1, 0.4}}), net_with("t", {{0, 1, 0.8}}), 1e-3);
    ASSERT_EQ(d.edges.size(), 1u);
    EXPECT_DOUBLE_EQ(d.edges[0].diff, -0.4);
    EXPECT_TRUE(d.edges[0].present);
    EXPECT_EQ(d.present_count(), 1u);
}

TEST(DiffNetwork, IdenticalNetworksHaveNoPresentEdges) {
    const auto n = net_with("s", {{0, 1, 0.4}, {1, 2, -0.7}});
    auto m = n;
    m.habitat = "t";
    EXPECT_EQ(diff_network(n, m).present_count(), 0u);
}

TEST(DiffNetwork, AbsentEdgeCountsAsZeroAndAntisymmetry) {
    const auto s = net_with("s", {{0, 2, 0.5}, {1, 2, 0.0005}});
    const auto t = net_with("t", {{0, 1, -0.2}});
    const auto st = diff_network(s, t);
    const auto ts = diff_network(t, s);
    ASSERT_EQ(st.edges.size(), ts.edges.size());
    for (std::size_t i = 0; i < st.edges.size(); ++i) {
        EXPECT_EQ(st.edges[i].diff, -ts.edges[i].diff);
        EXPECT_EQ(st.edges[i].present, ts.edges[i].present);
    }
    EXPECT_EQ(st.present_count(), 2u);
    EXPECT_THROW(diff_network(s, GroupNetwork{{"A", "B"}, "x", {}}), DataError);
}

TEST(DiffNetwork, PooledFitsCollapse) {
    const Eigen::VectorXd b = (Eigen::VectorXd(2) << 0.3, -0.2).finished();
    std::vector<TaxonModel> models;
    for (const auto& t : kTaxa) models.push_back(model(t, {b, b, b}));
    std::vector<GroupNetwork> nets;
    for (int s = 0; s < 3; ++s) nets.push_back(symmetrize(coefficient_matrix(models, kTaxa, s), kTaxa, "h" + std::to_string(s)));
    for (const auto& d : all_diff_networks(nets, 0.0)) EXPECT_EQ(d.present_count(), 0u);
}

TEST(Recovery, Examples) {
    const auto truth = diff_network(net_with("s", {{0, 1, 0.4}}), net_with("t", {}));
    const auto perfect = recovery_metrics(truth, truth);
    EXPECT_EQ(perfect.precision, 1.0);
    EXPECT_EQ(perfect.recall, 1.0);
    EXPECT_EQ(perfect.f1, 1.0);

    const auto empty = diff_network(net_with("s", {}), net_with("t", {}));
    const auto none = recovery_metrics(empty, truth);
    EXPECT_EQ(none.recall, 0.0);
    EXPECT_EQ(none.f1, 0.0);

    const auto everything = diff_network(net_with("s", {{0, 1, 1}, {0, 2, 1}, {1, 2, 1}, }), net_with("t", {}));
    const auto half_truth = diff_network(net_with("s", {{0, 1, 1}}), net_with("t", {{0, 1, 1}, {0, 2, 1}}));
    ASSERT_EQ(half_truth.present_count(), 1u);
    auto four = std::vector<std::string>{"A", "B", "C", "D"};
    GroupNetwork all4{four, "s", {{0, 1, 1}, {0, 2, 1}, {0, 3, 1}, {1, 2, 1}, {1, 3, 1}, {2, 3, 1}}};
    GroupNetwork half4{four, "s", {{0, 1, 1}, {0, 2, 1}, {0, 3, 1}}};
    GroupNetwork zero4{four, "t", {}};
    const auto m = recovery_metrics(diff_network(all4, zero4), diff_network(half4, zero4));
    EXPECT_EQ(m.precision, 0.5);
    EXPECT_EQ(m.recall, 1.0);
    EXPECT_EQ(recovery_metrics(everything, everything).f1, 1.0);
}

TEST(Export, EmptyNetworkListsAllNodes) {
    const auto empty = diff_network(net_with("s", {}), net_with("t", {}));
    const auto dot = to_dot(empty);
    for (const auto& t : kTaxa) EXPECT_NE(dot.find("\"" + t + "\""), std::string::npos);
    EXPECT_EQ(dot.find("--"), std::string::npos);
    EXPECT_EQ(dot.rfind("graph", 0), 0u);
    const auto j = nlohmann::json::parse(to_json(empty));
    EXPECT_EQ(j["taxa"].size(), 3u);
    EXPECT_TRUE(j["edges"].empty());
    EXPECT_EQ(j["habitat_pair"], (nlohmann::json{"s", "t"}));
}

TEST(Export, SingleEdgeEdgeList) {
    const auto csv = to_edgelist(net_with("h", {{0, 1, 0.4}}));
    EXPECT_EQ(csv, "taxon_a,taxon_b,weight\nA,B,0.4\n");
    const auto dot = to_dot(net_with("h", {{0, 1, 0.4}}));
    EXPECT_NE(dot.find("\"A\" -- \"B\" [weight=0.4]"), std::string::npos);
}

TEST(Export, DiffExportsOnlyPresentEdges) {
    const auto d = diff_network(net_with("s", {{0, 1, 0.4}, {1, 2, 0.3}}), net_with("t", {{1, 2, 0.3}}));
    EXPECT_EQ(to_edgelist(d), "taxon_a,taxon_b,weight\nA,B,0.4\n");
}

TEST(Export, JsonRoundTrip) {
    const auto net = net_with("h", {{0, 1, 0.1 + 0.2}, {1, 2, -0.7}});
    const auto back = group_network_from_json(to_json(net));
    EXPECT_EQ(back.taxa, net.taxa);
    EXPECT_EQ(back.habitat, "h");
    ASSERT_EQ(back.edges.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(back.edges[i].a, net.edges[i].a);
        EXPECT_EQ(back.edges[i].b, net.edges[i].b);
        EXPECT_EQ(back.edges[i].weight, net.edges[i].weight);
    }
    const auto d = diff_network(net, net_with("t", {{0, 1, 0.3}}));
    const auto dback = diff_network_from_json(to_json(d));
    EXPECT_EQ(dback.present_count(), d.present_count());
    EXPECT_EQ(dback.habitats, d.habitats);
    EXPECT_THROW(group_network_from_json("{\"taxa\": [\"A\"]"), DataError);
    EXPECT_THROW(group_network_from_json(R"({"taxa":["A"],"habitat":"h","edges":[{"a":"A","b":"Z","weight":1}]})"), DataError);
}

TEST(Export, DeterministicFiles) {
    const auto net = net_with("h", {{0, 2, 0.25}});
    testutil::TempDir dir;
    for (auto f : {GraphFormat::Dot, GraphFormat::Json, GraphFormat::EdgeList}) {
        export_network(net, f, dir / (std::string("a") + graph_extension(f)));
        export_network(net, f, dir / (std::string("b") + graph_extension(f)));
        EXPECT_EQ(text::read_file(dir / (std::string("a") + graph_extension(f))),
                  text::read_file(dir / (std::string("b") + graph_extension(f))));
    }
    EXPECT_EQ(parse_graph_format("edgelist"), GraphFormat::EdgeList);
    EXPECT_THROW(parse_graph_format("png"), ConfigError);
}

TEST(TaxonModels, LassoAllGivesIdenticalHabitatMatrices) {
    SynthSpec spec;
    spec.S = 3;
    spec.D = 5;
    spec.n_per_group = 12;
    spec.k_folds = 3;
    spec.shared_density = 0.4;
    spec.specific_density = 0.3;
    const auto ds = generate(spec).dataset;
    CvOptions o;
    o.lambda_count = 8;
    o.gamma_count = 3;
    o.inner_folds = 3;
    const auto models = fit_taxon_models(ds, Algorithm::LassoAll, o, 1, 1);
    const auto c0 = coefficient_matrix(models, ds.table.taxa, 0);
    for (int s = 1; s < 3; ++s) EXPECT_EQ(coefficient_matrix(models, ds.table.taxa, s), c0);
    const auto fused = fit_taxon_models(ds, Algorithm::FusedAll, o, 1, 1);
    EXPECT_EQ(fused.size(), 5u);
    EXPECT_EQ(fused[0].habitat_beta.size(), 3u);
}
