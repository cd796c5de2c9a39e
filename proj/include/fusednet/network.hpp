#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fusednet/data_model.hpp"
#include "fusednet/design.hpp"
#include "fusednet/errors.hpp"
#include "fusednet/rng.hpp"
#include "fusednet/sac.hpp"
#include "fusednet/solver/cv.hpp"
#include "fusednet/text_io.hpp"

namespace fusednet {

/// Coefficients below this magnitude count as zero in the union rule.
inline constexpr double kEdgeZero = 1e-8;
inline constexpr double kDefaultTauDiff = 1e-3;

struct Edge {
    std::size_t a = 0;  // a < b, indices into taxa
    std::size_t b = 0;
    double weight = 0.0;
};

struct GroupNetwork {
    std::vector<std::string> taxa;
    std::string habitat;
    std::vector<Edge> edges;  // sorted by (a, b)
};

struct DiffEdge {
    std::size_t a = 0;
    std::size_t b = 0;
    double diff = 0.0;
    bool present = false;
};

struct DiffNetwork {
    std::vector<std::string> taxa;
    std::pair<std::string, std::string> habitats;
    std::vector<DiffEdge> edges;  // every pair with an edge in either network, sorted by (a, b)

    std::size_t present_count() const {
        return static_cast<std::size_t>(std::count_if(edges.begin(), edges.end(), [](const DiffEdge& e) { return e.present; }));
    }
};

// ---------------------------------------------------------------------------
// Per-taxon models and coefficient matrices.

/// One taxon's coefficient vector for every habitat (standardized scale).
struct TaxonModel {
    std::string taxon;
    std::vector<Eigen::VectorXd> habitat_beta;
    double lambda = 0.0;
    double gamma = 0.0;
};

/**
 * @brief Fits every taxon's model on the full dataset with CV-selected
 * hyperparameters and returns per-habitat coefficient vectors.
 *
 * lasso_same fits one model per habitat on that habitat's rows; lasso_all
 * repeats its pooled vector for every habitat; featureless models have no
 * coefficients.
 */
inline std::vector<TaxonModel> fit_taxon_models(const PreparedDataset& ds, Algorithm algorithm, const CvOptions& cv,
                                                std::uint64_t seed, unsigned threads = 0,
                                                Intercept lasso_all_intercept = Intercept::Pooled) {
    const auto D = ds.table.n_taxa();
    const int S = static_cast<int>(ds.table.n_groups());
    if (D < 2) throw DataError("network inference needs at least two taxa");
    std::vector<TaxonModel> models(D);
    std::vector<std::string> errors(D);
    const Eigen::MatrixXd weights = uniform_weights(S);
    detail::parallel_for(D, threads, [&](std::size_t d) {
        try {
            const auto task = build_taxon_task(ds, d);
            const auto cv_seed = derive_seed(seed, "network_cv", d);
            auto& m = models[d];
            m.taxon = ds.table.taxa[d];
            switch (algorithm) {
                case Algorithm::FusedAll: {
                    const auto res = cv_fused(task, weights, cv, cv_seed);
                    for (int s = 0; s < S; ++s) m.habitat_beta.push_back(res.fit.group_beta(s));
                    m.lambda = res.fit.lambda;
                    m.gamma = res.fit.gamma;
                    break;
                }
                case Algorithm::LassoAll: {
                    const auto res = cv_lasso(task, cv, cv_seed, lasso_all_intercept);
                    m.habitat_beta.assign(static_cast<std::size_t>(S), res.fit.beta);
                    m.lambda = res.fit.lambda;
                    break;
                }
                case Algorithm::LassoSame:
                    for (int s = 0; s < S; ++s) {
                        const auto res = cv_lasso(task.subset(ds.table.rows_of_group(s)), cv, cv_seed);
                        m.habitat_beta.push_back(res.fit.beta);
                    }
                    break;
                case Algorithm::FeaturelessSame:
                case Algorithm::FeaturelessAll:
                    m.habitat_beta.assign(static_cast<std::size_t>(S), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(D - 1)));
                    break;
            }
        } catch (const std::exception& e) {
            errors[d] = e.what();
        }
    });
    for (std::size_t d = 0; d < D; ++d)
        if (!errors[d].empty()) throw NumericalError("fit for taxon '" + ds.table.taxa[d] + "' failed: " + errors[d]);
    return models;
}

/// Entry (d, j): coefficient on taxon j in taxon d's model for `habitat`; zero diagonal.
inline Eigen::MatrixXd coefficient_matrix(const std::vector<TaxonModel>& models, const std::vector<std::string>& taxa,
                                          int habitat) {
    const auto D = taxa.size();
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(D));
    for (std::size_t d = 0; d < D; ++d) {
        const auto it = std::find_if(models.begin(), models.end(), [&](const TaxonModel& m) { return m.taxon == taxa[d]; });
        if (it == models.end()) throw DataError("no fitted model for taxon '" + taxa[d] + "'");
        if (habitat < 0 || habitat >= static_cast<int>(it->habitat_beta.size()))
            throw DataError("habitat index " + std::to_string(habitat) + " is not part of the fits");
        const auto& beta = it->habitat_beta[static_cast<std::size_t>(habitat)];
        if (static_cast<std::size_t>(beta.size()) != D - 1)
            throw DataError("model for taxon '" + taxa[d] + "' has the wrong predictor count");
        for (std::size_t j = 0; j + 1 < D; ++j)
            c(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(predictor_to_taxon(d, j))) = beta(static_cast<Eigen::Index>(j));
    }
    return c;
}

enum class EdgeWeightRule { Average, MaxAbs };

/// Union rule: pair (i, j) is an edge when either directed coefficient is nonzero.
inline GroupNetwork symmetrize(const Eigen::MatrixXd& c, const std::vector<std::string>& taxa, const std::string& habitat = {},
                               EdgeWeightRule rule = EdgeWeightRule::Average) {
    if (c.rows() != c.cols() || static_cast<std::size_t>(c.rows()) != taxa.size())
        throw DataError("coefficient matrix does not match the taxa list");
    GroupNetwork net{taxa, habitat, {}};
    for (Eigen::Index i = 0; i < c.rows(); ++i)
        for (Eigen::Index j = i + 1; j < c.cols(); ++j) {
            const double x = c(i, j);
            const double y = c(j, i);
            if (!(std::abs(x) > kEdgeZero) && !(std::abs(y) > kEdgeZero)) continue;
            const double w = rule == EdgeWeightRule::Average ? (x + y) / 2.0 : (std::abs(x) >= std::abs(y) ? x : y);
            net.edges.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), w});
        }
    return net;
}

/// Edge-wise weight_s - weight_t; a missing edge counts as weight 0.
inline DiffNetwork diff_network(const GroupNetwork& s, const GroupNetwork& t, double tau = kDefaultTauDiff) {
    if (s.taxa != t.taxa) throw DataError("difference network needs identical taxa lists");
    if (!(tau >= 0.0)) throw ConfigError("tau must be non-negative");
    std::map<std::pair<std::size_t, std::size_t>, std::pair<double, double>> w;
    for (const auto& e : s.edges) w[{e.a, e.b}].first = e.weight;
    for (const auto& e : t.edges) w[{e.a, e.b}].second = e.weight;
    DiffNetwork out{s.taxa, {s.habitat, t.habitat}, {}};
    for (const auto& [key, v] : w) {
        const double d = v.first - v.second;
        out.edges.push_back({key.first, key.second, d, std::abs(d) > tau});
    }
    return out;
}

/// Every unordered habitat pair (s < t).
inline std::vector<DiffNetwork> all_diff_networks(const std::vector<GroupNetwork>& nets, double tau = kDefaultTauDiff) {
    std::vector<DiffNetwork> out;
    for (std::size_t s = 0; s < nets.size(); ++s)
        for (std::size_t t = s + 1; t < nets.size(); ++t) out.push_back(diff_network(nets[s], nets[t], tau));
    return out;
}

struct RecoveryMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
};

/**
 * @brief Present flags scored as binary labels over all unordered pairs.
 *
 * With no predicted positives precision is 0 (1 if the truth is empty too);
 * with no true positives recall is 1 when nothing was predicted, 0 otherwise.
 */
inline RecoveryMetrics recovery_metrics(const DiffNetwork& inferred, const DiffNetwork& truth) {
    if (inferred.taxa != truth.taxa) throw DataError("recovery metrics need identical taxa lists");
    std::map<std::pair<std::size_t, std::size_t>, std::pair<bool, bool>> flags;
    for (const auto& e : inferred.edges)
        if (e.present) flags[{e.a, e.b}].first = true;
    for (const auto& e : truth.edges)
        if (e.present) flags[{e.a, e.b}].second = true;
    RecoveryMetrics m;
    for (const auto& [key, f] : flags) {
        if (f.first && f.second) ++m.true_positives;
        else if (f.first) ++m.false_positives;
        else if (f.second) ++m.false_negatives;
    }
    const auto predicted = m.true_positives + m.false_positives;
    const auto actual = m.true_positives + m.false_negatives;
    m.precision = predicted == 0 ? (actual == 0 ? 1.0 : 0.0) : static_cast<double>(m.true_positives) / static_cast<double>(predicted);
    m.recall = actual == 0 ? (predicted == 0 ? 1.0 : 0.0) : static_cast<double>(m.true_positives) / static_cast<double>(actual);
    m.f1 = (m.precision + m.recall) == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

// ---------------------------------------------------------------------------
// Export and import.

enum class GraphFormat { Dot, Json, EdgeList };

inline GraphFormat parse_graph_format(const std::string& s) {
    if (s == "dot") return GraphFormat::Dot;
    if (s == "json") return GraphFormat::Json;
    if (s == "edgelist" || s == "csv") return GraphFormat::EdgeList;
    throw ConfigError("unknown graph format '" + s + "'");
}

inline const char* graph_extension(GraphFormat f) {
    switch (f) {
        case GraphFormat::Dot: return ".dot";
        case GraphFormat::Json: return ".json";
        case GraphFormat::EdgeList: return ".csv";
    }
    return "";
}

namespace detail {

inline std::string dot_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + '"';
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

struct PlainEdge {
    std::size_t a;
    std::size_t b;
    double weight;
};

inline std::vector<PlainEdge> plain_edges(const GroupNetwork& net) {
    std::vector<PlainEdge> out;
    for (const auto& e : net.edges) out.push_back({e.a, e.b, e.weight});
    return out;
}

/// Difference networks export their present edges, weighted by the difference.
inline std::vector<PlainEdge> plain_edges(const DiffNetwork& net) {
    std::vector<PlainEdge> out;
    for (const auto& e : net.edges)
        if (e.present) out.push_back({e.a, e.b, e.diff});
    return out;
}

inline std::string to_dot(const std::string& name, const std::vector<std::string>& taxa, const std::vector<PlainEdge>& edges) {
    std::ostringstream out;
    out << "graph " << dot_quote(name) << " {\n";
    for (const auto& t : taxa) out << "  " << dot_quote(t) << ";\n";
    for (const auto& e : edges)
        out << "  " << dot_quote(taxa[e.a]) << " -- " << dot_quote(taxa[e.b]) << " [weight=" << text::format_double(e.weight)
            << "];\n";
    out << "}\n";
    return out.str();
}

inline std::string to_edgelist(const std::vector<std::string>& taxa, const std::vector<PlainEdge>& edges) {
    std::string out = "taxon_a,taxon_b,weight\n";
    for (const auto& e : edges)
        out += csv_field(taxa[e.a]) + "," + csv_field(taxa[e.b]) + "," + text::format_double(e.weight) + "\n";
    return out;
}

inline nlohmann::ordered_json edges_json(const std::vector<std::string>& taxa, const std::vector<PlainEdge>& edges) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : edges) {
        nlohmann::ordered_json item;
        item["a"] = taxa[e.a];
        item["b"] = taxa[e.b];
        item["weight"] = e.weight;
        arr.push_back(std::move(item));
    }
    return arr;
}

}  // namespace detail

inline std::string to_json(const GroupNetwork& net) {
    nlohmann::ordered_json j;
    j["taxa"] = net.taxa;
    j["habitat"] = net.habitat;
    j["edges"] = detail::edges_json(net.taxa, detail::plain_edges(net));
    return j.dump(2) + "\n";
}

inline std::string to_json(const DiffNetwork& net) {
    nlohmann::ordered_json j;
    j["taxa"] = net.taxa;
    j["habitat_pair"] = {net.habitats.first, net.habitats.second};
    j["edges"] = detail::edges_json(net.taxa, detail::plain_edges(net));
    return j.dump(2) + "\n";
}

inline std::string to_dot(const GroupNetwork& net) { return detail::to_dot(net.habitat, net.taxa, detail::plain_edges(net)); }

inline std::string to_dot(const DiffNetwork& net) {
    return detail::to_dot(net.habitats.first + " vs " + net.habitats.second, net.taxa, detail::plain_edges(net));
}

inline std::string to_edgelist(const GroupNetwork& net) { return detail::to_edgelist(net.taxa, detail::plain_edges(net)); }
inline std::string to_edgelist(const DiffNetwork& net) { return detail::to_edgelist(net.taxa, detail::plain_edges(net)); }

template <typename Net>
std::string render_network(const Net& net, GraphFormat format) {
    switch (format) {
        case GraphFormat::Dot: return to_dot(net);
        case GraphFormat::Json: return to_json(net);
        case GraphFormat::EdgeList: return to_edgelist(net);
    }
    return {};
}

template <typename Net>
void export_network(const Net& net, GraphFormat format, const std::filesystem::path& path) {
    text::write_file(path, render_network(net, format));
}

namespace detail {

inline std::size_t taxon_position(const std::vector<std::string>& taxa, const std::string& name) {
    const auto it = std::find(taxa.begin(), taxa.end(), name);
    if (it == taxa.end()) throw DataError("edge refers to unknown taxon '" + name + "'");
    return static_cast<std::size_t>(it - taxa.begin());
}

inline nlohmann::json parse_json_text(const std::string& content) {
    try {
        return nlohmann::json::parse(content);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed network JSON: ") + e.what());
    }
}

template <typename Fn>
void read_json_edges(const nlohmann::json& j, const std::vector<std::string>& taxa, Fn&& add) {
    try {
        for (const auto& e : j.at("edges")) {
            auto a = taxon_position(taxa, e.at("a").get<std::string>());
            auto b = taxon_position(taxa, e.at("b").get<std::string>());
            if (a == b) throw DataError("self-edge on taxon '" + taxa[a] + "'");
            if (a > b) std::swap(a, b);
            add(a, b, e.at("weight").get<double>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed network JSON: ") + e.what());
    }
}

}  // namespace detail

inline GroupNetwork group_network_from_json(const std::string& content) {
    const auto j = detail::parse_json_text(content);
    GroupNetwork net;
    try {
        net.taxa = j.at("taxa").get<std::vector<std::string>>();
        net.habitat = j.at("habitat").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed network JSON: ") + e.what());
    }
    detail::read_json_edges(j, net.taxa, [&](std::size_t a, std::size_t b, double w) { net.edges.push_back({a, b, w}); });
    std::sort(net.edges.begin(), net.edges.end(), [](const Edge& x, const Edge& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });
    return net;
}

/// Only present edges are stored in the file, so every loaded edge is present.
inline DiffNetwork diff_network_from_json(const std::string& content) {
    const auto j = detail::parse_json_text(content);
    DiffNetwork net;
    try {
        net.taxa = j.at("taxa").get<std::vector<std::string>>();
        const auto pair = j.at("habitat_pair").get<std::vector<std::string>>();
        if (pair.size() != 2) throw DataError("habitat_pair must have two entries");
        net.habitats = {pair[0], pair[1]};
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed network JSON: ") + e.what());
    }
    detail::read_json_edges(j, net.taxa, [&](std::size_t a, std::size_t b, double w) { net.edges.push_back({a, b, w, true}); });
    std::sort(net.edges.begin(), net.edges.end(),
              [](const DiffEdge& x, const DiffEdge& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });
    return net;
}

}  // namespace fusednet
