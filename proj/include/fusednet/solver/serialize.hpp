#pragma once

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fusednet/errors.hpp"
#include "fusednet/solver/model.hpp"
#include "fusednet/text_io.hpp"

namespace fusednet {

/**
 * @brief Flat key=value text form of fitted models.
 *
 * Numbers are written in shortest round-trip form, so a reloaded fit predicts
 * bit-identically.
 */
namespace fitio {

namespace detail {

inline std::string join(const Eigen::VectorXd& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += text::format_double(v(i));
    }
    return out;
}

inline std::string join(const std::vector<double>& v) {
    return join(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
}

inline std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i].find_first_of(",\n=") != std::string::npos)
            throw DataError("taxon name '" + v[i] + "' cannot be stored in a fit record");
        if (i) out += ',';
        out += v[i];
    }
    return out;
}

inline Eigen::VectorXd parse_vector(const std::string& s, const std::string& key) {
    if (s.empty()) return {};
    const auto parts = text::split(s, ',');
    Eigen::VectorXd v(static_cast<Eigen::Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) v(static_cast<Eigen::Index>(i)) = text::parse_double_or_throw(parts[i], key);
    return v;
}

using Record = std::map<std::string, std::string>;

inline Record parse_record(const std::string& content) {
    Record r;
    std::istringstream in(content);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError("malformed fit record line: " + line);
        r[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return r;
}

inline const std::string& need(const Record& r, const std::string& key) {
    const auto it = r.find(key);
    if (it == r.end()) throw DataError("fit record is missing '" + key + "'");
    return it->second;
}

inline void write_centering(std::ostringstream& out, const Centering& c) {
    out << "y_mean=" << join(c.y_mean) << '\n';
    for (int s = 0; s < c.n_groups(); ++s) out << "x_mean." << s << '=' << join(Eigen::VectorXd(c.x_mean.row(s).transpose())) << '\n';
    out << "x_scale=" << join(c.x_scale) << '\n';
    out << "active=";
    for (std::size_t j = 0; j < c.active.size(); ++j) out << (j ? "," : "") << (c.active[j] ? 1 : 0);
    out << '\n';
}

inline Centering read_centering(const Record& r, int S, Eigen::Index p) {
    Centering c;
    const auto ym = parse_vector(need(r, "y_mean"), "y_mean");
    if (ym.size() != S) throw DataError("fit record y_mean has the wrong length");
    c.y_mean.assign(ym.data(), ym.data() + ym.size());
    c.x_mean.resize(S, p);
    for (int s = 0; s < S; ++s) {
        const auto key = "x_mean." + std::to_string(s);
        const auto row = parse_vector(need(r, key), key);
        if (row.size() != p) throw DataError("fit record " + key + " has the wrong length");
        c.x_mean.row(s) = row.transpose();
    }
    c.x_scale = parse_vector(need(r, "x_scale"), "x_scale");
    if (c.x_scale.size() != p) throw DataError("fit record x_scale has the wrong length");
    const auto act = need(r, "active");
    c.active.clear();
    if (!act.empty())
        for (const auto& a : text::split(act, ',')) c.active.push_back(a == "1");
    if (static_cast<Eigen::Index>(c.active.size()) != p) throw DataError("fit record active has the wrong length");
    return c;
}

}  // namespace detail

inline std::string to_text(const FusedFit& fit, const std::vector<std::string>& predictor_taxa = {},
                           const std::string& target = {}) {
    std::ostringstream out;
    out << "format=fusednet-fit-1\nkind=fused\n";
    out << "target=" << target << '\n';
    out << "predictors=" << detail::join(predictor_taxa) << '\n';
    out << "groups=" << fit.n_groups() << "\np=" << fit.p() << '\n';
    out << "lambda=" << text::format_double(fit.lambda) << '\n';
    out << "gamma=" << text::format_double(fit.gamma) << '\n';
    for (int s = 0; s < fit.n_groups(); ++s)
        out << "weights." << s << '=' << detail::join(Eigen::VectorXd(fit.weights.row(s).transpose())) << '\n';
    detail::write_centering(out, fit.centering);
    out << "beta0=" << detail::join(fit.coef.beta0) << '\n';
    for (int s = 0; s < fit.n_groups(); ++s)
        out << "u." << s << '=' << detail::join(fit.coef.deviations[static_cast<std::size_t>(s)]) << '\n';
    return out.str();
}

inline std::string to_text(const LassoFit& fit, const std::vector<std::string>& predictor_taxa = {},
                           const std::string& target = {}) {
    std::ostringstream out;
    out << "format=fusednet-fit-1\nkind=lasso\n";
    out << "target=" << target << '\n';
    out << "predictors=" << detail::join(predictor_taxa) << '\n';
    out << "groups=1\np=" << fit.beta.size() << '\n';
    out << "lambda=" << text::format_double(fit.lambda) << '\n';
    detail::write_centering(out, fit.centering);
    out << "beta=" << detail::join(fit.beta) << '\n';
    return out.str();
}

inline std::string to_text(const FeaturelessFit& fit) {
    return "format=fusednet-fit-1\nkind=featureless\nconstant=" + text::format_double(fit.constant) + '\n';
}

/// Kind stored in a fit record: "fused", "lasso" or "featureless".
inline std::string kind_of(const std::string& content) {
    const auto r = detail::parse_record(content);
    if (detail::need(r, "format") != "fusednet-fit-1") throw DataError("unsupported fit record format");
    return detail::need(r, "kind");
}

inline FusedFit fused_from_text(const std::string& content, std::vector<std::string>* predictor_taxa = nullptr) {
    const auto r = detail::parse_record(content);
    if (detail::need(r, "format") != "fusednet-fit-1" || detail::need(r, "kind") != "fused")
        throw DataError("not a fused fit record");
    const int S = std::stoi(detail::need(r, "groups"));
    const Eigen::Index p = std::stol(detail::need(r, "p"));
    if (S < 1 || p < 0) throw DataError("fit record has invalid dimensions");
    FusedFit fit;
    fit.lambda = text::parse_double_or_throw(detail::need(r, "lambda"), "lambda");
    fit.gamma = text::parse_double_or_throw(detail::need(r, "gamma"), "gamma");
    fit.weights.resize(S, S);
    for (int s = 0; s < S; ++s) {
        const auto key = "weights." + std::to_string(s);
        const auto row = detail::parse_vector(detail::need(r, key), key);
        if (row.size() != S) throw DataError("fit record " + key + " has the wrong length");
        fit.weights.row(s) = row.transpose();
    }
    fit.centering = detail::read_centering(r, S, p);
    fit.coef.beta0 = detail::parse_vector(detail::need(r, "beta0"), "beta0");
    if (fit.coef.beta0.size() != p) throw DataError("fit record beta0 has the wrong length");
    for (int s = 0; s < S; ++s) {
        const auto key = "u." + std::to_string(s);
        auto u = detail::parse_vector(detail::need(r, key), key);
        if (u.size() != p) throw DataError("fit record " + key + " has the wrong length");
        fit.coef.deviations.push_back(std::move(u));
    }
    if (predictor_taxa) {
        const auto& names = detail::need(r, "predictors");
        *predictor_taxa = names.empty() ? std::vector<std::string>{} : text::split(names, ',');
    }
    return fit;
}

inline LassoFit lasso_from_text(const std::string& content, std::vector<std::string>* predictor_taxa = nullptr) {
    const auto r = detail::parse_record(content);
    if (detail::need(r, "format") != "fusednet-fit-1" || detail::need(r, "kind") != "lasso")
        throw DataError("not a lasso fit record");
    const Eigen::Index p = std::stol(detail::need(r, "p"));
    LassoFit fit;
    fit.lambda = text::parse_double_or_throw(detail::need(r, "lambda"), "lambda");
    fit.centering = detail::read_centering(r, 1, p);
    fit.beta = detail::parse_vector(detail::need(r, "beta"), "beta");
    if (fit.beta.size() != p) throw DataError("fit record beta has the wrong length");
    if (predictor_taxa) {
        const auto& names = detail::need(r, "predictors");
        *predictor_taxa = names.empty() ? std::vector<std::string>{} : text::split(names, ',');
    }
    return fit;
}

inline FeaturelessFit featureless_from_text(const std::string& content) {
    const auto r = detail::parse_record(content);
    if (detail::need(r, "kind") != "featureless") throw DataError("not a featureless fit record");
    return FeaturelessFit{text::parse_double_or_throw(detail::need(r, "constant"), "constant")};
}

}  // namespace fitio
}  // namespace fusednet
