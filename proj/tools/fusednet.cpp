#include <algorithm>
#include <cctype>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fusednet/data_model.hpp"
#include "fusednet/errors.hpp"
#include "fusednet/network.hpp"
#include "fusednet/sac.hpp"
#include "fusednet/synth.hpp"
#include "fusednet/text_io.hpp"

namespace fs = std::filesystem;
using namespace fusednet;

namespace {

constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

const char* kAllAlgorithms = "fused_all,lasso_same,lasso_all,featureless_same,featureless_all";

struct RunConfig {
    std::string input;
    std::string metadata;
    std::string out = "fusednet_out";
    int k_folds = 5;
    std::uint64_t seed = 1;
    double min_prevalence = 0.10;
    int inner_folds = 5;
    std::string algorithms = kAllAlgorithms;
    double tau_diff = kDefaultTauDiff;
    unsigned threads = 0;
    std::string config;

    int lambda_count = 50;
    double lambda_min_ratio = 1e-3;
    int gamma_count = 10;
    double gamma_min_ratio = 1e-2;
    double gamma_max_ratio = 1e2;
    double tol = 1e-6;
    long max_iter = 100000;
    std::string lasso_all_intercept = "pooled";

    std::string dataset_label;
    std::string compare;

    std::string habitat;
    std::string pair;
    std::string weight_rule = "average";

    std::string net_a;
    std::string net_b;
    std::string truth;

    SynthSpec synth;
};

// ---------------------------------------------------------------------------
// Helpers.

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    if (text::trim(s).empty()) return out;
    for (const auto& part : text::split(s, ',')) {
        const auto v = std::string(text::trim(part));
        if (!v.empty()) out.push_back(v);
    }
    return out;
}

std::vector<Algorithm> parse_algorithms(const std::string& list) {
    std::vector<Algorithm> out;
    for (const auto& label : split_list(list)) {
        const auto a = parse_algorithm(label);
        if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
    }
    if (out.empty()) throw ConfigError("--algorithms is empty");
    return out;
}

std::string file_safe(const std::string& s) {
    std::string out;
    for (unsigned char c : s) out += (std::isalnum(c) || c == '-' || c == '.') ? static_cast<char>(c) : '_';
    return out;
}

using Provenance = std::vector<std::pair<std::string, std::string>>;

void write_provenance(const fs::path& out, const Provenance& items) {
    std::string content;
    for (const auto& [k, v] : items) content += k + "=" + v + "\n";
    text::write_file(out / "provenance.txt", content);
}

CvOptions cv_options(const RunConfig& c) {
    CvOptions o;
    o.lambda_count = c.lambda_count;
    o.lambda_min_ratio = c.lambda_min_ratio;
    o.gamma_count = c.gamma_count;
    o.gamma_min_ratio = c.gamma_min_ratio;
    o.gamma_max_ratio = c.gamma_max_ratio;
    o.inner_folds = c.inner_folds;
    o.solver.tol = c.tol;
    o.solver.max_iter = c.max_iter;
    if (o.lambda_count < 1 || o.gamma_count < 1) throw ConfigError("grids need at least one value");
    if (!(o.lambda_min_ratio > 0.0 && o.lambda_min_ratio <= 1.0)) throw ConfigError("--lambda-min-ratio must lie in (0, 1]");
    if (!(o.gamma_min_ratio > 0.0) || !(o.gamma_max_ratio >= o.gamma_min_ratio))
        throw ConfigError("need 0 < --gamma-min-ratio <= --gamma-max-ratio");
    if (o.inner_folds < 2) throw ConfigError("--inner-folds must be at least 2");
    if (!(o.solver.tol > 0.0)) throw ConfigError("--tol must be positive");
    if (o.solver.max_iter < 1) throw ConfigError("--max-iter must be positive");
    return o;
}

Intercept parse_intercept(const std::string& s) {
    if (s == "pooled") return Intercept::Pooled;
    if (s == "per-habitat" || s == "per_habitat") return Intercept::PerHabitat;
    throw ConfigError("--lasso-all-intercept must be 'pooled' or 'per-habitat'");
}

void append_grid_provenance(Provenance& p, const RunConfig& c) {
    p.push_back({"inner_folds", std::to_string(c.inner_folds)});
    p.push_back({"lambda_count", std::to_string(c.lambda_count)});
    p.push_back({"lambda_min_ratio", text::format_double(c.lambda_min_ratio)});
    p.push_back({"gamma_count", std::to_string(c.gamma_count)});
    p.push_back({"gamma_min_ratio", text::format_double(c.gamma_min_ratio)});
    p.push_back({"gamma_max_ratio", text::format_double(c.gamma_max_ratio)});
    p.push_back({"tol", text::format_double(c.tol)});
    p.push_back({"max_iter", std::to_string(c.max_iter)});
    p.push_back({"lasso_all_intercept", c.lasso_all_intercept});
}

void append_dataset_provenance(Provenance& p, const PreparedDataset& ds) {
    p.push_back({"k_folds", std::to_string(ds.k_folds)});
    p.push_back({"dataset_seed", std::to_string(ds.seed)});
    p.push_back({"min_prevalence", text::format_double(ds.params.min_prevalence)});
    p.push_back({"samples_dropped", std::to_string(ds.params.samples_dropped)});
    p.push_back({"taxa_dropped", std::to_string(ds.params.taxa_dropped)});
    p.push_back({"n_samples", std::to_string(ds.table.n_samples())});
    p.push_back({"n_taxa", std::to_string(ds.table.n_taxa())});
    p.push_back({"n_groups", std::to_string(ds.table.n_groups())});
    const auto sizes = ds.table.group_sizes();
    for (std::size_t s = 0; s < sizes.size(); ++s) p.push_back({"group." + ds.table.group_names[s], std::to_string(sizes[s])});
}

/**
 * Raw matrix plus metadata runs the full preprocessing pipeline; a directory
 * written by `preprocess` is loaded as is.
 */
PreparedDataset load_input(const RunConfig& c, bool k_given) {
    if (c.input.empty()) throw ConfigError("--input is required");
    if (!fs::exists(c.input)) throw ConfigError("input '" + c.input + "' does not exist");
    if (!c.metadata.empty()) {
        if (!fs::exists(c.metadata)) throw ConfigError("metadata '" + c.metadata + "' does not exist");
        if (c.k_folds < 2) throw ConfigError("--k-folds must be at least 2");
        return preprocess(load_table(c.input, c.metadata), c.k_folds, c.min_prevalence, c.seed);
    }
    if (!fs::is_directory(c.input))
        throw ConfigError("'" + c.input + "' is not a dataset directory; pass --metadata to preprocess a raw matrix");
    auto ds = load_dataset(c.input);
    if (k_given && c.k_folds != ds.k_folds)
        throw ConfigError("--k-folds " + std::to_string(c.k_folds) + " does not match the dataset's " +
                          std::to_string(ds.k_folds) + " folds");
    return ds;
}

std::string dataset_label(const RunConfig& c) {
    if (!c.dataset_label.empty()) return c.dataset_label;
    auto name = fs::path(c.input).filename().string();
    if (name.empty()) name = fs::path(c.input).parent_path().filename().string();
    const auto dot = name.find('.');
    if (dot != std::string::npos && dot > 0 && !fs::is_directory(c.input)) name = name.substr(0, dot);
    return name.empty() ? "dataset" : name;
}

// ---------------------------------------------------------------------------
// Commands.

int cmd_preprocess(const RunConfig& c) {
    if (c.metadata.empty()) throw ConfigError("--metadata is required");
    const auto ds = load_input(c, true);
    const fs::path out(c.out);
    save_dataset(ds, out);
    Provenance p{{"command", "preprocess"}, {"input", c.input}, {"metadata", c.metadata}, {"seed", std::to_string(c.seed)}};
    append_dataset_provenance(p, ds);
    write_provenance(out, p);
    std::cout << "prepared " << ds.table.n_samples() << " samples x " << ds.table.n_taxa() << " taxa in "
              << ds.table.n_groups() << " habitats (dropped " << ds.params.samples_dropped << " samples, "
              << ds.params.taxa_dropped << " taxa) -> " << out.string() << "\n";
    return 0;
}

std::vector<ComparisonSummary> build_comparisons(const std::vector<CvRecord>& records, const std::vector<Algorithm>& algos,
                                                 const std::string& label, const std::string& extra) {
    std::set<std::string> present;
    for (auto a : algos) present.insert(algorithm_label(a));
    std::vector<ComparisonSummary> out;
    auto try_compare = [&](const std::vector<CvRecord>& recs, const std::string& a, const std::string& b,
                           const std::vector<RecordKey>& pairing, const std::string& name) {
        try {
            auto c = paired_compare(recs, a, b, pairing);
            c.dataset = name;
            out.push_back(std::move(c));
        } catch (const DataError& e) {
            std::cerr << "warning: skipped " << a << " vs " << b << " for " << name << ": " << e.what() << "\n";
        }
    };

    for (const char* b : {"lasso_same", "lasso_all"})
        if (present.count("fused_all") && present.count(b)) try_compare(records, "fused_all", b, default_pairing(), label);

    for (const auto& pair : split_list(extra)) {
        const auto colon = pair.find(':');
        if (colon == std::string::npos) throw ConfigError("--compare entries look like algo_a:algo_b, got '" + pair + "'");
        const auto a = algorithm_label(parse_algorithm(pair.substr(0, colon)));
        const auto b = algorithm_label(parse_algorithm(pair.substr(colon + 1)));
        if (!present.count(a) || !present.count(b)) throw ConfigError("--compare " + pair + " uses an algorithm that was not run");
        try_compare(records, a, b, default_pairing(), label);
    }

    // Per-taxon panels: each model against the featureless baseline of its scenario.
    std::map<std::string, std::vector<CvRecord>> by_taxon;
    std::vector<std::string> taxon_order;
    for (const auto& r : records) {
        auto [it, inserted] = by_taxon.try_emplace(r.taxon);
        if (inserted) taxon_order.push_back(r.taxon);
        it->second.push_back(r);
    }
    const std::vector<RecordKey> within_taxon{RecordKey::Habitat, RecordKey::Fold};
    for (const auto& taxon : taxon_order)
        for (auto a : algos) {
            if (a == Algorithm::FeaturelessSame || a == Algorithm::FeaturelessAll) continue;
            const auto baseline = scenario_of(a) == Scenario::Same ? "featureless_same" : "featureless_all";
            if (present.count(baseline))
                try_compare(by_taxon[taxon], algorithm_label(a), baseline, within_taxon, label + ":" + taxon);
        }
    return out;
}

int cmd_cv(const RunConfig& c, bool k_given) {
    const auto algos = parse_algorithms(c.algorithms);
    SacOptions options;
    options.cv = cv_options(c);
    options.threads = c.threads;
    options.dataset_label = dataset_label(c);
    options.lasso_all_intercept = parse_intercept(c.lasso_all_intercept);
    const auto ds = load_input(c, k_given);

    const auto result = run_sac(ds, algos, ds.k_folds, c.seed, options);
    const auto comparisons = build_comparisons(result.records, algos, options.dataset_label, c.compare);

    const fs::path out(c.out);
    fs::create_directories(out);
    text::write_file(out / "records.csv", records_to_csv(result.records));
    text::write_file(out / "comparisons.csv", comparisons_to_csv(comparisons));
    std::string failures = "algorithm,taxon,habitat,fold,message\n";
    for (const auto& f : result.failures) {
        std::string msg = f.message;
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::replace(msg.begin(), msg.end(), ',', ';');
        failures += f.algorithm + "," + f.taxon + "," + f.habitat + "," + std::to_string(f.fold + 1) + "," + msg + "\n";
    }
    text::write_file(out / "failures.csv", failures);

    Provenance p{{"command", "cv"}, {"input", c.input}, {"dataset", options.dataset_label}, {"seed", std::to_string(c.seed)},
                 {"algorithms", [&] {
                      std::string s;
                      for (auto a : algos) s += (s.empty() ? "" : ",") + algorithm_label(a);
                      return s;
                  }()}};
    append_dataset_provenance(p, ds);
    append_grid_provenance(p, c);
    p.push_back({"records", std::to_string(result.records.size())});
    p.push_back({"failed_cells", std::to_string(result.failures.size())});
    write_provenance(out, p);

    std::cout << result.records.size() << " records, " << result.failures.size() << " failed cells, "
              << comparisons.size() << " comparisons -> " << out.string() << "\n";
    for (const auto& cmp : comparisons)
        if (cmp.dataset == options.dataset_label)
            std::cout << "  " << cmp.algorithm_a << " - " << cmp.algorithm_b << ": mean_diff=" << text::format_double(cmp.mean_diff)
                      << " p=" << text::format_double(cmp.p_value) << " n=" << cmp.n_pairs << "\n";
    if (!result.failures.empty()) std::cerr << "warning: " << result.failures.size() << " cells failed; see failures.csv\n";
    return 0;
}

template <typename Net>
void export_all_formats(const Net& net, const fs::path& stem) {
    for (auto f : {GraphFormat::Dot, GraphFormat::Json, GraphFormat::EdgeList})
        export_network(net, f, fs::path(stem.string() + graph_extension(f)));
}

int habitat_index(const PreparedDataset& ds, const std::string& name) {
    const auto& names = ds.table.group_names;
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw ConfigError("unknown habitat '" + name + "'");
    return static_cast<int>(it - names.begin());
}

int cmd_network(const RunConfig& c, bool k_given) {
    const auto algos = parse_algorithms(c.algorithms);
    const auto cv = cv_options(c);
    const auto intercept = parse_intercept(c.lasso_all_intercept);
    if (!(c.tau_diff >= 0.0)) throw ConfigError("--tau-diff must be non-negative");
    if (c.weight_rule != "average" && c.weight_rule != "maxabs") throw ConfigError("--weight-rule must be 'average' or 'maxabs'");
    const auto rule = c.weight_rule == "average" ? EdgeWeightRule::Average : EdgeWeightRule::MaxAbs;
    const auto ds = load_input(c, k_given);
    const int S = static_cast<int>(ds.table.n_groups());

    std::vector<int> habitats;
    for (const auto& h : split_list(c.habitat)) habitats.push_back(habitat_index(ds, h));
    if (habitats.empty())
        for (int s = 0; s < S; ++s) habitats.push_back(s);
    std::vector<std::pair<int, int>> pairs;
    if (!c.pair.empty()) {
        const auto parts = split_list(c.pair);
        if (parts.size() != 2) throw ConfigError("--pair expects two habitat names separated by a comma");
        pairs.push_back({habitat_index(ds, parts[0]), habitat_index(ds, parts[1])});
        if (pairs[0].first == pairs[0].second) throw ConfigError("--pair needs two different habitats");
    } else {
        for (int s = 0; s < S; ++s)
            for (int t = s + 1; t < S; ++t) pairs.push_back({s, t});
    }

    const fs::path out(c.out);
    const fs::path net_dir = out / "networks";
    fs::create_directories(net_dir);
    std::string summary = "algorithm,kind,habitat_a,habitat_b,edges\n";
    std::string hyper = "algorithm,taxon,lambda,gamma\n";
    for (auto a : algos) {
        const auto label = algorithm_label(a);
        const auto models = fit_taxon_models(ds, a, cv, c.seed, c.threads, intercept);
        for (const auto& m : models)
            hyper += label + "," + m.taxon + "," + text::format_double(m.lambda) + "," + text::format_double(m.gamma) + "\n";
        std::vector<GroupNetwork> nets;
        for (int s = 0; s < S; ++s)
            nets.push_back(symmetrize(coefficient_matrix(models, ds.table.taxa, s), ds.table.taxa,
                                      ds.table.group_names[static_cast<std::size_t>(s)], rule));
        for (int s : habitats) {
            const auto& net = nets[static_cast<std::size_t>(s)];
            export_all_formats(net, net_dir / (label + "_" + file_safe(net.habitat)));
            summary += label + ",group," + net.habitat + ",," + std::to_string(net.edges.size()) + "\n";
        }
        for (auto [s, t] : pairs) {
            const auto d = diff_network(nets[static_cast<std::size_t>(s)], nets[static_cast<std::size_t>(t)], c.tau_diff);
            export_all_formats(d, net_dir / (label + "_diff_" + file_safe(d.habitats.first) + "_" + file_safe(d.habitats.second)));
            summary += label + ",diff," + d.habitats.first + "," + d.habitats.second + "," + std::to_string(d.present_count()) + "\n";
        }
    }
    text::write_file(out / "network_summary.csv", summary);
    text::write_file(out / "hyperparameters.csv", hyper);

    Provenance p{{"command", "network"}, {"input", c.input}, {"seed", std::to_string(c.seed)}, {"algorithms", c.algorithms},
                 {"tau_diff", text::format_double(c.tau_diff)}, {"weight_rule", c.weight_rule}};
    append_dataset_provenance(p, ds);
    append_grid_provenance(p, c);
    write_provenance(out, p);
    std::cout << summary;
    return 0;
}

int cmd_diffnet(const RunConfig& c) {
    if (c.net_a.empty() || c.net_b.empty()) throw ConfigError("--net-a and --net-b are required");
    for (const auto& path : {c.net_a, c.net_b, c.truth})
        if (!path.empty() && !fs::exists(path)) throw ConfigError("'" + path + "' does not exist");
    if (!(c.tau_diff >= 0.0)) throw ConfigError("--tau-diff must be non-negative");
    const auto a = group_network_from_json(text::read_file(c.net_a));
    const auto b = group_network_from_json(text::read_file(c.net_b));
    const auto d = diff_network(a, b, c.tau_diff);
    const fs::path out(c.out);
    fs::create_directories(out);
    export_all_formats(d, out / ("diff_" + file_safe(d.habitats.first) + "_" + file_safe(d.habitats.second)));
    Provenance p{{"command", "diffnet"}, {"net_a", c.net_a}, {"net_b", c.net_b}, {"tau_diff", text::format_double(c.tau_diff)},
                 {"present_edges", std::to_string(d.present_count())}};
    if (!c.truth.empty()) {
        const auto truth = diff_network_from_json(text::read_file(c.truth));
        const auto m = recovery_metrics(d, truth);
        text::write_file(out / "recovery.txt", "precision=" + text::format_double(m.precision) + "\nrecall=" +
                                                   text::format_double(m.recall) + "\nf1=" + text::format_double(m.f1) +
                                                   "\ntrue_positives=" + std::to_string(m.true_positives) +
                                                   "\nfalse_positives=" + std::to_string(m.false_positives) +
                                                   "\nfalse_negatives=" + std::to_string(m.false_negatives) + "\n");
        p.push_back({"truth", c.truth});
        p.push_back({"f1", text::format_double(m.f1)});
    }
    write_provenance(out, p);
    std::cout << d.present_count() << " differing edges between " << d.habitats.first << " and " << d.habitats.second << "\n";
    return 0;
}

int cmd_simulate(const RunConfig& c) {
    auto spec = c.synth;
    spec.seed = c.seed;
    spec.k_folds = c.k_folds;
    spec.tau = c.tau_diff;
    if (spec.k_folds < 2) throw ConfigError("--k-folds must be at least 2");
    const auto r = generate(spec);
    const fs::path out(c.out);
    save_dataset(r.dataset, out);
    text::write_file(out / "raw_counts.csv", matrix_to_csv(r.raw));
    text::write_file(out / "metadata.csv", metadata_to_csv(r.raw));
    for (const auto& net : r.truth_networks) export_network(net, GraphFormat::Json, out / "truth" / (file_safe(net.habitat) + ".json"));
    for (const auto& d : r.truth_diffs)
        export_network(d, GraphFormat::Json,
                       out / "truth" / ("diff_" + file_safe(d.habitats.first) + "_" + file_safe(d.habitats.second) + ".json"));
    Provenance p{{"command", "simulate"},
                 {"seed", std::to_string(spec.seed)},
                 {"groups", std::to_string(spec.S)},
                 {"taxa", std::to_string(spec.D)},
                 {"n_per_group", std::to_string(spec.n_per_group)},
                 {"shared_density", text::format_double(spec.shared_density)},
                 {"specific_density", text::format_double(spec.specific_density)},
                 {"specific_zero_prob", text::format_double(spec.specific_zero_prob)},
                 {"effect_low", text::format_double(spec.effect_low)},
                 {"effect_high", text::format_double(spec.effect_high)},
                 {"noise_sd", text::format_double(spec.noise_sd)},
                 {"tau_diff", text::format_double(spec.tau)},
                 {"sparsity", text::format_double(r.sparsity)}};
    std::size_t diff_edges = 0;
    for (const auto& d : r.truth_diffs) diff_edges += d.present_count();
    p.push_back({"truth_diff_edges", std::to_string(diff_edges)});
    append_dataset_provenance(p, r.dataset);
    write_provenance(out, p);
    std::cout << "simulated " << r.raw.n_samples() << " samples x " << r.raw.n_taxa() << " taxa, sparsity "
              << text::format_double(r.sparsity) << " -> " << out.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// Argument handling.

void add_common(CLI::App* sub, RunConfig& c) {
    sub->add_option("--out", c.out, "Output directory");
    sub->add_option("--seed", c.seed, "Master seed");
    sub->add_option("--config", c.config, "Flat JSON config; command-line flags take precedence");
}

void add_input(CLI::App* sub, RunConfig& c) {
    sub->add_option("--input", c.input, "Abundance matrix (with --metadata) or a prepared dataset directory");
    sub->add_option("--metadata", c.metadata, "Two-column sample_id,group table");
    sub->add_option("--k-folds", c.k_folds, "Outer folds K");
    sub->add_option("--min-prevalence", c.min_prevalence, "Minimum fraction of samples where a taxon is present");
}

void add_model(CLI::App* sub, RunConfig& c) {
    sub->add_option("--algorithms", c.algorithms, "Comma-separated algorithm labels");
    sub->add_option("--inner-folds", c.inner_folds, "Inner CV folds for hyperparameter selection");
    sub->add_option("--threads", c.threads, "Worker threads (0: all cores)");
    sub->add_option("--lambda-count", c.lambda_count);
    sub->add_option("--lambda-min-ratio", c.lambda_min_ratio);
    sub->add_option("--gamma-count", c.gamma_count);
    sub->add_option("--gamma-min-ratio", c.gamma_min_ratio);
    sub->add_option("--gamma-max-ratio", c.gamma_max_ratio);
    sub->add_option("--tol", c.tol, "KKT tolerance");
    sub->add_option("--max-iter", c.max_iter, "Solver sweep limit");
    sub->add_option("--lasso-all-intercept", c.lasso_all_intercept, "pooled or per-habitat");
}

std::string json_value_to_arg(const nlohmann::json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
    if (v.is_number_float()) return text::format_double(v.get<double>());
    if (v.is_array()) {
        std::string out;
        for (const auto& item : v) {
            if (!out.empty()) out += ",";
            out += json_value_to_arg(item, key);
        }
        return out;
    }
    throw ConfigError("config key '" + key + "' has an unsupported value");
}

/// Config entries become leading arguments so that later command-line flags override them.
std::vector<std::string> config_arguments(const std::string& path, CLI::App& app, CLI::App* sub) {
    if (!fs::exists(path)) throw ConfigError("config file '" + path + "' does not exist");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config file must hold a flat JSON object");
    std::vector<std::string> args;
    for (const auto& [key, value] : j.items()) {
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        if (flag == "--config") continue;
        if (sub->get_option_no_throw(flag)) {
            args.push_back(flag);
            args.push_back(json_value_to_arg(value, key));
            continue;
        }
        bool known = false;
        for (const auto* other : app.get_subcommands({})) known |= other->get_option_no_throw(flag) != nullptr;
        if (!known) throw ConfigError("unknown config key '" + key + "'");
    }
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    RunConfig c;
    CLI::App app{"Fused-lasso co-occurrence networks across habitats"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);

    auto* pre = app.add_subcommand("preprocess", "Transform, balance, filter and assign folds");
    add_common(pre, c);
    add_input(pre, c);

    auto* cv = app.add_subcommand("cv", "Taxon-wise Same/All cross-validation and paired comparisons");
    add_common(cv, c);
    add_input(cv, c);
    add_model(cv, c);
    cv->add_option("--dataset-label", c.dataset_label, "Dataset name used in report files");
    cv->add_option("--compare", c.compare, "Extra comparisons, e.g. fused_all:lasso_all,lasso_same:lasso_all");

    auto* net = app.add_subcommand("network", "Per-habitat and difference networks from full-data fits");
    add_common(net, c);
    add_input(net, c);
    add_model(net, c);
    net->add_option("--tau-diff", c.tau_diff, "Difference threshold");
    net->add_option("--habitat", c.habitat, "Comma-separated habitats to export (default: all)");
    net->add_option("--pair", c.pair, "Habitat pair 'a,b' for the difference network (default: all pairs)");
    net->add_option("--weight-rule", c.weight_rule, "average or maxabs");

    auto* diff = app.add_subcommand("diffnet", "Difference network between two exported habitat networks");
    add_common(diff, c);
    diff->add_option("--net-a", c.net_a, "Habitat network JSON");
    diff->add_option("--net-b", c.net_b, "Habitat network JSON");
    diff->add_option("--truth", c.truth, "Reference difference network JSON for recovery metrics");
    diff->add_option("--tau-diff", c.tau_diff, "Difference threshold");

    auto* sim = app.add_subcommand("simulate", "Synthetic dataset with known networks");
    add_common(sim, c);
    sim->add_option("--k-folds", c.k_folds, "Outer folds K");
    sim->add_option("--tau-diff", c.tau_diff, "Difference threshold for the truth networks");
    sim->add_option("--groups", c.synth.S, "Habitats S");
    sim->add_option("--taxa", c.synth.D, "Taxa D");
    sim->add_option("--n-per-group", c.synth.n_per_group);
    sim->add_option("--shared-density", c.synth.shared_density);
    sim->add_option("--specific-density", c.synth.specific_density);
    sim->add_option("--specific-zero-prob", c.synth.specific_zero_prob);
    sim->add_option("--effect-low", c.synth.effect_low);
    sim->add_option("--effect-high", c.synth.effect_high);
    sim->add_option("--noise-sd", c.synth.noise_sd);

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        const auto sub_pos = std::find_if(args.begin(), args.end(), [&](const std::string& a) {
            return a == "preprocess" || a == "cv" || a == "network" || a == "diffnet" || a == "simulate";
        });
        if (sub_pos != args.end()) {
            std::string config_path;
            for (auto it = sub_pos; it != args.end(); ++it) {
                if (*it == "--config" && std::next(it) != args.end()) config_path = *std::next(it);
                if (it->rfind("--config=", 0) == 0) config_path = it->substr(9);
            }
            if (!config_path.empty()) {
                const auto extra = config_arguments(config_path, app, app.get_subcommand(*sub_pos));
                args.insert(std::next(sub_pos), extra.begin(), extra.end());
            }
        }
        std::reverse(args.begin(), args.end());
        app.parse(args);

        const bool k_given = app.got_subcommand(cv) ? cv->count("--k-folds") > 0 : net->count("--k-folds") > 0;
        if (app.got_subcommand(pre)) return cmd_preprocess(c);
        if (app.got_subcommand(cv)) return cmd_cv(c, k_given);
        if (app.got_subcommand(net)) return cmd_network(c, k_given);
        if (app.got_subcommand(diff)) return cmd_diffnet(c);
        if (app.got_subcommand(sim)) return cmd_simulate(c);
        return kExitOther;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitOther;
    }
}
