#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "fairstack/experiments.hpp"

namespace fairstack {

struct GroupConfig {
    std::optional<Mat> cost;
    std::optional<Mat> projector;
    Eigen::Index svd_k = 0;  // projector_source "svd:k"
    Sampler sampler;
};

struct DatasetConfig {
    std::string name;
    std::filesystem::path path;
    DatasetSchema schema;
};

// A split is either a dataset rule or, for synthetic scenarios, a pair of coordinate supports.
struct SplitConfig {
    std::string name;
    std::string dataset;
    SplitRule rule;
    std::optional<std::array<std::vector<Eigen::Index>, 2>> support;
};

struct ExperimentConfig {
    std::vector<std::string> splits;
    CostCase cost_case = CostCase::Uniform;
    Eigen::Index k = 5;
    Objective objective = Objective::Acc;
    std::string beta_grid;
};

struct SynthConfig {
    Eigen::Index n_per_group = 200;
    CostCase cost_case = CostCase::Uniform;
    double edge_probability = 0.3;
    std::array<Eigen::Index, 2> rank{5, 5};
    std::array<std::vector<Eigen::Index>, 2> support;
};

struct Config {
    std::filesystem::path base_dir;
    Eigen::Index dimension = 0;
    std::vector<std::string> names;
    std::optional<CausalGraph> graph;
    Vec desirability;
    bool allow_zero_desirability = false;
    Vec ground_truth;
    std::string ground_truth_fit;  // dataset name for "fit:<name>"
    std::array<GroupConfig, 2> groups;
    FairnessSpec fairness;
    bool has_fairness = false;
    std::vector<DatasetConfig> datasets;
    std::vector<SplitConfig> splits;
    std::optional<ExperimentConfig> experiment;
    std::optional<SynthConfig> synthetic;

    const DatasetConfig& dataset(const std::string& name) const {
        for (const auto& d : datasets)
            if (d.name == name) return d;
        throw Error(ErrorKind::Input, "unknown dataset '" + name + "'");
    }
    const SplitConfig& split(const std::string& name) const {
        for (const auto& s : splits)
            if (s.name == name) return s;
        throw Error(ErrorKind::Input, "unknown split '" + name + "'");
    }
};

namespace detail {

[[noreturn]] inline void config_fail(const std::string& where, const std::string& why) {
    throw Error(ErrorKind::Input, "config " + where + ": " + why);
}

inline double yaml_double(const YAML::Node& n, const std::string& where) {
    try {
        return n.as<double>();
    } catch (const YAML::Exception&) {
        config_fail(where, "expected a number");
    }
}

inline std::string yaml_string(const YAML::Node& n, const std::string& where) {
    if (!n.IsScalar()) config_fail(where, "expected a scalar");
    return n.as<std::string>();
}

inline Vec yaml_vec(const YAML::Node& n, const std::string& where) {
    if (!n.IsSequence()) config_fail(where, "expected a list of numbers");
    Vec v(static_cast<Eigen::Index>(n.size()));
    for (std::size_t i = 0; i < n.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = yaml_double(n[i], where + "[" + std::to_string(i) + "]");
    return v;
}

inline Mat yaml_mat(const YAML::Node& n, const std::string& where) {
    if (!n.IsSequence() || n.size() == 0) config_fail(where, "expected a non-empty list of rows");
    const std::size_t cols = n[0].IsSequence() ? n[0].size() : 0;
    Mat m(static_cast<Eigen::Index>(n.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (!n[i].IsSequence() || n[i].size() != cols) config_fail(where, "rows must have equal length");
        for (std::size_t j = 0; j < cols; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                yaml_double(n[i][j], where + "[" + std::to_string(i) + "][" + std::to_string(j) + "]");
    }
    return m;
}

inline std::vector<Eigen::Index> yaml_indices(const YAML::Node& n, const std::vector<std::string>& names,
                                              const std::string& where) {
    if (!n.IsSequence()) config_fail(where, "expected a list");
    std::vector<Eigen::Index> out;
    for (std::size_t i = 0; i < n.size(); ++i) {
        std::string s = yaml_string(n[i], where);
        auto it = std::find(names.begin(), names.end(), s);
        if (it != names.end()) {
            out.push_back(static_cast<Eigen::Index>(it - names.begin()));
            continue;
        }
        double v = 0.0;
        if (!parse_double(s, v) || v != std::floor(v) || v < 0) config_fail(where, "unknown node '" + s + "'");
        out.push_back(static_cast<Eigen::Index>(v));
    }
    return out;
}

inline ColumnEncoding parse_encoding(const YAML::Node& n, const std::string& where) {
    if (n.IsScalar()) {
        ColumnEncoding e;
        e.column = n.as<std::string>();
        return e;
    }
    if (!n["column"]) config_fail(where, "missing 'column'");
    ColumnEncoding e;
    e.column = yaml_string(n["column"], where + ".column");
    std::string enc = n["encode"] ? yaml_string(n["encode"], where + ".encode") : "numeric";
    if (enc == "numeric") {
        e.encoding = Encoding::Numeric;
    } else if (enc == "threshold") {
        e.encoding = Encoding::Threshold;
        if (n["positive"]) {
            for (const auto& v : n["positive"]) e.positive.insert(v.as<std::string>());
        } else if (n["threshold"]) {
            e.threshold = yaml_double(n["threshold"], where + ".threshold");
        } else {
            config_fail(where, "threshold encoding needs 'threshold' or 'positive'");
        }
    } else if (enc == "codes") {
        e.encoding = Encoding::Codes;
        if (!n["codes"] || !n["codes"].IsMap()) config_fail(where, "codes encoding needs a 'codes' map");
        for (const auto& kv : n["codes"])
            e.codes[kv.first.as<std::string>()] = yaml_double(kv.second, where + ".codes");
    } else {
        config_fail(where, "unknown encoding '" + enc + "'");
    }
    return e;
}

inline SplitRule parse_rule(const YAML::Node& n, const std::string& where) {
    if (!n || !n.IsMap()) config_fail(where, "expected a rule map");
    SplitRule r;
    r.column = yaml_string(n["column"], where + ".column");
    std::string op = n["op"] ? yaml_string(n["op"], where + ".op") : "le";
    static const std::map<std::string, SplitOp> ops{
        {"le", SplitOp::Le}, {"lt", SplitOp::Lt}, {"ge", SplitOp::Ge}, {"gt", SplitOp::Gt}, {"in", SplitOp::In}};
    auto it = ops.find(op);
    if (it == ops.end()) config_fail(where, "unknown op '" + op + "'");
    r.op = it->second;
    if (r.op == SplitOp::In) {
        if (!n["values"] || !n["values"].IsSequence()) config_fail(where, "op 'in' needs 'values'");
        for (const auto& v : n["values"]) r.values.insert(v.as<std::string>());
    } else {
        r.value = yaml_double(n["value"], where + ".value");
    }
    return r;
}

inline FairnessKind parse_kind(const std::string& s) {
    if (s == "l1") return FairnessKind::L1;
    if (s == "l2") return FairnessKind::L2;
    if (s == "asym") return FairnessKind::Asym;
    if (s == "custom") return FairnessKind::Custom;
    throw Error(ErrorKind::Input, "unknown fairness kind '" + s + "' (l1|l2|asym|custom)");
}

inline Objective parse_objective(const std::string& s) {
    if (s == "acc") return Objective::Acc;
    if (s == "sw") return Objective::Sw;
    throw Error(ErrorKind::Input, "unknown objective '" + s + "' (acc|sw)");
}

}  // namespace detail

using detail::parse_kind;
using detail::parse_objective;

inline Config parse_config(const YAML::Node& root, const std::filesystem::path& base_dir = ".") {
    using namespace detail;
    if (!root.IsMap()) config_fail("root", "expected a map");
    Config c;
    c.base_dir = base_dir;
    if (!root["dimension"]) config_fail("dimension", "missing");
    double dim = yaml_double(root["dimension"], "dimension");
    if (dim < 1 || dim != std::floor(dim)) config_fail("dimension", "must be a positive integer");
    c.dimension = static_cast<Eigen::Index>(dim);
    if (c.dimension > static_cast<Eigen::Index>(kMaxGraphNodes))
        throw Error(ErrorKind::Capacity, "dimension " + std::to_string(c.dimension) + " exceeds 24");

    const YAML::Node graph = root["graph"];
    if (graph && graph["names"])
        for (const auto& n : graph["names"]) c.names.push_back(n.as<std::string>());
    if (root["names"])
        for (const auto& n : root["names"]) c.names.push_back(n.as<std::string>());
    if (!c.names.empty() && static_cast<Eigen::Index>(c.names.size()) != c.dimension)
        config_fail("names", "length differs from dimension");
    if (graph) {
        CausalGraph g;
        g.node_count = static_cast<std::size_t>(c.dimension);
        if (graph["edges"]) {
            if (!graph["edges"].IsSequence()) config_fail("graph.edges", "expected a list of [src, dst, weight]");
            for (std::size_t i = 0; i < graph["edges"].size(); ++i) {
                const YAML::Node e = graph["edges"][i];
                std::string where = "graph.edges[" + std::to_string(i) + "]";
                if (!e.IsSequence() || e.size() != 3) config_fail(where, "expected [src, dst, weight]");
                YAML::Node ends;
                ends.push_back(e[0]);
                ends.push_back(e[1]);
                auto idx = yaml_indices(ends, c.names, where);
                g.edges.push_back({static_cast<std::size_t>(idx[0]), static_cast<std::size_t>(idx[1]),
                                   yaml_double(e[2], where + ".weight")});
            }
        }
        c.graph = g;
    }

    c.allow_zero_desirability = root["allow_zero_desirability"] && root["allow_zero_desirability"].as<bool>();
    if (root["desirability"]) {
        c.desirability = yaml_vec(root["desirability"], "desirability");
    } else if (root["desirable"]) {
        double eps = root["desirability_epsilon"] ? yaml_double(root["desirability_epsilon"], "desirability_epsilon")
                                                  : 1e-6;
        c.desirability = desirability_vector(c.dimension, yaml_indices(root["desirable"], c.names, "desirable"), eps);
    } else {
        config_fail("desirability", "missing (give 'desirability' or 'desirable')");
    }

    if (!root["ground_truth"]) config_fail("ground_truth", "missing");
    if (root["ground_truth"].IsScalar()) {
        std::string gt = root["ground_truth"].as<std::string>();
        if (gt.rfind("fit:", 0) != 0) config_fail("ground_truth", "expected a vector or 'fit:<dataset>'");
        c.ground_truth_fit = gt.substr(4);
    } else {
        c.ground_truth = yaml_vec(root["ground_truth"], "ground_truth");
    }

    for (int g = 0; g < 2; ++g) {
        std::string key = "group" + std::to_string(g + 1);
        const YAML::Node n = root[key];
        GroupConfig& gc = c.groups[static_cast<std::size_t>(g)];
        if (!n) continue;
        if (n["cost"]) gc.cost = yaml_mat(n["cost"], key + ".cost");
        if (n["projector"]) gc.projector = yaml_mat(n["projector"], key + ".projector");
        if (n["projector_source"]) {
            const YAML::Node ps = n["projector_source"];
            if (ps.IsSequence()) {
                gc.projector = yaml_mat(ps, key + ".projector_source");
            } else {
                std::string src = yaml_string(ps, key + ".projector_source");
                double k = 0.0;
                if (src.rfind("svd:", 0) != 0 || !parse_double(src.substr(4), k) || k < 1 || k != std::floor(k))
                    config_fail(key + ".projector_source", "expected a matrix or 'svd:<k>'");
                gc.svd_k = static_cast<Eigen::Index>(k);
            }
        }
        if (n["sampler"]) {
            gc.sampler.mean = yaml_vec(n["sampler"]["mean"], key + ".sampler.mean");
            gc.sampler.factor = yaml_mat(n["sampler"]["factor"], key + ".sampler.factor");
        }
    }

    if (const YAML::Node f = root["fairness"]) {
        c.has_fairness = true;
        c.fairness.kind = parse_kind(yaml_string(f["kind"], "fairness.kind"));
        if (f["beta"]) c.fairness.beta = yaml_double(f["beta"], "fairness.beta");
        if (f["privileged_group"])
            c.fairness.privileged_group = static_cast<int>(yaml_double(f["privileged_group"], "fairness.privileged_group"));
        if (f["q"]) c.fairness.custom_q = yaml_mat(f["q"], "fairness.q");
        if (f["f"]) {
            auto e = std::make_shared<const Expression>(Expression::parse(yaml_string(f["f"], "fairness.f")));
            if (e->max_index() > c.dimension) config_fail("fairness.f", "references a coordinate beyond the dimension");
            c.fairness.f = e;
        }
        if (f["lipschitz"]) c.fairness.lipschitz = yaml_double(f["lipschitz"], "fairness.lipschitz");
    }

    std::map<std::string, std::set<std::string>> keep;
    if (const YAML::Node sp = root["splits"]) {
        for (std::size_t i = 0; i < sp.size(); ++i) {
            std::string where = "splits[" + std::to_string(i) + "]";
            SplitConfig s;
            s.name = yaml_string(sp[i]["name"], where + ".name");
            if (sp[i]["support1"] || sp[i]["support2"]) {
                if (!sp[i]["support1"] || !sp[i]["support2"]) config_fail(where, "needs both support1 and support2");
                s.support = std::array<std::vector<Eigen::Index>, 2>{
                    yaml_indices(sp[i]["support1"], c.names, where + ".support1"),
                    yaml_indices(sp[i]["support2"], c.names, where + ".support2")};
            } else {
                s.dataset = yaml_string(sp[i]["dataset"], where + ".dataset");
                s.rule = parse_rule(sp[i]["rule"], where + ".rule");
                keep[s.dataset].insert(s.rule.column);
            }
            c.splits.push_back(s);
        }
    }
    if (const YAML::Node ds = root["datasets"]) {
        for (std::size_t i = 0; i < ds.size(); ++i) {
            std::string where = "datasets[" + std::to_string(i) + "]";
            DatasetConfig d;
            d.name = yaml_string(ds[i]["name"], where + ".name");
            d.path = base_dir / yaml_string(ds[i]["path"], where + ".path");
            if (!ds[i]["features"] || !ds[i]["features"].IsSequence()) config_fail(where, "missing 'features'");
            for (std::size_t j = 0; j < ds[i]["features"].size(); ++j)
                d.schema.features.push_back(
                    parse_encoding(ds[i]["features"][j], where + ".features[" + std::to_string(j) + "]"));
            if (ds[i]["label"]) d.schema.label = parse_encoding(ds[i]["label"], where + ".label");
            d.schema.standardize = ds[i]["standardize"] && ds[i]["standardize"].as<bool>();
            for (const auto& k : keep[d.name]) d.schema.keep.push_back(k);
            c.datasets.push_back(d);
        }
    }
    for (const auto& s : c.splits)
        if (!s.support) (void)c.dataset(s.dataset);

    if (const YAML::Node e = root["experiment"]) {
        ExperimentConfig ex;
        if (e["splits"])
            for (const auto& s : e["splits"]) ex.splits.push_back(s.as<std::string>());
        if (e["split"]) ex.splits.push_back(yaml_string(e["split"], "experiment.split"));
        if (e["cost_case"]) ex.cost_case = parse_cost_case(yaml_string(e["cost_case"], "experiment.cost_case"));
        if (e["k"]) ex.k = static_cast<Eigen::Index>(yaml_double(e["k"], "experiment.k"));
        if (e["objective"]) ex.objective = parse_objective(yaml_string(e["objective"], "experiment.objective"));
        if (e["beta_grid"]) ex.beta_grid = yaml_string(e["beta_grid"], "experiment.beta_grid");
        for (const auto& s : ex.splits) (void)c.split(s);
        c.experiment = ex;
    }
    if (const YAML::Node s = root["synthetic"]) {
        SynthConfig sc;
        if (s["n_per_group"]) sc.n_per_group = static_cast<Eigen::Index>(yaml_double(s["n_per_group"], "synthetic.n_per_group"));
        if (s["cost_case"]) sc.cost_case = parse_cost_case(yaml_string(s["cost_case"], "synthetic.cost_case"));
        if (s["edge_probability"]) sc.edge_probability = yaml_double(s["edge_probability"], "synthetic.edge_probability");
        if (s["rank"]) {
            Vec r = yaml_vec(s["rank"], "synthetic.rank");
            if (r.size() != 2) config_fail("synthetic.rank", "expected two entries");
            sc.rank = {static_cast<Eigen::Index>(r(0)), static_cast<Eigen::Index>(r(1))};
        }
        if (s["support1"]) sc.support[0] = yaml_indices(s["support1"], c.names, "synthetic.support1");
        if (s["support2"]) sc.support[1] = yaml_indices(s["support2"], c.names, "synthetic.support2");
        c.synthetic = sc;
    }
    return c;
}

inline Config load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error(ErrorKind::Io, "config '" + path.string() + "' not found");
    YAML::Node root;
    try {
        root = YAML::LoadFile(path.string());
    } catch (const YAML::Exception& e) {
        throw Error(ErrorKind::Input, "config '" + path.string() + "': " + e.what());
    }
    return parse_config(root, path.parent_path());
}

struct BuiltScenario {
    Scenario scenario;
    std::string split;
    std::vector<std::string> notes;
};

// Assembles the scenario for one split ("" when no split is involved).
inline BuiltScenario build_scenario(const Config& c, const std::string& split_name = "", std::uint64_t seed = 0) {
    BuiltScenario out;
    out.split = split_name;
    Scenario& s = out.scenario;
    const Eigen::Index d = c.dimension;
    std::map<std::string, TabularDataset> cache;
    auto dataset = [&](const std::string& name) -> const TabularDataset& {
        auto it = cache.find(name);
        if (it != cache.end()) return it->second;
        const DatasetConfig& dc = c.dataset(name);
        return cache.emplace(name, ingest_dataset(dc.path, dc.schema)).first->second;
    };

    const SplitConfig* split = split_name.empty() ? nullptr : &c.split(split_name);
    if (split && split->support && !c.synthetic)
        throw Error(ErrorKind::Input, "split '" + split_name + "' gives supports but the config has no synthetic section");
    std::optional<SynthOutput> synth;
    if (c.synthetic) {
        SynthOptions o;
        o.d = d;
        o.n_per_group = c.synthetic->n_per_group;
        o.seed = seed;
        o.cost_case = c.synthetic->cost_case;
        o.edge_probability = c.synthetic->edge_probability;
        o.rank = c.synthetic->rank;
        o.support = split && split->support ? *split->support : c.synthetic->support;
        o.desirability = c.desirability;
        o.ground_truth = c.ground_truth.size() ? c.ground_truth : Vec(Vec::Zero(d));
        synth = synth_generate(o);
    }

    if (c.graph) {
        s.contribution = build_contribution_matrix(*c.graph);
    } else if (synth) {
        s.contribution = synth->scenario.contribution;
    } else {
        CausalGraph g;
        g.node_count = static_cast<std::size_t>(d);
        s.contribution = build_contribution_matrix(g);
        out.notes.push_back("no graph given: C = I");
    }

    std::optional<GroupSplit> parts;
    if (split && !split->support) parts = split_groups(dataset(split->dataset), split->rule);
    const CostCase cost_case = c.experiment ? c.experiment->cost_case : CostCase::Uniform;
    auto default_costs = cost_pair(cost_case, d, seed);
    for (std::size_t g = 0; g < 2; ++g) {
        const GroupConfig& gc = c.groups[g];
        GroupParams& gp = s.groups[g];
        if (gc.cost) {
            gp.cost = *gc.cost;
        } else if (synth) {
            gp.cost = synth->scenario.groups[g].cost;
        } else {
            gp.cost = default_costs[g];
        }
        if (gc.projector) {
            gp.projector = *gc.projector;
        } else if (gc.svd_k > 0 || (parts && !synth)) {
            if (!parts) throw Error(ErrorKind::Input, "group" + std::to_string(g + 1) + " projector_source svd needs a split");
            Eigen::Index k = gc.svd_k > 0 ? gc.svd_k : (c.experiment ? c.experiment->k : 5);
            ProjectorResult pr = projector_from_samples(g == 0 ? parts->group1 : parts->group2, k);
            if (pr.reduced)
                out.notes.push_back("group" + std::to_string(g + 1) + " projector rank reduced to " + std::to_string(pr.rank));
            gp.projector = pr.projector;
        } else if (synth) {
            gp.projector = synth->scenario.groups[g].projector;
        } else {
            throw Error(ErrorKind::Input, "group" + std::to_string(g + 1) + " has no projector");
        }
        if (gc.sampler.defined()) {
            gp.sampler = gc.sampler;
        } else if (synth && !gc.projector) {
            gp.sampler = synth->scenario.groups[g].sampler;
        } else if (gp.projector.rows() == d) {
            gp.sampler.mean = Vec::Zero(d);
            gp.sampler.factor = gp.projector;
        }
    }
    s.desirability = c.desirability;
    s.allow_zero_desirability = c.allow_zero_desirability;
    if (!c.ground_truth_fit.empty()) {
        s.ground_truth = fit_ground_truth(dataset(c.ground_truth_fit));
    } else {
        s.ground_truth = c.ground_truth;
    }
    return out;
}

inline std::vector<BuiltScenario> build_split_scenarios(const Config& c, std::uint64_t seed = 0) {
    std::vector<BuiltScenario> out;
    if (!c.experiment || c.experiment->splits.empty()) {
        out.push_back(build_scenario(c, "", seed));
    } else {
        for (const auto& s : c.experiment->splits) out.push_back(build_scenario(c, s, seed));
    }
    return out;
}

}  // namespace fairstack
