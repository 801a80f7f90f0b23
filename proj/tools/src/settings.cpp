#include "settings.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "coge/rng.hpp"

namespace coge::cli {
namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    if (!obj.is_object()) {
        throw UsageError("manifest: '" + where + "' must be an object");
    }
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.contains(key)) {
            throw UsageError("manifest: unknown key '" + where + "." + key + "'");
        }
    }
}

template <typename T>
void take(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) {
        return;
    }
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw UsageError(std::string("manifest: bad value for '") + key + "': " + e.what());
    }
}

}  // namespace

void apply_manifest(const json& m, Settings& s) {
    check_keys(m, "<root>", {"seed", "paths", "generator", "train", "explain", "eval"});
    take(m, "seed", s.seed);

    if (m.contains("paths")) {
        const json& p = m["paths"];
        check_keys(p, "paths", {"dataset", "model", "output_dir", "metrics"});
        take(p, "dataset", s.dataset_path);
        take(p, "model", s.model_path);
        take(p, "output_dir", s.output_dir);
        take(p, "metrics", s.metrics_path);
    }
    if (m.contains("generator")) {
        const json& g = m["generator"];
        check_keys(g, "generator",
                   {"n_graphs", "tree_min_nodes", "tree_max_nodes", "motifs_min", "motifs_max", "cycle_min",
                    "cycle_max", "clique_min", "clique_max", "feature_dim", "train_fraction",
                    "shuffle_node_ids"});
        GeneratorConfig& c = s.generator;
        take(g, "n_graphs", s.n_graphs);
        take(g, "tree_min_nodes", c.tree_min_nodes);
        take(g, "tree_max_nodes", c.tree_max_nodes);
        take(g, "motifs_min", c.motifs_min);
        take(g, "motifs_max", c.motifs_max);
        take(g, "cycle_min", c.cycle_min);
        take(g, "cycle_max", c.cycle_max);
        take(g, "clique_min", c.clique_min);
        take(g, "clique_max", c.clique_max);
        take(g, "feature_dim", c.feature_dim);
        take(g, "train_fraction", c.train_fraction);
        take(g, "shuffle_node_ids", c.shuffle_node_ids);
    }
    if (m.contains("train")) {
        const json& t = m["train"];
        check_keys(t, "train",
                   {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "adam_epsilon", "hidden_dim",
                    "num_layers", "propagation", "min_test_accuracy"});
        take(t, "epochs", s.train.epochs);
        take(t, "batch_size", s.train.batch_size);
        take(t, "learning_rate", s.train.learning_rate);
        take(t, "beta1", s.train.beta1);
        take(t, "beta2", s.train.beta2);
        take(t, "adam_epsilon", s.train.adam_epsilon);
        take(t, "hidden_dim", s.train.hidden_dim);
        take(t, "num_layers", s.train.num_layers);
        take(t, "propagation", s.propagation);
        take(t, "min_test_accuracy", s.min_test_accuracy);
    }
    if (m.contains("explain")) {
        const json& e = m["explain"];
        check_keys(e, "explain",
                   {"method", "variant", "graph_ids", "k", "steps", "learning_rate", "beta1", "beta2",
                    "adam_epsilon", "sign", "distance", "relative_epsilon", "tolerance", "max_iterations",
                    "selection_tolerance"});
        take(e, "method", s.method);
        take(e, "variant", s.variant);
        take(e, "graph_ids", s.graph_ids);
        take(e, "k", s.explain.k);
        take(e, "steps", s.explain.steps);
        take(e, "learning_rate", s.explain.learning_rate);
        take(e, "beta1", s.explain.beta1);
        take(e, "beta2", s.explain.beta2);
        take(e, "adam_epsilon", s.explain.adam_epsilon);
        take(e, "sign", s.sign);
        take(e, "distance", s.distance);
        take(e, "relative_epsilon", s.explain.relative_epsilon);
        take(e, "tolerance", s.explain.tolerance);
        take(e, "max_iterations", s.explain.max_iterations);
        take(e, "selection_tolerance", s.explain.selection_tolerance);
    }
    if (m.contains("eval")) {
        const json& v = m["eval"];
        check_keys(v, "eval", {"split", "limit", "workers", "methods", "variants", "thresholds"});
        take(v, "split", s.split);
        if (v.contains("limit")) {
            if (v["limit"].is_null()) {
                s.limit.reset();
            } else {
                std::size_t limit = 0;
                take(v, "limit", limit);
                s.limit = limit;
            }
        }
        take(v, "workers", s.workers);
        take(v, "methods", s.methods);
        take(v, "variants", s.variants);
        take(v, "thresholds", s.thresholds);
    }
}

void apply_manifest_file(const std::string& path, Settings& s) {
    std::ifstream in(path);
    if (!in) {
        throw UsageError("cannot open manifest '" + path + "'");
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw UsageError("manifest '" + path + "' is not valid JSON: " + e.what());
    }
    apply_manifest(doc, s);
}

TrainConfig train_config(const Settings& s) {
    TrainConfig cfg = s.train;
    cfg.seed = s.seed;
    try {
        cfg.propagation = parse_propagation(s.propagation);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

ExplainConfig explain_config(const Settings& s) {
    ExplainConfig cfg = s.explain;
    if (s.sign == "equation") {
        cfg.sign = SignConvention::equation;
    } else if (s.sign == "prose") {
        cfg.sign = SignConvention::prose;
    } else {
        throw UsageError("unknown sign convention '" + s.sign + "' (expected equation or prose)");
    }
    if (s.distance == "debiased") {
        cfg.distance = DistanceKind::debiased;
    } else if (s.distance == "entropic") {
        cfg.distance = DistanceKind::entropic;
    } else {
        throw UsageError("unknown distance '" + s.distance + "' (expected debiased or entropic)");
    }
    if (cfg.k < 1 || cfg.steps < 0 || !(cfg.learning_rate > 0.0) || !(cfg.relative_epsilon > 0.0) ||
        !(cfg.tolerance > 0.0) || cfg.max_iterations < 1) {
        throw UsageError("explain settings must be positive (k >= 1, steps >= 0)");
    }
    return cfg;
}

Split parse_split(const std::string& name) {
    if (name == "train") {
        return Split::train;
    }
    if (name == "test") {
        return Split::test;
    }
    throw UsageError("unknown split '" + name + "' (expected train or test)");
}

EvalConfig eval_config(const Settings& s) {
    EvalConfig cfg;
    cfg.split = parse_split(s.split);
    cfg.workers = s.workers;
    cfg.seed = derive_seed(s.seed, "explain");
    cfg.explain = explain_config(s);
    cfg.limit = s.limit;
    if (cfg.workers < 1) {
        throw UsageError("workers must be >= 1");
    }
    return cfg;
}

std::uint64_t generation_seed(const Settings& s) { return derive_seed(s.seed, "generate"); }

Threshold parse_threshold(const std::string& text) {
    Threshold t;
    t.text = text;
    std::size_t op = text.find(">=");
    if (op == std::string::npos) {
        op = text.find("<=");
        t.at_least = false;
    }
    const std::size_t dot = text.find('.');
    if (op == std::string::npos || dot == std::string::npos || dot > op) {
        throw UsageError("threshold '" + text + "' is not of the form method.metric>=value");
    }
    t.method = text.substr(0, dot);
    t.metric = text.substr(dot + 1, op - dot - 1);
    static const std::set<std::string> metrics = {"cycle_mean", "cycle_std", "clique_mean", "clique_std", "avg"};
    if (!metrics.contains(t.metric)) {
        throw UsageError("threshold '" + text + "': unknown metric '" + t.metric + "'");
    }
    std::istringstream value(text.substr(op + 2));
    if (!(value >> t.bound) || !(value >> std::ws).eof()) {
        throw UsageError("threshold '" + text + "': bad number");
    }
    return t;
}

std::vector<std::string> check_thresholds(const std::vector<Threshold>& thresholds,
                                          const std::vector<MethodReport>& reports) {
    std::vector<std::string> failed;
    for (const Threshold& t : thresholds) {
        for (const MethodReport& r : reports) {
            if (r.method != t.method) {
                continue;
            }
            double v = r.average;
            if (t.metric == "cycle_mean") {
                v = r.cycle.mean;
            } else if (t.metric == "cycle_std") {
                v = r.cycle.std;
            } else if (t.metric == "clique_mean") {
                v = r.clique.mean;
            } else if (t.metric == "clique_std") {
                v = r.clique.std;
            }
            const bool ok = t.at_least ? v >= t.bound : v <= t.bound;
            if (!ok) {
                std::ostringstream msg;
                msg << t.text << " (got " << v << ")";
                failed.push_back(msg.str());
            }
        }
    }
    return failed;
}

}  // namespace coge::cli
