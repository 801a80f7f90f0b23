#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coge/cycliq.hpp"
#include "coge/eval.hpp"
#include "coge/gcn.hpp"

namespace coge::cli {

/// Bad flag values, unknown manifest keys or unknown methods. Exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything a subcommand can be configured with. Defaults first, then
/// command-line flags, then the manifest on top.
struct Settings {
    std::uint64_t seed = 0;

    std::string dataset_path = "cycliq.jsonl";
    std::string model_path = "model.bin";
    std::string output_dir = "out";
    std::string metrics_path;  // empty: <model>.metrics.csv

    int n_graphs = 2000;
    GeneratorConfig generator{};

    TrainConfig train{};
    std::string propagation = "degree_scaled";
    double min_test_accuracy = 0.95;

    ExplainConfig explain{};
    std::string sign = "equation";
    std::string distance = "debiased";

    std::string method = "coge";
    std::string variant;
    std::vector<int> graph_ids;
    std::vector<std::string> methods = {"random", "occlusion", "sensitivity", "coge"};
    std::vector<std::string> variants;  // empty: all seven

    std::string split = "train";
    std::optional<std::size_t> limit;
    int workers = 1;
    std::vector<std::string> thresholds;
};

/// Overrides `s` with every key present in the manifest document. Unknown
/// keys are rejected so that typos do not silently fall back to defaults.
///
///   {"seed": 0,
///    "paths": {"dataset", "model", "output_dir", "metrics"},
///    "generator": {"n_graphs", "tree_min_nodes", ..., "shuffle_node_ids"},
///    "train": {"epochs", "batch_size", "learning_rate", "beta1", "beta2",
///              "adam_epsilon", "hidden_dim", "num_layers", "propagation",
///              "min_test_accuracy"},
///    "explain": {"method", "variant", "graph_ids", "k", "steps", "learning_rate",
///                "beta1", "beta2", "adam_epsilon", "sign", "distance",
///                "relative_epsilon", "tolerance", "max_iterations",
///                "selection_tolerance"},
///    "eval": {"split", "limit", "workers", "methods", "variants", "thresholds"}}
void apply_manifest(const nlohmann::json& manifest, Settings& s);
void apply_manifest_file(const std::string& path, Settings& s);

/// Resolved library configurations. Throw UsageError on bad enum names.
TrainConfig train_config(const Settings& s);
ExplainConfig explain_config(const Settings& s);
EvalConfig eval_config(const Settings& s);
Split parse_split(const std::string& name);

/// Stage seeds fanned out from the global seed.
std::uint64_t generation_seed(const Settings& s);

/// "method.metric>=value" or "method.metric<=value"; metric is one of
/// cycle_mean, cycle_std, clique_mean, clique_std, avg.
struct Threshold {
    std::string method;
    std::string metric;
    bool at_least = true;
    double bound = 0.0;
    std::string text;
};
Threshold parse_threshold(const std::string& text);

/// Messages for violated thresholds. Thresholds naming a method that is
/// not among `reports` are skipped (one manifest serves evaluate and ablate).
std::vector<std::string> check_thresholds(const std::vector<Threshold>& thresholds,
                                          const std::vector<MethodReport>& reports);

}  // namespace coge::cli
