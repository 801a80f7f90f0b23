#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "coge/checkpoint.hpp"
#include "coge/dataset_io.hpp"
#include "coge/eval.hpp"
#include "coge/parallel.hpp"
#include "settings.hpp"

namespace coge::cli {
namespace fs = std::filesystem;

int verbosity_from_env() {
    const char* value = std::getenv("COGE_VERBOSITY");
    if (!value || !*value) {
        return 1;
    }
    const std::string v(value);
    if (v == "0" || v == "quiet") {
        return 0;
    }
    if (v == "2" || v == "debug") {
        return 2;
    }
    return 1;
}

namespace {

struct Console {
    std::ostream& out;
    std::ostream& err;
    int level = 1;

    void info(const std::string& msg) const {
        if (level >= 1) {
            out << msg << '\n';
        }
    }
    void debug(const std::string& msg) const {
        if (level >= 2) {
            err << "[debug] " << msg << '\n';
        }
    }
    void warn(const std::string& msg) const { err << "warning: " << msg << '\n'; }
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fixed(double v, int digits = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

Dataset load_checked(const Settings& s, const Console& con) {
    Dataset ds = load_dataset(s.dataset_path);
    if (!ds.disconnected_graphs.empty()) {
        con.warn(std::to_string(ds.disconnected_graphs.size()) + " disconnected graph(s) in " +
                 s.dataset_path + ", first id " + std::to_string(ds.disconnected_graphs.front()));
    }
    return ds;
}

GcnModel load_checked_model(const Settings& s, const Dataset& ds) {
    GcnModel model = load_model(s.model_path);
    if (ds.feature_dim && *ds.feature_dim != model.input_dim()) {
        throw DimensionError("model expects " + std::to_string(model.input_dim()) +
                             " input features but the dataset has " + std::to_string(*ds.feature_dim));
    }
    return model;
}

std::string table(const std::vector<MethodReport>& reports) {
    std::ostringstream s;
    s << std::left << std::setw(20) << "method" << std::setw(18) << "cycle" << std::setw(18) << "clique"
      << "avg\n";
    for (const MethodReport& r : reports) {
        s << std::left << std::setw(20) << r.method << std::setw(18)
          << (fixed(r.cycle.mean, 2) + " +- " + fixed(r.cycle.std, 2)) << std::setw(18)
          << (fixed(r.clique.mean, 2) + " +- " + fixed(r.clique.std, 2)) << fixed(r.average, 2);
        if (r.failures > 0) {
            s << "  (" << r.failures << " failed)";
        }
        s << '\n';
    }
    return s.str();
}

int finish_report(const std::vector<MethodReport>& reports, const Settings& s, const std::string& stem,
                  const Console& con) {
    fs::create_directories(s.output_dir);
    const fs::path base = fs::path(s.output_dir) / stem;
    emit_report(reports, base.string() + ".csv", ReportFormat::csv);
    emit_report(reports, base.string() + ".json", ReportFormat::json);
    con.info(table(reports));
    con.info("wrote " + base.string() + ".csv and " + base.string() + ".json");

    std::vector<Threshold> thresholds;
    for (const std::string& t : s.thresholds) {
        thresholds.push_back(parse_threshold(t));
    }
    const std::vector<std::string> failed = check_thresholds(thresholds, reports);
    if (!failed.empty()) {
        con.err << "threshold check failed:\n";
        for (const std::string& f : failed) {
            con.err << "  " << f << '\n';
        }
        return kThresholdFailed;
    }
    return kOk;
}

int cmd_generate(const Settings& s, const Console& con) {
    const Dataset ds = generate_cycliq(s.n_graphs, generation_seed(s), s.generator);
    save_dataset(ds, s.dataset_path);
    std::size_t cycles = 0;
    for (const Graph& g : ds.graphs) {
        cycles += g.label == static_cast<int>(GraphLabel::cycle) ? 1 : 0;
    }
    con.info("wrote " + std::to_string(ds.size()) + " graphs to " + s.dataset_path);
    con.info("classes: cycle " + std::to_string(cycles) + ", clique " + std::to_string(ds.size() - cycles));
    con.info("splits: train " + std::to_string(ds.indices(Split::train).size()) + ", test " +
             std::to_string(ds.indices(Split::test).size()));
    return kOk;
}

int cmd_train(const Settings& s, const Console& con) {
    const Dataset ds = load_checked(s, con);
    const TrainConfig cfg = train_config(s);
    try {
        validate(cfg);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const Stopwatch clock;
    const TrainResult result = train(ds, cfg);
    save_model(result.model, s.model_path);

    std::ostringstream csv;
    csv << "epoch,loss,train_accuracy,test_accuracy\n" << std::setprecision(10);
    for (const EpochStats& e : result.history) {
        csv << e.epoch << ',' << e.loss << ',' << e.train_accuracy << ',' << e.test_accuracy << '\n';
        con.debug("epoch " + std::to_string(e.epoch) + " loss " + fixed(e.loss, 6) + " train " +
                  fixed(e.train_accuracy) + " test " + fixed(e.test_accuracy));
    }
    const std::string metrics = s.metrics_path.empty() ? s.model_path + ".metrics.csv" : s.metrics_path;
    write_file_atomically(metrics, csv.str());

    const double train_acc = accuracy(result.model, ds, Split::train);
    const double test_acc = accuracy(result.model, ds, Split::test);
    con.info("trained " + std::to_string(cfg.epochs) + " epochs in " + fixed(clock.seconds(), 1) + "s (" +
             propagation_name(cfg.propagation) + " propagation)");
    con.info("train accuracy " + fixed(train_acc) + ", test accuracy " + fixed(test_acc));
    con.info("wrote " + s.model_path + " and " + metrics);
    if (test_acc < s.min_test_accuracy) {
        con.err << "test accuracy " << fixed(test_acc) << " is below the floor " << s.min_test_accuracy << '\n';
        return kThresholdFailed;
    }
    return kOk;
}

MethodSpec method_spec(const Settings& s) {
    try {
        return MethodSpec::parse(s.method, s.variant);
    } catch (const EvalError& e) {
        throw UsageError(e.what());
    }
}

int cmd_explain(const Settings& s, const Console& con) {
    const MethodSpec spec = method_spec(s);
    const EvalConfig cfg = eval_config(s);
    const Dataset ds = load_checked(s, con);
    const GcnModel model = load_checked_model(s, ds);
    Evaluator evaluator(ds, model, cfg);

    const fs::path dir = fs::path(s.output_dir) / spec.name();
    fs::create_directories(dir);
    auto write = [&](const ExplanationResult& r) {
        write_file_atomically(dir / ("graph_" + std::to_string(r.graph_id) + ".json"), explanation_to_json(r));
    };

    const Stopwatch clock;
    if (!s.graph_ids.empty()) {
        std::map<int, std::size_t> by_id;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            by_id.emplace(ds.graphs[i].id, i);
        }
        std::vector<std::size_t> indices;
        for (const int id : s.graph_ids) {
            const auto it = by_id.find(id);
            if (it == by_id.end()) {
                throw UsageError("graph id " + std::to_string(id) + " is not in " + s.dataset_path);
            }
            indices.push_back(it->second);
        }
        std::vector<ExplanationResult> results(indices.size());
        parallel_for(indices.size(), cfg.workers,
                     [&](std::size_t i) { results[i] = evaluator.explain(spec, indices[i]); });
        for (std::size_t i = 0; i < indices.size(); ++i) {
            write(results[i]);
            const Graph& g = ds.graphs[indices[i]];
            std::string line = "graph " + std::to_string(g.id) + ": wrote " +
                               (dir / ("graph_" + std::to_string(g.id) + ".json")).string();
            if (!g.ground_truth_edges.empty()) {
                line += ", accuracy " +
                        fixed(explanation_accuracy(results[i].edges, results[i].edge_importance,
                                                   g.ground_truth_edges));
            }
            con.info(line);
        }
        return kOk;
    }

    std::size_t done = 0;
    const std::size_t total = evaluator.targets().size();
    evaluator.on_result = [&](std::size_t, const ExplanationResult& r) {
        write(r);
        ++done;
        con.debug(spec.name() + ": graph " + std::to_string(r.graph_id) + " (" + std::to_string(done) + "/" +
                  std::to_string(total) + ")");
    };
    const MethodReport report = evaluator.run(spec);
    con.info(spec.name() + ": " + std::to_string(total) + " explanations in " + fixed(clock.seconds(), 1) + "s");
    const fs::path summary = dir / "summary";
    emit_report({report}, summary.string() + ".json", ReportFormat::json);
    emit_report({report}, summary.string() + ".csv", ReportFormat::csv);
    con.info(table({report}));
    con.info("wrote " + std::to_string(report.accuracies.size()) + " result files and " + summary.string() +
             ".json to " + dir.string());
    return kOk;
}

std::vector<MethodReport> run_methods(const std::vector<std::pair<MethodSpec, std::string>>& methods,
                                      const Settings& s, const Console& con) {
    const EvalConfig cfg = eval_config(s);
    const Dataset ds = load_checked(s, con);
    const GcnModel model = load_checked_model(s, ds);
    Evaluator evaluator(ds, model, cfg);
    con.info("evaluating " + std::to_string(evaluator.targets().size()) + " " + s.split + " graphs with " +
             std::to_string(cfg.workers) + " worker(s)");
    std::vector<MethodReport> reports;
    for (const auto& [spec, name] : methods) {
        const Stopwatch clock;
        MethodReport r = evaluator.run(spec);
        r.method = name;
        con.info("  " + name + ": avg " + fixed(r.average) + " (" + fixed(clock.seconds(), 1) + "s)");
        reports.push_back(std::move(r));
    }
    return reports;
}

int cmd_evaluate(const Settings& s, const Console& con) {
    std::vector<std::pair<MethodSpec, std::string>> methods;
    for (const std::string& m : s.methods) {
        try {
            const MethodSpec spec = MethodSpec::parse(m);
            methods.emplace_back(spec, spec.name());
        } catch (const EvalError& e) {
            throw UsageError(e.what());
        }
    }
    for (const std::string& t : s.thresholds) {
        parse_threshold(t);
    }
    return finish_report(run_methods(methods, s, con), s, "table1", con);
}

int cmd_ablate(const Settings& s, const Console& con) {
    std::vector<std::pair<MethodSpec, std::string>> methods;
    std::vector<LossVariant> variants(kAllVariants.begin(), kAllVariants.end());
    if (!s.variants.empty()) {
        variants.clear();
        for (const std::string& v : s.variants) {
            try {
                variants.push_back(parse_variant(v));
            } catch (const ExplainError& e) {
                throw UsageError(e.what());
            }
        }
    }
    for (const LossVariant v : variants) {
        methods.emplace_back(MethodSpec{MethodKind::coge, v}, std::string(variant_name(v)));
    }
    for (const std::string& t : s.thresholds) {
        parse_threshold(t);
    }
    return finish_report(run_methods(methods, s, con), s, "table2", con);
}

void add_seed(CLI::App* cmd, Settings& s, std::string& manifest) {
    cmd->add_option("--seed", s.seed, "Global seed; stage seeds are derived from it")->capture_default_str();
    cmd->add_option("--manifest", manifest, "JSON manifest; its values override flags")
        ->check(CLI::ExistingFile);
}

void add_explain_options(CLI::App* cmd, Settings& s) {
    cmd->add_option("--data", s.dataset_path, "Dataset (JSON lines)")->capture_default_str();
    cmd->add_option("--model", s.model_path, "Model checkpoint")->capture_default_str();
    cmd->add_option("--out-dir", s.output_dir, "Output directory")->capture_default_str();
    cmd->add_option("--split", s.split, "Split to explain")
        ->check(CLI::IsMember({"train", "test"}))
        ->capture_default_str();
    cmd->add_option_function<std::size_t>(
        "--limit", [&s](std::size_t n) { s.limit = n; }, "Only the first N graphs of the split");
    cmd->add_option("--workers", s.workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--k", s.explain.k, "Contrast graphs per label")->capture_default_str();
    cmd->add_option("--steps", s.explain.steps, "Adam steps per explanation")->capture_default_str();
    cmd->add_option("--lr", s.explain.learning_rate, "Adam learning rate")->capture_default_str();
    cmd->add_option("--sign", s.sign, "Sign convention of the contrast terms")
        ->check(CLI::IsMember({"equation", "prose"}))
        ->capture_default_str();
    cmd->add_option("--distance", s.distance, "Set distance")
        ->check(CLI::IsMember({"debiased", "entropic"}))
        ->capture_default_str();
    cmd->add_option("--relative-epsilon", s.explain.relative_epsilon, "eps = value * mean(C)")
        ->capture_default_str();
    cmd->add_option("--tolerance", s.explain.tolerance, "Sinkhorn marginal tolerance")->capture_default_str();
    cmd->add_option("--max-iterations", s.explain.max_iterations, "Sinkhorn iteration cap")
        ->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    const Console con{out, err, verbosity_from_env()};
    Settings s;
    s.workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::string manifest;

    CLI::App app{"Contrastive GNN explanations (CoGE) on the CYCLIQ benchmark"};
    app.require_subcommand(1);
    app.footer("Environment: COGE_VERBOSITY=0|1|2 (quiet, progress, debug)");

    CLI::App* generate = app.add_subcommand("generate", "Generate the CYCLIQ dataset");
    add_seed(generate, s, manifest);
    generate->add_option("--n", s.n_graphs, "Number of graphs (even)")->capture_default_str();
    generate->add_option("--out", s.dataset_path, "Output dataset file")->capture_default_str();
    generate->add_option("--tree-min", s.generator.tree_min_nodes, "Smallest tree")->capture_default_str();
    generate->add_option("--tree-max", s.generator.tree_max_nodes, "Largest tree")->capture_default_str();
    generate->add_option("--motifs-min", s.generator.motifs_min, "Fewest motifs per graph")->capture_default_str();
    generate->add_option("--motifs-max", s.generator.motifs_max, "Most motifs per graph")->capture_default_str();
    generate->add_option("--cycle-min", s.generator.cycle_min, "Shortest cycle (>= 4)")->capture_default_str();
    generate->add_option("--cycle-max", s.generator.cycle_max, "Longest cycle")->capture_default_str();
    generate->add_option("--clique-min", s.generator.clique_min, "Smallest clique (>= 4)")->capture_default_str();
    generate->add_option("--clique-max", s.generator.clique_max, "Largest clique")->capture_default_str();
    generate->add_option("--feature-dim", s.generator.feature_dim, "Node feature width")->capture_default_str();
    generate->add_option("--train-fraction", s.generator.train_fraction, "Share of graphs in the train split")
        ->capture_default_str();

    CLI::App* train_cmd = app.add_subcommand("train", "Train the GCN classifier");
    add_seed(train_cmd, s, manifest);
    train_cmd->add_option("--data", s.dataset_path, "Dataset (JSON lines)")->capture_default_str();
    train_cmd->add_option("--out", s.model_path, "Output checkpoint")->capture_default_str();
    train_cmd->add_option("--metrics", s.metrics_path, "Per-epoch metrics CSV [<out>.metrics.csv]");
    train_cmd->add_option("--epochs", s.train.epochs, "Training epochs")->capture_default_str();
    train_cmd->add_option("--batch-size", s.train.batch_size, "Minibatch size")->capture_default_str();
    train_cmd->add_option("--lr", s.train.learning_rate, "Adam learning rate")->capture_default_str();
    train_cmd->add_option("--hidden", s.train.hidden_dim, "Embedding width")->capture_default_str();
    train_cmd->add_option("--layers", s.train.num_layers, "Graph convolution layers")->capture_default_str();
    train_cmd->add_option("--propagation", s.propagation, "Propagation matrix")
        ->check(CLI::IsMember({"degree_scaled", "symmetric"}))
        ->capture_default_str();
    train_cmd->add_option("--min-accuracy", s.min_test_accuracy, "Exit nonzero below this test accuracy")
        ->capture_default_str();

    CLI::App* explain = app.add_subcommand("explain", "Explain graphs and write one JSON file per graph");
    add_seed(explain, s, manifest);
    add_explain_options(explain, s);
    explain->add_option("--method", s.method, "Explanation method")
        ->check(CLI::IsMember({"coge", "random", "occlusion", "sensitivity"}))
        ->capture_default_str();
    explain->add_option("--variant", s.variant, "Loss variant for coge (e.g. diff, full_average)");
    explain->add_option("--graph-id", s.graph_ids, "Explain only these graph ids");

    CLI::App* evaluate = app.add_subcommand("evaluate", "Explanation accuracy of the four methods");
    add_seed(evaluate, s, manifest);
    add_explain_options(evaluate, s);
    evaluate->add_option("--methods", s.methods, "Methods to evaluate")->capture_default_str();
    evaluate->add_option("--threshold", s.thresholds, "Check, e.g. coge.clique_mean>=0.9");

    CLI::App* ablate = app.add_subcommand("ablate", "Explanation accuracy of the seven loss variants");
    add_seed(ablate, s, manifest);
    add_explain_options(ablate, s);
    ablate->add_option("--variants", s.variants, "Variants to run [all]");
    ablate->add_option("--threshold", s.thresholds, "Check, e.g. diff.clique_mean>=0.9");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kUsage;
    }

    try {
        if (!manifest.empty()) {
            apply_manifest_file(manifest, s);
        }
        if (generate->parsed()) {
            return cmd_generate(s, con);
        }
        if (train_cmd->parsed()) {
            return cmd_train(s, con);
        }
        if (explain->parsed()) {
            return cmd_explain(s, con);
        }
        if (evaluate->parsed()) {
            return cmd_evaluate(s, con);
        }
        return cmd_ablate(s, con);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const ConfigError& e) {
        err << "invalid generator configuration: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
}

}  // namespace coge::cli
