#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "coge/explain.hpp"

namespace coge {

class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Fraction of ground-truth edges among the x = |ground_truth| highest scored
/// edges. Ties are broken by ascending edge index. Only the ranking of
/// `scores` matters. Throws EvalError on empty ground truth or size mismatch.
double explanation_accuracy(const std::vector<Edge>& edges, std::span<const double> scores,
                            const std::vector<Edge>& ground_truth);

enum class MethodKind { coge, random, occlusion, sensitivity };

struct MethodSpec {
    MethodKind kind = MethodKind::coge;
    LossVariant variant = LossVariant::full_ot;  // coge only

    /// "random", "occlusion", "sensitivity", "coge" for the full loss, or
    /// the variant identifier for ablations.
    std::string name() const;
    static MethodSpec parse(const std::string& method, const std::string& variant = "");
};

struct ClassStats {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
    int count = 0;
};

struct MethodReport {
    std::string method;
    std::vector<int> graph_ids;
    std::vector<int> labels;
    std::vector<double> accuracies;
    ClassStats cycle;
    ClassStats clique;
    double average = 0.0;  // mean of the two class means
    int failures = 0;
    std::vector<std::string> failure_messages;
};

/// Fills the class statistics and average from the per-graph vectors.
void summarize(MethodReport& report);

struct EvalConfig {
    Split split = Split::train;
    int workers = 1;
    std::uint64_t seed = 0;  // random baseline
    ExplainConfig explain{};
    double max_failure_fraction = 0.01;
    // Evaluate only the first `limit` graphs of the split when set.
    std::optional<std::size_t> limit;
};

/// Runs explanation methods over one dataset split with a shared model.
/// Corpus embeddings and contrast sets are computed once and reused by every
/// contrastive method. Per-graph work runs on cfg.workers threads; results
/// are reduced in dataset order.
class Evaluator {
public:
    Evaluator(const Dataset& ds, const GcnModel& model, EvalConfig cfg);
    ~Evaluator();

    /// Throws EvalError when more than max_failure_fraction of graphs fail.
    MethodReport run(const MethodSpec& method);

    /// Explanation of dataset graph `index` (any split).
    ExplanationResult explain(const MethodSpec& method, std::size_t index);

    /// Dataset indices this evaluator iterates over.
    const std::vector<std::size_t>& targets() const { return targets_; }

    const Corpus& corpus();

    /// Optional hook called after each explanation of run().
    std::function<void(std::size_t index, const ExplanationResult&)> on_result;

private:
    const ContrastSets& contrast_sets(std::size_t index);

    const Dataset& ds_;
    const GcnModel& model_;
    EvalConfig cfg_;
    std::vector<std::size_t> targets_;
    struct Cache;
    std::unique_ptr<Cache> cache_;
};

MethodReport evaluate_method(const MethodSpec& method, const Dataset& ds, const GcnModel& model,
                             const EvalConfig& cfg);

enum class ReportFormat { csv, json };

/// CSV columns: method,cycle_mean,cycle_std,clique_mean,clique_std,avg
std::string reports_to_csv(const std::vector<MethodReport>& reports);
std::string reports_to_json(const std::vector<MethodReport>& reports);
std::vector<MethodReport> reports_from_json(const std::string& text);

void emit_report(const std::vector<MethodReport>& reports, const std::filesystem::path& path,
                 ReportFormat format);

}  // namespace coge
