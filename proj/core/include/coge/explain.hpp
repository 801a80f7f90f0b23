#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "coge/gcn.hpp"
#include "coge/graph.hpp"
#include "coge/ot.hpp"

namespace coge {

class ExplainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Loss-term subsets and distance choices of the contrastive objective.
///   L_diff : mean distance to the k nearest different-label graphs
///   L_same : mean distance to the k nearest same-label graphs
///   L_self : distance of the weighted graph to its uniformly weighted self
enum class LossVariant {
    neg_same,            // -L_same
    neg_same_plus_self,  // -L_same + L_self
    diff,                // L_diff
    diff_plus_self,      // L_diff + L_self
    diff_minus_same,     // L_diff - L_same
    full_average,        // L_diff - L_same + L_self, distance between weighted mean embeddings
    full_ot,             // L_diff - L_same + L_self, weighted OT distance
};

inline constexpr std::array<LossVariant, 7> kAllVariants = {
    LossVariant::neg_same,       LossVariant::neg_same_plus_self, LossVariant::diff,
    LossVariant::diff_plus_self, LossVariant::diff_minus_same,    LossVariant::full_average,
    LossVariant::full_ot,
};

/// Short identifier, e.g. "diff_minus_same".
std::string_view variant_name(LossVariant v);
/// Table-style label, e.g. "L_diff - L_same" or "L and Average".
std::string_view variant_label(LossVariant v);
/// Accepts identifiers and labels. Throws ExplainError otherwise.
LossVariant parse_variant(std::string_view name);

/// `equation`: minimize L_diff - L_same + L_self. `prose` flips the signs of
/// the two contrast terms (pull towards same-label graphs, push away from
/// different-label graphs).
enum class SignConvention { equation, prose };

struct ExplainConfig {
    int k = 10;
    int steps = 200;
    double learning_rate = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    LossVariant variant = LossVariant::full_ot;
    SignConvention sign = SignConvention::equation;
    DistanceKind distance = DistanceKind::debiased;
    double relative_epsilon = 0.05;
    double tolerance = 1e-9;
    int max_iterations = 1000;
    // Contrast selection only needs a ranking, so it may use a looser solve.
    double selection_tolerance = 1e-6;
};

DivergenceOptions divergence_options(const ExplainConfig& cfg);

/// Coefficients of the three loss terms for a variant and sign convention.
struct LossWeights {
    double diff = 0.0;
    double same = 0.0;
    double self = 0.0;
    bool average_distance = false;
};
LossWeights loss_weights(LossVariant variant, SignConvention sign);

/// Final embeddings of every dataset graph under one model, computed once
/// and shared read-only.
struct Corpus {
    std::vector<EmbeddingSet> embeddings;  // parallel to Dataset::graphs
    std::vector<int> labels;
    std::vector<std::size_t> train;  // dataset indices of the training split
};

Corpus embed_corpus(const GcnModel& model, const Dataset& ds, int workers = 1);

/// Uniform-weight distance between two embedding sets (the ranking distance
/// used to pick contrast graphs).
double uniform_distance(const Matrix& za, const Matrix& zb, const ExplainConfig& cfg);

/// Symmetric matrix of uniform_distance over the training split, indexed by
/// position in corpus.train.
Matrix pairwise_train_distances(const Corpus& corpus, const ExplainConfig& cfg, int workers = 1);

struct ContrastSets {
    std::vector<int> same_label;  // graph ids, nearest first
    std::vector<int> diff_label;
    std::vector<double> same_distances;
    std::vector<double> diff_distances;
    // Dataset indices matching the id lists.
    std::vector<std::size_t> same_index;
    std::vector<std::size_t> diff_index;
};

/// k nearest training graphs of each label under uniform_distance, excluding
/// `exclude_index` itself. Ties broken by ascending graph id. `distances`,
/// when given, is the row of pairwise_train_distances for the graph.
ContrastSets select_contrast_sets(const Matrix& z, int label, std::optional<std::size_t> exclude_index,
                                  const Dataset& ds, const Corpus& corpus, int k,
                                  const ExplainConfig& cfg, const Vector* distances = nullptr);

ContrastSets select_contrast_sets(const Graph& g, const GcnModel& model, const Dataset& ds, int k,
                                  const ExplainConfig& cfg = {});

struct LossResult {
    double value = 0.0;
    double diff_term = 0.0;
    double same_term = 0.0;
    double self_term = 0.0;
    Vector grad_w;
    Vector grad_logits;  // through w = softmax(logits)
    int subproblems = 0;
    int unconverged = 0;
};

/// The contrastive objective as a function of node weights on one graph.
/// Keeps warm-start state between evaluations.
class CogeObjective {
public:
    CogeObjective(const Matrix& z, const std::vector<Matrix>& same, const std::vector<Matrix>& diff,
                  const ExplainConfig& cfg);
    ~CogeObjective();
    CogeObjective(CogeObjective&&) noexcept;
    CogeObjective& operator=(CogeObjective&&) noexcept;

    /// Requires w on the simplex.
    LossResult evaluate(const Vector& w);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Single evaluation of the objective at w.
LossResult coge_loss(const Vector& w, const Matrix& z, const std::vector<Matrix>& same,
                     const std::vector<Matrix>& diff, const ExplainConfig& cfg);

/// Weights and importances of one explanation. Baselines that score edges
/// directly leave `w` and `node_importance` empty.
struct ExplanationResult {
    int graph_id = 0;
    std::string method;
    Vector w;
    Vector node_importance;
    std::vector<Edge> edges;
    std::vector<double> edge_importance;  // parallel to edges
    std::vector<double> loss_trace;
    ExplainConfig config;
};

/// s_u + s_v for every edge.
std::vector<double> edge_scores_from_nodes(const Graph& g, const Vector& node_importance);

/// Adam over logits theta (w = softmax(theta)), starting from uniform w.
/// Node importance is 1/n - w_i.
ExplanationResult explain_coge(const Graph& g, const Matrix& z, const ContrastSets& sets,
                               const Corpus& corpus, const ExplainConfig& cfg);

ExplanationResult explain_coge(const Graph& g, const GcnModel& model, const Dataset& ds,
                               const ExplainConfig& cfg = {});

/// Same loop with the loss terms of `variant`.
ExplanationResult ablation_variant(const Graph& g, const GcnModel& model, const Dataset& ds,
                                   ExplainConfig cfg, LossVariant variant);

ExplanationResult explain_random(const Graph& g, std::uint64_t seed);
ExplanationResult explain_occlusion(const Graph& g, const GcnModel& model);
ExplanationResult explain_sensitivity(const Graph& g, const GcnModel& model);

/// {"graph_id", "method", "w", "node_importance", "edge_importance": [[u,v,score],...],
///  "loss_trace", "config"}
std::string explanation_to_json(const ExplanationResult& r);

std::string config_to_json(const ExplainConfig& cfg);

}  // namespace coge
