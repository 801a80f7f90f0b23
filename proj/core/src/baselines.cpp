#include <cmath>

#include "coge/explain.hpp"
#include "coge/rng.hpp"

namespace coge {
namespace {

ExplanationResult from_node_scores(const Graph& g, std::string method, Vector node_importance) {
    ExplanationResult r;
    r.graph_id = g.id;
    r.method = std::move(method);
    r.edges = g.edges;
    r.edge_importance = edge_scores_from_nodes(g, node_importance);
    r.node_importance = std::move(node_importance);
    return r;
}

int argmax(const Vector& v) {
    Eigen::Index best = 0;
    v.maxCoeff(&best);
    return static_cast<int>(best);
}

}  // namespace

ExplanationResult explain_random(const Graph& g, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "random-baseline", static_cast<std::uint64_t>(g.id)));
    ExplanationResult r;
    r.graph_id = g.id;
    r.method = "random";
    r.edges = g.edges;
    r.edge_importance.reserve(g.edges.size());
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        r.edge_importance.push_back(rng.uniform_real());
    }
    return r;
}

// Occluding a node isolates it instead of deleting it, so node count and
// pooling normalisation stay fixed. The occluded graph is disconnected, i.e.
// off the training distribution; that is inherent to this baseline.
ExplanationResult explain_occlusion(const Graph& g, const GcnModel& model) {
    const Vector base = softmax(forward(model, g).logits);
    const int predicted = argmax(base);
    Vector importance(g.num_nodes);
    for (int i = 0; i < g.num_nodes; ++i) {
        const Vector p = softmax(forward(model, isolate_node(g, i)).logits);
        importance[i] = base[predicted] - p[predicted];
    }
    return from_node_scores(g, "occlusion", std::move(importance));
}

ExplanationResult explain_sensitivity(const Graph& g, const GcnModel& model) {
    const int predicted = argmax(forward(model, g).logits);
    const Matrix grad = input_gradient(model, g, predicted);
    return from_node_scores(g, "sensitivity", grad.rowwise().norm());
}

}  // namespace coge
