#include "coge/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "coge/parallel.hpp"

namespace coge {
namespace {

struct VariantInfo {
    LossVariant variant;
    std::string_view name;
    std::string_view label;
};

constexpr std::array<VariantInfo, 7> kVariantInfo = {{
    {LossVariant::neg_same, "neg_same", "-L_same"},
    {LossVariant::neg_same_plus_self, "neg_same_plus_self", "-L_same + L_self"},
    {LossVariant::diff, "diff", "L_diff"},
    {LossVariant::diff_plus_self, "diff_plus_self", "L_diff + L_self"},
    {LossVariant::diff_minus_same, "diff_minus_same", "L_diff - L_same"},
    {LossVariant::full_average, "full_average", "L and Average"},
    {LossVariant::full_ot, "full_ot", "L and OT"},
}};

const VariantInfo& info(LossVariant v) {
    for (const auto& i : kVariantInfo) {
        if (i.variant == v) {
            return i;
        }
    }
    throw ExplainError("unknown loss variant");
}

Vector uniform_weights(Eigen::Index n) { return Vector::Constant(n, 1.0 / static_cast<double>(n)); }

}  // namespace

std::string_view variant_name(LossVariant v) { return info(v).name; }
std::string_view variant_label(LossVariant v) { return info(v).label; }

LossVariant parse_variant(std::string_view name) {
    for (const auto& i : kVariantInfo) {
        if (i.name == name || i.label == name) {
            return i.variant;
        }
    }
    throw ExplainError("unknown loss variant '" + std::string(name) + "'");
}

LossWeights loss_weights(LossVariant variant, SignConvention sign) {
    LossWeights w;
    switch (variant) {
    case LossVariant::neg_same:
        w.same = -1.0;
        break;
    case LossVariant::neg_same_plus_self:
        w.same = -1.0;
        w.self = 1.0;
        break;
    case LossVariant::diff:
        w.diff = 1.0;
        break;
    case LossVariant::diff_plus_self:
        w.diff = 1.0;
        w.self = 1.0;
        break;
    case LossVariant::diff_minus_same:
        w.diff = 1.0;
        w.same = -1.0;
        break;
    case LossVariant::full_average:
        w = {1.0, -1.0, 1.0, true};
        break;
    case LossVariant::full_ot:
        w = {1.0, -1.0, 1.0, false};
        break;
    }
    if (sign == SignConvention::prose) {
        w.diff = -w.diff;
        w.same = -w.same;
    }
    return w;
}

DivergenceOptions divergence_options(const ExplainConfig& cfg) {
    DivergenceOptions opt;
    opt.kind = cfg.distance;
    opt.relative_epsilon = cfg.relative_epsilon;
    opt.sinkhorn.tolerance = cfg.tolerance;
    opt.sinkhorn.max_iterations = cfg.max_iterations;
    return opt;
}

Corpus embed_corpus(const GcnModel& model, const Dataset& ds, int workers) {
    Corpus corpus;
    corpus.embeddings.resize(ds.size());
    corpus.labels.resize(ds.size());
    corpus.train = ds.indices(Split::train);
    parallel_for(ds.size(), workers, [&](std::size_t i) {
        corpus.embeddings[i] = forward(model, ds.graphs[i]).embeddings;
        corpus.labels[i] = ds.graphs[i].label;
    });
    return corpus;
}

double uniform_distance(const Matrix& za, const Matrix& zb, const ExplainConfig& cfg) {
    DivergenceOptions opt = divergence_options(cfg);
    opt.sinkhorn.tolerance = cfg.selection_tolerance;
    WeightedDistance d(za, zb, uniform_weights(zb.rows()), opt);
    return d.evaluate(uniform_weights(za.rows())).value;
}

Matrix pairwise_train_distances(const Corpus& corpus, const ExplainConfig& cfg, int workers) {
    const std::size_t n = corpus.train.size();
    Matrix d = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    parallel_for(n, workers, [&](std::size_t i) {
        const Matrix& zi = corpus.embeddings[corpus.train[i]].z;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = uniform_distance(zi, corpus.embeddings[corpus.train[j]].z, cfg);
            d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }
    });
    return d;
}

ContrastSets select_contrast_sets(const Matrix& z, int label, std::optional<std::size_t> exclude_index,
                                  const Dataset& ds, const Corpus& corpus, int k,
                                  const ExplainConfig& cfg, const Vector* distances) {
    if (k < 1) {
        throw ExplainError("contrast set size k must be positive");
    }
    struct Candidate {
        double distance;
        int id;
        std::size_t index;
    };
    std::vector<Candidate> same, diff;
    for (std::size_t t = 0; t < corpus.train.size(); ++t) {
        const std::size_t idx = corpus.train[t];
        if (exclude_index && idx == *exclude_index) {
            continue;
        }
        const double dist = distances ? (*distances)[static_cast<Eigen::Index>(t)]
                                      : uniform_distance(z, corpus.embeddings[idx].z, cfg);
        Candidate c{dist, ds.graphs[idx].id, idx};
        (corpus.labels[idx] == label ? same : diff).push_back(c);
    }
    if (same.empty() || diff.empty()) {
        throw ExplainError("contrast pool is empty for the " +
                           std::string(same.empty() ? "same" : "different") + "-label side");
    }
    auto pick = [k](std::vector<Candidate>& pool, std::vector<int>& ids, std::vector<double>& dists,
                    std::vector<std::size_t>& indices) {
        std::sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
            return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
        });
        const std::size_t take = std::min(pool.size(), static_cast<std::size_t>(k));
        for (std::size_t i = 0; i < take; ++i) {
            ids.push_back(pool[i].id);
            dists.push_back(pool[i].distance);
            indices.push_back(pool[i].index);
        }
    };
    ContrastSets sets;
    pick(same, sets.same_label, sets.same_distances, sets.same_index);
    pick(diff, sets.diff_label, sets.diff_distances, sets.diff_index);
    return sets;
}

namespace {

std::optional<std::size_t> find_index(const Dataset& ds, const Graph& g) {
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.graphs[i].id == g.id) {
            return i;
        }
    }
    return std::nullopt;
}

}  // namespace

ContrastSets select_contrast_sets(const Graph& g, const GcnModel& model, const Dataset& ds, int k,
                                  const ExplainConfig& cfg) {
    const Corpus corpus = embed_corpus(model, ds);
    const Matrix z = forward(model, g).embeddings.z;
    return select_contrast_sets(z, g.label, find_index(ds, g), ds, corpus, k, cfg);
}

struct CogeObjective::Impl {
    LossWeights weights;
    Matrix z;
    std::vector<WeightedDistance> same_ot, diff_ot, self_ot;
    std::vector<RowVector> same_means, diff_means;
    RowVector self_mean;
};

CogeObjective::CogeObjective(const Matrix& z, const std::vector<Matrix>& same,
                             const std::vector<Matrix>& diff, const ExplainConfig& cfg)
    : impl_(std::make_unique<Impl>()) {
    Impl& s = *impl_;
    s.weights = loss_weights(cfg.variant, cfg.sign);
    s.z = z;
    const DivergenceOptions opt = divergence_options(cfg);
    auto prepare = [&](double coef, const std::vector<Matrix>& targets,
                       std::vector<WeightedDistance>& ot, std::vector<RowVector>& means) {
        if (coef == 0.0) {
            return;
        }
        for (const Matrix& t : targets) {
            if (t.cols() != z.cols()) {
                throw ExplainError("contrast embedding width differs from the explained graph");
            }
            if (s.weights.average_distance) {
                means.push_back(t.colwise().mean());
            } else {
                ot.emplace_back(z, t, uniform_weights(t.rows()), opt);
            }
        }
    };
    prepare(s.weights.diff, diff, s.diff_ot, s.diff_means);
    prepare(s.weights.same, same, s.same_ot, s.same_means);
    if (s.weights.self != 0.0) {
        if (s.weights.average_distance) {
            s.self_mean = z.colwise().mean();
        } else {
            s.self_ot.emplace_back(z, z, uniform_weights(z.rows()), opt);
        }
    }
}

CogeObjective::~CogeObjective() = default;
CogeObjective::CogeObjective(CogeObjective&&) noexcept = default;
CogeObjective& CogeObjective::operator=(CogeObjective&&) noexcept = default;

LossResult CogeObjective::evaluate(const Vector& w) {
    Impl& s = *impl_;
    if (w.size() != s.z.rows()) {
        throw ExplainError("weight vector length does not match node count");
    }
    LossResult out;
    out.grad_w = Vector::Zero(w.size());

    const RowVector weighted_mean = w.transpose() * s.z;
    auto average_term = [&](const RowVector& target, Vector& grad) {
        const RowVector delta = weighted_mean - target;
        const double d = delta.norm();
        if (d > 0.0) {
            grad += (s.z * delta.transpose()) / d;
        }
        return d;
    };
    auto ot_term = [&](WeightedDistance& dist, Vector& grad) {
        const DivergenceResult r = dist.evaluate(w);
        ++out.subproblems;
        out.unconverged += r.converged ? 0 : 1;
        grad += r.gradient;
        return r.value;
    };
    auto group = [&](std::vector<WeightedDistance>& ot, const std::vector<RowVector>& means,
                     double coef) {
        const std::size_t count = s.weights.average_distance ? means.size() : ot.size();
        if (count == 0) {
            return 0.0;
        }
        // Summed per group first so that equal groups with opposite
        // coefficients cancel exactly.
        Vector grad = Vector::Zero(w.size());
        double total = 0.0;
        if (s.weights.average_distance) {
            for (const RowVector& m : means) {
                total += average_term(m, grad);
            }
        } else {
            for (WeightedDistance& d : ot) {
                total += ot_term(d, grad);
            }
        }
        out.grad_w += (coef / static_cast<double>(count)) * grad;
        return total / static_cast<double>(count);
    };

    out.diff_term = group(s.diff_ot, s.diff_means, s.weights.diff);
    out.same_term = group(s.same_ot, s.same_means, s.weights.same);
    if (s.weights.self != 0.0) {
        Vector grad = Vector::Zero(w.size());
        out.self_term = s.weights.average_distance ? average_term(s.self_mean, grad)
                                                   : ot_term(s.self_ot.front(), grad);
        out.grad_w += s.weights.self * grad;
    }
    out.value = s.weights.diff * out.diff_term + s.weights.same * out.same_term +
                s.weights.self * out.self_term;
    out.grad_logits = w.cwiseProduct(out.grad_w - Vector::Constant(w.size(), w.dot(out.grad_w)));
    return out;
}

LossResult coge_loss(const Vector& w, const Matrix& z, const std::vector<Matrix>& same,
                     const std::vector<Matrix>& diff, const ExplainConfig& cfg) {
    CogeObjective objective(z, same, diff, cfg);
    return objective.evaluate(w);
}

std::vector<double> edge_scores_from_nodes(const Graph& g, const Vector& node_importance) {
    std::vector<double> scores;
    scores.reserve(g.edges.size());
    for (const Edge& e : g.edges) {
        scores.push_back(node_importance[e.u] + node_importance[e.v]);
    }
    return scores;
}

ExplanationResult explain_coge(const Graph& g, const Matrix& z, const ContrastSets& sets,
                               const Corpus& corpus, const ExplainConfig& cfg) {
    if (z.rows() != g.num_nodes) {
        throw ExplainError("embedding rows do not match node count");
    }
    const Eigen::Index n = z.rows();
    Vector theta = Vector::Zero(n);
    ExplanationResult result;
    result.graph_id = g.id;
    result.method = cfg.variant == LossVariant::full_ot ? "coge" : std::string(variant_name(cfg.variant));
    result.config = cfg;
    result.edges = g.edges;

    if (cfg.steps > 0) {
        std::vector<Matrix> same, diff;
        for (const std::size_t i : sets.same_index) {
            same.push_back(corpus.embeddings[i].z);
        }
        for (const std::size_t i : sets.diff_index) {
            diff.push_back(corpus.embeddings[i].z);
        }
        CogeObjective objective(z, same, diff, cfg);
        Vector m = Vector::Zero(n);
        Vector v = Vector::Zero(n);
        result.loss_trace.reserve(static_cast<std::size_t>(cfg.steps));
        for (int step = 1; step <= cfg.steps; ++step) {
            const LossResult loss = objective.evaluate(softmax(theta));
            if (loss.subproblems > 0 && loss.unconverged == loss.subproblems) {
                throw ExplainError("graph " + std::to_string(g.id) + ": all " +
                                   std::to_string(loss.subproblems) +
                                   " transport sub-problems failed to converge at step " +
                                   std::to_string(step));
            }
            if (!std::isfinite(loss.value) || !loss.grad_logits.allFinite()) {
                throw ExplainError("graph " + std::to_string(g.id) + ": non-finite loss at step " +
                                   std::to_string(step));
            }
            result.loss_trace.push_back(loss.value);
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * loss.grad_logits;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * loss.grad_logits.cwiseAbs2();
            const double c1 = 1.0 - std::pow(cfg.beta1, step);
            const double c2 = 1.0 - std::pow(cfg.beta2, step);
            theta.array() -= cfg.learning_rate * (m.array() / c1) /
                             ((v.array() / c2).sqrt() + cfg.adam_epsilon);
        }
    }
    result.w = softmax(theta);
    result.node_importance = (Vector::Constant(n, 1.0 / static_cast<double>(n)) - result.w);
    result.edge_importance = edge_scores_from_nodes(g, result.node_importance);
    return result;
}

ExplanationResult explain_coge(const Graph& g, const GcnModel& model, const Dataset& ds,
                               const ExplainConfig& cfg) {
    const Corpus corpus = embed_corpus(model, ds);
    const Matrix z = forward(model, g).embeddings.z;
    if (cfg.steps == 0) {
        return explain_coge(g, z, ContrastSets{}, corpus, cfg);
    }
    const ContrastSets sets = select_contrast_sets(z, g.label, find_index(ds, g), ds, corpus, cfg.k, cfg);
    return explain_coge(g, z, sets, corpus, cfg);
}

ExplanationResult ablation_variant(const Graph& g, const GcnModel& model, const Dataset& ds,
                                   ExplainConfig cfg, LossVariant variant) {
    cfg.variant = variant;
    return explain_coge(g, model, ds, cfg);
}

std::string config_to_json(const ExplainConfig& cfg) {
    const nlohmann::json j = {
        {"k", cfg.k},
        {"steps", cfg.steps},
        {"learning_rate", cfg.learning_rate},
        {"beta1", cfg.beta1},
        {"beta2", cfg.beta2},
        {"adam_epsilon", cfg.adam_epsilon},
        {"variant", std::string(variant_name(cfg.variant))},
        {"sign", cfg.sign == SignConvention::equation ? "equation" : "prose"},
        {"distance", cfg.distance == DistanceKind::debiased ? "debiased" : "entropic"},
        {"relative_epsilon", cfg.relative_epsilon},
        {"tolerance", cfg.tolerance},
        {"max_iterations", cfg.max_iterations},
        {"selection_tolerance", cfg.selection_tolerance},
    };
    return j.dump();
}

std::string explanation_to_json(const ExplanationResult& r) {
    using nlohmann::json;
    auto vec = [](const Vector& v) {
        return std::vector<double>(v.data(), v.data() + v.size());
    };
    json edges = json::array();
    for (std::size_t i = 0; i < r.edges.size(); ++i) {
        edges.push_back({r.edges[i].u, r.edges[i].v, r.edge_importance[i]});
    }
    const json j = {
        {"graph_id", r.graph_id},
        {"method", r.method},
        {"w", vec(r.w)},
        {"node_importance", vec(r.node_importance)},
        {"edge_importance", std::move(edges)},
        {"loss_trace", r.loss_trace},
        {"config", json::parse(config_to_json(r.config))},
    };
    return j.dump();
}

}  // namespace coge
