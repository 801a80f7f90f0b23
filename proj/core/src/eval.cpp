#include "coge/eval.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <set>

#include "coge/parallel.hpp"

namespace coge {

double explanation_accuracy(const std::vector<Edge>& edges, std::span<const double> scores,
                            const std::vector<Edge>& ground_truth) {
    if (ground_truth.empty()) {
        throw EvalError("explanation accuracy is undefined without ground-truth edges");
    }
    if (scores.size() != edges.size()) {
        throw EvalError("edge score count does not match edge count");
    }
    std::vector<std::size_t> order(edges.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    const std::set<Edge> truth(ground_truth.begin(), ground_truth.end());
    const std::size_t x = truth.size();
    std::size_t hits = 0;
    for (std::size_t r = 0; r < std::min(x, order.size()); ++r) {
        hits += truth.contains(edges[order[r]]) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(x);
}

std::string MethodSpec::name() const {
    switch (kind) {
    case MethodKind::random:
        return "random";
    case MethodKind::occlusion:
        return "occlusion";
    case MethodKind::sensitivity:
        return "sensitivity";
    case MethodKind::coge:
        break;
    }
    return variant == LossVariant::full_ot ? "coge" : std::string(variant_name(variant));
}

MethodSpec MethodSpec::parse(const std::string& method, const std::string& variant) {
    MethodSpec spec;
    if (method == "random") {
        spec.kind = MethodKind::random;
    } else if (method == "occlusion") {
        spec.kind = MethodKind::occlusion;
    } else if (method == "sensitivity") {
        spec.kind = MethodKind::sensitivity;
    } else if (method == "coge") {
        spec.kind = MethodKind::coge;
    } else {
        throw EvalError("unknown method '" + method + "' (expected coge, random, occlusion or sensitivity)");
    }
    if (!variant.empty()) {
        if (spec.kind != MethodKind::coge) {
            throw EvalError("--variant only applies to the coge method");
        }
        try {
            spec.variant = parse_variant(variant);
        } catch (const ExplainError& e) {
            throw EvalError(e.what());
        }
    }
    return spec;
}

void summarize(MethodReport& report) {
    auto stats = [&](int label) {
        ClassStats s;
        double sum = 0.0;
        for (std::size_t i = 0; i < report.accuracies.size(); ++i) {
            if (report.labels[i] == label) {
                sum += report.accuracies[i];
                ++s.count;
            }
        }
        if (s.count == 0) {
            return s;
        }
        s.mean = sum / s.count;
        double var = 0.0;
        for (std::size_t i = 0; i < report.accuracies.size(); ++i) {
            if (report.labels[i] == label) {
                var += (report.accuracies[i] - s.mean) * (report.accuracies[i] - s.mean);
            }
        }
        s.std = std::sqrt(var / s.count);
        return s;
    };
    report.cycle = stats(static_cast<int>(GraphLabel::cycle));
    report.clique = stats(static_cast<int>(GraphLabel::clique));
    report.average = 0.5 * (report.cycle.mean + report.clique.mean);
}

struct Evaluator::Cache {
    std::once_flag corpus_once;
    Corpus corpus;
    std::vector<std::optional<ContrastSets>> sets;  // parallel to targets_
    std::vector<std::ptrdiff_t> train_position;     // dataset index -> position in corpus.train
    std::mutex mutex;
};

Evaluator::Evaluator(const Dataset& ds, const GcnModel& model, EvalConfig cfg)
    : ds_(ds), model_(model), cfg_(std::move(cfg)), cache_(std::make_unique<Cache>()) {
    targets_ = ds_.indices(cfg_.split);
    if (cfg_.limit && *cfg_.limit < targets_.size()) {
        targets_.resize(*cfg_.limit);
    }
    cache_->sets.resize(targets_.size());
}

Evaluator::~Evaluator() = default;

const Corpus& Evaluator::corpus() {
    std::call_once(cache_->corpus_once, [this] {
        cache_->corpus = embed_corpus(model_, ds_, cfg_.workers);
        cache_->train_position.assign(ds_.size(), -1);
        for (std::size_t t = 0; t < cache_->corpus.train.size(); ++t) {
            cache_->train_position[cache_->corpus.train[t]] = static_cast<std::ptrdiff_t>(t);
        }
    });
    return cache_->corpus;
}

const ContrastSets& Evaluator::contrast_sets(std::size_t index) {
    const auto it = std::find(targets_.begin(), targets_.end(), index);
    const Corpus& c = corpus();
    if (it == targets_.end()) {
        throw EvalError("contrast sets requested for a graph outside the evaluated split");
    }
    const auto slot = static_cast<std::size_t>(it - targets_.begin());
    if (!cache_->sets[slot]) {
        const bool fill_all = targets_.size() > c.train.size() / 2 && cfg_.split == Split::train;
        if (fill_all) {
            const Matrix distances = pairwise_train_distances(c, cfg_.explain, cfg_.workers);
            parallel_for(targets_.size(), cfg_.workers, [&](std::size_t s) {
                const std::size_t idx = targets_[s];
                const Vector row = distances.row(cache_->train_position[idx]).transpose();
                cache_->sets[s] = select_contrast_sets(c.embeddings[idx].z, c.labels[idx], idx, ds_, c,
                                                       cfg_.explain.k, cfg_.explain, &row);
            });
        } else {
            parallel_for(targets_.size(), cfg_.workers, [&](std::size_t s) {
                const std::size_t idx = targets_[s];
                cache_->sets[s] = select_contrast_sets(c.embeddings[idx].z, c.labels[idx], idx, ds_, c,
                                                       cfg_.explain.k, cfg_.explain);
            });
        }
    }
    return *cache_->sets[slot];
}

ExplanationResult Evaluator::explain(const MethodSpec& method, std::size_t index) {
    const Graph& g = ds_.graphs[index];
    switch (method.kind) {
    case MethodKind::random:
        return explain_random(g, cfg_.seed);
    case MethodKind::occlusion:
        return explain_occlusion(g, model_);
    case MethodKind::sensitivity:
        return explain_sensitivity(g, model_);
    case MethodKind::coge:
        break;
    }
    ExplainConfig ecfg = cfg_.explain;
    ecfg.variant = method.variant;
    const Corpus& c = corpus();
    if (ecfg.steps == 0) {
        return explain_coge(g, c.embeddings[index].z, ContrastSets{}, c, ecfg);
    }
    if (std::find(targets_.begin(), targets_.end(), index) == targets_.end()) {
        const ContrastSets sets = select_contrast_sets(c.embeddings[index].z, c.labels[index], index, ds_,
                                                       c, ecfg.k, ecfg);
        return explain_coge(g, c.embeddings[index].z, sets, c, ecfg);
    }
    return explain_coge(g, c.embeddings[index].z, contrast_sets(index), c, ecfg);
}

MethodReport Evaluator::run(const MethodSpec& method) {
    if (method.kind == MethodKind::coge && cfg_.explain.steps > 0 && !targets_.empty()) {
        contrast_sets(targets_.front());
    }
    const std::size_t n = targets_.size();
    std::vector<double> acc(n, 0.0);
    std::vector<std::string> errors(n);
    std::vector<char> ok(n, 0);
    parallel_for(n, cfg_.workers, [&](std::size_t s) {
        const std::size_t idx = targets_[s];
        try {
            const ExplanationResult r = explain(method, idx);
            acc[s] = explanation_accuracy(r.edges, r.edge_importance, ds_.graphs[idx].ground_truth_edges);
            ok[s] = 1;
            if (on_result) {
                std::lock_guard lock(cache_->mutex);
                on_result(idx, r);
            }
        } catch (const std::exception& e) {
            errors[s] = "graph " + std::to_string(ds_.graphs[idx].id) + ": " + e.what();
        }
    });

    MethodReport report;
    report.method = method.name();
    for (std::size_t s = 0; s < n; ++s) {
        if (ok[s]) {
            report.graph_ids.push_back(ds_.graphs[targets_[s]].id);
            report.labels.push_back(ds_.graphs[targets_[s]].label);
            report.accuracies.push_back(acc[s]);
        } else {
            ++report.failures;
            report.failure_messages.push_back(errors[s]);
        }
    }
    summarize(report);
    if (n > 0 && static_cast<double>(report.failures) > cfg_.max_failure_fraction * static_cast<double>(n)) {
        throw EvalError(report.method + ": " + std::to_string(report.failures) + " of " +
                        std::to_string(n) + " graphs failed; first: " + report.failure_messages.front());
    }
    return report;
}

MethodReport evaluate_method(const MethodSpec& method, const Dataset& ds, const GcnModel& model,
                             const EvalConfig& cfg) {
    Evaluator evaluator(ds, model, cfg);
    return evaluator.run(method);
}

}  // namespace coge
