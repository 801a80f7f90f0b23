#include <gtest/gtest.h>

#include <json.hpp>
#include <numeric>
#include <random>
#include <set>

#include "coge/cycliq.hpp"
#include "coge/explain.hpp"
#include "support/oracles.hpp"

namespace coge {
namespace {

using testing::random_points;

class SmallCorpus : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        ds_ = new Dataset(generate_cycliq(40, 11));
        model_ = new GcnModel(GcnModel::glorot(10, 8, 3, 2, 5));
    }
    static void TearDownTestSuite() {
        delete ds_;
        delete model_;
    }
    static Dataset* ds_;
    static GcnModel* model_;
};
Dataset* SmallCorpus::ds_ = nullptr;
GcnModel* SmallCorpus::model_ = nullptr;

Vector uniform(Eigen::Index n) { return Vector::Constant(n, 1.0 / static_cast<double>(n)); }

TEST(Variants, NamesRoundTrip) {
    std::set<std::string> seen;
    for (const LossVariant v : kAllVariants) {
        EXPECT_EQ(parse_variant(variant_name(v)), v);
        EXPECT_EQ(parse_variant(variant_label(v)), v);
        seen.insert(std::string(variant_name(v)));
    }
    EXPECT_EQ(seen.size(), 7u);
    EXPECT_THROW(parse_variant("full"), ExplainError);
}

TEST(Variants, LossWeights) {
    const LossWeights full = loss_weights(LossVariant::full_ot, SignConvention::equation);
    EXPECT_EQ(full.diff, 1.0);
    EXPECT_EQ(full.same, -1.0);
    EXPECT_EQ(full.self, 1.0);
    EXPECT_FALSE(full.average_distance);
    EXPECT_TRUE(loss_weights(LossVariant::full_average, SignConvention::equation).average_distance);

    const LossWeights diff = loss_weights(LossVariant::diff, SignConvention::equation);
    EXPECT_EQ(diff.same, 0.0);
    EXPECT_EQ(diff.self, 0.0);
    const LossWeights neg = loss_weights(LossVariant::neg_same_plus_self, SignConvention::equation);
    EXPECT_EQ(neg.diff, 0.0);
    EXPECT_EQ(neg.same, -1.0);
    EXPECT_EQ(neg.self, 1.0);

    const LossWeights prose = loss_weights(LossVariant::full_ot, SignConvention::prose);
    EXPECT_EQ(prose.diff, -1.0);
    EXPECT_EQ(prose.same, 1.0);
    EXPECT_EQ(prose.self, 1.0);
}

TEST_F(SmallCorpus, ContrastSetsAreSortedTrainOnlyAndExcludeSelf) {
    const Corpus corpus = embed_corpus(*model_, *ds_);
    const std::set<std::size_t> train(corpus.train.begin(), corpus.train.end());
    const ExplainConfig cfg;
    for (const std::size_t idx : {std::size_t{0}, std::size_t{5}, ds_->indices(Split::test).front()}) {
        const Graph& g = ds_->graphs[idx];
        const ContrastSets sets = select_contrast_sets(g, *model_, *ds_, 4, cfg);
        ASSERT_EQ(sets.same_label.size(), 4u);
        ASSERT_EQ(sets.diff_label.size(), 4u);
        EXPECT_TRUE(std::is_sorted(sets.same_distances.begin(), sets.same_distances.end()));
        EXPECT_TRUE(std::is_sorted(sets.diff_distances.begin(), sets.diff_distances.end()));
        for (std::size_t i = 0; i < 4; ++i) {
            EXPECT_TRUE(train.contains(sets.same_index[i]));
            EXPECT_TRUE(train.contains(sets.diff_index[i]));
            EXPECT_NE(sets.same_index[i], idx);
            EXPECT_EQ(ds_->graphs[sets.same_index[i]].label, g.label);
            EXPECT_NE(ds_->graphs[sets.diff_index[i]].label, g.label);
            EXPECT_EQ(ds_->graphs[sets.same_index[i]].id, sets.same_label[i]);
        }
    }
}

TEST_F(SmallCorpus, ContrastDistancesMatchIndependentRecomputation) {
    const Corpus corpus = embed_corpus(*model_, *ds_);
    const ExplainConfig cfg;
    const Graph& g = ds_->graphs[3];
    const ContrastSets sets = select_contrast_sets(g, *model_, *ds_, 3, cfg);
    const Matrix z = forward(*model_, g).embeddings.z;
    for (std::size_t i = 0; i < 3; ++i) {
        const Matrix& t = corpus.embeddings[sets.diff_index[i]].z;
        EXPECT_NEAR(sets.diff_distances[i], sinkhorn_divergence(z, uniform(z.rows()), t, uniform(t.rows())).value,
                    1e-6);
    }
}

TEST_F(SmallCorpus, LargeKReturnsWholePool) {
    const Graph& g = ds_->graphs[0];
    const ContrastSets sets = select_contrast_sets(g, *model_, *ds_, 1000, ExplainConfig{});
    int same = 0, diff = 0;
    for (const std::size_t i : ds_->indices(Split::train)) {
        if (ds_->graphs[i].id == g.id) {
            continue;
        }
        (ds_->graphs[i].label == g.label ? same : diff)++;
    }
    EXPECT_EQ(static_cast<int>(sets.same_label.size()), same);
    EXPECT_EQ(static_cast<int>(sets.diff_label.size()), diff);
}

TEST_F(SmallCorpus, DuplicateIsNearestAndTiesBreakById) {
    Dataset ds = *ds_;
    const Graph original = ds.graphs[0];
    for (const int id : {9001, 9000}) {
        Graph copy = original;
        copy.id = id;
        ds.graphs.push_back(copy);
        ds.splits.push_back(Split::train);
    }
    const ContrastSets sets = select_contrast_sets(original, *model_, ds, 3, ExplainConfig{});
    EXPECT_EQ(sets.same_label[0], 9000);
    EXPECT_EQ(sets.same_label[1], 9001);
    EXPECT_NEAR(sets.same_distances[0], 0.0, 1e-8);
    EXPECT_EQ(sets.same_distances[0], sets.same_distances[1]);
}

TEST_F(SmallCorpus, ContrastSelectionIsDeterministic) {
    const Graph& g = ds_->graphs[7];
    const ContrastSets a = select_contrast_sets(g, *model_, *ds_, 5, ExplainConfig{});
    const ContrastSets b = select_contrast_sets(g, *model_, *ds_, 5, ExplainConfig{});
    EXPECT_EQ(a.same_label, b.same_label);
    EXPECT_EQ(a.diff_label, b.diff_label);
    EXPECT_EQ(a.same_distances, b.same_distances);
}

TEST_F(SmallCorpus, ContrastSelectionRejectsEmptyPoolsAndBadK) {
    Dataset one_label;
    for (std::size_t i = 0; i < ds_->size(); ++i) {
        if (ds_->graphs[i].label == 0) {
            one_label.graphs.push_back(ds_->graphs[i]);
            one_label.splits.push_back(Split::train);
        }
    }
    EXPECT_THROW(select_contrast_sets(one_label.graphs[0], *model_, one_label, 3, ExplainConfig{}),
                 ExplainError);
    EXPECT_THROW(select_contrast_sets(ds_->graphs[0], *model_, *ds_, 0, ExplainConfig{}), ExplainError);
}

struct Instance {
    Matrix z;
    std::vector<Matrix> same, diff;
};

Instance random_instance(std::mt19937_64& rng, int n = 6) {
    Instance in;
    in.z = random_points(n, 4, rng);
    for (int i = 0; i < 3; ++i) {
        in.same.push_back(random_points(4 + i, 4, rng));
        in.diff.push_back(random_points(5 + i, 4, rng));
    }
    return in;
}

TEST(CogeLoss, SelfTermVanishesAtUniform) {
    std::mt19937_64 rng(20);
    const Instance in = random_instance(rng);
    const LossResult r = coge_loss(uniform(6), in.z, in.same, in.diff, ExplainConfig{});
    EXPECT_NEAR(r.self_term, 0.0, 1e-12);
    EXPECT_GT(r.diff_term, 0.0);
    EXPECT_GT(r.same_term, 0.0);
    EXPECT_NEAR(r.value, r.diff_term - r.same_term + r.self_term, 1e-14);
}

TEST(CogeLoss, IdenticalContrastSetsCancel) {
    std::mt19937_64 rng(21);
    const Instance in = random_instance(rng);
    for (int trial = 0; trial < 5; ++trial) {
        const Vector w = testing::random_simplex(6, rng);
        const LossResult r = coge_loss(w, in.z, in.same, in.same, ExplainConfig{});
        EXPECT_NEAR(r.diff_term - r.same_term, 0.0, 1e-14);
        EXPECT_NEAR(r.value, r.self_term, 1e-14);
        EXPECT_GT(r.self_term, 0.0);
    }
}

TEST(CogeLoss, LogitGradientSumsToZero) {
    std::mt19937_64 rng(22);
    const Instance in = random_instance(rng);
    const LossResult r = coge_loss(testing::random_simplex(6, rng), in.z, in.same, in.diff, ExplainConfig{});
    EXPECT_NEAR(r.grad_logits.sum(), 0.0, 1e-14);
    EXPECT_EQ(r.subproblems, 7);
    EXPECT_EQ(r.unconverged, 0);
}

struct GradientCase {
    LossVariant variant;
    SignConvention sign;
    DistanceKind distance;
};

class ComposedGradient : public ::testing::TestWithParam<GradientCase> {};

TEST_P(ComposedGradient, MatchesFiniteDifferencesOverLogits) {
    ExplainConfig cfg;
    cfg.variant = GetParam().variant;
    cfg.sign = GetParam().sign;
    cfg.distance = GetParam().distance;
    cfg.tolerance = 1e-13;
    cfg.max_iterations = 5000;
    std::mt19937_64 rng(23);
    std::normal_distribution<double> normal(0.0, 0.5);
    for (int trial = 0; trial < 5; ++trial) {
        const Instance in = random_instance(rng);
        Vector theta(6);
        for (int i = 0; i < 6; ++i) {
            theta[i] = normal(rng);
        }
        auto loss = [&](const Vector& t) { return coge_loss(softmax(t), in.z, in.same, in.diff, cfg).value; };
        const Vector analytic = coge_loss(softmax(theta), in.z, in.same, in.diff, cfg).grad_logits;
        const Vector numeric = testing::fd_gradient(loss, theta, 1e-5);
        EXPECT_LE((analytic - numeric).cwiseAbs().maxCoeff(), 1e-4) << "trial " << trial;
    }
}

INSTANTIATE_TEST_SUITE_P(
    AllTerms, ComposedGradient,
    ::testing::Values(GradientCase{LossVariant::full_ot, SignConvention::equation, DistanceKind::debiased},
                      GradientCase{LossVariant::full_ot, SignConvention::prose, DistanceKind::debiased},
                      GradientCase{LossVariant::full_ot, SignConvention::equation, DistanceKind::entropic},
                      GradientCase{LossVariant::full_average, SignConvention::equation, DistanceKind::debiased},
                      GradientCase{LossVariant::neg_same_plus_self, SignConvention::equation,
                                   DistanceKind::debiased},
                      GradientCase{LossVariant::diff, SignConvention::equation, DistanceKind::debiased}));

TEST(CogeLoss, RejectsMismatchedShapes) {
    std::mt19937_64 rng(24);
    const Instance in = random_instance(rng);
    EXPECT_THROW(coge_loss(uniform(5), in.z, in.same, in.diff, ExplainConfig{}), ExplainError);
    EXPECT_THROW(coge_loss(uniform(6), in.z, {random_points(3, 5, rng)}, in.diff, ExplainConfig{}),
                 ExplainError);
}

TEST_F(SmallCorpus, ZeroStepsGivesUniformWeights) {
    ExplainConfig cfg;
    cfg.steps = 0;
    const Graph& g = ds_->graphs[2];
    for (const LossVariant v : {LossVariant::full_ot, LossVariant::diff_minus_same}) {
        const ExplanationResult r = ablation_variant(g, *model_, *ds_, cfg, v);
        EXPECT_LE((r.w - uniform(g.num_nodes)).cwiseAbs().maxCoeff(), 1e-15);
        EXPECT_LE(r.node_importance.cwiseAbs().maxCoeff(), 1e-15);
        EXPECT_TRUE(r.loss_trace.empty());
        EXPECT_EQ(r.edges.size(), g.edges.size());
    }
}

TEST_F(SmallCorpus, OptimizedWeightsStayOnSimplex) {
    ExplainConfig cfg;
    cfg.steps = 25;
    cfg.k = 3;
    const Graph& g = ds_->graphs[4];
    const ExplanationResult r = explain_coge(g, *model_, *ds_, cfg);
    EXPECT_NEAR(r.w.sum(), 1.0, 1e-9);
    EXPECT_GT(r.w.minCoeff(), 0.0);
    EXPECT_NEAR(r.node_importance.sum(), 0.0, 1e-12);
    EXPECT_EQ(r.loss_trace.size(), 25u);
    EXPECT_EQ(r.method, "coge");
    const std::vector<double> scores = edge_scores_from_nodes(g, r.node_importance);
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        EXPECT_DOUBLE_EQ(r.edge_importance[i],
                         r.node_importance[g.edges[i].u] + r.node_importance[g.edges[i].v]);
        EXPECT_EQ(scores[i], r.edge_importance[i]);
    }
    const ExplanationResult again = explain_coge(g, *model_, *ds_, cfg);
    EXPECT_EQ(again.w, r.w);
    EXPECT_EQ(again.loss_trace, r.loss_trace);
}

TEST_F(SmallCorpus, DegenerateContrastKeepsUniformWeights) {
    const Corpus corpus = embed_corpus(*model_, *ds_);
    ContrastSets sets;
    sets.same_index = {1, 2, 3};
    sets.diff_index = {1, 2, 3};
    const Graph& g = ds_->graphs[0];
    const ExplanationResult r = explain_coge(g, corpus.embeddings[0].z, sets, corpus, ExplainConfig{});
    EXPECT_LE((r.w - uniform(g.num_nodes)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Baselines, RandomIsSeededAndUnitInterval) {
    const Dataset ds = generate_cycliq(4, 2);
    const Graph& g = ds.graphs[0];
    const ExplanationResult a = explain_random(g, 7);
    const ExplanationResult b = explain_random(g, 7);
    const ExplanationResult c = explain_random(g, 8);
    EXPECT_EQ(a.edge_importance, b.edge_importance);
    EXPECT_NE(a.edge_importance, c.edge_importance);
    EXPECT_EQ(a.edge_importance.size(), g.edges.size());
    EXPECT_EQ(a.node_importance.size(), 0);
    for (const double s : a.edge_importance) {
        EXPECT_GE(s, 0.0);
        EXPECT_LT(s, 1.0);
    }
}

TEST(Baselines, OcclusionOfStructureBlindModelIsFlat) {
    const Dataset ds = generate_cycliq(4, 3);
    GcnModel model = GcnModel::glorot(10, 8, 3, 2, 1);
    for (Matrix& w : model.conv) {
        w.setZero();
    }
    const ExplanationResult r = explain_occlusion(ds.graphs[0], model);
    EXPECT_EQ(r.node_importance.size(), ds.graphs[0].num_nodes);
    EXPECT_EQ(r.node_importance.maxCoeff(), r.node_importance.minCoeff());
}

TEST(Baselines, SingleNodeOcclusionIsZero) {
    Graph g;
    g.num_nodes = 1;
    g.features = Matrix::Ones(1, 10);
    const ExplanationResult r = explain_occlusion(g, GcnModel::glorot(10, 8, 3, 2, 1));
    ASSERT_EQ(r.node_importance.size(), 1);
    EXPECT_EQ(r.node_importance[0], 0.0);
    EXPECT_TRUE(r.edge_importance.empty());
}

TEST(Baselines, OcclusionMatchesDirectRecomputation) {
    const Dataset ds = generate_cycliq(4, 4);
    const GcnModel model = GcnModel::glorot(10, 8, 3, 2, 2);
    const Graph& g = ds.graphs[1];
    const ExplanationResult r = explain_occlusion(g, model);
    const Vector base = softmax(forward(model, g).logits);
    const int c = base[1] > base[0] ? 1 : 0;
    for (int i = 0; i < g.num_nodes; ++i) {
        Graph cut = g;
        cut.edges.clear();
        for (const Edge& e : g.edges) {
            if (e.u != i && e.v != i) {
                cut.edges.push_back(e);
            }
        }
        EXPECT_NEAR(r.node_importance[i], base[c] - softmax(forward(model, cut).logits)[c], 1e-12);
    }
}

TEST(Baselines, SensitivityOfZeroClassifierIsZero) {
    const Dataset ds = generate_cycliq(4, 5);
    GcnModel model = GcnModel::glorot(10, 8, 3, 2, 1);
    model.classifier.weight.setZero();
    const ExplanationResult r = explain_sensitivity(ds.graphs[0], model);
    EXPECT_EQ(r.node_importance.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Baselines, SensitivityIsPermutationEquivariant) {
    const Dataset ds = generate_cycliq(6, 6);
    const GcnModel model = GcnModel::glorot(10, 8, 3, 2, 3);
    std::mt19937_64 rng(6);
    for (const Graph& g : ds.graphs) {
        std::vector<int> perm(static_cast<std::size_t>(g.num_nodes));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        const Vector a = explain_sensitivity(g, model).node_importance;
        const Vector b = explain_sensitivity(permute_nodes(g, perm), model).node_importance;
        for (int i = 0; i < g.num_nodes; ++i) {
            EXPECT_NEAR(b[perm[static_cast<std::size_t>(i)]], a[i], 1e-12);
        }
    }
}

TEST_F(SmallCorpus, ExplanationJsonHasDocumentedFields) {
    ExplainConfig cfg;
    cfg.steps = 2;
    cfg.k = 2;
    const ExplanationResult r = explain_coge(ds_->graphs[0], *model_, *ds_, cfg);
    const nlohmann::json j = nlohmann::json::parse(explanation_to_json(r));
    for (const char* key : {"graph_id", "w", "node_importance", "edge_importance", "loss_trace", "config"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
    EXPECT_EQ(j["graph_id"].get<int>(), r.graph_id);
    EXPECT_EQ(j["edge_importance"].size(), r.edges.size());
    EXPECT_EQ(j["edge_importance"][0].size(), 3u);
    EXPECT_EQ(j["config"]["k"].get<int>(), 2);
    EXPECT_EQ(j["w"].get<std::vector<double>>().size(), static_cast<std::size_t>(r.w.size()));
}

}  // namespace
}  // namespace coge
