#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <stdexcept>
#include <vector>

#include "coge/graph.hpp"
#include "coge/types.hpp"

namespace coge {

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Affine map x -> x * weight + bias, weight is (in x out).
struct DenseLayer {
    Matrix weight;
    RowVector bias;
};

/// Propagation matrix of a conv layer, with D the degree matrix of A + I.
enum class Propagation : std::uint32_t {
    symmetric = 0,      // D^-1/2 (A + I) D^-1/2
    degree_scaled = 1,  // D^-1/2 (A + I)
};

const char* propagation_name(Propagation p);
Propagation parse_propagation(const std::string& name);

/// Graph convolutional network: `conv.size()` layers of
///   H' = relu(P H W)
/// with P from `propagation`, followed by mean pooling over nodes and a
/// linear classifier. Conv layers carry no bias.
struct GcnModel {
    std::vector<Matrix> conv;
    DenseLayer classifier;
    Propagation propagation = Propagation::degree_scaled;

    int input_dim() const { return conv.empty() ? 0 : static_cast<int>(conv.front().rows()); }
    int hidden_dim() const { return conv.empty() ? 0 : static_cast<int>(conv.back().cols()); }
    int num_classes() const { return static_cast<int>(classifier.weight.cols()); }
    std::size_t parameter_count() const;

    /// Glorot-uniform weights, zero classifier bias.
    static GcnModel glorot(int input_dim, int hidden_dim, int num_layers, int num_classes,
                           std::uint64_t seed, Propagation propagation = Propagation::degree_scaled);
    /// All-zero parameters with the same shapes as glorot().
    static GcnModel zeros(int input_dim, int hidden_dim, int num_layers, int num_classes,
                          Propagation propagation = Propagation::degree_scaled);

    bool operator==(const GcnModel& other) const;
};

/// Flat parameter view, conv weights first, then classifier weight and bias.
Vector flatten(const GcnModel& model);
/// Writes a flat vector back into a model of matching shape.
void unflatten(const Vector& flat, GcnModel& model);

/// Final node embeddings of one graph (post-activation output of the last
/// conv layer, before pooling).
struct EmbeddingSet {
    int graph_id = 0;
    Matrix z;

    int size() const { return static_cast<int>(z.rows()); }
};

/// Dense propagation matrix of `g`.
Matrix propagation_matrix(const Graph& g, Propagation p);

struct ForwardResult {
    Vector logits;
    EmbeddingSet embeddings;
};

ForwardResult forward(const GcnModel& model, const Graph& g);
/// Forward pass with an explicit propagation matrix (model.propagation is
/// ignored).
ForwardResult forward(const GcnModel& model, const Matrix& propagation, const Matrix& features,
                      int graph_id = 0);

int predict(const GcnModel& model, const Graph& g);
Vector softmax(const Vector& logits);

/// d logits[class_idx] / d features, exact reverse mode (n x feature_dim).
Matrix input_gradient(const GcnModel& model, const Graph& g, int class_idx);

/// Mean softmax cross-entropy over `batch` and its gradient with respect to
/// every parameter (returned with the model's own shape).
struct LossGradient {
    double loss = 0.0;
    GcnModel gradient;
};
LossGradient loss_and_gradient(const GcnModel& model, std::span<const Graph* const> batch);

struct TrainConfig {
    int epochs = 200;
    int batch_size = 32;
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 0;
    int hidden_dim = 20;
    int num_layers = 5;
    Propagation propagation = Propagation::degree_scaled;
    // Per-epoch accuracy is an extra forward pass over the whole dataset.
    bool track_accuracy = true;
};

void validate(const TrainConfig& cfg);

struct EpochStats {
    int epoch = 0;
    double loss = 0.0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
};

struct TrainResult {
    GcnModel model;
    std::vector<EpochStats> history;
};

/// Adam on mean cross-entropy over the train split, reshuffled every epoch.
/// Deterministic in cfg.seed. Throws TrainingError on a non-finite loss.
TrainResult train(const Dataset& ds, const TrainConfig& cfg);

double accuracy(const GcnModel& model, const Dataset& ds, Split split);

}  // namespace coge
