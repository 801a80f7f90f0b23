#include "coge/gcn.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "coge/rng.hpp"

namespace coge {
namespace {

Matrix glorot_matrix(int in, int out, Rng& rng) {
    const double limit = std::sqrt(6.0 / (in + out));
    Matrix w(in, out);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        w.data()[i] = rng.uniform_real(-limit, limit);
    }
    return w;
}

void check_input(const GcnModel& model, const Matrix& propagation, const Matrix& features) {
    if (features.rows() == 0) {
        throw DimensionError("forward: graph has no nodes");
    }
    if (features.cols() != model.input_dim()) {
        throw DimensionError("forward: feature width " + std::to_string(features.cols()) +
                             " != model input dim " + std::to_string(model.input_dim()));
    }
    if (propagation.rows() != features.rows() || propagation.cols() != features.rows()) {
        throw DimensionError("forward: propagation matrix shape does not match node count");
    }
}

// Per-layer intermediates kept for the backward pass.
struct Trace {
    std::vector<Matrix> aggregated;  // P H_l
    std::vector<Matrix> pre;         // P H_l W_l
    Matrix z;                        // relu(pre.back())
    RowVector pooled;
    Vector logits;
};

Trace run_forward(const GcnModel& model, const Matrix& propagation, const Matrix& features) {
    Trace t;
    t.aggregated.reserve(model.conv.size());
    t.pre.reserve(model.conv.size());
    Matrix h = features;
    for (const Matrix& weight : model.conv) {
        t.aggregated.push_back(propagation * h);
        Matrix p = t.aggregated.back() * weight;
        h = p.cwiseMax(0.0);
        t.pre.push_back(std::move(p));
    }
    t.z = std::move(h);
    t.pooled = t.z.colwise().mean();
    t.logits = (t.pooled * model.classifier.weight + model.classifier.bias).transpose();
    return t;
}

// Backpropagates d(objective)/d(logits) through classifier, pooling and the
// conv stack. Accumulates parameter gradients into `grad` when non-null and
// returns d(objective)/d(features).
Matrix run_backward(const GcnModel& model, const Matrix& propagation, const Trace& t,
                    const Vector& dlogits, GcnModel* grad) {
    const RowVector dl = dlogits.transpose();
    if (grad) {
        grad->classifier.weight.noalias() += t.pooled.transpose() * dl;
        grad->classifier.bias += dl;
    }
    const RowVector dpooled = dl * model.classifier.weight.transpose();
    const auto n = t.z.rows();
    Matrix dh = (Vector::Ones(n) * dpooled) / static_cast<double>(n);
    for (std::size_t l = model.conv.size(); l-- > 0;) {
        const Matrix dpre = dh.cwiseProduct((t.pre[l].array() > 0.0).cast<double>().matrix());
        if (grad) {
            grad->conv[l].noalias() += t.aggregated[l].transpose() * dpre;
        }
        dh = propagation.transpose() * (dpre * model.conv[l].transpose());
    }
    return dh;
}

}  // namespace

std::size_t GcnModel::parameter_count() const {
    std::size_t count = static_cast<std::size_t>(classifier.weight.size() + classifier.bias.size());
    for (const Matrix& w : conv) {
        count += static_cast<std::size_t>(w.size());
    }
    return count;
}

const char* propagation_name(Propagation p) {
    return p == Propagation::symmetric ? "symmetric" : "degree_scaled";
}

Propagation parse_propagation(const std::string& name) {
    if (name == "symmetric") {
        return Propagation::symmetric;
    }
    if (name == "degree_scaled") {
        return Propagation::degree_scaled;
    }
    throw std::invalid_argument("unknown propagation '" + name + "' (expected symmetric or degree_scaled)");
}

GcnModel GcnModel::glorot(int input_dim, int hidden_dim, int num_layers, int num_classes,
                          std::uint64_t seed, Propagation propagation) {
    Rng rng(seed);
    GcnModel m;
    m.propagation = propagation;
    int in = input_dim;
    for (int l = 0; l < num_layers; ++l) {
        m.conv.push_back(glorot_matrix(in, hidden_dim, rng));
        in = hidden_dim;
    }
    m.classifier = {glorot_matrix(in, num_classes, rng), RowVector::Zero(num_classes)};
    return m;
}

GcnModel GcnModel::zeros(int input_dim, int hidden_dim, int num_layers, int num_classes,
                         Propagation propagation) {
    GcnModel m;
    m.propagation = propagation;
    int in = input_dim;
    for (int l = 0; l < num_layers; ++l) {
        m.conv.push_back(Matrix::Zero(in, hidden_dim));
        in = hidden_dim;
    }
    m.classifier = {Matrix::Zero(in, num_classes), RowVector::Zero(num_classes)};
    return m;
}

bool GcnModel::operator==(const GcnModel& other) const {
    auto same = [](const auto& a, const auto& b) {
        return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
    };
    if (propagation != other.propagation || conv.size() != other.conv.size() ||
        !same(classifier.weight, other.classifier.weight) || !same(classifier.bias, other.classifier.bias)) {
        return false;
    }
    for (std::size_t i = 0; i < conv.size(); ++i) {
        if (!same(conv[i], other.conv[i])) {
            return false;
        }
    }
    return true;
}

Vector flatten(const GcnModel& model) {
    Vector flat(static_cast<Eigen::Index>(model.parameter_count()));
    Eigen::Index offset = 0;
    auto put = [&](const auto& tensor) {
        flat.segment(offset, tensor.size()) =
            Eigen::Map<const Vector>(tensor.data(), tensor.size());
        offset += tensor.size();
    };
    for (const Matrix& w : model.conv) {
        put(w);
    }
    put(model.classifier.weight);
    put(model.classifier.bias);
    return flat;
}

void unflatten(const Vector& flat, GcnModel& model) {
    if (static_cast<std::size_t>(flat.size()) != model.parameter_count()) {
        throw DimensionError("unflatten: parameter count mismatch");
    }
    Eigen::Index offset = 0;
    auto take = [&](auto& tensor) {
        Eigen::Map<Vector>(tensor.data(), tensor.size()) = flat.segment(offset, tensor.size());
        offset += tensor.size();
    };
    for (Matrix& w : model.conv) {
        take(w);
    }
    take(model.classifier.weight);
    take(model.classifier.bias);
}

Matrix propagation_matrix(const Graph& g, Propagation p) {
    const int n = g.num_nodes;
    Matrix a = Matrix::Identity(n, n);
    for (const Edge& e : g.edges) {
        a(e.u, e.v) = 1.0;
        a(e.v, e.u) = 1.0;
    }
    const Vector inv_sqrt_deg = a.rowwise().sum().cwiseSqrt().cwiseInverse();
    if (p == Propagation::degree_scaled) {
        return inv_sqrt_deg.asDiagonal() * a;
    }
    return inv_sqrt_deg.asDiagonal() * a * inv_sqrt_deg.asDiagonal();
}

ForwardResult forward(const GcnModel& model, const Matrix& propagation, const Matrix& features,
                      int graph_id) {
    check_input(model, propagation, features);
    Trace t = run_forward(model, propagation, features);
    return {std::move(t.logits), EmbeddingSet{graph_id, std::move(t.z)}};
}

ForwardResult forward(const GcnModel& model, const Graph& g) {
    return forward(model, propagation_matrix(g, model.propagation), g.features, g.id);
}

int predict(const GcnModel& model, const Graph& g) {
    const Vector logits = forward(model, g).logits;
    Eigen::Index best = 0;
    logits.maxCoeff(&best);
    return static_cast<int>(best);
}

Vector softmax(const Vector& logits) {
    const Vector shifted = (logits.array() - logits.maxCoeff()).exp().matrix();
    return shifted / shifted.sum();
}

Matrix input_gradient(const GcnModel& model, const Graph& g, int class_idx) {
    if (class_idx < 0 || class_idx >= model.num_classes()) {
        throw DimensionError("input_gradient: class index " + std::to_string(class_idx) +
                             " out of range");
    }
    const Matrix prop = propagation_matrix(g, model.propagation);
    check_input(model, prop, g.features);
    const Trace t = run_forward(model, prop, g.features);
    Vector dlogits = Vector::Zero(model.num_classes());
    dlogits[class_idx] = 1.0;
    return run_backward(model, prop, t, dlogits, nullptr);
}

LossGradient loss_and_gradient(const GcnModel& model, std::span<const Graph* const> batch) {
    LossGradient out{0.0, GcnModel::zeros(model.input_dim(), model.hidden_dim(),
                                          static_cast<int>(model.conv.size()), model.num_classes(),
                                          model.propagation)};
    if (batch.empty()) {
        return out;
    }
    for (const Graph* g : batch) {
        const Matrix prop = propagation_matrix(*g, model.propagation);
        check_input(model, prop, g->features);
        const Trace t = run_forward(model, prop, g->features);
        const Vector p = softmax(t.logits);
        out.loss -= std::log(p[g->label]);
        Vector dlogits = p;
        dlogits[g->label] -= 1.0;
        run_backward(model, prop, t, dlogits, &out.gradient);
    }
    const double scale = 1.0 / static_cast<double>(batch.size());
    out.loss *= scale;
    Vector flat = flatten(out.gradient) * scale;
    unflatten(flat, out.gradient);
    return out;
}

void validate(const TrainConfig& cfg) {
    if (cfg.epochs < 0 || cfg.batch_size <= 0 || !(cfg.learning_rate > 0.0) ||
        !(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0) ||
        !(cfg.adam_epsilon > 0.0) || cfg.hidden_dim <= 0 || cfg.num_layers <= 0) {
        throw std::invalid_argument("invalid training configuration");
    }
}

double accuracy(const GcnModel& model, const Dataset& ds, Split split) {
    const auto idx = ds.indices(split);
    if (idx.empty()) {
        return 0.0;
    }
    std::size_t correct = 0;
    for (const std::size_t i : idx) {
        correct += predict(model, ds.graphs[i]) == ds.graphs[i].label ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(idx.size());
}

TrainResult train(const Dataset& ds, const TrainConfig& cfg) {
    validate(cfg);
    const int input_dim = ds.feature_dim.value_or(0);
    if (input_dim <= 0) {
        throw std::invalid_argument("train: dataset has no feature dimension");
    }
    std::vector<const Graph*> train_graphs;
    int per_class[2] = {0, 0};
    for (const std::size_t i : ds.indices(Split::train)) {
        train_graphs.push_back(&ds.graphs[i]);
        ++per_class[ds.graphs[i].label];
    }
    if (per_class[0] == 0 || per_class[1] == 0) {
        throw std::invalid_argument("train: training split needs at least one graph per class");
    }

    TrainResult result;
    result.model = GcnModel::glorot(input_dim, cfg.hidden_dim, cfg.num_layers, 2,
                                    derive_seed(cfg.seed, "gcn-init"), cfg.propagation);
    Rng shuffle_rng(derive_seed(cfg.seed, "gcn-shuffle"));

    Vector params = flatten(result.model);
    Vector m = Vector::Zero(params.size());
    Vector v = Vector::Zero(params.size());
    long step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(std::span<const Graph*>(train_graphs));
        double epoch_loss = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < train_graphs.size();
             start += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
            const std::size_t len =
                std::min(static_cast<std::size_t>(cfg.batch_size), train_graphs.size() - start);
            const std::span<const Graph* const> batch(train_graphs.data() + start, len);
            const LossGradient lg = loss_and_gradient(result.model, batch);
            if (!std::isfinite(lg.loss)) {
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) +
                                    ", batch " + std::to_string(batch_index));
            }
            epoch_loss += lg.loss * static_cast<double>(len);

            ++step;
            const Vector g = flatten(lg.gradient);
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseAbs2();
            const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            params.array() -= cfg.learning_rate * (m.array() / c1) /
                              ((v.array() / c2).sqrt() + cfg.adam_epsilon);
            if (!params.allFinite()) {
                throw TrainingError("non-finite parameters at epoch " + std::to_string(epoch) +
                                    ", batch " + std::to_string(batch_index));
            }
            unflatten(params, result.model);
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.loss = epoch_loss / static_cast<double>(train_graphs.size());
        if (cfg.track_accuracy) {
            stats.train_accuracy = accuracy(result.model, ds, Split::train);
            stats.test_accuracy = accuracy(result.model, ds, Split::test);
        }
        result.history.push_back(stats);
    }
    return result;
}

}  // namespace coge
