#pragma once

#include <stdexcept>
#include <vector>

#include "coge/gcn.hpp"
#include "coge/types.hpp"

namespace coge {

class OtError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Discrete transport problem between weights `a` (n) and `b` (m) under
/// `cost` (n x m). Both weight vectors are nonnegative and sum to one.
struct TransportProblem {
    Vector a;
    Vector b;
    Matrix cost;
};

/// Throws OtError when marginals leave the simplex (|sum - 1| > 1e-12),
/// contain negative entries, or the cost has negative/non-finite entries.
void validate(const TransportProblem& p);

/// Pairwise Euclidean distances between rows, C[i][j] = |src_i - tgt_j|.
Matrix cost_matrix(const Matrix& src, const Matrix& tgt);
inline Matrix cost_matrix(const EmbeddingSet& src, const EmbeddingSet& tgt) {
    return cost_matrix(src.z, tgt.z);
}

/// `relative * mean(cost)`; falls back to `relative` when the cost is all zero.
double scaled_epsilon(const Matrix& cost, double relative = 0.05);

struct SinkhornOptions {
    double tolerance = 1e-9;  // sum_i |row sum_i - a_i| after a column update
    int max_iterations = 1000;
    bool record_trace = false;
    // Optional warm start; sizes must match the problem when set.
    const Vector* initial_f = nullptr;
    const Vector* initial_g = nullptr;
};

struct TransportResult {
    double value = 0.0;      // <plan, cost>
    double objective = 0.0;  // entropic OT value (dual objective at the returned potentials)
    double epsilon = 0.0;
    Matrix plan;
    Vector f;  // centered: sum_i a_i f_i = 0
    Vector g;
    int iterations = 0;
    bool converged = false;
    double marginal_violation = 0.0;
    std::vector<double> violation_trace;  // filled when options.record_trace
};

/// Entropic OT,
///   OT_eps(a, b) = min_P <P, C> + eps KL(P | a b^T),
/// solved with Sinkhorn updates on the dual potentials (f, g). Iterates are
/// kept in the log domain: the kernel exp((f_i + g_j - C_ij) / eps) is
/// rebuilt from the potentials whenever the accumulated scalings drift, so
/// small eps never over- or underflows. Zero-weight atoms are removed before
/// iterating; their plan rows/columns are zero and their potentials are the
/// c-transform of the other side (the one-sided gradient).
///
/// Stops once the row-marginal violation is <= tolerance; otherwise returns
/// with converged = false. Throws OtError if the iterates become NaN.
TransportResult sinkhorn(const TransportProblem& p, double epsilon, const SinkhornOptions& options = {});

/// OT_eps(a, a) for a symmetric cost via the averaged fixed point
/// f <- (f + T_a(f)) / 2 on a single potential. Same result layout as
/// sinkhorn(); f and g differ only by the centering shift.
TransportResult self_transport(const Vector& a, const Matrix& cost, double epsilon,
                               const SinkhornOptions& options = {});

/// Brute-force OT for uniform n = m <= 7: the minimum over all n! assignments
/// of (1/n) sum_i C[i][sigma(i)] (Birkhoff). Test oracle only.
double exact_ot(const TransportProblem& p);

/// Gradient of the entropic OT value with respect to the source weights, the
/// centered potential f. Throws OtError when `res` did not converge.
Vector marginal_gradient(const TransportResult& res);

enum class DistanceKind {
    debiased,  // S_eps(a, b) = OT(a, b) - OT(a, a)/2 - OT(b, b)/2
    entropic,  // OT_eps(a, b)
};

struct DivergenceOptions {
    DistanceKind kind = DistanceKind::debiased;
    double relative_epsilon = 0.05;  // eps = relative_epsilon * mean(C_ab)
    SinkhornOptions sinkhorn{};
};

struct DivergenceResult {
    double value = 0.0;
    Vector gradient;  // with respect to the source weights
    double epsilon = 0.0;
    int iterations = 0;
    bool converged = true;
};

/// Distance between a variable weighting of a fixed source point set and a
/// fixed weighted target. Holds the cost matrices, the constant target self
/// term and warm-start potentials, so repeated evaluations along an
/// optimization path are cheap. Not thread-safe; use one per thread.
class WeightedDistance {
public:
    WeightedDistance(const Matrix& source, const Matrix& target, const Vector& target_weights,
                     const DivergenceOptions& options = {});

    DivergenceResult evaluate(const Vector& source_weights);

    double epsilon() const { return epsilon_; }

private:
    DivergenceOptions options_;
    Matrix cost_st_;
    Matrix cost_ss_;
    Vector target_weights_;
    double epsilon_ = 0.0;
    double target_self_ = 0.0;
    bool target_converged_ = true;
    Vector target_potential_;
    bool self_distance_ = false;
    Vector warm_f_st_, warm_g_st_, warm_f_ss_;
};

/// One-shot divergence of (za, wa) to (zb, wb) and its gradient in wa.
DivergenceResult sinkhorn_divergence(const Matrix& za, const Vector& wa, const Matrix& zb,
                                     const Vector& wb, const DivergenceOptions& options = {});

}  // namespace coge
