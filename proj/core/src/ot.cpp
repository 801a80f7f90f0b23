#include "coge/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace coge {
namespace {

// Scalings are folded back into the potentials once |log u| or |log v|
// exceeds this; keeps every kernel entry far from over/underflow.
constexpr double kAbsorbThreshold = 25.0;
// Kernel sums below this mean the kernel is stale; refresh by c-transform.
constexpr double kTinyMass = 1e-100;

void check_weights(const Vector& w, const char* name) {
    if (w.size() == 0) {
        throw OtError(std::string(name) + " is empty");
    }
    if (!w.allFinite() || w.minCoeff() < 0.0) {
        throw OtError(std::string(name) + " must be finite and nonnegative");
    }
    const double total = w.sum();
    if (std::abs(total - 1.0) > 1e-12) {
        throw OtError(std::string(name) + " must sum to 1 (sum = " + std::to_string(total) + ")");
    }
}

double log_sum_exp(const double* x, Eigen::Index n, Eigen::Index stride) {
    double hi = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n; ++k) {
        hi = std::max(hi, x[k * stride]);
    }
    if (!std::isfinite(hi)) {
        return hi;
    }
    double acc = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        acc += std::exp(x[k * stride] - hi);
    }
    return hi + std::log(acc);
}

// f_i = -eps log sum_j b_j exp((g_j - C_ij) / eps)
Vector c_transform_rows(const Vector& g, const Vector& log_b, const Matrix& cost, double eps) {
    const Eigen::Index n = cost.rows();
    const Eigen::Index m = cost.cols();
    Vector f(n);
    RowVector work(m);
    for (Eigen::Index i = 0; i < n; ++i) {
        work = log_b.transpose() + (g.transpose() - cost.row(i)) / eps;
        f[i] = -eps * log_sum_exp(work.data(), m, 1);
    }
    return f;
}

// g_j = -eps log sum_i a_i exp((f_i - C_ij) / eps)
Vector c_transform_cols(const Vector& f, const Vector& log_a, const Matrix& cost, double eps) {
    const Eigen::Index n = cost.rows();
    const Eigen::Index m = cost.cols();
    Vector g(m);
    Vector work(n);
    for (Eigen::Index j = 0; j < m; ++j) {
        work = log_a + (f - cost.col(j)) / eps;
        g[j] = -eps * log_sum_exp(work.data(), n, 1);
    }
    return g;
}

void build_kernel(const Vector& f, const Vector& g, const Matrix& cost, double eps, Matrix& kernel) {
    const double inv_eps = 1.0 / eps;
    kernel.resize(cost.rows(), cost.cols());
    for (Eigen::Index i = 0; i < cost.rows(); ++i) {
        for (Eigen::Index j = 0; j < cost.cols(); ++j) {
            kernel(i, j) = std::exp((f[i] + g[j] - cost(i, j)) * inv_eps);
        }
    }
}

std::vector<Eigen::Index> support(const Vector& w) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (w[i] > 0.0) {
            idx.push_back(i);
        }
    }
    return idx;
}

[[noreturn]] void throw_nan(double eps) {
    throw OtError("Sinkhorn iterates became NaN (epsilon = " + std::to_string(eps) + ")");
}

// l1 norm: unlike the max norm it never grows under a Sinkhorn update.
double row_violation(const Vector& marginal, const Vector& a) { return (marginal - a).lpNorm<1>(); }

// One Newton ascent step on the entropic dual, followed by an exact column
// c-transform. Sinkhorn crawls when the plan splits into nearly decoupled
// blocks; the Newton direction moves their relative offset directly. The step
// is capped at a few eps per coordinate and backtracked until the dual value
// rises (Armijo) without the row violation exceeding `current`.
bool newton_step(const Vector& a, const Vector& b, const Vector& log_a, const Vector& log_b,
                 const Matrix& cost, double eps, double current, Vector& f, Vector& g) {
    const Eigen::Index n = a.size();
    const Eigen::Index m = b.size();
    Matrix plan;
    build_kernel(f, g, cost, eps, plan);
    plan = a.asDiagonal() * plan * b.asDiagonal();
    const Vector r = plan.rowwise().sum();
    const Vector c = plan.colwise().sum().transpose();
    const double dual = a.dot(f) + b.dot(g) - eps * (plan.sum() - 1.0);

    // The last column potential is pinned to remove the constant shift.
    const Eigen::Index k = n + m - 1;
    Matrix h = Matrix::Zero(k, k);
    h.topLeftCorner(n, n).diagonal() = r;
    h.topRightCorner(n, m - 1) = plan.leftCols(m - 1);
    h.bottomLeftCorner(m - 1, n) = plan.leftCols(m - 1).transpose();
    h.bottomRightCorner(m - 1, m - 1).diagonal() = c.head(m - 1);
    Vector grad(k);
    grad << a - r, (b - c).head(m - 1);
    Vector step = eps * h.ldlt().solve(grad);
    if (!step.allFinite()) {
        return false;
    }
    const double slope = grad.dot(step);
    if (!(slope > 0.0)) {
        return false;
    }
    const double cap = 10.0 * eps;
    const double largest = step.cwiseAbs().maxCoeff();
    double t = largest > cap ? cap / largest : 1.0;
    for (int tries = 0; tries < 30; ++tries, t *= 0.5) {
        const Vector ft = f + t * step.head(n);
        const Vector gt = c_transform_cols(ft, log_a, cost, eps);
        // Columns are exact after the c-transform, so the plan has unit mass.
        if (!gt.allFinite() || a.dot(ft) + b.dot(gt) < dual + 1e-4 * t * slope) {
            continue;
        }
        const Vector marginal = a.array() * ((ft - c_transform_rows(gt, log_b, cost, eps)) / eps).array().exp();
        if (row_violation(marginal, a) <= current) {
            f = ft;
            g = gt;
            return true;
        }
    }
    return false;
}

// Sinkhorn on strictly positive weights. `f`/`g` carry the warm start in
// and the final (uncentered) potentials out.
struct CoreResult {
    int iterations = 0;
    bool converged = false;
    double violation = 0.0;
    std::vector<double> trace;
    Matrix plan;
};

CoreResult sinkhorn_core(const Vector& a, const Vector& b, const Matrix& cost, double eps,
                         const SinkhornOptions& opt, Vector& f, Vector& g) {
    const Vector log_a = a.array().log().matrix();
    const Vector log_b = b.array().log().matrix();
    f = c_transform_rows(g, log_b, cost, eps);
    if (!f.allFinite()) {
        throw_nan(eps);
    }

    Matrix kernel;
    build_kernel(f, g, cost, eps, kernel);
    Vector u = Vector::Ones(a.size());
    Vector v = Vector::Ones(b.size());
    auto absorb = [&] {
        f += eps * u.array().log().matrix();
        g += eps * v.array().log().matrix();
        u.setOnes();
        v.setOnes();
    };
    CoreResult out;
    std::vector<double> history;
    int newton_hold = 0;

    for (int it = 1; it <= opt.max_iterations; ++it) {
        out.iterations = it;
        const std::size_t h = history.size();
        const bool stalled = h >= 10 && history[h - 1] > 0.5 * history[h - 10];
        bool newton_taken = false;
        if (stalled && newton_hold <= 0) {
            absorb();
            newton_taken = newton_step(a, b, log_a, log_b, cost, eps, history.back(), f, g);
            build_kernel(f, g, cost, eps, kernel);
            if (!newton_taken) {
                newton_hold = 50;
            }
        }
        --newton_hold;

        if (!newton_taken) {
            const Vector col = kernel.transpose() * a.cwiseProduct(u);
            if (!(col.minCoeff() > kTinyMass) || !col.allFinite()) {
                f += eps * u.array().log().matrix();
                g = c_transform_cols(f, log_a, cost, eps);
                u.setOnes();
                v.setOnes();
                build_kernel(f, g, cost, eps, kernel);
            } else {
                v = col.cwiseInverse();
            }
        }

        const Vector row = kernel * b.cwiseProduct(v);
        out.violation = row_violation(a.cwiseProduct(u).cwiseProduct(row), a);
        if (std::isnan(out.violation)) {
            throw_nan(eps);
        }
        history.push_back(out.violation);
        if (opt.record_trace) {
            out.trace.push_back(out.violation);
        }
        if (out.violation <= opt.tolerance) {
            out.converged = true;
            break;
        }

        if (!(row.minCoeff() > kTinyMass) || !row.allFinite()) {
            g += eps * v.array().log().matrix();
            f = c_transform_rows(g, log_b, cost, eps);
            u.setOnes();
            v.setOnes();
            build_kernel(f, g, cost, eps, kernel);
            continue;
        }
        u = row.cwiseInverse();
        const double drift = std::max(u.array().log().abs().maxCoeff(), v.array().log().abs().maxCoeff());
        if (drift > kAbsorbThreshold) {
            absorb();
            build_kernel(f, g, cost, eps, kernel);
        }
    }

    out.plan = a.cwiseProduct(u).asDiagonal() * kernel * b.cwiseProduct(v).asDiagonal();
    absorb();
    if (!f.allFinite() || !g.allFinite()) {
        throw_nan(eps);
    }
    return out;
}

TransportResult solve(const Vector& a, const Vector& b, const Matrix& cost, double eps,
                      const SinkhornOptions& opt) {
    if (!(eps > 0.0) || !std::isfinite(eps)) {
        throw OtError("epsilon must be positive and finite (got " + std::to_string(eps) + ")");
    }
    if (cost.rows() != a.size() || cost.cols() != b.size()) {
        throw OtError("cost matrix shape does not match the marginals");
    }
    if (opt.max_iterations < 1 || !(opt.tolerance > 0.0)) {
        throw OtError("invalid Sinkhorn options");
    }
    const Eigen::Index n = a.size();
    const Eigen::Index m = b.size();
    const auto rows = support(a);
    const auto cols = support(b);
    const bool full = static_cast<Eigen::Index>(rows.size()) == n &&
                      static_cast<Eigen::Index>(cols.size()) == m;

    Matrix sub_cost;
    Vector sub_a, sub_b;
    if (!full) {
        sub_cost = cost(rows, cols);
        sub_a = a(rows);
        sub_b = b(cols);
    }
    const Matrix& c = full ? cost : sub_cost;
    const Vector& wa = full ? a : sub_a;
    const Vector& wb = full ? b : sub_b;

    Vector f;
    Vector g = Vector::Zero(wb.size());
    if (opt.initial_g && opt.initial_g->size() == m) {
        g = full ? *opt.initial_g : Vector((*opt.initial_g)(cols));
    } else if (opt.initial_f && opt.initial_f->size() == n) {
        const Vector f0 = full ? *opt.initial_f : Vector((*opt.initial_f)(rows));
        g = c_transform_cols(f0, wa.array().log().matrix(), c, eps);
    }

    CoreResult core = sinkhorn_core(wa, wb, c, eps, opt, f, g);

    TransportResult res;
    res.epsilon = eps;
    res.iterations = core.iterations;
    res.converged = core.converged;
    res.marginal_violation = core.violation;
    res.violation_trace = std::move(core.trace);
    const double mass = core.plan.sum();
    res.objective = wa.dot(f) + wb.dot(g) - eps * (mass - 1.0);
    res.value = core.plan.cwiseProduct(c).sum();

    if (full) {
        res.plan = std::move(core.plan);
        res.f = std::move(f);
        res.g = std::move(g);
    } else {
        res.plan = Matrix::Zero(n, m);
        res.f.resize(n);
        res.g.resize(m);
        // Potentials of dropped atoms: c-transform against the live side.
        const Vector log_wa = wa.array().log().matrix();
        const Vector log_wb = wb.array().log().matrix();
        const Vector f_all = c_transform_rows(g, log_wb, cost(Eigen::all, cols), eps);
        const Vector g_all = c_transform_cols(f, log_wa, cost(rows, Eigen::all), eps);
        res.f = f_all;
        res.g = g_all;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            res.f[rows[i]] = f[static_cast<Eigen::Index>(i)];
            for (std::size_t j = 0; j < cols.size(); ++j) {
                res.plan(rows[i], cols[j]) =
                    core.plan(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            }
        }
        for (std::size_t j = 0; j < cols.size(); ++j) {
            res.g[cols[j]] = g[static_cast<Eigen::Index>(j)];
        }
    }

    const double shift = a.dot(res.f);
    res.f.array() -= shift;
    res.g.array() += shift;
    return res;
}

// Self-transport OT(a, a) on a symmetric cost. The averaged update
// f <- (f + T(f)) / 2 keeps f = g throughout and converges far faster than
// alternating scaling when many atoms nearly coincide.
TransportResult solve_self(const Vector& a, const Matrix& cost, double eps, const SinkhornOptions& opt) {
    if (!(eps > 0.0) || !std::isfinite(eps)) {
        throw OtError("epsilon must be positive and finite (got " + std::to_string(eps) + ")");
    }
    if (cost.rows() != a.size() || cost.cols() != a.size()) {
        throw OtError("self-transport cost must be square and match the weights");
    }
    if (opt.max_iterations < 1 || !(opt.tolerance > 0.0)) {
        throw OtError("invalid Sinkhorn options");
    }
    const Eigen::Index n = a.size();
    const auto live = support(a);
    const bool full = static_cast<Eigen::Index>(live.size()) == n;
    const Matrix sub_cost = full ? Matrix() : Matrix(cost(live, live));
    const Vector sub_a = full ? Vector() : Vector(a(live));
    const Matrix& c = full ? cost : sub_cost;
    const Vector& w = full ? a : sub_a;
    const Vector log_w = w.array().log().matrix();

    Vector f = Vector::Zero(w.size());
    const Vector* warm = opt.initial_f ? opt.initial_f : opt.initial_g;
    if (warm && warm->size() == n) {
        f = full ? *warm : Vector((*warm)(live));
    }

    TransportResult res;
    res.epsilon = eps;
    Vector t = c_transform_rows(f, log_w, c, eps);
    for (int it = 1; it <= opt.max_iterations; ++it) {
        res.iterations = it;
        f = 0.5 * (f + t);
        t = c_transform_rows(f, log_w, c, eps);
        if (!t.allFinite()) {
            throw_nan(eps);
        }
        const Vector marginal = w.array() * ((f - t) / eps).array().exp();
        res.marginal_violation = row_violation(marginal, w);
        if (opt.record_trace) {
            res.violation_trace.push_back(res.marginal_violation);
        }
        if (res.marginal_violation <= opt.tolerance) {
            res.converged = true;
            break;
        }
    }

    Matrix plan;
    build_kernel(f, f, c, eps, plan);
    plan = w.asDiagonal() * plan * w.asDiagonal();
    res.objective = 2.0 * w.dot(f) - eps * (plan.sum() - 1.0);
    res.value = plan.cwiseProduct(c).sum();
    if (full) {
        res.plan = std::move(plan);
        res.f = f;
    } else {
        res.plan = Matrix::Zero(n, n);
        res.f = c_transform_rows(f, log_w, cost(Eigen::all, live), eps);
        for (std::size_t i = 0; i < live.size(); ++i) {
            res.f[live[i]] = f[static_cast<Eigen::Index>(i)];
            for (std::size_t j = 0; j < live.size(); ++j) {
                res.plan(live[i], live[j]) = plan(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            }
        }
    }
    res.g = res.f;
    const double shift = a.dot(res.f);
    res.f.array() -= shift;
    res.g.array() += shift;
    return res;
}

}  // namespace

void validate(const TransportProblem& p) {
    check_weights(p.a, "source weights");
    check_weights(p.b, "target weights");
    if (p.cost.rows() != p.a.size() || p.cost.cols() != p.b.size()) {
        throw OtError("cost matrix shape does not match the marginals");
    }
    if (!p.cost.allFinite() || p.cost.minCoeff() < 0.0) {
        throw OtError("cost entries must be finite and nonnegative");
    }
}

Matrix cost_matrix(const Matrix& src, const Matrix& tgt) {
    if (src.cols() != tgt.cols()) {
        throw OtError("cost_matrix: embedding widths differ (" + std::to_string(src.cols()) +
                      " vs " + std::to_string(tgt.cols()) + ")");
    }
    const Vector src_sq = src.rowwise().squaredNorm();
    const Vector tgt_sq = tgt.rowwise().squaredNorm();
    Matrix c = -2.0 * src * tgt.transpose();
    c.colwise() += src_sq;
    c.rowwise() += tgt_sq.transpose();
    // The expansion can go slightly negative; recompute tiny entries exactly
    // so that identical rows get an exact zero.
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
        for (Eigen::Index j = 0; j < c.cols(); ++j) {
            const double scale = src_sq[i] + tgt_sq[j];
            if (c(i, j) <= 1e-8 * scale) {
                c(i, j) = (src.row(i) - tgt.row(j)).squaredNorm();
            }
        }
    }
    return c.cwiseSqrt();
}

double scaled_epsilon(const Matrix& cost, double relative) {
    const double mean = cost.size() ? cost.mean() : 0.0;
    return mean > 0.0 ? relative * mean : relative;
}

TransportResult sinkhorn(const TransportProblem& p, double epsilon, const SinkhornOptions& options) {
    validate(p);
    return solve(p.a, p.b, p.cost, epsilon, options);
}

double exact_ot(const TransportProblem& p) {
    validate(p);
    const Eigen::Index n = p.a.size();
    if (p.b.size() != n || n > 7) {
        throw OtError("exact_ot: requires square problems with n <= 7");
    }
    const double uniform = 1.0 / static_cast<double>(n);
    if ((p.a.array() - uniform).abs().maxCoeff() > 1e-12 ||
        (p.b.array() - uniform).abs().maxCoeff() > 1e-12) {
        throw OtError("exact_ot: requires uniform marginals");
    }
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            total += p.cost(i, perm[static_cast<std::size_t>(i)]);
        }
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best * uniform;
}

TransportResult self_transport(const Vector& a, const Matrix& cost, double epsilon,
                               const SinkhornOptions& options) {
    validate(TransportProblem{a, a, cost});
    if (!cost.isApprox(cost.transpose())) {
        throw OtError("self_transport: cost matrix must be symmetric");
    }
    return solve_self(a, cost, epsilon, options);
}

Vector marginal_gradient(const TransportResult& res) {
    if (!res.converged) {
        throw OtError("marginal_gradient: transport result did not converge");
    }
    return res.f;
}

WeightedDistance::WeightedDistance(const Matrix& source, const Matrix& target,
                                   const Vector& target_weights, const DivergenceOptions& options)
    : options_(options),
      cost_st_(cost_matrix(source, target)),
      target_weights_(target_weights),
      self_distance_(source.rows() == target.rows() && source.cols() == target.cols() && source == target) {
    check_weights(target_weights_, "target weights");
    if (target.rows() != target_weights_.size()) {
        throw OtError("target weights do not match target point count");
    }
    epsilon_ = scaled_epsilon(cost_st_, options_.relative_epsilon);
    if (options_.kind == DistanceKind::debiased) {
        cost_ss_ = cost_matrix(source, source);
        const Matrix cost_tt = cost_matrix(target, target);
        const TransportResult tt = solve_self(target_weights_, cost_tt, epsilon_, options_.sinkhorn);
        target_self_ = tt.objective;
        target_converged_ = tt.converged;
        target_potential_ = 0.5 * (tt.f + tt.g);
    }
}

DivergenceResult WeightedDistance::evaluate(const Vector& source_weights) {
    check_weights(source_weights, "source weights");
    if (source_weights.size() != cost_st_.rows()) {
        throw OtError("source weights do not match source point count");
    }
    DivergenceResult out;
    out.epsilon = epsilon_;
    if (options_.kind == DistanceKind::debiased && self_distance_ && source_weights == target_weights_) {
        // S(b, b) = 0 and it is the minimum, so the gradient vanishes too.
        out.gradient = Vector::Zero(source_weights.size());
        out.converged = target_converged_;
        return out;
    }

    SinkhornOptions opt = options_.sinkhorn;
    opt.record_trace = false;
    opt.initial_f = warm_f_st_.size() ? &warm_f_st_ : nullptr;
    opt.initial_g = warm_g_st_.size() ? &warm_g_st_ : nullptr;
    if (!opt.initial_g && target_potential_.size()) {
        // Cold start from the target's self potential. For a self distance
        // at w = b this is already the fixed point, and it keeps the two
        // solves on the same branch when the plan is nearly block diagonal.
        opt.initial_g = &target_potential_;
    }
    const TransportResult st = solve(source_weights, target_weights_, cost_st_, epsilon_, opt);
    warm_f_st_ = st.f;
    warm_g_st_ = st.g;
    out.value = st.objective;
    out.gradient = st.f;
    out.iterations = st.iterations;
    out.converged = st.converged;

    if (options_.kind == DistanceKind::debiased) {
        opt.initial_f = warm_f_ss_.size() ? &warm_f_ss_ : nullptr;
        opt.initial_g = nullptr;
        const TransportResult ss = solve_self(source_weights, cost_ss_, epsilon_, opt);
        warm_f_ss_ = 0.5 * (ss.f + ss.g);
        out.value -= 0.5 * (ss.objective + target_self_);
        out.gradient -= 0.5 * (ss.f + ss.g);
        out.iterations += ss.iterations;
        out.converged = out.converged && ss.converged && target_converged_;
    }
    out.gradient.array() -= source_weights.dot(out.gradient);
    return out;
}

DivergenceResult sinkhorn_divergence(const Matrix& za, const Vector& wa, const Matrix& zb,
                                     const Vector& wb, const DivergenceOptions& options) {
    WeightedDistance distance(za, zb, wb, options);
    return distance.evaluate(wa);
}

}  // namespace coge
