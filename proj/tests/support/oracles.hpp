#pragma once

// Reference computations for tests. Nothing here calls the code under test
// except through the function objects passed in.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <vector>

#include "coge/graph.hpp"
#include "coge/types.hpp"

namespace coge::testing {

/// Minimum-cost perfect matching by Heap's algorithm, scaled by 1/n.
/// Enumerates permutations in a different order from std::next_permutation.
inline double heap_assignment(const Matrix& cost) {
    const int n = static_cast<int>(cost.rows());
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    auto total = [&] {
        double t = 0.0;
        for (int i = 0; i < n; ++i) {
            t += cost(i, perm[static_cast<std::size_t>(i)]);
        }
        return t;
    };
    double best = total();
    std::vector<int> c(static_cast<std::size_t>(n), 0);
    int i = 1;
    while (i < n) {
        if (c[static_cast<std::size_t>(i)] < i) {
            std::swap(perm[static_cast<std::size_t>(i % 2 == 0 ? 0 : c[static_cast<std::size_t>(i)])],
                      perm[static_cast<std::size_t>(i)]);
            best = std::min(best, total());
            ++c[static_cast<std::size_t>(i)];
            i = 1;
        } else {
            c[static_cast<std::size_t>(i)] = 0;
            ++i;
        }
    }
    return best / n;
}

/// Central difference of f along `direction` at x.
inline double directional_fd(const std::function<double(const Vector&)>& f, const Vector& x,
                             const Vector& direction, double h) {
    return (f(x + h * direction) - f(x - h * direction)) / (2.0 * h);
}

/// Entrywise central-difference gradient.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
    Vector g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vector e = Vector::Zero(x.size());
        e[i] = 1.0;
        g[i] = directional_fd(f, x, e, h);
    }
    return g;
}

/// max_i |a_i - b_i| / max(1, |b_i|)
inline double max_relative_error(const Vector& a, const Vector& b) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
    }
    return worst;
}

/// Breadth-first connectivity check.
inline bool bfs_connected(int n, const std::vector<Edge>& edges) {
    if (n == 0) {
        return true;
    }
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (const Edge& e : edges) {
        adj[static_cast<std::size_t>(e.u)].push_back(e.v);
        adj[static_cast<std::size_t>(e.v)].push_back(e.u);
    }
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int count = 1;
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (const int v : adj[static_cast<std::size_t>(u)]) {
            if (!seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = 1;
                ++count;
                q.push(v);
            }
        }
    }
    return count == n;
}

inline std::vector<std::vector<char>> adjacency(int n, const std::vector<Edge>& edges) {
    std::vector<std::vector<char>> a(static_cast<std::size_t>(n), std::vector<char>(static_cast<std::size_t>(n), 0));
    for (const Edge& e : edges) {
        a[static_cast<std::size_t>(e.u)][static_cast<std::size_t>(e.v)] = 1;
        a[static_cast<std::size_t>(e.v)][static_cast<std::size_t>(e.u)] = 1;
    }
    return a;
}

inline int triangle_count(int n, const std::vector<Edge>& edges) {
    const auto a = adjacency(n, edges);
    int count = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            for (int k = j + 1; k < n; ++k) {
                count += a[i][j] && a[j][k] && a[i][k] ? 1 : 0;
            }
        }
    }
    return count;
}

/// Random point set with rows drawn uniformly from [0, 1)^d.
inline Matrix random_points(int n, int d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix m(n, d);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = u(rng);
    }
    return m;
}

/// Random point on the open simplex.
inline Vector random_simplex(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.2, 1.0);
    Vector w(n);
    for (int i = 0; i < n; ++i) {
        w[i] = u(rng);
    }
    return w / w.sum();
}

/// Random direction with zero sum (tangent to the simplex), unit max-norm.
inline Vector random_tangent(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Vector v(n);
    for (int i = 0; i < n; ++i) {
        v[i] = g(rng);
    }
    v.array() -= v.mean();
    return v / v.cwiseAbs().maxCoeff();
}

}  // namespace coge::testing
