#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "coge/types.hpp"

namespace coge {

/// Undirected edge, stored normalized with u < v.
struct Edge {
    int u = 0;
    int v = 0;

    static Edge make(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

    auto operator<=>(const Edge&) const = default;
};

enum class GraphLabel : int { cycle = 0, clique = 1 };

/// Undirected labeled graph with node features and ground-truth explanation
/// edges. Immutable once built; `validate` enforces the structural invariants.
struct Graph {
    int id = 0;
    int num_nodes = 0;
    std::vector<Edge> edges;
    Matrix features;  // num_nodes x feature_dim
    int label = 0;
    std::vector<Edge> ground_truth_edges;

    int feature_dim() const { return static_cast<int>(features.cols()); }
    int num_edges() const { return static_cast<int>(edges.size()); }

    bool operator==(const Graph& other) const;
};

class GraphError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Throws GraphError on self-loops, duplicate edges, out-of-range endpoints,
/// feature row mismatch, or ground-truth edges that are not graph edges.
/// Connectivity is checked separately (see is_connected).
void validate(const Graph& g);

bool is_connected(int num_nodes, const std::vector<Edge>& edges);

inline bool is_connected(const Graph& g) { return is_connected(g.num_nodes, g.edges); }

/// Number of ground-truth motif edges; this is the `x` of the top-x metric.
inline int motif_edge_count(const Graph& g) { return static_cast<int>(g.ground_truth_edges.size()); }

/// Index of each edge of `g` that is also in `subset`, as a membership mask.
std::vector<bool> edge_membership(const Graph& g, const std::vector<Edge>& subset);

/// Copy of `g` with node i relabeled to perm[i]. Edges stay sorted.
Graph permute_nodes(const Graph& g, const std::vector<int>& perm);

/// Copy of `g` with every edge incident to `node` removed (node is kept).
Graph isolate_node(const Graph& g, int node);

enum class Split : std::uint8_t { train, test };

struct Dataset {
    std::vector<Graph> graphs;
    std::vector<Split> splits;  // parallel to graphs
    std::optional<int> feature_dim;
    std::optional<std::uint64_t> seed;
    // Ids of loaded graphs that failed the connectivity check.
    std::vector<int> disconnected_graphs;

    std::size_t size() const { return graphs.size(); }
    std::vector<std::size_t> indices(Split split) const;

    bool operator==(const Dataset& other) const;
};

}  // namespace coge
