#include "coge/graph.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace coge {

bool Graph::operator==(const Graph& other) const {
    return id == other.id && num_nodes == other.num_nodes && edges == other.edges &&
           label == other.label && ground_truth_edges == other.ground_truth_edges &&
           features.rows() == other.features.rows() && features.cols() == other.features.cols() &&
           features == other.features;
}

void validate(const Graph& g) {
    const std::string where = "graph " + std::to_string(g.id) + ": ";
    if (g.num_nodes < 0) {
        throw GraphError(where + "negative node count");
    }
    if (g.features.rows() != g.num_nodes) {
        throw GraphError(where + "feature rows (" + std::to_string(g.features.rows()) +
                         ") != node count (" + std::to_string(g.num_nodes) + ")");
    }
    std::set<Edge> seen;
    for (const Edge& e : g.edges) {
        if (e.u < 0 || e.v < 0 || e.u >= g.num_nodes || e.v >= g.num_nodes) {
            throw GraphError(where + "edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                             ") has endpoint outside [0, " + std::to_string(g.num_nodes) + ")");
        }
        if (e.u == e.v) {
            throw GraphError(where + "self-loop at node " + std::to_string(e.u));
        }
        if (!seen.insert(Edge::make(e.u, e.v)).second) {
            throw GraphError(where + "duplicate edge (" + std::to_string(e.u) + "," +
                             std::to_string(e.v) + ")");
        }
    }
    for (const Edge& e : g.ground_truth_edges) {
        if (!seen.contains(Edge::make(e.u, e.v))) {
            throw GraphError(where + "ground-truth edge (" + std::to_string(e.u) + "," +
                             std::to_string(e.v) + ") is not an edge of the graph");
        }
    }
    if (g.label != 0 && g.label != 1) {
        throw GraphError(where + "label must be 0 or 1");
    }
}

bool is_connected(int num_nodes, const std::vector<Edge>& edges) {
    if (num_nodes <= 1) {
        return true;
    }
    std::vector<int> parent(static_cast<std::size_t>(num_nodes));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    int components = num_nodes;
    for (const Edge& e : edges) {
        const int a = find(e.u);
        const int b = find(e.v);
        if (a != b) {
            parent[a] = b;
            --components;
        }
    }
    return components == 1;
}

std::vector<bool> edge_membership(const Graph& g, const std::vector<Edge>& subset) {
    const std::set<Edge> lookup(subset.begin(), subset.end());
    std::vector<bool> mask(g.edges.size());
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        mask[i] = lookup.contains(g.edges[i]);
    }
    return mask;
}

Graph permute_nodes(const Graph& g, const std::vector<int>& perm) {
    Graph out;
    out.id = g.id;
    out.num_nodes = g.num_nodes;
    out.label = g.label;
    out.features.resize(g.features.rows(), g.features.cols());
    for (int i = 0; i < g.num_nodes; ++i) {
        out.features.row(perm[i]) = g.features.row(i);
    }
    auto remap = [&](const std::vector<Edge>& in) {
        std::vector<Edge> result;
        result.reserve(in.size());
        for (const Edge& e : in) {
            result.push_back(Edge::make(perm[e.u], perm[e.v]));
        }
        std::sort(result.begin(), result.end());
        return result;
    };
    out.edges = remap(g.edges);
    out.ground_truth_edges = remap(g.ground_truth_edges);
    return out;
}

Graph isolate_node(const Graph& g, int node) {
    Graph out = g;
    std::erase_if(out.edges, [node](const Edge& e) { return e.u == node || e.v == node; });
    std::erase_if(out.ground_truth_edges,
                  [node](const Edge& e) { return e.u == node || e.v == node; });
    return out;
}

std::vector<std::size_t> Dataset::indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        if (splits[i] == split) {
            out.push_back(i);
        }
    }
    return out;
}

bool Dataset::operator==(const Dataset& other) const {
    return graphs == other.graphs && splits == other.splits && feature_dim == other.feature_dim &&
           seed == other.seed;
}

}  // namespace coge
