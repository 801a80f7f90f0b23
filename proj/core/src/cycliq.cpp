#include "coge/cycliq.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "coge/rng.hpp"

namespace coge {
namespace {

void require_range(const char* name, int lo, int hi) {
    if (lo > hi) {
        throw ConfigError(std::string(name) + ": min (" + std::to_string(lo) + ") exceeds max (" +
                          std::to_string(hi) + ")");
    }
}

}  // namespace

void validate(const GeneratorConfig& c) {
    if (c.cycle_min < 4) {
        throw ConfigError("cycle length must be >= 4 (got " + std::to_string(c.cycle_min) +
                          "): a 3-cycle is also a 3-clique, so cycle and clique labels would be "
                          "ambiguous");
    }
    if (c.clique_min < 4) {
        throw ConfigError("clique size must be >= 4 (got " + std::to_string(c.clique_min) +
                          "): a 3-clique is also a 3-cycle, so cycle and clique labels would be "
                          "ambiguous");
    }
    if (c.tree_min_nodes < 1) {
        throw ConfigError("tree must have at least one node");
    }
    if (c.motifs_min < 1) {
        throw ConfigError("every graph needs at least one motif");
    }
    if (c.feature_dim < 1) {
        throw ConfigError("feature dimension must be positive");
    }
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) {
        throw ConfigError("train fraction must lie in (0, 1)");
    }
    require_range("tree size", c.tree_min_nodes, c.tree_max_nodes);
    require_range("motif count", c.motifs_min, c.motifs_max);
    require_range("cycle length", c.cycle_min, c.cycle_max);
    require_range("clique size", c.clique_min, c.clique_max);
}

std::vector<Edge> tree_from_pruefer(const std::vector<int>& sequence) {
    const int n = static_cast<int>(sequence.size()) + 2;
    std::vector<int> degree(static_cast<std::size_t>(n), 1);
    for (const int x : sequence) {
        ++degree[x];
    }
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(n - 1));
    for (const int x : sequence) {
        const int leaf = static_cast<int>(
            std::find(degree.begin(), degree.end(), 1) - degree.begin());
        edges.push_back(Edge::make(leaf, x));
        --degree[leaf];
        --degree[x];
    }
    int a = -1;
    for (int i = 0; i < n; ++i) {
        if (degree[i] == 1) {
            if (a < 0) {
                a = i;
            } else {
                edges.push_back(Edge::make(a, i));
                break;
            }
        }
    }
    return edges;
}

namespace {

Graph generate_graph(int id, int label, const GeneratorConfig& c, Rng& rng) {
    const int tree_nodes = rng.uniform_int(c.tree_min_nodes, c.tree_max_nodes);
    std::vector<Edge> edges;
    if (tree_nodes >= 2) {
        std::vector<int> pruefer(static_cast<std::size_t>(tree_nodes - 2));
        for (int& x : pruefer) {
            x = rng.uniform_int(0, tree_nodes - 1);
        }
        edges = tree_from_pruefer(pruefer);
    }

    std::vector<Edge> truth;
    int n = tree_nodes;
    const int motifs = rng.uniform_int(c.motifs_min, c.motifs_max);
    for (int m = 0; m < motifs; ++m) {
        const int first = n;
        if (label == static_cast<int>(GraphLabel::cycle)) {
            const int len = rng.uniform_int(c.cycle_min, c.cycle_max);
            for (int i = 0; i < len; ++i) {
                truth.push_back(Edge::make(first + i, first + (i + 1) % len));
            }
            n += len;
        } else {
            const int size = rng.uniform_int(c.clique_min, c.clique_max);
            for (int i = 0; i < size; ++i) {
                for (int j = i + 1; j < size; ++j) {
                    truth.push_back(Edge::make(first + i, first + j));
                }
            }
            n += size;
        }
        const int motif_node = first + rng.uniform_int(0, n - first - 1);
        const int tree_node = rng.uniform_int(0, tree_nodes - 1);
        edges.push_back(Edge::make(motif_node, tree_node));
    }
    edges.insert(edges.end(), truth.begin(), truth.end());

    Graph g;
    g.id = id;
    g.num_nodes = n;
    g.label = label;
    g.features = Matrix::Ones(n, c.feature_dim);
    g.edges = std::move(edges);
    g.ground_truth_edges = std::move(truth);
    std::sort(g.edges.begin(), g.edges.end());
    std::sort(g.ground_truth_edges.begin(), g.ground_truth_edges.end());

    if (c.shuffle_node_ids) {
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(std::span<int>(perm));
        g = permute_nodes(g, perm);
    }
    return g;
}

}  // namespace

Dataset generate_cycliq(int n_graphs, std::uint64_t seed, const GeneratorConfig& config) {
    validate(config);
    if (n_graphs < 2 || n_graphs % 2 != 0) {
        throw ConfigError("number of graphs must be even and >= 2 (got " +
                          std::to_string(n_graphs) + ")");
    }
    Rng rng(seed);
    Dataset ds;
    ds.seed = seed;
    ds.feature_dim = config.feature_dim;
    ds.graphs.reserve(static_cast<std::size_t>(n_graphs));
    for (int i = 0; i < n_graphs; ++i) {
        ds.graphs.push_back(generate_graph(i, i % 2, config, rng));
    }

    std::vector<std::size_t> order(ds.graphs.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
    const auto n_train = static_cast<std::size_t>(std::lround(config.train_fraction * n_graphs));
    ds.splits.assign(ds.graphs.size(), Split::test);
    for (std::size_t i = 0; i < n_train; ++i) {
        ds.splits[order[i]] = Split::train;
    }
    return ds;
}

}  // namespace coge
