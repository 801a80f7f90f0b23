#pragma once

#include <cstdint>
#include <stdexcept>

#include "coge/graph.hpp"

namespace coge {

/// Parameters of the synthetic cycles-vs-cliques benchmark.
///
/// Every graph is a uniform random labelled tree with one or more motifs
/// attached by a single bridge edge each: cycles for label 0, cliques for
/// label 1. Motif sizes below 4 are rejected because a triangle is both a
/// cycle and a clique, which would make the label ambiguous.
struct GeneratorConfig {
    int tree_min_nodes = 8;
    int tree_max_nodes = 15;
    int motifs_min = 1;
    int motifs_max = 2;
    int cycle_min = 4;
    int cycle_max = 8;
    int clique_min = 4;
    int clique_max = 6;
    int feature_dim = 10;
    double train_fraction = 0.8;
    bool shuffle_node_ids = true;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Throws ConfigError describing the first invalid range.
void validate(const GeneratorConfig& config);

/// Deterministic in (n_graphs, seed, config). Requires n_graphs >= 2 and even;
/// graph i has label i % 2, so classes are exactly balanced.
Dataset generate_cycliq(int n_graphs, std::uint64_t seed, const GeneratorConfig& config = {});

/// Decodes a Prüfer sequence over nodes [0, sequence.size() + 2) into tree edges.
std::vector<Edge> tree_from_pruefer(const std::vector<int>& sequence);

}  // namespace coge
