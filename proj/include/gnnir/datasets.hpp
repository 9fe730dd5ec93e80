#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gnnir/graph.hpp"

namespace gnnir {

struct LabeledGraph {
    Graph graph;
    int label = 0;
    std::string split;  // "", "train", "val", "test" or "test_large"
};

// 4-regular circulant: cycle edges plus skip edges at distance r.
Graph gen_csl(int m, int r);

inline constexpr int kCslVertices = 41;
const std::vector<int>& csl_skips();  // the ten class-defining skip lengths

// 150 graphs: 15 seeded vertex permutations of each base circulant,
// labeled 0..9 by skip class. Featureless; splits assigned by the fold logic.
std::vector<LabeledGraph> gen_csl_dataset(uint64_t seed);

struct TrianglesSpec {
    int n_train = 3000;
    int n_val = 500;
    int n_test = 500;
    int n_test_large = 0;
    int min_nodes = 5;
    int max_nodes = 25;
    int large_min_nodes = 26;
    int large_max_nodes = 100;
    int degree_buckets = 16;  // one-hot degree features; last bucket collects overflow
    long long max_attempts_per_graph = 200000;
    uint64_t seed = 0;
};

// Random graphs labeled by triangle count, rejection-sampled so each split
// holds exactly equal counts of labels 1..10. Feature width is
// degree_buckets + 1. Split sizes must divide by 10.
std::vector<LabeledGraph> gen_triangles_dataset(const TrianglesSpec& spec);

// Nonisomorphic pairs that 1-WL cannot separate, verified by both oracles
// at construction: (C6, two disjoint triangles) and (3-prism, K3,3).
std::vector<std::pair<Graph, Graph>> gen_hard_pairs();

// JSON-lines IO: {"n", "edges", optional "features", "label", optional "split"}.
std::vector<LabeledGraph> read_dataset(const std::string& path);
void write_dataset(const std::string& path, const std::vector<LabeledGraph>& items);

Graph read_graph_json(const std::string& path);  // single-graph file for CLI diagnostics

}  // namespace gnnir
