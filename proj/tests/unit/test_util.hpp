#pragma once

#include <random>
#include <utility>
#include <vector>

#include "gnnir/graph.hpp"

namespace testutil {

using gnnir::Graph;

inline Graph cycle(int n) {
    std::vector<std::pair<int, int>> e;
    for (int i = 0; i < n; ++i) e.push_back({i, (i + 1) % n});
    return Graph::from_edge_list(n, e);
}

inline Graph path(int n) {
    std::vector<std::pair<int, int>> e;
    for (int i = 0; i + 1 < n; ++i) e.push_back({i, i + 1});
    return Graph::from_edge_list(n, e);
}

inline Graph complete(int n) {
    std::vector<std::pair<int, int>> e;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) e.push_back({i, j});
    return Graph::from_edge_list(n, e);
}

inline Graph complete_bipartite(int a, int b) {
    std::vector<std::pair<int, int>> e;
    for (int i = 0; i < a; ++i)
        for (int j = 0; j < b; ++j) e.push_back({i, a + j});
    return Graph::from_edge_list(a + b, e);
}

// Two disjoint triangles on 6 vertices.
inline Graph two_triangles() {
    return Graph::from_edge_list(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}});
}

// Triangular prism: two triangles joined by a perfect matching.
inline Graph prism() {
    return Graph::from_edge_list(
        6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}, {0, 3}, {1, 4}, {2, 5}});
}

// Star with `leaves` outer vertices, center 0.
inline Graph star(int leaves) {
    std::vector<std::pair<int, int>> e;
    for (int i = 1; i <= leaves; ++i) e.push_back({0, i});
    return Graph::from_edge_list(leaves + 1, e);
}

// Triangle with a pendant vertex hanging off vertex 2.
inline Graph paw() {
    return Graph::from_edge_list(4, {{0, 1}, {1, 2}, {0, 2}, {2, 3}});
}

inline Graph erdos_renyi(int n, double p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::pair<int, int>> e;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (u(rng) < p) e.push_back({i, j});
    return Graph::from_edge_list(n, e);
}

// Graph whose upper-triangular adjacency bits are the binary digits of `code`.
inline Graph from_code(int n, unsigned long long code) {
    std::vector<std::pair<int, int>> e;
    int bit = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j, ++bit)
            if (code >> bit & 1ULL) e.push_back({i, j});
    return Graph::from_edge_list(n, e);
}

}  // namespace testutil
