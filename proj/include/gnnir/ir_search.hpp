#pragma once

#include <string>
#include <vector>

#include "gnnir/graph.hpp"
#include "gnnir/wl.hpp"

namespace gnnir {

enum class TargetCellPolicy { SmallestNonSingleton, Largest };

// Returns the color id of the chosen non-singleton cell. Ties go to the
// smallest color id, which for first-appearance-ordered colorings is the cell
// with the smallest minimum vertex. Throws if the coloring is discrete.
int select_target_cell(const Coloring& c, TargetCellPolicy policy);

// Moves v into a fresh singleton placed immediately before its former cell,
// so the result is strictly finer and order-consistent with c.
// Throws if v is already a singleton.
Coloring individualize(const Coloring& c, int v);

struct SearchLimits {
    long long max_leaves = 10000;
    int max_depth = 32;
};

struct SearchTree {
    struct Node {
        Coloring coloring;
        int individualized = -1;  // vertex fixed on the edge into this node, -1 at root
        std::vector<Node> children;
        bool is_leaf() const { return coloring.is_discrete(); }
    };
    Node root;
    long long node_count = 0;
    long long leaf_count = 0;
    int depth = 0;  // deepest individualization level reached
    bool truncated = false;
};

// Full individualization-refinement tree. Every node holds the refined
// (equitable) coloring; children individualize each vertex of the target cell
// in ascending order. Expansion stops, with the truncated flag set, once
// either limit is hit.
SearchTree build_search_tree(const Graph& g,
                             TargetCellPolicy policy = TargetCellPolicy::SmallestNonSingleton,
                             SearchLimits limits = {});

// Canonical form: the lexicographically maximal upper-triangular adjacency
// bit string over all leaves of the unpruned search tree. Two graphs share a
// canonical form iff they are isomorphic. Single-vertex and empty graphs give
// an empty string.
std::string canonical_form(const Graph& g,
                           TargetCellPolicy policy = TargetCellPolicy::SmallestNonSingleton);

}  // namespace gnnir
