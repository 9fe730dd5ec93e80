#include "gnnir/ir_search.hpp"

#include <algorithm>
#include <stdexcept>

namespace gnnir {

namespace {

RefineOptions search_refine_options() {
    RefineOptions opts;
    opts.order = ColorOrder::Signature;  // label-independent ids keep the tree equivariant
    return opts;
}

std::string leaf_string(const Graph& g, const Coloring& discrete) {
    int n = g.n();
    std::vector<int> vertex_at(n);
    for (int v = 0; v < n; v++) vertex_at[discrete.color_of(v)] = v;
    std::string bits;
    bits.reserve(static_cast<size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; i++)
        for (int j = i + 1; j < n; j++)
            bits.push_back(g.has_edge(vertex_at[i], vertex_at[j]) ? '1' : '0');
    return bits;
}

}  // namespace

int select_target_cell(const Coloring& c, TargetCellPolicy policy) {
    auto sizes = c.cell_sizes();
    int best = -1;
    for (int cell = 0; cell < c.num_colors(); cell++) {
        int s = sizes[cell];
        if (s < 2) continue;
        if (best < 0) { best = cell; continue; }
        if (policy == TargetCellPolicy::SmallestNonSingleton ? s < sizes[best] : s > sizes[best])
            best = cell;
    }
    if (best < 0) throw std::invalid_argument("coloring is discrete; no target cell");
    return best;
}

Coloring individualize(const Coloring& c, int v) {
    if (v < 0 || v >= c.n()) throw std::invalid_argument("vertex out of range");
    int vc = c.color_of(v);
    auto sizes = c.cell_sizes();
    if (sizes[vc] < 2) throw std::invalid_argument("vertex is already a singleton");
    std::vector<int> color(c.n());
    for (int w = 0; w < c.n(); w++) {
        if (w == v) color[w] = vc;
        else color[w] = c.color_of(w) >= vc ? c.color_of(w) + 1 : c.color_of(w);
    }
    return Coloring(std::move(color));
}

namespace {

struct TreeBuilder {
    const Graph& g;
    TargetCellPolicy policy;
    SearchLimits limits;
    SearchTree tree;

    void expand(SearchTree::Node& node, int depth) {
        tree.node_count++;
        tree.depth = std::max(tree.depth, depth);
        if (node.is_leaf()) {
            tree.leaf_count++;
            return;
        }
        if (depth >= limits.max_depth) {
            tree.truncated = true;
            return;
        }
        int cell = select_target_cell(node.coloring, policy);
        for (int v = 0; v < node.coloring.n(); v++) {
            if (node.coloring.color_of(v) != cell) continue;
            if (tree.leaf_count >= limits.max_leaves) {
                tree.truncated = true;
                return;
            }
            SearchTree::Node child;
            child.individualized = v;
            child.coloring =
                wl_refine(g, individualize(node.coloring, v), search_refine_options()).coloring;
            node.children.push_back(std::move(child));
            expand(node.children.back(), depth + 1);
        }
    }
};

}  // namespace

SearchTree build_search_tree(const Graph& g, TargetCellPolicy policy, SearchLimits limits) {
    TreeBuilder builder{g, policy, limits, {}};
    builder.tree.root.coloring = wl_refine(g, Coloring::uniform(g.n()), search_refine_options()).coloring;
    builder.expand(builder.tree.root, 0);
    return builder.tree;
}

namespace {

void canon_dfs(const Graph& g, const Coloring& c, TargetCellPolicy policy, std::string& best) {
    if (c.is_discrete()) {
        std::string s = leaf_string(g, c);
        if (s > best) best = std::move(s);
        return;
    }
    int cell = select_target_cell(c, policy);
    for (int v = 0; v < c.n(); v++) {
        if (c.color_of(v) != cell) continue;
        canon_dfs(g, wl_refine(g, individualize(c, v), search_refine_options()).coloring, policy, best);
    }
}

}  // namespace

std::string canonical_form(const Graph& g, TargetCellPolicy policy) {
    if (g.n() <= 1) return "";
    Coloring root = wl_refine(g, Coloring::uniform(g.n()), search_refine_options()).coloring;
    // Seed below any real leaf so the first one always wins.
    std::string best(static_cast<size_t>(g.n()) * (g.n() - 1) / 2, '\0');
    canon_dfs(g, root, policy, best);
    return best;
}

}  // namespace gnnir
