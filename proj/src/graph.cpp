#include "gnnir/graph.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

namespace gnnir {

Permutation::Permutation(std::vector<int> map) : map_(std::move(map)) {
    std::vector<bool> seen(map_.size(), false);
    for (int v : map_) {
        if (v < 0 || v >= static_cast<int>(map_.size()) || seen[v])
            throw std::invalid_argument("permutation is not a bijection on {0..n-1}");
        seen[v] = true;
    }
}

Permutation Permutation::identity(int n) {
    std::vector<int> m(n);
    std::iota(m.begin(), m.end(), 0);
    return Permutation(std::move(m));
}

Permutation Permutation::random(int n, std::mt19937_64& rng) {
    std::vector<int> m(n);
    std::iota(m.begin(), m.end(), 0);
    // Fisher-Yates with an explicit bounded draw so results are stable across toolchains.
    for (int i = n - 1; i > 0; i--) {
        int j = static_cast<int>(rng() % static_cast<uint64_t>(i + 1));
        std::swap(m[i], m[j]);
    }
    return Permutation(std::move(m));
}

Permutation Permutation::inverse() const {
    std::vector<int> inv(map_.size());
    for (int v = 0; v < size(); v++) inv[map_[v]] = v;
    return Permutation(std::move(inv));
}

Graph Graph::from_edge_list(int n, const std::vector<std::pair<int, int>>& edges) {
    if (n < 0) throw std::invalid_argument("vertex count must be non-negative");
    Graph g;
    g.n_ = n;
    std::set<std::pair<int, int>> uniq;
    for (size_t i = 0; i < edges.size(); i++) {
        auto [u, v] = edges[i];
        if (u < 0 || u >= n || v < 0 || v >= n)
            throw std::invalid_argument("edge " + std::to_string(i) + " (" + std::to_string(u) +
                                        "," + std::to_string(v) + ") out of range for n=" +
                                        std::to_string(n));
        if (u == v)
            throw std::invalid_argument("edge " + std::to_string(i) + " is a self-loop at " +
                                        std::to_string(u));
        uniq.emplace(std::min(u, v), std::max(u, v));
    }
    g.edges_.assign(uniq.begin(), uniq.end());
    g.adj_.assign(n, {});
    for (auto [u, v] : g.edges_) {
        g.adj_[u].push_back(v);
        g.adj_[v].push_back(u);
    }
    for (auto& nbrs : g.adj_) std::sort(nbrs.begin(), nbrs.end());
    return g;
}

bool Graph::has_edge(int u, int v) const {
    if (u == v) return false;
    const auto& nbrs = adj_[u];
    return std::binary_search(nbrs.begin(), nbrs.end(), v);
}

void Graph::set_features(std::vector<double> values, int dim) {
    if (dim <= 0 || values.size() != static_cast<size_t>(n_) * dim)
        throw std::invalid_argument("feature matrix must be n x d with d > 0");
    features_ = std::move(values);
    feature_dim_ = dim;
}

Coloring::Coloring(std::vector<int> color_of) : color_of_(std::move(color_of)) {
    if (color_of_.empty()) return;
    int max_c = *std::max_element(color_of_.begin(), color_of_.end());
    std::vector<bool> present(max_c + 1, false);
    for (int c : color_of_) {
        if (c < 0) throw std::invalid_argument("negative color id");
        present[c] = true;
    }
    for (bool p : present)
        if (!p) throw std::invalid_argument("color ids must be contiguous from 0");
    num_colors_ = max_c + 1;
}

Coloring Coloring::uniform(int n) {
    Coloring c;
    c.color_of_.assign(n, 0);
    c.num_colors_ = n > 0 ? 1 : 0;
    return c;
}

std::vector<std::vector<int>> Coloring::cells() const {
    std::vector<std::vector<int>> out(num_colors_);
    for (int v = 0; v < n(); v++) out[color_of_[v]].push_back(v);
    return out;
}

std::vector<int> Coloring::cell_sizes() const {
    std::vector<int> out(num_colors_, 0);
    for (int c : color_of_) out[c]++;
    return out;
}

Coloring Coloring::normalized() const {
    std::vector<int> remap(num_colors_, -1);
    std::vector<int> out(color_of_.size());
    int next = 0;
    for (int v = 0; v < n(); v++) {
        if (remap[color_of_[v]] < 0) remap[color_of_[v]] = next++;
        out[v] = remap[color_of_[v]];
    }
    Coloring c;
    c.color_of_ = std::move(out);
    c.num_colors_ = next;
    return c;
}

bool Coloring::same_partition(const Coloring& other) const {
    if (n() != other.n()) return false;
    return normalized().colors() == other.normalized().colors();
}

bool Coloring::refines_partition(const Coloring& coarser) const {
    if (n() != coarser.n()) return false;
    std::vector<int> image(num_colors_, -1);
    for (int v = 0; v < n(); v++) {
        int c = color_of_[v];
        if (image[c] < 0) image[c] = coarser.color_of(v);
        else if (image[c] != coarser.color_of(v)) return false;
    }
    return true;
}

bool Coloring::refines_ordered(const Coloring& coarser) const {
    if (!refines_partition(coarser)) return false;
    for (int v = 0; v < n(); v++)
        for (int w = 0; w < n(); w++)
            if (coarser.color_of(v) < coarser.color_of(w) && color_of_[v] >= color_of_[w])
                return false;
    return true;
}

Graph permute(const Graph& g, const Permutation& p) {
    if (p.size() != g.n()) throw std::invalid_argument("permutation size mismatch");
    std::vector<std::pair<int, int>> edges;
    edges.reserve(g.edges().size());
    Permutation inv = p.inverse();
    for (auto [a, b] : g.edges()) edges.emplace_back(inv(a), inv(b));
    Graph out = Graph::from_edge_list(g.n(), edges);
    if (g.has_features()) {
        int d = g.feature_dim();
        std::vector<double> f(static_cast<size_t>(g.n()) * d);
        for (int v = 0; v < g.n(); v++)
            for (int j = 0; j < d; j++) f[static_cast<size_t>(v) * d + j] = g.feature(p(v), j);
        out.set_features(std::move(f), d);
    }
    return out;
}

long long triangle_count_trace(const Graph& g) {
    int n = g.n();
    std::vector<long long> a(static_cast<size_t>(n) * n, 0);
    for (auto [u, v] : g.edges()) {
        a[static_cast<size_t>(u) * n + v] = 1;
        a[static_cast<size_t>(v) * n + u] = 1;
    }
    // trace(A^3) = sum_{i,j} A2[i][j] * A[j][i]
    std::vector<long long> a2(static_cast<size_t>(n) * n, 0);
    for (int i = 0; i < n; i++)
        for (int k = 0; k < n; k++) {
            long long aik = a[static_cast<size_t>(i) * n + k];
            if (!aik) continue;
            for (int j = 0; j < n; j++) a2[static_cast<size_t>(i) * n + j] += aik * a[static_cast<size_t>(k) * n + j];
        }
    long long tr = 0;
    for (int i = 0; i < n; i++)
        for (int j = 0; j < n; j++) tr += a2[static_cast<size_t>(i) * n + j] * a[static_cast<size_t>(j) * n + i];
    return tr / 6;
}

long long triangle_count_enum(const Graph& g) {
    long long count = 0;
    for (auto [u, v] : g.edges()) {
        const auto& nu = g.neighbors(u);
        const auto& nv = g.neighbors(v);
        size_t i = 0, j = 0;
        while (i < nu.size() && j < nv.size()) {
            if (nu[i] < nv[j]) i++;
            else if (nu[i] > nv[j]) j++;
            else {
                if (nu[i] > v) count++;  // u < v < w, each triangle counted once
                i++;
                j++;
            }
        }
    }
    return count;
}

long long triangle_count(const Graph& g) { return triangle_count_enum(g); }

namespace {

constexpr int kBruteForceLimit = 10;

void check_brute_force_size(int n, const char* what) {
    if (n > kBruteForceLimit)
        throw std::invalid_argument(std::string(what) + " is exhaustive and limited to n <= " +
                                    std::to_string(kBruteForceLimit));
}

bool maps_edges_exactly(const Graph& a, const Graph& b, const std::vector<int>& m) {
    for (auto [u, v] : a.edges())
        if (!b.has_edge(m[u], m[v])) return false;
    return true;  // equal edge counts make the forward check sufficient
}

}  // namespace

bool brute_force_isomorphic(const Graph& a, const Graph& b) {
    if (a.n() != b.n()) return false;
    check_brute_force_size(a.n(), "brute_force_isomorphic");
    if (a.num_edges() != b.num_edges()) return false;
    std::vector<int> da, db;
    for (int v = 0; v < a.n(); v++) da.push_back(a.degree(v));
    for (int v = 0; v < b.n(); v++) db.push_back(b.degree(v));
    std::vector<int> sa = da, sb = db;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa != sb) return false;

    std::vector<int> m(a.n());
    std::iota(m.begin(), m.end(), 0);
    do {
        bool degrees_match = true;
        for (int v = 0; v < a.n(); v++)
            if (da[v] != db[m[v]]) { degrees_match = false; break; }
        if (degrees_match && maps_edges_exactly(a, b, m)) return true;
    } while (std::next_permutation(m.begin(), m.end()));
    return false;
}

std::vector<Permutation> automorphisms(const Graph& g) {
    check_brute_force_size(g.n(), "automorphisms");
    std::vector<Permutation> out;
    std::vector<int> m(g.n());
    std::iota(m.begin(), m.end(), 0);
    do {
        bool degrees_match = true;
        for (int v = 0; v < g.n(); v++)
            if (g.degree(v) != g.degree(m[v])) { degrees_match = false; break; }
        if (degrees_match && maps_edges_exactly(g, g, m)) out.emplace_back(m);
    } while (std::next_permutation(m.begin(), m.end()));
    return out;
}

Coloring orbit_partition(const Graph& g) {
    check_brute_force_size(g.n(), "orbit_partition");
    std::vector<int> parent(g.n());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int v) {
        while (parent[v] != v) v = parent[v] = parent[parent[v]];
        return v;
    };
    for (const auto& p : automorphisms(g))
        for (int v = 0; v < g.n(); v++) {
            int a = find(v), b = find(p(v));
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    std::vector<int> remap(g.n(), -1);
    std::vector<int> color(g.n());
    int next = 0;
    for (int v = 0; v < g.n(); v++) {
        int root = find(v);
        if (remap[root] < 0) remap[root] = next++;
        color[v] = remap[root];
    }
    return Coloring(std::move(color));
}

}  // namespace gnnir
