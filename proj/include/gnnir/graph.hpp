#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace gnnir {

// Bijection on {0..n-1}. operator() maps an index through the permutation.
class Permutation {
  public:
    explicit Permutation(std::vector<int> map);
    static Permutation identity(int n);
    static Permutation random(int n, std::mt19937_64& rng);

    int operator()(int v) const { return map_[v]; }
    int size() const { return static_cast<int>(map_.size()); }
    Permutation inverse() const;
    const std::vector<int>& map() const { return map_; }

  private:
    std::vector<int> map_;
};

// Simple undirected graph with optional dense node features (row-major n x d).
class Graph {
  public:
    Graph() = default;
    static Graph from_edge_list(int n, const std::vector<std::pair<int, int>>& edges);

    int n() const { return n_; }
    int num_edges() const { return static_cast<int>(edges_.size()); }
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }
    const std::vector<int>& neighbors(int v) const { return adj_[v]; }
    int degree(int v) const { return static_cast<int>(adj_[v].size()); }
    bool has_edge(int u, int v) const;

    bool has_features() const { return feature_dim_ > 0; }
    int feature_dim() const { return feature_dim_; }
    const std::vector<double>& features() const { return features_; }
    double feature(int v, int j) const { return features_[static_cast<size_t>(v) * feature_dim_ + j]; }
    void set_features(std::vector<double> values, int dim);

  private:
    int n_ = 0;
    std::vector<std::pair<int, int>> edges_;     // normalized u < v, sorted
    std::vector<std::vector<int>> adj_;          // sorted neighbor lists
    std::vector<double> features_;
    int feature_dim_ = 0;
};

// Vertex coloring with contiguous color ids 0..num_colors-1.
class Coloring {
  public:
    Coloring() = default;
    explicit Coloring(std::vector<int> color_of);
    static Coloring uniform(int n);

    int n() const { return static_cast<int>(color_of_.size()); }
    int color_of(int v) const { return color_of_[v]; }
    int num_colors() const { return num_colors_; }
    const std::vector<int>& colors() const { return color_of_; }

    // Cells ordered by color id, members ascending.
    std::vector<std::vector<int>> cells() const;
    std::vector<int> cell_sizes() const;
    bool is_discrete() const { return num_colors_ == n(); }

    // Renumbers colors by first appearance under vertex order 0..n-1.
    Coloring normalized() const;
    // Partition equality ignoring color ids.
    bool same_partition(const Coloring& other) const;
    // True if every cell of this coloring lies inside one cell of `coarser`.
    bool refines_partition(const Coloring& coarser) const;
    // Order-aware: partitions refine and coarser(v) < coarser(w) implies this(v) < this(w).
    bool refines_ordered(const Coloring& coarser) const;

    bool operator==(const Coloring& other) const = default;

  private:
    std::vector<int> color_of_;
    int num_colors_ = 0;
};

// Output vertex u corresponds to input vertex p(u): edge (u,v) present in the
// result iff (p(u),p(v)) is an input edge; features move the same way.
Graph permute(const Graph& g, const Permutation& p);

long long triangle_count_trace(const Graph& g);  // trace(A^3)/6 via dense matrix powers
long long triangle_count_enum(const Graph& g);   // ordered triple enumeration
long long triangle_count(const Graph& g);        // enum route; both routes must agree

// Exhaustive isomorphism test over all n! vertex maps. Guarded to n <= 10.
bool brute_force_isomorphic(const Graph& a, const Graph& b);

// All automorphisms by exhaustive search. Guarded to n <= 10.
std::vector<Permutation> automorphisms(const Graph& g);

// Orbit partition of the automorphism group, colors in first-appearance order.
Coloring orbit_partition(const Graph& g);

}  // namespace gnnir
