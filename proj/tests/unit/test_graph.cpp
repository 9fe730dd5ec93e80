#include <stdexcept>
#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "gnnir/graph.hpp"
#include "test_util.hpp"

using namespace gnnir;
using namespace testutil;

TEST_CASE("permutation basics") {
    Permutation p({2, 0, 1});
    CHECK(p(0) == 2);
    CHECK(p(1) == 0);
    Permutation inv = p.inverse();
    for (int v = 0; v < 3; ++v) CHECK(inv(p(v)) == v);
    CHECK_THROWS_AS(Permutation({0, 0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(Permutation({0, 3, 1}), std::invalid_argument);

    std::mt19937_64 rng(11);
    Permutation r1 = Permutation::random(8, rng);
    std::mt19937_64 rng2(11);
    Permutation r2 = Permutation::random(8, rng2);
    CHECK(r1.map() == r2.map());
}

TEST_CASE("edge list normalization and validation") {
    Graph g = Graph::from_edge_list(4, {{3, 1}, {0, 1}, {1, 3}, {2, 0}});
    CHECK(g.num_edges() == 3);  // duplicate (3,1)/(1,3) collapses
    CHECK(g.has_edge(1, 3));
    CHECK(g.has_edge(3, 1));
    CHECK_FALSE(g.has_edge(0, 3));
    CHECK(g.degree(1) == 2);
    std::vector<std::pair<int, int>> sorted_edges = g.edges();
    CHECK(std::is_sorted(sorted_edges.begin(), sorted_edges.end()));
    for (auto [u, v] : sorted_edges) CHECK(u < v);

    CHECK_THROWS_AS(Graph::from_edge_list(3, {{0, 3}}), std::invalid_argument);
    CHECK_THROWS_AS(Graph::from_edge_list(3, {{1, 1}}), std::invalid_argument);
    CHECK_THROWS_AS(Graph::from_edge_list(-1, {}), std::invalid_argument);
}

TEST_CASE("features attach and validate") {
    Graph g = path(3);
    g.set_features({1, 2, 3, 4, 5, 6}, 2);
    CHECK(g.feature_dim() == 2);
    CHECK(g.feature(1, 0) == 3);
    CHECK(g.feature(2, 1) == 6);
    CHECK_THROWS_AS(g.set_features({1, 2, 3}, 2), std::invalid_argument);
}

TEST_CASE("permute relabels edges and moves features") {
    Graph g = path(4);  // 0-1-2-3
    g.set_features({10, 11, 12, 13}, 1);
    Permutation p({2, 0, 3, 1});
    Graph h = permute(g, p);
    CHECK(h.n() == 4);
    CHECK(h.num_edges() == 3);
    // Edge (u,v) in h iff (p(u),p(v)) in g.
    for (int u = 0; u < 4; ++u)
        for (int v = 0; v < 4; ++v)
            if (u != v) CHECK(h.has_edge(u, v) == g.has_edge(p(u), p(v)));
    for (int u = 0; u < 4; ++u) CHECK(h.feature(u, 0) == g.feature(p(u), 0));
}

TEST_CASE("triangle counts on known graphs") {
    CHECK(triangle_count(complete(3)) == 1);
    CHECK(triangle_count(complete(4)) == 4);
    CHECK(triangle_count(complete(5)) == 10);
    CHECK(triangle_count(cycle(6)) == 0);
    CHECK(triangle_count(complete_bipartite(3, 3)) == 0);
    CHECK(triangle_count(two_triangles()) == 2);
    CHECK(triangle_count(prism()) == 2);
    CHECK(triangle_count(paw()) == 1);
    CHECK(triangle_count(Graph::from_edge_list(0, {})) == 0);
}

TEST_CASE("triangle count routes agree on random graphs") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 60; ++trial) {
        int n = 3 + static_cast<int>(rng() % 20);
        Graph g = erdos_renyi(n, 0.4, rng);
        CHECK(triangle_count_trace(g) == triangle_count_enum(g));
    }
}

TEST_CASE("brute force isomorphism") {
    CHECK(brute_force_isomorphic(cycle(6), cycle(6)));
    CHECK_FALSE(brute_force_isomorphic(cycle(6), two_triangles()));
    CHECK_FALSE(brute_force_isomorphic(prism(), complete_bipartite(3, 3)));
    CHECK_FALSE(brute_force_isomorphic(path(4), star(3)));

    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 4 + static_cast<int>(rng() % 4);
        Graph g = erdos_renyi(n, 0.5, rng);
        Graph h = permute(g, Permutation::random(n, rng));
        CHECK(brute_force_isomorphic(g, h));
    }
}

TEST_CASE("automorphism group sizes") {
    CHECK(automorphisms(complete(3)).size() == 6);
    CHECK(automorphisms(complete(4)).size() == 24);
    CHECK(automorphisms(path(3)).size() == 2);
    CHECK(automorphisms(cycle(4)).size() == 8);    // dihedral
    CHECK(automorphisms(cycle(5)).size() == 10);
    CHECK(automorphisms(star(3)).size() == 6);     // permute the leaves
    CHECK(automorphisms(paw()).size() == 2);
    CHECK(automorphisms(complete_bipartite(3, 3)).size() == 72);  // 3! * 3! * 2
}

TEST_CASE("orbit partition") {
    // Paw: degree-2 triangle corners {0,1} form one orbit, hub 2 and pendant 3
    // are fixed.
    Coloring orb = orbit_partition(paw());
    CHECK(orb.num_colors() == 3);
    CHECK(orb.color_of(0) == orb.color_of(1));
    CHECK(orb.color_of(2) != orb.color_of(0));
    CHECK(orb.color_of(3) != orb.color_of(2));

    CHECK(orbit_partition(cycle(6)).num_colors() == 1);
    CHECK(orbit_partition(complete(4)).num_colors() == 1);

    Coloring st = orbit_partition(star(4));
    CHECK(st.num_colors() == 2);
    CHECK(st.cell_sizes() == std::vector<int>{1, 4});
}

TEST_CASE("coloring helpers") {
    Coloring c({1, 0, 1, 2});
    CHECK(c.num_colors() == 3);
    CHECK(c.cells() == std::vector<std::vector<int>>{{1}, {0, 2}, {3}});
    CHECK(c.normalized().colors() == std::vector<int>{0, 1, 0, 2});
    CHECK(c.same_partition(Coloring({0, 2, 0, 1})));
    CHECK_FALSE(c.same_partition(Coloring({0, 0, 1, 2})));

    Coloring finer({0, 1, 2, 3});
    CHECK(finer.refines_partition(c));
    CHECK_FALSE(c.refines_partition(finer));
    CHECK(finer.is_discrete());
    CHECK_THROWS_AS(Coloring({0, 2, 2}), std::invalid_argument);  // gap in ids
}
