#include "gnnir/datasets.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "gnnir/tensor.hpp"
#include "gnnir/wl.hpp"

namespace gnnir {

using nlohmann::json;

Graph gen_csl(int m, int r) {
    if (m < 5) throw std::invalid_argument("circulant needs at least 5 vertices");
    if (r < 2 || 2 * r >= m)
        throw std::invalid_argument("skip length must satisfy 2 <= r < m/2, got r=" +
                                    std::to_string(r) + " for m=" + std::to_string(m));
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < m; i++) {
        edges.emplace_back(i, (i + 1) % m);
        edges.emplace_back(i, (i + r) % m);
    }
    return Graph::from_edge_list(m, edges);
}

const std::vector<int>& csl_skips() {
    static const std::vector<int> skips{2, 3, 4, 5, 6, 9, 11, 12, 13, 16};
    return skips;
}

std::vector<LabeledGraph> gen_csl_dataset(uint64_t seed) {
    std::vector<LabeledGraph> out;
    const auto& skips = csl_skips();
    for (int cls = 0; cls < static_cast<int>(skips.size()); cls++) {
        Graph base = gen_csl(kCslVertices, skips[cls]);
        for (int inst = 0; inst < 15; inst++) {
            std::mt19937_64 rng(derive_seed(seed, cls, inst));
            Permutation p = Permutation::random(kCslVertices, rng);
            out.push_back({permute(base, p), cls, ""});
        }
    }
    return out;
}

namespace {

void one_hot_degrees(Graph& g, int buckets) {
    int width = buckets + 1;
    std::vector<double> f(static_cast<size_t>(g.n()) * width, 0.0);
    for (int v = 0; v < g.n(); v++)
        f[static_cast<size_t>(v) * width + std::min(g.degree(v), buckets)] = 1.0;
    g.set_features(std::move(f), width);
}

Graph random_er_graph(int n, double p, std::mt19937_64& rng) {
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < n; u++)
        for (int v = u + 1; v < n; v++)
            if (uniform01(rng) < p) edges.emplace_back(u, v);
    return Graph::from_edge_list(n, edges);
}

std::string histogram_string(const std::vector<long long>& done) {
    std::ostringstream os;
    for (size_t c = 0; c < done.size(); c++) {
        if (c) os << " ";
        os << (c + 1) << ":" << done[c];
    }
    return os.str();
}

void gen_triangles_split(const TrianglesSpec& spec, const std::string& split, int split_idx,
                         int count, int lo, int hi, std::vector<LabeledGraph>& out) {
    if (count == 0) return;
    if (count % 10 != 0)
        throw std::invalid_argument("split size must divide into 10 balanced classes");
    int per_class = count / 10;
    std::vector<long long> done(10, 0);
    for (int cls = 1; cls <= 10; cls++) {
        for (int inst = 0; inst < per_class; inst++) {
            std::mt19937_64 rng(derive_seed(spec.seed, 1000 * split_idx + cls, inst));
            bool found = false;
            for (long long attempt = 0; attempt < spec.max_attempts_per_graph; attempt++) {
                int n = lo + static_cast<int>(rng() % static_cast<uint64_t>(hi - lo + 1));
                double triples = static_cast<double>(n) * (n - 1) * (n - 2) / 6.0;
                double p = std::min(0.9, std::cbrt(cls / triples));
                Graph g = random_er_graph(n, p, rng);
                if (triangle_count(g) != cls) continue;
                one_hot_degrees(g, spec.degree_buckets);
                out.push_back({std::move(g), cls, split});
                done[cls - 1]++;
                found = true;
                break;
            }
            if (!found)
                throw std::runtime_error("triangle sampling budget exhausted in split '" + split +
                                         "' at class " + std::to_string(cls) +
                                         "; achieved counts: " + histogram_string(done));
        }
    }
}

}  // namespace

std::vector<LabeledGraph> gen_triangles_dataset(const TrianglesSpec& spec) {
    if (spec.min_nodes < 4 || spec.max_nodes < spec.min_nodes)
        throw std::invalid_argument("bad node range for triangle sampling");
    std::vector<LabeledGraph> out;
    gen_triangles_split(spec, "train", 0, spec.n_train, spec.min_nodes, spec.max_nodes, out);
    gen_triangles_split(spec, "val", 1, spec.n_val, spec.min_nodes, spec.max_nodes, out);
    gen_triangles_split(spec, "test", 2, spec.n_test, spec.min_nodes, spec.max_nodes, out);
    gen_triangles_split(spec, "test_large", 3, spec.n_test_large, spec.large_min_nodes,
                        spec.large_max_nodes, out);
    return out;
}

std::vector<std::pair<Graph, Graph>> gen_hard_pairs() {
    std::vector<std::pair<Graph, Graph>> pairs;
    pairs.emplace_back(Graph::from_edge_list(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 0}}),
                       Graph::from_edge_list(6, {{0, 1}, {1, 2}, {2, 0}, {3, 4}, {4, 5}, {5, 3}}));
    pairs.emplace_back(
        Graph::from_edge_list(
            6, {{0, 1}, {1, 2}, {2, 0}, {3, 4}, {4, 5}, {5, 3}, {0, 3}, {1, 4}, {2, 5}}),
        Graph::from_edge_list(
            6, {{0, 3}, {0, 4}, {0, 5}, {1, 3}, {1, 4}, {1, 5}, {2, 3}, {2, 4}, {2, 5}}));
    for (const auto& [a, b] : pairs) {
        if (wl_distinguishes(a, b))
            throw std::logic_error("hard pair is separable by color refinement");
        if (brute_force_isomorphic(a, b)) throw std::logic_error("hard pair is isomorphic");
    }
    return pairs;
}

namespace {

json graph_to_json(const LabeledGraph& item) {
    const Graph& g = item.graph;
    json j;
    j["n"] = g.n();
    json edges = json::array();
    for (const auto& [u, v] : g.edges()) edges.push_back({u, v});
    j["edges"] = std::move(edges);
    if (g.has_features()) {
        json rows = json::array();
        for (int v = 0; v < g.n(); v++) {
            json row = json::array();
            for (int c = 0; c < g.feature_dim(); c++) row.push_back(g.feature(v, c));
            rows.push_back(std::move(row));
        }
        j["features"] = std::move(rows);
    }
    j["label"] = item.label;
    if (!item.split.empty()) j["split"] = item.split;
    return j;
}

LabeledGraph graph_from_json(const json& j) {
    int n = j.at("n").get<int>();
    std::vector<std::pair<int, int>> edges;
    for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    LabeledGraph item;
    item.graph = Graph::from_edge_list(n, edges);
    if (j.contains("features")) {
        const auto& rows = j.at("features");
        if (static_cast<int>(rows.size()) != n)
            throw std::invalid_argument("feature row count does not match n");
        int dim = rows.empty() ? 0 : static_cast<int>(rows.front().size());
        std::vector<double> f;
        f.reserve(static_cast<size_t>(n) * dim);
        for (const auto& row : rows) {
            if (static_cast<int>(row.size()) != dim)
                throw std::invalid_argument("ragged feature rows");
            for (const auto& x : row) f.push_back(x.get<double>());
        }
        item.graph.set_features(std::move(f), dim);
    }
    if (j.contains("label")) item.label = j.at("label").get<int>();
    if (j.contains("split")) item.split = j.at("split").get<std::string>();
    return item;
}

}  // namespace

std::vector<LabeledGraph> read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);
    std::vector<LabeledGraph> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        line_no++;
        if (line.empty()) continue;
        try {
            out.push_back(graph_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void write_dataset(const std::string& path, const std::vector<LabeledGraph>& items) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open dataset file for writing: " + path);
    for (const auto& item : items) out << graph_to_json(item).dump() << "\n";
}

Graph read_graph_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open graph file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return graph_from_json(json::parse(buf.str())).graph;
    } catch (const std::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

}  // namespace gnnir
