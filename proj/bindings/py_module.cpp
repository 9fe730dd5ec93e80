// Python bindings for the main operations: graphs, WL refinement, canonical
// labeling, dataset generators, and the model forward pass.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gnnir/checkpoint.hpp"
#include "gnnir/datasets.hpp"
#include "gnnir/gradcheck.hpp"
#include "gnnir/graph.hpp"
#include "gnnir/ir_search.hpp"
#include "gnnir/model.hpp"
#include "gnnir/train.hpp"
#include "gnnir/wl.hpp"

namespace py = pybind11;
using namespace gnnir;

namespace {

TargetCellPolicy policy_from(const std::string& s) {
    if (s == "smallest") return TargetCellPolicy::SmallestNonSingleton;
    if (s == "largest") return TargetCellPolicy::Largest;
    throw std::invalid_argument("unknown target cell policy: " + s);
}

// Rows of the [B x embed_dim] matrix as nested lists.
std::vector<std::vector<double>> rows_of(const Tensor& t) {
    std::vector<std::vector<double>> out(t.rows());
    for (int i = 0; i < t.rows(); ++i)
        out[i] = std::vector<double>(t.data.begin() + static_cast<size_t>(i) * t.cols(),
                                     t.data.begin() + static_cast<size_t>(i + 1) * t.cols());
    return out;
}

Batch batch_of(const std::vector<Graph>& graphs) {
    if (graphs.empty()) throw std::invalid_argument("need at least one graph");
    std::vector<LabeledGraph> items;
    items.reserve(graphs.size());
    for (const auto& g : graphs) items.push_back({g, 0, ""});
    LabelMap labels;
    labels.classes = {0};
    std::vector<const LabeledGraph*> ptrs;
    for (const auto& it : items) ptrs.push_back(&it);
    return make_batch(ptrs, labels);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "graph isomorphism machinery and the individualization-refinement GNN";

    py::class_<Graph>(m, "Graph")
        .def(py::init([](int n, const std::vector<std::pair<int, int>>& edges) {
                 return Graph::from_edge_list(n, edges);
             }),
             py::arg("n"), py::arg("edges"))
        .def_property_readonly("n", &Graph::n)
        .def_property_readonly("edges", &Graph::edges)
        .def("degree", &Graph::degree)
        .def("neighbors", &Graph::neighbors, py::return_value_policy::copy)
        .def("has_edge", &Graph::has_edge)
        .def_property_readonly("feature_dim", &Graph::feature_dim)
        .def("set_features", &Graph::set_features, py::arg("values"), py::arg("dim"))
        .def("__repr__", [](const Graph& g) {
            return "Graph(n=" + std::to_string(g.n()) +
                   ", edges=" + std::to_string(g.num_edges()) + ")";
        });

    m.def("triangle_count", &triangle_count, py::arg("graph"));
    m.def("permute_random", [](const Graph& g, uint64_t seed) {
        std::mt19937_64 rng(seed);
        return permute(g, Permutation::random(g.n(), rng));
    });

    m.def(
        "wl_cells",
        [](const Graph& g) {
            auto r = wl_refine(g);
            return py::make_tuple(r.coloring.colors(), r.rounds);
        },
        py::arg("graph"), "Stable coloring from the uniform start: (colors, rounds).");
    m.def("wl_distinguishes", &wl_distinguishes, py::arg("a"), py::arg("b"));

    m.def(
        "canonical_form",
        [](const Graph& g, const std::string& policy) {
            return canonical_form(g, policy_from(policy));
        },
        py::arg("graph"), py::arg("policy") = "smallest");
    m.def(
        "search_tree_stats",
        [](const Graph& g, const std::string& policy, long long max_leaves) {
            auto t = build_search_tree(g, policy_from(policy), {max_leaves, 64});
            return py::make_tuple(t.leaf_count, t.depth, t.truncated);
        },
        py::arg("graph"), py::arg("policy") = "smallest", py::arg("max_leaves") = 1000000,
        "(leaf_count, depth, truncated) of the refinement search tree.");

    m.def("gen_csl", &gen_csl, py::arg("m"), py::arg("r"));
    m.def("hard_pairs", &gen_hard_pairs,
          "1-WL-equivalent non-isomorphic pairs: (C6, 2xC3) and (prism, K3,3).");

    m.def(
        "gradient_suite",
        [](uint64_t seed) {
            std::vector<py::tuple> rows;
            for (const auto& r : run_gradient_suite(seed))
                rows.push_back(py::make_tuple(r.name, r.max_rel_err, r.pass));
            return rows;
        },
        py::arg("seed") = 0, "Finite-difference checks: list of (op, max_rel_err, pass).");

    py::class_<Model>(m, "Model")
        .def(py::init([](int layers, int k, int hidden, int gnn_steps, int in_dim, int out_dim,
                         const std::string& selector, const std::string& aggregator,
                         bool share_gnn_params, uint64_t seed) {
                 ModelConfig cfg;
                 cfg.layers = layers;
                 cfg.k = k;
                 cfg.hidden = hidden;
                 cfg.gnn_steps = gnn_steps;
                 cfg.in_dim = in_dim;
                 cfg.out_dim = out_dim;
                 cfg.selector = selector_from_string(selector);
                 cfg.aggregator = aggregator_from_string(aggregator);
                 cfg.share_gnn_params = share_gnn_params;
                 cfg.seed = seed;
                 cfg.validate();
                 return std::make_unique<Model>(cfg);
             }),
             py::arg("layers") = 1, py::arg("k") = 2, py::arg("hidden") = 64,
             py::arg("gnn_steps") = 3, py::arg("in_dim") = 1, py::arg("out_dim") = 2,
             py::arg("selector") = "learned_gru", py::arg("aggregator") = "max",
             py::arg("share_gnn_params") = true, py::arg("seed") = 0)
        .def_property_readonly("embed_dim",
                               [](const Model& m) { return m.config().embed_dim(); })
        .def(
            "embed",
            [](const Model& m, const std::vector<Graph>& graphs) {
                Batch b = batch_of(graphs);
                Tape t;
                return rows_of(t.val(m.embed(t, b)));
            },
            py::arg("graphs"), "Per-graph embeddings, one row per input graph.")
        .def(
            "logits",
            [](const Model& m, const std::vector<Graph>& graphs) {
                Batch b = batch_of(graphs);
                Tape t;
                return rows_of(t.val(m.forward(t, b)));
            },
            py::arg("graphs"))
        .def("save", [](const Model& m, const std::string& path) {
            save_checkpoint(path, m.config(), m.params());
        });

    m.def("load_model", &load_model, py::arg("path"));
}
