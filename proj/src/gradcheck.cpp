#include "gnnir/gradcheck.hpp"

#include <cmath>
#include <memory>
#include <random>
#include <utility>

#include "gnnir/model.hpp"
#include "gnnir/tensor.hpp"

namespace gnnir {

GradCheckReport check_gradients(const std::string& name, ParamStore& params,
                                const std::function<double()>& loss,
                                const GradCheckOptions& opts) {
    params.zero_grad();
    loss();
    std::vector<Tensor> analytic;
    for (auto* p : params.all()) analytic.push_back(p->grad);

    GradCheckReport rep;
    rep.name = name;
    auto ps = params.all();
    for (size_t pi = 0; pi < ps.size(); pi++) {
        Parameter* p = ps[pi];
        for (long long i = 0; i < p->value.size(); i++) {
            double keep = p->value.data[i];
            p->value.data[i] = keep + opts.step;
            double lp = loss();
            p->value.data[i] = keep - opts.step;
            double lm = loss();
            p->value.data[i] = keep;
            double fd = (lp - lm) / (2.0 * opts.step);
            double a = analytic[pi].data[i];
            rep.entries++;
            double denom = std::max(std::abs(a), std::abs(fd));
            if (denom < opts.abs_floor) continue;
            double rel = std::abs(a - fd) / denom;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_entry = p->name + "[" + std::to_string(i) + "]";
            }
        }
    }
    rep.pass = rep.max_rel_err < opts.rel_tolerance;
    return rep;
}

namespace {

Tensor randu(std::vector<int> shape, std::mt19937_64& rng, double lo = -0.8, double hi = 0.8) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& x : t.data) x = lo + (hi - lo) * uniform01(rng);
    return t;
}

void reg_mlp(ParamStore& s, std::mt19937_64& rng, const std::string& prefix, int in, int hid,
             int out) {
    s.add(prefix + ".l1.w", Tensor::glorot_uniform(in, hid, rng));
    s.add(prefix + ".l1.b", randu({hid}, rng, -0.2, 0.2));
    s.add(prefix + ".l2.w", Tensor::glorot_uniform(hid, out, rng));
    s.add(prefix + ".l2.b", randu({out}, rng, -0.2, 0.2));
}

MlpVars bind_mlp(Tape& t, ParamStore& s, const std::string& prefix, bool sigmoid_out = false) {
    MlpVars m;
    m.w1 = t.param(s.get(prefix + ".l1.w"));
    m.b1 = t.param(s.get(prefix + ".l1.b"));
    m.w2 = t.param(s.get(prefix + ".l2.w"));
    m.b2 = t.param(s.get(prefix + ".l2.b"));
    m.sigmoid_out = sigmoid_out;
    return m;
}

void reg_gru(ParamStore& s, std::mt19937_64& rng, const std::string& prefix, int dx, int d) {
    for (const char* gate : {"z", "r", "h"}) {
        s.add(prefix + ".w" + gate, Tensor::glorot_uniform(dx, d, rng));
        s.add(prefix + ".u" + gate, Tensor::glorot_uniform(d, d, rng));
        s.add(prefix + ".b" + gate, randu({d}, rng, -0.2, 0.2));
    }
}

GruVars bind_gru(Tape& t, ParamStore& s, const std::string& prefix) {
    auto p = [&](const std::string& name) { return t.param(s.get(prefix + "." + name)); };
    GruVars g;
    g.wz = p("wz"); g.uz = p("uz"); g.bz = p("bz");
    g.wr = p("wr"); g.ur = p("ur"); g.br = p("br");
    g.wh = p("wh"); g.uh = p("uh"); g.bh = p("bh");
    return g;
}

using LossFn = std::function<double()>;
using CaseFn = std::function<LossFn(ParamStore&, std::mt19937_64&)>;

double finish(Tape& t, Var loss) {
    t.backward(loss);
    return t.val(loss).data[0];
}

}  // namespace

std::vector<GradCheckReport> run_gradient_suite(uint64_t seed) {
    std::vector<GradCheckReport> reports;
    int case_index = 0;
    auto run = [&](const std::string& name, double tol, const CaseFn& make) {
        ParamStore store;
        std::mt19937_64 rng(derive_seed(seed, 0x6ead, ++case_index));
        LossFn loss = make(store, rng);
        GradCheckOptions opts;
        opts.rel_tolerance = tol;
        reports.push_back(check_gradients(name, store, loss, opts));
    };

    run("matmul", 1e-6, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        s.add("a", randu({3, 4}, rng));
        s.add("b", randu({4, 2}, rng));
        Tensor r = randu({3, 2}, rng);
        return [&s, r] {
            Tape t;
            Var c = t.matmul(t.param(s.get("a")), t.param(s.get("b")));
            return finish(t, t.sum_all(t.hadamard(c, t.input(r))));
        };
    });

    run("add", 1e-6, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        s.add("a", randu({3, 4}, rng));
        s.add("b", randu({3, 4}, rng));
        Tensor r = randu({3, 4}, rng);
        return [&s, r] {
            Tape t;
            Var c = t.add(t.param(s.get("a")), t.param(s.get("b")));
            return finish(t, t.sum_all(t.hadamard(c, t.input(r))));
        };
    });

    run("sub", 1e-6, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        s.add("a", randu({3, 4}, rng));
        s.add("b", randu({3, 4}, rng));
        Tensor r = randu({3, 4}, rng);
        return [&s, r] {
            Tape t;
            Var c = t.sub(t.param(s.get("a")), t.param(s.get("b")));
            return finish(t, t.sum_all(t.hadamard(c, t.input(r))));
        };
    });

    run("hadamard", 1e-6, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        s.add("a", randu({3, 4}, rng));
        s.add("b", randu({3, 4}, rng));
        Tensor r = randu({3, 4}, rng);
        return [&s, r] {
            Tape t;
            Var c = t.hadamard(t.param(s.get("a")), t.param(s.get("b")));
            return finish(t, t.sum_all(t.hadamard(c, t.input(r))));
        };
    });

    run("scale_and_shift", 1e-6, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        s.add("a", randu({3, 4}, rng));
        Tensor r = randu({3, 4}, rng);
        return [&s, r] {
            Tape t;
            Var c = t.add_const(t.scale(t.param(s.get("a")), 1.7), 0.3);
            return finish(t, t.sum_all(t.hadamard(c, t.input(r))));
        };
    });

    run("tanh", 1e-6, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        s.add("a", randu({3, 4}, rng));
        Tensor r = randu({3, 4}, rng);
        return [&s, r] {
            Tape t;
            return finish(t, t.sum_all(t.hadamard(t.tanh_t(t.param(s.get("a"))), t.input(r))));
        };
    });

    run("sigmoid", 1e-6, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        s.add("a", randu({3, 4}, rng));
        Tensor r = randu({3, 4}, rng);
        return [&s, r] {
            Tape t;
            return finish(t, t.sum_all(t.hadamard(t.sigmoid_t(t.param(s.get("a"))), t.input(r))));
        };
    });

    run("relu", 1e-6, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        Tensor a = randu({3, 4}, rng);
        // keep every entry clear of the kink so central differences stay valid
        for (double& x : a.data)
            if (std::abs(x) < 1e-3) x = x < 0 ? x - 0.1 : x + 0.1;
        s.add("a", a);
        Tensor r = randu({3, 4}, rng);
        return [&s, r] {
            Tape t;
            return finish(t, t.sum_all(t.hadamard(t.relu_t(t.param(s.get("a"))), t.input(r))));
        };
    });

    run("linear", 1e-6, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        s.add("x", randu({4, 3}, rng));
        s.add("w", randu({3, 5}, rng));
        s.add("b", randu({5}, rng));
        Tensor r = randu({4, 5}, rng);
        return [&s, r] {
            Tape t;
            Var c = t.linear(t.param(s.get("x")), t.param(s.get("w")), t.param(s.get("b")));
            return finish(t, t.sum_all(t.hadamard(c, t.input(r))));
        };
    });

    run("mul_scalar", 1e-6, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        s.add("a", randu({3, 3}, rng));
        s.add("s", randu({1}, rng, 0.4, 0.9));
        Tensor r = randu({3, 3}, rng);
        return [&s, r] {
            Tape t;
            Var c = t.mul_scalar(t.param(s.get("a")), t.param(s.get("s")));
            return finish(t, t.sum_all(t.hadamard(c, t.input(r))));
        };
    });

    run("rows_scale", 1e-6, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        s.add("a", randu({4, 3}, rng));
        s.add("s", randu({4}, rng));
        Tensor r = randu({4, 3}, rng);
        return [&s, r] {
            Tape t;
            Var c = t.rows_scale(t.param(s.get("a")), t.param(s.get("s")));
            return finish(t, t.sum_all(t.hadamard(c, t.input(r))));
        };
    });

    run("neighbor_sum", 1e-6, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        auto g = std::make_shared<Graph>(
            Graph::from_edge_list(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}}));
        s.add("h", randu({5, 3}, rng));
        Tensor r = randu({5, 3}, rng);
        return [&s, g, r] {
            Tape t;
            Var c = t.neighbor_sum(t.param(s.get("h")), *g);
            return finish(t, t.sum_all(t.hadamard(c, t.input(r))));
        };
    });

    run("segment_sum", 1e-6, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        s.add("x", randu({6, 3}, rng));
        Tensor r = randu({3, 3}, rng);
        std::vector<int> seg{0, 0, 1, 1, 2, 2};
        return [&s, r, seg] {
            Tape t;
            Var c = t.segment_sum(t.param(s.get("x")), seg, 3);
            return finish(t, t.sum_all(t.hadamard(c, t.input(r))));
        };
    });

    run("segment_mean", 1e-6, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        s.add("x", randu({6, 3}, rng));
        Tensor r = randu({2, 3}, rng);
        std::vector<int> seg{0, 0, 0, 0, 1, 1};
        return [&s, r, seg] {
            Tape t;
            Var c = t.segment_mean(t.param(s.get("x")), seg, 2);
            return finish(t, t.sum_all(t.hadamard(c, t.input(r))));
        };
    });

    run("segment_standardize", 1e-4, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        s.add("x", randu({7, 3}, rng));
        Tensor r = randu({7, 3}, rng);
        std::vector<int> seg{0, 0, 0, 0, 1, 1, 1};
        return [&s, r, seg] {
            Tape t;
            Var c = t.segment_standardize(t.param(s.get("x")), seg, 2, 1e-3);
            return finish(t, t.sum_all(t.hadamard(c, t.input(r))));
        };
    });

    run("add_segment_rows", 1e-6, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        s.add("x", randu({5, 3}, rng));
        s.add("rows", randu({2, 3}, rng));
        Tensor r = randu({5, 3}, rng);
        std::vector<int> seg{0, 0, 0, 1, 1};
        return [&s, r, seg] {
            Tape t;
            Var c = t.add_segment_rows(t.param(s.get("x")), t.param(s.get("rows")), seg);
            return finish(t, t.sum_all(t.hadamard(c, t.input(r))));
        };
    });

    run("row_l2_normalize_dot", 1e-6, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        s.add("x", randu({5, 3}, rng));
        s.add("p", randu({2, 3}, rng, 0.3, 0.9));
        Tensor r = randu({5}, rng);
        std::vector<int> seg{0, 0, 0, 1, 1};
        return [&s, r, seg] {
            Tape t;
            Var c = t.row_l2_normalize_dot(t.param(s.get("x")), t.param(s.get("p")), seg);
            return finish(t, t.sum_all(t.hadamard(c, t.input(r))));
        };
    });

    run("gather_rows", 1e-6, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        s.add("x", randu({5, 3}, rng));
        Tensor r = randu({4, 3}, rng);
        std::vector<int> rows{0, 2, 2, 4};  // repeated row checks accumulation
        return [&s, r, rows] {
            Tape t;
            Var c = t.gather_rows(t.param(s.get("x")), rows);
            return finish(t, t.sum_all(t.hadamard(c, t.input(r))));
        };
    });

    run("gather_sum_by_segment", 1e-6, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        s.add("x", randu({6}, rng));
        Tensor r = randu({2}, rng);
        std::vector<int> idx{0, 2, 3, 5};
        std::vector<int> seg{0, 0, 1, 1};
        return [&s, r, idx, seg] {
            Tape t;
            Var c = t.gather_sum_by_segment(t.param(s.get("x")), idx, seg, 2);
            return finish(t, t.sum_all(t.hadamard(c, t.input(r))));
        };
    });

    run("individualize_rows", 1e-6, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        s.add("x", randu({5, 3}, rng));
        s.add("m", randu({2, 3}, rng, 0.1, 0.9));
        Tensor r = randu({5, 3}, rng);
        std::vector<int> rows{1, 3};
        return [&s, r, rows] {
            Tape t;
            Var c = t.individualize_rows(t.param(s.get("x")), rows, t.param(s.get("m")));
            return finish(t, t.sum_all(t.hadamard(c, t.input(r))));
        };
    });

    auto branch_values = [](std::mt19937_64& rng) {
        // per-element branch values separated by >= 0.4 so the argmax cannot
        // flip under the finite-difference step
        std::vector<Tensor> vals(3, Tensor::zeros({4, 3}));
        for (int e = 0; e < 12; e++) {
            double base = -0.5 + uniform01(rng);
            for (int b = 0; b < 3; b++)
                vals[b].data[e] = base + 0.5 * ((b + e) % 3) + 0.05 * uniform01(rng);
        }
        return vals;
    };
    std::vector<std::vector<char>> active{
        {1, 1, 1, 1}, {0, 1, 1, 1}, {1, 1, 1, 0}};

    run("branch_max", 1e-6, [&](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        auto vals = branch_values(rng);
        for (int b = 0; b < 3; b++) s.add("b" + std::to_string(b), vals[b]);
        Tensor r = randu({4, 3}, rng);
        return [&s, r, active] {
            Tape t;
            std::vector<Var> branches{t.param(s.get("b0")), t.param(s.get("b1")),
                                      t.param(s.get("b2"))};
            return finish(t, t.sum_all(t.hadamard(t.branch_max(branches, active), t.input(r))));
        };
    });

    run("branch_sum", 1e-6, [&](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        auto vals = branch_values(rng);
        for (int b = 0; b < 3; b++) s.add("b" + std::to_string(b), vals[b]);
        Tensor r = randu({4, 3}, rng);
        return [&s, r, active] {
            Tape t;
            std::vector<Var> branches{t.param(s.get("b0")), t.param(s.get("b1")),
                                      t.param(s.get("b2"))};
            return finish(t, t.sum_all(t.hadamard(t.branch_sum(branches, active), t.input(r))));
        };
    });

    run("concat_cols", 1e-6, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        s.add("a", randu({3, 2}, rng));
        s.add("b", randu({3, 3}, rng));
        s.add("c", randu({3, 1}, rng));
        Tensor r = randu({3, 6}, rng);
        return [&s, r] {
            Tape t;
            std::vector<Var> parts{t.param(s.get("a")), t.param(s.get("b")), t.param(s.get("c"))};
            return finish(t, t.sum_all(t.hadamard(t.concat_cols(parts), t.input(r))));
        };
    });

    run("gru_cell", 1e-4, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        s.add("x", randu({4, 2}, rng));
        s.add("h", randu({4, 3}, rng));
        reg_gru(s, rng, "gru", 2, 3);
        Tensor r = randu({4, 3}, rng);
        return [&s, r] {
            Tape t;
            Var c = t.gru_cell(t.param(s.get("x")), t.param(s.get("h")), bind_gru(t, s, "gru"));
            return finish(t, t.sum_all(t.hadamard(c, t.input(r))));
        };
    });

    run("cross_entropy_logits", 1e-6, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        s.add("logits", randu({4, 3}, rng));
        std::vector<int> labels{0, 2, 1, 1};
        return [&s, labels] {
            Tape t;
            return finish(t, t.cross_entropy_logits(t.param(s.get("logits")), labels));
        };
    });

    run("l1_loss", 1e-6, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        Tensor target = randu({5}, rng);
        Tensor pred = target;
        for (int i = 0; i < 5; i++)
            pred.data[i] += (i % 2 ? 0.6 : -0.6) + 0.1 * uniform01(rng);
        s.add("pred", pred);
        std::vector<double> tv(target.data.begin(), target.data.end());
        return [&s, tv] {
            Tape t;
            return finish(t, t.l1_loss(t.param(s.get("pred")), tv));
        };
    });

    // composite: one message-passing step on a 5-vertex graph
    run("mpnn_step", 1e-4, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        auto b = std::make_shared<Batch>();
        b->graph = Graph::from_edge_list(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {1, 3}});
        b->seg = {0, 0, 0, 0, 0};
        b->num_graphs = 1;
        b->sizes = {5};
        b->features = Tensor::full({5, 1}, 1.0);
        s.add("h", randu({5, 3}, rng));
        s.add("eps", randu({1}, rng, 0.05, 0.3));
        reg_mlp(s, rng, "mlp", 3, 4, 3);
        reg_gru(s, rng, "gru", 3, 3);
        Tensor r = randu({5, 3}, rng);
        return [&s, b, r] {
            Tape t;
            GnnVars gv;
            gv.eps = t.param(s.get("eps"));
            gv.mlp = bind_mlp(t, s, "mlp");
            gv.gru = bind_gru(t, s, "gru");
            Var out = mpnn_step(t, t.param(s.get("h")), *b, gv);
            return finish(t, t.sum_all(t.hadamard(out, t.input(r))));
        };
    });

    // composite: pooled selector over a two-graph batch
    run("selector", 1e-4, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        auto b = std::make_shared<Batch>();
        b->graph = Graph::from_edge_list(6, {{0, 1}, {1, 2}, {2, 0}, {3, 4}, {4, 5}});
        b->seg = {0, 0, 0, 1, 1, 1};
        b->num_graphs = 2;
        b->sizes = {3, 3};
        b->features = Tensor::full({6, 1}, 1.0);
        s.add("h", randu({6, 3}, rng));
        s.add("q", randu({2, 3}, rng));
        reg_mlp(s, rng, "agg", 3, 4, 3);
        reg_gru(s, rng, "sgru", 3, 3);
        s.add("p.w", Tensor::glorot_uniform(3, 3, rng));
        s.add("p.b", randu({3}, rng, -0.2, 0.2));
        s.add("ro.w", Tensor::glorot_uniform(3, 3, rng));
        s.add("ro.b", randu({3}, rng, -0.2, 0.2));
        Tensor r1 = randu({2, 3}, rng);
        Tensor r2 = randu({2, 3}, rng);
        Tensor r3 = randu({6}, rng);
        return [&s, b, r1, r2, r3] {
            Tape t;
            SelectorVars sv;
            sv.agg_graph = bind_mlp(t, s, "agg");
            sv.gru = bind_gru(t, s, "sgru");
            sv.p_w = t.param(s.get("p.w"));
            sv.p_b = t.param(s.get("p.b"));
            sv.readout_w = t.param(s.get("ro.w"));
            sv.readout_b = t.param(s.get("ro.b"));
            TopkResult res = select_topk(t, t.param(s.get("h")), *b, t.param(s.get("q")), 2,
                                         SelectorMode::LearnedGru, sv, nullptr);
            Var loss = t.add(t.sum_all(t.hadamard(res.readout, t.input(r1))),
                             t.sum_all(t.hadamard(res.q_next, t.input(r2))));
            loss = t.add(loss, t.sum_all(t.hadamard(res.scores, t.input(r3))));
            return finish(t, loss);
        };
    });

    // composite: a full individualization-refinement round, k=2, 5 vertices
    run("ir_layer", 1e-4, [](ParamStore& s, std::mt19937_64& rng) -> LossFn {
        auto b = std::make_shared<Batch>();
        b->graph = Graph::from_edge_list(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {1, 3}});
        b->seg = {0, 0, 0, 0, 0};
        b->num_graphs = 1;
        b->sizes = {5};
        b->features = Tensor::full({5, 1}, 1.0);
        s.add("h", randu({5, 3}, rng));
        s.add("eps", randu({1}, rng, 0.05, 0.3));
        reg_mlp(s, rng, "mlp", 3, 4, 3);
        reg_gru(s, rng, "gru", 3, 3);
        reg_mlp(s, rng, "agg_graph", 3, 4, 3);
        reg_gru(s, rng, "sgru", 3, 3);
        s.add("p.w", Tensor::glorot_uniform(3, 3, rng));
        s.add("p.b", randu({3}, rng, -0.2, 0.2));
        s.add("ro.w", Tensor::glorot_uniform(3, 3, rng));
        s.add("ro.b", randu({3}, rng, -0.2, 0.2));
        reg_mlp(s, rng, "psi", 3, 4, 3);
        reg_mlp(s, rng, "agg_node", 3, 4, 3);
        Tensor r1 = randu({5, 3}, rng);
        Tensor r2 = randu({1, 3}, rng);
        return [&s, b, r1, r2] {
            Tape t;
            IrLayerVars v;
            v.gnn.eps = t.param(s.get("eps"));
            v.gnn.mlp = bind_mlp(t, s, "mlp");
            v.gnn.gru = bind_gru(t, s, "gru");
            v.sel.agg_graph = bind_mlp(t, s, "agg_graph");
            v.sel.gru = bind_gru(t, s, "sgru");
            v.sel.p_w = t.param(s.get("p.w"));
            v.sel.p_b = t.param(s.get("p.b"));
            v.sel.readout_w = t.param(s.get("ro.w"));
            v.sel.readout_b = t.param(s.get("ro.b"));
            v.psi = bind_mlp(t, s, "psi", true);
            v.agg.graph_mlp = bind_mlp(t, s, "agg_graph");
            v.agg.node_mlp = bind_mlp(t, s, "agg_node");
            Var q = t.input(Tensor::zeros({1, 3}));
            IrLayerOut out = ir_layer(t, t.param(s.get("h")), *b, q, 2, SelectorMode::LearnedGru,
                                      Aggregator::Max, 2, v, nullptr);
            Var loss = t.add(t.sum_all(t.hadamard(out.h_next, t.input(r1))),
                             t.sum_all(t.hadamard(out.readout, t.input(r2))));
            return finish(t, loss);
        };
    });

    return reports;
}

}  // namespace gnnir
