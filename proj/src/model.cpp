#include "gnnir/model.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace gnnir {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

SelectorMode selector_from_string(const std::string& s) {
    if (s == "learned_gru") return SelectorMode::LearnedGru;
    if (s == "learned_mlp") return SelectorMode::LearnedMlp;
    if (s == "random") return SelectorMode::Random;
    throw std::invalid_argument("unknown selector mode: " + s);
}

Aggregator aggregator_from_string(const std::string& s) {
    if (s == "max") return Aggregator::Max;
    if (s == "sum") return Aggregator::Sum;
    throw std::invalid_argument("unknown aggregator: " + s);
}

std::string to_string(SelectorMode m) {
    switch (m) {
        case SelectorMode::LearnedGru: return "learned_gru";
        case SelectorMode::LearnedMlp: return "learned_mlp";
        case SelectorMode::Random: return "random";
    }
    return "?";
}

std::string to_string(Aggregator a) {
    return a == Aggregator::Max ? "max" : "sum";
}

void ModelConfig::validate() const {
    require(layers >= 0, "layers must be >= 0");
    require(layers == 0 || k >= 1, "k must be >= 1 when layers >= 1");
    require(hidden >= 1, "hidden must be >= 1");
    require(gnn_steps >= 1, "gnn_steps must be >= 1");
    require(in_dim >= 1, "in_dim must be >= 1");
    require(out_dim >= 1, "out_dim must be >= 1");
}

void Batch::validate() const {
    require(num_graphs >= 1, "batch must contain at least one graph");
    require(static_cast<int>(seg.size()) == graph.n(), "segment ids must cover all vertices");
    require(static_cast<int>(sizes.size()) == num_graphs, "sizes must match num_graphs");
    int at = 0;
    for (int s = 0; s < num_graphs; s++) {
        require(sizes[s] >= 1, "empty member graph in batch");
        for (int i = 0; i < sizes[s]; i++, at++) {
            require(at < graph.n() && seg[at] == s, "segment ids must be contiguous per member");
        }
    }
    require(at == graph.n(), "sizes must sum to the vertex count");
    for (const auto& [u, v] : graph.edges())
        require(seg[u] == seg[v], "batch graph has a cross-member edge");
    require(features.ndim() == 2 && features.rows() == graph.n(),
            "features must have one row per vertex");
    require(labels.empty() || static_cast<int>(labels.size()) == num_graphs,
            "labels must be empty or one per member");
}

Var mlp_apply(Tape& t, const MlpVars& m, Var x) {
    Var h = t.relu_t(t.linear(x, m.w1, m.b1));
    Var out = t.linear(h, m.w2, m.b2);
    return m.sigmoid_out ? t.sigmoid_t(out) : out;
}

Var gin_conv(Tape& t, Var h, const Graph& g, Var eps) {
    Var self = t.mul_scalar(h, t.add_const(eps, 1.0));
    return t.add(self, t.neighbor_sum(h, g));
}

// Standardizing the transformed message per graph keeps hidden activations
// O(1) across rounds; without it the MLP gains compound and the shared
// background drowns the per-class signal at sum pooling.
constexpr double kStepNormEps = 1e-3;

Var mpnn_step(Tape& t, Var h, const Batch& b, const GnnVars& p) {
    Var x = mlp_apply(t, p.mlp, gin_conv(t, h, b.graph, p.eps));
    x = t.segment_standardize(x, b.seg, b.num_graphs, kStepNormEps);
    return t.gru_cell(x, h, p.gru);
}

Var refine(Tape& t, Var h, const Batch& b, const GnnVars& p, int steps) {
    require(steps >= 1, "refine: steps must be >= 1");
    for (int i = 0; i < steps; i++) h = mpnn_step(t, h, b, p);
    return h;
}

Var node_scores(Tape& t, Var h, Var p, const std::vector<int>& seg) {
    return t.tanh_t(t.row_l2_normalize_dot(h, p, seg));
}

std::vector<std::vector<int>> topk_rows(const Tensor& scores, const std::vector<int>& seg,
                                        int num_segments, int k) {
    require(k >= 1, "topk_rows: k must be >= 1");
    require(scores.ndim() == 1 && scores.shape[0] == static_cast<int>(seg.size()),
            "topk_rows: scores/seg mismatch");
    std::vector<std::vector<int>> members(num_segments);
    for (size_t vtx = 0; vtx < seg.size(); vtx++) members[seg[vtx]].push_back(static_cast<int>(vtx));
    std::vector<std::vector<int>> out(num_segments);
    for (int s = 0; s < num_segments; s++) {
        auto& rows = members[s];
        std::sort(rows.begin(), rows.end(), [&](int a, int b2) {
            if (scores.data[a] != scores.data[b2]) return scores.data[a] > scores.data[b2];
            return a < b2;
        });
        int take = std::min<int>(k, static_cast<int>(rows.size()));
        out[s].assign(rows.begin(), rows.begin() + take);
    }
    return out;
}

TopkResult select_topk(Tape& t, Var h, const Batch& b, Var q_prev, int k, SelectorMode mode,
                       const SelectorVars& sv, std::mt19937_64* rng) {
    require(k >= 1, "select_topk: k must be >= 1");
    int num_graphs = b.num_graphs;
    Var hg = t.segment_sum(mlp_apply(t, sv.agg_graph, h), b.seg, num_graphs);

    TopkResult res;
    if (mode == SelectorMode::LearnedMlp) {
        res.p = mlp_apply(t, sv.mlp, hg);
        res.q_next = q_prev;
    } else {
        res.q_next = t.gru_cell(hg, q_prev, sv.gru);
        res.p = t.linear(res.q_next, sv.p_w, sv.p_b);
    }
    res.scores = node_scores(t, h, res.p, b.seg);

    if (mode == SelectorMode::Random) {
        require(rng != nullptr, "random selector needs an rng");
        res.selected.assign(num_graphs, {});
        int base = 0;
        for (int s = 0; s < num_graphs; s++) {
            std::vector<int> rows(b.sizes[s]);
            std::iota(rows.begin(), rows.end(), base);
            int take = std::min<int>(k, b.sizes[s]);
            for (int j = 0; j < take; j++) {
                int pick = j + static_cast<int>((*rng)() % (rows.size() - j));
                std::swap(rows[j], rows[pick]);
                res.selected[s].push_back(rows[j]);
            }
            base += b.sizes[s];
        }
    } else {
        res.selected = topk_rows(t.val(res.scores), b.seg, num_graphs, k);
    }
    for (int s = 0; s < num_graphs; s++)
        for (int row : res.selected[s]) {
            res.flat.push_back(row);
            res.seg_of_flat.push_back(s);
        }

    Var sums = t.gather_sum_by_segment(res.scores, res.flat, res.seg_of_flat, num_graphs);
    res.readout = t.linear(t.rows_scale(res.p, sums), sv.readout_w, sv.readout_b);
    return res;
}

Var individualize_embed(Tape& t, Var h, const std::vector<int>& rows, const MlpVars& psi) {
    Var masks = mlp_apply(t, psi, t.gather_rows(h, rows));
    return t.individualize_rows(h, rows, masks);
}

Var aggregate_branches(Tape& t, const std::vector<Var>& branches,
                       const std::vector<std::vector<char>>& branch_row_active, const Batch& b,
                       const AggVars& av, Aggregator agg, std::vector<Var>* branch_reps) {
    require(!branches.empty(), "aggregate_branches: no branches");
    std::vector<Var> outs;
    outs.reserve(branches.size());
    for (Var branch : branches) {
        Var rep = t.segment_sum(mlp_apply(t, av.graph_mlp, branch), b.seg, b.num_graphs);
        if (branch_reps) branch_reps->push_back(rep);
        outs.push_back(t.add_segment_rows(branch, mlp_apply(t, av.node_mlp, rep), b.seg));
    }
    return agg == Aggregator::Max ? t.branch_max(outs, branch_row_active)
                                  : t.branch_sum(outs, branch_row_active);
}

IrLayerOut ir_layer(Tape& t, Var h, const Batch& b, Var q_prev, int k, SelectorMode mode,
                    Aggregator agg, int gnn_steps, const IrLayerVars& v, std::mt19937_64* rng) {
    TopkResult sel = select_topk(t, h, b, q_prev, k, mode, v.sel, rng);

    size_t width = 0;
    for (const auto& rows : sel.selected) width = std::max(width, rows.size());
    int n = b.graph.n();

    std::vector<Var> branches;
    std::vector<std::vector<char>> row_active;
    for (size_t j = 0; j < width; j++) {
        std::vector<int> rows;
        for (const auto& s : sel.selected)
            if (j < s.size()) rows.push_back(s[j]);
        std::vector<char> active(n, 0);
        for (int vtx = 0; vtx < n; vtx++)
            if (j < sel.selected[b.seg[vtx]].size()) active[vtx] = 1;
        Var hj = individualize_embed(t, h, rows, v.psi);
        branches.push_back(refine(t, hj, b, v.gnn, gnn_steps));
        row_active.push_back(std::move(active));
    }

    IrLayerOut out;
    out.h_next = aggregate_branches(t, branches, row_active, b, v.agg, agg, &out.branch_reps);
    out.readout = sel.readout;
    out.q_next = sel.q_next;
    out.scores = sel.scores;
    out.selected = std::move(sel.selected);
    return out;
}

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    gnn_sets_ = cfg_.share_gnn_params ? 1 : cfg_.layers + 1;
    select_rng_.seed(derive_seed(cfg_.seed, 0x5e1ec7, 1));
    std::mt19937_64 rng(derive_seed(cfg_.seed, 0x1217, 2));
    int d = cfg_.hidden;

    auto add_linear = [&](const std::string& prefix, int in, int out) {
        store_.add(prefix + ".w", Tensor::glorot_uniform(in, out, rng));
        store_.add(prefix + ".b", Tensor::zeros({out}));
    };
    auto add_mlp = [&](const std::string& prefix, int in, int hid, int out) {
        add_linear(prefix + ".l1", in, hid);
        add_linear(prefix + ".l2", hid, out);
    };
    auto add_gru = [&](const std::string& prefix, int din) {
        for (const char* gate : {"z", "r", "h"}) {
            store_.add(prefix + ".w" + gate, Tensor::glorot_uniform(din, d, rng));
            store_.add(prefix + ".u" + gate, Tensor::glorot_uniform(d, d, rng));
            store_.add(prefix + ".b" + gate, Tensor::zeros({d}));
        }
    };

    add_linear("in", cfg_.in_dim, d);
    for (int s = 0; s < gnn_sets_; s++) {
        std::string prefix = "gnn" + std::to_string(s);
        store_.add(prefix + ".eps", Tensor::zeros({1}));
        add_mlp(prefix + ".mlp", d, d, d);
        add_gru(prefix + ".gru", d);
        // Update gate biased open so refinement steps propagate the
        // individualization mark instead of halving it every step.
        for (double& e : store_.get(prefix + ".gru.bz").value.data) e = 1.0;
    }
    if (cfg_.layers > 0) {
        add_mlp("agg_graph", d, d, d);
        if (cfg_.selector == SelectorMode::LearnedMlp) {
            add_mlp("sel.mlp", d, d, d);
        } else {
            add_gru("sel.gru", d);
            add_linear("sel.p", d, d);
        }
        add_linear("sel.readout", d, d);
        // Mask bias starts strongly negative: a freshly individualized row is
        // near-zeroed, the closest analogue of the discrete IR marker.
        add_mlp("psi", d, d, d);
        for (double& e : store_.get("psi.l2.b").value.data) e = -4.0;
        // Broadcast output starts at zero: the graph-level term it adds to
        // every row is sum-pooled over n nodes, and letting it grow from zero
        // keeps that background from burying per-class signal at init.
        add_mlp("agg_node", d, d, d);
        store_.get("agg_node.l2.w").value = Tensor::zeros({d, d});
    }
    // Zero head output: logits start at zero, so the first descent steps pull
    // class signal into the head instead of shrinking the shared trunk to
    // kill the initial logit spread.
    add_mlp("head", cfg_.embed_dim(), d, cfg_.out_dim);
    store_.get("head.l2.w").value = Tensor::zeros({d, cfg_.out_dim});
}

void Model::reseed_selector(uint64_t seed) { select_rng_.seed(seed); }

MlpVars Model::mlp_vars(Tape& t, const std::string& prefix, bool sigmoid_out) const {
    MlpVars m;
    m.w1 = t.param(store_.get(prefix + ".l1.w"));
    m.b1 = t.param(store_.get(prefix + ".l1.b"));
    m.w2 = t.param(store_.get(prefix + ".l2.w"));
    m.b2 = t.param(store_.get(prefix + ".l2.b"));
    m.sigmoid_out = sigmoid_out;
    return m;
}

GruVars Model::gru_vars(Tape& t, const std::string& prefix) const {
    auto p = [&](const std::string& name) { return t.param(store_.get(prefix + "." + name)); };
    GruVars g;
    g.wz = p("wz"); g.uz = p("uz"); g.bz = p("bz");
    g.wr = p("wr"); g.ur = p("ur"); g.br = p("br");
    g.wh = p("wh"); g.uh = p("uh"); g.bh = p("bh");
    return g;
}

GnnVars Model::gnn_vars(Tape& t, int set) const {
    std::string prefix = "gnn" + std::to_string(set);
    GnnVars g;
    g.eps = t.param(store_.get(prefix + ".eps"));
    g.mlp = mlp_vars(t, prefix + ".mlp");
    g.gru = gru_vars(t, prefix + ".gru");
    return g;
}

SelectorVars Model::selector_vars(Tape& t) const {
    SelectorVars sv;
    sv.agg_graph = mlp_vars(t, "agg_graph");
    if (cfg_.selector == SelectorMode::LearnedMlp) {
        sv.mlp = mlp_vars(t, "sel.mlp");
    } else {
        sv.gru = gru_vars(t, "sel.gru");
        sv.p_w = t.param(store_.get("sel.p.w"));
        sv.p_b = t.param(store_.get("sel.p.b"));
    }
    sv.readout_w = t.param(store_.get("sel.readout.w"));
    sv.readout_b = t.param(store_.get("sel.readout.b"));
    return sv;
}

MlpVars Model::psi_vars(Tape& t) const { return mlp_vars(t, "psi", true); }

AggVars Model::agg_vars(Tape& t) const {
    AggVars av;
    av.graph_mlp = mlp_vars(t, "agg_graph");
    av.node_mlp = mlp_vars(t, "agg_node");
    return av;
}

Var Model::embed(Tape& t, const Batch& b, ForwardTrace* trace) const {
    b.validate();
    require(b.features.cols() == cfg_.in_dim, "batch feature width does not match the model");
    int num_graphs = b.num_graphs;
    int d = cfg_.hidden;

    Var x = t.input(b.features);
    Var h = t.linear(x, t.param(store_.get("in.w")), t.param(store_.get("in.b")));
    h = refine(t, h, b, gnn_vars(t, 0), cfg_.gnn_steps);

    std::vector<Var> pooled{t.segment_sum(h, b.seg, num_graphs)};
    std::vector<Var> readouts;
    if (trace) {
        trace->pooled0 = t.val(pooled[0]);
        trace->layers.clear();
    }

    if (cfg_.layers > 0) {
        IrLayerVars lv;
        lv.sel = selector_vars(t);
        lv.psi = psi_vars(t);
        lv.agg = agg_vars(t);
        Var q = t.input(Tensor::zeros({num_graphs, d}));
        for (int l = 1; l <= cfg_.layers; l++) {
            lv.gnn = gnn_vars(t, cfg_.share_gnn_params ? 0 : l);
            IrLayerOut out = ir_layer(t, h, b, q, cfg_.k, cfg_.selector, cfg_.aggregator,
                                      cfg_.gnn_steps, lv, &select_rng_);
            h = out.h_next;
            q = out.q_next;
            pooled.push_back(t.segment_sum(h, b.seg, num_graphs));
            readouts.push_back(out.readout);
            if (trace) {
                ForwardTrace::Layer tl;
                tl.selected = out.selected;
                tl.scores = t.val(out.scores);
                tl.pooled = t.val(pooled.back());
                tl.readout = t.val(out.readout);
                for (Var rep : out.branch_reps) tl.branch_reps.push_back(t.val(rep));
                trace->layers.push_back(std::move(tl));
            }
        }
    }

    std::vector<Var> parts = pooled;
    parts.insert(parts.end(), readouts.begin(), readouts.end());
    Var emb = parts.size() == 1 ? parts[0] : t.concat_cols(parts);
    if (trace) trace->embedding = t.val(emb);
    return emb;
}

Var Model::forward(Tape& t, const Batch& b, ForwardTrace* trace) const {
    Var emb = embed(t, b, trace);
    Var logits = mlp_apply(t, mlp_vars(t, "head"), emb);
    if (trace) trace->logits = t.val(logits);
    return logits;
}

}  // namespace gnnir
