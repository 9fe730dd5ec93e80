#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gnnir/autodiff.hpp"
#include "gnnir/graph.hpp"
#include "gnnir/tensor.hpp"

namespace gnnir {

enum class SelectorMode { LearnedGru, LearnedMlp, Random };
enum class Aggregator { Max, Sum };

SelectorMode selector_from_string(const std::string& s);
Aggregator aggregator_from_string(const std::string& s);
std::string to_string(SelectorMode m);
std::string to_string(Aggregator a);

struct ModelConfig {
    int layers = 1;  // individualization-refinement rounds (L)
    int k = 2;       // branches per round
    int hidden = 64;
    int gnn_steps = 3;
    int in_dim = 1;  // node feature width; featureless graphs use constant 1.0
    int out_dim = 1;
    SelectorMode selector = SelectorMode::LearnedGru;
    Aggregator aggregator = Aggregator::Max;
    bool share_gnn_params = true;
    uint64_t seed = 0;

    void validate() const;
    int embed_dim() const { return hidden * (2 * layers + 1); }
};

// Disjoint union of member graphs. Vertex v belongs to member seg[v];
// members occupy contiguous vertex ranges and no edges cross members.
struct Batch {
    Graph graph;
    std::vector<int> seg;
    int num_graphs = 0;
    Tensor features;  // [n x in_dim]
    std::vector<int> labels;
    std::vector<int> sizes;

    void validate() const;
};

// Parameter handles on one tape.
struct MlpVars {
    Var w1, b1, w2, b2;
    bool sigmoid_out = false;  // default: relu hidden, linear output
};

struct GnnVars {
    Var eps;  // shape [1]
    MlpVars mlp;
    GruVars gru;
};

struct SelectorVars {
    MlpVars agg_graph;      // node MLP summed per graph to form the selector input
    GruVars gru;            // LearnedGru: carries q across rounds
    Var p_w, p_b;           // projection from GRU state to the probe vector p
    MlpVars mlp;            // LearnedMlp: probe directly from the pooled input
    Var readout_w, readout_b;
};

struct AggVars {
    MlpVars graph_mlp;  // per-branch graph representation
    MlpVars node_mlp;   // broadcast back onto rows
};

struct IrLayerVars {
    GnnVars gnn;
    SelectorVars sel;
    MlpVars psi;  // individualization mask MLP, sigmoid output
    AggVars agg;
};

Var mlp_apply(Tape& t, const MlpVars& m, Var x);

// m_v = (1 + eps) * h_v + sum of neighbor rows
Var gin_conv(Tape& t, Var h, const Graph& g, Var eps);

// One message-passing step: the GIN message is MLP-transformed, standardized
// per graph, and drives a GRU update of h.
Var mpnn_step(Tape& t, Var h, const Batch& b, const GnnVars& p);
Var refine(Tape& t, Var h, const Batch& b, const GnnVars& p, int steps);

// tanh of the p-projected rows, p normalized per segment.
Var node_scores(Tape& t, Var h, Var p, const std::vector<int>& seg);

// Per-segment indices of the min(k, segment size) largest entries,
// ties broken by lowest vertex id. Returned grouped by segment, rank order.
std::vector<std::vector<int>> topk_rows(const Tensor& scores, const std::vector<int>& seg,
                                        int num_segments, int k);

struct TopkResult {
    std::vector<std::vector<int>> selected;  // [segment][rank] -> vertex row
    std::vector<int> flat;                   // all selected rows, segment-major
    std::vector<int> seg_of_flat;
    Var scores;   // [n]
    Var p;        // [B x d]
    Var readout;  // [B x d]
    Var q_next;   // [B x d]
};

// Pools rows into a per-graph selector input, advances the selector state,
// scores and ranks rows per graph. Mode Random draws rows from rng instead of
// the ranking; scores still feed the readout.
TopkResult select_topk(Tape& t, Var h, const Batch& b, Var q_prev, int k, SelectorMode mode,
                       const SelectorVars& sv, std::mt19937_64* rng);

// Multiplies row r (one per entry of rows) by a sigmoid MLP of itself;
// all other rows pass through unchanged.
Var individualize_embed(Tape& t, Var h, const std::vector<int>& rows, const MlpVars& psi);

// Per branch: graph representation summed from an MLP of the rows, broadcast
// back through a second MLP, then elementwise max (or sum) across branches.
// branch_row_active masks rows of segments that had fewer selections than
// the branch index.
Var aggregate_branches(Tape& t, const std::vector<Var>& branches,
                       const std::vector<std::vector<char>>& branch_row_active, const Batch& b,
                       const AggVars& av, Aggregator agg,
                       std::vector<Var>* branch_reps = nullptr);

struct IrLayerOut {
    Var h_next;
    Var readout;  // [B x d]
    Var q_next;
    Var scores;  // [n]
    std::vector<std::vector<int>> selected;
    std::vector<Var> branch_reps;
};

// One full round: select, then per selected vertex individualize + refine,
// then aggregate the branches.
IrLayerOut ir_layer(Tape& t, Var h, const Batch& b, Var q_prev, int k, SelectorMode mode,
                    Aggregator agg, int gnn_steps, const IrLayerVars& v, std::mt19937_64* rng);

struct ForwardTrace {
    struct Layer {
        std::vector<std::vector<int>> selected;
        Tensor scores;
        Tensor pooled;       // [B x d] after this round
        Tensor readout;      // [B x d]
        std::vector<Tensor> branch_reps;  // per-branch pooled representation
    };
    Tensor pooled0;
    std::vector<Layer> layers;
    Tensor embedding;  // [B x embed_dim]
    Tensor logits;     // [B x out_dim]
};

class Model {
  public:
    explicit Model(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }

    // Pre-head embedding: per-round pooled sums and readout features,
    // concatenated. Shape [B x embed_dim].
    Var embed(Tape& t, const Batch& b, ForwardTrace* trace = nullptr) const;
    // Head MLP applied to the embedding. Shape [B x out_dim].
    Var forward(Tape& t, const Batch& b, ForwardTrace* trace = nullptr) const;

    void reseed_selector(uint64_t seed);

  private:
    struct GnnNames {
        std::string prefix;
    };

    ModelConfig cfg_;
    mutable ParamStore store_;  // tape nodes need mutable Parameter handles
    int gnn_sets_;
    mutable std::mt19937_64 select_rng_;

    GnnVars gnn_vars(Tape& t, int set) const;
    SelectorVars selector_vars(Tape& t) const;
    MlpVars psi_vars(Tape& t) const;
    AggVars agg_vars(Tape& t) const;
    MlpVars mlp_vars(Tape& t, const std::string& prefix, bool sigmoid_out = false) const;
    GruVars gru_vars(Tape& t, const std::string& prefix) const;
};

}  // namespace gnnir
