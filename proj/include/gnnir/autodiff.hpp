#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gnnir/graph.hpp"
#include "gnnir/tensor.hpp"

namespace gnnir {

// Handle into a Tape. Only meaningful for the tape that produced it.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
};

// Named parameters with stable addresses, iterated in registration order so
// optimizer updates and checkpoints are deterministic.
class ParamStore {
  public:
    ParamStore() = default;
    ParamStore(const ParamStore&) = delete;
    ParamStore& operator=(const ParamStore&) = delete;
    ParamStore(ParamStore&&) = default;
    ParamStore& operator=(ParamStore&&) = default;

    Parameter& add(const std::string& name, Tensor init);
    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) > 0; }
    std::vector<Parameter*> all();
    std::vector<const Parameter*> all() const;
    void zero_grad();
    long long total_size() const;
    std::map<std::string, Tensor> snapshot() const;
    void restore(const std::map<std::string, Tensor>& values);

  private:
    std::vector<std::unique_ptr<Parameter>> params_;
    std::map<std::string, int> index_;
};

struct GruVars {
    Var wz, uz, bz, wr, ur, br, wh, uh, bh;
};

// Reverse-mode autodiff over a linear tape. Nodes are recorded in execution
// order; backward() walks them in reverse, accumulating gradients additively
// across fan-out. With fixed inputs the same program produces bit-identical
// values and gradients.
class Tape {
  public:
    Var input(Tensor value);
    Var param(Parameter& p);

    const Tensor& val(Var v) const;
    const Tensor& grad(Var v) const;
    bool has_grad(Var v) const;

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var hadamard(Var a, Var b);
    Var scale(Var a, double c);
    Var add_const(Var a, double c);
    Var tanh_t(Var a);
    Var sigmoid_t(Var a);
    Var relu_t(Var a);

    Var matmul(Var a, Var b);
    Var linear(Var x, Var w, Var b);  // x*w with b broadcast over rows
    Var mul_scalar(Var a, Var s);     // s has shape [1]
    Var rows_scale(Var a, Var s);     // row i of a scaled by s[i]

    Var neighbor_sum(Var h, const Graph& g);  // g must outlive the tape
    Var segment_sum(Var x, std::vector<int> seg, int num_segments);
    Var segment_mean(Var x, std::vector<int> seg, int num_segments);
    // Per-segment, per-feature standardization: (x - mean) / sqrt(var + eps),
    // biased variance over the segment's rows. Single-row segments map to 0.
    Var segment_standardize(Var x, std::vector<int> seg, int num_segments, double eps);
    Var add_segment_rows(Var x, Var rows, std::vector<int> seg);
    // scores[v] = x_v . p_{seg[v]} / max(||p_{seg[v]}||_2, eps)
    Var row_l2_normalize_dot(Var x, Var p, std::vector<int> seg, double eps = 1e-12);
    Var row_l2_normalize_dot(Var x, Var p, double eps = 1e-12);
    Var gather_rows(Var x, std::vector<int> rows);
    // out[s] = sum of x[indices[j]] over j with seg_of_index[j] == s
    Var gather_sum_by_segment(Var x, std::vector<int> indices, std::vector<int> seg_of_index,
                              int num_segments);
    // row rows[b] of x multiplied elementwise by masks row b; other rows pass through
    Var individualize_rows(Var x, std::vector<int> rows, Var masks);

    // Elementwise max/sum across same-shaped branches. Optional per-branch row
    // activity masks; inactive rows are ignored (max) or contribute zero (sum).
    // Max ties resolve to the lowest branch index.
    Var branch_max(const std::vector<Var>& branches,
                   std::vector<std::vector<char>> row_active = {});
    Var branch_sum(const std::vector<Var>& branches,
                   std::vector<std::vector<char>> row_active = {});
    Var concat_cols(const std::vector<Var>& parts);
    Var sum_all(Var x);

    Var gru_cell(Var x, Var h, const GruVars& p);
    Var cross_entropy_logits(Var logits, std::vector<int> labels);  // mean over rows
    Var l1_loss(Var pred, std::vector<double> target);              // mean absolute error

    void backward(Var loss);
    void clear();
    size_t num_nodes() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor value;
        std::function<void(Tape&, int)> backward;
        Parameter* param = nullptr;
        std::vector<Tensor> saved;
    };

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    std::vector<char> has_grad_;

    int push(Tensor value);
    Tensor& gbuf(int id);
    const Tensor& v(int id) const { return nodes_[id].value; }
    void check(Var v, const char* what) const;
};

}  // namespace gnnir
