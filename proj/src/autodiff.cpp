#include "gnnir/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gnnir {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;

namespace {

CMatMap cmap(const Tensor& t, int rows, int cols) { return CMatMap(t.data.data(), rows, cols); }
MatMap map(Tensor& t, int rows, int cols) { return MatMap(t.data.data(), rows, cols); }

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

int seg_rows(const Tensor& t) {
    // Accepts [d] as a single row or [B x d].
    return t.ndim() == 1 ? 1 : t.rows();
}

int last_dim(const Tensor& t) { return t.shape.back(); }

}  // namespace

Parameter& ParamStore::add(const std::string& name, Tensor init) {
    require(index_.count(name) == 0, "duplicate parameter name: " + name);
    auto p = std::make_unique<Parameter>();
    p->name = name;
    p->grad = Tensor::zeros(init.shape);
    p->value = std::move(init);
    index_[name] = static_cast<int>(params_.size());
    params_.push_back(std::move(p));
    return *params_.back();
}

Parameter& ParamStore::get(const std::string& name) {
    auto it = index_.find(name);
    require(it != index_.end(), "unknown parameter: " + name);
    return *params_[it->second];
}

const Parameter& ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "unknown parameter: " + name);
    return *params_[it->second];
}

std::vector<Parameter*> ParamStore::all() {
    std::vector<Parameter*> out;
    for (auto& p : params_) out.push_back(p.get());
    return out;
}

std::vector<const Parameter*> ParamStore::all() const {
    std::vector<const Parameter*> out;
    for (const auto& p : params_) out.push_back(p.get());
    return out;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
}

long long ParamStore::total_size() const {
    long long total = 0;
    for (const auto& p : params_) total += p->value.size();
    return total;
}

std::map<std::string, Tensor> ParamStore::snapshot() const {
    std::map<std::string, Tensor> out;
    for (const auto& p : params_) out[p->name] = p->value;
    return out;
}

void ParamStore::restore(const std::map<std::string, Tensor>& values) {
    for (auto& p : params_) {
        auto it = values.find(p->name);
        require(it != values.end(), "snapshot missing parameter: " + p->name);
        require(it->second.same_shape(p->value), "snapshot shape mismatch for " + p->name);
        p->value = it->second;
    }
}

int Tape::push(Tensor value) {
    nodes_.push_back(Node{std::move(value), nullptr, nullptr, {}});
    return static_cast<int>(nodes_.size()) - 1;
}

void Tape::check(Var v, const char* what) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
        throw std::invalid_argument(std::string("invalid Var passed to ") + what);
}

Tensor& Tape::gbuf(int id) {
    if (!has_grad_[id]) {
        grads_[id] = Tensor::zeros(nodes_[id].value.shape);
        has_grad_[id] = 1;
    }
    return grads_[id];
}

Var Tape::input(Tensor value) { return Var{push(std::move(value))}; }

Var Tape::param(Parameter& p) {
    int id = push(p.value);
    nodes_[id].param = &p;
    return Var{id};
}

const Tensor& Tape::val(Var v) const {
    check(v, "val");
    return nodes_[v.id].value;
}

const Tensor& Tape::grad(Var v) const {
    check(v, "grad");
    if (!has_grad_[v.id]) throw std::logic_error("gradient not populated; call backward first");
    return grads_[v.id];
}

bool Tape::has_grad(Var v) const {
    return v.valid() && v.id < static_cast<int>(has_grad_.size()) && has_grad_[v.id];
}

Var Tape::add(Var a, Var b) {
    check(a, "add");
    check(b, "add");
    require(v(a.id).same_shape(v(b.id)), "add: shape mismatch");
    Tensor out = v(a.id);
    const auto& bd = v(b.id).data;
    for (size_t i = 0; i < out.data.size(); i++) out.data[i] += bd[i];
    int id = push(std::move(out));
    int ai = a.id, bi = b.id;
    nodes_[id].backward = [ai, bi](Tape& t, int self) {
        const auto& g = t.grads_[self].data;
        auto& ga = t.gbuf(ai).data;
        auto& gb = t.gbuf(bi).data;
        for (size_t i = 0; i < g.size(); i++) {
            ga[i] += g[i];
            gb[i] += g[i];
        }
    };
    return Var{id};
}

Var Tape::sub(Var a, Var b) {
    check(a, "sub");
    check(b, "sub");
    require(v(a.id).same_shape(v(b.id)), "sub: shape mismatch");
    Tensor out = v(a.id);
    const auto& bd = v(b.id).data;
    for (size_t i = 0; i < out.data.size(); i++) out.data[i] -= bd[i];
    int id = push(std::move(out));
    int ai = a.id, bi = b.id;
    nodes_[id].backward = [ai, bi](Tape& t, int self) {
        const auto& g = t.grads_[self].data;
        auto& ga = t.gbuf(ai).data;
        auto& gb = t.gbuf(bi).data;
        for (size_t i = 0; i < g.size(); i++) {
            ga[i] += g[i];
            gb[i] -= g[i];
        }
    };
    return Var{id};
}

Var Tape::hadamard(Var a, Var b) {
    check(a, "hadamard");
    check(b, "hadamard");
    require(v(a.id).same_shape(v(b.id)), "hadamard: shape mismatch");
    Tensor out = v(a.id);
    const auto& bd = v(b.id).data;
    for (size_t i = 0; i < out.data.size(); i++) out.data[i] *= bd[i];
    int id = push(std::move(out));
    int ai = a.id, bi = b.id;
    nodes_[id].backward = [ai, bi](Tape& t, int self) {
        const auto& g = t.grads_[self].data;
        const auto& av = t.v(ai).data;
        const auto& bv = t.v(bi).data;
        auto& ga = t.gbuf(ai).data;
        auto& gb = t.gbuf(bi).data;
        for (size_t i = 0; i < g.size(); i++) {
            ga[i] += g[i] * bv[i];
            gb[i] += g[i] * av[i];
        }
    };
    return Var{id};
}

Var Tape::scale(Var a, double c) {
    check(a, "scale");
    Tensor out = v(a.id);
    for (double& x : out.data) x *= c;
    int id = push(std::move(out));
    int ai = a.id;
    nodes_[id].backward = [ai, c](Tape& t, int self) {
        const auto& g = t.grads_[self].data;
        auto& ga = t.gbuf(ai).data;
        for (size_t i = 0; i < g.size(); i++) ga[i] += c * g[i];
    };
    return Var{id};
}

Var Tape::add_const(Var a, double c) {
    check(a, "add_const");
    Tensor out = v(a.id);
    for (double& x : out.data) x += c;
    int id = push(std::move(out));
    int ai = a.id;
    nodes_[id].backward = [ai](Tape& t, int self) {
        const auto& g = t.grads_[self].data;
        auto& ga = t.gbuf(ai).data;
        for (size_t i = 0; i < g.size(); i++) ga[i] += g[i];
    };
    return Var{id};
}

Var Tape::tanh_t(Var a) {
    check(a, "tanh");
    Tensor out = v(a.id);
    for (double& x : out.data) x = std::tanh(x);
    int id = push(std::move(out));
    int ai = a.id;
    nodes_[id].backward = [ai](Tape& t, int self) {
        const auto& g = t.grads_[self].data;
        const auto& y = t.v(self).data;
        auto& ga = t.gbuf(ai).data;
        for (size_t i = 0; i < g.size(); i++) ga[i] += g[i] * (1.0 - y[i] * y[i]);
    };
    return Var{id};
}

Var Tape::sigmoid_t(Var a) {
    check(a, "sigmoid");
    Tensor out = v(a.id);
    for (double& x : out.data) x = 1.0 / (1.0 + std::exp(-x));
    int id = push(std::move(out));
    int ai = a.id;
    nodes_[id].backward = [ai](Tape& t, int self) {
        const auto& g = t.grads_[self].data;
        const auto& y = t.v(self).data;
        auto& ga = t.gbuf(ai).data;
        for (size_t i = 0; i < g.size(); i++) ga[i] += g[i] * y[i] * (1.0 - y[i]);
    };
    return Var{id};
}

Var Tape::relu_t(Var a) {
    check(a, "relu");
    Tensor out = v(a.id);
    for (double& x : out.data) x = x > 0.0 ? x : 0.0;
    int id = push(std::move(out));
    int ai = a.id;
    nodes_[id].backward = [ai](Tape& t, int self) {
        const auto& g = t.grads_[self].data;
        const auto& y = t.v(self).data;
        auto& ga = t.gbuf(ai).data;
        for (size_t i = 0; i < g.size(); i++)
            if (y[i] > 0.0) ga[i] += g[i];
    };
    return Var{id};
}

Var Tape::matmul(Var a, Var b) {
    check(a, "matmul");
    check(b, "matmul");
    const Tensor& at = v(a.id);
    const Tensor& bt = v(b.id);
    require(at.ndim() == 2 && bt.ndim() == 2, "matmul: operands must be 2-D");
    require(at.cols() == bt.rows(), "matmul: inner dimensions differ");
    int m = at.rows(), k = at.cols(), n = bt.cols();
    Tensor out = Tensor::zeros({m, n});
    map(out, m, n).noalias() = cmap(at, m, k) * cmap(bt, k, n);
    int id = push(std::move(out));
    int ai = a.id, bi = b.id;
    nodes_[id].backward = [ai, bi, m, k, n](Tape& t, int self) {
        CMatMap g(t.grads_[self].data.data(), m, n);
        CMatMap av(t.v(ai).data.data(), m, k);
        CMatMap bv(t.v(bi).data.data(), k, n);
        map(t.gbuf(ai), m, k).noalias() += g * bv.transpose();
        map(t.gbuf(bi), k, n).noalias() += av.transpose() * g;
    };
    return Var{id};
}

Var Tape::linear(Var x, Var w, Var b) {
    check(x, "linear");
    check(w, "linear");
    check(b, "linear");
    const Tensor& xt = v(x.id);
    const Tensor& wt = v(w.id);
    const Tensor& bt = v(b.id);
    require(xt.ndim() == 2 && wt.ndim() == 2, "linear: x and w must be 2-D");
    require(bt.ndim() == 1, "linear: bias must be 1-D");
    require(xt.cols() == wt.rows() && wt.cols() == bt.shape[0], "linear: dimension mismatch");
    int m = xt.rows(), k = xt.cols(), n = wt.cols();
    Tensor out = Tensor::zeros({m, n});
    map(out, m, n).noalias() = cmap(xt, m, k) * cmap(wt, k, n);
    for (int i = 0; i < m; i++)
        for (int j = 0; j < n; j++) out.data[static_cast<size_t>(i) * n + j] += bt.data[j];
    int id = push(std::move(out));
    int xi = x.id, wi = w.id, bi = b.id;
    nodes_[id].backward = [xi, wi, bi, m, k, n](Tape& t, int self) {
        CMatMap g(t.grads_[self].data.data(), m, n);
        CMatMap xv(t.v(xi).data.data(), m, k);
        CMatMap wv(t.v(wi).data.data(), k, n);
        map(t.gbuf(xi), m, k).noalias() += g * wv.transpose();
        map(t.gbuf(wi), k, n).noalias() += xv.transpose() * g;
        auto& gb = t.gbuf(bi).data;
        for (int i = 0; i < m; i++)
            for (int j = 0; j < n; j++) gb[j] += g(i, j);
    };
    return Var{id};
}

Var Tape::mul_scalar(Var a, Var s) {
    check(a, "mul_scalar");
    check(s, "mul_scalar");
    require(v(s.id).size() == 1, "mul_scalar: s must be a scalar");
    double sv = v(s.id).data[0];
    Tensor out = v(a.id);
    for (double& x : out.data) x *= sv;
    int id = push(std::move(out));
    int ai = a.id, si = s.id;
    nodes_[id].backward = [ai, si](Tape& t, int self) {
        const auto& g = t.grads_[self].data;
        const auto& av = t.v(ai).data;
        double sv2 = t.v(si).data[0];
        auto& ga = t.gbuf(ai).data;
        double acc = 0.0;
        for (size_t i = 0; i < g.size(); i++) {
            ga[i] += sv2 * g[i];
            acc += g[i] * av[i];
        }
        t.gbuf(si).data[0] += acc;
    };
    return Var{id};
}

Var Tape::rows_scale(Var a, Var s) {
    check(a, "rows_scale");
    check(s, "rows_scale");
    const Tensor& at = v(a.id);
    const Tensor& st = v(s.id);
    require(at.ndim() == 2 && st.ndim() == 1, "rows_scale: need 2-D a and 1-D s");
    require(at.rows() == st.shape[0], "rows_scale: row count mismatch");
    int m = at.rows(), n = at.cols();
    Tensor out = at;
    for (int i = 0; i < m; i++)
        for (int j = 0; j < n; j++) out.data[static_cast<size_t>(i) * n + j] *= st.data[i];
    int id = push(std::move(out));
    int ai = a.id, si = s.id;
    nodes_[id].backward = [ai, si, m, n](Tape& t, int self) {
        const auto& g = t.grads_[self].data;
        const auto& av = t.v(ai).data;
        const auto& sv = t.v(si).data;
        auto& ga = t.gbuf(ai).data;
        auto& gs = t.gbuf(si).data;
        for (int i = 0; i < m; i++) {
            double acc = 0.0;
            for (int j = 0; j < n; j++) {
                size_t e = static_cast<size_t>(i) * n + j;
                ga[e] += sv[i] * g[e];
                acc += g[e] * av[e];
            }
            gs[i] += acc;
        }
    };
    return Var{id};
}

Var Tape::neighbor_sum(Var h, const Graph& g) {
    check(h, "neighbor_sum");
    const Tensor& ht = v(h.id);
    require(ht.ndim() == 2 && ht.rows() == g.n(), "neighbor_sum: h must be n x d");
    int n = ht.rows(), d = ht.cols();
    Tensor out = Tensor::zeros({n, d});
    for (int vtx = 0; vtx < n; vtx++) {
        double* row = out.data.data() + static_cast<size_t>(vtx) * d;
        for (int u : g.neighbors(vtx)) {
            const double* src = ht.data.data() + static_cast<size_t>(u) * d;
            for (int j = 0; j < d; j++) row[j] += src[j];
        }
    }
    int id = push(std::move(out));
    int hi = h.id;
    const Graph* gp = &g;
    nodes_[id].backward = [hi, gp, n, d](Tape& t, int self) {
        const auto& gd = t.grads_[self].data;
        auto& gh = t.gbuf(hi).data;
        for (int vtx = 0; vtx < n; vtx++) {
            double* row = gh.data() + static_cast<size_t>(vtx) * d;
            for (int u : gp->neighbors(vtx)) {
                const double* src = gd.data() + static_cast<size_t>(u) * d;
                for (int j = 0; j < d; j++) row[j] += src[j];
            }
        }
    };
    return Var{id};
}

Var Tape::segment_sum(Var x, std::vector<int> seg, int num_segments) {
    check(x, "segment_sum");
    const Tensor& xt = v(x.id);
    require(xt.ndim() == 2 && xt.rows() == static_cast<int>(seg.size()),
            "segment_sum: x rows must match segment ids");
    int n = xt.rows(), d = xt.cols();
    for (int s : seg) require(s >= 0 && s < num_segments, "segment_sum: segment id out of range");
    Tensor out = Tensor::zeros({num_segments, d});
    for (int i = 0; i < n; i++) {
        double* row = out.data.data() + static_cast<size_t>(seg[i]) * d;
        const double* src = xt.data.data() + static_cast<size_t>(i) * d;
        for (int j = 0; j < d; j++) row[j] += src[j];
    }
    int id = push(std::move(out));
    int xi = x.id;
    nodes_[id].backward = [xi, seg = std::move(seg), n, d](Tape& t, int self) {
        const auto& g = t.grads_[self].data;
        auto& gx = t.gbuf(xi).data;
        for (int i = 0; i < n; i++) {
            const double* src = g.data() + static_cast<size_t>(seg[i]) * d;
            double* row = gx.data() + static_cast<size_t>(i) * d;
            for (int j = 0; j < d; j++) row[j] += src[j];
        }
    };
    return Var{id};
}

Var Tape::segment_mean(Var x, std::vector<int> seg, int num_segments) {
    check(x, "segment_mean");
    const Tensor& xt = v(x.id);
    require(xt.ndim() == 2 && xt.rows() == static_cast<int>(seg.size()),
            "segment_mean: x rows must match segment ids");
    int n = xt.rows(), d = xt.cols();
    std::vector<double> inv_count(num_segments, 0.0);
    for (int s : seg) {
        require(s >= 0 && s < num_segments, "segment_mean: segment id out of range");
        inv_count[s] += 1.0;
    }
    for (double& c : inv_count) {
        require(c > 0.0, "segment_mean: empty segment");
        c = 1.0 / c;
    }
    Tensor out = Tensor::zeros({num_segments, d});
    for (int i = 0; i < n; i++) {
        double* row = out.data.data() + static_cast<size_t>(seg[i]) * d;
        const double* src = xt.data.data() + static_cast<size_t>(i) * d;
        for (int j = 0; j < d; j++) row[j] += src[j];
    }
    for (int s = 0; s < num_segments; s++) {
        double* row = out.data.data() + static_cast<size_t>(s) * d;
        for (int j = 0; j < d; j++) row[j] *= inv_count[s];
    }
    int id = push(std::move(out));
    int xi = x.id;
    nodes_[id].backward = [xi, seg = std::move(seg), inv_count = std::move(inv_count), n,
                           d](Tape& t, int self) {
        const auto& g = t.grads_[self].data;
        auto& gx = t.gbuf(xi).data;
        for (int i = 0; i < n; i++) {
            const double* src = g.data() + static_cast<size_t>(seg[i]) * d;
            double scale = inv_count[seg[i]];
            double* row = gx.data() + static_cast<size_t>(i) * d;
            for (int j = 0; j < d; j++) row[j] += scale * src[j];
        }
    };
    return Var{id};
}

Var Tape::segment_standardize(Var x, std::vector<int> seg, int num_segments, double eps) {
    check(x, "segment_standardize");
    const Tensor& xt = v(x.id);
    require(xt.ndim() == 2 && xt.rows() == static_cast<int>(seg.size()),
            "segment_standardize: x rows must match segment ids");
    require(eps > 0.0, "segment_standardize: eps must be positive");
    int n = xt.rows(), d = xt.cols();
    std::vector<double> inv_count(num_segments, 0.0);
    for (int s : seg) {
        require(s >= 0 && s < num_segments, "segment_standardize: segment id out of range");
        inv_count[s] += 1.0;
    }
    for (double& c : inv_count) {
        require(c > 0.0, "segment_standardize: empty segment");
        c = 1.0 / c;
    }
    Tensor mean = Tensor::zeros({num_segments, d});
    for (int i = 0; i < n; i++) {
        double* row = mean.data.data() + static_cast<size_t>(seg[i]) * d;
        const double* src = xt.data.data() + static_cast<size_t>(i) * d;
        for (int j = 0; j < d; j++) row[j] += src[j];
    }
    for (int s = 0; s < num_segments; s++) {
        double* row = mean.data.data() + static_cast<size_t>(s) * d;
        for (int j = 0; j < d; j++) row[j] *= inv_count[s];
    }
    Tensor inv_std = Tensor::zeros({num_segments, d});
    for (int i = 0; i < n; i++) {
        const double* m = mean.data.data() + static_cast<size_t>(seg[i]) * d;
        const double* src = xt.data.data() + static_cast<size_t>(i) * d;
        double* acc = inv_std.data.data() + static_cast<size_t>(seg[i]) * d;
        for (int j = 0; j < d; j++) {
            double c = src[j] - m[j];
            acc[j] += c * c;
        }
    }
    for (int s = 0; s < num_segments; s++) {
        double* row = inv_std.data.data() + static_cast<size_t>(s) * d;
        for (int j = 0; j < d; j++) row[j] = 1.0 / std::sqrt(row[j] * inv_count[s] + eps);
    }
    Tensor out = Tensor::zeros({n, d});
    for (int i = 0; i < n; i++) {
        const double* m = mean.data.data() + static_cast<size_t>(seg[i]) * d;
        const double* is = inv_std.data.data() + static_cast<size_t>(seg[i]) * d;
        const double* src = xt.data.data() + static_cast<size_t>(i) * d;
        double* dst = out.data.data() + static_cast<size_t>(i) * d;
        for (int j = 0; j < d; j++) dst[j] = (src[j] - m[j]) * is[j];
    }
    int id = push(std::move(out));
    nodes_[id].saved = {std::move(inv_std)};
    int xi = x.id;
    nodes_[id].backward = [xi, seg = std::move(seg), inv_count = std::move(inv_count),
                           num_segments, n, d](Tape& t, int self) {
        const Tensor& y = t.v(self);
        const Tensor& inv_std = t.nodes_[self].saved[0];
        const auto& g = t.grads_[self].data;
        auto& gx = t.gbuf(xi).data;
        // dL/dx = inv_std * (g - mean(g) - y * mean(g*y)), means per segment.
        std::vector<double> gmean(static_cast<size_t>(num_segments) * d, 0.0);
        std::vector<double> gymean(static_cast<size_t>(num_segments) * d, 0.0);
        for (int i = 0; i < n; i++) {
            size_t off = static_cast<size_t>(i) * d;
            size_t soff = static_cast<size_t>(seg[i]) * d;
            for (int j = 0; j < d; j++) {
                gmean[soff + j] += g[off + j];
                gymean[soff + j] += g[off + j] * y.data[off + j];
            }
        }
        for (int s = 0; s < num_segments; s++) {
            size_t soff = static_cast<size_t>(s) * d;
            for (int j = 0; j < d; j++) {
                gmean[soff + j] *= inv_count[s];
                gymean[soff + j] *= inv_count[s];
            }
        }
        for (int i = 0; i < n; i++) {
            size_t off = static_cast<size_t>(i) * d;
            size_t soff = static_cast<size_t>(seg[i]) * d;
            const double* is = inv_std.data.data() + soff;
            for (int j = 0; j < d; j++)
                gx[off + j] += is[j] * (g[off + j] - gmean[soff + j] -
                                        y.data[off + j] * gymean[soff + j]);
        }
    };
    return Var{id};
}

Var Tape::add_segment_rows(Var x, Var rows, std::vector<int> seg) {
    check(x, "add_segment_rows");
    check(rows, "add_segment_rows");
    const Tensor& xt = v(x.id);
    const Tensor& rt = v(rows.id);
    require(xt.ndim() == 2 && rt.ndim() == 2 && xt.cols() == rt.cols(),
            "add_segment_rows: shape mismatch");
    require(xt.rows() == static_cast<int>(seg.size()), "add_segment_rows: seg size mismatch");
    int n = xt.rows(), d = xt.cols();
    Tensor out = xt;
    for (int i = 0; i < n; i++) {
        require(seg[i] >= 0 && seg[i] < rt.rows(), "add_segment_rows: segment id out of range");
        const double* src = rt.data.data() + static_cast<size_t>(seg[i]) * d;
        double* row = out.data.data() + static_cast<size_t>(i) * d;
        for (int j = 0; j < d; j++) row[j] += src[j];
    }
    int id = push(std::move(out));
    int xi = x.id, ri = rows.id;
    nodes_[id].backward = [xi, ri, seg = std::move(seg), n, d](Tape& t, int self) {
        const auto& g = t.grads_[self].data;
        auto& gx = t.gbuf(xi).data;
        auto& gr = t.gbuf(ri).data;
        for (size_t i = 0; i < g.size(); i++) gx[i] += g[i];
        for (int i = 0; i < n; i++) {
            const double* src = g.data() + static_cast<size_t>(i) * d;
            double* row = gr.data() + static_cast<size_t>(seg[i]) * d;
            for (int j = 0; j < d; j++) row[j] += src[j];
        }
    };
    return Var{id};
}

Var Tape::row_l2_normalize_dot(Var x, Var p, std::vector<int> seg, double eps) {
    check(x, "row_l2_normalize_dot");
    check(p, "row_l2_normalize_dot");
    const Tensor& xt = v(x.id);
    const Tensor& pt = v(p.id);
    require(xt.ndim() == 2, "row_l2_normalize_dot: x must be 2-D");
    int n = xt.rows(), d = xt.cols();
    int b = seg_rows(pt);
    require(last_dim(pt) == d, "row_l2_normalize_dot: p dimension mismatch");
    require(static_cast<int>(seg.size()) == n, "row_l2_normalize_dot: seg size mismatch");
    std::vector<double> inv_norm(b);
    for (int s = 0; s < b; s++) {
        const double* pr = pt.data.data() + static_cast<size_t>(s) * d;
        double sq = 0.0;
        for (int j = 0; j < d; j++) sq += pr[j] * pr[j];
        inv_norm[s] = 1.0 / std::max(std::sqrt(sq), eps);
    }
    Tensor out = Tensor::zeros({n});
    for (int i = 0; i < n; i++) {
        require(seg[i] >= 0 && seg[i] < b, "row_l2_normalize_dot: segment id out of range");
        const double* xr = xt.data.data() + static_cast<size_t>(i) * d;
        const double* pr = pt.data.data() + static_cast<size_t>(seg[i]) * d;
        double dot = 0.0;
        for (int j = 0; j < d; j++) dot += xr[j] * pr[j];
        out.data[i] = dot * inv_norm[seg[i]];
    }
    int id = push(std::move(out));
    int xi = x.id, pi = p.id;
    nodes_[id].backward = [xi, pi, seg = std::move(seg), inv_norm = std::move(inv_norm), n, d,
                           eps](Tape& t, int self) {
        const auto& g = t.grads_[self].data;
        const auto& score = t.v(self).data;
        const auto& xv = t.v(xi).data;
        const auto& pv = t.v(pi).data;
        auto& gx = t.gbuf(xi).data;
        auto& gp = t.gbuf(pi).data;
        for (int i = 0; i < n; i++) {
            int s = seg[i];
            double inv = inv_norm[s];
            bool clamped = inv >= 1.0 / eps * (1.0 - 1e-9);
            const double* xr = xv.data() + static_cast<size_t>(i) * d;
            const double* pr = pv.data() + static_cast<size_t>(s) * d;
            double* gxr = gx.data() + static_cast<size_t>(i) * d;
            double* gpr = gp.data() + static_cast<size_t>(s) * d;
            double gi = g[i];
            if (gi == 0.0) continue;
            for (int j = 0; j < d; j++) gxr[j] += gi * pr[j] * inv;
            if (clamped) {
                for (int j = 0; j < d; j++) gpr[j] += gi * xr[j] * inv;
            } else {
                double sc = score[i];
                for (int j = 0; j < d; j++)
                    gpr[j] += gi * (xr[j] * inv - sc * pr[j] * inv * inv);
            }
        }
    };
    return Var{id};
}

Var Tape::row_l2_normalize_dot(Var x, Var p, double eps) {
    const Tensor& xt = v(x.id);
    return row_l2_normalize_dot(x, p, std::vector<int>(xt.rows(), 0), eps);
}

Var Tape::gather_rows(Var x, std::vector<int> rows) {
    check(x, "gather_rows");
    const Tensor& xt = v(x.id);
    require(xt.ndim() == 2, "gather_rows: x must be 2-D");
    int d = xt.cols();
    int m = static_cast<int>(rows.size());
    Tensor out = Tensor::zeros({m, d});
    for (int i = 0; i < m; i++) {
        require(rows[i] >= 0 && rows[i] < xt.rows(), "gather_rows: row index out of range");
        const double* src = xt.data.data() + static_cast<size_t>(rows[i]) * d;
        std::copy(src, src + d, out.data.data() + static_cast<size_t>(i) * d);
    }
    int id = push(std::move(out));
    int xi = x.id;
    nodes_[id].backward = [xi, rows = std::move(rows), m, d](Tape& t, int self) {
        const auto& g = t.grads_[self].data;
        auto& gx = t.gbuf(xi).data;
        for (int i = 0; i < m; i++) {
            const double* src = g.data() + static_cast<size_t>(i) * d;
            double* dst = gx.data() + static_cast<size_t>(rows[i]) * d;
            for (int j = 0; j < d; j++) dst[j] += src[j];
        }
    };
    return Var{id};
}

Var Tape::gather_sum_by_segment(Var x, std::vector<int> indices, std::vector<int> seg_of_index,
                                int num_segments) {
    check(x, "gather_sum_by_segment");
    const Tensor& xt = v(x.id);
    require(xt.ndim() == 1, "gather_sum_by_segment: x must be 1-D");
    require(indices.size() == seg_of_index.size(), "gather_sum_by_segment: index/seg mismatch");
    Tensor out = Tensor::zeros({num_segments});
    for (size_t j = 0; j < indices.size(); j++) {
        require(indices[j] >= 0 && indices[j] < xt.shape[0],
                "gather_sum_by_segment: index out of range");
        require(seg_of_index[j] >= 0 && seg_of_index[j] < num_segments,
                "gather_sum_by_segment: segment id out of range");
        out.data[seg_of_index[j]] += xt.data[indices[j]];
    }
    int id = push(std::move(out));
    int xi = x.id;
    nodes_[id].backward = [xi, indices = std::move(indices),
                           seg_of_index = std::move(seg_of_index)](Tape& t, int self) {
        const auto& g = t.grads_[self].data;
        auto& gx = t.gbuf(xi).data;
        for (size_t j = 0; j < indices.size(); j++) gx[indices[j]] += g[seg_of_index[j]];
    };
    return Var{id};
}

Var Tape::individualize_rows(Var x, std::vector<int> rows, Var masks) {
    check(x, "individualize_rows");
    check(masks, "individualize_rows");
    const Tensor& xt = v(x.id);
    const Tensor& mt = v(masks.id);
    require(xt.ndim() == 2 && mt.ndim() == 2 && xt.cols() == mt.cols(),
            "individualize_rows: shape mismatch");
    require(mt.rows() == static_cast<int>(rows.size()), "individualize_rows: rows/masks mismatch");
    int d = xt.cols();
    std::vector<char> taken(xt.rows(), 0);
    Tensor out = xt;
    for (size_t b = 0; b < rows.size(); b++) {
        int r = rows[b];
        require(r >= 0 && r < xt.rows(), "individualize_rows: row out of range");
        require(!taken[r], "individualize_rows: duplicate row");
        taken[r] = 1;
        double* dst = out.data.data() + static_cast<size_t>(r) * d;
        const double* m = mt.data.data() + b * d;
        for (int j = 0; j < d; j++) dst[j] *= m[j];
    }
    int id = push(std::move(out));
    int xi = x.id, mi = masks.id;
    nodes_[id].backward = [xi, mi, rows = std::move(rows), d](Tape& t, int self) {
        const auto& g = t.grads_[self].data;
        const auto& xv = t.v(xi).data;
        const auto& mv = t.v(mi).data;
        auto& gx = t.gbuf(xi).data;
        auto& gm = t.gbuf(mi).data;
        std::vector<char> masked(t.v(xi).rows(), 0);
        for (int r : rows) masked[r] = 1;
        for (int i = 0; i < t.v(xi).rows(); i++) {
            if (masked[i]) continue;
            const double* src = g.data() + static_cast<size_t>(i) * d;
            double* dst = gx.data() + static_cast<size_t>(i) * d;
            for (int j = 0; j < d; j++) dst[j] += src[j];
        }
        for (size_t b = 0; b < rows.size(); b++) {
            int r = rows[b];
            const double* src = g.data() + static_cast<size_t>(r) * d;
            const double* xr = xv.data() + static_cast<size_t>(r) * d;
            const double* mr = mv.data() + b * d;
            double* gxr = gx.data() + static_cast<size_t>(r) * d;
            double* gmr = gm.data() + b * d;
            for (int j = 0; j < d; j++) {
                gxr[j] += src[j] * mr[j];
                gmr[j] += src[j] * xr[j];
            }
        }
    };
    return Var{id};
}

namespace {

void check_branches(const Tape& t, const std::vector<Var>& branches,
                    const std::vector<std::vector<char>>& row_active, const Tensor& first,
                    const char* what) {
    require(!branches.empty(), std::string(what) + ": no branches");
    require(row_active.empty() || row_active.size() == branches.size(),
            std::string(what) + ": row_active size mismatch");
    (void)t;
    (void)first;
}

}  // namespace

Var Tape::branch_max(const std::vector<Var>& branches, std::vector<std::vector<char>> row_active) {
    for (Var b : branches) check(b, "branch_max");
    const Tensor& first = v(branches[0].id);
    check_branches(*this, branches, row_active, first, "branch_max");
    int rows = first.ndim() == 2 ? first.rows() : 1;
    int cols = first.ndim() == 2 ? first.cols() : static_cast<int>(first.size());
    for (Var b : branches)
        require(v(b.id).same_shape(first), "branch_max: branch shape mismatch");
    Tensor out = Tensor::zeros(first.shape);
    std::vector<int> argmax(first.size(), -1);
    for (size_t b = 0; b < branches.size(); b++) {
        const auto& bv = v(branches[b].id).data;
        const auto* active = row_active.empty() ? nullptr : &row_active[b];
        for (int r = 0; r < rows; r++) {
            if (active && !(*active)[r]) continue;
            for (int c = 0; c < cols; c++) {
                size_t e = static_cast<size_t>(r) * cols + c;
                if (argmax[e] < 0 || bv[e] > out.data[e]) {
                    out.data[e] = bv[e];
                    argmax[e] = static_cast<int>(b);
                }
            }
        }
    }
    for (int am : argmax) require(am >= 0, "branch_max: element with no active branch");
    int id = push(std::move(out));
    std::vector<int> ids;
    for (Var b : branches) ids.push_back(b.id);
    nodes_[id].backward = [ids, argmax = std::move(argmax)](Tape& t, int self) {
        const auto& g = t.grads_[self].data;
        for (size_t e = 0; e < g.size(); e++)
            if (g[e] != 0.0) t.gbuf(ids[argmax[e]]).data[e] += g[e];
    };
    return Var{id};
}

Var Tape::branch_sum(const std::vector<Var>& branches, std::vector<std::vector<char>> row_active) {
    for (Var b : branches) check(b, "branch_sum");
    const Tensor& first = v(branches[0].id);
    check_branches(*this, branches, row_active, first, "branch_sum");
    int rows = first.ndim() == 2 ? first.rows() : 1;
    int cols = first.ndim() == 2 ? first.cols() : static_cast<int>(first.size());
    for (Var b : branches)
        require(v(b.id).same_shape(first), "branch_sum: branch shape mismatch");
    Tensor out = Tensor::zeros(first.shape);
    for (size_t b = 0; b < branches.size(); b++) {
        const auto& bv = v(branches[b].id).data;
        const auto* active = row_active.empty() ? nullptr : &row_active[b];
        for (int r = 0; r < rows; r++) {
            if (active && !(*active)[r]) continue;
            for (int c = 0; c < cols; c++) {
                size_t e = static_cast<size_t>(r) * cols + c;
                out.data[e] += bv[e];
            }
        }
    }
    int id = push(std::move(out));
    std::vector<int> ids;
    for (Var b : branches) ids.push_back(b.id);
    nodes_[id].backward = [ids, row_active = std::move(row_active), rows, cols](Tape& t, int self) {
        const auto& g = t.grads_[self].data;
        for (size_t b = 0; b < ids.size(); b++) {
            auto& gb = t.gbuf(ids[b]).data;
            const auto* active = row_active.empty() ? nullptr : &row_active[b];
            for (int r = 0; r < rows; r++) {
                if (active && !(*active)[r]) continue;
                for (int c = 0; c < cols; c++) {
                    size_t e = static_cast<size_t>(r) * cols + c;
                    gb[e] += g[e];
                }
            }
        }
    };
    return Var{id};
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_cols: no parts");
    for (Var p : parts) check(p, "concat_cols");
    int rows = v(parts[0].id).rows();
    int total = 0;
    for (Var p : parts) {
        require(v(p.id).ndim() == 2 && v(p.id).rows() == rows, "concat_cols: row mismatch");
        total += v(p.id).cols();
    }
    Tensor out = Tensor::zeros({rows, total});
    int offset = 0;
    for (Var p : parts) {
        int c = v(p.id).cols();
        for (int i = 0; i < rows; i++)
            std::copy(v(p.id).data.data() + static_cast<size_t>(i) * c,
                      v(p.id).data.data() + static_cast<size_t>(i) * c + c,
                      out.data.data() + static_cast<size_t>(i) * total + offset);
        offset += c;
    }
    int id = push(std::move(out));
    std::vector<std::pair<int, int>> layout;  // (node id, cols)
    for (Var p : parts) layout.emplace_back(p.id, v(p.id).cols());
    nodes_[id].backward = [layout, rows, total](Tape& t, int self) {
        const auto& g = t.grads_[self].data;
        int offset2 = 0;
        for (auto [pid, c] : layout) {
            auto& gp = t.gbuf(pid).data;
            for (int i = 0; i < rows; i++)
                for (int j = 0; j < c; j++)
                    gp[static_cast<size_t>(i) * c + j] +=
                        g[static_cast<size_t>(i) * total + offset2 + j];
            offset2 += c;
        }
    };
    return Var{id};
}

Var Tape::sum_all(Var x) {
    check(x, "sum_all");
    double total = 0.0;
    for (double xv : v(x.id).data) total += xv;
    int id = push(Tensor::scalar(total));
    int xi = x.id;
    nodes_[id].backward = [xi](Tape& t, int self) {
        double g = t.grads_[self].data[0];
        auto& gx = t.gbuf(xi).data;
        for (double& e : gx) e += g;
    };
    return Var{id};
}

Var Tape::gru_cell(Var x, Var h, const GruVars& p) {
    check(x, "gru_cell");
    check(h, "gru_cell");
    for (Var w : {p.wz, p.uz, p.bz, p.wr, p.ur, p.br, p.wh, p.uh, p.bh}) check(w, "gru_cell");
    const Tensor& xt = v(x.id);
    const Tensor& ht = v(h.id);
    require(xt.ndim() == 2 && ht.ndim() == 2 && xt.rows() == ht.rows(),
            "gru_cell: x and h must be 2-D with equal rows");
    int m = xt.rows(), dx = xt.cols(), d = ht.cols();
    require(v(p.wz.id).rows() == dx && v(p.wz.id).cols() == d, "gru_cell: wz shape");
    require(v(p.uz.id).rows() == d && v(p.uz.id).cols() == d, "gru_cell: uz shape");

    auto gate = [&](Var w, Var u, Var b, const Tensor& other) {
        Tensor a = Tensor::zeros({m, d});
        map(a, m, d).noalias() = cmap(xt, m, dx) * cmap(v(w.id), dx, d);
        map(a, m, d).noalias() += cmap(other, m, d) * cmap(v(u.id), d, d);
        const auto& bias = v(b.id).data;
        for (int i = 0; i < m; i++)
            for (int j = 0; j < d; j++) a.data[static_cast<size_t>(i) * d + j] += bias[j];
        return a;
    };

    Tensor z = gate(p.wz, p.uz, p.bz, ht);
    for (double& e : z.data) e = 1.0 / (1.0 + std::exp(-e));
    Tensor r = gate(p.wr, p.ur, p.br, ht);
    for (double& e : r.data) e = 1.0 / (1.0 + std::exp(-e));
    Tensor rh = ht;
    for (size_t i = 0; i < rh.data.size(); i++) rh.data[i] *= r.data[i];
    Tensor c = gate(p.wh, p.uh, p.bh, rh);
    for (double& e : c.data) e = std::tanh(e);
    Tensor out = Tensor::zeros({m, d});
    for (size_t i = 0; i < out.data.size(); i++)
        out.data[i] = (1.0 - z.data[i]) * ht.data[i] + z.data[i] * c.data[i];

    int id = push(std::move(out));
    nodes_[id].saved = {std::move(z), std::move(r), std::move(c), std::move(rh)};
    int xi = x.id, hi = h.id;
    GruVars pv = p;
    nodes_[id].backward = [xi, hi, pv, m, dx, d](Tape& t, int self) {
        const auto& saved = t.nodes_[self].saved;
        const Tensor& z = saved[0];
        const Tensor& r = saved[1];
        const Tensor& c = saved[2];
        const Tensor& rh = saved[3];
        const auto& g = t.grads_[self].data;
        const Tensor& xv = t.v(xi);
        const Tensor& hv = t.v(hi);

        Tensor daz = Tensor::zeros({m, d});
        Tensor dar = Tensor::zeros({m, d});
        Tensor dah = Tensor::zeros({m, d});
        Tensor drh = Tensor::zeros({m, d});
        auto& gh = t.gbuf(hi).data;

        for (size_t e = 0; e < g.size(); e++) {
            double dz = g[e] * (c.data[e] - hv.data[e]);
            double dc = g[e] * z.data[e];
            gh[e] += g[e] * (1.0 - z.data[e]);
            dah.data[e] = dc * (1.0 - c.data[e] * c.data[e]);
            daz.data[e] = dz * z.data[e] * (1.0 - z.data[e]);
        }
        // drh = dah * Uh^T, then dr and the r*h path into h
        map(drh, m, d).noalias() = cmap(dah, m, d) * cmap(t.v(pv.uh.id), d, d).transpose();
        for (size_t e = 0; e < g.size(); e++) {
            double dr = drh.data[e] * hv.data[e];
            gh[e] += drh.data[e] * r.data[e];
            dar.data[e] = dr * r.data[e] * (1.0 - r.data[e]);
        }

        MatMap gx(t.gbuf(xi).data.data(), m, dx);
        MatMap ghm(t.gbuf(hi).data.data(), m, d);
        gx.noalias() += cmap(daz, m, d) * cmap(t.v(pv.wz.id), dx, d).transpose();
        gx.noalias() += cmap(dar, m, d) * cmap(t.v(pv.wr.id), dx, d).transpose();
        gx.noalias() += cmap(dah, m, d) * cmap(t.v(pv.wh.id), dx, d).transpose();
        ghm.noalias() += cmap(daz, m, d) * cmap(t.v(pv.uz.id), d, d).transpose();
        ghm.noalias() += cmap(dar, m, d) * cmap(t.v(pv.ur.id), d, d).transpose();

        auto accum = [&](Var w, Var u, Var b, const Tensor& da, const Tensor& hstate) {
            map(t.gbuf(w.id), dx, d).noalias() += cmap(xv, m, dx).transpose() * cmap(da, m, d);
            map(t.gbuf(u.id), d, d).noalias() += cmap(hstate, m, d).transpose() * cmap(da, m, d);
            auto& gb = t.gbuf(b.id).data;
            for (int i = 0; i < m; i++)
                for (int j = 0; j < d; j++) gb[j] += da.data[static_cast<size_t>(i) * d + j];
        };
        accum(pv.wz, pv.uz, pv.bz, daz, hv);
        accum(pv.wr, pv.ur, pv.br, dar, hv);
        accum(pv.wh, pv.uh, pv.bh, dah, rh);
    };
    return Var{id};
}

Var Tape::cross_entropy_logits(Var logits, std::vector<int> labels) {
    check(logits, "cross_entropy_logits");
    const Tensor& lt = v(logits.id);
    require(lt.ndim() == 2, "cross_entropy_logits: logits must be 2-D");
    int b = lt.rows(), c = lt.cols();
    require(static_cast<int>(labels.size()) == b, "cross_entropy_logits: label count mismatch");
    Tensor probs = Tensor::zeros({b, c});
    double total = 0.0;
    for (int i = 0; i < b; i++) {
        require(labels[i] >= 0 && labels[i] < c, "cross_entropy_logits: label out of range");
        const double* row = lt.data.data() + static_cast<size_t>(i) * c;
        double mx = row[0];
        for (int j = 1; j < c; j++) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < c; j++) sum += std::exp(row[j] - mx);
        double lse = mx + std::log(sum);
        total += lse - row[labels[i]];
        for (int j = 0; j < c; j++)
            probs.data[static_cast<size_t>(i) * c + j] = std::exp(row[j] - lse);
    }
    int id = push(Tensor::scalar(total / b));
    nodes_[id].saved = {std::move(probs)};
    int li = logits.id;
    nodes_[id].backward = [li, labels = std::move(labels), b, c](Tape& t, int self) {
        double g = t.grads_[self].data[0] / b;
        const auto& probs = t.nodes_[self].saved[0].data;
        auto& gl = t.gbuf(li).data;
        for (int i = 0; i < b; i++)
            for (int j = 0; j < c; j++) {
                size_t e = static_cast<size_t>(i) * c + j;
                gl[e] += g * (probs[e] - (j == labels[i] ? 1.0 : 0.0));
            }
    };
    return Var{id};
}

Var Tape::l1_loss(Var pred, std::vector<double> target) {
    check(pred, "l1_loss");
    const Tensor& pt = v(pred.id);
    require(pt.size() == static_cast<long long>(target.size()), "l1_loss: size mismatch");
    int n = static_cast<int>(target.size());
    double total = 0.0;
    for (int i = 0; i < n; i++) total += std::abs(pt.data[i] - target[i]);
    int id = push(Tensor::scalar(total / n));
    int pi = pred.id;
    nodes_[id].backward = [pi, target = std::move(target), n](Tape& t, int self) {
        double g = t.grads_[self].data[0] / n;
        const auto& pv = t.v(pi).data;
        auto& gp = t.gbuf(pi).data;
        for (int i = 0; i < n; i++) {
            double diff = pv[i] - target[i];
            if (diff > 0.0) gp[i] += g;
            else if (diff < 0.0) gp[i] -= g;
        }
    };
    return Var{id};
}

void Tape::backward(Var loss) {
    check(loss, "backward");
    require(v(loss.id).size() == 1, "backward: loss must be a scalar");
    grads_.assign(nodes_.size(), Tensor{});
    has_grad_.assign(nodes_.size(), 0);
    gbuf(loss.id).data[0] = 1.0;
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; i--) {
        if (!has_grad_[i]) continue;
        Node& node = nodes_[i];
        if (node.backward) {
            node.backward(*this, i);
            // Interior gradients are complete once visited; free them to cap memory.
            grads_[i] = Tensor{};
            has_grad_[i] = 0;
        } else if (node.param) {
            auto& pg = node.param->grad.data;
            const auto& g = grads_[i].data;
            for (size_t e = 0; e < g.size(); e++) pg[e] += g[e];
        }
    }
}

void Tape::clear() {
    nodes_.clear();
    grads_.clear();
    has_grad_.clear();
}

}  // namespace gnnir
