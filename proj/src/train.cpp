#include "gnnir/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace gnnir {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

LossKind loss_from_string(const std::string& s) {
    if (s == "cross_entropy") return LossKind::CrossEntropy;
    if (s == "l1") return LossKind::L1;
    throw std::invalid_argument("unknown loss: " + s);
}

std::string to_string(LossKind k) {
    return k == LossKind::CrossEntropy ? "cross_entropy" : "l1";
}

void TrainConfig::validate() const {
    require(batch_size >= 1, "batch_size must be >= 1");
    require(epochs >= 1, "epochs must be >= 1");
    require(start_lr > 0, "start_lr must be positive");
    require(decay_rate > 0 && decay_rate <= 1, "decay_rate must be in (0, 1]");
    require(patience >= 1, "patience must be >= 1");
    require(folds >= 2, "folds must be >= 2");
}

LabelMap LabelMap::from(const std::vector<LabeledGraph>& items) {
    LabelMap m;
    for (const auto& item : items) m.classes.push_back(item.label);
    std::sort(m.classes.begin(), m.classes.end());
    m.classes.erase(std::unique(m.classes.begin(), m.classes.end()), m.classes.end());
    return m;
}

int LabelMap::class_of(int label) const {
    auto it = std::lower_bound(classes.begin(), classes.end(), label);
    if (it == classes.end() || *it != label)
        throw std::invalid_argument("label not present in the label map: " +
                                    std::to_string(label));
    return static_cast<int>(it - classes.begin());
}

Batch make_batch(const std::vector<const LabeledGraph*>& items, const LabelMap& labels) {
    require(!items.empty(), "batch must contain at least one graph");
    int total = 0;
    bool featured = items.front()->graph.has_features();
    int width = featured ? items.front()->graph.feature_dim() : 1;
    for (const auto* item : items) {
        require(item->graph.n() >= 1, "batch member has no vertices");
        require(item->graph.has_features() == featured,
                "cannot mix featured and featureless graphs in one batch");
        if (featured)
            require(item->graph.feature_dim() == width, "feature widths differ within a batch");
        total += item->graph.n();
    }

    Batch b;
    b.num_graphs = static_cast<int>(items.size());
    b.features = featured ? Tensor::zeros({total, width}) : Tensor::full({total, width}, 1.0);
    std::vector<std::pair<int, int>> edges;
    int base = 0;
    for (size_t s = 0; s < items.size(); s++) {
        const Graph& g = items[s]->graph;
        for (const auto& [u, v] : g.edges()) edges.emplace_back(base + u, base + v);
        for (int vtx = 0; vtx < g.n(); vtx++) {
            b.seg.push_back(static_cast<int>(s));
            if (featured)
                for (int c = 0; c < width; c++)
                    b.features.data[static_cast<size_t>(base + vtx) * width + c] =
                        g.feature(vtx, c);
        }
        b.sizes.push_back(g.n());
        b.labels.push_back(labels.class_of(items[s]->label));
        base += g.n();
    }
    b.graph = Graph::from_edge_list(total, edges);
    b.validate();
    return b;
}

void AdamState::init(const ParamStore& params) {
    step = 0;
    m.clear();
    v.clear();
    for (const auto* p : params.all()) {
        m[p->name] = Tensor::zeros(p->value.shape);
        v[p->name] = Tensor::zeros(p->value.shape);
    }
}

void adam_step(ParamStore& params, AdamState& state, double lr) {
    state.step++;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (auto* p : params.all()) {
        auto& mm = state.m.at(p->name).data;
        auto& vv = state.v.at(p->name).data;
        for (size_t i = 0; i < p->value.data.size(); i++) {
            double g = p->grad.data[i];
            if (!std::isfinite(g))
                throw std::runtime_error("non-finite gradient in parameter " + p->name);
            mm[i] = state.beta1 * mm[i] + (1.0 - state.beta1) * g;
            vv[i] = state.beta2 * vv[i] + (1.0 - state.beta2) * g * g;
            double mhat = mm[i] / bc1;
            double vhat = vv[i] / bc2;
            p->value.data[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

LrSchedule::LrSchedule(double start_lr, double decay, int patience, bool higher_is_better)
    : lr_(start_lr),
      decay_(decay),
      patience_(patience),
      higher_better_(higher_is_better),
      best_(higher_is_better ? -std::numeric_limits<double>::infinity()
                             : std::numeric_limits<double>::infinity()) {}

void LrSchedule::observe(double val_metric) {
    bool improved = higher_better_ ? val_metric > best_ : val_metric < best_;
    if (improved) {
        best_ = val_metric;
        bad_ = 0;
        return;
    }
    if (++bad_ >= patience_) {
        lr_ *= decay_;
        bad_ = 0;
    }
}

namespace {

Var batch_loss(Tape& t, const Model& model, const Batch& b, LossKind kind) {
    Var logits = model.forward(t, b);
    if (kind == LossKind::CrossEntropy) return t.cross_entropy_logits(logits, b.labels);
    std::vector<double> target(b.labels.begin(), b.labels.end());
    return t.l1_loss(logits, target);
}

double batch_metric(const Tensor& logits, const Batch& b, LossKind kind) {
    if (kind == LossKind::CrossEntropy) {
        int correct = 0;
        int c = logits.cols();
        for (int i = 0; i < logits.rows(); i++) {
            const double* row = logits.data.data() + static_cast<size_t>(i) * c;
            int arg = static_cast<int>(std::max_element(row, row + c) - row);
            if (arg == b.labels[i]) correct++;
        }
        return static_cast<double>(correct);
    }
    double abs_sum = 0.0;
    for (int i = 0; i < logits.rows(); i++) abs_sum += std::abs(logits.data[i] - b.labels[i]);
    return abs_sum;
}

}  // namespace

EvalResult evaluate(const Model& model, const std::vector<const LabeledGraph*>& items,
                    const LabelMap& labels, int batch_size, LossKind loss) {
    require(!items.empty(), "evaluate needs at least one graph");
    double metric_sum = 0.0;
    double loss_sum = 0.0;
    for (size_t at = 0; at < items.size(); at += batch_size) {
        size_t end = std::min(items.size(), at + batch_size);
        std::vector<const LabeledGraph*> chunk(items.begin() + at, items.begin() + end);
        Batch b = make_batch(chunk, labels);
        Tape t;
        Var logits = model.forward(t, b);
        Var lv;
        if (loss == LossKind::CrossEntropy) {
            lv = t.cross_entropy_logits(logits, b.labels);
        } else {
            std::vector<double> target(b.labels.begin(), b.labels.end());
            lv = t.l1_loss(logits, target);
        }
        loss_sum += t.val(lv).data[0] * static_cast<double>(chunk.size());
        metric_sum += batch_metric(t.val(logits), b, loss);
    }
    double n = static_cast<double>(items.size());
    return {metric_sum / n, loss_sum / n};
}

TrainResult train(Model& model, const TrainConfig& cfg,
                  const std::vector<const LabeledGraph*>& train_items,
                  const std::vector<const LabeledGraph*>& val_items, const LabelMap& labels,
                  int fold_tag) {
    cfg.validate();
    require(!train_items.empty() && !val_items.empty(), "train and val splits must be nonempty");

    bool higher_better = cfg.loss == LossKind::CrossEntropy;
    // The plateau schedule watches validation loss, not the reported metric:
    // accuracy on a small validation split is quantized, so it plateaus for
    // long stretches while the fit is still improving and the halvings
    // compound until the learning rate is effectively zero.
    LrSchedule sched(cfg.start_lr, cfg.decay_rate, cfg.patience, false);
    AdamState adam;
    adam.init(model.params());
    std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, 0xF01D, fold_tag));
    std::mt19937_64 relabel_rng(derive_seed(cfg.seed, 0x4E1A, fold_tag));

    TrainResult res;
    res.best_params = model.params().snapshot();
    res.best_val = higher_better ? -std::numeric_limits<double>::infinity()
                                 : std::numeric_limits<double>::infinity();

    std::vector<int> order(train_items.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.epochs; epoch++) {
        auto t0 = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double lr = sched.lr();
        double loss_sum = 0.0;

        std::vector<LabeledGraph> relabeled;
        if (cfg.relabel_train) {
            relabeled.reserve(train_items.size());
            for (const LabeledGraph* item : train_items) {
                Permutation p = Permutation::random(item->graph.n(), relabel_rng);
                relabeled.push_back({permute(item->graph, p), item->label, item->split});
            }
        }

        for (size_t at = 0; at < order.size(); at += cfg.batch_size) {
            size_t end = std::min(order.size(), at + static_cast<size_t>(cfg.batch_size));
            std::vector<const LabeledGraph*> chunk;
            chunk.reserve(end - at);
            for (size_t i = at; i < end; i++)
                chunk.push_back(cfg.relabel_train ? &relabeled[order[i]] : train_items[order[i]]);
            Batch b = make_batch(chunk, labels);

            model.params().zero_grad();
            Tape t;
            Var loss = batch_loss(t, model, b, cfg.loss);
            double loss_val = t.val(loss).data[0];
            if (!std::isfinite(loss_val)) {
                res.aborted = true;
                res.abort_reason = "non-finite loss at epoch " + std::to_string(epoch);
                model.params().restore(res.best_params);
                return res;
            }
            t.backward(loss);
            try {
                adam_step(model.params(), adam, lr);
            } catch (const std::runtime_error& e) {
                res.aborted = true;
                res.abort_reason = std::string(e.what()) + " at epoch " + std::to_string(epoch);
                model.params().restore(res.best_params);
                return res;
            }
            loss_sum += loss_val * static_cast<double>(chunk.size());
        }

        EvalResult val = evaluate(model, val_items, labels, cfg.batch_size, cfg.loss);
        bool improved = higher_better ? val.metric > res.best_val : val.metric < res.best_val;
        if (improved) {
            res.best_val = val.metric;
            res.best_epoch = epoch;
            res.best_params = model.params().snapshot();
        }
        sched.observe(val.loss);

        double sec = 0.0;
        if (cfg.profile) {
            auto t1 = std::chrono::steady_clock::now();
            sec = std::chrono::duration<double>(t1 - t0).count();
        }
        res.history.push_back({fold_tag, epoch, loss_sum / static_cast<double>(order.size()),
                               val.metric, lr, sec});
    }

    model.params().restore(res.best_params);
    return res;
}

std::vector<FoldSplit> kfold_splits(const std::vector<LabeledGraph>& items, int folds,
                                    uint64_t seed) {
    require(folds >= 2, "need at least 2 folds");
    std::map<int, std::vector<int>> by_class;
    for (size_t i = 0; i < items.size(); i++)
        by_class[items[i].label].push_back(static_cast<int>(i));

    std::map<int, std::vector<std::vector<int>>> chunks;
    for (auto& [label, idx] : by_class) {
        require(static_cast<int>(idx.size()) % folds == 0,
                "class " + std::to_string(label) + " size is not divisible by the fold count");
        std::mt19937_64 rng(derive_seed(seed, 0xF01D5, label));
        std::shuffle(idx.begin(), idx.end(), rng);
        int per = static_cast<int>(idx.size()) / folds;
        std::vector<std::vector<int>> parts(folds);
        for (int f = 0; f < folds; f++)
            parts[f].assign(idx.begin() + f * per, idx.begin() + (f + 1) * per);
        chunks[label] = std::move(parts);
    }

    std::vector<FoldSplit> out(folds);
    for (int f = 0; f < folds; f++) {
        for (auto& [label, parts] : chunks) {
            for (int c = 0; c < folds; c++) {
                const auto& part = parts[c];
                if (c == f)
                    out[f].test.insert(out[f].test.end(), part.begin(), part.end());
                else if (c == (f + 1) % folds)
                    out[f].val.insert(out[f].val.end(), part.begin(), part.end());
                else
                    out[f].train.insert(out[f].train.end(), part.begin(), part.end());
            }
        }
        std::sort(out[f].train.begin(), out[f].train.end());
        std::sort(out[f].val.begin(), out[f].val.end());
        std::sort(out[f].test.begin(), out[f].test.end());
    }
    return out;
}

double timing_profile(Model& model, const TrainConfig& cfg,
                      const std::vector<const LabeledGraph*>& items, const LabelMap& labels,
                      int epochs) {
    require(epochs >= 3, "timing needs at least 3 epochs");
    AdamState adam;
    adam.init(model.params());
    double total = 0.0;
    for (int epoch = 0; epoch < epochs; epoch++) {
        auto t0 = std::chrono::steady_clock::now();
        for (size_t at = 0; at < items.size(); at += cfg.batch_size) {
            size_t end = std::min(items.size(), at + static_cast<size_t>(cfg.batch_size));
            std::vector<const LabeledGraph*> chunk(items.begin() + at, items.begin() + end);
            Batch b = make_batch(chunk, labels);
            model.params().zero_grad();
            Tape t;
            Var loss = batch_loss(t, model, b, cfg.loss);
            t.backward(loss);
            adam_step(model.params(), adam, cfg.start_lr);
        }
        auto t1 = std::chrono::steady_clock::now();
        total += std::chrono::duration<double>(t1 - t0).count();
    }
    return total / epochs;
}

void write_metrics_csv(const std::string& path, const std::vector<EpochRecord>& history) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open metrics file for writing: " + path);
    out << "fold,epoch,train_loss,val_metric,lr,sec_per_epoch\n";
    char buf[256];
    for (const auto& r : history) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g,%.17g\n", r.fold, r.epoch,
                      r.train_loss, r.val_metric, r.lr, r.sec);
        out << buf;
    }
}

std::vector<const LabeledGraph*> pointers_to(const std::vector<LabeledGraph>& items) {
    std::vector<const LabeledGraph*> out;
    out.reserve(items.size());
    for (const auto& item : items) out.push_back(&item);
    return out;
}

std::vector<const LabeledGraph*> split_of(const std::vector<LabeledGraph>& items,
                                          const std::string& split) {
    std::vector<const LabeledGraph*> out;
    for (const auto& item : items)
        if (item.split == split) out.push_back(&item);
    return out;
}

}  // namespace gnnir
