#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gnnir/datasets.hpp"
#include "gnnir/model.hpp"

namespace gnnir {

enum class LossKind { CrossEntropy, L1 };
LossKind loss_from_string(const std::string& s);
std::string to_string(LossKind k);

struct TrainConfig {
    int batch_size = 16;
    int epochs = 300;
    double start_lr = 1e-3;
    double decay_rate = 0.5;
    int patience = 15;
    int folds = 5;
    LossKind loss = LossKind::CrossEntropy;
    uint64_t seed = 0;
    bool profile = false;  // record wall time per epoch; off keeps outputs byte-stable
    // Re-permute the vertices of every training graph each epoch (seeded).
    // Score ties in top-k selection break by vertex id, so the selected set
    // depends on the labeling; fresh labelings keep the head from memorizing
    // the handful of configurations in a small training split.
    bool relabel_train = true;

    void validate() const;
};

// Maps raw labels (e.g. triangle counts 1..10) onto contiguous class ids.
struct LabelMap {
    std::vector<int> classes;  // sorted distinct labels

    static LabelMap from(const std::vector<LabeledGraph>& items);
    int class_of(int label) const;
    int size() const { return static_cast<int>(classes.size()); }
};

// Disjoint union with per-member segment ids. Featureless members get a
// constant 1.0 feature column; otherwise widths must agree.
Batch make_batch(const std::vector<const LabeledGraph*>& items, const LabelMap& labels);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long step = 0;
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;

    void init(const ParamStore& params);
};

// One update from the gradients currently in the store. Throws on a
// non-finite gradient, naming the parameter.
void adam_step(ParamStore& params, AdamState& state, double lr);

// Multiplies lr by decay after `patience` consecutive epochs without
// improvement of the observed metric.
class LrSchedule {
  public:
    LrSchedule(double start_lr, double decay, int patience, bool higher_is_better);
    double lr() const { return lr_; }
    void observe(double val_metric);

  private:
    double lr_;
    double decay_;
    int patience_;
    bool higher_better_;
    double best_;
    int bad_ = 0;
};

struct EpochRecord {
    int fold = 0;
    int epoch = 0;
    double train_loss = 0.0;
    double val_metric = 0.0;
    double lr = 0.0;
    double sec = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    std::map<std::string, Tensor> best_params;
    double best_val = 0.0;
    int best_epoch = 0;
    bool aborted = false;
    std::string abort_reason;
};

struct EvalResult {
    double metric = 0.0;  // accuracy for cross-entropy, MAE for l1
    double loss = 0.0;
};

// Full loop: shuffled minibatches, Adam, plateau schedule, per-epoch
// validation, best-epoch snapshot. The model is left holding the best
// parameters. Divergence aborts and keeps the best snapshot.
TrainResult train(Model& model, const TrainConfig& cfg,
                  const std::vector<const LabeledGraph*>& train_items,
                  const std::vector<const LabeledGraph*>& val_items, const LabelMap& labels,
                  int fold_tag = 0);

EvalResult evaluate(const Model& model, const std::vector<const LabeledGraph*>& items,
                    const LabelMap& labels, int batch_size, LossKind loss);

struct FoldSplit {
    std::vector<int> train, val, test;
};

// Stratified rotation: each class is shuffled once and cut into `folds`
// chunks; fold f tests on chunk f, validates on chunk f+1, trains the rest.
std::vector<FoldSplit> kfold_splits(const std::vector<LabeledGraph>& items, int folds,
                                    uint64_t seed);

// Mean wall-clock seconds per training epoch over `epochs` measured epochs.
double timing_profile(Model& model, const TrainConfig& cfg,
                      const std::vector<const LabeledGraph*>& items, const LabelMap& labels,
                      int epochs);

void write_metrics_csv(const std::string& path, const std::vector<EpochRecord>& history);

std::vector<const LabeledGraph*> pointers_to(const std::vector<LabeledGraph>& items);
std::vector<const LabeledGraph*> split_of(const std::vector<LabeledGraph>& items,
                                          const std::string& split);

}  // namespace gnnir
