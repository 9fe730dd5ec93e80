// gnnir command line: dataset generation, training runs, and the classical
// diagnostics (WL refinement, canonical labeling, pair distinguishing).
//
// Exit codes: 0 success, 1 usage, 2 validation, 3 runtime.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "gnnir/checkpoint.hpp"
#include "gnnir/datasets.hpp"
#include "gnnir/gradcheck.hpp"
#include "gnnir/graph.hpp"
#include "gnnir/ir_search.hpp"
#include "gnnir/model.hpp"
#include "gnnir/train.hpp"
#include "gnnir/wl.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gnnir;

namespace {

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    std::string family = "csl";  // csl | triangles | hard_pairs
    TrianglesSpec triangles;
    std::string data_path;  // optional dataset file; skips generation
    uint64_t seed = 0;
    int threads = 1;
    std::string out = "run";
    bool batch_size_set = false;  // family default applies only when untouched
};

void apply_key(RunConfig& rc, const std::string& key, const json& v) {
    auto num = [&](const char* what) -> double {
        if (!v.is_number()) throw std::invalid_argument(std::string(what) + " must be a number");
        return v.get<double>();
    };
    auto str = [&](const char* what) -> std::string {
        if (!v.is_string()) throw std::invalid_argument(std::string(what) + " must be a string");
        return v.get<std::string>();
    };
    auto flag = [&](const char* what) -> bool {
        if (!v.is_boolean()) throw std::invalid_argument(std::string(what) + " must be a bool");
        return v.get<bool>();
    };

    if (key == "seed") rc.seed = v.get<uint64_t>();
    else if (key == "threads") rc.threads = static_cast<int>(num(key.c_str()));
    else if (key == "out") rc.out = str(key.c_str());
    else if (key == "data.family" || key == "family") rc.family = str(key.c_str());
    else if (key == "data.path") rc.data_path = str(key.c_str());
    else if (key == "data.n_train") rc.triangles.n_train = static_cast<int>(num(key.c_str()));
    else if (key == "data.n_val") rc.triangles.n_val = static_cast<int>(num(key.c_str()));
    else if (key == "data.n_test") rc.triangles.n_test = static_cast<int>(num(key.c_str()));
    else if (key == "data.n_test_large") rc.triangles.n_test_large = static_cast<int>(num(key.c_str()));
    else if (key == "data.min_nodes") rc.triangles.min_nodes = static_cast<int>(num(key.c_str()));
    else if (key == "data.max_nodes") rc.triangles.max_nodes = static_cast<int>(num(key.c_str()));
    else if (key == "data.large_min_nodes") rc.triangles.large_min_nodes = static_cast<int>(num(key.c_str()));
    else if (key == "data.large_max_nodes") rc.triangles.large_max_nodes = static_cast<int>(num(key.c_str()));
    else if (key == "data.degree_buckets") rc.triangles.degree_buckets = static_cast<int>(num(key.c_str()));
    else if (key == "data.max_attempts") rc.triangles.max_attempts_per_graph = static_cast<long long>(num(key.c_str()));
    else if (key == "model.layers") rc.model.layers = static_cast<int>(num(key.c_str()));
    else if (key == "model.k") rc.model.k = static_cast<int>(num(key.c_str()));
    else if (key == "model.hidden") rc.model.hidden = static_cast<int>(num(key.c_str()));
    else if (key == "model.gnn_steps") rc.model.gnn_steps = static_cast<int>(num(key.c_str()));
    else if (key == "model.selector" || key == "selector") rc.model.selector = selector_from_string(str(key.c_str()));
    else if (key == "model.aggregator" || key == "aggregator") rc.model.aggregator = aggregator_from_string(str(key.c_str()));
    else if (key == "model.share_gnn_params") rc.model.share_gnn_params = flag(key.c_str());
    else if (key == "train.batch_size") { rc.train.batch_size = static_cast<int>(num(key.c_str())); rc.batch_size_set = true; }
    else if (key == "train.epochs") rc.train.epochs = static_cast<int>(num(key.c_str()));
    else if (key == "train.lr") rc.train.start_lr = num(key.c_str());
    else if (key == "train.decay_rate") rc.train.decay_rate = num(key.c_str());
    else if (key == "train.patience") rc.train.patience = static_cast<int>(num(key.c_str()));
    else if (key == "train.folds") rc.train.folds = static_cast<int>(num(key.c_str()));
    else if (key == "train.loss") rc.train.loss = loss_from_string(str(key.c_str()));
    else if (key == "train.profile" || key == "profile") rc.train.profile = flag(key.c_str());
    else if (key == "train.relabel") rc.train.relabel_train = flag(key.c_str());
    else throw std::invalid_argument("unknown config key: " + key);
}

void load_config_file(RunConfig& rc, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument(path + ": config must be a flat JSON object");
    for (const auto& [key, value] : j.items()) apply_key(rc, key, value);
}

// Fully-resolved flat key/value echo, same key space the config file accepts.
json to_flat_json(const RunConfig& rc) {
    json j;
    j["seed"] = rc.seed;
    j["threads"] = rc.threads;
    j["out"] = rc.out;
    j["data.family"] = rc.family;
    if (!rc.data_path.empty()) j["data.path"] = rc.data_path;
    if (rc.family == "triangles") {
        j["data.n_train"] = rc.triangles.n_train;
        j["data.n_val"] = rc.triangles.n_val;
        j["data.n_test"] = rc.triangles.n_test;
        j["data.n_test_large"] = rc.triangles.n_test_large;
        j["data.min_nodes"] = rc.triangles.min_nodes;
        j["data.max_nodes"] = rc.triangles.max_nodes;
        j["data.large_min_nodes"] = rc.triangles.large_min_nodes;
        j["data.large_max_nodes"] = rc.triangles.large_max_nodes;
        j["data.degree_buckets"] = rc.triangles.degree_buckets;
        j["data.max_attempts"] = rc.triangles.max_attempts_per_graph;
    }
    j["model.layers"] = rc.model.layers;
    j["model.k"] = rc.model.k;
    j["model.hidden"] = rc.model.hidden;
    j["model.gnn_steps"] = rc.model.gnn_steps;
    j["model.in_dim"] = rc.model.in_dim;
    j["model.out_dim"] = rc.model.out_dim;
    j["model.selector"] = to_string(rc.model.selector);
    j["model.aggregator"] = to_string(rc.model.aggregator);
    j["model.share_gnn_params"] = rc.model.share_gnn_params;
    j["train.batch_size"] = rc.train.batch_size;
    j["train.epochs"] = rc.train.epochs;
    j["train.lr"] = rc.train.start_lr;
    j["train.decay_rate"] = rc.train.decay_rate;
    j["train.patience"] = rc.train.patience;
    j["train.folds"] = rc.train.folds;
    j["train.loss"] = to_string(rc.train.loss);
    j["train.profile"] = rc.train.profile;
    j["train.relabel"] = rc.train.relabel_train;
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << text;
}

struct Stats {
    double mean = 0, median = 0, max = 0, min = 0, std_dev = 0;
};

Stats compute_stats(std::vector<double> v) {
    Stats s;
    if (v.empty()) return s;
    std::sort(v.begin(), v.end());
    s.min = v.front();
    s.max = v.back();
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    size_t h = v.size() / 2;
    s.median = (v.size() % 2 == 1) ? v[h] : 0.5 * (v[h - 1] + v[h]);
    double acc = 0;
    for (double x : v) acc += (x - s.mean) * (x - s.mean);
    s.std_dev = std::sqrt(acc / v.size());
    return s;
}

json stats_json(const Stats& s) {
    return json{{"mean", s.mean}, {"median", s.median}, {"max", s.max},
                {"min", s.min}, {"std", s.std_dev}};
}

std::vector<LabeledGraph> load_or_generate(const RunConfig& rc) {
    if (!rc.data_path.empty()) return read_dataset(rc.data_path);
    if (rc.family == "csl") return gen_csl_dataset(rc.seed);
    if (rc.family == "triangles") {
        TrianglesSpec spec = rc.triangles;
        spec.seed = rc.seed;
        return gen_triangles_dataset(spec);
    }
    if (rc.family == "hard_pairs") {
        std::vector<LabeledGraph> items;
        auto pairs = gen_hard_pairs();
        for (size_t i = 0; i < pairs.size(); ++i) {
            items.push_back({pairs[i].first, static_cast<int>(i), "a"});
            items.push_back({pairs[i].second, static_cast<int>(i), "b"});
        }
        return items;
    }
    throw std::invalid_argument("unknown dataset family: " + rc.family);
}

std::vector<const LabeledGraph*> gather(const std::vector<LabeledGraph>& items,
                                        const std::vector<int>& idx) {
    std::vector<const LabeledGraph*> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(&items[i]);
    return out;
}

json graph_json(const Graph& g) {
    json j;
    j["n"] = g.n();
    json edges = json::array();
    for (auto [u, v] : g.edges()) edges.push_back(json::array({u, v}));
    j["edges"] = edges;
    return j;
}

int cmd_gen(const RunConfig& rc) {
    auto items = load_or_generate(rc);
    fs::create_directories(rc.out);
    write_text(rc.out + "/config.json", to_flat_json(rc).dump(2) + "\n");
    write_dataset(rc.out + "/dataset.jsonl", items);

    std::map<std::string, int> labels, splits;
    int n_min = items.front().graph.n(), n_max = n_min;
    for (const auto& it : items) {
        labels[std::to_string(it.label)]++;
        splits[it.split.empty() ? "(none)" : it.split]++;
        n_min = std::min(n_min, it.graph.n());
        n_max = std::max(n_max, it.graph.n());
    }
    json manifest{{"family", rc.family}, {"seed", rc.seed},
                  {"count", items.size()}, {"labels", labels},
                  {"splits", splits}, {"min_nodes", n_min}, {"max_nodes", n_max}};
    write_text(rc.out + "/manifest.json", manifest.dump(2) + "\n");

    if (rc.family == "hard_pairs") {
        for (size_t i = 0; i + 1 < items.size(); i += 2) {
            write_text(rc.out + "/pair" + std::to_string(i / 2) + "_a.json",
                       graph_json(items[i].graph).dump() + "\n");
            write_text(rc.out + "/pair" + std::to_string(i / 2) + "_b.json",
                       graph_json(items[i + 1].graph).dump() + "\n");
        }
    }
    std::printf("wrote %zu graphs to %s/dataset.jsonl\n", items.size(), rc.out.c_str());
    return 0;
}

int cmd_train(RunConfig rc) {
    rc.train.validate();
    auto data = load_or_generate(rc);
    if (data.empty()) throw std::invalid_argument("dataset is empty");

    LabelMap labels = LabelMap::from(data);
    rc.model.out_dim = labels.size();
    rc.model.in_dim = data.front().graph.has_features() ? data.front().graph.feature_dim() : 1;
    rc.model.validate();

    fs::create_directories(rc.out);
    write_text(rc.out + "/config.json", to_flat_json(rc).dump(2) + "\n");

    bool tagged = std::any_of(data.begin(), data.end(),
                              [](const LabeledGraph& g) { return !g.split.empty(); });

    std::vector<EpochRecord> history;
    std::vector<double> test_metrics;
    json fold_rows = json::array();
    json extra;

    if (!tagged) {
        auto folds = kfold_splits(data, rc.train.folds, rc.seed);
        for (size_t f = 0; f < folds.size(); ++f) {
            ModelConfig mc = rc.model;
            mc.seed = derive_seed(rc.seed, 0x300d, f);
            Model model(mc);
            auto tr = gather(data, folds[f].train);
            auto va = gather(data, folds[f].val);
            auto te = gather(data, folds[f].test);
            TrainConfig tc = rc.train;
            tc.seed = rc.seed;
            TrainResult res = train(model, tc, tr, va, labels, static_cast<int>(f));
            EvalResult ev = evaluate(model, te, labels, tc.batch_size, tc.loss);
            history.insert(history.end(), res.history.begin(), res.history.end());
            test_metrics.push_back(ev.metric);
            fold_rows.push_back({{"fold", f}, {"test_metric", ev.metric},
                                 {"test_loss", ev.loss}, {"best_val", res.best_val},
                                 {"best_epoch", res.best_epoch}, {"aborted", res.aborted}});
            std::printf("fold %zu: test=%.4f best_val=%.4f best_epoch=%d%s\n", f, ev.metric,
                        res.best_val, res.best_epoch, res.aborted ? " (aborted)" : "");
            std::fflush(stdout);
            if (f + 1 == folds.size())
                save_checkpoint(rc.out + "/checkpoint.bin", mc, model.params());
        }
    } else {
        auto tr = split_of(data, "train");
        auto va = split_of(data, "val");
        auto te = split_of(data, "test");
        if (tr.empty() || va.empty() || te.empty())
            throw std::invalid_argument("dataset needs train/val/test split tags");
        ModelConfig mc = rc.model;
        mc.seed = derive_seed(rc.seed, 0x300d, 0);
        Model model(mc);
        TrainConfig tc = rc.train;
        tc.seed = rc.seed;
        TrainResult res = train(model, tc, tr, va, labels, 0);
        EvalResult ev = evaluate(model, te, labels, tc.batch_size, tc.loss);
        history = res.history;
        test_metrics.push_back(ev.metric);
        fold_rows.push_back({{"fold", 0}, {"test_metric", ev.metric},
                             {"test_loss", ev.loss}, {"best_val", res.best_val},
                             {"best_epoch", res.best_epoch}, {"aborted", res.aborted}});
        std::printf("test=%.4f best_val=%.4f best_epoch=%d%s\n", ev.metric, res.best_val,
                    res.best_epoch, res.aborted ? " (aborted)" : "");
        auto large = split_of(data, "test_large");
        if (!large.empty()) {
            EvalResult lv = evaluate(model, large, labels, tc.batch_size, tc.loss);
            extra["test_large_metric"] = lv.metric;
            std::printf("test_large=%.4f\n", lv.metric);
        }
        std::fflush(stdout);
        save_checkpoint(rc.out + "/checkpoint.bin", mc, model.params());
    }

    write_metrics_csv(rc.out + "/metrics.csv", history);

    json summary{{"task", rc.family},
                 {"metric", rc.train.loss == LossKind::CrossEntropy ? "accuracy" : "mae"},
                 {"folds", fold_rows},
                 {"test_metric", stats_json(compute_stats(test_metrics))}};
    for (auto& [k, v] : extra.items()) summary[k] = v;
    write_text(rc.out + "/summary.json", summary.dump(2) + "\n");
    std::printf("wrote %s/{config.json,metrics.csv,summary.json,checkpoint.bin}\n",
                rc.out.c_str());
    return 0;
}

int cmd_eval(const RunConfig& rc, const std::string& ckpt, const std::string& split) {
    if (rc.data_path.empty())
        throw std::invalid_argument("eval needs --dataset pointing at a JSONL file");
    Model model = load_model(ckpt);
    auto data = read_dataset(rc.data_path);
    LabelMap labels = LabelMap::from(data);
    if (labels.size() != model.config().out_dim && rc.train.loss == LossKind::CrossEntropy)
        throw std::invalid_argument("dataset has " + std::to_string(labels.size()) +
                                    " classes but the checkpoint expects " +
                                    std::to_string(model.config().out_dim));
    auto items = split == "all" ? pointers_to(data) : split_of(data, split);
    if (items.empty()) throw std::invalid_argument("no graphs carry split tag '" + split + "'");
    EvalResult ev = evaluate(model, items, labels, rc.train.batch_size, rc.train.loss);
    json out{{"split", split}, {"count", items.size()},
             {"metric", ev.metric}, {"loss", ev.loss}};
    std::printf("%s\n", out.dump().c_str());
    return 0;
}

int cmd_canon(const std::string& path, const std::string& policy_s, long long max_leaves) {
    Graph g = read_graph_json(path);
    TargetCellPolicy policy;
    if (policy_s == "smallest") policy = TargetCellPolicy::SmallestNonSingleton;
    else if (policy_s == "largest") policy = TargetCellPolicy::Largest;
    else throw std::invalid_argument("unknown target cell policy: " + policy_s);

    SearchTree tree = build_search_tree(g, policy, {max_leaves, 64});
    if (tree.truncated)
        throw std::runtime_error("search tree exceeded " + std::to_string(max_leaves) +
                                 " leaves; raise --max-leaves");
    std::string canon = canonical_form(g, policy);
    std::printf("n: %d  edges: %d\n", g.n(), g.num_edges());
    std::printf("canonical form: %s\n", canon.empty() ? "(empty)" : canon.c_str());
    std::printf("leaves: %lld\n", tree.leaf_count);
    std::printf("nodes: %lld\n", tree.node_count);
    std::printf("depth: %d\n", tree.depth);
    return 0;
}

Coloring read_coloring(const std::string& path, int n) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open coloring file: " + path);
    json j;
    in >> j;
    if (j.is_object() && j.contains("colors")) j = j["colors"];
    if (!j.is_array()) throw std::invalid_argument(path + ": expected a color array");
    std::vector<int> colors = j.get<std::vector<int>>();
    if (static_cast<int>(colors.size()) != n)
        throw std::invalid_argument("coloring has " + std::to_string(colors.size()) +
                                    " entries for a graph on " + std::to_string(n) + " vertices");
    return Coloring(std::move(colors)).normalized();
}

int cmd_wl(const std::string& path, const std::string& colors_path) {
    Graph g = read_graph_json(path);
    RefinementResult res = colors_path.empty()
                               ? wl_refine(g)
                               : wl_refine(g, read_coloring(colors_path, g.n()));
    std::printf("rounds: %d\n", res.rounds);
    std::printf("cells: %d\n", res.coloring.num_colors());
    auto cells = res.coloring.cells();
    for (size_t c = 0; c < cells.size(); ++c) {
        std::printf("cell %zu (size %zu):", c, cells[c].size());
        for (int v : cells[c]) std::printf(" %d", v);
        std::printf("\n");
    }
    return 0;
}

Graph strip_features(const Graph& g) { return Graph::from_edge_list(g.n(), g.edges()); }

int cmd_distinguish(const RunConfig& rc, const std::string& path_a, const std::string& path_b) {
    Graph a = read_graph_json(path_a);
    Graph b = read_graph_json(path_b);

    bool wl_sep = wl_distinguishes(a, b);
    std::printf("1-WL: %s\n", wl_sep ? "distinguished" : "equivalent signatures");

    bool iso = canonical_form(a) == canonical_form(b);
    std::printf("canonical form: %s\n", iso ? "equal (isomorphic)" : "different (non-isomorphic)");

    int in_dim = 1;
    if (a.has_features() && b.has_features() && a.feature_dim() == b.feature_dim()) {
        in_dim = a.feature_dim();
    } else {
        a = strip_features(a);
        b = strip_features(b);
    }
    ModelConfig mc = rc.model;
    mc.in_dim = in_dim;
    mc.out_dim = 2;
    mc.seed = derive_seed(rc.seed, 0xd157, 0);
    mc.validate();
    Model model(mc);
    LabeledGraph la{a, 0, ""}, lb{b, 1, ""};
    LabelMap labels;
    labels.classes = {0, 1};
    Batch batch = make_batch({&la, &lb}, labels);
    Tape t;
    Tensor emb = t.val(model.embed(t, batch));
    double gap = 0;
    for (int j = 0; j < emb.cols(); ++j)
        gap = std::max(gap, std::abs(emb.data[j] - emb.data[emb.cols() + j]));
    const double threshold = 1e-3;
    std::printf("neural (layers=%d, k=%d, seed=%llu): max coordinate gap %.6e -> %s\n",
                mc.layers, mc.k, static_cast<unsigned long long>(mc.seed), gap,
                gap > threshold ? "distinguished" : "not distinguished");
    return 0;
}

int cmd_gradcheck(const RunConfig& rc) {
    auto reports = run_gradient_suite(rc.seed);
    bool ok = true;
    for (const auto& r : reports) {
        std::printf("%-24s max_rel_err=%.3e (%s) entries=%lld %s\n", r.name.c_str(),
                    r.max_rel_err, r.worst_entry.c_str(), static_cast<long long>(r.entries),
                    r.pass ? "ok" : "FAIL");
        ok = ok && r.pass;
    }
    if (!ok) throw std::runtime_error("gradient check failed");
    std::printf("all %zu gradient checks passed\n", reports.size());
    return 0;
}

// --config must take effect before the remaining flags so flags win.
std::string prescan_config_path(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) return argv[i + 1];
        if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
    }
    return "";
}

int run(int argc, char** argv) {
    RunConfig rc;
    std::string config_path = prescan_config_path(argc, argv);
    if (!config_path.empty()) load_config_file(rc, config_path);

    CLI::App app{"graph isomorphism machinery and the individualization-refinement GNN"};
    app.require_subcommand(1);

    std::string config_dummy;
    std::string selector_s = to_string(rc.model.selector);
    std::string aggregator_s = to_string(rc.model.aggregator);
    std::string loss_s = to_string(rc.train.loss);

    app.add_option("--config", config_dummy, "flat JSON key/value config file");
    app.add_option("--seed", rc.seed, "master seed");
    app.add_option("--threads", rc.threads, "cap on internal parallelism (1 = bit-reproducible)");
    app.add_option("--out", rc.out, "run directory for artifacts");
    app.add_option("--dataset,--data.path", rc.data_path, "dataset JSONL file (skips generation)");
    app.add_option("--family,--data.family", rc.family, "csl | triangles | hard_pairs");
    app.add_option("--data.n_train", rc.triangles.n_train);
    app.add_option("--data.n_val", rc.triangles.n_val);
    app.add_option("--data.n_test", rc.triangles.n_test);
    app.add_option("--data.n_test_large", rc.triangles.n_test_large);
    app.add_option("--data.min_nodes", rc.triangles.min_nodes);
    app.add_option("--data.max_nodes", rc.triangles.max_nodes);
    app.add_option("--data.large_min_nodes", rc.triangles.large_min_nodes);
    app.add_option("--data.large_max_nodes", rc.triangles.large_max_nodes);
    app.add_option("--data.degree_buckets", rc.triangles.degree_buckets);
    app.add_option("--data.max_attempts", rc.triangles.max_attempts_per_graph);
    app.add_option("--model.layers", rc.model.layers, "individualization rounds L");
    app.add_option("--model.k", rc.model.k, "branches per round");
    app.add_option("--model.hidden", rc.model.hidden);
    app.add_option("--model.gnn_steps", rc.model.gnn_steps);
    app.add_option("--model.selector,--selector", selector_s, "learned_gru | learned_mlp | random");
    app.add_option("--model.aggregator,--aggregator", aggregator_s, "max | sum");
    app.add_option("--model.share_gnn_params", rc.model.share_gnn_params);
    auto* batch_opt = app.add_option("--train.batch_size", rc.train.batch_size);
    app.add_option("--train.epochs", rc.train.epochs);
    app.add_option("--train.lr", rc.train.start_lr);
    app.add_option("--train.decay_rate", rc.train.decay_rate);
    app.add_option("--train.patience", rc.train.patience);
    app.add_option("--train.folds", rc.train.folds);
    app.add_option("--train.loss", loss_s, "cross_entropy | l1");
    app.add_flag("--train.profile,--profile", rc.train.profile,
                 "record wall time per epoch (breaks byte-stable outputs)");
    app.add_option("--train.relabel", rc.train.relabel_train,
                   "re-permute training graphs each epoch (default on)");

    auto* gen = app.add_subcommand("gen", "generate a dataset and write it as JSONL");
    auto* train_cmd = app.add_subcommand("train", "train and evaluate per the family protocol");
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
    auto* canon = app.add_subcommand("canon", "canonical form of one graph");
    auto* wl_cmd = app.add_subcommand("wl", "color refinement of one graph");
    auto* dist = app.add_subcommand("distinguish", "compare two graphs: WL, canonical, neural");
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    for (auto* sub : {gen, train_cmd, eval_cmd, canon, wl_cmd, dist, gradcheck})
        sub->fallthrough();

    std::string ckpt_path, split = "test";
    eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint.bin path")->required();
    eval_cmd->add_option("--split", split, "train | val | test | test_large | all");

    std::string graph_path, policy_s = "smallest", colors_path;
    long long max_leaves = 1000000;
    canon->add_option("--graph", graph_path, "single-graph JSON file")->required();
    canon->add_option("--policy", policy_s, "smallest | largest");
    canon->add_option("--max-leaves", max_leaves);
    wl_cmd->add_option("--graph", graph_path, "single-graph JSON file")->required();
    wl_cmd->add_option("--colors", colors_path, "initial coloring JSON");

    std::string path_a, path_b;
    dist->add_option("--a", path_a, "first graph JSON")->required();
    dist->add_option("--b", path_b, "second graph JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    rc.model.selector = selector_from_string(selector_s);
    rc.model.aggregator = aggregator_from_string(aggregator_s);
    rc.train.loss = loss_from_string(loss_s);
    if (batch_opt->count() > 0) rc.batch_size_set = true;
    if (!rc.batch_size_set && rc.family == "triangles") rc.train.batch_size = 60;
    if (rc.threads < 1) throw std::invalid_argument("--threads must be >= 1");

    if (gen->parsed()) return cmd_gen(rc);
    if (train_cmd->parsed()) return cmd_train(rc);
    if (eval_cmd->parsed()) return cmd_eval(rc, ckpt_path, split);
    if (canon->parsed()) return cmd_canon(graph_path, policy_s, max_leaves);
    if (wl_cmd->parsed()) return cmd_wl(graph_path, colors_path);
    if (dist->parsed()) return cmd_distinguish(rc, path_a, path_b);
    if (gradcheck->parsed()) return cmd_gradcheck(rc);
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
