#include <stdexcept>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gnnir/checkpoint.hpp"
#include "gnnir/train.hpp"
#include "test_util.hpp"

using namespace gnnir;
using namespace testutil;

namespace {

std::string temp_file(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

ModelConfig demo_cfg() {
    ModelConfig cfg;
    cfg.layers = 2;
    cfg.k = 3;
    cfg.hidden = 12;
    cfg.gnn_steps = 2;
    cfg.in_dim = 1;
    cfg.out_dim = 4;
    cfg.selector = SelectorMode::LearnedMlp;
    cfg.aggregator = Aggregator::Sum;
    cfg.share_gnn_params = false;
    cfg.seed = 987;
    return cfg;
}

}  // namespace

TEST_CASE("checkpoint round trip is exact") {
    ModelConfig cfg = demo_cfg();
    Model model(cfg);
    std::string path = temp_file("gnnir_ckpt.bin");
    save_checkpoint(path, cfg, model.params());

    Checkpoint back = load_checkpoint(path);
    CHECK(back.config.layers == cfg.layers);
    CHECK(back.config.k == cfg.k);
    CHECK(back.config.hidden == cfg.hidden);
    CHECK(back.config.gnn_steps == cfg.gnn_steps);
    CHECK(back.config.out_dim == cfg.out_dim);
    CHECK(back.config.selector == cfg.selector);
    CHECK(back.config.aggregator == cfg.aggregator);
    CHECK(back.config.share_gnn_params == cfg.share_gnn_params);
    CHECK(back.config.seed == cfg.seed);

    auto names = model.params().all();
    CHECK(back.params.size() == names.size());
    for (const auto* p : names) {
        REQUIRE(back.params.count(p->name) == 1);
        const Tensor& t = back.params.at(p->name);
        CHECK(t.shape == p->value.shape);
        CHECK(t.data == p->value.data);  // bit exact
    }
    std::filesystem::remove(path);
}

TEST_CASE("restored model reproduces the original forward pass bit for bit") {
    ModelConfig cfg = demo_cfg();
    Model model(cfg);
    std::string path = temp_file("gnnir_ckpt2.bin");
    save_checkpoint(path, cfg, model.params());
    Model restored = load_model(path);

    LabeledGraph item{prism(), 0, ""};
    LabelMap labels;
    labels.classes = {0, 1, 2, 3};
    Batch b = make_batch({&item}, labels);
    Tape t1, t2;
    CHECK(t1.val(model.forward(t1, b)).data == t2.val(restored.forward(t2, b)).data);
    std::filesystem::remove(path);
}

TEST_CASE("writing twice yields identical bytes") {
    ModelConfig cfg = demo_cfg();
    Model model(cfg);
    std::string p1 = temp_file("gnnir_ck_a.bin");
    std::string p2 = temp_file("gnnir_ck_b.bin");
    save_checkpoint(p1, cfg, model.params());
    save_checkpoint(p2, cfg, model.params());
    std::ifstream a(p1, std::ios::binary), b(p2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    CHECK_FALSE(sa.empty());
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST_CASE("loader rejects damaged files") {
    ModelConfig cfg = demo_cfg();
    Model model(cfg);
    std::string path = temp_file("gnnir_ck_damage.bin");
    save_checkpoint(path, cfg, model.params());

    // Truncate.
    {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<long>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);

    // Wrong magic.
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "NOPEnope";
    }
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
    CHECK_THROWS_AS(load_checkpoint(temp_file("gnnir_ck_missing.bin")), std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("model config json round trip") {
    ModelConfig cfg = demo_cfg();
    ModelConfig back = model_config_from_json(model_config_to_json(cfg));
    CHECK(back.layers == cfg.layers);
    CHECK(back.k == cfg.k);
    CHECK(back.hidden == cfg.hidden);
    CHECK(back.selector == cfg.selector);
    CHECK(back.aggregator == cfg.aggregator);
    CHECK(back.seed == cfg.seed);
}
