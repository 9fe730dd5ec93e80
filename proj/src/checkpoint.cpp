#include "gnnir/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace gnnir {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'G', 'N', 'I', 'R'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t x) {
    char buf[4];
    for (int i = 0; i < 4; i++) buf[i] = static_cast<char>((x >> (8 * i)) & 0xff);
    out.write(buf, 4);
}

uint32_t read_u32(std::istream& in) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw std::runtime_error("truncated checkpoint");
    uint32_t x = 0;
    for (int i = 0; i < 4; i++) x |= static_cast<uint32_t>(buf[i]) << (8 * i);
    return x;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) {
    json j;
    j["layers"] = cfg.layers;
    j["k"] = cfg.k;
    j["hidden"] = cfg.hidden;
    j["gnn_steps"] = cfg.gnn_steps;
    j["in_dim"] = cfg.in_dim;
    j["out_dim"] = cfg.out_dim;
    j["selector"] = to_string(cfg.selector);
    j["aggregator"] = to_string(cfg.aggregator);
    j["share_gnn_params"] = cfg.share_gnn_params;
    j["seed"] = cfg.seed;
    return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
    json j = json::parse(text);
    ModelConfig cfg;
    cfg.layers = j.at("layers").get<int>();
    cfg.k = j.at("k").get<int>();
    cfg.hidden = j.at("hidden").get<int>();
    cfg.gnn_steps = j.at("gnn_steps").get<int>();
    cfg.in_dim = j.at("in_dim").get<int>();
    cfg.out_dim = j.at("out_dim").get<int>();
    cfg.selector = selector_from_string(j.at("selector").get<std::string>());
    cfg.aggregator = aggregator_from_string(j.at("aggregator").get<std::string>());
    cfg.share_gnn_params = j.at("share_gnn_params").get<bool>();
    cfg.seed = j.at("seed").get<uint64_t>();
    cfg.validate();
    return cfg;
}

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ParamStore& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    std::string header = model_config_to_json(cfg);
    write_u32(out, static_cast<uint32_t>(header.size()));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));

    auto all = params.all();
    write_u32(out, static_cast<uint32_t>(all.size()));
    for (const auto* p : all) {
        write_u32(out, static_cast<uint32_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_u32(out, static_cast<uint32_t>(p->value.shape.size()));
        for (int dim : p->value.shape) write_u32(out, static_cast<uint32_t>(dim));
        out.write(reinterpret_cast<const char*>(p->value.data.data()),
                  static_cast<std::streamsize>(p->value.data.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    uint32_t version = read_u32(in);
    if (version != kVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

    uint32_t header_len = read_u32(in);
    std::string header(header_len, '\0');
    in.read(header.data(), header_len);
    if (!in) throw std::runtime_error("truncated checkpoint header");

    Checkpoint ck;
    ck.config = model_config_from_json(header);
    uint32_t count = read_u32(in);
    for (uint32_t i = 0; i < count; i++) {
        uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        uint32_t ndim = read_u32(in);
        std::vector<int> shape;
        for (uint32_t d = 0; d < ndim; d++) shape.push_back(static_cast<int>(read_u32(in)));
        Tensor t = Tensor::zeros(shape);
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!in) throw std::runtime_error("truncated tensor data in checkpoint");
        ck.params[name] = std::move(t);
    }
    return ck;
}

Model load_model(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    Model model(ck.config);
    if (ck.params.size() != static_cast<size_t>(model.params().all().size()))
        throw std::runtime_error("checkpoint parameter count does not match the model");
    model.params().restore(ck.params);
    return model;
}

}  // namespace gnnir
