#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "deltatrain/errors.hpp"
#include "deltatrain/textcnn.hpp"

namespace deltatrain {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is little-endian; big-endian hosts are unsupported");

// Versioned header (JSON architecture description) followed by a flat
// little-endian 64-bit real payload, tensors in canonical order. Round-trips
// bit-exactly.
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline nlohmann::ordered_json config_to_json(const TextCnnConfig& c) {
    return nlohmann::ordered_json{
        {"max_len", c.max_len},
        {"embed_dim", c.embed_dim},
        {"kernel_sizes", c.kernel_sizes},
        {"channels_block1", c.channels_block1},
        {"channels_block2", c.channels_block2},
        {"num_classes", c.num_classes},
        {"learning_rate", c.learning_rate},
        {"adam_beta1", c.adam_beta1},
        {"adam_beta2", c.adam_beta2},
        {"adam_epsilon", c.adam_epsilon},
        {"batch_size", c.batch_size},
        {"max_epochs", c.max_epochs},
        {"patience_epochs", c.patience_epochs},
        {"finetune_embeddings", c.finetune_embeddings},
        {"seed", c.seed},
    };
}

inline TextCnnConfig config_from_json(const nlohmann::json& j) {
    TextCnnConfig c;
    c.max_len = j.at("max_len").get<int>();
    c.embed_dim = j.at("embed_dim").get<int>();
    c.kernel_sizes = j.at("kernel_sizes").get<std::vector<int>>();
    c.channels_block1 = j.at("channels_block1").get<int>();
    c.channels_block2 = j.at("channels_block2").get<int>();
    c.num_classes = j.at("num_classes").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.adam_beta1 = j.at("adam_beta1").get<double>();
    c.adam_beta2 = j.at("adam_beta2").get<double>();
    c.adam_epsilon = j.at("adam_epsilon").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.max_epochs = j.at("max_epochs").get<int>();
    c.patience_epochs = j.at("patience_epochs").get<int>();
    c.finetune_embeddings = j.at("finetune_embeddings").get<bool>();
    c.seed = j.at("seed").get<std::int64_t>();
    return c;
}

inline void save_checkpoint(const TextCnnModel& model, const std::string& path) {
    nlohmann::ordered_json header;
    header["config"] = config_to_json(model.config);
    header["init_kind"] = kind_name(model.init_kind);
    header["vocab_size"] = model.vocab_size;
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write("DTCN", 4);
    const std::uint32_t version = kCheckpointVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t hlen = header_str.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(header_str.data(), static_cast<std::streamsize>(hlen));
    for_each_tensor(const_cast<ParamSet&>(model.params), [&](std::vector<double>& t) {
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * sizeof(double)));
    });
    if (!out) throw DataError("failed writing checkpoint: " + path);
}

inline TextCnnModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "DTCN", 4) != 0)
        throw DataError(path + ": not a model checkpoint");
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kCheckpointVersion)
        throw DataError(path + ": unsupported checkpoint version " + std::to_string(version));
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string header_str(hlen, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw DataError(path + ": truncated checkpoint header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_str);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path + ": bad checkpoint header: " + e.what());
    }
    const TextCnnConfig config = config_from_json(header.at("config"));
    const int vocab_size = header.at("vocab_size").get<int>();
    const std::string kind = header.at("init_kind").get<std::string>();

    EmbeddingMatrix emb;
    emb.vocab_size = vocab_size;
    emb.dim = config.embed_dim;
    emb.kind = kind == "pretrained" ? EmbeddingKind::pretrained : EmbeddingKind::random;
    emb.values.assign(static_cast<std::size_t>(vocab_size) * config.embed_dim, 0.0);
    TextCnnModel model = init_model(config, emb, config.seed);
    model.init_kind = emb.kind;

    for_each_tensor(model.params, [&](std::vector<double>& t) {
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
    });
    if (!in) throw DataError(path + ": truncated checkpoint payload");
    char extra;
    if (in.read(&extra, 1)) throw DataError(path + ": trailing bytes after checkpoint payload");
    return model;
}

} // namespace deltatrain
