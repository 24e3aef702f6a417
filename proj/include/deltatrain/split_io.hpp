#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "deltatrain/corpus.hpp"
#include "deltatrain/errors.hpp"
#include "deltatrain/util.hpp"

namespace deltatrain {

// Where the split's documents came from; recorded so the bundle can be
// rebuilt bit-exactly from the manifest plus the original files.
struct SplitSource {
    std::string train_path;
    std::string test_path; // empty when no test file was given
    DatasetFormat format = DatasetFormat::csv_class_title_body;
    int declared_num_classes = 0;
    std::string train_id_prefix = "tr";
    std::string test_id_prefix = "te";
};

inline constexpr const char* kSplitManifestName = "split.json";

inline void save_split(const SplitBundle& bundle, const SplitSource& source,
                       const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::ordered_json j;
    j["schema"] = "deltatrain-split-v1";
    j["seed"] = bundle.split_seed;
    j["labeled_fraction"] = bundle.labeled_fraction;
    j["dev_fraction"] = bundle.dev_fraction;
    j["num_classes"] = bundle.num_classes;
    j["source"] = {
        {"train_path", source.train_path},
        {"test_path", source.test_path},
        {"format", format_name(source.format)},
        {"declared_num_classes", source.declared_num_classes},
        {"train_id_prefix", source.train_id_prefix},
        {"test_id_prefix", source.test_id_prefix},
        {"train_digest", file_digest_hex(source.train_path)},
        {"test_digest", source.test_path.empty() ? "" : file_digest_hex(source.test_path)},
    };
    auto ids_of = [](const std::vector<Document>& docs) {
        std::vector<std::string> ids;
        ids.reserve(docs.size());
        for (const auto& d : docs) ids.push_back(d.id);
        return ids;
    };
    j["partitions"] = {
        {"train", ids_of(bundle.train)},
        {"dev", ids_of(bundle.dev)},
        {"test", ids_of(bundle.test)},
        {"unlabeled", ids_of(bundle.unlabeled)},
    };
    j["warnings"] = bundle.warnings;
    write_file((fs::path(dir) / kSplitManifestName).string(), j.dump(2) + "\n");
}

inline SplitBundle load_split(const std::string& dir) {
    namespace fs = std::filesystem;
    const std::string manifest_path = (fs::path(dir) / kSplitManifestName).string();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(manifest_path + ": " + e.what());
    }
    auto field = [&](const char* name) -> const nlohmann::json& {
        if (!j.contains(name)) throw DataError(manifest_path + ": missing field '" + name + "'");
        return j.at(name);
    };
    if (field("schema").get<std::string>() != "deltatrain-split-v1")
        throw DataError(manifest_path + ": unsupported schema");

    const auto& src = field("source");
    auto src_field = [&](const char* name) -> const nlohmann::json& {
        if (!src.contains(name)) throw DataError(manifest_path + ": missing field 'source." + name + "'");
        return src.at(name);
    };
    const std::string train_path = src_field("train_path").get<std::string>();
    const std::string test_path = src_field("test_path").get<std::string>();
    const DatasetFormat format = parse_format(src_field("format").get<std::string>());
    const int declared = src_field("declared_num_classes").get<int>();

    if (file_digest_hex(train_path) != src_field("train_digest").get<std::string>())
        throw DataError(train_path + ": dataset file changed since split was created");
    auto train_docs = load_dataset(train_path, format, declared,
                                   src_field("train_id_prefix").get<std::string>());
    std::vector<Document> test_docs;
    if (!test_path.empty()) {
        if (file_digest_hex(test_path) != src_field("test_digest").get<std::string>())
            throw DataError(test_path + ": dataset file changed since split was created");
        test_docs = load_dataset(test_path, format, declared,
                                 src_field("test_id_prefix").get<std::string>());
    }

    std::unordered_map<std::string, const Document*> by_id;
    for (const auto& d : train_docs) by_id.emplace(d.id, &d);
    for (const auto& d : test_docs) by_id.emplace(d.id, &d);
    auto pick = [&](const nlohmann::json& ids) {
        std::vector<Document> docs;
        docs.reserve(ids.size());
        for (const auto& id : ids) {
            auto it = by_id.find(id.get<std::string>());
            if (it == by_id.end())
                throw DataError(manifest_path + ": id '" + id.get<std::string>() +
                                "' not present in the source dataset");
            docs.push_back(*it->second);
        }
        return docs;
    };

    const auto& parts = field("partitions");
    auto part = [&](const char* name) -> const nlohmann::json& {
        if (!parts.contains(name))
            throw DataError(manifest_path + ": missing field 'partitions." + std::string(name) + "'");
        return parts.at(name);
    };
    SplitBundle bundle;
    bundle.split_seed = field("seed").get<std::int64_t>();
    bundle.labeled_fraction = field("labeled_fraction").get<double>();
    bundle.dev_fraction = field("dev_fraction").get<double>();
    bundle.num_classes = field("num_classes").get<int>();
    bundle.warnings = field("warnings").get<std::vector<std::string>>();
    bundle.train = pick(part("train"));
    bundle.dev = pick(part("dev"));
    bundle.test = pick(part("test"));
    bundle.unlabeled = pick(part("unlabeled"));
    for (auto& d : bundle.unlabeled) {
        if (d.gold_label) bundle.hidden_gold.emplace(d.id, *d.gold_label);
        d.gold_label.reset();
    }
    return bundle;
}

} // namespace deltatrain
