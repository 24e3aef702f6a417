#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "deltatrain/checkpoint.hpp"
#include "deltatrain/embedding.hpp"
#include "deltatrain/errors.hpp"
#include "deltatrain/textcnn.hpp"
#include "deltatrain/util.hpp"

namespace deltatrain {

struct Ensemble {
    EmbeddingKind kind = EmbeddingKind::random;
    TextCnnConfig config;
    std::vector<std::int64_t> member_seeds;
    std::vector<TextCnnModel> members;
};

// Per-member class votes plus the bagged (probability-averaged) prediction.
struct EnsemblePrediction {
    std::vector<int> member_labels;
    bool unanimous = false;
    int pseudo_label = 0;
    std::vector<double> mean_probs;
    double confidence = 0.0; // mean_probs[pseudo_label]
};

namespace detail {

// Runs fn(i) for i in [0, n) on up to `threads` workers; rethrows the first
// exception. Results must not depend on scheduling, which holds because every
// member/chunk derives its randomness from its own seed.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int i = w; i < n; i += threads) fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace detail

// Architecture digest; the seed field is excluded because member checkpoints
// carry per-member seeds.
inline std::string config_digest(const TextCnnConfig& config) {
    TextCnnConfig c = config;
    c.seed = 0;
    return to_hex(fnv1a64(config_to_json(c).dump()));
}

// Members share architecture and init kind and differ only by seed. For the
// pretrained kind every member copies the source matrix; for the random kind
// each member redraws its embedding from its own seed, so duplicated random
// networks are independently initialized.
inline Ensemble train_ensemble_with_seeds(const std::vector<std::int64_t>& seeds,
                                          EmbeddingKind kind, const EmbeddingMatrix& embedding_source,
                                          const std::vector<LabeledSequence>& train,
                                          const std::vector<LabeledSequence>& dev,
                                          const TextCnnConfig& config, int threads = 1) {
    if (seeds.empty()) throw ConfigError("ensemble needs at least one member");
    if (std::set<std::int64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
        throw DataError("duplicate member seed");

    Ensemble ens;
    ens.kind = kind;
    ens.config = config;
    ens.member_seeds = seeds;
    ens.members.resize(seeds.size());
    detail::parallel_for(static_cast<int>(seeds.size()), threads, [&](int i) {
        TextCnnConfig member_cfg = config;
        member_cfg.seed = seeds[static_cast<std::size_t>(i)];
        TextCnnModel model =
            kind == EmbeddingKind::random
                ? init_model(member_cfg,
                             random_matrix(embedding_source.vocab_size, embedding_source.dim,
                                           member_cfg.seed),
                             member_cfg.seed)
                : init_model(member_cfg, embedding_source, member_cfg.seed);
        train_early_stopped(model, train, dev, member_cfg);
        ens.members[static_cast<std::size_t>(i)] = std::move(model);
    });
    return ens;
}

inline Ensemble train_ensemble(int n_members, EmbeddingKind kind,
                               const EmbeddingMatrix& embedding_source,
                               const std::vector<LabeledSequence>& train,
                               const std::vector<LabeledSequence>& dev,
                               const TextCnnConfig& config, std::int64_t base_seed,
                               int threads = 1) {
    std::vector<std::int64_t> seeds;
    for (int i = 0; i < n_members; ++i) seeds.push_back(base_seed + i);
    return train_ensemble_with_seeds(seeds, kind, embedding_source, train, dev, config, threads);
}

// Bagging: arithmetic mean of member probabilities; pseudo-label is the
// argmax of the mean (lowest index on ties); unanimity over member argmax
// labels. Order of members does not affect any field.
inline std::vector<EnsemblePrediction> ensemble_predict(const Ensemble& ensemble,
                                                        const std::vector<TokenIdSequence>& examples,
                                                        int threads = 1) {
    const std::size_t n_members = ensemble.members.size();
    std::vector<std::vector<Prediction>> per_member(n_members);
    detail::parallel_for(static_cast<int>(n_members), threads, [&](int mi) {
        per_member[static_cast<std::size_t>(mi)] =
            predict(ensemble.members[static_cast<std::size_t>(mi)], examples);
    });

    std::vector<EnsemblePrediction> out(examples.size());
    const int ncls = ensemble.config.num_classes;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        EnsemblePrediction& ep = out[i];
        ep.mean_probs.assign(static_cast<std::size_t>(ncls), 0.0);
        ep.member_labels.reserve(n_members);
        for (std::size_t mi = 0; mi < n_members; ++mi) {
            const Prediction& p = per_member[mi][i];
            ep.member_labels.push_back(p.label);
            for (int c = 0; c < ncls; ++c)
                ep.mean_probs[static_cast<std::size_t>(c)] += p.probs[static_cast<std::size_t>(c)];
        }
        for (auto& v : ep.mean_probs) v /= static_cast<double>(n_members);
        ep.unanimous = std::all_of(ep.member_labels.begin(), ep.member_labels.end(),
                                   [&](int l) { return l == ep.member_labels[0]; });
        ep.pseudo_label = static_cast<int>(
            std::max_element(ep.mean_probs.begin(), ep.mean_probs.end()) - ep.mean_probs.begin());
        ep.confidence = ep.mean_probs[static_cast<std::size_t>(ep.pseudo_label)];
    }
    return out;
}

// Directory of member checkpoints plus a manifest naming kind, seeds and a
// config digest.
inline void save_ensemble(const Ensemble& ensemble, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::ordered_json manifest;
    manifest["schema"] = "deltatrain-ensemble-v1";
    manifest["kind"] = kind_name(ensemble.kind);
    manifest["member_seeds"] = ensemble.member_seeds;
    manifest["config_digest"] = config_digest(ensemble.config);
    manifest["n_members"] = ensemble.members.size();
    for (std::size_t i = 0; i < ensemble.members.size(); ++i)
        save_checkpoint(ensemble.members[i],
                        (fs::path(dir) / ("member_" + std::to_string(i) + ".ckpt")).string());
    write_file((fs::path(dir) / "ensemble.json").string(), manifest.dump(2) + "\n");
}

inline Ensemble load_ensemble(const std::string& dir) {
    namespace fs = std::filesystem;
    const std::string manifest_path = (fs::path(dir) / "ensemble.json").string();
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(manifest_path + ": " + e.what());
    }
    Ensemble ens;
    ens.kind = manifest.at("kind").get<std::string>() == "pretrained" ? EmbeddingKind::pretrained
                                                                      : EmbeddingKind::random;
    ens.member_seeds = manifest.at("member_seeds").get<std::vector<std::int64_t>>();
    const std::size_t n = manifest.at("n_members").get<std::size_t>();
    for (std::size_t i = 0; i < n; ++i)
        ens.members.push_back(
            load_checkpoint((fs::path(dir) / ("member_" + std::to_string(i) + ".ckpt")).string()));
    if (!ens.members.empty()) ens.config = ens.members[0].config;
    const std::string expect = config_digest(ens.config);
    if (manifest.at("config_digest").get<std::string>() != expect)
        throw DataError(manifest_path + ": config digest mismatch");
    return ens;
}

} // namespace deltatrain
