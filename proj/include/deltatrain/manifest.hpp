#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "deltatrain/checkpoint.hpp"
#include "deltatrain/ssl_engine.hpp"
#include "deltatrain/util.hpp"

namespace deltatrain {

// A compile-time environment fingerprint; deliberately free of wall-clock or
// path state so identical runs produce byte-identical manifests.
inline std::string environment_digest() {
    std::string info;
#if defined(__VERSION__)
    info += __VERSION__;
#endif
    info += "|double=" + std::to_string(sizeof(double)) + "|long=" + std::to_string(sizeof(long));
    return to_hex(fnv1a64(info));
}

inline nlohmann::ordered_json ssl_config_to_json(const SslConfig& cfg) {
    nlohmann::ordered_json j;
    j["framework"] = framework_name(cfg.framework);
    j["max_meta_epochs"] = cfg.max_meta_epochs;
    j["meta_patience"] = cfg.meta_patience;
    j["selftrain_threshold"] = cfg.selftrain_threshold;
    j["flood_after_stop"] = cfg.flood_after_stop;
    j["n_emb_members"] = cfg.n_emb_members;
    j["n_rand_members"] = cfg.n_rand_members;
    j["run_seed"] = cfg.run_seed;
    j["seed_stride"] = cfg.seed_stride;
    j["threads"] = cfg.threads;
    j["min_freq"] = cfg.min_freq;
    j["classifier"] = config_to_json(cfg.classifier);
    return j;
}

inline nlohmann::ordered_json record_to_json(const MetaEpochRecord& r) {
    nlohmann::ordered_json j;
    j["meta_epoch"] = r.meta_epoch;
    j["dev_acc_emb"] = r.dev_acc_emb;
    j["dev_acc_rand"] = r.dev_acc_rand;
    j["test_acc_emb"] = r.test_acc_emb;
    j["test_acc_rand"] = r.test_acc_rand;
    j["n_selected"] = r.n_selected;
    j["pool_remaining"] = r.pool_remaining;
    j["quadrants"] = {{"TT", r.quadrants.tt}, {"TF", r.quadrants.tf},
                      {"FT", r.quadrants.ft}, {"FF", r.quadrants.ff}};
    j["unlabeled_acc_emb"] = r.unlabeled_acc_emb;
    j["unlabeled_acc_rand"] = r.unlabeled_acc_rand;
    return j;
}

inline nlohmann::ordered_json run_manifest(const RunResult& result, const SslConfig& cfg,
                                           const RunInputs& inputs) {
    nlohmann::ordered_json j;
    j["schema"] = "deltatrain-run-v1";
    j["framework"] = framework_name(result.framework);
    j["config"] = ssl_config_to_json(cfg);
    j["data"] = {
        {"num_classes", inputs.num_classes},
        {"n_train", inputs.train.size()},
        {"n_dev", inputs.dev.size()},
        {"n_test", inputs.test.size()},
        {"n_unlabeled", inputs.pool.size()},
        {"labeled_fraction", inputs.labeled_fraction},
        {"dev_fraction", inputs.dev_fraction},
        {"split_seed", inputs.split_seed},
        {"dataset_digest", inputs.dataset_digest},
        {"embedding_kind", kind_name(inputs.pretrained.kind)},
        {"embedding_coverage", inputs.pretrained.coverage},
        {"warnings", inputs.warnings},
    };
    j["hypothesis_check"] = {
        {"test_acc_emb", result.records.empty() ? 0.0 : result.records[0].test_acc_emb},
        {"test_acc_rand", result.records.empty() ? 0.0 : result.records[0].test_acc_rand},
        {"holds", result.hypothesis_holds},
    };
    nlohmann::ordered_json records = nlohmann::ordered_json::array();
    for (const auto& r : result.records) records.push_back(record_to_json(r));
    j["records"] = std::move(records);
    nlohmann::ordered_json ledger = nlohmann::ordered_json::array();
    for (const auto& ev : result.ledger)
        ledger.push_back({{"meta_epoch", ev.meta_epoch},
                          {"id", ev.id},
                          {"pseudo_label", ev.pseudo_label},
                          {"hidden_gold", ev.hidden_gold},
                          {"quadrant", ev.quadrant},
                          {"source", ev.source}});
    j["selection_ledger"] = std::move(ledger);
    j["conflicts"] = result.conflicts;
    j["best_meta_epoch"] = result.best_meta_epoch;
    j["meta_stopped_early"] = result.meta_stopped_early;
    if (result.flood.performed) {
        j["flood"] = {{"n_added", result.flood.n_added},
                      {"dev_acc_emb", result.flood.dev_acc_emb},
                      {"dev_acc_rand", result.flood.dev_acc_rand},
                      {"test_acc_emb", result.flood.test_acc_emb},
                      {"test_acc_rand", result.flood.test_acc_rand}};
    } else {
        j["flood"] = nullptr;
    }
    j["final_test_accuracy"] = result.final_test_accuracy;
    j["environment"] = {{"digest", environment_digest()}};
    return j;
}

// The audit trail behind the quadrant figures: one CSV row per pseudo-label
// event.
inline std::string ledger_csv(const RunResult& result) {
    std::string out = "meta_epoch,document_id,pseudo_label,hidden_gold_label,quadrant,source\n";
    for (const auto& ev : result.ledger) {
        out += std::to_string(ev.meta_epoch) + "," + ev.id + "," + std::to_string(ev.pseudo_label) +
               "," + std::to_string(ev.hidden_gold) + "," + ev.quadrant + "," + ev.source + "\n";
    }
    return out;
}

inline void write_run_outputs(const RunResult& result, const SslConfig& cfg, const RunInputs& inputs,
                              const std::string& manifest_path) {
    write_file(manifest_path, run_manifest(result, cfg, inputs).dump(2) + "\n");
    write_file(manifest_path + ".ledger.csv", ledger_csv(result));
}

} // namespace deltatrain
