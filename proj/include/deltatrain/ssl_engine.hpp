#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "deltatrain/corpus.hpp"
#include "deltatrain/embedding.hpp"
#include "deltatrain/ensemble.hpp"
#include "deltatrain/errors.hpp"
#include "deltatrain/metrics.hpp"
#include "deltatrain/textcnn.hpp"

namespace deltatrain {

enum class Framework { delta, self_training, co_training };

inline std::string framework_name(Framework f) {
    switch (f) {
        case Framework::delta: return "delta";
        case Framework::self_training: return "self_training";
        case Framework::co_training: return "co_training";
    }
    return "delta";
}

inline Framework parse_framework(const std::string& s) {
    if (s == "delta") return Framework::delta;
    if (s == "self_training" || s == "selftrain") return Framework::self_training;
    if (s == "co_training" || s == "cotrain") return Framework::co_training;
    throw ConfigError("unknown framework: " + s);
}

struct SslConfig {
    Framework framework = Framework::delta;
    int max_meta_epochs = 10;
    int meta_patience = 2;
    double selftrain_threshold = 0.9; // T
    bool flood_after_stop = true;     // delta only
    int n_emb_members = 3;
    int n_rand_members = 1;
    TextCnnConfig classifier;
    std::int64_t run_seed = 1;
    std::int64_t seed_stride = 1000;
    int threads = 1;
    int min_freq = 1;

    void validate() const {
        if (max_meta_epochs < 1) throw ConfigError("max_meta_epochs must be >= 1");
        if (!(selftrain_threshold > 0.0 && selftrain_threshold < 1.0))
            throw ConfigError("selftrain_threshold must be in (0, 1)");
        if (n_emb_members < 1 || n_rand_members < 1)
            throw ConfigError("ensembles need at least one member");
        if (meta_patience < 0) throw ConfigError("meta_patience must be >= 0");
        if (seed_stride < 1) throw ConfigError("seed_stride must be >= 1");
    }
};

// Meta-epoch t retrains from scratch under fresh, reproducible seeds. The
// rand side is offset so emb and rand member seeds never collide; the flood
// retrain uses the slot one past max_meta_epochs.
struct SeedPlan {
    std::int64_t run_seed = 0;
    std::int64_t stride = 1000;
    std::int64_t emb_base(int meta_epoch) const { return run_seed + meta_epoch * stride; }
    std::int64_t rand_base(int meta_epoch) const { return emb_base(meta_epoch) + stride / 2; }
    int flood_slot(int max_meta_epochs) const { return max_meta_epochs + 1; }
};

struct PoolItem {
    std::string id;
    TokenIdSequence ids;
};

// Everything a run consumes, pre-encoded. The unlabeled pool carries no
// labels; the true labels live only in hidden_gold, which is passed to
// diagnostics code and never to training.
struct RunInputs {
    int num_classes = 0;
    std::vector<LabeledSequence> train, dev, test;
    std::vector<PoolItem> pool;
    std::unordered_map<std::string, int> hidden_gold;
    EmbeddingMatrix pretrained;
    // split/book-keeping carried into the manifest
    double labeled_fraction = 0.0, dev_fraction = 0.0;
    std::int64_t split_seed = 0;
    std::string dataset_digest;
    std::vector<std::string> warnings;
};

inline RunInputs prepare_inputs(const SplitBundle& bundle, const Vocabulary& vocab,
                                const EmbeddingMatrix& pretrained, int max_len) {
    RunInputs in;
    in.num_classes = bundle.num_classes;
    auto encode_labeled = [&](const std::vector<Document>& docs) {
        std::vector<LabeledSequence> out;
        out.reserve(docs.size());
        for (const auto& d : docs) {
            if (!d.gold_label) throw DataError("labeled partition contains unlabeled document " + d.id);
            out.push_back(LabeledSequence{encode(d, vocab, max_len), *d.gold_label});
        }
        return out;
    };
    in.train = encode_labeled(bundle.train);
    in.dev = encode_labeled(bundle.dev);
    in.test = encode_labeled(bundle.test);
    in.pool.reserve(bundle.unlabeled.size());
    for (const auto& d : bundle.unlabeled)
        in.pool.push_back(PoolItem{d.id, encode(d, vocab, max_len)});
    in.hidden_gold = bundle.hidden_gold;
    in.pretrained = pretrained;
    in.labeled_fraction = bundle.labeled_fraction;
    in.dev_fraction = bundle.dev_fraction;
    in.split_seed = bundle.split_seed;
    in.warnings = bundle.warnings;
    if (pretrained.coverage == 0.0)
        in.warnings.push_back("pretrained vector file covers none of the vocabulary");
    return in;
}

// ---------------------------------------------------------------------------
// Selection rules

// Conditions from the method: (a) every member of both ensembles predicts the
// same class, and (b) the two ensembles disagree. The returned pseudo-label is
// always the embedded ensemble's.
inline std::optional<int> delta_select(const EnsemblePrediction& rand_pred,
                                       const EnsemblePrediction& emb_pred) {
    if (rand_pred.mean_probs.size() != emb_pred.mean_probs.size())
        throw DataError("delta_select: class-set mismatch");
    if (!rand_pred.unanimous || !emb_pred.unanimous) return std::nullopt;
    if (rand_pred.pseudo_label == emb_pred.pseudo_label) return std::nullopt;
    return emb_pred.pseudo_label;
}

// One meta-epoch's selection under the framework's rule: delta takes
// unanimous disagreements labeled by the embedded side; self-training takes
// embedded-side confidence >= T (ties count as selected). Returns
// (pool index, pseudo-label) pairs.
inline std::vector<std::pair<std::size_t, int>> select_for_training(
    Framework framework, const std::vector<EnsemblePrediction>& rand_preds,
    const std::vector<EnsemblePrediction>& emb_preds, double threshold) {
    if (rand_preds.size() != emb_preds.size())
        throw DataError("selection: prediction count mismatch");
    std::vector<std::pair<std::size_t, int>> selected;
    for (std::size_t i = 0; i < emb_preds.size(); ++i) {
        std::optional<int> label;
        if (framework == Framework::delta) {
            label = delta_select(rand_preds[i], emb_preds[i]);
        } else if (emb_preds[i].confidence >= threshold) {
            label = emb_preds[i].pseudo_label;
        }
        if (label) selected.emplace_back(i, *label);
    }
    return selected;
}

struct MetaStopDecision {
    bool stop = false;
    int best_meta_epoch = 0;
};

// Stop once the best dev accuracy has not improved for `patience` consecutive
// meta-epochs (at least one); best is the earliest maximum.
inline MetaStopDecision meta_early_stop(const std::vector<double>& history, int patience) {
    const StopDecision d = early_stop_decision(history, patience);
    return MetaStopDecision{d.stop, d.best_index};
}

// ---------------------------------------------------------------------------
// Records

struct MetaEpochRecord {
    int meta_epoch = 0;
    double dev_acc_emb = 0.0, dev_acc_rand = 0.0;
    double test_acc_emb = 0.0, test_acc_rand = 0.0;
    int n_selected = 0;
    int pool_remaining = 0;
    QuadrantRatios quadrants; // over the pool as predicted this meta-epoch
    double unlabeled_acc_emb = 0.0, unlabeled_acc_rand = 0.0;
};

struct SelectionEvent {
    int meta_epoch = 0;
    std::string id;
    int pseudo_label = 0;
    int hidden_gold = 0;
    std::string quadrant; // TT/TF/FT/FF at selection time
    std::string source;   // delta_selection | confidence_threshold | cotrain_partner | flood
};

struct FloodRecord {
    bool performed = false;
    int n_added = 0;
    double dev_acc_emb = 0.0, dev_acc_rand = 0.0;
    double test_acc_emb = 0.0, test_acc_rand = 0.0;
};

struct RunResult {
    Framework framework = Framework::delta;
    std::vector<MetaEpochRecord> records;
    int best_meta_epoch = 0;
    bool meta_stopped_early = false;
    FloodRecord flood;
    double final_test_accuracy = 0.0;
    std::vector<SelectionEvent> ledger;
    std::vector<std::string> conflicts; // co-training label conflicts
    bool hypothesis_holds = false;      // emb > rand on test at meta-epoch 0
};

// ---------------------------------------------------------------------------
// Engine

namespace detail {

inline std::vector<TokenIdSequence> xs_of(const std::vector<LabeledSequence>& v) {
    std::vector<TokenIdSequence> xs;
    xs.reserve(v.size());
    for (const auto& e : v) xs.push_back(e.ids);
    return xs;
}

inline std::vector<int> gold_of(const std::vector<LabeledSequence>& v) {
    std::vector<int> g;
    g.reserve(v.size());
    for (const auto& e : v) g.push_back(e.label);
    return g;
}

inline std::vector<TokenIdSequence> xs_of_pool(const std::vector<PoolItem>& pool) {
    std::vector<TokenIdSequence> xs;
    xs.reserve(pool.size());
    for (const auto& p : pool) xs.push_back(p.ids);
    return xs;
}

inline std::vector<int> labels_of(const std::vector<EnsemblePrediction>& preds) {
    std::vector<int> l;
    l.reserve(preds.size());
    for (const auto& p : preds) l.push_back(p.pseudo_label);
    return l;
}

// Diagnostics-only access to the hidden pool labels.
inline std::vector<int> hidden_gold_of(const std::vector<PoolItem>& pool,
                                       const std::unordered_map<std::string, int>& hidden_gold) {
    std::vector<int> g;
    g.reserve(pool.size());
    for (const auto& p : pool) {
        auto it = hidden_gold.find(p.id);
        if (it == hidden_gold.end())
            throw DataError("pool document " + p.id + " has no recorded hidden label");
        g.push_back(it->second);
    }
    return g;
}

// Trains the embedded and random ensembles of one meta-epoch as a single flat
// member pool so all of them share the thread budget.
inline std::pair<Ensemble, Ensemble> train_both(const RunInputs& inputs,
                                                const std::vector<LabeledSequence>& emb_train,
                                                const std::vector<LabeledSequence>& rand_train,
                                                const SslConfig& cfg, const TextCnnConfig& classifier,
                                                std::int64_t emb_base, std::int64_t rand_base) {
    std::vector<std::int64_t> emb_seeds, rand_seeds;
    for (int i = 0; i < cfg.n_emb_members; ++i) emb_seeds.push_back(emb_base + i);
    for (int i = 0; i < cfg.n_rand_members; ++i) rand_seeds.push_back(rand_base + i);
    {
        std::unordered_set<std::int64_t> all(emb_seeds.begin(), emb_seeds.end());
        for (auto s : rand_seeds)
            if (!all.insert(s).second) throw DataError("duplicate member seed");
    }

    EmbeddingMatrix random_source; // shape-only; members redraw from their seeds
    random_source.vocab_size = inputs.pretrained.vocab_size;
    random_source.dim = inputs.pretrained.dim;
    random_source.kind = EmbeddingKind::random;

    Ensemble emb_ens, rand_ens;
    emb_ens.kind = EmbeddingKind::pretrained;
    rand_ens.kind = EmbeddingKind::random;
    emb_ens.config = classifier;
    rand_ens.config = classifier;
    emb_ens.member_seeds = emb_seeds;
    rand_ens.member_seeds = rand_seeds;
    emb_ens.members.resize(emb_seeds.size());
    rand_ens.members.resize(rand_seeds.size());

    const int total = cfg.n_emb_members + cfg.n_rand_members;
    parallel_for(total, cfg.threads, [&](int i) {
        const bool is_emb = i < cfg.n_emb_members;
        const int mi = is_emb ? i : i - cfg.n_emb_members;
        TextCnnConfig member_cfg = classifier;
        member_cfg.seed = is_emb ? emb_seeds[static_cast<std::size_t>(mi)]
                                 : rand_seeds[static_cast<std::size_t>(mi)];
        TextCnnModel model =
            is_emb ? init_model(member_cfg, inputs.pretrained, member_cfg.seed)
                   : init_model(member_cfg,
                                random_matrix(random_source.vocab_size, random_source.dim,
                                              member_cfg.seed),
                                member_cfg.seed);
        train_early_stopped(model, is_emb ? emb_train : rand_train, inputs.dev, member_cfg);
        (is_emb ? emb_ens : rand_ens).members[static_cast<std::size_t>(mi)] = std::move(model);
    });
    return {std::move(emb_ens), std::move(rand_ens)};
}

struct PairAccuracy {
    double emb = 0.0, rand = 0.0;
};

inline PairAccuracy split_accuracy(const Ensemble& emb_ens, const Ensemble& rand_ens,
                                   const std::vector<TokenIdSequence>& xs,
                                   const std::vector<int>& gold, int threads) {
    PairAccuracy a;
    a.emb = accuracy(labels_of(ensemble_predict(emb_ens, xs, threads)), gold);
    a.rand = accuracy(labels_of(ensemble_predict(rand_ens, xs, threads)), gold);
    return a;
}

} // namespace detail

// Mutable run state: the growing training set, the shrinking pool, and the
// ids already pseudo-labeled (each id enters the training set at most once).
struct EngineState {
    std::vector<LabeledSequence> train;
    std::vector<PoolItem> pool;
    std::unordered_set<std::string> already_selected;
};

struct MetaEpochOutcome {
    MetaEpochRecord record;
    std::vector<SelectionEvent> events;
    Ensemble emb_ens, rand_ens; // the models trained this meta-epoch
};

// One meta-epoch of delta or self-training: (1) retrain both ensembles from
// scratch under this meta-epoch's seeds, (2) predict the remaining pool,
// (3) select per the framework rule, (4) move selections into the training
// set, (5) record accuracies and quadrant ratios (the only consumer of the
// hidden pool labels). An empty selection is not an error.
inline MetaEpochOutcome run_meta_epoch(EngineState& state, const RunInputs& inputs,
                                       const SslConfig& cfg, const TextCnnConfig& classifier,
                                       int meta_epoch) {
    if (state.train.empty()) throw DataError("training set is empty");
    const SeedPlan plan{cfg.run_seed, cfg.seed_stride};
    MetaEpochOutcome out;
    auto [emb_ens, rand_ens] =
        detail::train_both(inputs, state.train, state.train, cfg, classifier,
                           plan.emb_base(meta_epoch), plan.rand_base(meta_epoch));

    const auto pool_xs = detail::xs_of_pool(state.pool);
    std::vector<EnsemblePrediction> emb_pool, rand_pool;
    if (!state.pool.empty()) {
        emb_pool = ensemble_predict(emb_ens, pool_xs, cfg.threads);
        rand_pool = ensemble_predict(rand_ens, pool_xs, cfg.threads);
    }

    MetaEpochRecord& rec = out.record;
    rec.meta_epoch = meta_epoch;
    const auto dev_acc = detail::split_accuracy(emb_ens, rand_ens, detail::xs_of(inputs.dev),
                                                detail::gold_of(inputs.dev), cfg.threads);
    const auto test_acc = detail::split_accuracy(emb_ens, rand_ens, detail::xs_of(inputs.test),
                                                 detail::gold_of(inputs.test), cfg.threads);
    rec.dev_acc_emb = dev_acc.emb;
    rec.dev_acc_rand = dev_acc.rand;
    rec.test_acc_emb = test_acc.emb;
    rec.test_acc_rand = test_acc.rand;

    std::vector<int> pool_gold, emb_labels, rand_labels;
    if (!state.pool.empty()) {
        pool_gold = detail::hidden_gold_of(state.pool, inputs.hidden_gold);
        emb_labels = detail::labels_of(emb_pool);
        rand_labels = detail::labels_of(rand_pool);
        rec.quadrants = quadrant_ratios(rand_labels, emb_labels, pool_gold);
        rec.unlabeled_acc_emb = accuracy(emb_labels, pool_gold);
        rec.unlabeled_acc_rand = accuracy(rand_labels, pool_gold);
    }

    const auto selected =
        select_for_training(cfg.framework, rand_pool, emb_pool, cfg.selftrain_threshold);

    std::vector<char> take(state.pool.size(), 0);
    for (const auto& [i, label] : selected) {
        const PoolItem& item = state.pool[i];
        if (!state.already_selected.insert(item.id).second)
            throw DataError("document " + item.id + " selected twice");
        SelectionEvent ev;
        ev.meta_epoch = meta_epoch;
        ev.id = item.id;
        ev.pseudo_label = label;
        ev.hidden_gold = pool_gold[i];
        ev.quadrant = quadrant_name(rand_labels[i] == pool_gold[i], emb_labels[i] == pool_gold[i]);
        ev.source = cfg.framework == Framework::delta ? "delta_selection" : "confidence_threshold";
        out.events.push_back(std::move(ev));
        state.train.push_back(LabeledSequence{item.ids, label});
        take[i] = 1;
    }
    std::vector<PoolItem> next_pool;
    next_pool.reserve(state.pool.size() - selected.size());
    for (std::size_t i = 0; i < state.pool.size(); ++i)
        if (!take[i]) next_pool.push_back(std::move(state.pool[i]));
    state.pool = std::move(next_pool);

    rec.n_selected = static_cast<int>(selected.size());
    rec.pool_remaining = static_cast<int>(state.pool.size());
    out.emb_ens = std::move(emb_ens);
    out.rand_ens = std::move(rand_ens);
    return out;
}

// State and models as of the end of the best meta-epoch (selections applied).
struct MetaSnapshot {
    int meta_epoch = -1;
    double dev_acc = -1.0;
    EngineState state;
    Ensemble emb_ens, rand_ens;
};

struct FloodOutcome {
    FloodRecord record;
    std::vector<SelectionEvent> events;
    Ensemble final_emb, final_rand;
};

// Flood step: pseudo-label every example still in the pool at the best
// meta-epoch with that meta-epoch's embedded ensemble (unanimity not
// required), add them all to the training set, and retrain both ensembles
// from scratch once. The embedded side's test accuracy is the run's final.
inline FloodOutcome flood_and_finalize(const MetaSnapshot& best, const RunInputs& inputs,
                                       const SslConfig& cfg, const TextCnnConfig& classifier) {
    FloodOutcome out;
    if (best.state.pool.empty()) return out; // nothing to flood
    const SeedPlan plan{cfg.run_seed, cfg.seed_stride};
    const auto pool_xs = detail::xs_of_pool(best.state.pool);
    const auto emb_pool = ensemble_predict(best.emb_ens, pool_xs, cfg.threads);
    const auto rand_pool = ensemble_predict(best.rand_ens, pool_xs, cfg.threads);
    const auto pool_gold = detail::hidden_gold_of(best.state.pool, inputs.hidden_gold);
    std::vector<LabeledSequence> flooded = best.state.train;
    for (std::size_t i = 0; i < best.state.pool.size(); ++i) {
        const int label = emb_pool[i].pseudo_label;
        SelectionEvent ev;
        ev.meta_epoch = best.meta_epoch;
        ev.id = best.state.pool[i].id;
        ev.pseudo_label = label;
        ev.hidden_gold = pool_gold[i];
        ev.quadrant = quadrant_name(rand_pool[i].pseudo_label == pool_gold[i],
                                    emb_pool[i].pseudo_label == pool_gold[i]);
        ev.source = "flood";
        out.events.push_back(std::move(ev));
        flooded.push_back(LabeledSequence{best.state.pool[i].ids, label});
    }
    const int slot = plan.flood_slot(cfg.max_meta_epochs);
    auto [emb_final, rand_final] = detail::train_both(inputs, flooded, flooded, cfg, classifier,
                                                      plan.emb_base(slot), plan.rand_base(slot));
    out.record.performed = true;
    out.record.n_added = static_cast<int>(best.state.pool.size());
    const auto dev_acc = detail::split_accuracy(emb_final, rand_final, detail::xs_of(inputs.dev),
                                                detail::gold_of(inputs.dev), cfg.threads);
    const auto test_acc = detail::split_accuracy(emb_final, rand_final, detail::xs_of(inputs.test),
                                                 detail::gold_of(inputs.test), cfg.threads);
    out.record.dev_acc_emb = dev_acc.emb;
    out.record.dev_acc_rand = dev_acc.rand;
    out.record.test_acc_emb = test_acc.emb;
    out.record.test_acc_rand = test_acc.rand;
    out.final_emb = std::move(emb_final);
    out.final_rand = std::move(rand_final);
    return out;
}

// Shared meta-epoch loop for delta and self-training: run meta-epochs until
// meta-level dev patience or the budget is exhausted, then (delta only) flood
// the remaining pool from the best meta-epoch's snapshot.
inline RunResult run_pseudo_label_loop(const RunInputs& inputs, const SslConfig& cfg) {
    cfg.validate();
    TextCnnConfig classifier = cfg.classifier;
    classifier.num_classes = inputs.num_classes;

    RunResult result;
    result.framework = cfg.framework;

    EngineState state{inputs.train, inputs.pool, {}};
    MetaSnapshot best;
    std::vector<double> history;
    for (int t = 0; t < cfg.max_meta_epochs; ++t) {
        MetaEpochOutcome out = run_meta_epoch(state, inputs, cfg, classifier, t);
        for (auto& ev : out.events) result.ledger.push_back(std::move(ev));
        result.records.push_back(out.record);
        history.push_back(out.record.dev_acc_emb);

        if (out.record.dev_acc_emb > best.dev_acc) {
            best.meta_epoch = t;
            best.dev_acc = out.record.dev_acc_emb;
            best.state = state; // selections of this meta-epoch included
            best.emb_ens = std::move(out.emb_ens);
            best.rand_ens = std::move(out.rand_ens);
        }

        if (meta_early_stop(history, cfg.meta_patience).stop) {
            result.meta_stopped_early = true;
            break;
        }
    }

    result.best_meta_epoch = meta_early_stop(history, cfg.meta_patience).best_meta_epoch;
    result.hypothesis_holds =
        !result.records.empty() && result.records[0].test_acc_emb > result.records[0].test_acc_rand;

    if (cfg.framework == Framework::delta && cfg.flood_after_stop && !best.state.pool.empty()) {
        FloodOutcome flood = flood_and_finalize(best, inputs, cfg, classifier);
        for (auto& ev : flood.events) result.ledger.push_back(std::move(ev));
        result.flood = flood.record;
        result.final_test_accuracy = flood.record.test_acc_emb;
    } else {
        result.final_test_accuracy =
            result.records[static_cast<std::size_t>(result.best_meta_epoch)].test_acc_emb;
    }
    return result;
}

// Co-training imitation: the two differently-initialized ensembles act as two
// views; each side's confident pool predictions join the other side's
// training set, at most once per side. Reported accuracy is the embedded
// side's.
inline RunResult run_co_training(const RunInputs& inputs, const SslConfig& cfg) {
    cfg.validate();
    TextCnnConfig classifier = cfg.classifier;
    classifier.num_classes = inputs.num_classes;
    const SeedPlan plan{cfg.run_seed, cfg.seed_stride};

    RunResult result;
    result.framework = Framework::co_training;

    std::vector<LabeledSequence> emb_set = inputs.train;
    std::vector<LabeledSequence> rand_set = inputs.train;
    std::unordered_set<std::string> emb_added, rand_added;

    const auto dev_xs = detail::xs_of(inputs.dev);
    const auto dev_gold = detail::gold_of(inputs.dev);
    const auto test_xs = detail::xs_of(inputs.test);
    const auto test_gold = detail::gold_of(inputs.test);
    const auto pool_xs = detail::xs_of_pool(inputs.pool);
    const auto pool_gold = detail::hidden_gold_of(inputs.pool, inputs.hidden_gold);

    std::vector<double> history;
    for (int t = 0; t < cfg.max_meta_epochs; ++t) {
        auto [emb_ens, rand_ens] = detail::train_both(inputs, emb_set, rand_set, cfg, classifier,
                                                      plan.emb_base(t), plan.rand_base(t));

        std::vector<EnsemblePrediction> emb_pool, rand_pool;
        if (!inputs.pool.empty()) {
            emb_pool = ensemble_predict(emb_ens, pool_xs, cfg.threads);
            rand_pool = ensemble_predict(rand_ens, pool_xs, cfg.threads);
        }

        MetaEpochRecord rec;
        rec.meta_epoch = t;
        const auto dev_acc = detail::split_accuracy(emb_ens, rand_ens, dev_xs, dev_gold, cfg.threads);
        const auto test_acc = detail::split_accuracy(emb_ens, rand_ens, test_xs, test_gold, cfg.threads);
        rec.dev_acc_emb = dev_acc.emb;
        rec.dev_acc_rand = dev_acc.rand;
        rec.test_acc_emb = test_acc.emb;
        rec.test_acc_rand = test_acc.rand;

        int n_new = 0;
        if (!inputs.pool.empty()) {
            const auto emb_labels = detail::labels_of(emb_pool);
            const auto rand_labels = detail::labels_of(rand_pool);
            rec.quadrants = quadrant_ratios(rand_labels, emb_labels, pool_gold);
            rec.unlabeled_acc_emb = accuracy(emb_labels, pool_gold);
            rec.unlabeled_acc_rand = accuracy(rand_labels, pool_gold);

            for (std::size_t i = 0; i < inputs.pool.size(); ++i) {
                const PoolItem& item = inputs.pool[i];
                const bool emb_confident = emb_pool[i].confidence >= cfg.selftrain_threshold;
                const bool rand_confident = rand_pool[i].confidence >= cfg.selftrain_threshold;
                const std::string quad =
                    quadrant_name(rand_labels[i] == pool_gold[i], emb_labels[i] == pool_gold[i]);
                if (emb_confident && !rand_added.count(item.id)) {
                    rand_added.insert(item.id);
                    rand_set.push_back(LabeledSequence{item.ids, emb_pool[i].pseudo_label});
                    result.ledger.push_back(SelectionEvent{t, item.id, emb_pool[i].pseudo_label,
                                                           pool_gold[i], quad, "cotrain_partner"});
                    ++n_new;
                }
                if (rand_confident && !emb_added.count(item.id)) {
                    emb_added.insert(item.id);
                    emb_set.push_back(LabeledSequence{item.ids, rand_pool[i].pseudo_label});
                    result.ledger.push_back(SelectionEvent{t, item.id, rand_pool[i].pseudo_label,
                                                           pool_gold[i], quad, "cotrain_partner"});
                    ++n_new;
                }
                if (emb_confident && rand_confident &&
                    emb_pool[i].pseudo_label != rand_pool[i].pseudo_label)
                    result.conflicts.push_back("meta_epoch " + std::to_string(t) + ": " + item.id +
                                               ": emb=" + std::to_string(emb_pool[i].pseudo_label) +
                                               " rand=" + std::to_string(rand_pool[i].pseudo_label));
            }
        }
        rec.n_selected = n_new;
        int untouched = 0;
        for (const auto& item : inputs.pool)
            if (!emb_added.count(item.id) && !rand_added.count(item.id)) ++untouched;
        rec.pool_remaining = untouched;

        result.records.push_back(rec);
        history.push_back(rec.dev_acc_emb);
        const auto decision = meta_early_stop(history, cfg.meta_patience);
        if (decision.stop) {
            result.meta_stopped_early = true;
            break;
        }
    }
    result.best_meta_epoch = meta_early_stop(history, cfg.meta_patience).best_meta_epoch;
    result.hypothesis_holds =
        !result.records.empty() && result.records[0].test_acc_emb > result.records[0].test_acc_rand;
    result.final_test_accuracy =
        result.records[static_cast<std::size_t>(result.best_meta_epoch)].test_acc_emb;
    return result;
}

// Confidence-threshold self-training under the same scaffolding as delta.
inline RunResult self_train(const RunInputs& inputs, SslConfig cfg) {
    cfg.framework = Framework::self_training;
    return run_pseudo_label_loop(inputs, cfg);
}

inline RunResult co_train(const RunInputs& inputs, SslConfig cfg) {
    cfg.framework = Framework::co_training;
    return run_co_training(inputs, cfg);
}

inline RunResult run_framework(const RunInputs& inputs, const SslConfig& cfg) {
    if (inputs.train.empty()) throw DataError("training set is empty");
    if (inputs.test.empty()) throw DataError("test set is empty; runs need a test partition");
    switch (cfg.framework) {
        case Framework::co_training: return co_train(inputs, cfg);
        case Framework::self_training: return self_train(inputs, cfg);
        case Framework::delta: break;
    }
    return run_pseudo_label_loop(inputs, cfg);
}

// Independent seeded runs at several labeled fractions over the same corpus
// and test set; the vocabulary (built on the full original training text) is
// shared so only the split changes between points.
struct SweepPoint {
    double fraction = 0.0;
    RunResult result;
    RunInputs inputs; // kept so callers can write manifests without re-splitting
};

inline std::vector<SweepPoint> run_fraction_sweep(const std::vector<Document>& train_docs,
                                                  const std::vector<Document>& test_docs,
                                                  const Vocabulary& vocab,
                                                  const EmbeddingMatrix& pretrained,
                                                  const std::vector<double>& fractions,
                                                  double dev_fraction, std::int64_t split_seed,
                                                  const SslConfig& cfg,
                                                  const std::string& dataset_digest = "") {
    std::vector<SweepPoint> points;
    for (double fraction : fractions) {
        SplitBundle bundle = split_semi_supervised(train_docs, fraction, dev_fraction, split_seed);
        bundle.test = test_docs;
        SweepPoint point;
        point.fraction = fraction;
        point.inputs = prepare_inputs(bundle, vocab, pretrained, cfg.classifier.max_len);
        point.inputs.dataset_digest = dataset_digest;
        point.result = run_framework(point.inputs, cfg);
        points.push_back(std::move(point));
    }
    return points;
}

} // namespace deltatrain
