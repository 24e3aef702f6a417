#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "deltatrain/corpus.hpp"
#include "deltatrain/embedding.hpp"
#include "deltatrain/errors.hpp"
#include "deltatrain/rng.hpp"

namespace deltatrain {

// ---------------------------------------------------------------------------
// Configuration

struct TextCnnConfig {
    int max_len = 100;
    int embed_dim = 300;
    std::vector<int> kernel_sizes = {2, 3, 4, 5};
    int channels_block1 = 32;
    int channels_block2 = 16;
    int num_classes = 2;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    int batch_size = 32;
    int max_epochs = 100;
    int patience_epochs = 5;
    bool finetune_embeddings = true;
    std::int64_t seed = 0; // drives weight init and the epoch shuffle stream
};

// Derived layer geometry. Block 1 runs a valid 1-d convolution per kernel
// size, ReLU, then a local max-pool of window 2 / stride 2 (ceil mode: a
// trailing window of one element is allowed). The pooled maps are
// concatenated along the channel axis after truncating every map to the
// shortest pooled length q1. Block 2 convolves the concatenated map per
// kernel size, applies ReLU and a global max-pool over positions.
struct TextCnnShapes {
    std::vector<int> conv1_len; // per kernel: max_len - k + 1
    std::vector<int> pool1_len; // per kernel: ceil(conv1_len / 2)
    int q1 = 0;                 // min over pool1_len
    int c1 = 0;                 // channels_block1 * |kernels|
    std::vector<int> conv2_len; // per kernel: q1 - k + 1
    int feature_dim = 0;        // channels_block2 * |kernels|
};

inline TextCnnShapes compute_shapes(const TextCnnConfig& cfg) {
    if (cfg.max_len < 1 || cfg.embed_dim < 1 || cfg.channels_block1 < 1 ||
        cfg.channels_block2 < 1 || cfg.num_classes < 1)
        throw ConfigError("all architecture counts must be positive");
    if (cfg.learning_rate <= 0) throw ConfigError("learning_rate must be > 0");
    if (cfg.kernel_sizes.empty()) throw ConfigError("kernel_sizes must be non-empty");
    std::vector<int> sorted = cfg.kernel_sizes;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ConfigError("duplicate kernel size");

    TextCnnShapes s;
    for (int k : cfg.kernel_sizes) {
        if (k < 1 || k > cfg.max_len)
            throw ConfigError("kernel size " + std::to_string(k) + " exceeds max_len " +
                              std::to_string(cfg.max_len));
        const int len = cfg.max_len - k + 1;
        s.conv1_len.push_back(len);
        s.pool1_len.push_back((len + 1) / 2);
    }
    s.q1 = *std::min_element(s.pool1_len.begin(), s.pool1_len.end());
    s.c1 = cfg.channels_block1 * static_cast<int>(cfg.kernel_sizes.size());
    for (int k : cfg.kernel_sizes) {
        const int len = s.q1 - k + 1;
        if (len < 1)
            throw ConfigError("kernel size " + std::to_string(k) +
                              " does not fit the pooled block-1 map of length " +
                              std::to_string(s.q1));
        s.conv2_len.push_back(len);
    }
    s.feature_dim = cfg.channels_block2 * static_cast<int>(cfg.kernel_sizes.size());
    return s;
}

// ---------------------------------------------------------------------------
// Parameters

struct ConvFilter {
    std::vector<double> w; // [c_out][k][c_in], flattened; each output row is contiguous
    std::vector<double> b; // [c_out]
};

struct ParamSet {
    std::vector<double> embedding; // V x D
    std::vector<ConvFilter> conv1; // per kernel size
    std::vector<ConvFilter> conv2;
    std::vector<double> dense_w; // num_classes x feature_dim
    std::vector<double> dense_b;

    void zero() {
        auto z = [](std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); };
        z(embedding);
        for (auto& f : conv1) { z(f.w); z(f.b); }
        for (auto& f : conv2) { z(f.w); z(f.b); }
        z(dense_w);
        z(dense_b);
    }
};

// Tensors in canonical order; the same order is used by Adam state pairing
// and the checkpoint payload.
template <typename P, typename F>
void for_each_tensor(P& p, F&& f) {
    f(p.embedding);
    for (auto& c : p.conv1) { f(c.w); f(c.b); }
    for (auto& c : p.conv2) { f(c.w); f(c.b); }
    f(p.dense_w);
    f(p.dense_b);
}

inline ParamSet zeros_like(const ParamSet& p) {
    ParamSet z = p;
    z.zero();
    return z;
}

struct TextCnnModel {
    TextCnnConfig config;
    TextCnnShapes shapes;
    EmbeddingKind init_kind = EmbeddingKind::random;
    int vocab_size = 0;
    ParamSet params;
};

struct Prediction {
    int label = 0;
    std::vector<double> probs;
};

struct LabeledSequence {
    TokenIdSequence ids;
    int label = 0;
};

// Conv and dense weights drawn uniform on [-s, s] with s = sqrt(6/(fan_in +
// fan_out)); biases start at zero. Tensors are drawn in canonical order, so
// the model is a pure function of (config, embedding, seed).
inline TextCnnModel init_model(const TextCnnConfig& config, const EmbeddingMatrix& embedding,
                               std::int64_t seed) {
    if (embedding.dim != config.embed_dim)
        throw ConfigError("embedding dim " + std::to_string(embedding.dim) +
                          " does not match config embed_dim " + std::to_string(config.embed_dim));
    TextCnnModel m;
    m.config = config;
    m.shapes = compute_shapes(config);
    m.init_kind = embedding.kind;
    m.vocab_size = embedding.vocab_size;
    m.params.embedding = embedding.values;

    Rng rng(static_cast<std::uint64_t>(seed));
    auto fill_uniform = [&](std::vector<double>& v, int fan_in, int fan_out) {
        const double s = std::sqrt(6.0 / (fan_in + fan_out));
        for (auto& x : v) x = rng.uniform(-s, s);
    };
    const int n_kernels = static_cast<int>(config.kernel_sizes.size());
    const int c1 = config.channels_block1 * n_kernels;
    for (int ki = 0; ki < n_kernels; ++ki) {
        const int k = config.kernel_sizes[static_cast<std::size_t>(ki)];
        ConvFilter f;
        f.w.assign(static_cast<std::size_t>(config.channels_block1) * k * config.embed_dim, 0.0);
        f.b.assign(static_cast<std::size_t>(config.channels_block1), 0.0);
        fill_uniform(f.w, k * config.embed_dim, config.channels_block1);
        m.params.conv1.push_back(std::move(f));
    }
    for (int ki = 0; ki < n_kernels; ++ki) {
        const int k = config.kernel_sizes[static_cast<std::size_t>(ki)];
        ConvFilter f;
        f.w.assign(static_cast<std::size_t>(config.channels_block2) * k * c1, 0.0);
        f.b.assign(static_cast<std::size_t>(config.channels_block2), 0.0);
        fill_uniform(f.w, k * c1, config.channels_block2);
        m.params.conv2.push_back(std::move(f));
    }
    m.params.dense_w.assign(static_cast<std::size_t>(config.num_classes) * m.shapes.feature_dim, 0.0);
    m.params.dense_b.assign(static_cast<std::size_t>(config.num_classes), 0.0);
    fill_uniform(m.params.dense_w, m.shapes.feature_dim, config.num_classes);
    return m;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace detail {

inline double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline void axpy(double alpha, const double* x, double* y, int n) {
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

inline void check_finite(const std::vector<double>& v, const char* layer) {
    for (double x : v)
        if (!std::isfinite(x)) throw NumericalError(std::string("numerical divergence in ") + layer);
}

// Per-example activation buffers, reused across examples.
struct Workspace {
    std::vector<double> x;                  // max_len * D
    std::vector<std::vector<double>> a1;    // per kernel: p_need * ch1 (pre-ReLU)
    std::vector<std::vector<int>> pool_arg; // per kernel: q1 * ch1 -> argmax conv1 position
    std::vector<double> m;                  // q1 * c1 concatenated pooled map (post-ReLU)
    std::vector<std::vector<double>> a2;    // per kernel: conv2_len * ch2 (pre-ReLU)
    std::vector<int> gmax_arg;              // feature_dim -> argmax conv2 position
    std::vector<double> features;           // feature_dim
    std::vector<double> logits, probs;      // num_classes
    // backward scratch
    std::vector<double> dx, dm, dfeat;
    std::vector<std::vector<double>> da1, da2;
    std::vector<int> p_need;                // per kernel: conv1 positions that can reach the output

    void resize(const TextCnnModel& model) {
        const auto& cfg = model.config;
        const auto& s = model.shapes;
        const std::size_t n_k = cfg.kernel_sizes.size();
        x.assign(static_cast<std::size_t>(cfg.max_len) * cfg.embed_dim, 0.0);
        a1.resize(n_k);
        pool_arg.resize(n_k);
        da1.resize(n_k);
        p_need.resize(n_k);
        for (std::size_t ki = 0; ki < n_k; ++ki) {
            // positions past 2*q1 only feed pooled slots that truncation drops
            p_need[ki] = std::min(s.conv1_len[ki], 2 * s.q1);
            a1[ki].assign(static_cast<std::size_t>(p_need[ki]) * cfg.channels_block1, 0.0);
            pool_arg[ki].assign(static_cast<std::size_t>(s.q1) * cfg.channels_block1, 0);
            da1[ki] = a1[ki];
        }
        m.assign(static_cast<std::size_t>(s.q1) * s.c1, 0.0);
        a2.resize(n_k);
        da2.resize(n_k);
        for (std::size_t ki = 0; ki < n_k; ++ki) {
            a2[ki].assign(static_cast<std::size_t>(s.conv2_len[ki]) * cfg.channels_block2, 0.0);
            da2[ki] = a2[ki];
        }
        gmax_arg.assign(static_cast<std::size_t>(s.feature_dim), 0);
        features.assign(static_cast<std::size_t>(s.feature_dim), 0.0);
        logits.assign(static_cast<std::size_t>(cfg.num_classes), 0.0);
        probs = logits;
        dx = x;
        dm = m;
        dfeat = features;
    }
};

inline void forward_one(const TextCnnModel& model, const TokenIdSequence& ids, Workspace& ws) {
    const auto& cfg = model.config;
    const auto& s = model.shapes;
    const int D = cfg.embed_dim;
    const int ch1 = cfg.channels_block1;
    const int ch2 = cfg.channels_block2;
    const int n_k = static_cast<int>(cfg.kernel_sizes.size());

    if (static_cast<int>(ids.size()) != cfg.max_len)
        throw DataError("sequence length " + std::to_string(ids.size()) +
                        " does not match model max_len " + std::to_string(cfg.max_len));

    for (int p = 0; p < cfg.max_len; ++p) {
        const int id = ids[static_cast<std::size_t>(p)];
        if (id < 0 || id >= model.vocab_size) throw DataError("token id out of range");
        std::memcpy(ws.x.data() + static_cast<std::size_t>(p) * D,
                    model.params.embedding.data() + static_cast<std::size_t>(id) * D,
                    sizeof(double) * static_cast<std::size_t>(D));
    }

    // block 1: conv -> (ReLU) -> local max-pool, fused via max-then-ReLU
    for (int ki = 0; ki < n_k; ++ki) {
        const int k = cfg.kernel_sizes[static_cast<std::size_t>(ki)];
        const auto& f = model.params.conv1[static_cast<std::size_t>(ki)];
        auto& a1 = ws.a1[static_cast<std::size_t>(ki)];
        const int kd = k * D;
        for (int p = 0; p < ws.p_need[static_cast<std::size_t>(ki)]; ++p) {
            const double* xp = ws.x.data() + static_cast<std::size_t>(p) * D;
            double* out = a1.data() + static_cast<std::size_t>(p) * ch1;
            for (int c = 0; c < ch1; ++c)
                out[c] = f.b[static_cast<std::size_t>(c)] +
                         dot(f.w.data() + static_cast<std::size_t>(c) * kd, xp, kd);
        }
        check_finite(a1, "conv1");
        auto& arg = ws.pool_arg[static_cast<std::size_t>(ki)];
        const int len = ws.p_need[static_cast<std::size_t>(ki)];
        for (int q = 0; q < s.q1; ++q) {
            const int p0 = 2 * q;
            const int p1 = p0 + 1;
            for (int c = 0; c < ch1; ++c) {
                int best = p0;
                double v = a1[static_cast<std::size_t>(p0) * ch1 + c];
                if (p1 < len && a1[static_cast<std::size_t>(p1) * ch1 + c] > v) {
                    best = p1;
                    v = a1[static_cast<std::size_t>(p1) * ch1 + c];
                }
                arg[static_cast<std::size_t>(q) * ch1 + c] = best;
                ws.m[static_cast<std::size_t>(q) * s.c1 + ki * ch1 + c] = v > 0.0 ? v : 0.0;
            }
        }
    }

    // block 2: conv over the concatenated map -> (ReLU) -> global max-pool
    for (int ki = 0; ki < n_k; ++ki) {
        const int k = cfg.kernel_sizes[static_cast<std::size_t>(ki)];
        const auto& f = model.params.conv2[static_cast<std::size_t>(ki)];
        auto& a2 = ws.a2[static_cast<std::size_t>(ki)];
        const int kc = k * s.c1;
        const int len = s.conv2_len[static_cast<std::size_t>(ki)];
        for (int p = 0; p < len; ++p) {
            const double* mp = ws.m.data() + static_cast<std::size_t>(p) * s.c1;
            double* out = a2.data() + static_cast<std::size_t>(p) * ch2;
            for (int c = 0; c < ch2; ++c)
                out[c] = f.b[static_cast<std::size_t>(c)] +
                         dot(f.w.data() + static_cast<std::size_t>(c) * kc, mp, kc);
        }
        check_finite(a2, "conv2");
        for (int c = 0; c < ch2; ++c) {
            int best = 0;
            double v = a2[static_cast<std::size_t>(c)];
            for (int p = 1; p < len; ++p) {
                const double cand = a2[static_cast<std::size_t>(p) * ch2 + c];
                if (cand > v) {
                    v = cand;
                    best = p;
                }
            }
            ws.gmax_arg[static_cast<std::size_t>(ki * ch2 + c)] = best;
            ws.features[static_cast<std::size_t>(ki * ch2 + c)] = v > 0.0 ? v : 0.0;
        }
    }

    const int ncls = cfg.num_classes;
    for (int j = 0; j < ncls; ++j)
        ws.logits[static_cast<std::size_t>(j)] =
            model.params.dense_b[static_cast<std::size_t>(j)] +
            dot(model.params.dense_w.data() + static_cast<std::size_t>(j) * s.feature_dim,
                ws.features.data(), s.feature_dim);
    check_finite(ws.logits, "dense");

    double zmax = ws.logits[0];
    for (int j = 1; j < ncls; ++j) zmax = std::max(zmax, ws.logits[static_cast<std::size_t>(j)]);
    double sum = 0.0;
    for (int j = 0; j < ncls; ++j) {
        ws.probs[static_cast<std::size_t>(j)] = std::exp(ws.logits[static_cast<std::size_t>(j)] - zmax);
        sum += ws.probs[static_cast<std::size_t>(j)];
    }
    for (int j = 0; j < ncls; ++j) ws.probs[static_cast<std::size_t>(j)] /= sum;
}

// dlogits is d(loss)/d(logits) for this example, already scaled by any batch
// normalization factor. Accumulates into grads; padding embedding row 0 is
// never touched.
inline void backward_one(const TextCnnModel& model, const TokenIdSequence& ids, Workspace& ws,
                         const std::vector<double>& dlogits, ParamSet& grads) {
    const auto& cfg = model.config;
    const auto& s = model.shapes;
    const int D = cfg.embed_dim;
    const int ch1 = cfg.channels_block1;
    const int ch2 = cfg.channels_block2;
    const int n_k = static_cast<int>(cfg.kernel_sizes.size());
    const int F = s.feature_dim;

    std::fill(ws.dfeat.begin(), ws.dfeat.end(), 0.0);
    for (int j = 0; j < cfg.num_classes; ++j) {
        const double g = dlogits[static_cast<std::size_t>(j)];
        if (g == 0.0) continue;
        grads.dense_b[static_cast<std::size_t>(j)] += g;
        axpy(g, ws.features.data(), grads.dense_w.data() + static_cast<std::size_t>(j) * F, F);
        axpy(g, model.params.dense_w.data() + static_cast<std::size_t>(j) * F, ws.dfeat.data(), F);
    }

    // global max-pool + ReLU gate
    for (auto& v : ws.da2) std::fill(v.begin(), v.end(), 0.0);
    for (int ki = 0; ki < n_k; ++ki) {
        for (int c = 0; c < ch2; ++c) {
            const double g = ws.dfeat[static_cast<std::size_t>(ki * ch2 + c)];
            if (g == 0.0) continue;
            const int p = ws.gmax_arg[static_cast<std::size_t>(ki * ch2 + c)];
            if (ws.a2[static_cast<std::size_t>(ki)][static_cast<std::size_t>(p) * ch2 + c] > 0.0)
                ws.da2[static_cast<std::size_t>(ki)][static_cast<std::size_t>(p) * ch2 + c] += g;
        }
    }

    // conv2 backward; da2 is sparse (at most ch2 entries per kernel)
    std::fill(ws.dm.begin(), ws.dm.end(), 0.0);
    for (int ki = 0; ki < n_k; ++ki) {
        const int k = cfg.kernel_sizes[static_cast<std::size_t>(ki)];
        const int kc = k * s.c1;
        const auto& f = model.params.conv2[static_cast<std::size_t>(ki)];
        auto& gf = grads.conv2[static_cast<std::size_t>(ki)];
        const auto& da2 = ws.da2[static_cast<std::size_t>(ki)];
        for (int p = 0; p < s.conv2_len[static_cast<std::size_t>(ki)]; ++p) {
            const double* mp = ws.m.data() + static_cast<std::size_t>(p) * s.c1;
            double* dmp = ws.dm.data() + static_cast<std::size_t>(p) * s.c1;
            for (int c = 0; c < ch2; ++c) {
                const double g = da2[static_cast<std::size_t>(p) * ch2 + c];
                if (g == 0.0) continue;
                gf.b[static_cast<std::size_t>(c)] += g;
                axpy(g, mp, gf.w.data() + static_cast<std::size_t>(c) * kc, kc);
                axpy(g, f.w.data() + static_cast<std::size_t>(c) * kc, dmp, kc);
            }
        }
    }

    // concat split + local max-pool routing + ReLU gate
    for (auto& v : ws.da1) std::fill(v.begin(), v.end(), 0.0);
    for (int ki = 0; ki < n_k; ++ki) {
        const auto& a1 = ws.a1[static_cast<std::size_t>(ki)];
        auto& da1 = ws.da1[static_cast<std::size_t>(ki)];
        const auto& arg = ws.pool_arg[static_cast<std::size_t>(ki)];
        for (int q = 0; q < s.q1; ++q) {
            for (int c = 0; c < ch1; ++c) {
                const double g = ws.dm[static_cast<std::size_t>(q) * s.c1 + ki * ch1 + c];
                if (g == 0.0) continue;
                const int p = arg[static_cast<std::size_t>(q) * ch1 + c];
                if (a1[static_cast<std::size_t>(p) * ch1 + c] > 0.0)
                    da1[static_cast<std::size_t>(p) * ch1 + c] += g;
            }
        }
    }

    // conv1 backward
    std::fill(ws.dx.begin(), ws.dx.end(), 0.0);
    const bool need_dx = cfg.finetune_embeddings;
    for (int ki = 0; ki < n_k; ++ki) {
        const int k = cfg.kernel_sizes[static_cast<std::size_t>(ki)];
        const int kd = k * D;
        const auto& f = model.params.conv1[static_cast<std::size_t>(ki)];
        auto& gf = grads.conv1[static_cast<std::size_t>(ki)];
        const auto& da1 = ws.da1[static_cast<std::size_t>(ki)];
        for (int p = 0; p < ws.p_need[static_cast<std::size_t>(ki)]; ++p) {
            const double* xp = ws.x.data() + static_cast<std::size_t>(p) * D;
            double* dxp = ws.dx.data() + static_cast<std::size_t>(p) * D;
            for (int c = 0; c < ch1; ++c) {
                const double g = da1[static_cast<std::size_t>(p) * ch1 + c];
                if (g == 0.0) continue;
                gf.b[static_cast<std::size_t>(c)] += g;
                axpy(g, xp, gf.w.data() + static_cast<std::size_t>(c) * kd, kd);
                if (need_dx) axpy(g, f.w.data() + static_cast<std::size_t>(c) * kd, dxp, kd);
            }
        }
    }

    if (cfg.finetune_embeddings) {
        for (int p = 0; p < cfg.max_len; ++p) {
            const int id = ids[static_cast<std::size_t>(p)];
            if (id == Vocabulary::kPadIndex) continue; // padding row stays zero
            axpy(1.0, ws.dx.data() + static_cast<std::size_t>(p) * D,
                 grads.embedding.data() + static_cast<std::size_t>(id) * D, D);
        }
    }
}

} // namespace detail

inline std::vector<Prediction> forward(const TextCnnModel& model,
                                       const std::vector<TokenIdSequence>& batch) {
    detail::Workspace ws;
    ws.resize(model);
    std::vector<Prediction> out;
    out.reserve(batch.size());
    for (const auto& ids : batch) {
        detail::forward_one(model, ids, ws);
        Prediction p;
        p.probs = ws.probs;
        p.label = static_cast<int>(std::max_element(ws.probs.begin(), ws.probs.end()) -
                                   ws.probs.begin()); // lowest index wins ties
        out.push_back(std::move(p));
    }
    return out;
}

// Evaluation-mode prediction; identical to forward (the architecture has no
// train-only behavior), kept as its own entry point per the module contract.
inline std::vector<Prediction> predict(const TextCnnModel& model,
                                       const std::vector<TokenIdSequence>& batch) {
    return forward(model, batch);
}

// Mean cross-entropy over the batch; accumulates analytic gradients for every
// parameter tensor (embedding rows only when fine-tuning is enabled).
inline double loss_and_gradients(const TextCnnModel& model,
                                 const std::vector<LabeledSequence>& batch, ParamSet& grads) {
    if (batch.empty()) throw DataError("empty batch");
    grads.zero();
    detail::Workspace ws;
    ws.resize(model);
    const double scale = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    std::vector<double> dlogits(static_cast<std::size_t>(model.config.num_classes), 0.0);
    for (const auto& ex : batch) {
        if (ex.label < 0 || ex.label >= model.config.num_classes)
            throw DataError("label " + std::to_string(ex.label) + " out of range");
        detail::forward_one(model, ex.ids, ws);
        // -log p[y] computed via log-sum-exp for stability
        double zmax = ws.logits[0];
        for (double z : ws.logits) zmax = std::max(zmax, z);
        double sum = 0.0;
        for (double z : ws.logits) sum += std::exp(z - zmax);
        loss += (std::log(sum) + zmax - ws.logits[static_cast<std::size_t>(ex.label)]) * scale;
        for (std::size_t j = 0; j < ws.probs.size(); ++j)
            dlogits[j] = ws.probs[j] * scale;
        dlogits[static_cast<std::size_t>(ex.label)] -= scale;
        detail::backward_one(model, ex.ids, ws, dlogits, grads);
    }
    if (!std::isfinite(loss)) throw NumericalError("numerical divergence in loss");
    return loss;
}

// Forward-only mean cross-entropy; used by the finite-difference oracle.
inline double loss_only(const TextCnnModel& model, const std::vector<LabeledSequence>& batch) {
    if (batch.empty()) throw DataError("empty batch");
    detail::Workspace ws;
    ws.resize(model);
    const double scale = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& ex : batch) {
        detail::forward_one(model, ex.ids, ws);
        double zmax = ws.logits[0];
        for (double z : ws.logits) zmax = std::max(zmax, z);
        double sum = 0.0;
        for (double z : ws.logits) sum += std::exp(z - zmax);
        loss += (std::log(sum) + zmax - ws.logits[static_cast<std::size_t>(ex.label)]) * scale;
    }
    return loss;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
    ParamSet m, v;
};

inline AdamState make_adam_state(const TextCnnModel& model) {
    return AdamState{zeros_like(model.params), zeros_like(model.params)};
}

// Standard Adam with bias correction; epsilon is added outside the square
// root. t is the 1-based step index.
inline void adam_step(TextCnnModel& model, const ParamSet& grads, AdamState& state, int t) {
    if (t < 1) throw ConfigError("adam step index must be >= 1");
    const auto& cfg = model.config;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);

    std::vector<std::vector<double>*> ps, gs, ms, vs;
    for_each_tensor(model.params, [&](std::vector<double>& v) { ps.push_back(&v); });
    for_each_tensor(const_cast<ParamSet&>(grads), [&](std::vector<double>& v) { gs.push_back(&v); });
    for_each_tensor(state.m, [&](std::vector<double>& v) { ms.push_back(&v); });
    for_each_tensor(state.v, [&](std::vector<double>& v) { vs.push_back(&v); });

    for (std::size_t ti = 0; ti < ps.size(); ++ti) {
        if (ti == 0 && !cfg.finetune_embeddings) continue; // frozen embedding tensor
        auto& p = *ps[ti];
        const auto& g = *gs[ti];
        auto& m = *ms[ti];
        auto& v = *vs[ti];
        if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size())
            throw ConfigError("optimizer state shape mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
            v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_epsilon);
            if (!std::isfinite(p[i])) throw NumericalError("non-finite parameter update");
        }
    }
}

// ---------------------------------------------------------------------------
// Training with epoch-level early stopping

struct TrainRecord {
    std::vector<double> epoch_dev_accuracy;
    int best_epoch = 0; // 0-based index into epoch_dev_accuracy
    bool stopped_early = false;
};

// Shared stopping rule for epochs and meta-epochs: stop once the earliest
// maximum has not improved for max(patience, 1) consecutive entries.
struct StopDecision {
    bool stop = false;
    int best_index = 0;
};

inline StopDecision early_stop_decision(const std::vector<double>& history, int patience) {
    StopDecision d;
    if (history.empty()) return d;
    for (std::size_t i = 1; i < history.size(); ++i)
        if (history[i] > history[static_cast<std::size_t>(d.best_index)])
            d.best_index = static_cast<int>(i);
    const int since_best = static_cast<int>(history.size()) - 1 - d.best_index;
    d.stop = since_best >= std::max(patience, 1);
    return d;
}

inline double dev_accuracy(const TextCnnModel& model, const std::vector<LabeledSequence>& dev) {
    std::vector<TokenIdSequence> xs;
    xs.reserve(dev.size());
    for (const auto& ex : dev) xs.push_back(ex.ids);
    const auto preds = predict(model, xs);
    long correct = 0;
    for (std::size_t i = 0; i < dev.size(); ++i)
        if (preds[i].label == dev[i].label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(dev.size());
}

// Shuffled mini-batch Adam; after each epoch the dev accuracy is evaluated
// and the parameters of the best epoch (earliest maximum) are restored on
// return.
inline TrainRecord train_early_stopped(TextCnnModel& model, const std::vector<LabeledSequence>& train,
                                       const std::vector<LabeledSequence>& dev,
                                       const TextCnnConfig& config) {
    if (train.empty() || dev.empty()) throw DataError("train and dev must be non-empty");
    TrainRecord record;
    AdamState state = make_adam_state(model);
    Rng shuffle_rng(static_cast<std::uint64_t>(config.seed) * 0x9E3779B97F4A7C15ULL + 0x1F123BB5);
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    ParamSet best_params = model.params;
    double best_acc = -1.0;
    int adam_t = 0;
    const int batch_size = std::max(config.batch_size, 1);

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        ParamSet grads = zeros_like(model.params);
        std::vector<LabeledSequence> batch;
        try {
            for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
                batch.clear();
                const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
                for (std::size_t i = start; i < end; ++i) batch.push_back(train[order[i]]);
                loss_and_gradients(model, batch, grads);
                adam_step(model, grads, state, ++adam_t);
            }
        } catch (const NumericalError& e) {
            throw NumericalError("epoch " + std::to_string(epoch) + ": " + e.what());
        }
        const double acc = dev_accuracy(model, dev);
        record.epoch_dev_accuracy.push_back(acc);
        if (acc > best_acc) {
            best_acc = acc;
            record.best_epoch = epoch;
            best_params = model.params;
        }
        const auto decision = early_stop_decision(record.epoch_dev_accuracy, config.patience_epochs);
        if (decision.stop) {
            record.stopped_early = true;
            break;
        }
    }
    model.params = std::move(best_params);
    return record;
}

} // namespace deltatrain
