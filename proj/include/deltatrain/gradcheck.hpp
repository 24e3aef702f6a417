#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "deltatrain/embedding.hpp"
#include "deltatrain/rng.hpp"
#include "deltatrain/textcnn.hpp"

namespace deltatrain {

// Central finite differences against the analytic gradients on small random
// models. The oracle touches only the forward/loss path (loss_only), so it is
// independent of the backward implementation it checks.

struct GradCheckCase {
    std::string description;
    std::size_t params_checked = 0;
    double max_rel_err = 0.0; // over entries failing the absolute floor
    double max_abs_err = 0.0;
    bool pass = true;
};

struct GradCheckReport {
    std::vector<GradCheckCase> cases;
    double max_rel_err = 0.0;
    std::size_t params_checked = 0;
    bool pass = true;
};

inline constexpr double kGradCheckStep = 1e-4;
inline constexpr double kGradCheckRelTol = 1e-4;
inline constexpr double kGradCheckAbsFloor = 1e-8;

inline GradCheckCase check_gradients_once(TextCnnModel& model, const std::vector<LabeledSequence>& batch) {
    GradCheckCase result;
    ParamSet analytic = zeros_like(model.params);
    loss_and_gradients(model, batch, analytic);

    std::vector<std::vector<double>*> ptensors, gtensors;
    for_each_tensor(model.params, [&](std::vector<double>& t) { ptensors.push_back(&t); });
    for_each_tensor(analytic, [&](std::vector<double>& t) { gtensors.push_back(&t); });

    for (std::size_t ti = 0; ti < ptensors.size(); ++ti) {
        if (ti == 0 && !model.config.finetune_embeddings) continue;
        auto& tensor = *ptensors[ti];
        const auto& grad = *gtensors[ti];
        for (std::size_t i = 0; i < tensor.size(); ++i) {
            const double saved = tensor[i];
            tensor[i] = saved + kGradCheckStep;
            const double lp = loss_only(model, batch);
            tensor[i] = saved - kGradCheckStep;
            const double lm = loss_only(model, batch);
            tensor[i] = saved;
            const double fd = (lp - lm) / (2.0 * kGradCheckStep);
            const double a = grad[i];
            const double abs_err = std::fabs(a - fd);
            ++result.params_checked;
            result.max_abs_err = std::max(result.max_abs_err, abs_err);
            const double denom = std::max(std::fabs(a), std::fabs(fd));
            if (denom > 1e-6) // keep the reported relative error meaningful
                result.max_rel_err = std::max(result.max_rel_err, abs_err / denom);
            if (abs_err < kGradCheckAbsFloor) continue;
            if (denom == 0.0 || abs_err / denom >= kGradCheckRelTol) result.pass = false;
        }
    }
    return result;
}

// Random toy configuration: <= 9 tokens, embed_dim <= 8, 2-3 channels.
// Each example uses distinct non-padding ids so no two convolution windows
// are identical: exact max-pool ties sit on kinks of the loss where central
// differences straddle two subgradients and the comparison is meaningless.
inline GradCheckCase run_random_gradcheck_case(Rng& rng, int case_index) {
    TextCnnConfig cfg;
    cfg.max_len = 5 + static_cast<int>(rng.below(5)); // 5..9
    cfg.embed_dim = 3 + static_cast<int>(rng.below(6));
    cfg.kernel_sizes = cfg.max_len >= 7 && rng.below(2) ? std::vector<int>{2, 3}
                                                        : std::vector<int>{2};
    cfg.channels_block1 = 2 + static_cast<int>(rng.below(2));
    cfg.channels_block2 = 2 + static_cast<int>(rng.below(2));
    cfg.num_classes = 2 + static_cast<int>(rng.below(2));
    cfg.finetune_embeddings = rng.below(4) != 0; // occasionally frozen
    const int vocab_size = cfg.max_len + 3 + static_cast<int>(rng.below(4));

    const auto emb = random_matrix(vocab_size, cfg.embed_dim, static_cast<std::int64_t>(rng.next() >> 1));
    TextCnnModel model = init_model(cfg, emb, static_cast<std::int64_t>(rng.next() >> 1));

    std::vector<LabeledSequence> batch;
    for (int b = 0; b < 2; ++b) {
        std::vector<int> ids;
        for (int id = 1; id < vocab_size; ++id) ids.push_back(id); // OOV row 1 included
        rng.shuffle(ids);
        LabeledSequence ex;
        ex.ids.assign(ids.begin(), ids.begin() + cfg.max_len);
        ex.label = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.num_classes)));
        batch.push_back(std::move(ex));
    }

    GradCheckCase result = check_gradients_once(model, batch);
    result.description = "case " + std::to_string(case_index) + ": max_len=" +
                         std::to_string(cfg.max_len) + " dim=" + std::to_string(cfg.embed_dim) +
                         " kernels=" + std::to_string(cfg.kernel_sizes.size()) +
                         " classes=" + std::to_string(cfg.num_classes) +
                         (cfg.finetune_embeddings ? "" : " frozen-emb");
    return result;
}

inline GradCheckReport run_gradient_check(int n_cases = 20, std::uint64_t seed = 20190813) {
    GradCheckReport report;
    Rng rng(seed);
    for (int i = 0; i < n_cases; ++i) {
        GradCheckCase c = run_random_gradcheck_case(rng, i);
        report.max_rel_err = std::max(report.max_rel_err, c.max_rel_err);
        report.params_checked += c.params_checked;
        report.pass = report.pass && c.pass;
        report.cases.push_back(std::move(c));
    }
    return report;
}

} // namespace deltatrain
