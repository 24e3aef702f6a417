#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "deltatrain/checkpoint.hpp"
#include "deltatrain/gradcheck.hpp"
#include "deltatrain/textcnn.hpp"
#include "testutil.hpp"

using namespace deltatrain;

namespace {

TextCnnConfig tiny_config() {
    TextCnnConfig cfg;
    cfg.max_len = 7;
    cfg.embed_dim = 4;
    cfg.kernel_sizes = {2, 3};
    cfg.channels_block1 = 3;
    cfg.channels_block2 = 2;
    cfg.num_classes = 2;
    cfg.batch_size = 4;
    return cfg;
}

TextCnnModel tiny_model(std::int64_t seed = 5, int vocab = 12, int num_classes = 2) {
    TextCnnConfig cfg = tiny_config();
    cfg.num_classes = num_classes;
    return init_model(cfg, random_matrix(vocab, cfg.embed_dim, seed + 1), seed);
}

} // namespace

TEST_CASE("shape computation matches the published architecture") {
    TextCnnConfig cfg; // defaults: max_len 100, kernels {2,3,4,5}, 32/16 channels
    const auto s = compute_shapes(cfg);
    CHECK(s.q1 == 48);
    CHECK(s.c1 == 128);
    CHECK(s.feature_dim == 64);
    CHECK(s.conv1_len == std::vector<int>{99, 98, 97, 96});
    CHECK(s.conv2_len == std::vector<int>{47, 46, 45, 44});
}

TEST_CASE("infeasible architectures are rejected") {
    TextCnnConfig cfg = tiny_config();
    cfg.kernel_sizes = {9};
    CHECK_THROWS_AS(compute_shapes(cfg), ConfigError); // kernel > max_len
    cfg.kernel_sizes = {2, 3};
    cfg.max_len = 5; // pooled map of length 2 cannot fit kernel 3
    CHECK_THROWS_AS(compute_shapes(cfg), ConfigError);
    cfg = tiny_config();
    cfg.kernel_sizes = {2, 2};
    CHECK_THROWS_AS(compute_shapes(cfg), ConfigError);
    cfg = tiny_config();
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(compute_shapes(cfg), ConfigError);
}

TEST_CASE("init is deterministic and propagates the embedding kind") {
    TextCnnConfig cfg = tiny_config();
    cfg.num_classes = 4;
    const auto emb = random_matrix(12, cfg.embed_dim, 3);
    const auto m1 = init_model(cfg, emb, 9);
    const auto m2 = init_model(cfg, emb, 9);
    CHECK(m1.params.embedding == m2.params.embedding);
    CHECK(m1.params.dense_w == m2.params.dense_w);
    CHECK(m1.params.conv1[0].w == m2.params.conv1[0].w);
    CHECK(m1.init_kind == EmbeddingKind::random);
    CHECK(m1.params.dense_b.size() == 4);

    EmbeddingMatrix pre = emb;
    pre.kind = EmbeddingKind::pretrained;
    CHECK(init_model(cfg, pre, 9).init_kind == EmbeddingKind::pretrained);

    TextCnnConfig other = cfg;
    other.embed_dim = 5;
    CHECK_THROWS_AS(init_model(other, emb, 9), ConfigError);
}

TEST_CASE("forward yields valid distributions, even on all-padding input") {
    const auto model = tiny_model(11);
    const TokenIdSequence padding(7, 0);
    const TokenIdSequence words{2, 5, 3, 9, 1, 0, 0};
    const auto preds = forward(model, {padding, words, words});
    REQUIRE(preds.size() == 3);
    for (const auto& p : preds) {
        double sum = 0.0;
        for (double v : p.probs) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            sum += v;
        }
        CHECK(sum == Catch::Approx(1.0).epsilon(1e-6));
    }
    // duplicated examples get identical predictions
    CHECK(preds[1].probs == preds[2].probs);
    CHECK(preds[1].label == preds[2].label);
}

TEST_CASE("probability outputs stay valid across random models") {
    Rng rng(31);
    for (int trial = 0; trial < 15; ++trial) {
        const auto model = tiny_model(static_cast<std::int64_t>(trial), 12,
                                      2 + static_cast<int>(rng.below(4)));
        TokenIdSequence ids(7);
        for (auto& id : ids) id = static_cast<int>(rng.below(12));
        const auto preds = forward(model, {ids});
        double sum = 0.0;
        for (double v : preds[0].probs) sum += v;
        CHECK(std::fabs(sum - 1.0) < 1e-9);
        CHECK(preds[0].label ==
              static_cast<int>(std::max_element(preds[0].probs.begin(), preds[0].probs.end()) -
                               preds[0].probs.begin()));
    }
}

TEST_CASE("non-finite activations raise a numerical divergence error naming the layer") {
    auto model = tiny_model(13);
    model.params.conv1[0].w[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_WITH(forward(model, {TokenIdSequence{2, 3, 4, 5, 6, 7, 8}}),
                      Catch::Matchers::ContainsSubstring("conv1"));
}

TEST_CASE("uniform predictions cost ln(k)") {
    for (int k : {2, 4}) {
        auto model = tiny_model(17, 12, k);
        for_each_tensor(model.params, [](std::vector<double>& t) { std::fill(t.begin(), t.end(), 0.0); });
        std::vector<LabeledSequence> batch{{TokenIdSequence{2, 3, 4, 0, 0, 0, 0}, 0},
                                           {TokenIdSequence{5, 6, 7, 8, 9, 2, 3}, k - 1}};
        ParamSet grads = zeros_like(model.params);
        CHECK(loss_and_gradients(model, batch, grads) == Catch::Approx(std::log(k)).margin(1e-12));
    }
}

TEST_CASE("analytic gradients match central finite differences") {
    const auto report = run_gradient_check(6, 91);
    CHECK(report.pass);
    CHECK(report.max_rel_err < 1e-4);
    CHECK(report.params_checked > 500);
}

TEST_CASE("dead conv units have zero analytic and numeric gradients") {
    auto model = tiny_model(23);
    // ReLU inputs solidly negative in both blocks (not merely at the kink)
    for (auto& f : model.params.conv1) std::fill(f.b.begin(), f.b.end(), -100.0);
    for (auto& f : model.params.conv2) std::fill(f.b.begin(), f.b.end(), -100.0);
    std::vector<LabeledSequence> batch{{TokenIdSequence{2, 3, 4, 5, 6, 7, 8}, 1}};
    ParamSet grads = zeros_like(model.params);
    loss_and_gradients(model, batch, grads);
    for (const auto& f : grads.conv1) {
        for (double g : f.w) CHECK(g == 0.0);
        for (double g : f.b) CHECK(g == 0.0);
    }
    for (double g : grads.embedding) CHECK(g == 0.0);
    const auto check = check_gradients_once(model, batch);
    CHECK(check.pass);
}

TEST_CASE("adam single and two step scalar traces match the closed form") {
    auto model = tiny_model(29);
    for_each_tensor(model.params, [](std::vector<double>& t) { std::fill(t.begin(), t.end(), 0.0); });
    model.config.learning_rate = 1e-3;
    model.config.adam_beta1 = 0.9;
    model.config.adam_beta2 = 0.999;
    model.config.adam_epsilon = 1e-8;

    ParamSet grads = zeros_like(model.params);
    grads.dense_b[0] = 0.5; // scalar trace on one parameter
    AdamState state = make_adam_state(model);

    // closed form, derived independently: bias correction cancels at t=1
    const double g = 0.5, lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double m1 = (1 - b1) * g, v1 = (1 - b2) * g * g;
    const double delta1 = -lr * (m1 / (1 - b1)) / (std::sqrt(v1 / (1 - b2)) + eps);
    CHECK(delta1 == Catch::Approx(-9.99999998e-4).margin(1e-12));

    adam_step(model, grads, state, 1);
    CHECK(model.params.dense_b[0] == Catch::Approx(delta1).margin(1e-12));
    for (std::size_t i = 1; i < model.params.dense_b.size(); ++i)
        CHECK(model.params.dense_b[i] == 0.0); // zero grad + zero state is a fixed point
    CHECK(model.params.dense_w[0] == 0.0);

    const double m2 = b1 * m1 + (1 - b1) * g, v2 = b2 * v1 + (1 - b2) * g * g;
    const double delta2 =
        -lr * (m2 / (1 - b1 * b1)) / (std::sqrt(v2 / (1 - b2 * b2)) + eps);
    adam_step(model, grads, state, 2);
    CHECK(model.params.dense_b[0] == Catch::Approx(delta1 + delta2).margin(1e-12));
    CHECK(std::fabs(delta2 - delta1) < 1e-12); // constant gradient: step size repeats

    ParamSet zero_grads = zeros_like(model.params);
    AdamState fresh = make_adam_state(model);
    const ParamSet before = model.params;
    adam_step(model, zero_grads, fresh, 1);
    CHECK(model.params.dense_b == before.dense_b);
    CHECK(model.params.embedding == before.embedding);
}

TEST_CASE("early stopping rule follows the patience traces") {
    CHECK_FALSE(early_stop_decision({0.5}, 2).stop);
    CHECK_FALSE(early_stop_decision({0.5, 0.7, 0.6}, 2).stop);
    const auto d = early_stop_decision({0.5, 0.7, 0.6, 0.6}, 2);
    CHECK(d.stop);
    CHECK(d.best_index == 1);
    // strictly increasing: keep going
    CHECK_FALSE(early_stop_decision({0.1, 0.2, 0.3, 0.4, 0.5}, 2).stop);
    // patience 0 stops after the first non-improving epoch, not the first epoch
    CHECK_FALSE(early_stop_decision({0.6}, 0).stop);
    CHECK(early_stop_decision({0.6, 0.6}, 0).stop);
    // earliest maximum wins ties
    CHECK(early_stop_decision({0.5, 0.7, 0.7, 0.7}, 2).best_index == 1);
}

namespace {

std::vector<LabeledSequence> separable_set() {
    // class 0 documents contain ids {2,3}, class 1 documents ids {4,5}
    std::vector<LabeledSequence> out;
    Rng rng(37);
    for (int i = 0; i < 20; ++i) {
        const int cls = i % 2;
        TokenIdSequence ids(7, 0);
        for (int p = 0; p < 5; ++p)
            ids[static_cast<std::size_t>(p)] =
                (cls == 0 ? 2 : 4) + static_cast<int>(rng.below(2));
        ids[5] = 6 + static_cast<int>(rng.below(4)); // shared noise ids 6..9
        out.push_back(LabeledSequence{ids, cls});
    }
    return out;
}

} // namespace

TEST_CASE("training fits a linearly separable toy set") {
    TextCnnConfig cfg = tiny_config();
    cfg.max_epochs = 50;
    cfg.patience_epochs = 50;
    cfg.batch_size = 4;
    cfg.seed = 41;
    auto model = init_model(cfg, random_matrix(12, cfg.embed_dim, 40), cfg.seed);
    const auto data = separable_set();
    const TrainRecord record = train_early_stopped(model, data, data, cfg);
    CHECK(*std::max_element(record.epoch_dev_accuracy.begin(), record.epoch_dev_accuracy.end()) ==
          1.0);
    CHECK(dev_accuracy(model, data) == 1.0); // returned snapshot is the best one
}

TEST_CASE("training respects max_epochs and returns the best snapshot") {
    TextCnnConfig cfg = tiny_config();
    cfg.max_epochs = 1;
    cfg.seed = 43;
    auto model = init_model(cfg, random_matrix(12, cfg.embed_dim, 42), cfg.seed);
    const auto data = separable_set();
    const TrainRecord record = train_early_stopped(model, data, data, cfg);
    CHECK(record.epoch_dev_accuracy.size() == 1);
    CHECK(record.best_epoch == 0);
    CHECK_FALSE(record.stopped_early);
}

TEST_CASE("training is deterministic and never perturbs the padding row") {
    TextCnnConfig cfg = tiny_config();
    cfg.max_epochs = 8;
    cfg.patience_epochs = 8;
    cfg.seed = 47;
    const auto emb = random_matrix(12, cfg.embed_dim, 46);
    const auto data = separable_set();

    auto m1 = init_model(cfg, emb, cfg.seed);
    auto m2 = init_model(cfg, emb, cfg.seed);
    const auto r1 = train_early_stopped(m1, data, data, cfg);
    const auto r2 = train_early_stopped(m2, data, data, cfg);
    CHECK(r1.epoch_dev_accuracy == r2.epoch_dev_accuracy);
    CHECK(r1.best_epoch == r2.best_epoch);
    CHECK(m1.params.embedding == m2.params.embedding);
    CHECK(m1.params.dense_w == m2.params.dense_w);

    for (int d = 0; d < cfg.embed_dim; ++d)
        CHECK(m1.params.embedding[static_cast<std::size_t>(d)] == 0.0);
    // non-padding rows of touched ids did move
    CHECK(m1.params.embedding != emb.values);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    testutil::TempDir tmp("ckpt");
    TextCnnConfig cfg = tiny_config();
    cfg.max_epochs = 2;
    cfg.seed = 53;
    EmbeddingMatrix emb = random_matrix(12, cfg.embed_dim, 52);
    emb.kind = EmbeddingKind::pretrained;
    auto model = init_model(cfg, emb, cfg.seed);
    const auto data = separable_set();
    train_early_stopped(model, data, data, cfg);

    save_checkpoint(model, tmp.file("m.ckpt"));
    const auto loaded = load_checkpoint(tmp.file("m.ckpt"));
    CHECK(loaded.init_kind == EmbeddingKind::pretrained);
    CHECK(loaded.vocab_size == model.vocab_size);
    CHECK(loaded.config.kernel_sizes == cfg.kernel_sizes);
    CHECK(loaded.params.embedding == model.params.embedding);
    CHECK(loaded.params.dense_w == model.params.dense_w);
    CHECK(loaded.params.conv2[1].w == model.params.conv2[1].w);

    save_checkpoint(loaded, tmp.file("m2.ckpt"));
    CHECK(read_file(tmp.file("m.ckpt")) == read_file(tmp.file("m2.ckpt")));

    write_file(tmp.file("junk.ckpt"), "not a checkpoint");
    CHECK_THROWS_AS(load_checkpoint(tmp.file("junk.ckpt")), DataError);
}
