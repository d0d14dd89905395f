#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace tma;

namespace {

constexpr Eigen::Index kD = 8;
constexpr Eigen::Index kDk = 8;

PreparedQuestion random_question(Rng& rng, Eigen::Index n, Eigen::Index m, std::vector<AnswerRef> gold,
                                 AnchorRows anchors = {2, 4, 1}) {
    PreparedQuestion q;
    q.tokens = oracle::random_matrix(n, kD, rng);
    q.spos = oracle::random_matrix(m, kD, rng);
    q.spo_mask.assign(static_cast<std::size_t>(m), true);
    q.anchors = anchors;
    q.gold = std::move(gold);
    return q;
}

/// Model with every parameter drawn nonzero, so no gradient path is trivially dead.
TmaModel random_model(const ModelConfig& config, Rng& rng) {
    TmaModel model(config, rng.next());
    auto& p = model.params();
    for (auto* dir : {&p.to_spo, &p.to_question})
        for (auto k : kAllAttentions) dir->params(k).score = oracle::random_vector(kD, rng);
    p.fusion.summary_bias = oracle::random_vector(kD, rng, 0.5);
    p.fusion.gate = oracle::random_vector(kD, rng);
    p.entity_head.bias = oracle::random_vector(2 * kDk, rng, 0.5);
    p.time_head.bias = oracle::random_vector(2 * kDk, rng, 0.5);
    return model;
}

ModelConfig small_config() {
    ModelConfig c;
    c.text_dim = kD;
    c.kg_dim = kDk;
    return c;
}

double full_gradient_error(const ModelConfig& config, std::uint64_t seed, std::string* worst) {
    Rng rng(seed);
    TmaModel model = random_model(config, rng);
    TkgTables tables = init_tables(6, 2, 4, kDk, 0.6, rng.next());
    const auto q = random_question(rng, 5, 3, {{AnswerType::Entity, 3}, {AnswerType::Time, 1}});

    TmaParams grad = model.params().zeros_like();
    TkgTables table_grad = tables.zeros_like();
    model.loss_and_backward(q, tables, grad, &table_grad);

    auto loss = [&] { return answer_loss(model.scores(q, tables), q.gold); };
    TensorList params = model.tensors();
    TensorList grads = grad.tensors(config);
    append(params, tables.tensors(), "kg.");
    append(grads, table_grad.tensors(), "kg.");
    return oracle::max_gradient_error(params, grads, loss, 1e-5, worst);
}

}  // namespace

TEST(ModelGradients, FullModelAllParameterTensors) {
    std::string worst;
    EXPECT_LE(full_gradient_error(small_config(), 1, &worst), 1e-4) << worst;
}

TEST(ModelGradients, SharedDirections) {
    auto c = small_config();
    c.share_directions = true;
    std::string worst;
    EXPECT_LE(full_gradient_error(c, 2, &worst), 1e-4) << worst;
}

TEST(ModelGradients, EveryAblation) {
    for (auto flag : kStandardAblations) {
        std::string worst;
        EXPECT_LE(full_gradient_error(apply_ablation(small_config(), flag), 3, &worst), 1e-4)
            << ablation_name(flag) << " " << worst;
    }
}

TEST(ModelGradients, DummyAnchorsAndMaskedSpo) {
    Rng rng(4);
    const auto config = small_config();
    TmaModel model = random_model(config, rng);
    TkgTables tables = init_tables(5, 2, 3, kDk, 0.6, 7);
    auto q = random_question(rng, 4, 3, {{AnswerType::Entity, 0}}, AnchorRows{3, 0, 0});
    q.spo_mask = {true, false, true};
    TmaParams grad = model.params().zeros_like();
    TkgTables table_grad = tables.zeros_like();
    model.loss_and_backward(q, tables, grad, &table_grad);
    auto loss = [&] { return answer_loss(model.scores(q, tables), q.gold); };
    TensorList params = model.tensors();
    TensorList grads = grad.tensors(config);
    append(params, tables.tensors(), "kg.");
    append(grads, table_grad.tensors(), "kg.");
    std::string worst;
    EXPECT_LE(oracle::max_gradient_error(params, grads, loss, 1e-5, &worst), 1e-4) << worst;
}

TEST(Model, ForwardComposesTheStages) {
    Rng rng(5);
    const auto config = small_config();
    TmaModel model = random_model(config, rng);
    const auto tables = init_tables(6, 2, 4, kDk, 0.6, 3);
    const auto q = random_question(rng, 5, 3, {{AnswerType::Entity, 0}});
    const auto fp = model.forward(q, tables);
    ASSERT_TRUE(fp.fused);
    const auto& p = model.params();
    const auto matched = multiway_match(q.tokens, q.spos, q.spo_mask, p.to_spo, p.to_question);
    const Matrix fused = adaptive_fuse(matched.question, matched.spo, p.fusion, q.spo_mask);
    const auto [qe, qt] = project(pool_question(fused), p.entity_head, p.time_head);
    const auto scores = oracle::answer_scores(qe, qt, q.anchors, tables);
    const Vector all = fp.scores.concatenated();
    ASSERT_EQ(static_cast<std::size_t>(all.size()), scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) EXPECT_NEAR(all[static_cast<Eigen::Index>(i)], scores[i], 1e-10);
}

TEST(Model, NoSpoSkipsFusion) {
    Rng rng(6);
    TmaModel model = random_model(small_config(), rng);
    const auto tables = init_tables(6, 2, 4, kDk, 0.6, 3);
    auto q = random_question(rng, 5, 0, {{AnswerType::Entity, 0}});
    const auto fp = model.forward(q, tables);
    EXPECT_FALSE(fp.fused);
    EXPECT_EQ(fp.pooled, pool_question(q.tokens));
}

TEST(Model, NoSelectorIgnoresSpos) {
    Rng rng(7);
    auto config = apply_ablation(small_config(), Ablation::NoSelector);
    TmaModel model = random_model(config, rng);
    const auto tables = init_tables(6, 2, 4, kDk, 0.6, 3);
    const auto q = random_question(rng, 5, 3, {{AnswerType::Entity, 0}});
    EXPECT_FALSE(model.forward(q, tables).fused);
    EXPECT_EQ(model.tensors().size(), 4u);
}

TEST(Model, AblationShapes) {
    const auto base = small_config();
    EXPECT_THROW(parse_ablation("no_such_thing"), ConfigError);
    EXPECT_EQ(parse_ablation("no_dot"), Ablation::NoDot);
    const auto no_dot = apply_ablation(base, Ablation::NoDot);
    TmaModel m(no_dot, 1);
    EXPECT_EQ(m.params().to_spo.projection.cols(), 4 * kD);
    const auto fixed = apply_ablation(base, Ablation::NoAdaptiveFusion);
    for (const auto& t : TmaModel(fixed, 1).tensors()) EXPECT_NE(t.name, "fusion.W_g");
    auto c = base;
    c.branches = {AttentionKind::Dot};
    EXPECT_THROW(apply_ablation(c, Ablation::NoDot), ConfigError);
}

TEST(Model, FixedGateIsHalf) {
    Rng rng(8);
    TmaModel model = random_model(apply_ablation(small_config(), Ablation::NoAdaptiveFusion), rng);
    const auto tables = init_tables(6, 2, 4, kDk, 0.6, 3);
    const auto q = random_question(rng, 5, 3, {{AnswerType::Entity, 0}});
    const auto fp = model.forward(q, tables);
    for (Eigen::Index i = 0; i < fp.fusion.gates.size(); ++i) EXPECT_EQ(fp.fusion.gates[i], 0.5);
}
