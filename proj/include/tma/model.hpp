#pragma once

// The full question-answering model: multiway matching, adaptive fusion,
// pooling, projection and scoring against KG tables, with the hand-written
// backward pass used for training and gradient checks.

#include "tma/answer_head.hpp"
#include "tma/fusion_core.hpp"
#include "tma/spo_selector.hpp"
#include "tma/text_encoder.hpp"
#include "tma/tkg_embedding.hpp"

#include <set>
#include <string>
#include <vector>

namespace tma {

struct ModelConfig {
    Eigen::Index text_dim = 64;
    Eigen::Index kg_dim = 64;
    std::vector<AttentionKind> branches{kAllAttentions.begin(), kAllAttentions.end()};
    /// false: no SPOs reach the model and fusion is skipped entirely.
    bool use_selector = true;
    /// false: the gate is pinned at 0.5.
    bool adaptive_fusion = true;
    /// true: both matching directions use the question-side parameters.
    bool share_directions = false;
    std::size_t top_k = kDefaultTopK;
    std::size_t pool_cap = kDefaultPoolCap;
};

struct TmaParams {
    MultiwayParams to_spo;       // question tokens attend over SPOs
    MultiwayParams to_question;  // SPOs attend over question tokens
    FusionParams fusion;
    ProjectionParams entity_head;
    ProjectionParams time_head;

    static TmaParams init(const ModelConfig& config, std::uint64_t seed) {
        Rng rng(seed);
        TmaParams p;
        p.to_spo = MultiwayParams::init(config.text_dim, config.branches, rng);
        p.to_question = MultiwayParams::init(config.text_dim, config.branches, rng);
        p.fusion = FusionParams::init(config.text_dim, rng);
        p.entity_head = ProjectionParams::init(config.text_dim, config.kg_dim, rng);
        p.time_head = ProjectionParams::init(config.text_dim, config.kg_dim, rng);
        return p;
    }

    TmaParams zeros_like() const {
        return {to_spo.zeros_like(), to_question.zeros_like(), fusion.zeros_like(), entity_head.zeros_like(),
                time_head.zeros_like()};
    }

    /// Trainable tensors for the given configuration.
    TensorList tensors(const ModelConfig& config) {
        TensorList out;
        if (config.use_selector) {
            append(out, to_spo.tensors("to_spo"), "");
            if (!config.share_directions) append(out, to_question.tensors("to_question"), "");
            auto f = fusion.tensors("fusion");
            if (!config.adaptive_fusion) f.pop_back();  // W_g unused with a pinned gate
            append(out, std::move(f), "");
        }
        append(out, entity_head.tensors("entity_head"), "");
        append(out, time_head.tensors("time_head"), "");
        return out;
    }
};

/// A question with its encoder output and SPO selection resolved, ready for
/// repeated forward passes.
struct PreparedQuestion {
    std::string id;
    Matrix tokens;  // content token rows, n x d
    Matrix spos;    // selected SPO summary rows, m x d (m may be 0)
    std::vector<bool> spo_mask;
    std::vector<std::size_t> spo_facts;
    std::vector<double> spo_scores;
    AnchorRows anchors;
    std::vector<AnswerRef> gold;
    QuestionCategory category = QuestionCategory::SimpleEntity;
    AnswerType answer_type = AnswerType::Entity;
};

struct ForwardPass {
    bool fused = false;  // false when no SPO reached the model
    MultiwayCache multiway;
    MultiwayResult matched;
    FusionCache fusion;
    Matrix fused_tokens;
    Vector pooled;
    CVector q_ent;
    CVector q_time;
    ScoreVector scores;
};

class TmaModel {
public:
    TmaModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)), params_(TmaParams::init(config_, seed)) {}
    TmaModel(ModelConfig config, TmaParams params) : config_(std::move(config)), params_(std::move(params)) {}

    const ModelConfig& config() const noexcept { return config_; }
    TmaParams& params() noexcept { return params_; }
    const TmaParams& params() const noexcept { return params_; }
    TensorList tensors() { return params_.tensors(config_); }

    ForwardPass forward(const PreparedQuestion& q, const TkgTables& tables) const {
        ForwardPass fp;
        fp.fused = config_.use_selector && q.spos.rows() > 0;
        if (fp.fused) {
            fp.matched = multiway_match(q.tokens, q.spos, q.spo_mask, params_.to_spo, spo_side(), &fp.multiway);
            fp.fused_tokens = adaptive_fuse(fp.matched.question, fp.matched.spo, params_.fusion, q.spo_mask,
                                            &fp.fusion, !config_.adaptive_fusion);
        } else {
            fp.fused_tokens = q.tokens;
        }
        fp.pooled = pool_question(fp.fused_tokens);
        std::tie(fp.q_ent, fp.q_time) = project(fp.pooled, params_.entity_head, params_.time_head);
        fp.scores = score_answers(fp.q_ent, fp.q_time, q.anchors, tables);
        return fp;
    }

    ScoreVector scores(const PreparedQuestion& q, const TkgTables& tables) const { return forward(q, tables).scores; }

    /// Loss of one question; gradients are accumulated (scaled by `weight`)
    /// into `grad` and, when given, `table_grad`.
    double loss_and_backward(const PreparedQuestion& q, const TkgTables& tables, TmaParams& grad,
                             TkgTables* table_grad = nullptr, double weight = 1.0) const {
        const ForwardPass fp = forward(q, tables);
        ScoreVector d_scores;
        const double loss = answer_loss(fp.scores, q.gold, &d_scores);
        d_scores.entity *= weight;
        d_scores.time *= weight;
        backward(q, tables, fp, d_scores, grad, table_grad);
        return loss;
    }

    void backward(const PreparedQuestion& q, const TkgTables& tables, const ForwardPass& fp,
                  const ScoreVector& d_scores, TmaParams& grad, TkgTables* table_grad) const {
        const auto sg = score_answers_backward(fp.q_ent, fp.q_time, q.anchors, tables, d_scores, table_grad);
        const Vector dz_ent = from_complex(sg.q_ent);
        const Vector dz_time = from_complex(sg.q_time);
        grad.entity_head.weight.noalias() += dz_ent * fp.pooled.transpose();
        grad.entity_head.bias += dz_ent;
        grad.time_head.weight.noalias() += dz_time * fp.pooled.transpose();
        grad.time_head.bias += dz_time;
        if (!fp.fused) return;  // token rows are encoder output and stay frozen

        const Vector d_pooled =
            params_.entity_head.weight.transpose() * dz_ent + params_.time_head.weight.transpose() * dz_time;
        const Eigen::Index n = fp.fused_tokens.rows();
        const Eigen::Index d = fp.fused_tokens.cols();
        const Matrix d_fused = Matrix::Ones(n, 1) * (d_pooled.transpose() / static_cast<double>(n));

        Matrix d_qfinal = Matrix::Zero(n, d);
        Matrix d_shat = Matrix::Zero(q.spos.rows(), d);
        adaptive_fuse_backward(fp.matched.question, params_.fusion, q.spo_mask, fp.fusion, d_fused,
                               !config_.adaptive_fusion, grad.fusion, d_qfinal, d_shat);

        Matrix d_tokens = Matrix::Zero(n, d);
        Matrix d_spos = Matrix::Zero(q.spos.rows(), d);
        match_direction_backward(params_.to_spo, q.tokens, q.spos, {}, fp.multiway.question_side, d_qfinal,
                                 grad.to_spo, d_tokens, d_spos);
        MultiwayParams& spo_grad = config_.share_directions ? grad.to_spo : grad.to_question;
        match_direction_backward(spo_side(), q.spos, q.tokens, q.spo_mask, fp.multiway.spo_side, d_shat, spo_grad,
                                 d_spos, d_tokens);
    }

private:
    const MultiwayParams& spo_side() const {
        return config_.share_directions ? params_.to_spo : params_.to_question;
    }

    ModelConfig config_;
    TmaParams params_;
};

}  // namespace tma
