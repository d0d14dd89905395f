#pragma once

// Question preparation, the QA training loop, model evaluation and ablations.

#include "tma/harness/metrics.hpp"
#include "tma/harness/questions.hpp"
#include "tma/model.hpp"
#include "tma/optim.hpp"
#include "tma/spo_selector.hpp"
#include "tma/text_encoder.hpp"

#include <spdlog/spdlog.h>

#include <optional>
#include <string>
#include <vector>

namespace tma {

/// Encodes each question once and resolves its SPO selection through `index`.
inline std::vector<PreparedQuestion> prepare_questions(const std::vector<QuestionInstance>& questions,
                                                       const TextEncoder& encoder, const ModelConfig& config,
                                                       SpoIndex& index) {
    if (encoder.dim() != config.text_dim) {
        throw ShapeError("encoder width " + std::to_string(encoder.dim()) + " != model text_dim " +
                         std::to_string(config.text_dim));
    }
    std::vector<PreparedQuestion> out;
    out.reserve(questions.size());
    for (const auto& q : questions) {
        PreparedQuestion p;
        p.id = q.id;
        const TokenMatrix encoded = encoder.encode(q.text);
        p.tokens = encoded.content();
        const auto& ann = q.annotations;
        const std::set<EntityId> entities(ann.entities.begin(), ann.entities.end());
        const SpoSelection sel = index.select(encoded, entities, config.top_k, config.pool_cap);
        p.spos.resize(static_cast<Eigen::Index>(sel.m()), config.text_dim);
        for (std::size_t i = 0; i < sel.m(); ++i) {
            p.spos.row(static_cast<Eigen::Index>(i)) = sel.selected[i].summary.transpose();
            p.spo_facts.push_back(sel.selected[i].fact_index);
            p.spo_scores.push_back(sel.selected[i].score);
        }
        p.spo_mask.assign(sel.m(), true);
        p.anchors = AnchorRows::from(ann);
        p.gold = ann.gold;
        p.category = ann.category;
        p.answer_type = ann.answer_type;
        out.push_back(std::move(p));
    }
    return out;
}

inline MetricsReport evaluate_model(const TmaModel& model, const std::vector<PreparedQuestion>& questions,
                                    const TkgTables& tables, std::vector<std::size_t>* ranks = nullptr) {
    return evaluate([&](const PreparedQuestion& q) { return model.scores(q, tables); }, questions, ranks);
}

struct QaTrainConfig {
    int epochs = 200;
    double learning_rate = 1e-3;
    std::size_t batch_size = 16;
    /// Epochs without a strict validation improvement before stopping; <= 0 disables.
    int patience = 50;
    std::uint64_t seed = 1;
    /// Also update the KG tables through the QA loss.
    bool finetune_kg = false;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double valid_hits1 = 0.0;

    bool operator==(const EpochRecord&) const = default;
};

struct QaTrainResult {
    std::vector<EpochRecord> curve;
    int best_epoch = 0;
    double best_valid_hits1 = 0.0;
    bool stopped_early = false;
};

/// Raised when the training loss turns non-finite. Carries the parameters
/// from the end of the last completed epoch.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, TmaParams last_good, TkgTables last_good_tables)
        : Error(what), last_good(std::move(last_good)), last_good_tables(std::move(last_good_tables)) {}

    TmaParams last_good;
    TkgTables last_good_tables;
};

/// Adam training on the mean cross-entropy of each mini-batch, early-stopped
/// on validation Hits@1 (training Hits@1 when no validation set is given).
/// Leaves the best-validation parameters in `model` and `tables`; ties go to
/// the later epoch.
inline QaTrainResult train_qa(TmaModel& model, TkgTables& tables, const std::vector<PreparedQuestion>& train,
                              const std::vector<PreparedQuestion>& valid, const QaTrainConfig& config) {
    if (config.batch_size == 0) throw ConfigError("train_qa: batch_size must be positive");
    QaTrainResult result;
    if (config.epochs <= 0 || train.empty()) return result;

    const auto& selection_set = valid.empty() ? train : valid;
    auto valid_hits1 = [&] { return evaluate_model(model, selection_set, tables).overall.hits1(); };

    TmaParams grad = model.params().zeros_like();
    const TensorList grad_views = grad.tensors(model.config());
    Adam adam(model.tensors(), AdamConfig{config.learning_rate});
    TkgTables table_grad = tables.zeros_like();
    const TensorList table_grad_views = table_grad.tensors();
    std::optional<Adam> table_adam;
    if (config.finetune_kg) table_adam.emplace(tables.tensors(), AdamConfig{config.learning_rate});

    TmaParams best = model.params();
    TkgTables best_tables = tables;
    result.best_valid_hits1 = valid_hits1();
    int since_improvement = 0;

    Rng rng(config.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const TmaParams epoch_start = model.params();
        const TkgTables epoch_start_tables = config.finetune_kg ? tables : TkgTables{};
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            const double weight = 1.0 / static_cast<double>(end - begin);
            fill_zero(grad_views);
            if (config.finetune_kg) table_grad.set_zero();
            double batch_loss = 0.0;
            for (std::size_t i = begin; i < end; ++i) {
                batch_loss += model.loss_and_backward(train[order[i]], tables, grad,
                                                      config.finetune_kg ? &table_grad : nullptr, weight);
            }
            if (!std::isfinite(batch_loss) || !all_finite(grad_views)) {
                throw DivergenceError("train_qa: non-finite loss in epoch " + std::to_string(epoch), epoch_start,
                                      config.finetune_kg ? epoch_start_tables : tables);
            }
            adam.step(grad_views);
            if (table_adam) table_adam->step(table_grad_views);
            loss_sum += batch_loss;
        }

        const double hits1 = valid_hits1();
        result.curve.push_back({epoch, loss_sum / static_cast<double>(train.size()), hits1});
        if (hits1 > result.best_valid_hits1) {
            since_improvement = 0;
        } else {
            ++since_improvement;
        }
        if (hits1 >= result.best_valid_hits1) {
            result.best_valid_hits1 = hits1;
            result.best_epoch = epoch;
            best = model.params();
            if (config.finetune_kg) best_tables = tables;
        }
        spdlog::debug("epoch {} loss {:.5f} valid hits@1 {:.4f}", epoch, result.curve.back().train_loss, hits1);
        if (config.patience > 0 && since_improvement >= config.patience) {
            result.stopped_early = true;
            break;
        }
    }
    model.params() = best;
    if (config.finetune_kg) tables = best_tables;
    return result;
}

enum class Ablation { None, NoSelector, NoConcat, NoDot, NoMinus, NoAdaptiveFusion };

inline constexpr std::array<Ablation, 5> kStandardAblations{Ablation::NoSelector, Ablation::NoConcat, Ablation::NoDot,
                                                         Ablation::NoMinus, Ablation::NoAdaptiveFusion};

inline std::string_view ablation_name(Ablation a) {
    switch (a) {
        case Ablation::None: return "none";
        case Ablation::NoSelector: return "no_selector";
        case Ablation::NoConcat: return "no_concat";
        case Ablation::NoDot: return "no_dot";
        case Ablation::NoMinus: return "no_minus";
        case Ablation::NoAdaptiveFusion: return "no_adaptive_fusion";
    }
    return "?";
}

inline Ablation parse_ablation(std::string_view name) {
    for (auto a : {Ablation::None, Ablation::NoSelector, Ablation::NoConcat, Ablation::NoDot, Ablation::NoMinus,
                   Ablation::NoAdaptiveFusion})
        if (ablation_name(a) == name) return a;
    throw ConfigError("unknown ablation flag '" + std::string(name) + "'");
}

inline ModelConfig apply_ablation(ModelConfig config, Ablation a) {
    auto drop = [&](AttentionKind k) {
        std::erase(config.branches, k);
        if (config.branches.empty()) throw ConfigError("ablation removed every attention branch");
    };
    switch (a) {
        case Ablation::None: break;
        case Ablation::NoSelector: config.use_selector = false; break;
        case Ablation::NoConcat: drop(AttentionKind::Concat); break;
        case Ablation::NoDot: drop(AttentionKind::Dot); break;
        case Ablation::NoMinus: drop(AttentionKind::Minus); break;
        case Ablation::NoAdaptiveFusion: config.adaptive_fusion = false; break;
    }
    return config;
}

struct AblationRun {
    std::string label;
    MetricsReport report;
    QaTrainResult training;
};

/// Trains and evaluates one model per flag from the same seed and tables.
inline std::vector<AblationRun> ablate(const ModelConfig& base, const std::vector<Ablation>& flags,
                                       const TkgTables& tables, const std::vector<PreparedQuestion>& train,
                                       const std::vector<PreparedQuestion>& valid,
                                       const std::vector<PreparedQuestion>& test, const QaTrainConfig& config,
                                       std::uint64_t model_seed) {
    std::vector<AblationRun> out;
    for (auto flag : flags) {
        TmaModel model(apply_ablation(base, flag), model_seed);
        TkgTables variant_tables = tables;
        AblationRun run;
        run.label = std::string(ablation_name(flag));
        run.training = train_qa(model, variant_tables, train, valid, config);
        run.report = evaluate_model(model, test, variant_tables);
        out.push_back(std::move(run));
    }
    return out;
}

}  // namespace tma
