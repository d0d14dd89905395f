#pragma once

// Answer prediction: pool the fused question, project it to entity- and
// time-specific complex vectors, score every entity and timestamp against
// the KG tables, and train with softmax cross-entropy over the joint list.

#include "tma/errors.hpp"
#include "tma/kg_store.hpp"
#include "tma/tensor.hpp"
#include "tma/tkg_embedding.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace tma {

enum class QuestionCategory { SimpleEntity, SimpleTime, BeforeAfter, FirstLast, TimeJoin };
enum class AnswerType { Entity, Time };

inline constexpr std::array<QuestionCategory, 5> kAllCategories{
    QuestionCategory::SimpleEntity, QuestionCategory::SimpleTime, QuestionCategory::BeforeAfter,
    QuestionCategory::FirstLast, QuestionCategory::TimeJoin};

inline std::string_view category_name(QuestionCategory c) {
    switch (c) {
        case QuestionCategory::SimpleEntity: return "simple_entity";
        case QuestionCategory::SimpleTime: return "simple_time";
        case QuestionCategory::BeforeAfter: return "before_after";
        case QuestionCategory::FirstLast: return "first_last";
        case QuestionCategory::TimeJoin: return "time_join";
    }
    return "?";
}

inline std::optional<QuestionCategory> parse_category(std::string_view s) {
    for (auto c : kAllCategories)
        if (category_name(c) == s) return c;
    return std::nullopt;
}

/// before_after, first_last and time_join count as complex questions.
inline bool is_complex(QuestionCategory c) {
    return c == QuestionCategory::BeforeAfter || c == QuestionCategory::FirstLast || c == QuestionCategory::TimeJoin;
}

inline std::string_view answer_type_name(AnswerType t) { return t == AnswerType::Entity ? "entity" : "time"; }

/// An entity or a timestamp, by KG id.
struct AnswerRef {
    AnswerType type = AnswerType::Entity;
    std::int32_t id = 0;

    auto operator<=>(const AnswerRef&) const = default;
};

struct QuestionAnnotations {
    std::vector<EntityId> entities;  // every annotated entity, in question order
    std::optional<EntityId> subject;
    std::optional<EntityId> object;
    std::optional<TimeId> time;
    std::vector<AnswerRef> gold;
    QuestionCategory category = QuestionCategory::SimpleEntity;
    AnswerType answer_type = AnswerType::Entity;

    /// Fills subject/object from `entities`: subject is the first, object the
    /// first one that differs from the subject.
    void assign_roles() {
        subject.reset();
        object.reset();
        if (entities.empty()) return;
        subject = entities.front();
        for (auto e : entities) {
            if (e != *subject) {
                object = e;
                break;
            }
        }
    }
};

/// Entity scores followed by timestamp scores. Position j < |E| is entity j;
/// position |E| + tau is timestamp tau.
struct ScoreVector {
    Vector entity;
    Vector time;

    Eigen::Index size() const noexcept { return entity.size() + time.size(); }

    Vector concatenated() const {
        Vector v(size());
        v << entity, time;
        return v;
    }

    Eigen::Index position(const AnswerRef& a) const {
        const Eigen::Index pos = a.type == AnswerType::Entity ? a.id : entity.size() + a.id;
        const Eigen::Index limit = a.type == AnswerType::Entity ? entity.size() : time.size();
        if (a.id < 0 || a.id >= limit) throw InputError("answer id out of range");
        return pos;
    }

    AnswerRef ref(Eigen::Index position) const {
        if (position < entity.size()) return {AnswerType::Entity, static_cast<std::int32_t>(position)};
        return {AnswerType::Time, static_cast<std::int32_t>(position - entity.size())};
    }
};

/// Arithmetic mean of the token rows.
inline Vector pool_question(const Matrix& tokens) {
    if (tokens.rows() < 1) throw InputError("pool_question: no tokens");
    return tokens.colwise().mean().transpose();
}

/// Linear map d -> 2 d_kg; the first half of the output is the real part,
/// the second half the imaginary part.
struct ProjectionParams {
    Matrix weight;  // 2 d_kg x d
    Vector bias;    // 2 d_kg

    static ProjectionParams init(Eigen::Index d, Eigen::Index kg_dim, Rng& rng) {
        return {scaled_uniform(2 * kg_dim, d, rng), Vector::Zero(2 * kg_dim)};
    }
    ProjectionParams zeros_like() const {
        return {Matrix::Zero(weight.rows(), weight.cols()), Vector::Zero(bias.size())};
    }
    Eigen::Index kg_dim() const noexcept { return weight.rows() / 2; }

    TensorList tensors(const std::string& prefix) {
        return {tensor_ref(prefix + ".W", weight), tensor_ref(prefix + ".b", bias)};
    }
};

inline CVector to_complex(const Vector& packed) {
    const Eigen::Index k = packed.size() / 2;
    CVector out(k);
    for (Eigen::Index i = 0; i < k; ++i) out[i] = Complex(packed[i], packed[k + i]);
    return out;
}

inline Vector from_complex(const CVector& c) {
    Vector out(2 * c.size());
    out << c.real(), c.imag();
    return out;
}

inline CVector project_one(const ProjectionParams& p, const Vector& q) {
    if (p.weight.cols() != q.size()) throw ShapeError("project: input width mismatch");
    return to_complex(p.weight * q + p.bias);
}

/// (q_ent, q_time)
inline std::pair<CVector, CVector> project(const Vector& q, const ProjectionParams& entity_head,
                                           const ProjectionParams& time_head) {
    return {project_one(entity_head, q), project_one(time_head, q)};
}

/// Table rows of the question's subject, object and timestamp; absent
/// annotations map to the dummy row 0.
struct AnchorRows {
    Eigen::Index subject = TkgTables::kDummyRow;
    Eigen::Index object = TkgTables::kDummyRow;
    Eigen::Index time = TkgTables::kDummyRow;

    static AnchorRows from(const QuestionAnnotations& ann) {
        AnchorRows r;
        if (ann.subject) r.subject = TkgTables::entity_row(*ann.subject);
        if (ann.object) r.object = TkgTables::entity_row(*ann.object);
        if (ann.time) r.time = TkgTables::time_row(*ann.time);
        return r;
    }
};

/// entity[j] = Re(<e_s, q_ent * e_t, conj(e_j)>) over real entities;
/// time[tau] = Re(<e_s, q_time * e_tau, conj(e_o)>) over real timestamps.
inline ScoreVector score_answers(const CVector& q_ent, const CVector& q_time, const AnchorRows& rows,
                                 const TkgTables& tables) {
    const CVector e_s = tables.entities.row(rows.subject);
    const CVector e_o = tables.entities.row(rows.object);
    const CVector e_t = tables.timestamps.row(rows.time);
    if (q_ent.size() != e_s.size() || q_time.size() != e_s.size()) throw ShapeError("score_answers: width mismatch");
    ScoreVector out;
    out.entity = conj_sweep(e_s.cwiseProduct(q_ent).cwiseProduct(e_t), tables.entities, 1);
    out.time = plain_sweep(e_s.cwiseProduct(q_time).cwiseProduct(e_o.conjugate()), tables.timestamps, 1);
    return out;
}

inline ScoreVector score_answers(const CVector& q_ent, const CVector& q_time, const QuestionAnnotations& ann,
                                 const TkgTables& tables) {
    return score_answers(q_ent, q_time, AnchorRows::from(ann), tables);
}

/// Gradients of score_answers given d(scores).
struct ScoreGradients {
    CVector q_ent;
    CVector q_time;
};

inline ScoreGradients score_answers_backward(const CVector& q_ent, const CVector& q_time, const AnchorRows& rows,
                                             const TkgTables& tables, const ScoreVector& d_scores,
                                             TkgTables* table_grad) {
    const CVector e_s = tables.entities.row(rows.subject);
    const CVector e_o = tables.entities.row(rows.object);
    const CVector e_t = tables.timestamps.row(rows.time);
    const Eigen::Index n_ent = tables.entity_count();
    const Eigen::Index n_time = tables.time_count();

    // entity side: x = e_s q_ent e_t, score_j = Re(sum x conj(E_j))
    CVector d_x(e_s.size());
    d_x.real() = tables.entities.real.bottomRows(n_ent).transpose() * d_scores.entity;
    d_x.imag() = tables.entities.imag.bottomRows(n_ent).transpose() * d_scores.entity;
    // time side: y = e_s q_time conj(e_o), score_tau = Re(sum T_tau y)
    CVector d_y(e_s.size());
    d_y.real() = tables.timestamps.real.bottomRows(n_time).transpose() * d_scores.time;
    d_y.imag() = -(tables.timestamps.imag.bottomRows(n_time).transpose() * d_scores.time);

    ScoreGradients g;
    g.q_ent = d_x.cwiseProduct(e_s.cwiseProduct(e_t).conjugate());
    g.q_time = d_y.cwiseProduct(e_s.conjugate()).cwiseProduct(e_o);

    if (table_grad) {
        const CVector x = e_s.cwiseProduct(q_ent).cwiseProduct(e_t);
        const CVector y = e_s.cwiseProduct(q_time).cwiseProduct(e_o.conjugate());
        auto& gE = table_grad->entities;
        auto& gT = table_grad->timestamps;
        gE.real.bottomRows(n_ent).noalias() += d_scores.entity * x.real().transpose();
        gE.imag.bottomRows(n_ent).noalias() += d_scores.entity * x.imag().transpose();
        gT.real.bottomRows(n_time).noalias() += d_scores.time * y.real().transpose();
        gT.imag.bottomRows(n_time).noalias() -= d_scores.time * y.imag().transpose();
        gE.add_to_row(rows.subject, d_x.cwiseProduct(q_ent.cwiseProduct(e_t).conjugate()) +
                                        d_y.cwiseProduct(q_time.cwiseProduct(e_o.conjugate()).conjugate()));
        gT.add_to_row(rows.time, d_x.cwiseProduct(e_s.cwiseProduct(q_ent).conjugate()));
        gE.add_to_row(rows.object, d_y.conjugate().cwiseProduct(e_s).cwiseProduct(q_time));
    }
    return g;
}

/// Softmax over all |E| + |T| scores; loss is the mean negative
/// log-probability of the gold answers.
inline double answer_loss(const ScoreVector& scores, const std::vector<AnswerRef>& gold,
                          ScoreVector* d_scores = nullptr) {
    if (gold.empty()) throw InputError("answer_loss: no gold answers");
    std::vector<Eigen::Index> positions;
    for (const auto& g : gold) positions.push_back(scores.position(g));
    const Vector all = scores.concatenated();
    const double mx = all.maxCoeff();
    const Vector shifted = all.array() - mx;
    const double log_z = std::log(shifted.array().exp().sum());
    double loss = 0.0;
    for (auto p : positions) loss -= shifted[p] - log_z;
    loss /= static_cast<double>(positions.size());
    if (d_scores) {
        Vector d = (shifted.array() - log_z).exp();
        for (auto p : positions) d[p] -= 1.0 / static_cast<double>(positions.size());
        d_scores->entity = d.head(scores.entity.size());
        d_scores->time = d.tail(scores.time.size());
    }
    return loss;
}

inline Vector softmax(const Vector& logits) {
    const Vector e = (logits.array() - logits.maxCoeff()).exp();
    return e / e.sum();
}

struct RankedAnswer {
    AnswerRef ref;
    double score = 0.0;
};

/// Positions sorted by descending score; ties by ascending position.
inline std::vector<Eigen::Index> ranking(const Vector& scores) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(scores.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return scores[a] > scores[b]; });
    return order;
}

/// Top-k answers; entities precede timestamps when scores tie.
inline std::vector<RankedAnswer> predict(const ScoreVector& scores, std::size_t k) {
    const Vector all = scores.concatenated();
    const auto order = ranking(all);
    std::vector<RankedAnswer> out;
    for (std::size_t i = 0; i < std::min(k, order.size()); ++i) out.push_back({scores.ref(order[i]), all[order[i]]});
    return out;
}

/// 1-based rank of the best-placed gold answer under the predict() order.
inline std::size_t best_gold_rank(const ScoreVector& scores, const std::vector<AnswerRef>& gold) {
    if (gold.empty()) throw InputError("best_gold_rank: no gold answers");
    const Vector all = scores.concatenated();
    std::size_t best = static_cast<std::size_t>(all.size()) + 1;
    for (const auto& g : gold) {
        const Eigen::Index p = scores.position(g);
        std::size_t rank = 1;
        for (Eigen::Index j = 0; j < all.size(); ++j) {
            if (all[j] > all[p] || (all[j] == all[p] && j < p)) ++rank;
        }
        best = std::min(best, rank);
    }
    return best;
}

}  // namespace tma
