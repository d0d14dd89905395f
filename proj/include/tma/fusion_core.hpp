#pragma once

// Multiway matching between question tokens and selected SPO summary vectors
// (concat / dot / minus attention), the symmetric SPO-side update, and the
// gated fusion of SPO knowledge into each question token. Every forward pass
// has a matching hand-written backward pass.

#include "tma/errors.hpp"
#include "tma/tensor.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tma {

enum class AttentionKind { Concat, Dot, Minus };

inline constexpr std::array<AttentionKind, 3> kAllAttentions{AttentionKind::Concat, AttentionKind::Dot,
                                                             AttentionKind::Minus};

inline std::string_view attention_name(AttentionKind kind) {
    switch (kind) {
        case AttentionKind::Concat: return "concat";
        case AttentionKind::Dot: return "dot";
        case AttentionKind::Minus: return "minus";
    }
    return "?";
}

inline std::optional<AttentionKind> parse_attention(std::string_view name) {
    for (auto k : kAllAttentions)
        if (attention_name(k) == name) return k;
    return std::nullopt;
}

/// W_l and v_l of one attention flavor. W is d x 2d for concat, d x d otherwise.
struct AttentionParams {
    Matrix weight;
    Vector score;
};

struct AttentionResult {
    Vector pooled;   // sum_i alpha_i key_i
    Vector weights;  // alpha, zero on masked keys
};

/// Intermediates kept for the backward pass.
struct AttentionCache {
    Matrix features;     // one row per key: [q; k], q * k or q - k
    Matrix activations;  // tanh(features W^T)
    Vector weights;
};

namespace detail {

inline Matrix attention_features(AttentionKind kind, const Matrix& keys, const Vector& query) {
    const Eigen::Index m = keys.rows();
    const Eigen::Index d = keys.cols();
    if (query.size() != d) throw ShapeError("attention: query and keys differ in width");
    switch (kind) {
        case AttentionKind::Concat: {
            Matrix f(m, 2 * d);
            f.leftCols(d).rowwise() = query.transpose();
            f.rightCols(d) = keys;
            return f;
        }
        case AttentionKind::Dot: return keys.array().rowwise() * query.transpose().array();
        case AttentionKind::Minus: return (-keys).rowwise() + query.transpose();
    }
    return {};
}

inline bool is_masked(const std::vector<bool>& mask, Eigen::Index i) {
    return !mask.empty() && !mask[static_cast<std::size_t>(i)];
}

/// Max-subtracted softmax over unmasked entries; masked entries get exactly 0.
inline Vector masked_softmax(const Vector& logits, const std::vector<bool>& mask) {
    if (!mask.empty() && static_cast<Eigen::Index>(mask.size()) < logits.size()) {
        throw ShapeError("attention: mask shorter than key list");
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < logits.size(); ++i)
        if (!is_masked(mask, i)) mx = std::max(mx, logits[i]);
    if (!std::isfinite(mx)) throw InputError("attention: every key is masked");
    Vector w = Vector::Zero(logits.size());
    double z = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        if (is_masked(mask, i)) continue;
        w[i] = std::exp(logits[i] - mx);
        z += w[i];
    }
    return w / z;
}

}  // namespace detail

/// Attention of one query over the key rows. Logits are
/// v . tanh(W f(query, key_j)) with f chosen by `kind`.
inline AttentionResult attend(AttentionKind kind, const AttentionParams& params, const Matrix& keys,
                              const Vector& query, const std::vector<bool>& mask = {},
                              AttentionCache* cache = nullptr) {
    if (keys.rows() == 0) throw InputError("attention: no keys");
    Matrix features = detail::attention_features(kind, keys, query);
    if (params.weight.cols() != features.cols() || params.score.size() != params.weight.rows()) {
        throw ShapeError(std::string("attention: parameter shape mismatch for ") +
                         std::string(attention_name(kind)));
    }
    Matrix act = (features * params.weight.transpose()).array().tanh();
    const Vector logits = act * params.score;
    AttentionResult out;
    out.weights = detail::masked_softmax(logits, mask);
    out.pooled = keys.transpose() * out.weights;
    if (cache) {
        cache->features = std::move(features);
        cache->activations = std::move(act);
        cache->weights = out.weights;
    }
    return out;
}

inline AttentionResult concat_attention(const Matrix& keys, const Vector& query, const AttentionParams& params,
                                        const std::vector<bool>& mask = {}) {
    return attend(AttentionKind::Concat, params, keys, query, mask);
}
inline AttentionResult dot_attention(const Matrix& keys, const Vector& query, const AttentionParams& params,
                                     const std::vector<bool>& mask = {}) {
    return attend(AttentionKind::Dot, params, keys, query, mask);
}
inline AttentionResult minus_attention(const Matrix& keys, const Vector& query, const AttentionParams& params,
                                       const std::vector<bool>& mask = {}) {
    return attend(AttentionKind::Minus, params, keys, query, mask);
}

/// Accumulates gradients of attend() given d(pooled).
inline void attend_backward(AttentionKind kind, const AttentionParams& params, const Matrix& keys,
                            const Vector& query, const AttentionCache& cache, const Vector& d_pooled,
                            AttentionParams& grad, Matrix& d_keys, Vector& d_query) {
    const Eigen::Index d = keys.cols();
    const Vector& alpha = cache.weights;
    d_keys.noalias() += alpha * d_pooled.transpose();
    const Vector d_alpha = keys * d_pooled;
    // softmax Jacobian; masked entries have alpha = 0 and drop out
    const Vector d_logits = alpha.cwiseProduct((d_alpha.array() - alpha.dot(d_alpha)).matrix());
    grad.score.noalias() += cache.activations.transpose() * d_logits;
    const Matrix d_pre =
        ((d_logits * params.score.transpose()).array() * (1.0 - cache.activations.array().square())).matrix();
    grad.weight.noalias() += d_pre.transpose() * cache.features;
    const Matrix d_features = d_pre * params.weight;
    switch (kind) {
        case AttentionKind::Concat:
            d_query += d_features.leftCols(d).colwise().sum().transpose();
            d_keys += d_features.rightCols(d);
            break;
        case AttentionKind::Dot:
            d_query += (d_features.array() * keys.array()).colwise().sum().matrix().transpose();
            d_keys.array() += d_features.array().rowwise() * query.transpose().array();
            break;
        case AttentionKind::Minus:
            d_query += d_features.colwise().sum().transpose();
            d_keys -= d_features;
            break;
    }
}

/// Parameters of one matching direction: the enabled attention flavors and
/// the projection W applied to the stacked [q; p_l] blocks.
struct MultiwayParams {
    std::vector<AttentionKind> branches{kAllAttentions.begin(), kAllAttentions.end()};
    AttentionParams concat;
    AttentionParams dot;
    AttentionParams minus;
    Matrix projection;  // d x (2d * branches)

    /// W_l and W from uniform(+-1/sqrt(fan_in)); v_l zero, so attention starts uniform.
    static MultiwayParams init(Eigen::Index d, std::vector<AttentionKind> branches, Rng& rng) {
        if (branches.empty()) throw ConfigError("multiway matching needs at least one attention branch");
        MultiwayParams p;
        p.branches = std::move(branches);
        p.concat = {scaled_uniform(d, 2 * d, rng), Vector::Zero(d)};
        p.dot = {scaled_uniform(d, d, rng), Vector::Zero(d)};
        p.minus = {scaled_uniform(d, d, rng), Vector::Zero(d)};
        p.projection = scaled_uniform(d, 2 * d * static_cast<Eigen::Index>(p.branches.size()), rng);
        return p;
    }

    Eigen::Index dim() const noexcept { return projection.rows(); }

    const AttentionParams& params(AttentionKind k) const {
        switch (k) {
            case AttentionKind::Concat: return concat;
            case AttentionKind::Dot: return dot;
            case AttentionKind::Minus: return minus;
        }
        return concat;
    }
    AttentionParams& params(AttentionKind k) { return const_cast<AttentionParams&>(std::as_const(*this).params(k)); }

    MultiwayParams zeros_like() const {
        MultiwayParams z;
        z.branches = branches;
        for (auto k : kAllAttentions) {
            z.params(k) = {Matrix::Zero(params(k).weight.rows(), params(k).weight.cols()),
                           Vector::Zero(params(k).score.size())};
        }
        z.projection = Matrix::Zero(projection.rows(), projection.cols());
        return z;
    }

    /// Tensors of enabled branches only.
    TensorList tensors(const std::string& prefix) {
        TensorList out;
        for (auto k : branches) {
            const std::string name = prefix + "." + std::string(attention_name(k));
            out.push_back(tensor_ref(name + ".W", params(k).weight));
            out.push_back(tensor_ref(name + ".v", params(k).score));
        }
        out.push_back(tensor_ref(prefix + ".projection", projection));
        return out;
    }
};

struct DirectionCache {
    std::vector<std::vector<AttentionCache>> attention;  // [query][branch]
    Matrix stacked;                                     // rows [q; p_cat; q; p_dot; q; p_min]
};

/// One matching direction: each unmasked query row attends over the keys
/// with every enabled flavor; output row = W [q; p_1; q; p_2; ...]. Masked
/// query rows produce zero rows.
inline Matrix match_direction(const MultiwayParams& params, const Matrix& queries, const Matrix& keys,
                              const std::vector<bool>& key_mask, const std::vector<bool>& query_mask,
                              DirectionCache* cache = nullptr) {
    const Eigen::Index d = queries.cols();
    if (keys.cols() != d || params.dim() != d) throw ShapeError("multiway: width mismatch");
    const auto nb = static_cast<Eigen::Index>(params.branches.size());
    if (params.projection.cols() != 2 * d * nb) throw ShapeError("multiway: projection width mismatch");

    Matrix stacked = Matrix::Zero(queries.rows(), 2 * d * nb);
    if (cache) cache->attention.assign(static_cast<std::size_t>(queries.rows()), {});
    for (Eigen::Index r = 0; r < queries.rows(); ++r) {
        if (detail::is_masked(query_mask, r)) continue;
        const Vector q = queries.row(r).transpose();
        if (cache) cache->attention[static_cast<std::size_t>(r)].resize(static_cast<std::size_t>(nb));
        for (Eigen::Index b = 0; b < nb; ++b) {
            const auto kind = params.branches[static_cast<std::size_t>(b)];
            AttentionCache* ac = cache ? &cache->attention[static_cast<std::size_t>(r)][static_cast<std::size_t>(b)]
                                       : nullptr;
            const auto res = attend(kind, params.params(kind), keys, q, key_mask, ac);
            stacked.block(r, 2 * d * b, 1, d) = q.transpose();
            stacked.block(r, 2 * d * b + d, 1, d) = res.pooled.transpose();
        }
    }
    Matrix out = stacked * params.projection.transpose();
    for (Eigen::Index r = 0; r < queries.rows(); ++r)
        if (detail::is_masked(query_mask, r)) out.row(r).setZero();
    if (cache) cache->stacked = std::move(stacked);
    return out;
}

inline void match_direction_backward(const MultiwayParams& params, const Matrix& queries, const Matrix& keys,
                                     const std::vector<bool>& query_mask, const DirectionCache& cache,
                                     Matrix d_out, MultiwayParams& grad, Matrix& d_queries, Matrix& d_keys) {
    const Eigen::Index d = queries.cols();
    const auto nb = static_cast<Eigen::Index>(params.branches.size());
    for (Eigen::Index r = 0; r < queries.rows(); ++r)
        if (detail::is_masked(query_mask, r)) d_out.row(r).setZero();
    grad.projection.noalias() += d_out.transpose() * cache.stacked;
    const Matrix d_stacked = d_out * params.projection;
    for (Eigen::Index r = 0; r < queries.rows(); ++r) {
        if (detail::is_masked(query_mask, r)) continue;
        const Vector q = queries.row(r).transpose();
        Vector d_q = Vector::Zero(d);
        for (Eigen::Index b = 0; b < nb; ++b) {
            const auto kind = params.branches[static_cast<std::size_t>(b)];
            d_q += d_stacked.block(r, 2 * d * b, 1, d).transpose();
            const Vector d_pooled = d_stacked.block(r, 2 * d * b + d, 1, d).transpose();
            attend_backward(kind, params.params(kind), keys, q,
                            cache.attention[static_cast<std::size_t>(r)][static_cast<std::size_t>(b)], d_pooled,
                            grad.params(kind), d_keys, d_q);
        }
        d_queries.row(r) += d_q.transpose();
    }
}

struct MultiwayResult {
    Matrix question;  // Q_final, n x d
    Matrix spo;       // updated SPO rows, m x d (zero on masked rows)
};

struct MultiwayCache {
    DirectionCache question_side;
    DirectionCache spo_side;
};

/// Question tokens attend over SPO rows with `to_spo`; SPO rows attend over
/// question tokens with `to_question`.
inline MultiwayResult multiway_match(const Matrix& question, const Matrix& spo, const std::vector<bool>& spo_mask,
                                     const MultiwayParams& to_spo, const MultiwayParams& to_question,
                                     MultiwayCache* cache = nullptr) {
    if (question.rows() < 1) throw InputError("multiway: question has no tokens");
    if (spo.rows() < 1) throw InputError("multiway: no SPO rows");
    if (question.cols() != spo.cols()) throw ShapeError("multiway: question and SPO widths differ");
    MultiwayResult out;
    out.question = match_direction(to_spo, question, spo, spo_mask, {}, cache ? &cache->question_side : nullptr);
    out.spo = match_direction(to_question, spo, question, {}, spo_mask, cache ? &cache->spo_side : nullptr);
    return out;
}

/// W_S, b_S and the 1 x d gate map W_g.
struct FusionParams {
    Matrix summary_weight;  // d x d
    Vector summary_bias;    // d
    Vector gate;            // d

    static FusionParams init(Eigen::Index d, Rng& rng) {
        FusionParams p;
        p.summary_weight = scaled_uniform(d, d, rng);
        p.summary_bias = Vector::Zero(d);
        p.gate = scaled_uniform(1, d, rng).row(0).transpose();
        return p;
    }

    FusionParams zeros_like() const {
        return {Matrix::Zero(summary_weight.rows(), summary_weight.cols()), Vector::Zero(summary_bias.size()),
                Vector::Zero(gate.size())};
    }

    TensorList tensors(const std::string& prefix) {
        return {tensor_ref(prefix + ".W_S", summary_weight), tensor_ref(prefix + ".b_S", summary_bias),
                tensor_ref(prefix + ".W_g", gate)};
    }
};

struct FusionCache {
    Vector mean;
    Vector summary;  // S~
    Vector gates;    // g_i per token
    std::size_t active = 0;
};

/// S~ = tanh(W_S mean(S_hat) + b_S); g_i = sigmoid(W_g (q_i * S~));
/// q_new_i = g_i q_i + (1 - g_i) S~. With `fixed_gate`, g_i = 0.5 for all i.
inline Matrix adaptive_fuse(const Matrix& question, const Matrix& spo, const FusionParams& params,
                            const std::vector<bool>& spo_mask = {}, FusionCache* cache = nullptr,
                            bool fixed_gate = false) {
    const Eigen::Index d = question.cols();
    if (spo.cols() != d || params.summary_weight.rows() != d) throw ShapeError("adaptive_fuse: width mismatch");
    Vector mean = Vector::Zero(d);
    std::size_t active = 0;
    for (Eigen::Index i = 0; i < spo.rows(); ++i) {
        if (detail::is_masked(spo_mask, i)) continue;
        mean += spo.row(i).transpose();
        ++active;
    }
    if (active == 0) throw InputError("adaptive_fuse: no SPO rows");
    mean /= static_cast<double>(active);
    const Vector summary = (params.summary_weight * mean + params.summary_bias).array().tanh();

    Matrix out(question.rows(), d);
    Vector gates(question.rows());
    for (Eigen::Index i = 0; i < question.rows(); ++i) {
        const double g = fixed_gate ? 0.5
                                    : sigmoid(params.gate.dot(question.row(i).transpose().cwiseProduct(summary)));
        gates[i] = g;
        out.row(i) = g * question.row(i) + (1.0 - g) * summary.transpose();
    }
    if (cache) *cache = {std::move(mean), summary, std::move(gates), active};
    return out;
}

inline void adaptive_fuse_backward(const Matrix& question, const FusionParams& params,
                                   const std::vector<bool>& spo_mask, const FusionCache& cache,
                                   const Matrix& d_out, bool fixed_gate, FusionParams& grad, Matrix& d_question,
                                   Matrix& d_spo) {
    const Vector& s = cache.summary;
    Vector d_summary = Vector::Zero(s.size());
    for (Eigen::Index i = 0; i < question.rows(); ++i) {
        const double g = cache.gates[i];
        const Vector q = question.row(i).transpose();
        const Vector dq_new = d_out.row(i).transpose();
        d_question.row(i) += g * dq_new.transpose();
        d_summary += (1.0 - g) * dq_new;
        if (fixed_gate) continue;
        const double d_gate_logit = dq_new.dot(q - s) * g * (1.0 - g);
        grad.gate += d_gate_logit * q.cwiseProduct(s);
        d_question.row(i) += d_gate_logit * params.gate.cwiseProduct(s).transpose();
        d_summary += d_gate_logit * params.gate.cwiseProduct(q);
    }
    const Vector d_pre = d_summary.cwiseProduct((1.0 - s.array().square()).matrix());
    grad.summary_weight.noalias() += d_pre * cache.mean.transpose();
    grad.summary_bias += d_pre;
    const Vector d_mean = params.summary_weight.transpose() * d_pre / static_cast<double>(cache.active);
    for (Eigen::Index i = 0; i < d_spo.rows(); ++i) {
        if (detail::is_masked(spo_mask, i)) continue;
        d_spo.row(i) += d_mean.transpose();
    }
}

}  // namespace tma
