#pragma once

// Complex-valued temporal KG embeddings: the TComplEx triple-product score,
// batched sweeps over an embedding table, and pre-training with Adam.

#include "tma/errors.hpp"
#include "tma/kg_store.hpp"
#include "tma/optim.hpp"
#include "tma/tensor.hpp"

#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tma {

using Complex = std::complex<double>;

/// One embedding table stored as separate real and imaginary coefficient
/// matrices (rows x dim).
struct ComplexEmbeddingTable {
    Matrix real;
    Matrix imag;

    ComplexEmbeddingTable() = default;
    ComplexEmbeddingTable(Eigen::Index rows, Eigen::Index dim)
        : real(Matrix::Zero(rows, dim)), imag(Matrix::Zero(rows, dim)) {}

    Eigen::Index rows() const noexcept { return real.rows(); }
    Eigen::Index dim() const noexcept { return real.cols(); }

    CVector row(Eigen::Index i) const {
        CVector v(dim());
        for (Eigen::Index k = 0; k < dim(); ++k) v[k] = Complex(real(i, k), imag(i, k));
        return v;
    }

    void set_row(Eigen::Index i, const CVector& v) {
        if (v.size() != dim()) throw ShapeError("set_row: dimension mismatch");
        real.row(i) = v.real().transpose();
        imag.row(i) = v.imag().transpose();
    }

    /// Adds a complex gradient into row i.
    void add_to_row(Eigen::Index i, const CVector& g) {
        real.row(i) += g.real().transpose();
        imag.row(i) += g.imag().transpose();
    }

    void set_zero() {
        real.setZero();
        imag.setZero();
    }

    TensorList tensors(const std::string& prefix) {
        return {tensor_ref(prefix + ".real", real), tensor_ref(prefix + ".imag", imag)};
    }

    bool operator==(const ComplexEmbeddingTable& o) const {
        return real.rows() == o.real.rows() && real.cols() == o.real.cols() && real == o.real && imag == o.imag;
    }
};

/// Entity, predicate and timestamp tables. Row 0 of the entity and timestamp
/// tables is the reserved dummy row; KG id i lives at row i + 1.
struct TkgTables {
    ComplexEmbeddingTable entities;
    ComplexEmbeddingTable predicates;
    ComplexEmbeddingTable timestamps;

    static constexpr Eigen::Index kDummyRow = 0;

    static Eigen::Index entity_row(EntityId e) { return static_cast<Eigen::Index>(index_of(e)) + 1; }
    static Eigen::Index time_row(TimeId t) { return static_cast<Eigen::Index>(index_of(t)) + 1; }
    static Eigen::Index predicate_row(PredicateId p) { return static_cast<Eigen::Index>(index_of(p)); }

    Eigen::Index dim() const noexcept { return entities.dim(); }
    Eigen::Index entity_count() const noexcept { return entities.rows() - 1; }
    Eigen::Index time_count() const noexcept { return timestamps.rows() - 1; }
    Eigen::Index predicate_count() const noexcept { return predicates.rows(); }

    static TkgTables zeros(Eigen::Index n_entities, Eigen::Index n_predicates, Eigen::Index n_times,
                           Eigen::Index dim) {
        return {ComplexEmbeddingTable(n_entities + 1, dim), ComplexEmbeddingTable(n_predicates, dim),
                ComplexEmbeddingTable(n_times + 1, dim)};
    }

    TkgTables zeros_like() const {
        return zeros(entity_count(), predicate_count(), time_count(), dim());
    }

    void set_zero() {
        entities.set_zero();
        predicates.set_zero();
        timestamps.set_zero();
    }

    TensorList tensors() {
        TensorList out;
        append(out, entities.tensors("entities"), "");
        append(out, predicates.tensors("predicates"), "");
        append(out, timestamps.tensors("timestamps"), "");
        return out;
    }

    bool operator==(const TkgTables&) const = default;
};

/// Re(<e_s, e_p * e_t, conj(e_o)>), summed over coordinates.
inline double score_fact(const CVector& subject, const CVector& predicate, const CVector& object,
                         const CVector& time) {
    const auto d = subject.size();
    if (predicate.size() != d || object.size() != d || time.size() != d) {
        throw ShapeError("score_fact: embeddings must share one dimension");
    }
    double total = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
        total += (subject[k] * predicate[k] * time[k] * std::conj(object[k])).real();
    }
    return total;
}

/// Scores of `query` against every row j of `table`: Re(sum query * conj(row_j)).
/// Written as two real mat-vecs since Re(x conj(y)) = x_re y_re + x_im y_im.
inline Vector conj_sweep(const CVector& query, const ComplexEmbeddingTable& table, Eigen::Index first_row = 0) {
    if (query.size() != table.dim()) throw ShapeError("conj_sweep: dimension mismatch");
    const Eigen::Index n = table.rows() - first_row;
    const Vector q_re = query.real();
    const Vector q_im = query.imag();
    return table.real.bottomRows(n) * q_re + table.imag.bottomRows(n) * q_im;
}

/// Scores of `query` against every row j of `table` in the unconjugated slot:
/// Re(sum row_j * query) = row_re q_re - row_im q_im.
inline Vector plain_sweep(const CVector& query, const ComplexEmbeddingTable& table, Eigen::Index first_row = 0) {
    if (query.size() != table.dim()) throw ShapeError("plain_sweep: dimension mismatch");
    const Eigen::Index n = table.rows() - first_row;
    const Vector q_re = query.real();
    const Vector q_im = query.imag();
    return table.real.bottomRows(n) * q_re - table.imag.bottomRows(n) * q_im;
}

/// Element j is score_fact(subject, predicate, table row j, time), for rows
/// first_row.. of the table.
inline Vector score_all_objects(const CVector& subject, const CVector& predicate, const CVector& time,
                                const ComplexEmbeddingTable& table, Eigen::Index first_row = 0) {
    if (subject.size() != predicate.size() || subject.size() != time.size()) {
        throw ShapeError("score_all_objects: embeddings must share one dimension");
    }
    const CVector query = subject.cwiseProduct(predicate).cwiseProduct(time);
    return conj_sweep(query, table, first_row);
}

struct TkgTrainConfig {
    int dim = 64;
    int epochs = 200;
    double learning_rate = 0.01;
    int batch_size = 64;
    double l2 = 1e-4;
    double init_scale = 0.1;
    std::uint64_t seed = 0;
};

/// One (s, p, o, t) training example, already mapped to table rows.
struct TkgTuple {
    Eigen::Index subject;
    Eigen::Index predicate;
    Eigen::Index object;
    Eigen::Index time;
};

/// Expands each interval fact into one tuple per timestamp whose year lies in
/// [start, end].
inline std::vector<TkgTuple> expand_training_tuples(const TemporalKG& kg) {
    std::vector<TkgTuple> out;
    for (const auto& f : kg.facts()) {
        for (auto t = index_of(f.start); t <= index_of(f.end); ++t) {
            out.push_back({TkgTables::entity_row(f.subject), TkgTables::predicate_row(f.predicate),
                           TkgTables::entity_row(f.object), static_cast<Eigen::Index>(t) + 1});
        }
    }
    return out;
}

inline TkgTables init_tables(std::size_t n_entities, std::size_t n_predicates, std::size_t n_times, int dim,
                             double scale, std::uint64_t seed) {
    if (dim <= 0) throw ConfigError("embedding dimension must be positive");
    Rng rng(seed);
    auto tables = TkgTables::zeros(static_cast<Eigen::Index>(n_entities), static_cast<Eigen::Index>(n_predicates),
                                   static_cast<Eigen::Index>(n_times), dim);
    for (auto& t : tables.tensors()) {
        for (double& v : t.values) v = scale * rng.normal();
    }
    return tables;
}

namespace detail {

inline double softmax_residual(Vector& logits, Eigen::Index gold) {
    const double mx = logits.maxCoeff();
    logits = (logits.array() - mx).exp();
    const double z = logits.sum();
    const double nll = -std::log(logits[gold] / z);
    logits /= z;
    logits[gold] -= 1.0;
    return nll;
}

}  // namespace detail

/// Mean over `batch` of 0.5 * (object-side + subject-side) softmax
/// cross-entropy over all real entities, plus l2 * squared norms of the rows
/// each tuple references. When `grad` is given, gradients are accumulated
/// into it.
inline double tkg_batch_loss(const TkgTables& tables, std::span<const TkgTuple> batch, double l2,
                             TkgTables* grad) {
    if (batch.empty()) return 0.0;
    const double scale = 1.0 / static_cast<double>(batch.size());
    const double half = 0.5 * scale;
    const Eigen::Index n_ent = tables.entity_count();
    const auto& E = tables.entities;
    double loss = 0.0;

    for (const auto& tup : batch) {
        const CVector s = E.row(tup.subject);
        const CVector o = E.row(tup.object);
        const CVector p = tables.predicates.row(tup.predicate);
        const CVector t = tables.timestamps.row(tup.time);
        const CVector r = p.cwiseProduct(t);

        // object side: candidates fill the conjugated slot
        const CVector x = s.cwiseProduct(r);
        Vector w_obj = conj_sweep(x, E, 1);
        loss += half * detail::softmax_residual(w_obj, tup.object - 1);

        // subject side: candidates fill the leading slot
        const CVector y = r.cwiseProduct(o.conjugate());
        Vector w_subj = plain_sweep(y, E, 1);
        loss += half * detail::softmax_residual(w_subj, tup.subject - 1);

        loss += scale * l2 * (s.squaredNorm() + o.squaredNorm() + p.squaredNorm() + t.squaredNorm());

        if (grad == nullptr) continue;
        auto& gE = grad->entities;
        const Vector x_re = x.real(), x_im = x.imag();
        const Vector y_re = y.real(), y_im = y.imag();
        gE.real.bottomRows(n_ent).noalias() += half * w_obj * x_re.transpose();
        gE.imag.bottomRows(n_ent).noalias() += half * w_obj * x_im.transpose();
        gE.real.bottomRows(n_ent).noalias() += half * w_subj * y_re.transpose();
        gE.imag.bottomRows(n_ent).noalias() -= half * w_subj * y_im.transpose();

        CVector g_x(x.size());
        g_x.real() = half * (E.real.bottomRows(n_ent).transpose() * w_obj);
        g_x.imag() = half * (E.imag.bottomRows(n_ent).transpose() * w_obj);
        CVector g_y(y.size());
        g_y.real() = half * (E.real.bottomRows(n_ent).transpose() * w_subj);
        g_y.imag() = -half * (E.imag.bottomRows(n_ent).transpose() * w_subj);

        const CVector g_r = g_x.cwiseProduct(s.conjugate()) + g_y.cwiseProduct(o);
        gE.add_to_row(tup.subject, g_x.cwiseProduct(r.conjugate()) + 2.0 * scale * l2 * s);
        gE.add_to_row(tup.object, g_y.conjugate().cwiseProduct(r) + 2.0 * scale * l2 * o);
        grad->predicates.add_to_row(tup.predicate, g_r.cwiseProduct(t.conjugate()) + 2.0 * scale * l2 * p);
        grad->timestamps.add_to_row(tup.time, g_r.cwiseProduct(p.conjugate()) + 2.0 * scale * l2 * t);
    }
    return loss;
}

/// Pre-trains TComplEx tables on `kg`. Deterministic for a fixed seed.
/// `loss_curve`, when given, receives the mean training loss of each epoch.
inline TkgTables train_tkg(const TemporalKG& kg, const TkgTrainConfig& config,
                           std::vector<double>* loss_curve = nullptr) {
    if (kg.empty()) throw InputError("train_tkg: knowledge graph has no facts");
    if (config.batch_size <= 0 || config.epochs < 0) throw ConfigError("train_tkg: bad batch size or epochs");

    TkgTables tables = init_tables(kg.entity_count(), kg.predicate_count(), kg.time_count(), config.dim,
                                   config.init_scale, config.seed);
    if (config.epochs == 0) return tables;

    auto tuples = expand_training_tuples(kg);
    TkgTables grad = tables.zeros_like();
    Adam adam(tables.tensors(), AdamConfig{config.learning_rate});
    const auto grad_views = grad.tensors();
    Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(tuples);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < tuples.size(); begin += static_cast<std::size_t>(config.batch_size)) {
            const auto count = std::min(tuples.size() - begin, static_cast<std::size_t>(config.batch_size));
            grad.set_zero();
            const double loss =
                tkg_batch_loss(tables, std::span<const TkgTuple>(tuples.data() + begin, count), config.l2, &grad);
            if (!std::isfinite(loss)) {
                throw Error("train_tkg: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batches));
            }
            adam.step(grad_views);
            epoch_loss += loss;
            ++batches;
        }
        if (loss_curve) loss_curve->push_back(epoch_loss / static_cast<double>(batches));
    }
    return tables;
}

/// Filtered object-prediction Hits@1 over every expanded training tuple: other
/// true objects of the same (s, p, t) are ignored, remaining ties go to the
/// lower id.
inline double object_hits_at_1(const TkgTables& tables, const TemporalKG& kg) {
    const auto tuples = expand_training_tuples(kg);
    if (tuples.empty()) return 0.0;
    std::set<std::tuple<Eigen::Index, Eigen::Index, Eigen::Index, Eigen::Index>> known;
    for (const auto& t : tuples) known.emplace(t.subject, t.predicate, t.time, t.object);

    std::size_t hits = 0;
    for (const auto& tup : tuples) {
        const Vector scores = score_all_objects(tables.entities.row(tup.subject), tables.predicates.row(tup.predicate),
                                                tables.timestamps.row(tup.time), tables.entities, 1);
        const Eigen::Index gold = tup.object - 1;
        bool top = true;
        for (Eigen::Index j = 0; j < scores.size() && top; ++j) {
            if (j == gold || known.count({tup.subject, tup.predicate, tup.time, j + 1})) continue;
            if (scores[j] > scores[gold] || (scores[j] == scores[gold] && j < gold)) top = false;
        }
        hits += top ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(tuples.size());
}

}  // namespace tma
