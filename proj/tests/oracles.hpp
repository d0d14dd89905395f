#pragma once

// Reference implementations written as plain scalar loops over std::complex
// and std::vector, independent of the library's Eigen code paths.

#include "tma/tma.hpp"

#include <cmath>
#include <complex>
#include <vector>

namespace oracle {

using cd = std::complex<double>;
using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline std::vector<cd> to_std(const tma::CVector& v) {
    std::vector<cd> out;
    for (Eigen::Index i = 0; i < v.size(); ++i) out.emplace_back(v[i].real(), v[i].imag());
    return out;
}

inline Vec to_std(const tma::Vector& v) { return Vec(v.data(), v.data() + v.size()); }

inline Mat to_std(const tma::Matrix& m) {
    Mat out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(r)].push_back(m(r, c));
    return out;
}

inline double score(const std::vector<cd>& s, const std::vector<cd>& p, const std::vector<cd>& o,
                    const std::vector<cd>& t) {
    cd acc = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) acc += s[k] * p[k] * t[k] * std::conj(o[k]);
    return acc.real();
}

inline Vec matvec(const Mat& w, const Vec& x) {
    Vec y(w.size(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j) y[i] += w[i][j] * x[j];
    return y;
}

struct Attention {
    Vec pooled;
    Vec weights;
};

inline Attention attend(tma::AttentionKind kind, const Mat& w, const Vec& v, const Mat& keys, const Vec& q,
                        const std::vector<bool>& mask = {}) {
    const std::size_t m = keys.size();
    const std::size_t d = q.size();
    Vec logits(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        Vec f;
        for (std::size_t i = 0; i < d; ++i) {
            switch (kind) {
                case tma::AttentionKind::Concat: break;
                case tma::AttentionKind::Dot: f.push_back(q[i] * keys[j][i]); break;
                case tma::AttentionKind::Minus: f.push_back(q[i] - keys[j][i]); break;
            }
        }
        if (kind == tma::AttentionKind::Concat) {
            f = q;
            f.insert(f.end(), keys[j].begin(), keys[j].end());
        }
        const Vec h = matvec(w, f);
        for (std::size_t i = 0; i < h.size(); ++i) logits[j] += v[i] * std::tanh(h[i]);
    }
    double mx = -INFINITY;
    for (std::size_t j = 0; j < m; ++j)
        if (mask.empty() || mask[j]) mx = std::max(mx, logits[j]);
    Attention out{Vec(d, 0.0), Vec(m, 0.0)};
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        if (!mask.empty() && !mask[j]) continue;
        out.weights[j] = std::exp(logits[j] - mx);
        z += out.weights[j];
    }
    for (std::size_t j = 0; j < m; ++j) {
        out.weights[j] /= z;
        for (std::size_t i = 0; i < d; ++i) out.pooled[i] += out.weights[j] * keys[j][i];
    }
    return out;
}

/// One matching direction, row by row.
inline Mat match(const tma::MultiwayParams& p, const Mat& queries, const Mat& keys,
                 const std::vector<bool>& key_mask, const std::vector<bool>& query_mask) {
    const Mat proj = to_std(p.projection);
    Mat out;
    for (std::size_t r = 0; r < queries.size(); ++r) {
        if (!query_mask.empty() && !query_mask[r]) {
            out.push_back(Vec(queries[r].size(), 0.0));
            continue;
        }
        Vec stacked;
        for (auto kind : p.branches) {
            const auto& ap = p.params(kind);
            const auto a = attend(kind, to_std(ap.weight), to_std(ap.score), keys, queries[r], key_mask);
            stacked.insert(stacked.end(), queries[r].begin(), queries[r].end());
            stacked.insert(stacked.end(), a.pooled.begin(), a.pooled.end());
        }
        out.push_back(matvec(proj, stacked));
    }
    return out;
}

inline Mat fuse(const Mat& question, const Mat& spo, const tma::FusionParams& p, const std::vector<bool>& mask,
                bool fixed_gate) {
    const std::size_t d = question.front().size();
    Vec mean(d, 0.0);
    double active = 0;
    for (std::size_t i = 0; i < spo.size(); ++i) {
        if (!mask.empty() && !mask[i]) continue;
        for (std::size_t c = 0; c < d; ++c) mean[c] += spo[i][c];
        active += 1;
    }
    for (auto& x : mean) x /= active;
    const Vec pre = matvec(to_std(p.summary_weight), mean);
    Vec s(d);
    for (std::size_t c = 0; c < d; ++c) s[c] = std::tanh(pre[c] + p.summary_bias[static_cast<Eigen::Index>(c)]);
    Mat out;
    for (const auto& q : question) {
        double logit = 0.0;
        for (std::size_t c = 0; c < d; ++c) logit += p.gate[static_cast<Eigen::Index>(c)] * q[c] * s[c];
        const double g = fixed_gate ? 0.5 : 1.0 / (1.0 + std::exp(-logit));
        Vec row(d);
        for (std::size_t c = 0; c < d; ++c) row[c] = g * q[c] + (1 - g) * s[c];
        out.push_back(row);
    }
    return out;
}

/// Scores over all real entities then all real timestamps, via the scalar
/// score oracle.
inline Vec answer_scores(const tma::CVector& q_ent, const tma::CVector& q_time, const tma::AnchorRows& rows,
                         const tma::TkgTables& t) {
    const auto e_s = to_std(t.entities.row(rows.subject));
    const auto e_o = to_std(t.entities.row(rows.object));
    const auto e_t = to_std(t.timestamps.row(rows.time));
    const auto qe = to_std(q_ent);
    const auto qt = to_std(q_time);
    Vec out;
    for (Eigen::Index j = 1; j < t.entities.rows(); ++j) out.push_back(score(e_s, qe, to_std(t.entities.row(j)), e_t));
    for (Eigen::Index j = 1; j < t.timestamps.rows(); ++j)
        out.push_back(score(e_s, qt, e_o, to_std(t.timestamps.row(j))));
    return out;
}

inline tma::CVector random_cvector(Eigen::Index d, tma::Rng& rng) {
    tma::CVector v(d);
    for (Eigen::Index i = 0; i < d; ++i) v[i] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    return v;
}

inline tma::Matrix random_matrix(Eigen::Index r, Eigen::Index c, tma::Rng& rng, double scale = 1.0) {
    tma::Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.uniform(-1, 1);
    return m;
}

inline tma::Vector random_vector(Eigen::Index n, tma::Rng& rng, double scale = 1.0) {
    tma::Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * rng.uniform(-1, 1);
    return v;
}

/// Largest relative error between an analytic gradient and central
/// differences of `loss` over every entry of `params`.
template <class Loss>
double max_gradient_error(const tma::TensorList& params, const tma::TensorList& grads, Loss&& loss,
                          double eps = 1e-5, std::string* worst = nullptr) {
    double max_err = 0.0;
    for (std::size_t t = 0; t < params.size(); ++t) {
        for (std::size_t i = 0; i < params[t].values.size(); ++i) {
            double& x = params[t].values[i];
            const double saved = x;
            x = saved + eps;
            const double up = loss();
            x = saved - eps;
            const double down = loss();
            x = saved;
            const double numeric = (up - down) / (2 * eps);
            const double analytic = grads[t].values[i];
            const double err = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-7});
            if (err > max_err) {
                max_err = err;
                if (worst) *worst = params[t].name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return max_err;
}

}  // namespace oracle
