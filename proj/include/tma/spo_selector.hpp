#pragma once

// Zero-shot SPO retrieval: candidate facts around the question's entities are
// verbalized, encoded with the question's encoder, and ranked by cosine
// similarity of summary vectors.

#include "tma/errors.hpp"
#include "tma/kg_store.hpp"
#include "tma/tensor.hpp"
#include "tma/text_encoder.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace tma {

inline constexpr std::size_t kDefaultTopK = 10;
inline constexpr std::size_t kDefaultPoolCap = 200;

struct SpoCandidate {
    TemporalFact fact;
    std::size_t fact_index = 0;  // position in TemporalKG::facts()
    std::string text;
    Vector summary;
    double score = 0.0;
};

/// Cosine similarity. A zero vector on either side scores 0.0.
inline double cosine_score(const Vector& u, const Vector& v) {
    if (u.size() != v.size()) throw ShapeError("cosine_score: vectors differ in dimension");
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu == 0.0 || nv == 0.0) {
        spdlog::warn("cosine_score: zero vector, scoring 0");
        return 0.0;
    }
    // Clamp rounding excursions so the score stays inside [-1, 1].
    return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

struct SpoSelection {
    std::vector<SpoCandidate> selected;   // descending score
    std::vector<std::size_t> source;      // index of each selected item in the input candidate list
    std::vector<bool> mask;               // length k, first m entries true
    std::size_t m() const noexcept { return selected.size(); }
};

/// Scores every candidate against the question summary vector and keeps the
/// top k. Ties go to the lower input index.
inline SpoSelection select_spos(const TokenMatrix& question, std::vector<SpoCandidate> candidates,
                                std::size_t k = kDefaultTopK) {
    const Vector q = question.summary();
    for (auto& c : candidates) c.score = cosine_score(q, c.summary);

    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return candidates[a].score > candidates[b].score; });

    SpoSelection out;
    const std::size_t m = std::min(k, candidates.size());
    out.mask.assign(k, false);
    for (std::size_t i = 0; i < m; ++i) {
        out.selected.push_back(std::move(candidates[order[i]]));
        out.source.push_back(order[i]);
        out.mask[i] = true;
    }
    return out;
}

/// Facts touching any of `entities`, ordered by descending end year (stable
/// in fact-list order) and truncated to `cap`.
inline std::vector<std::size_t> candidate_pool(const TemporalKG& kg, const std::set<EntityId>& entities,
                                               std::size_t cap = kDefaultPoolCap) {
    auto pool = fact_indices_for_entities(kg, entities);
    std::stable_sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) {
        return kg.year(kg.fact(a).end) > kg.year(kg.fact(b).end);
    });
    if (pool.size() > cap) pool.resize(cap);
    return pool;
}

/// Encodes verbalized facts on demand and memoizes their summary vectors.
class SpoIndex {
public:
    SpoIndex(const TemporalKG& kg, const TextEncoder& encoder) : kg_(kg), encoder_(encoder) {}

    SpoCandidate candidate(std::size_t fact_index) {
        SpoCandidate c;
        c.fact = kg_.fact(fact_index);
        c.fact_index = fact_index;
        c.text = verbalize_fact(c.fact, kg_);
        auto it = cache_.find(fact_index);
        if (it == cache_.end()) {
            it = cache_.emplace(fact_index, encoder_.encode(c.text).summary()).first;
        }
        c.summary = it->second;
        return c;
    }

    std::vector<SpoCandidate> candidates(const std::vector<std::size_t>& fact_indices) {
        std::vector<SpoCandidate> out;
        out.reserve(fact_indices.size());
        for (auto i : fact_indices) out.push_back(candidate(i));
        return out;
    }

    /// Pool construction followed by top-k selection.
    SpoSelection select(const TokenMatrix& question, const std::set<EntityId>& entities,
                        std::size_t k = kDefaultTopK, std::size_t cap = kDefaultPoolCap) {
        return select_spos(question, candidates(candidate_pool(kg_, entities, cap)), k);
    }

private:
    const TemporalKG& kg_;
    const TextEncoder& encoder_;
    std::map<std::size_t, Vector> cache_;
};

}  // namespace tma
