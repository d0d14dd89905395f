#pragma once

// Desk-scale synthetic benchmark. Entities are split into offices and people;
// every (predicate, office) pair gets a timeline of successive holders whose
// closed year intervals partition the year range. Questions for all five
// reasoning categories are instantiated from fixed templates and their gold
// answers are computed by scanning the generated fact set.

#include "tma/answer_head.hpp"
#include "tma/errors.hpp"
#include "tma/harness/questions.hpp"
#include "tma/kg_store.hpp"
#include "tma/tensor.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace tma {

struct SyntheticConfig {
    std::size_t num_entities = 30;
    std::size_t num_predicates = 3;
    int first_year = 2000;
    std::size_t num_years = 10;
    std::size_t num_offices = 6;
    std::size_t predicates_per_office = 2;
    std::size_t holders_per_timeline = 4;  // facts per (predicate, office)
    std::size_t questions_per_category = 40;
    double train_fraction = 0.7;
    double valid_fraction = 0.1;

    void validate() const {
        if (num_years == 0) throw ConfigError("synthetic: num_years must be positive");
        if (num_predicates == 0) throw ConfigError("synthetic: num_predicates must be positive");
        if (num_offices == 0 || num_offices >= num_entities) {
            throw ConfigError("synthetic: need 0 < num_offices < num_entities");
        }
        if (predicates_per_office == 0 || predicates_per_office > num_predicates) {
            throw ConfigError("synthetic: predicates_per_office must lie in [1, num_predicates]");
        }
        if (holders_per_timeline < 2 || holders_per_timeline > num_years) {
            throw ConfigError("synthetic: holders_per_timeline must lie in [2, num_years]");
        }
        if (holders_per_timeline > num_entities - num_offices) {
            throw ConfigError("synthetic: not enough people for one timeline");
        }
        if (train_fraction <= 0 || valid_fraction < 0 || train_fraction + valid_fraction > 1.0) {
            throw ConfigError("synthetic: bad split fractions");
        }
    }
};

struct SyntheticDataset {
    TemporalKG kg;
    std::vector<QuestionInstance> train;
    std::vector<QuestionInstance> valid;
    std::vector<QuestionInstance> test;

    std::vector<QuestionInstance> all() const {
        std::vector<QuestionInstance> out = train;
        out.insert(out.end(), valid.begin(), valid.end());
        out.insert(out.end(), test.begin(), test.end());
        return out;
    }
};

namespace detail {

inline std::string predicate_label(std::size_t i) {
    static const char* names[] = {"chair", "captain", "director", "treasurer", "coach", "mayor", "editor", "dean"};
    return i < std::size(names) ? names[i] : "role" + std::to_string(i);
}

inline std::string two_digit(std::size_t i) { return (i < 10 ? "0" : "") + std::to_string(i); }

/// Gold-answer queries over a finished KG, by scanning every fact.
class FactScanner {
public:
    explicit FactScanner(const TemporalKG& kg) : kg_(kg) {}

    std::vector<EntityId> holders_at(PredicateId p, EntityId o, int year) const {
        std::set<EntityId> out;
        for (const auto& f : kg_.facts())
            if (f.predicate == p && f.object == o && kg_.year(f.start) <= year && year <= kg_.year(f.end))
                out.insert(f.subject);
        return {out.begin(), out.end()};
    }

    std::vector<int> years_held(EntityId s, PredicateId p, EntityId o) const {
        std::set<int> out;
        for (const auto& f : kg_.facts())
            if (f.subject == s && f.predicate == p && f.object == o)
                for (int y : kg_.years())
                    if (kg_.year(f.start) <= y && y <= kg_.year(f.end)) out.insert(y);
        return {out.begin(), out.end()};
    }

    /// Holders whose start is the latest before (or earliest after) `ref`'s start.
    std::vector<EntityId> neighbour(const TemporalFact& ref, bool before) const {
        const int ref_start = kg_.year(ref.start);
        std::optional<int> best;
        for (const auto& f : kg_.facts()) {
            if (f.predicate != ref.predicate || f.object != ref.object || f.subject == ref.subject) continue;
            const int s = kg_.year(f.start);
            if (before ? s < ref_start : s > ref_start) {
                if (!best || (before ? s > *best : s < *best)) best = s;
            }
        }
        std::set<EntityId> out;
        if (best)
            for (const auto& f : kg_.facts())
                if (f.predicate == ref.predicate && f.object == ref.object && f.subject != ref.subject &&
                    kg_.year(f.start) == *best)
                    out.insert(f.subject);
        return {out.begin(), out.end()};
    }

    std::vector<EntityId> extreme(PredicateId p, EntityId o, bool first) const {
        std::optional<int> best;
        for (const auto& f : kg_.facts()) {
            if (f.predicate != p || f.object != o) continue;
            const int y = first ? kg_.year(f.start) : kg_.year(f.end);
            if (!best || (first ? y < *best : y > *best)) best = y;
        }
        std::set<EntityId> out;
        for (const auto& f : kg_.facts())
            if (f.predicate == p && f.object == o && best && (first ? kg_.year(f.start) : kg_.year(f.end)) == *best)
                out.insert(f.subject);
        return {out.begin(), out.end()};
    }

    std::vector<EntityId> overlapping(PredicateId p, EntityId o, const TemporalFact& anchor) const {
        const int a0 = kg_.year(anchor.start), a1 = kg_.year(anchor.end);
        std::set<EntityId> out;
        for (const auto& f : kg_.facts())
            if (f.predicate == p && f.object == o && f.subject != anchor.subject && kg_.year(f.start) <= a1 &&
                a0 <= kg_.year(f.end))
                out.insert(f.subject);
        return {out.begin(), out.end()};
    }

private:
    const TemporalKG& kg_;
};

inline std::vector<AnswerRef> entity_answers(const std::vector<EntityId>& ids) {
    std::vector<AnswerRef> out;
    for (auto e : ids) out.push_back({AnswerType::Entity, static_cast<std::int32_t>(index_of(e))});
    return out;
}

}  // namespace detail

inline SyntheticDataset generate_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    const std::size_t people = config.num_entities - config.num_offices;
    std::vector<std::string> office_names, people_names, predicate_names;
    for (std::size_t i = 0; i < config.num_offices; ++i) office_names.push_back("office" + detail::two_digit(i));
    for (std::size_t i = 0; i < people; ++i) people_names.push_back("person" + detail::two_digit(i));
    for (std::size_t i = 0; i < config.num_predicates; ++i) predicate_names.push_back(detail::predicate_label(i));
    const int last_year = config.first_year + static_cast<int>(config.num_years) - 1;

    // Every year must be some interval endpoint, otherwise it would be absent
    // from the reloaded timestamp table.
    TemporalKG kg;
    bool covered = false;
    for (int attempt = 0; attempt < 1000 && !covered; ++attempt) {
        KgBuilder builder;
        std::vector<std::string> entity_table = office_names;
        entity_table.insert(entity_table.end(), people_names.begin(), people_names.end());
        builder.set_entity_table(entity_table);
        builder.set_predicate_table(predicate_names);
        for (std::size_t o = 0; o < config.num_offices; ++o) {
            std::vector<std::size_t> preds(config.num_predicates);
            std::iota(preds.begin(), preds.end(), 0);
            rng.shuffle(preds);
            preds.resize(config.predicates_per_office);
            std::sort(preds.begin(), preds.end());
            for (auto p : preds) {
                std::vector<int> cuts(config.num_years - 1);
                std::iota(cuts.begin(), cuts.end(), 1);
                rng.shuffle(cuts);
                cuts.resize(config.holders_per_timeline - 1);
                std::sort(cuts.begin(), cuts.end());
                cuts.insert(cuts.begin(), 0);
                cuts.push_back(static_cast<int>(config.num_years));
                std::vector<std::size_t> holders(people);
                std::iota(holders.begin(), holders.end(), 0);
                rng.shuffle(holders);
                for (std::size_t h = 0; h < config.holders_per_timeline; ++h) {
                    builder.add(people_names[holders[h]], predicate_names[p], office_names[o],
                                config.first_year + cuts[h], config.first_year + cuts[h + 1] - 1);
                }
            }
        }
        kg = std::move(builder).build();
        covered = kg.time_count() == config.num_years && kg.years().front() == config.first_year &&
                  kg.years().back() == last_year;
    }
    if (!covered) throw ConfigError("synthetic: could not cover every year with interval endpoints");

    const detail::FactScanner scan(kg);
    const auto& facts = kg.facts();
    auto ename = [&](EntityId e) { return kg.entity_name(e); };
    auto pname = [&](PredicateId p) { return kg.predicate_name(p); };

    std::map<QuestionCategory, std::vector<QuestionInstance>> by_category;
    std::set<std::string> seen_texts;
    for (auto category : kAllCategories) {
        auto& bucket = by_category[category];
        const std::size_t max_attempts = 500 * config.questions_per_category + 1000;
        for (std::size_t attempt = 0; attempt < max_attempts && bucket.size() < config.questions_per_category;
             ++attempt) {
            const auto& f = facts[rng.index(facts.size())];
            QuestionInstance q;
            auto& ann = q.annotations;
            ann.category = category;
            ann.answer_type = AnswerType::Entity;
            switch (category) {
                case QuestionCategory::SimpleEntity: {
                    const int lo = kg.year(f.start), hi = kg.year(f.end);
                    const int year = lo + static_cast<int>(rng.index(static_cast<std::size_t>(hi - lo + 1)));
                    q.text = "who was " + pname(f.predicate) + " of " + ename(f.object) + " in " + std::to_string(year);
                    ann.entities = {f.object};
                    ann.time = *kg.find_year(year);
                    ann.gold = detail::entity_answers(scan.holders_at(f.predicate, f.object, year));
                    break;
                }
                case QuestionCategory::SimpleTime: {
                    q.text = "when was " + ename(f.subject) + " the " + pname(f.predicate) + " of " + ename(f.object);
                    ann.entities = {f.subject, f.object};
                    ann.answer_type = AnswerType::Time;
                    for (int y : scan.years_held(f.subject, f.predicate, f.object))
                        ann.gold.push_back({AnswerType::Time, static_cast<std::int32_t>(index_of(*kg.find_year(y)))});
                    break;
                }
                case QuestionCategory::BeforeAfter: {
                    const bool before = rng.uniform() < 0.5;
                    q.text = "who was the " + pname(f.predicate) + " of " + ename(f.object) +
                             (before ? " before " : " after ") + ename(f.subject);
                    ann.entities = {f.object, f.subject};
                    ann.gold = detail::entity_answers(scan.neighbour(f, before));
                    break;
                }
                case QuestionCategory::FirstLast: {
                    static constexpr std::array<const char*, 3> kFirst{"first", "earliest", "initial"};
                    static constexpr std::array<const char*, 3> kLast{"last", "latest", "final"};
                    const bool first = rng.uniform() < 0.5;
                    const auto* word = (first ? kFirst : kLast)[rng.index(3)];
                    q.text = "who was the " + std::string(word) + " " + pname(f.predicate) + " of " + ename(f.object);
                    ann.entities = {f.object};
                    ann.gold = detail::entity_answers(scan.extreme(f.predicate, f.object, first));
                    break;
                }
                case QuestionCategory::TimeJoin: {
                    const auto& anchor = facts[rng.index(facts.size())];
                    if (anchor.predicate == f.predicate && anchor.object == f.object) continue;
                    q.text = "who was " + pname(f.predicate) + " of " + ename(f.object) + " when " +
                             ename(anchor.subject) + " was " + pname(anchor.predicate) + " of " + ename(anchor.object);
                    ann.entities = {f.object, anchor.subject, anchor.object};
                    ann.gold = detail::entity_answers(scan.overlapping(f.predicate, f.object, anchor));
                    break;
                }
            }
            if (ann.gold.empty() || !seen_texts.insert(q.text).second) continue;
            ann.assign_roles();
            bucket.push_back(std::move(q));
        }
        if (bucket.size() < config.questions_per_category) {
            throw ConfigError("synthetic: could not generate " + std::to_string(config.questions_per_category) +
                              " distinct " + std::string(category_name(category)) + " questions");
        }
    }

    SyntheticDataset out;
    for (auto category : kAllCategories) {
        auto& bucket = by_category[category];
        rng.shuffle(bucket);
        const auto n = bucket.size();
        const auto n_train = static_cast<std::size_t>(static_cast<double>(n) * config.train_fraction);
        const auto n_valid = static_cast<std::size_t>(static_cast<double>(n) * config.valid_fraction);
        for (std::size_t i = 0; i < n; ++i) {
            bucket[i].id = std::string(category_name(category)) + "_" + std::to_string(i);
            auto& dest = i < n_train ? out.train : (i < n_train + n_valid ? out.valid : out.test);
            dest.push_back(std::move(bucket[i]));
        }
    }
    out.kg = std::move(kg);
    return out;
}

}  // namespace tma
