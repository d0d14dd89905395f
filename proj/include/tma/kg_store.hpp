#pragma once

// Temporal knowledge graph: name tables, timestamp table and the fact set.

#include "tma/errors.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tma {

enum class EntityId : std::int32_t {};
enum class PredicateId : std::int32_t {};
enum class TimeId : std::int32_t {};

template <class Id>
constexpr std::size_t index_of(Id id) noexcept {
    return static_cast<std::size_t>(static_cast<std::int32_t>(id));
}

struct TemporalFact {
    EntityId subject{};
    PredicateId predicate{};
    EntityId object{};
    TimeId start{};
    TimeId end{};

    auto operator<=>(const TemporalFact&) const = default;
};

/// Immutable after construction. Entities and predicates get ids by first
/// appearance (or from explicit name tables); timestamp ids follow ascending
/// year order.
class TemporalKG {
public:
    TemporalKG() = default;

    std::size_t entity_count() const noexcept { return entities_.size(); }
    std::size_t predicate_count() const noexcept { return predicates_.size(); }
    std::size_t time_count() const noexcept { return years_.size(); }
    std::size_t fact_count() const noexcept { return facts_.size(); }
    bool empty() const noexcept { return facts_.empty(); }

    const std::string& entity_name(EntityId id) const { return entities_.at(index_of(id)); }
    const std::string& predicate_name(PredicateId id) const { return predicates_.at(index_of(id)); }
    int year(TimeId id) const { return years_.at(index_of(id)); }

    const std::vector<std::string>& entity_names() const noexcept { return entities_; }
    const std::vector<std::string>& predicate_names() const noexcept { return predicates_; }
    const std::vector<int>& years() const noexcept { return years_; }
    const std::vector<TemporalFact>& facts() const noexcept { return facts_; }
    const TemporalFact& fact(std::size_t i) const { return facts_.at(i); }

    std::optional<EntityId> find_entity(std::string_view name) const {
        auto it = entity_ids_.find(std::string(name));
        if (it == entity_ids_.end()) return std::nullopt;
        return EntityId{it->second};
    }
    std::optional<PredicateId> find_predicate(std::string_view name) const {
        auto it = predicate_ids_.find(std::string(name));
        if (it == predicate_ids_.end()) return std::nullopt;
        return PredicateId{it->second};
    }
    std::optional<TimeId> find_year(int year) const {
        auto it = std::lower_bound(years_.begin(), years_.end(), year);
        if (it == years_.end() || *it != year) return std::nullopt;
        return TimeId{static_cast<std::int32_t>(it - years_.begin())};
    }

    /// Indices into facts() whose subject or object is `e`, ascending.
    const std::vector<std::size_t>& facts_touching(EntityId e) const { return by_entity_.at(index_of(e)); }

    /// Number of duplicate quadruples dropped while building.
    std::size_t duplicates_dropped() const noexcept { return duplicates_dropped_; }

private:
    friend class KgBuilder;

    std::vector<std::string> entities_;
    std::vector<std::string> predicates_;
    std::vector<int> years_;
    std::vector<TemporalFact> facts_;
    std::unordered_map<std::string, std::int32_t> entity_ids_;
    std::unordered_map<std::string, std::int32_t> predicate_ids_;
    std::vector<std::vector<std::size_t>> by_entity_;
    std::size_t duplicates_dropped_ = 0;
};

/// Accumulates name-level facts and produces a TemporalKG that satisfies the
/// table invariants. When `closed` vocabularies are given, unknown names are
/// rejected instead of interned.
class KgBuilder {
public:
    KgBuilder() = default;

    void set_entity_table(std::vector<std::string> names) { fixed_entities_ = intern_table(std::move(names), entities_, entity_ids_, "entity"); }
    void set_predicate_table(std::vector<std::string> names) { fixed_predicates_ = intern_table(std::move(names), predicates_, predicate_ids_, "predicate"); }

    /// Adds one interval fact. Throws InputError when start_year > end_year
    /// and VocabularyError for names outside a fixed table.
    void add(const std::string& subject, const std::string& predicate, const std::string& object,
             int start_year, int end_year) {
        if (start_year > end_year) {
            throw InputError("fact starts after it ends: " + subject + " / " + predicate + " / " + object);
        }
        RawFact raw;
        raw.subject = intern(subject, entities_, entity_ids_, fixed_entities_, "entity");
        raw.predicate = intern(predicate, predicates_, predicate_ids_, fixed_predicates_, "predicate");
        raw.object = intern(object, entities_, entity_ids_, fixed_entities_, "entity");
        raw.start_year = start_year;
        raw.end_year = end_year;
        raw_.push_back(raw);
    }

    TemporalKG build() && {
        TemporalKG kg;
        std::set<int> year_set;
        for (const auto& r : raw_) {
            year_set.insert(r.start_year);
            year_set.insert(r.end_year);
        }
        kg.years_.assign(year_set.begin(), year_set.end());

        std::set<TemporalFact> seen;
        for (const auto& r : raw_) {
            TemporalFact f{EntityId{r.subject}, PredicateId{r.predicate}, EntityId{r.object},
                           *kg.find_year(r.start_year), *kg.find_year(r.end_year)};
            if (!seen.insert(f).second) {
                ++kg.duplicates_dropped_;
                continue;
            }
            kg.facts_.push_back(f);
        }
        if (kg.duplicates_dropped_ > 0) {
            spdlog::info("dropped {} duplicate fact(s)", kg.duplicates_dropped_);
        }

        kg.entities_ = std::move(entities_);
        kg.predicates_ = std::move(predicates_);
        kg.entity_ids_ = std::move(entity_ids_);
        kg.predicate_ids_ = std::move(predicate_ids_);
        kg.by_entity_.assign(kg.entities_.size(), {});
        for (std::size_t i = 0; i < kg.facts_.size(); ++i) {
            const auto& f = kg.facts_[i];
            kg.by_entity_[index_of(f.subject)].push_back(i);
            if (f.object != f.subject) kg.by_entity_[index_of(f.object)].push_back(i);
        }
        return kg;
    }

private:
    struct RawFact {
        std::int32_t subject, predicate, object;
        int start_year, end_year;
    };

    static bool intern_table(std::vector<std::string> names, std::vector<std::string>& table,
                             std::unordered_map<std::string, std::int32_t>& ids, const char* kind) {
        table = std::move(names);
        ids.clear();
        for (std::size_t i = 0; i < table.size(); ++i) {
            if (!ids.emplace(table[i], static_cast<std::int32_t>(i)).second) {
                throw VocabularyError(std::string("duplicate ") + kind + " name '" + table[i] + "'");
            }
        }
        return true;
    }

    static std::int32_t intern(const std::string& name, std::vector<std::string>& table,
                               std::unordered_map<std::string, std::int32_t>& ids, bool fixed,
                               const char* kind) {
        auto it = ids.find(name);
        if (it != ids.end()) return it->second;
        if (fixed) throw VocabularyError(std::string("unknown ") + kind + " '" + name + "'");
        const auto id = static_cast<std::int32_t>(table.size());
        table.push_back(name);
        ids.emplace(name, id);
        return id;
    }

    std::vector<std::string> entities_;
    std::vector<std::string> predicates_;
    std::unordered_map<std::string, std::int32_t> entity_ids_;
    std::unordered_map<std::string, std::int32_t> predicate_ids_;
    bool fixed_entities_ = false;
    bool fixed_predicates_ = false;
    std::vector<RawFact> raw_;
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        auto next = line.find('\t', pos);
        out.push_back(line.substr(pos, next - pos));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

inline std::string_view strip_cr(std::string_view s) {
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    return s;
}

template <class Int>
std::optional<Int> parse_int(std::string_view s) {
    Int v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::ifstream open_for_read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    return in;
}

}  // namespace detail

/// Reads a two-column `id \t name` table. Ids must be exactly 0..n-1 in any order.
inline std::vector<std::string> load_name_table(const std::filesystem::path& path) {
    auto in = detail::open_for_read(path);
    std::map<std::int64_t, std::string> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto view = detail::strip_cr(line);
        if (view.empty()) continue;
        auto cols = detail::split_tabs(view);
        if (cols.size() != 2) throw ParseError(path.string() + ": expected 2 tab-separated columns", lineno);
        auto id = detail::parse_int<std::int64_t>(cols[0]);
        if (!id || *id < 0) throw ParseError(path.string() + ": id must be a non-negative integer", lineno);
        if (!rows.emplace(*id, std::string(cols[1])).second) {
            throw ParseError(path.string() + ": duplicate id " + std::to_string(*id), lineno);
        }
    }
    std::vector<std::string> names;
    names.reserve(rows.size());
    for (auto& [id, name] : rows) {
        if (id != static_cast<std::int64_t>(names.size())) {
            throw VocabularyError(path.string() + ": ids are not contiguous from 0 (missing " +
                                  std::to_string(names.size()) + ")");
        }
        names.push_back(std::move(name));
    }
    return names;
}

struct KgPaths {
    std::filesystem::path facts;
    std::optional<std::filesystem::path> entities;
    std::optional<std::filesystem::path> predicates;
};

/// Loads a fact file of `subject \t predicate \t object \t start_year \t end_year`
/// lines. With name tables, ids come from the tables and every name in the fact
/// file must resolve; without them, ids are assigned by first appearance.
inline TemporalKG load_kg(const KgPaths& paths) {
    KgBuilder builder;
    if (paths.entities) builder.set_entity_table(load_name_table(*paths.entities));
    if (paths.predicates) builder.set_predicate_table(load_name_table(*paths.predicates));

    auto in = detail::open_for_read(paths.facts);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto view = detail::strip_cr(line);
        if (view.empty()) continue;
        auto cols = detail::split_tabs(view);
        if (cols.size() != 5) {
            throw ParseError(paths.facts.string() + ": expected 5 tab-separated columns, got " +
                                 std::to_string(cols.size()),
                             lineno);
        }
        auto start = detail::parse_int<int>(cols[3]);
        auto end = detail::parse_int<int>(cols[4]);
        if (!start || !end) throw ParseError(paths.facts.string() + ": year is not an integer", lineno);
        if (*start > *end) throw ParseError(paths.facts.string() + ": start year after end year", lineno);
        try {
            builder.add(std::string(cols[0]), std::string(cols[1]), std::string(cols[2]), *start, *end);
        } catch (const VocabularyError& e) {
            throw VocabularyError(paths.facts.string() + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return std::move(builder).build();
}

inline TemporalKG load_kg(const std::filesystem::path& facts) { return load_kg(KgPaths{facts, {}, {}}); }

/// Writes the fact file and both name tables; load_kg on the result rebuilds
/// an identical graph.
inline void save_kg(const TemporalKG& kg, const KgPaths& paths) {
    std::ofstream facts(paths.facts);
    if (!facts) throw InputError("cannot write " + paths.facts.string());
    for (const auto& f : kg.facts()) {
        facts << kg.entity_name(f.subject) << '\t' << kg.predicate_name(f.predicate) << '\t'
              << kg.entity_name(f.object) << '\t' << kg.year(f.start) << '\t' << kg.year(f.end) << '\n';
    }
    auto write_table = [](const std::filesystem::path& p, const std::vector<std::string>& names) {
        std::ofstream out(p);
        if (!out) throw InputError("cannot write " + p.string());
        for (std::size_t i = 0; i < names.size(); ++i) out << i << '\t' << names[i] << '\n';
    };
    if (paths.entities) write_table(*paths.entities, kg.entity_names());
    if (paths.predicates) write_table(*paths.predicates, kg.predicate_names());
}

/// "{subject} {predicate} {object} from {start} to {end}", or "... in {year}"
/// for a single-year interval.
inline std::string verbalize_fact(const TemporalFact& fact, const TemporalKG& kg) {
    std::string text = kg.entity_name(fact.subject);
    text += ' ';
    text += kg.predicate_name(fact.predicate);
    text += ' ';
    text += kg.entity_name(fact.object);
    const int start = kg.year(fact.start);
    const int end = kg.year(fact.end);
    if (start == end) {
        text += " in " + std::to_string(start);
    } else {
        text += " from " + std::to_string(start) + " to " + std::to_string(end);
    }
    return text;
}

/// Indices of all facts whose subject or object is in `entities`, in fact-list order.
inline std::vector<std::size_t> fact_indices_for_entities(const TemporalKG& kg, const std::set<EntityId>& entities) {
    std::vector<std::size_t> out;
    for (EntityId e : entities) {
        if (index_of(e) >= kg.entity_count()) {
            throw VocabularyError("entity id " + std::to_string(index_of(e)) + " out of range");
        }
        const auto& touching = kg.facts_touching(e);
        out.insert(out.end(), touching.begin(), touching.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

inline std::vector<TemporalFact> facts_for_entities(const TemporalKG& kg, const std::set<EntityId>& entities) {
    std::vector<TemporalFact> out;
    for (auto i : fact_indices_for_entities(kg, entities)) out.push_back(kg.fact(i));
    return out;
}

}  // namespace tma
