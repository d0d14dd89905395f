#pragma once

// Hits@k and the report layout: overall, by question type (complex/simple),
// by answer type (entity/time) and by reasoning category.

#include "tma/answer_head.hpp"

#include <json.hpp>

#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace tma {

/// 1 iff rank <= k.
inline int hits_at_k(std::size_t rank_of_first_gold, std::size_t k) {
    if (rank_of_first_gold < 1) throw InputError("hits_at_k: rank must be >= 1");
    return rank_of_first_gold <= k ? 1 : 0;
}

/// Mean of hits_at_k over a list of ranks.
inline double mean_hits_at_k(const std::vector<std::size_t>& ranks, std::size_t k) {
    if (ranks.empty()) return 0.0;
    double sum = 0.0;
    for (auto r : ranks) sum += hits_at_k(r, k);
    return sum / static_cast<double>(ranks.size());
}

struct MetricCell {
    std::size_t count = 0;
    double hits1_sum = 0.0;
    double hits10_sum = 0.0;

    bool empty() const noexcept { return count == 0; }
    double hits1() const { return empty() ? std::nan("") : hits1_sum / static_cast<double>(count); }
    double hits10() const { return empty() ? std::nan("") : hits10_sum / static_cast<double>(count); }

    void add(std::size_t rank) {
        ++count;
        hits1_sum += hits_at_k(rank, 1);
        hits10_sum += hits_at_k(rank, 10);
    }
};

struct MetricsReport {
    MetricCell overall;
    std::map<std::string, MetricCell> question_type;  // complex, simple
    std::map<std::string, MetricCell> answer_type;    // entity, time
    std::map<std::string, MetricCell> category;       // the five reasoning categories

    MetricsReport() {
        question_type["complex"];
        question_type["simple"];
        answer_type["entity"];
        answer_type["time"];
        for (auto c : kAllCategories) category[std::string(category_name(c))];
    }

    void add(QuestionCategory c, AnswerType a, std::size_t rank) {
        overall.add(rank);
        question_type[is_complex(c) ? "complex" : "simple"].add(rank);
        answer_type[std::string(answer_type_name(a))].add(rank);
        category[std::string(category_name(c))].add(rank);
    }

    nlohmann::json to_json() const {
        auto cell = [](const MetricCell& c) {
            nlohmann::json j;
            j["count"] = c.count;
            j["hits@1"] = c.empty() ? nlohmann::json(nullptr) : nlohmann::json(c.hits1());
            j["hits@10"] = c.empty() ? nlohmann::json(nullptr) : nlohmann::json(c.hits10());
            return j;
        };
        nlohmann::json j;
        j["overall"] = cell(overall);
        for (const auto& [k, v] : question_type) j["question_type"][k] = cell(v);
        for (const auto& [k, v] : answer_type) j["answer_type"][k] = cell(v);
        for (const auto& [k, v] : category) j["category"][k] = cell(v);
        return j;
    }

    /// Fixed-width table; empty cells print as "-".
    std::string to_table() const {
        std::ostringstream out;
        auto fmt = [](double v) {
            std::ostringstream s;
            if (std::isnan(v)) {
                s << std::setw(8) << "-";
            } else {
                s << std::setw(8) << std::fixed << std::setprecision(3) << v;
            }
            return s.str();
        };
        auto row = [&](const std::string& label, const MetricCell& c) {
            out << std::left << std::setw(16) << label << std::right << std::setw(7) << c.count << fmt(c.hits1())
                << fmt(c.hits10()) << '\n';
        };
        out << std::left << std::setw(16) << "cell" << std::right << std::setw(7) << "n" << std::setw(8) << "H@1"
            << std::setw(8) << "H@10" << '\n';
        row("overall", overall);
        for (const char* k : {"complex", "simple"}) row(k, question_type.at(k));
        for (const char* k : {"entity", "time"}) row(k, answer_type.at(k));
        for (auto c : kAllCategories) row(std::string(category_name(c)), category.at(std::string(category_name(c))));
        return out.str();
    }
};

/// Weighted mean of a partition's cells for one metric.
inline double partition_mean(const std::map<std::string, MetricCell>& cells, bool hits10) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [name, c] : cells) {
        if (c.empty()) continue;
        sum += static_cast<double>(c.count) * (hits10 ? c.hits10() : c.hits1());
        n += c.count;
    }
    return n == 0 ? std::nan("") : sum / static_cast<double>(n);
}

/// Anything that carries a category, answer type and gold set.
template <class Question>
concept EvaluableQuestion = requires(const Question& q) {
    q.category;
    q.answer_type;
    q.gold;
};

/// Scores every question with `scorer(question) -> ScoreVector` and
/// aggregates best-gold ranks.
template <EvaluableQuestion Question, class Scorer>
MetricsReport evaluate(Scorer&& scorer, const std::vector<Question>& questions,
                       std::vector<std::size_t>* ranks = nullptr) {
    MetricsReport report;
    for (const auto& q : questions) {
        const ScoreVector scores = scorer(q);
        const std::size_t rank = best_gold_rank(scores, q.gold);
        report.add(q.category, q.answer_type, rank);
        if (ranks) ranks->push_back(rank);
    }
    return report;
}

}  // namespace tma
