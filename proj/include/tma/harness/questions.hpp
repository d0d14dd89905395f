#pragma once

// Question datasets in a CronQuestions-style JSON layout:
//
//   [{"id": "q1", "question": "who was chair of office03 in 2004",
//     "entities": ["office03"], "times": [2004], "answers": ["person07"],
//     "answer_type": "entity", "type": "simple_entity"}, ...]
//
// Entity answers are names, time answers are years.

#include "tma/answer_head.hpp"
#include "tma/errors.hpp"
#include "tma/kg_store.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace tma {

struct QuestionInstance {
    std::string id;
    std::string text;
    QuestionAnnotations annotations;
};

struct RecordError {
    std::size_t index = 0;
    std::string id;
    std::string message;
};

struct LoadedQuestions {
    std::vector<QuestionInstance> questions;
    std::vector<RecordError> errors;
};

namespace detail {

inline AnswerRef resolve_answer(const nlohmann::json& a, AnswerType type, const TemporalKG& kg) {
    if (type == AnswerType::Entity) {
        if (!a.is_string()) throw VocabularyError("entity answer must be a name");
        auto e = kg.find_entity(a.get<std::string>());
        if (!e) throw VocabularyError("unknown entity answer '" + a.get<std::string>() + "'");
        return {AnswerType::Entity, static_cast<std::int32_t>(index_of(*e))};
    }
    int year = 0;
    if (a.is_number_integer()) {
        year = a.get<int>();
    } else if (a.is_string()) {
        auto parsed = parse_int<int>(a.get<std::string>());
        if (!parsed) throw VocabularyError("time answer '" + a.get<std::string>() + "' is not a year");
        year = *parsed;
    } else {
        throw VocabularyError("time answer must be a year");
    }
    auto t = kg.find_year(year);
    if (!t) throw VocabularyError("unknown timestamp " + std::to_string(year));
    return {AnswerType::Time, static_cast<std::int32_t>(index_of(*t))};
}

inline QuestionInstance parse_question(const nlohmann::json& r, std::size_t index, const TemporalKG& kg) {
    QuestionInstance q;
    q.id = r.contains("id") ? r.at("id").get<std::string>() : std::to_string(index);
    q.text = r.at("question").get<std::string>();
    auto& ann = q.annotations;

    const auto type = r.at("type").get<std::string>();
    auto category = parse_category(type);
    if (!category) throw VocabularyError("unknown question type '" + type + "'");
    ann.category = *category;

    const auto answer_type = r.at("answer_type").get<std::string>();
    if (answer_type == "entity") {
        ann.answer_type = AnswerType::Entity;
    } else if (answer_type == "time") {
        ann.answer_type = AnswerType::Time;
    } else {
        throw VocabularyError("unknown answer type '" + answer_type + "'");
    }

    for (const auto& name : r.value("entities", nlohmann::json::array())) {
        auto e = kg.find_entity(name.get<std::string>());
        if (!e) throw VocabularyError("unknown entity '" + name.get<std::string>() + "'");
        ann.entities.push_back(*e);
    }
    ann.assign_roles();
    const auto times = r.value("times", nlohmann::json::array());
    if (!times.empty()) {
        const auto& first = times.front();
        const int year = first.is_string() ? parse_int<int>(first.get<std::string>()).value_or(-1) : first.get<int>();
        auto t = kg.find_year(year);
        if (!t) throw VocabularyError("unknown timestamp " + first.dump());
        ann.time = *t;
    }

    for (const auto& a : r.at("answers")) ann.gold.push_back(resolve_answer(a, ann.answer_type, kg));
    if (ann.gold.empty()) throw VocabularyError("record has no answers");
    return q;
}

}  // namespace detail

/// Parses a question file. Records that fail to resolve against `kg` are
/// reported in `errors` and skipped; malformed JSON is a hard ParseError.
inline LoadedQuestions parse_questions(const std::string& text, const TemporalKG& kg) {
    LoadedQuestions out;
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) return out;
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed question JSON: ") + e.what());
    }
    if (!doc.is_array()) throw ParseError("question file must hold a JSON array");
    for (std::size_t i = 0; i < doc.size(); ++i) {
        try {
            out.questions.push_back(detail::parse_question(doc[i], i, kg));
        } catch (const VocabularyError& e) {
            out.errors.push_back({i, doc[i].value("id", std::to_string(i)), e.what()});
        } catch (const nlohmann::json::exception& e) {
            out.errors.push_back({i, std::to_string(i), e.what()});
        }
    }
    return out;
}

inline LoadedQuestions load_questions(const std::filesystem::path& path, const TemporalKG& kg) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_questions(text, kg);
}

inline nlohmann::json question_to_json(const QuestionInstance& q, const TemporalKG& kg) {
    const auto& ann = q.annotations;
    nlohmann::json r;
    r["id"] = q.id;
    r["question"] = q.text;
    r["entities"] = nlohmann::json::array();
    for (auto e : ann.entities) r["entities"].push_back(kg.entity_name(e));
    r["times"] = nlohmann::json::array();
    if (ann.time) r["times"].push_back(kg.year(*ann.time));
    r["answers"] = nlohmann::json::array();
    for (const auto& a : ann.gold) {
        if (a.type == AnswerType::Entity) {
            r["answers"].push_back(kg.entity_name(EntityId{a.id}));
        } else {
            r["answers"].push_back(kg.year(TimeId{a.id}));
        }
    }
    r["answer_type"] = std::string(answer_type_name(ann.answer_type));
    r["type"] = std::string(category_name(ann.category));
    return r;
}

inline void save_questions(const std::vector<QuestionInstance>& questions, const TemporalKG& kg,
                           const std::filesystem::path& path) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& q : questions) doc.push_back(question_to_json(q, kg));
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << doc.dump(1) << '\n';
}

}  // namespace tma
