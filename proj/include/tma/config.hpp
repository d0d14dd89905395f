#pragma once

// The JSON run configuration. Sections: kg, encoder, fusion, training, eval,
// plus synthetic for generated benchmarks. Missing keys keep their defaults;
// unknown keys are a ConfigError.

#include "tma/errors.hpp"
#include "tma/harness/pipeline.hpp"
#include "tma/harness/synthetic.hpp"
#include "tma/model.hpp"
#include "tma/text_encoder.hpp"
#include "tma/tkg_embedding.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

namespace tma {

struct KgSection {
    std::string facts;
    std::string entities;
    std::string predicates;
    TkgTrainConfig train;
};

struct FusionSection {
    std::vector<AttentionKind> branches{kAllAttentions.begin(), kAllAttentions.end()};
    bool use_selector = true;
    bool adaptive_fusion = true;
    bool share_directions = false;
    std::size_t top_k = kDefaultTopK;
    std::size_t pool_cap = kDefaultPoolCap;
};

struct TrainingSection {
    std::string train_questions;
    std::string valid_questions;
    QaTrainConfig qa;
    std::uint64_t model_seed = 0;
};

struct EvalSection {
    std::string questions;
    std::size_t top_k = 10;
};

struct AppConfig {
    KgSection kg;
    EncoderConfig encoder;
    FusionSection fusion;
    TrainingSection training;
    EvalSection eval;
    SyntheticConfig synthetic;
    std::uint64_t synthetic_seed = 0;

    /// Model shape: widths come from the encoder and KG sections.
    ModelConfig model_config() const {
        ModelConfig m;
        m.text_dim = encoder.dim;
        m.kg_dim = kg.train.dim;
        m.branches = fusion.branches;
        m.use_selector = fusion.use_selector;
        m.adaptive_fusion = fusion.adaptive_fusion;
        m.share_directions = fusion.share_directions;
        m.top_k = fusion.top_k;
        m.pool_cap = fusion.pool_cap;
        return m;
    }

    /// Overrides every seed in the configuration.
    void set_seed(std::uint64_t seed) {
        kg.train.seed = seed;
        encoder.seed = seed;
        training.qa.seed = seed;
        training.model_seed = seed;
        synthetic_seed = seed;
    }
};

namespace detail {

class SectionReader {
public:
    SectionReader(const nlohmann::json& doc, std::string section) : section_(std::move(section)) {
        if (doc.contains(section_)) {
            node_ = &doc.at(section_);
            if (!node_->is_object()) throw ConfigError("config section '" + section_ + "' must be an object");
        }
    }

    template <class T>
    void get(const char* key, T& into) {
        seen_.insert(key);
        if (!node_ || !node_->contains(key)) return;
        try {
            into = node_->at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config " + section_ + "." + key + ": " + e.what());
        }
    }

    bool has(const char* key) const { return node_ && node_->contains(key); }

    void finish() const {
        if (!node_) return;
        for (const auto& [key, value] : node_->items()) {
            if (!seen_.count(key)) throw ConfigError("config: unknown key " + section_ + "." + key);
        }
    }

private:
    std::string section_;
    const nlohmann::json* node_ = nullptr;
    std::set<std::string> seen_;
};

}  // namespace detail

inline AppConfig config_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    static const std::set<std::string> sections{"kg", "encoder", "fusion", "training", "eval", "synthetic"};
    for (const auto& [key, value] : doc.items()) {
        if (!sections.count(key)) throw ConfigError("config: unknown section '" + key + "'");
    }
    AppConfig c;

    detail::SectionReader kg(doc, "kg");
    kg.get("facts", c.kg.facts);
    kg.get("entities", c.kg.entities);
    kg.get("predicates", c.kg.predicates);
    kg.get("dim", c.kg.train.dim);
    kg.get("epochs", c.kg.train.epochs);
    kg.get("learning_rate", c.kg.train.learning_rate);
    kg.get("batch_size", c.kg.train.batch_size);
    kg.get("l2", c.kg.train.l2);
    kg.get("init_scale", c.kg.train.init_scale);
    kg.get("seed", c.kg.train.seed);
    kg.finish();

    detail::SectionReader enc(doc, "encoder");
    enc.get("backend", c.encoder.backend);
    enc.get("model", c.encoder.model);
    enc.get("endpoint", c.encoder.endpoint);
    if (c.encoder.backend == "pretrained") c.encoder.dim = 768;
    enc.get("dim", c.encoder.dim);
    enc.get("seed", c.encoder.seed);
    enc.get("fine_tune", c.encoder.fine_tune);
    enc.finish();

    detail::SectionReader fusion(doc, "fusion");
    std::vector<std::string> branch_names;
    fusion.get("branches", branch_names);
    if (fusion.has("branches")) {
        c.fusion.branches.clear();
        for (const auto& name : branch_names) {
            auto kind = parse_attention(name);
            if (!kind) throw ConfigError("config fusion.branches: unknown attention '" + name + "'");
            c.fusion.branches.push_back(*kind);
        }
        if (c.fusion.branches.empty()) throw ConfigError("config fusion.branches must not be empty");
    }
    fusion.get("use_selector", c.fusion.use_selector);
    fusion.get("adaptive_fusion", c.fusion.adaptive_fusion);
    fusion.get("share_directions", c.fusion.share_directions);
    fusion.get("top_k", c.fusion.top_k);
    fusion.get("pool_cap", c.fusion.pool_cap);
    fusion.finish();

    detail::SectionReader tr(doc, "training");
    tr.get("train_questions", c.training.train_questions);
    tr.get("valid_questions", c.training.valid_questions);
    tr.get("epochs", c.training.qa.epochs);
    tr.get("learning_rate", c.training.qa.learning_rate);
    tr.get("batch_size", c.training.qa.batch_size);
    tr.get("patience", c.training.qa.patience);
    tr.get("seed", c.training.qa.seed);
    tr.get("model_seed", c.training.model_seed);
    tr.get("finetune_kg", c.training.qa.finetune_kg);
    tr.finish();

    detail::SectionReader ev(doc, "eval");
    ev.get("questions", c.eval.questions);
    ev.get("top_k", c.eval.top_k);
    ev.finish();

    detail::SectionReader syn(doc, "synthetic");
    syn.get("num_entities", c.synthetic.num_entities);
    syn.get("num_predicates", c.synthetic.num_predicates);
    syn.get("first_year", c.synthetic.first_year);
    syn.get("num_years", c.synthetic.num_years);
    syn.get("num_offices", c.synthetic.num_offices);
    syn.get("predicates_per_office", c.synthetic.predicates_per_office);
    syn.get("holders_per_timeline", c.synthetic.holders_per_timeline);
    syn.get("questions_per_category", c.synthetic.questions_per_category);
    syn.get("train_fraction", c.synthetic.train_fraction);
    syn.get("valid_fraction", c.synthetic.valid_fraction);
    syn.get("seed", c.synthetic_seed);
    syn.finish();

    if (c.encoder.dim <= 0) throw ConfigError("config encoder.dim must be positive");
    if (c.kg.train.dim <= 0) throw ConfigError("config kg.dim must be positive");
    return c;
}

inline nlohmann::json config_to_json(const AppConfig& c) {
    nlohmann::json j;
    j["kg"] = {{"facts", c.kg.facts},
               {"entities", c.kg.entities},
               {"predicates", c.kg.predicates},
               {"dim", c.kg.train.dim},
               {"epochs", c.kg.train.epochs},
               {"learning_rate", c.kg.train.learning_rate},
               {"batch_size", c.kg.train.batch_size},
               {"l2", c.kg.train.l2},
               {"init_scale", c.kg.train.init_scale},
               {"seed", c.kg.train.seed}};
    j["encoder"] = {{"backend", c.encoder.backend}, {"model", c.encoder.model},
                    {"endpoint", c.encoder.endpoint}, {"dim", c.encoder.dim},
                    {"seed", c.encoder.seed},       {"fine_tune", c.encoder.fine_tune}};
    nlohmann::json branches = nlohmann::json::array();
    for (auto k : c.fusion.branches) branches.push_back(std::string(attention_name(k)));
    j["fusion"] = {{"branches", branches},
                   {"use_selector", c.fusion.use_selector},
                   {"adaptive_fusion", c.fusion.adaptive_fusion},
                   {"share_directions", c.fusion.share_directions},
                   {"top_k", c.fusion.top_k},
                   {"pool_cap", c.fusion.pool_cap}};
    j["training"] = {{"train_questions", c.training.train_questions},
                     {"valid_questions", c.training.valid_questions},
                     {"epochs", c.training.qa.epochs},
                     {"learning_rate", c.training.qa.learning_rate},
                     {"batch_size", c.training.qa.batch_size},
                     {"patience", c.training.qa.patience},
                     {"seed", c.training.qa.seed},
                     {"model_seed", c.training.model_seed},
                     {"finetune_kg", c.training.qa.finetune_kg}};
    j["eval"] = {{"questions", c.eval.questions}, {"top_k", c.eval.top_k}};
    j["synthetic"] = {{"num_entities", c.synthetic.num_entities},
                      {"num_predicates", c.synthetic.num_predicates},
                      {"first_year", c.synthetic.first_year},
                      {"num_years", c.synthetic.num_years},
                      {"num_offices", c.synthetic.num_offices},
                      {"predicates_per_office", c.synthetic.predicates_per_office},
                      {"holders_per_timeline", c.synthetic.holders_per_timeline},
                      {"questions_per_category", c.synthetic.questions_per_category},
                      {"train_fraction", c.synthetic.train_fraction},
                      {"valid_fraction", c.synthetic.valid_fraction},
                      {"seed", c.synthetic_seed}};
    return j;
}

inline AppConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(doc);
}

}  // namespace tma
