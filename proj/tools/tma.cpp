// tma command-line driver.

#include "tma/tma.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

using namespace tma;
using nlohmann::json;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string checkpoint;
    std::string out;
    std::string question;
    bool json_only = false;
    bool verbose = false;
};

AppConfig read_config(const Options& o) {
    AppConfig c = o.config.empty() ? AppConfig{} : load_config(o.config);
    if (o.seed) c.set_seed(*o.seed);
    return c;
}

/// Config snapshot stored in a checkpoint; --seed and --config are not applied.
AppConfig snapshot_config(const Archive& a) {
    if (!a.has_text("config")) throw ParseError("checkpoint has no config snapshot");
    return config_from_json(json::parse(a.text("config")));
}

TemporalKG read_kg(const AppConfig& c) {
    if (c.kg.facts.empty()) throw ConfigError("kg.facts is not set");
    KgPaths paths{c.kg.facts, std::nullopt, std::nullopt};
    if (!c.kg.entities.empty()) paths.entities = c.kg.entities;
    if (!c.kg.predicates.empty()) paths.predicates = c.kg.predicates;
    return load_kg(paths);
}

std::vector<QuestionInstance> read_questions(const std::string& path, const TemporalKG& kg, const char* role) {
    if (path.empty()) return {};
    auto loaded = load_questions(path, kg);
    for (const auto& e : loaded.errors) spdlog::warn("{} record {} ({}): {}", role, e.index, e.id, e.message);
    spdlog::info("{}: {} questions from {}, {} skipped", role, loaded.questions.size(), path, loaded.errors.size());
    return std::move(loaded.questions);
}

void require_checkpoint(const Options& o) {
    if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
}

void emit(const Options& o, const std::string& table, const json& report) {
    if (!o.json_only) std::cout << table;
    if (o.json_only) std::cout << report.dump(2) << '\n';
    if (!o.out.empty()) {
        std::ofstream f(o.out);
        if (!f) throw InputError("cannot write " + o.out);
        f << report.dump(2) << '\n';
    }
}

std::string answer_label(const AnswerRef& r, const TemporalKG& kg) {
    if (r.type == AnswerType::Time) return std::to_string(kg.year(TimeId{r.id}));
    return kg.entity_name(EntityId{r.id});
}

// ------------------------------------------------------------ subcommands

void generate_data(const Options& o) {
    if (o.out.empty()) throw ConfigError("--out DIR is required");
    AppConfig c = read_config(o);
    const auto data = generate_synthetic(c.synthetic, c.synthetic_seed);
    const std::filesystem::path dir = o.out;
    std::filesystem::create_directories(dir);
    save_kg(data.kg, {dir / "facts.tsv", dir / "entities.tsv", dir / "predicates.tsv"});
    save_questions(data.train, data.kg, dir / "train.json");
    save_questions(data.valid, data.kg, dir / "valid.json");
    save_questions(data.test, data.kg, dir / "test.json");

    c.kg.facts = (dir / "facts.tsv").string();
    c.kg.entities = (dir / "entities.tsv").string();
    c.kg.predicates = (dir / "predicates.tsv").string();
    c.training.train_questions = (dir / "train.json").string();
    c.training.valid_questions = (dir / "valid.json").string();
    c.eval.questions = (dir / "test.json").string();
    std::ofstream(dir / "config.json") << config_to_json(c).dump(2) << '\n';

    std::printf("%zu entities, %zu predicates, %zu years, %zu facts\n", data.kg.entity_count(),
                data.kg.predicate_count(), data.kg.time_count(), data.kg.fact_count());
    std::printf("questions: %zu train, %zu valid, %zu test\n", data.train.size(), data.valid.size(),
                data.test.size());
    std::printf("wrote %s\n", (dir / "config.json").c_str());
}

void train_kg(const Options& o) {
    require_checkpoint(o);
    const AppConfig c = read_config(o);
    const auto kg = read_kg(c);
    std::vector<double> curve;
    const auto tables = train_tkg(kg, c.kg.train, &curve);
    const double hits = object_hits_at_1(tables, kg);

    Archive a;
    put_tables(a, tables);
    a.put_text("config", config_to_json(c).dump());
    a.save(o.checkpoint);

    json report{{"facts", kg.fact_count()},
                {"entities", kg.entity_count()},
                {"timestamps", kg.time_count()},
                {"epochs", c.kg.train.epochs},
                {"final_loss", curve.empty() ? json(nullptr) : json(curve.back())},
                {"object_hits@1", hits},
                {"loss_curve", curve}};
    char table[256];
    std::snprintf(table, sizeof table, "facts %zu  epochs %d  final loss %.4f  object Hits@1 %.3f\ncheckpoint %s\n",
                  kg.fact_count(), c.kg.train.epochs, curve.empty() ? 0.0 : curve.back(), hits, o.checkpoint.c_str());
    emit(o, table, report);
}

struct Loaded {
    AppConfig config;
    TemporalKG kg;
    std::unique_ptr<TextEncoder> encoder;
    TkgTables tables;
};

/// KG, encoder and tables for a run. The KG width recorded with the tables wins.
Loaded load_for_training(const Options& o) {
    require_checkpoint(o);
    Loaded l;
    l.config = read_config(o);
    const auto a = Archive::load(o.checkpoint);
    l.tables = get_tables(a);
    l.config.kg.train.dim = static_cast<int>(l.tables.dim());
    l.kg = read_kg(l.config);
    if (l.tables.entity_count() != static_cast<Eigen::Index>(l.kg.entity_count()) ||
        l.tables.time_count() != static_cast<Eigen::Index>(l.kg.time_count())) {
        throw ShapeError("checkpoint tables do not match the knowledge graph");
    }
    l.encoder = make_encoder(l.config.encoder);
    return l;
}

json training_json(const QaTrainResult& r) {
    json curve = json::array();
    for (const auto& e : r.curve)
        curve.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"valid_hits@1", e.valid_hits1}});
    return {{"best_epoch", r.best_epoch},
            {"best_valid_hits@1", r.best_valid_hits1},
            {"stopped_early", r.stopped_early},
            {"curve", curve}};
}

void train_qa_cmd(const Options& o) {
    auto l = load_for_training(o);
    const auto mc = l.config.model_config();
    SpoIndex index(l.kg, *l.encoder);
    const auto train =
        prepare_questions(read_questions(l.config.training.train_questions, l.kg, "train"), *l.encoder, mc, index);
    const auto valid =
        prepare_questions(read_questions(l.config.training.valid_questions, l.kg, "valid"), *l.encoder, mc, index);
    if (train.empty()) throw ConfigError("training.train_questions yielded no questions");

    TmaModel model(mc, l.config.training.model_seed);
    QaTrainResult result;
    try {
        result = train_qa(model, l.tables, train, valid, l.config.training.qa);
    } catch (const DivergenceError& e) {
        model.params() = e.last_good;
        l.tables = e.last_good_tables;
        Archive a;
        put_tables(a, l.tables);
        put_model(a, model);
        a.put_text("config", config_to_json(l.config).dump());
        a.save(o.checkpoint + ".last_good");
        spdlog::error("training diverged; last good parameters saved to {}.last_good", o.checkpoint);
        throw;
    }

    Archive a;
    put_tables(a, l.tables);
    put_model(a, model);
    a.put_text("config", config_to_json(l.config).dump());
    a.save(o.checkpoint);

    const auto& eval_set = valid.empty() ? train : valid;
    const auto report = evaluate_model(model, eval_set, l.tables);
    json out{{"training", training_json(result)}, {"validation", report.to_json()}};
    std::string table = "best epoch " + std::to_string(result.best_epoch) + " of " +
                        std::to_string(result.curve.size()) + (result.stopped_early ? " (stopped early)" : "") +
                        "\n" + (valid.empty() ? "train" : "validation") + " metrics:\n" + report.to_table();
    emit(o, table, out);
}

struct Restored {
    AppConfig config;
    TemporalKG kg;
    std::unique_ptr<TextEncoder> encoder;
    TkgTables tables;
    std::unique_ptr<TmaModel> model;
};

/// Model and tables from a trained checkpoint. Shapes and the encoder come
/// from the snapshot; question paths may be overridden by --config.
Restored restore(const Options& o) {
    require_checkpoint(o);
    const auto a = Archive::load(o.checkpoint);
    Restored r;
    r.config = snapshot_config(a);
    if (!o.config.empty()) {
        const auto override = load_config(o.config);
        r.config.eval = override.eval;
        r.config.kg.facts = override.kg.facts;
        r.config.kg.entities = override.kg.entities;
        r.config.kg.predicates = override.kg.predicates;
    }
    r.tables = get_tables(a);
    r.kg = read_kg(r.config);
    r.encoder = make_encoder(r.config.encoder);
    r.model = std::make_unique<TmaModel>(r.config.model_config(), std::uint64_t{0});
    get_model(a, *r.model);
    return r;
}

void eval_cmd(const Options& o) {
    auto r = restore(o);
    const auto mc = r.config.model_config();
    SpoIndex index(r.kg, *r.encoder);
    const auto raw = read_questions(r.config.eval.questions, r.kg, "eval");
    if (raw.empty()) throw ConfigError("eval.questions yielded no questions");
    const auto questions = prepare_questions(raw, *r.encoder, mc, index);
    std::vector<std::size_t> ranks;
    const auto report = evaluate_model(*r.model, questions, r.tables, &ranks);

    json predictions = json::array();
    for (std::size_t i = 0; i < questions.size(); ++i) {
        json top = json::array();
        for (const auto& p : predict(r.model->scores(questions[i], r.tables), r.config.eval.top_k))
            top.push_back({{"answer", answer_label(p.ref, r.kg)}, {"score", p.score}});
        predictions.push_back({{"id", questions[i].id}, {"gold_rank", ranks[i]}, {"top", top}});
    }
    emit(o, report.to_table(), {{"metrics", report.to_json()}, {"predictions", predictions}});
}

void ablate_cmd(const Options& o) {
    auto l = load_for_training(o);
    const auto mc = l.config.model_config();
    SpoIndex index(l.kg, *l.encoder);
    auto prep = [&](const std::string& path, const char* role) {
        return prepare_questions(read_questions(path, l.kg, role), *l.encoder, mc, index);
    };
    const auto train = prep(l.config.training.train_questions, "train");
    const auto valid = prep(l.config.training.valid_questions, "valid");
    const auto test = prep(l.config.eval.questions, "eval");
    if (train.empty() || test.empty()) throw ConfigError("ablate needs train and eval questions");

    std::vector<Ablation> flags{Ablation::None};
    flags.insert(flags.end(), kStandardAblations.begin(), kStandardAblations.end());
    const auto runs = ablate(mc, flags, l.tables, train, valid, test, l.config.training.qa, l.config.training.model_seed);

    std::ostringstream table;
    table << "variant              H@1   H@10  complex H@1  simple H@1\n";
    json out = json::array();
    for (const auto& run : runs) {
        char line[160];
        std::snprintf(line, sizeof line, "%-18s %6.3f %6.3f %12.3f %11.3f\n", run.label.c_str(),
                      run.report.overall.hits1(), run.report.overall.hits10(),
                      run.report.question_type.at("complex").hits1(), run.report.question_type.at("simple").hits1());
        table << line;
        out.push_back({{"variant", run.label}, {"metrics", run.report.to_json()}, {"training", training_json(run.training)}});
    }
    emit(o, table.str(), out);
}

/// Ranked SPO list for one question; with a trained checkpoint also the gate
/// values and attention maps of the forward pass.
void select_spo(const Options& o) {
    if (o.question.empty()) throw ConfigError("--question ID is required");
    AppConfig c;
    std::optional<Restored> r;
    TemporalKG kg_storage;
    std::unique_ptr<TextEncoder> enc_storage;
    if (!o.checkpoint.empty()) {
        r = restore(o);
        c = r->config;
    } else {
        c = read_config(o);
        kg_storage = read_kg(c);
        enc_storage = make_encoder(c.encoder);
    }
    const TemporalKG& kg = r ? r->kg : kg_storage;
    const TextEncoder& encoder = r ? *r->encoder : *enc_storage;

    std::vector<QuestionInstance> pool;
    for (const auto* path : {&c.eval.questions, &c.training.train_questions, &c.training.valid_questions}) {
        auto qs = read_questions(*path, kg, "lookup");
        pool.insert(pool.end(), qs.begin(), qs.end());
    }
    const auto it = std::find_if(pool.begin(), pool.end(), [&](const auto& q) { return q.id == o.question; });
    if (it == pool.end()) throw InputError("question '" + o.question + "' not found");

    const auto mc = c.model_config();
    SpoIndex index(kg, encoder);
    const auto prepared = prepare_questions({*it}, encoder, mc, index).front();

    std::ostringstream table;
    table << it->text << "\n";
    json spos = json::array();
    for (std::size_t i = 0; i < prepared.spo_facts.size(); ++i) {
        const auto text = verbalize_fact(kg.fact(prepared.spo_facts[i]), kg);
        char line[256];
        std::snprintf(line, sizeof line, "%3zu  %8.4f  %s\n", i + 1, prepared.spo_scores[i], text.c_str());
        table << line;
        spos.push_back({{"rank", i + 1}, {"score", prepared.spo_scores[i]}, {"fact", text}});
    }
    json out{{"id", it->id}, {"question", it->text}, {"spos", spos}};

    if (r) {
        const auto fp = r->model->forward(prepared, r->tables);
        json answers = json::array();
        for (const auto& p : predict(fp.scores, c.eval.top_k))
            answers.push_back({{"answer", answer_label(p.ref, kg)}, {"score", p.score}});
        out["answers"] = answers;
        if (fp.fused) {
            out["gates"] = std::vector<double>(fp.fusion.gates.begin(), fp.fusion.gates.end());
            auto maps = [&](const DirectionCache& dir) {
                json by_branch;
                for (std::size_t b = 0; b < mc.branches.size(); ++b) {
                    json rows = json::array();
                    for (const auto& per_query : dir.attention) {
                        if (per_query.empty()) {
                            rows.push_back(nullptr);  // masked query row
                            continue;
                        }
                        const Vector& w = per_query[b].weights;
                        rows.push_back(std::vector<double>(w.begin(), w.end()));
                    }
                    by_branch[std::string(attention_name(mc.branches[b]))] = rows;
                }
                return by_branch;
            };
            out["attention"] = {{"question_to_spo", maps(fp.multiway.question_side)},
                                {"spo_to_question", maps(fp.multiway.spo_side)}};
            table << "mean gate " << fp.fusion.gates.mean() << "\n";
        }
        table << "top answers:";
        for (const auto& a : out["answers"]) table << " " << a["answer"].get<std::string>();
        table << "\n";
    }
    emit(o, table.str(), out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Temporal KG question answering with multiway fusion"};
    app.require_subcommand(1);
    Options o;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "JSON run configuration");
        sub->add_option("--seed", o.seed, "override every seed in the configuration");
        sub->add_option("--checkpoint", o.checkpoint, "checkpoint file");
        sub->add_option("--out", o.out, "JSON report path (generate-data: output directory)");
        sub->add_flag("--json", o.json_only, "print the JSON report instead of the table");
        sub->add_flag("-v,--verbose", o.verbose, "log progress");
    };
    std::vector<std::pair<CLI::App*, void (*)(const Options&)>> commands{
        {app.add_subcommand("generate-data", "write a synthetic KG, question splits and config"), generate_data},
        {app.add_subcommand("train-kg", "pre-train temporal KG embeddings"), train_kg},
        {app.add_subcommand("train-qa", "train the QA model on frozen or fine-tuned KG tables"), train_qa_cmd},
        {app.add_subcommand("eval", "evaluate a trained checkpoint"), eval_cmd},
        {app.add_subcommand("ablate", "train the full model and each ablation variant"), ablate_cmd},
        {app.add_subcommand("select-spo", "show the selected SPO facts, gates and attention for one question"),
         select_spo},
    };
    for (auto& [sub, fn] : commands) common(sub);
    commands[5].first->add_option("--question", o.question, "question id");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(o.verbose ? spdlog::level::info : spdlog::level::warn);
    try {
        for (auto& [sub, fn] : commands)
            if (sub->parsed()) fn(o);
    } catch (const tma::Error& e) {
        spdlog::error("{}", e.what());
        return 2;
    } catch (const std::exception& e) {
        spdlog::error("unexpected: {}", e.what());
        return 3;
    }
    return 0;
}
