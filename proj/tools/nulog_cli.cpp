// nulog: train a masked-token log parser, parse logs into templates,
// score parses against ground truth and run anomaly detection.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nulog/anomaly.hpp"
#include "nulog/csv.hpp"
#include "nulog/error.hpp"
#include "nulog/evaluation.hpp"
#include "nulog/extraction.hpp"
#include "nulog/ingest.hpp"
#include "nulog/log.hpp"
#include "nulog/persistence.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

/// `dir/name.ext` -> `dir/name<suffix>`
fs::path sidecar(const fs::path& path, const std::string& suffix) {
    auto out = path;
    out.replace_extension();
    out += suffix;
    return out;
}

std::ofstream open_output(const fs::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw nulog::IoError("cannot open '" + path.string() + "' for writing");
    }
    return out;
}

void finish(std::ofstream& out, const fs::path& path) {
    out.close();
    if (!out) {
        throw nulog::IoError("failed writing '" + path.string() + "'");
    }
}

void write_json(const fs::path& path, const json& doc) {
    auto out = open_output(path);
    out << doc.dump(2) << '\n';
    finish(out, path);
}

json to_json(const nulog::DatasetConfig& c) {
    json j{{"name", c.name}, {"tokenization_filter", c.tokenization_filter}, {"epochs", c.epochs}, {"epsilon", c.epsilon}};
    if (c.frame_length_override) {
        j["frame_length_override"] = *c.frame_length_override;
    }
    return j;
}

nulog::DatasetConfig dataset_config_from_json(const json& j) {
    nulog::DatasetConfig c;
    try {
        c.name = j.at("name").get<std::string>();
        c.tokenization_filter = j.at("tokenization_filter").get<std::string>();
        c.epochs = j.at("epochs").get<int>();
        c.epsilon = j.at("epsilon").get<int>();
        if (j.contains("frame_length_override")) {
            c.frame_length_override = j.at("frame_length_override").get<int>();
        }
    } catch (const json::exception& e) {
        throw nulog::ConfigError(std::string("manifest dataset_config is incomplete: ") + e.what());
    }
    c.validate();
    return c;
}

json to_json(const nulog::ModelConfig& c) {
    return json{{"d", c.d},
                {"heads", c.heads},
                {"ffn_hidden", c.ffn_hidden},
                {"blocks", c.blocks},
                {"frame_length", c.frame_length},
                {"vocab_size", c.vocab_size},
                {"epochs", c.epochs},
                {"batch_size", c.batch_size},
                {"seed", c.seed},
                {"epsilon", c.epsilon},
                {"learning_rate", c.learning_rate}};
}

json to_json(const nulog::DetectionMetrics& m) {
    return json{{"accuracy", m.accuracy},         {"precision", m.precision},           {"recall", m.recall},
                {"f1", m.f1},                     {"true_positive", m.true_positive},   {"false_positive", m.false_positive},
                {"true_negative", m.true_negative}, {"false_negative", m.false_negative}};
}

/// Options shared by every command that trains a model.
struct ModelOptions {
    int d = 256;
    int heads = 4;
    int ffn_hidden = 512;
    int blocks = 1;
    int batch_size = 32;
    double learning_rate = 1e-3;
    std::optional<std::uint32_t> seed;

    void add_to(CLI::App& app) {
        app.add_option("--d", d, "Embedding width")->capture_default_str()->check(CLI::PositiveNumber);
        app.add_option("--heads", heads, "Attention heads (must divide --d)")->capture_default_str()->check(CLI::PositiveNumber);
        app.add_option("--ffn-hidden", ffn_hidden, "Feed-forward hidden width")->capture_default_str()->check(CLI::PositiveNumber);
        app.add_option("--blocks", blocks, "Encoder blocks")->capture_default_str()->check(CLI::PositiveNumber);
        app.add_option("--batch-size", batch_size, "Messages per optimizer step")->capture_default_str()->check(CLI::PositiveNumber);
        app.add_option("--learning-rate", learning_rate, "Adam step size")->capture_default_str()->check(CLI::PositiveNumber);
        app.add_option("--seed", seed, "Random seed (default: $NULOG_SEED, else 7)");
    }

    std::uint32_t resolved_seed() const {
        if (seed) {
            return *seed;
        }
        if (const char* env = std::getenv("NULOG_SEED"); env && *env) {
            try {
                std::size_t used = 0;
                const auto v = std::stoul(env, &used);
                if (used == std::string_view(env).size() && v <= 0xFFFFFFFFul) {
                    return static_cast<std::uint32_t>(v);
                }
            } catch (const std::exception&) {
            }
            throw nulog::ConfigError(std::string("NULOG_SEED is not an unsigned 32-bit integer: '") + env + "'");
        }
        return static_cast<std::uint32_t>(nulog::kDefaultSeed);
    }

    nulog::ModelConfig base() const {
        nulog::ModelConfig c;
        c.d = d;
        c.heads = heads;
        c.ffn_hidden = ffn_hidden;
        c.blocks = blocks;
        c.batch_size = batch_size;
        c.learning_rate = learning_rate;
        c.seed = resolved_seed();
        return c;
    }
};

/// --config FILE or --dataset NAME, the latter picking a shipped setting.
struct DatasetOptions {
    std::string config_path;
    std::string dataset;

    void add_to(CLI::App& app) {
        auto* cfg = app.add_option("--config", config_path, "Dataset config file (key = value lines)");
        app.add_option("--dataset", dataset, "Use the built-in settings of a benchmark system")->excludes(cfg);
    }

    bool given() const { return !config_path.empty() || !dataset.empty(); }

    nulog::DatasetConfig load() const {
        if (!config_path.empty()) {
            return nulog::load_config(config_path);
        }
        if (!dataset.empty()) {
            auto c = nulog::builtin_config(dataset);
            if (!c) {
                std::string known;
                for (const auto& n : nulog::builtin_dataset_names()) {
                    known += (known.empty() ? "" : ", ") + n;
                }
                throw nulog::ConfigError("unknown dataset '" + dataset + "'; known: " + known);
            }
            return *c;
        }
        return nulog::DatasetConfig{};
    }
};

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string out_model;
    std::optional<int> epochs;
    std::optional<int> epsilon;
    DatasetOptions dataset;
    ModelOptions model;
};

int run_train(const TrainArgs& args) {
    auto config = args.dataset.load();
    if (args.epochs) config.epochs = *args.epochs;
    if (args.epsilon) config.epsilon = *args.epsilon;
    config.validate();
    const auto records = nulog::load_loghub_csv(args.data);
    nulog::log::info("loaded " + std::to_string(records.size()) + " records from " + args.data);

    nulog::TrainingReport report;
    const auto fitted = nulog::fit_parser(records, config, args.model.base(), &report);
    nulog::save_model(fitted.state, fitted.vocab, args.out_model);

    write_json(sidecar(args.out_model, ".manifest.json"),
               json{{"command", "train"},
                    {"version", kVersion},
                    {"inputs", {{"data", args.data}, {"config", args.dataset.config_path}, {"dataset", args.dataset.dataset}}},
                    {"seed", fitted.state.config.seed},
                    {"dataset_config", to_json(config)},
                    {"model_config", to_json(fitted.state.config)},
                    {"records", records.size()},
                    {"epoch_mean_loss", report.epoch_mean_loss},
                    {"outputs", {{"model", args.out_model}}}});
    std::cout << "model written to " << args.out_model << " (" << fitted.vocab.size() << " vocabulary entries, frame length "
              << fitted.state.config.frame_length << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct ParseArgs {
    std::string data;
    std::string model;
    std::string out;
    std::string templates;
    std::optional<int> epsilon;
    DatasetOptions dataset;
};

int run_parse(const ParseArgs& args) {
    const auto loaded = nulog::load_model(args.model);
    nulog::DatasetConfig config;
    if (args.dataset.given()) {
        config = args.dataset.load();
        config.epsilon = loaded.config.epsilon;
    } else {
        const auto manifest_path = sidecar(args.model, ".manifest.json");
        if (!fs::exists(manifest_path)) {
            throw nulog::ConfigError("no tokenization settings: pass --config/--dataset or keep '" +
                                     manifest_path.string() + "' next to the model");
        }
        try {
            config = dataset_config_from_json(json::parse(nulog::read_file(manifest_path)).at("dataset_config"));
        } catch (const json::exception& e) {
            throw nulog::ConfigError("cannot read manifest '" + manifest_path.string() + "': " + e.what());
        }
    }
    if (args.epsilon) config.epsilon = *args.epsilon;
    config.validate();

    const auto records = nulog::load_loghub_csv(args.data);
    nulog::ParseResult result;
    if (!records.empty()) {
        result = nulog::parse_corpus(records, loaded.state, loaded.vocab, config);
    }
    const fs::path out_path(args.out);
    const fs::path templates_path = args.templates.empty() ? sidecar(out_path, ".templates.csv") : fs::path(args.templates);
    {
        auto out = open_output(out_path);
        nulog::write_parsed_csv(out, result.messages);
        finish(out, out_path);
    }
    {
        auto out = open_output(templates_path);
        nulog::write_template_csv(out, result.store);
        finish(out, templates_path);
    }
    write_json(sidecar(out_path, ".manifest.json"),
               json{{"command", "parse"},
                    {"version", kVersion},
                    {"inputs", {{"data", args.data}, {"model", args.model}}},
                    {"dataset_config", to_json(config)},
                    {"epsilon", config.epsilon},
                    {"messages", result.messages.size()},
                    {"templates", result.store.size()},
                    {"outputs", {{"parsed", out_path.string()}, {"templates", templates_path.string()}}}});
    std::cout << result.messages.size() << " messages, " << result.store.size() << " templates -> " << out_path.string()
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string parsed;
    std::string truth;
    std::string out;
    std::string batch;
    std::string robustness;
    std::string name;
    DatasetOptions dataset;
};

nulog::EvaluationReport evaluate_files(const std::string& name, const std::string& parsed_path,
                                       const std::string& truth_path, const nulog::DatasetConfig& config) {
    const auto parsed = nulog::read_parsed_csv(nulog::read_file(parsed_path), parsed_path);
    const auto truth = nulog::load_loghub_csv(truth_path);
    return nulog::evaluate(name, parsed, truth, nulog::Tokenizer(config.tokenization_filter));
}

int run_eval(const EvalArgs& args) {
    std::vector<nulog::EvaluationReport> reports;
    json inputs = json::array();
    if (!args.batch.empty()) {
        // Batch list: dataset,parsed,truth[,config]; relative paths resolve
        // against the list's directory.
        const auto base = fs::path(args.batch).parent_path();
        auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
        const auto rows = nulog::csv::parse(nulog::read_file(args.batch));
        if (rows.empty() || rows[0].size() < 3 || rows[0][0] != "dataset" || rows[0][1] != "parsed" || rows[0][2] != "truth") {
            throw nulog::ConfigError(args.batch + ": header must start with dataset,parsed,truth");
        }
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const auto& row = rows[r];
            if (row.size() == 1 && row[0].empty()) continue;
            if (row.size() < 3) {
                throw nulog::ConfigError(args.batch + ":" + std::to_string(r + 1) + ": expected at least 3 fields");
            }
            nulog::DatasetConfig config;
            if (row.size() > 3 && !row[3].empty()) {
                config = nulog::load_config(resolve(row[3]));
            } else if (auto builtin = nulog::builtin_config(row[0])) {
                config = *builtin;
            }
            const auto parsed = resolve(row[1]).string();
            const auto truth = resolve(row[2]).string();
            reports.push_back(evaluate_files(row[0], parsed, truth, config));
            inputs.push_back({{"dataset", row[0]}, {"parsed", parsed}, {"truth", truth}});
        }
        if (reports.empty()) {
            throw nulog::ValidationError(args.batch + ": no datasets listed");
        }
    } else {
        if (args.parsed.empty() || args.truth.empty()) {
            throw nulog::ConfigError("eval needs --parsed and --truth, or --batch");
        }
        const auto config = args.dataset.load();
        const auto name = args.name.empty() ? config.name : args.name;
        reports.push_back(evaluate_files(name, args.parsed, args.truth, config));
        inputs.push_back({{"dataset", name}, {"parsed", args.parsed}, {"truth", args.truth}});
    }

    const fs::path out_path(args.out);
    {
        auto out = open_output(out_path);
        nulog::write_report_csv(out, reports);
        finish(out, out_path);
    }
    json outputs{{"report", out_path.string()}};
    if (reports.size() > 1 || !args.robustness.empty()) {
        const fs::path rob = args.robustness.empty() ? sidecar(out_path, ".robustness.csv") : fs::path(args.robustness);
        std::vector<std::pair<std::string, double>> pa, ed;
        for (const auto& r : reports) {
            pa.emplace_back(r.dataset, r.parsing_accuracy);
            ed.emplace_back(r.dataset, r.mean_edit_distance);
        }
        auto out = open_output(rob);
        nulog::write_robustness_csv(out, {{"PA", pa}, {"edit_distance", ed}});
        finish(out, rob);
        outputs["robustness"] = rob.string();
    }
    json scores = json::array();
    for (const auto& r : reports) {
        scores.push_back({{"dataset", r.dataset}, {"PA", r.parsing_accuracy}, {"mean_edit_distance", r.mean_edit_distance}});
        std::cout << r.dataset << ": PA " << r.parsing_accuracy << ", mean edit distance " << r.mean_edit_distance << "\n";
    }
    write_json(sidecar(out_path, ".manifest.json"),
               json{{"command", "eval"}, {"version", kVersion}, {"inputs", inputs}, {"scores", scores}, {"outputs", outputs}});
    return 0;
}

// ---------------------------------------------------------------------------

struct DetectArgs {
    std::string data;
    std::string out;
    std::string mode = "unsupervised";
    double fraction = 1.0;
    int epsilon = 50;
    double delta = 0.5;
    double train_fraction = 0.8;
    int epochs = 3;
    int finetune_epochs = 2;
    bool normal_only = false;
    std::string filter;
    std::vector<double> sweep;
    ModelOptions model;
};

int run_detect(const DetectArgs& args) {
    nulog::AnomalyConfig config;
    config.epsilon = args.epsilon;
    config.delta = args.delta;
    config.train_fraction = args.train_fraction;
    config.epochs_unsupervised = args.epochs;
    config.epochs_finetune = args.finetune_epochs;
    config.train_on_normal_only = args.normal_only;
    if (!args.filter.empty()) config.tokenization_filter = args.filter;
    config.model = args.model.base();
    config.validate();

    const auto records = nulog::load_labeled_bgl(args.data, args.fraction);
    nulog::log::info("loaded " + std::to_string(records.size()) + " labelled lines from " + args.data);
    const auto result = args.mode == "supervised" ? nulog::run_supervised_study(records, config)
                                                  : nulog::run_unsupervised_study(records, config);

    const fs::path out_path(args.out);
    const auto metrics_path = sidecar(out_path, ".metrics.csv");
    {
        auto out = open_output(out_path);
        nulog::write_verdicts_csv(out, result.verdicts);
        finish(out, out_path);
    }
    {
        auto out = open_output(metrics_path);
        nulog::write_metrics_csv(out, result.metrics);
        finish(out, metrics_path);
    }
    json outputs{{"verdicts", out_path.string()}, {"metrics", metrics_path.string()}};
    if (!args.sweep.empty()) {
        if (args.mode != "unsupervised") {
            throw nulog::ConfigError("--sweep applies to unsupervised mode only");
        }
        const auto sweep_path = sidecar(out_path, ".sweep.csv");
        auto out = open_output(sweep_path);
        nulog::write_sweep_csv(out, nulog::sweep_delta(result.verdicts, args.sweep));
        finish(out, sweep_path);
        outputs["sweep"] = sweep_path.string();
    }
    write_json(sidecar(out_path, ".manifest.json"),
               json{{"command", "detect"},
                    {"version", kVersion},
                    {"mode", args.mode},
                    {"inputs", {{"data", args.data}, {"fraction", args.fraction}}},
                    {"seed", config.model.seed},
                    {"settings",
                     {{"epsilon", config.epsilon},
                      {"delta", config.delta},
                      {"train_fraction", config.train_fraction},
                      {"epochs", config.epochs_unsupervised},
                      {"finetune_epochs", config.epochs_finetune},
                      {"train_on_normal_only", config.train_on_normal_only},
                      {"tokenization_filter", config.tokenization_filter}}},
                    {"model_config", to_json(config.model)},
                    {"train_size", result.train_size},
                    {"test_size", result.test_size},
                    {"metrics", to_json(result.metrics)},
                    {"outputs", outputs}});
    const auto& m = result.metrics;
    std::cout << args.mode << ": accuracy " << m.accuracy << ", precision " << m.precision << ", recall " << m.recall
              << ", F1 " << m.f1 << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Masked-token log parsing and anomaly detection"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    bool quiet = false, verbose = false;
    app.add_flag("-q,--quiet", quiet, "Only print warnings");
    app.add_flag("-v,--verbose", verbose, "Print debug messages");

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train a parser on a structured log CSV");
    train_cmd->add_option("--data", train.data, "Log CSV with a Content column")->required();
    train_cmd->add_option("--out-model", train.out_model, "Model archive to write")->required();
    train_cmd->add_option("--epochs", train.epochs, "Override the config's epoch count");
    train_cmd->add_option("--epsilon", train.epsilon, "Override the config's top-rank cutoff");
    train.dataset.add_to(*train_cmd);
    train.model.add_to(*train_cmd);

    ParseArgs parse;
    auto* parse_cmd = app.add_subcommand("parse", "Turn log messages into templates with a trained model");
    parse_cmd->add_option("--data", parse.data, "Log CSV with a Content column")->required();
    parse_cmd->add_option("--model", parse.model, "Model archive from `train`")->required();
    parse_cmd->add_option("--out", parse.out, "Parsed-message CSV to write")->required();
    parse_cmd->add_option("--templates", parse.templates, "Template list CSV (default: <out>.templates.csv)");
    parse_cmd->add_option("--epsilon", parse.epsilon, "Top-rank cutoff (default: the model's)");
    parse.dataset.add_to(*parse_cmd);

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "Score parsed templates against ground truth");
    eval_cmd->add_option("--parsed", eval.parsed, "Parsed-message CSV from `parse`");
    eval_cmd->add_option("--truth", eval.truth, "Structured CSV with EventId/EventTemplate");
    eval_cmd->add_option("--batch", eval.batch, "CSV listing dataset,parsed,truth[,config] rows");
    eval_cmd->add_option("--out", eval.out, "Report CSV to write")->required();
    eval_cmd->add_option("--robustness", eval.robustness, "Five-number summary CSV (default: <out>.robustness.csv)");
    eval_cmd->add_option("--name", eval.name, "Dataset name for the report");
    eval.dataset.add_to(*eval_cmd);

    DetectArgs detect;
    auto* detect_cmd = app.add_subcommand("detect", "Anomaly detection on labelled BGL-style logs");
    detect_cmd->add_option("--data", detect.data, "Raw labelled log (alert field first)")->required();
    detect_cmd->add_option("--out", detect.out, "Per-message verdict CSV to write")->required();
    detect_cmd->add_option("--mode", detect.mode, "unsupervised or supervised")
        ->capture_default_str()
        ->check(CLI::IsMember({"unsupervised", "supervised"}));
    detect_cmd->add_option("--fraction", detect.fraction, "Leading share of lines to use")->capture_default_str();
    detect_cmd->add_option("--epsilon", detect.epsilon, "Top-rank cutoff")->capture_default_str();
    detect_cmd->add_option("--delta", detect.delta, "Anomalous-token share above which a line is flagged")->capture_default_str();
    detect_cmd->add_option("--train-fraction", detect.train_fraction, "Leading share used for training")->capture_default_str();
    detect_cmd->add_option("--epochs", detect.epochs, "Masked-token training epochs")->capture_default_str();
    detect_cmd->add_option("--finetune-epochs", detect.finetune_epochs, "Supervised fine-tuning epochs")->capture_default_str();
    detect_cmd->add_flag("--normal-only", detect.normal_only, "Train only on lines labelled normal");
    detect_cmd->add_option("--filter", detect.filter, "Tokenization filter (default: the BGL setting)");
    detect_cmd->add_option("--sweep", detect.sweep, "Extra thresholds to score (writes <out>.sweep.csv)")->delimiter(',');
    detect.model.add_to(*detect_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        const auto* failing = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        std::cerr << failing->help();
        return nulog::exit_code(nulog::ErrorKind::config);
    }

    nulog::log::set_min_level(quiet ? nulog::log::Level::warn : verbose ? nulog::log::Level::debug : nulog::log::Level::info);
    try {
        if (train_cmd->parsed()) return run_train(train);
        if (parse_cmd->parsed()) return run_parse(parse);
        if (eval_cmd->parsed()) return run_eval(eval);
        if (detect_cmd->parsed()) return run_detect(detect);
    } catch (const nulog::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return nulog::exit_code(e.kind());
    } catch (const std::bad_alloc&) {
        std::cerr << "error: out of memory\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
