#include "ctdgan/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "ctdgan/checkpoint.hpp"
#include "ctdgan/csv_io.hpp"
#include "ctdgan/error.hpp"
#include "ctdgan/evaluator.hpp"
#include "ctdgan/plot.hpp"
#include "ctdgan/sampler.hpp"
#include "ctdgan/trainer.hpp"

namespace ctdgan::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Raised by a subcommand to request exit status 1 with a message.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::shared_ptr<spdlog::logger> logger() {
    if (auto existing = spdlog::get("ctdgan")) return existing;
    auto created = spdlog::stderr_logger_mt("ctdgan");
    created->set_pattern("[%l] %v");
    return created;
}

/// Output paths must land in an existing directory.
const CLI::Validator kWritablePath(
    [](std::string& path) -> std::string {
        const fs::path parent = fs::path(path).parent_path();
        if (!parent.empty() && !fs::is_directory(parent)) return "directory does not exist: " + parent.string();
        return {};
    },
    "PATH");

void add_train_flags(CLI::App& cmd, TrainConfig& cfg) {
    cmd.add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str();
    cmd.add_option("--batch-size", cfg.batch_size, "Rows per batch")->capture_default_str();
    cmd.add_option("--pac", cfg.pac, "Rows per critic pack")->capture_default_str();
    cmd.add_option("--latent-dim", cfg.latent_dim, "Noise dimension")->capture_default_str();
    cmd.add_option("--learning-rate", cfg.learning_rate, "Adam learning rate")->capture_default_str();
    cmd.add_option("--weight-decay", cfg.weight_decay, "Decoupled weight decay")->capture_default_str();
    cmd.add_option("--gp-lambda", cfg.gp_lambda, "Gradient penalty coefficient")->capture_default_str();
    cmd.add_option("--gumbel-temperature", cfg.gumbel_temperature, "Gumbel-softmax temperature")
        ->capture_default_str();
    cmd.add_option("--critic-steps", cfg.critic_steps_per_generator_step, "Critic updates per generator update")
        ->capture_default_str();
    cmd.add_option("--k-max", cfg.k_max, "Largest cluster count tried")->capture_default_str();
    cmd.add_option("--inertia-penalty", cfg.inertia_penalty, "Per-cluster penalty of the scaled inertia")
        ->capture_default_str();
    cmd.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
    cmd.add_option("--max-attempts-factor", cfg.max_sample_attempts_factor,
                   "Sampling gives up after n * factor attempts")
        ->capture_default_str();
    cmd.add_option("--hidden-width", cfg.hidden_width, "Hidden layer width of both networks")
        ->capture_default_str();
    cmd.add_option("--kmeans-max-iter", cfg.kmeans_max_iter, "Lloyd iteration cap")->capture_default_str();
}

/// Diagnostic JSON for runtime failures, written beside `output`.
void write_diagnostic(const fs::path& output, const std::string& command, const Error& e, json extra) {
    if (output.empty()) return;
    json j{{"command", command}, {"error", std::string(to_string(e.code()))}, {"message", e.what()}};
    for (auto& [key, value] : extra.items()) j[key] = value;
    const fs::path path = output.string() + ".diagnostic.json";
    std::ofstream(path) << j.dump(2) << "\n";
    logger()->error("diagnostic written to {}", path.string());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
}

// ── infer-schema ───────────────────────────────────────────────────────────

struct InferSchemaArgs {
    std::string data, target, out;
    std::size_t threshold = kDefaultDiscreteThreshold;
};

void infer_schema_command(const InferSchemaArgs& a, std::ostream& out) {
    const DatasetSchema schema = infer_schema(a.data, a.target, a.threshold);
    if (a.out.empty()) {
        out << json(schema).dump(2) << "\n";
    } else {
        write_schema_file(a.out, schema);
        logger()->info("schema with {} columns written to {}", schema.columns.size(), a.out);
    }
}

// ── fit ────────────────────────────────────────────────────────────────────

struct FitArgs {
    std::string data, schema, out, plot;
    TrainConfig cfg;
};

void fit_command(const FitArgs& a) {
    a.cfg.validate();
    const Dataset ds = load_csv(a.data, read_schema_file(a.schema));
    logger()->info("training on {} rows, {} columns", ds.num_rows(), ds.num_columns());
    const FittedModel model = train(ds, a.cfg, [](const EpochReport& r) {
        logger()->debug("epoch {}: critic {:.5f} generator {:.5f} beta {:.3f}", r.epoch, r.critic_loss,
                        r.generator_loss, r.beta);
    });
    logger()->info("k = {}, final generator loss {:.5f}", model.clusters.k,
                   model.history.generator_per_epoch.empty() ? 0.0 : model.history.generator_per_epoch.back());
    write_text(a.out, checkpoint_dump(model));
    if (!a.plot.empty())
        write_line_chart(a.plot, "Training losses", "epoch",
                         {{"critic", model.history.critic_per_epoch},
                          {"generator", model.history.generator_per_epoch}});
}

// ── sample / balance ───────────────────────────────────────────────────────

struct SampleArgs {
    std::string model, out, label;
    std::size_t n = 0;
    std::vector<std::string> where;
    std::uint64_t seed = 0;
    std::optional<std::size_t> max_attempts_factor;
};

std::vector<std::pair<std::string, std::string>> parse_where(const std::vector<std::string>& items) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0)
            throw Error(ErrorCode::InvalidCondition, "expected column=category, got '" + item + "'");
        out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    }
    return out;
}

void sample_command(const SampleArgs& a, std::ostream& out) {
    FittedModel model = load_checkpoint(a.model);
    const SampleConditions cond = make_conditions(
        model.schema, a.label.empty() ? std::nullopt : std::optional<std::string>(a.label), parse_where(a.where));
    SamplingModel sampler = sampling_model(model);
    if (a.max_attempts_factor) sampler.max_attempts_factor = *a.max_attempts_factor;
    ad::Rng rng(a.seed);
    const SampleResult result = sample(sampler, a.n, cond, rng);
    logger()->info("{} rows accepted after {} attempts; discrete condition match rate {:.3f}", result.num_rows(),
                   result.attempts, result.discrete_match_rate);
    if (a.out.empty()) {
        write_csv(out, result.to_dataset());
    } else {
        write_csv_file(a.out, result.to_dataset());
    }
}

struct BalanceArgs {
    std::string model, data, out;
    std::uint64_t seed = 0;
};

void balance_command(const BalanceArgs& a) {
    FittedModel model = load_checkpoint(a.model);
    const Dataset ds = load_csv(a.data, model.schema);
    ad::Rng rng(a.seed);
    const Dataset balanced = balance(model, ds, rng);
    logger()->info("{} rows in, {} rows out", ds.num_rows(), balanced.num_rows());
    write_csv_file(a.out, balanced);
}

// ── evaluate ───────────────────────────────────────────────────────────────

struct EvaluateArgs {
    std::string protocol = "oversampling";
    std::vector<std::string> data, schema;
    std::vector<std::string> methods{"none", "ctdgan"};
    std::vector<std::uint64_t> seeds{0, 1, 42};
    std::size_t folds = 5;
    std::string classifier = "mlp";
    std::size_t mlp_epochs = MlpOptions{}.epochs;
    std::string out, plot;
    TrainConfig cfg;
};

void evaluate_command(const EvaluateArgs& a, std::size_t threads, std::ostream& out) {
    if (a.protocol != "oversampling" && a.protocol != "fidelity")
        throw UsageError("--protocol must be oversampling or fidelity");
    if (a.data.size() != a.schema.size()) throw UsageError("give one --schema per --data");
    a.cfg.validate();
    ExperimentOptions options;
    options.seeds = a.seeds;
    options.n_folds = a.folds;
    options.classifier = parse_classifier_kind(a.classifier);
    options.mlp.epochs = a.mlp_epochs;
    options.threads = threads;

    std::vector<std::unique_ptr<GenerativeMethod>> methods;
    for (const auto& name : a.methods) methods.push_back(make_method(name, a.cfg));

    const bool oversampling = a.protocol == "oversampling";
    json reports = json::array();
    // methods x datasets, one matrix per metric
    Matrix f1(static_cast<Eigen::Index>(methods.size()), static_cast<Eigen::Index>(a.data.size()));
    Matrix bac(f1.rows(), f1.cols());
    std::vector<PlotSeries> curves;
    for (std::size_t d = 0; d < a.data.size(); ++d) {
        const Dataset ds = load_csv(a.data[d], read_schema_file(a.schema[d]));
        options.dataset_name = fs::path(a.data[d]).stem().string();
        for (std::size_t m = 0; m < methods.size(); ++m) {
            logger()->info("{} / {} / {}", options.dataset_name, methods[m]->name(), a.protocol);
            const auto r = static_cast<Eigen::Index>(m), c = static_cast<Eigen::Index>(d);
            PlotSeries series{options.dataset_name + " " + methods[m]->name(), {}};
            if (oversampling) {
                const MetricReport report = oversampling_experiment(ds, *methods[m], options);
                f1(r, c) = report.mean_f1;
                bac(r, c) = report.mean_balanced_accuracy;
                for (const auto& cell : report.cells) series.values.push_back(cell.balanced_accuracy);
                reports.push_back(to_json(report));
            } else {
                const FidelityReport report = fidelity_experiment(ds, *methods[m], options);
                // Closer to zero is better; rank on the magnitude.
                f1(r, c) = std::abs(report.mean_delta_f1.value_or(std::nan("")));
                bac(r, c) = std::abs(report.mean_delta_balanced_accuracy.value_or(std::nan("")));
                for (const auto& cell : report.cells)
                    series.values.push_back(cell.delta_balanced_accuracy.value_or(std::nan("")));
                reports.push_back(to_json(report));
            }
            curves.push_back(std::move(series));
        }
    }

    json result{{"protocol", a.protocol}, {"classifier", a.classifier}, {"reports", reports}};
    const bool higher_is_better = oversampling;
    const auto ranks = [&](const Matrix& scores, const char* metric) {
        json j{{"metric", metric}};
        try {
            j["mean_ranks"] = mean_ranks(scores, higher_is_better);
            if (scores.rows() >= 2 && scores.cols() >= 2) {
                const FriedmanResult fr = friedman_test(scores, higher_is_better);
                j["friedman"] = {{"statistic", fr.statistic},
                                 {"p_value", fr.p_value},
                                 {"degrees_of_freedom", fr.degrees_of_freedom}};
            }
        } catch (const Error& e) {
            if (e.code() != ErrorCode::MissingCell) throw;
            j["mean_ranks"] = nullptr;
        }
        return j;
    };
    json method_names = json::array();
    for (const auto& m : methods) method_names.push_back(m->name());
    result["methods"] = method_names;
    result["ranking"] = {ranks(f1, oversampling ? "f1" : "abs_delta_f1"),
                         ranks(bac, oversampling ? "balanced_accuracy" : "abs_delta_balanced_accuracy")};

    const std::string text = result.dump(2) + "\n";
    if (a.out.empty()) {
        out << text;
    } else {
        write_text(a.out, text);
    }
    if (!a.plot.empty())
        write_line_chart(a.plot, oversampling ? "Balanced accuracy per (seed, fold)" : "Balanced accuracy delta (%)",
                         "cell", curves);
}

// ── inspect ────────────────────────────────────────────────────────────────

void inspect_command(const std::string& path, bool as_json, std::ostream& out) {
    const FittedModel model = load_checkpoint(path);
    const auto& layout = model.pipeline.layout;
    const auto last = [](const std::vector<double>& v) { return v.empty() ? std::nan("") : v.back(); };
    if (as_json) {
        json segments = json::array();
        for (const auto& s : layout.segments) segments.push_back({{"offset", s.offset}, {"width", s.width}});
        json p = json::array();
        for (Eigen::Index y = 0; y < model.probability.probs.rows(); ++y) {
            json row = json::array();
            for (Eigen::Index u = 0; u < model.probability.probs.cols(); ++u) row.push_back(model.probability.probs(y, u));
            p.push_back(row);
        }
        out << json{{"k", model.clusters.k},
                    {"classes", model.schema.class_labels},
                    {"layout_width", layout.width},
                    {"latent_width", model.generator.latent_width()},
                    {"segments", segments},
                    {"P_s", p},
                    {"epochs", model.history.generator_per_epoch.size()},
                    {"final_critic_loss", last(model.history.critic_per_epoch)},
                    {"final_generator_loss", last(model.history.generator_per_epoch)},
                    {"beta", model.beta}}
                   .dump(2)
            << "\n";
        return;
    }
    out << "k: " << model.clusters.k << "\n"
        << "classes (" << model.schema.num_classes() << "):";
    for (const auto& c : model.schema.class_labels) out << ' ' << c;
    out << "\nlayout width: " << layout.width << " (continuous " << layout.continuous().width;
    for (const auto& s : layout.discrete()) out << ", " << model.schema.columns[s.column].name << ' ' << s.width;
    out << ", cluster " << layout.cluster().width << ", class " << layout.label().width << ")\n"
        << "latent width: " << model.generator.latent_width() << "\n"
        << "P_s:\n";
    out << std::setprecision(17);
    for (std::size_t y = 0; y < model.schema.num_classes(); ++y) {
        out << "  " << model.schema.class_labels[y] << ':';
        for (double v : model.probability.row(y)) out << ' ' << v;
        out << "\n";
    }
    out << std::setprecision(6) << "epochs: " << model.history.generator_per_epoch.size() << "\n"
        << "final critic loss: " << last(model.history.critic_per_epoch) << "\n"
        << "final generator loss: " << last(model.history.generator_per_epoch) << "\n"
        << "beta: " << model.beta << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out) {
    CLI::App app{"Cluster-aware conditional tabular GAN for rebalancing imbalanced data"};
    app.name("ctdgan");
    app.require_subcommand(1);
    std::string log_level = "info";
    std::size_t threads = 1;
    app.add_option("--log", log_level, "Log level")
        ->check(CLI::IsMember({"quiet", "info", "debug"}))
        ->capture_default_str();
    app.add_option("--threads", threads, "Worker threads for evaluation")->check(CLI::PositiveNumber);

    InferSchemaArgs infer_args;
    auto* infer_cmd = app.add_subcommand("infer-schema", "Guess a schema from a CSV file");
    infer_cmd->add_option("--data", infer_args.data, "CSV file")->required()->check(CLI::ExistingFile);
    infer_cmd->add_option("--target", infer_args.target, "Target column")->required();
    infer_cmd->add_option("--discrete-threshold", infer_args.threshold,
                          "Numeric columns with at most this many distinct values become discrete")
        ->capture_default_str();
    infer_cmd->add_option("--out", infer_args.out, "Schema JSON (stdout when omitted)")->check(kWritablePath);

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "Train a model and write a checkpoint");
    fit_cmd->add_option("--data", fit_args.data, "CSV file")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--schema", fit_args.schema, "Schema JSON")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--out", fit_args.out, "Checkpoint JSON")->required()->check(kWritablePath);
    fit_cmd->add_option("--plot", fit_args.plot, "SVG of the per-epoch losses")->check(kWritablePath);
    add_train_flags(*fit_cmd, fit_args.cfg);

    SampleArgs sample_args;
    std::size_t sample_factor = 0;
    auto* sample_cmd = app.add_subcommand("sample", "Draw rows from a trained model");
    sample_cmd->add_option("--model", sample_args.model, "Checkpoint JSON")->required()->check(CLI::ExistingFile);
    sample_cmd->add_option("--n", sample_args.n, "Rows to draw")->required()->check(CLI::PositiveNumber);
    sample_cmd->add_option("--class", sample_args.label, "Class label every row must have");
    sample_cmd->add_option("--where", sample_args.where, "Discrete condition column=category (repeatable)");
    sample_cmd->add_option("--seed", sample_args.seed, "Random seed")->capture_default_str();
    auto* factor_opt =
        sample_cmd->add_option("--max-attempts-factor", sample_factor, "Override the checkpoint's attempt cap");
    sample_cmd->add_option("--out", sample_args.out, "CSV file (stdout when omitted)")->check(kWritablePath);

    BalanceArgs balance_args;
    auto* balance_cmd = app.add_subcommand("balance", "Oversample every class up to the majority count");
    balance_cmd->add_option("--model", balance_args.model, "Checkpoint JSON")->required()->check(CLI::ExistingFile);
    balance_cmd->add_option("--data", balance_args.data, "CSV file")->required()->check(CLI::ExistingFile);
    balance_cmd->add_option("--out", balance_args.out, "CSV file")->required()->check(kWritablePath);
    balance_cmd->add_option("--seed", balance_args.seed, "Random seed")->capture_default_str();

    EvaluateArgs eval_args;
    auto* eval_cmd = app.add_subcommand("evaluate", "Run the oversampling or fidelity protocol");
    eval_cmd->add_option("--protocol", eval_args.protocol, "oversampling or fidelity")
        ->check(CLI::IsMember({"oversampling", "fidelity"}))
        ->capture_default_str();
    eval_cmd->add_option("--data", eval_args.data, "CSV file (repeatable)")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--schema", eval_args.schema, "Schema JSON, one per --data")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--methods", eval_args.methods, "Comma list of none, copy, ctdgan")
        ->delimiter(',')
        ->capture_default_str();
    eval_cmd->add_option("--seeds", eval_args.seeds, "Comma list of seeds")->delimiter(',')->capture_default_str();
    eval_cmd->add_option("--folds", eval_args.folds, "Cross-validation folds")->capture_default_str();
    eval_cmd->add_option("--classifier", eval_args.classifier, "mlp or 1nn")
        ->check(CLI::IsMember({"mlp", "1nn"}))
        ->capture_default_str();
    eval_cmd->add_option("--mlp-epochs", eval_args.mlp_epochs, "Epochs of the MLP classifier")
        ->capture_default_str();
    eval_cmd->add_option("--out", eval_args.out, "Report JSON (stdout when omitted)")->check(kWritablePath);
    eval_cmd->add_option("--plot", eval_args.plot, "SVG of the per-cell balanced accuracy")->check(kWritablePath);
    add_train_flags(*eval_cmd, eval_args.cfg);

    std::string inspect_path;
    bool inspect_json = false;
    auto* inspect_cmd = app.add_subcommand("inspect", "Summarize a checkpoint");
    inspect_cmd->add_option("--model", inspect_path, "Checkpoint JSON")->required()->check(CLI::ExistingFile);
    inspect_cmd->add_flag("--json", inspect_json, "Machine-readable output");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << " (see --help)\n";
        return kExitInvalid;
    }

    auto log = logger();
    log->set_level(log_level == "quiet" ? spdlog::level::off
                   : log_level == "debug" ? spdlog::level::debug
                                          : spdlog::level::info);

    std::string command;
    fs::path output;
    json context = json::object();
    try {
        if (infer_cmd->parsed()) {
            command = "infer-schema";
            infer_schema_command(infer_args, out);
        } else if (fit_cmd->parsed()) {
            command = "fit";
            output = fit_args.out;
            context["config"] = fit_args.cfg;
            fit_command(fit_args);
        } else if (sample_cmd->parsed()) {
            command = "sample";
            output = sample_args.out;
            if (factor_opt->count()) sample_args.max_attempts_factor = sample_factor;
            context = {{"n", sample_args.n}, {"class", sample_args.label}, {"where", sample_args.where}};
            sample_command(sample_args, out);
        } else if (balance_cmd->parsed()) {
            command = "balance";
            output = balance_args.out;
            balance_command(balance_args);
        } else if (eval_cmd->parsed()) {
            command = "evaluate";
            output = eval_args.out;
            context["config"] = eval_args.cfg;
            evaluate_command(eval_args, threads, out);
        } else if (inspect_cmd->parsed()) {
            command = "inspect";
            inspect_command(inspect_path, inspect_json, out);
        }
    } catch (const Error& e) {
        log->error("{}", e.what());
        if (e.code() == ErrorCode::NonFiniteLoss || e.code() == ErrorCode::AcceptanceStalled) {
            write_diagnostic(output, command, e, context);
            return kExitRuntime;
        }
        return kExitInvalid;
    } catch (const UsageError& e) {
        log->error("{}", e.what());
        return kExitInvalid;
    } catch (const std::exception& e) {
        log->error("{}", e.what());
        return kExitInvalid;
    }
    return kExitOk;
}

int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout);
}

}  // namespace ctdgan::cli
