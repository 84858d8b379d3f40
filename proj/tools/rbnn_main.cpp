// Command-line driver: train / eval / report / inspect.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rbnn/config.hpp"
#include "rbnn/dataset.hpp"
#include "rbnn/errors.hpp"
#include "rbnn/metrics.hpp"
#include "rbnn/model.hpp"
#include "rbnn/train.hpp"

namespace {

using namespace rbnn;

// Every option value arrives as a string and flows through apply_key_value,
// so flags, config-file entries and defaults share one validation path and
// the 3-layer precedence (defaults < file < flags) is exact.
struct FlagSpec {
    const char* flag;
    const char* key;
    const char* help;
};

const std::vector<FlagSpec> kTrainFlags = {
    {"--mnist-dir", "mnist_dir", "Directory with the four MNIST IDX files"},
    {"--initial-hidden", "initial_hidden", "Hidden units per sub-network (default 100)"},
    {"--initial-bits", "initial_bits", "Starting bits per weight (default 16)"},
    {"--learning-rate", "learning_rate", "SGD learning rate (default 0.25)"},
    {"--batch-size", "batch_size", "Mini-batch size (default 1000)"},
    {"--max-epochs", "max_epochs", "Epoch cap per iteration (default 1000)"},
    {"--patience", "patience", "Epochs without validation improvement before stopping (default 50)"},
    {"--min-plastic-bits", "min_plastic_bits", "Smallest trainable width (default 2)"},
    {"--max-recursions", "max_recursions", "Recursion cap; -1 = bit budget (default -1)"},
    {"--seed", "seed", "Seed for weight init and shuffling (default 42)"},
    {"--backend", "backend", "Compute backend: real|fixed (default real)"},
    {"--mode", "mode", "rbnn|bnn_baseline (default rbnn)"},
    {"--binarize-mode", "binarize_mode", "sign|identity; identity is a debug switch (default sign)"},
    {"--plateau-stop", "plateau_stop", "Stop recursing when validation stalls: true|false (default true)"},
    {"--mean-mode", "mean_mode", "Normalization mean: dataset|half_range (default dataset)"},
    {"--activation", "activation", "Hidden activation: tanh_opt|tanh (default tanh_opt)"},
    {"--train-limit", "train_limit", "Use only the first N training examples; 0 = all (default 0)"},
    {"--out-model", "out_model_path", "Output model file (default model.rbnn)"},
    {"--out-report", "out_report_path", "Output report file (default report.csv)"},
    {"--report-format", "report_format", "csv|json (default csv)"},
    {"--run-id", "run_id", "Identifier written into report rows (default run)"},
};

struct PendingFlags {
    std::vector<std::pair<std::string, std::string>> values;
};

void add_config_flags(CLI::App* cmd, PendingFlags& pending,
                      const std::vector<FlagSpec>& specs) {
    for (const FlagSpec& spec : specs) {
        const std::string key = spec.key;
        cmd->add_option_function<std::string>(
            spec.flag,
            [&pending, key](const std::string& v) { pending.values.emplace_back(key, v); },
            spec.help);
    }
}

RunConfig assemble_config(const std::string& config_path, const PendingFlags& flags) {
    RunConfig cfg;
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    for (const auto& [key, value] : flags.values) apply_key_value(cfg, key, value);
    return cfg;
}

nlohmann::json storage_to_json(const StorageReport& s) {
    return {{"slot_count", s.slot_count},
            {"initial_bits", s.initial_bits},
            {"recursions", s.recursions},
            {"total_synapses", s.total_synapses},
            {"bits_per_weight", s.bits_per_weight},
            {"storage_bits", s.storage_bits},
            {"storage_bytes", s.storage_bytes},
            {"storage_kb", s.storage_kb}};
}

int cmd_train(const std::string& config_path, const PendingFlags& flags) {
    RunConfig cfg = assemble_config(config_path, flags);
    const std::string dir = resolve_mnist_dir(cfg);
    const DataSplit data = load_mnist_split(dir, cfg.mean_mode, cfg.train_limit);

    const TrainConfig tc = cfg.train;
    RunResult result = run_recursive(data, cfg.initial_hidden, cfg.initial_bits, tc,
                                     cfg.activation, /*verbose=*/true);

    save_model(result.model, cfg.out_model_path);
    const std::vector<ReportRow> rows =
        report_rows(result.records, cfg.run_id, to_string(tc.mode), cfg.initial_hidden,
                    result.model.ledger);
    emit_report(rows, storage_report(result.model.ledger), op_counts(result.model),
                cfg.out_report_path, cfg.report_format);

    const IterationRecord& best = result.records[result.best_iteration];
    std::printf("best iteration %zu: val=%.4f test=%.4f; model -> %s, report -> %s\n",
                result.best_iteration, best.best_val_error, best.test_error_at_best,
                cfg.out_model_path.c_str(), cfg.out_report_path.c_str());
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& config_path,
             const PendingFlags& flags, const std::string& split_name) {
    RunConfig cfg = assemble_config(config_path, flags);
    RbnnModel m = load_model(model_path);
    m.activation = cfg.activation;
    const std::string dir = resolve_mnist_dir(cfg);
    const DataSplit data = load_mnist_split(dir, cfg.mean_mode, cfg.train_limit);

    const Split* split = &data.test;
    if (split_name == "train")
        split = &data.train;
    else if (split_name == "validation")
        split = &data.validation;
    else if (split_name != "test")
        throw ConfigError("config key 'split': invalid value '" + split_name +
                          "' (want train|validation|test)");

    const double err = evaluate_error(m, *split, cfg.train.backend);
    const StorageReport s = storage_report(m.ledger);
    nlohmann::json j = storage_to_json(s);
    j["split"] = split_name;
    j["error_rate"] = err;
    j["hidden_total"] = m.total_hidden();
    std::printf("%s\n", j.dump().c_str());
    return 0;
}

int cmd_report(const std::string& model_path, const std::string& format,
               const std::string& out_path) {
    const RbnnModel m = load_model(model_path);
    const StorageReport s = storage_report(m.ledger);
    const OpCountReport o = op_counts(m);

    std::string text;
    if (format == "json") {
        nlohmann::json j;
        j["storage"] = storage_to_json(s);
        j["op_counts"] = {{"inference_shift", o.inference_shift},
                          {"inference_add", o.inference_add},
                          {"learning_shift", o.learning_shift},
                          {"learning_add", o.learning_add},
                          {"learning_multiply", o.learning_multiply},
                          {"formula", kLearningOpsFormula}};
        text = j.dump(2) + "\n";
    } else if (format == "csv") {
        text = "# learning ops: " + std::string(kLearningOpsFormula) + "\nmetric,value\n";
        auto add = [&text](const std::string& k, const std::string& v) {
            text += k + "," + v + "\n";
        };
        add("slot_count", std::to_string(s.slot_count));
        add("initial_bits", std::to_string(s.initial_bits));
        add("recursions", std::to_string(s.recursions));
        add("total_synapses", std::to_string(s.total_synapses));
        add("bits_per_weight", std::to_string(s.bits_per_weight));
        add("storage_bits", std::to_string(s.storage_bits));
        add("storage_bytes", std::to_string(s.storage_bytes));
        add("storage_kb", std::to_string(s.storage_kb));
        add("inference_shift", std::to_string(o.inference_shift));
        add("inference_add", std::to_string(o.inference_add));
        add("learning_shift", std::to_string(o.learning_shift));
        add("learning_add", std::to_string(o.learning_add));
        add("learning_multiply", std::to_string(o.learning_multiply));
    } else {
        throw ConfigError("config key 'format': invalid value '" + format +
                          "' (want csv|json)");
    }

    if (out_path.empty()) {
        std::fputs(text.c_str(), stdout);
    } else {
        std::FILE* f = std::fopen(out_path.c_str(), "wb");
        if (!f) throw IoError(out_path + ": cannot open for writing");
        std::fputs(text.c_str(), f);
        std::fclose(f);
    }
    return 0;
}

int cmd_inspect(const std::string& model_path) {
    const RbnnModel m = load_model(model_path);
    const StorageReport s = storage_report(m.ledger);
    std::printf("model %s\n", model_path.c_str());
    std::printf("  dimensions: %u-%u-%u per sub-network, %llu sub-networks\n",
                m.input_dim, m.h0, m.output_dim,
                static_cast<unsigned long long>(m.total_subnets()));
    std::printf("  ledger: slots=%llu initial_bits=%u recursions=%u plastic_bits=%u\n",
                static_cast<unsigned long long>(m.ledger.slot_count),
                m.ledger.initial_bits, m.ledger.recursion_index, m.ledger.plastic_bits);
    std::printf("  hidden_total=%llu synapses_total=%llu bits_per_weight=%.4f "
                "storage_kb=%.2f\n",
                static_cast<unsigned long long>(m.total_hidden()),
                static_cast<unsigned long long>(s.total_synapses), s.bits_per_weight,
                s.storage_kb);
    std::printf("  seed=%u\n", m.seed);
    auto pct = [](const SignMatrix& w) {
        return 100.0 * double(w.count_positive()) / double(w.rows * w.cols);
    };
    for (size_t i = 0; i < m.frozen.size(); ++i) {
        const FrozenSubnet& fz = m.frozen[i];
        std::printf("  subnet %zu (frozen): w1 %zux%zu (+%.1f%%), w2 %zux%zu (+%.1f%%)\n",
                    i, fz.w1.rows, fz.w1.cols, pct(fz.w1), fz.w2.rows, fz.w2.cols,
                    pct(fz.w2));
    }
    if (m.plastic) {
        const SignMatrix b1 = binarize_matrix(m.plastic->w1);
        const SignMatrix b2 = binarize_matrix(m.plastic->w2);
        std::printf(
            "  subnet %zu (plastic, %d bits): w1 %zux%zu (+%.1f%%), w2 %zux%zu "
            "(+%.1f%%)\n",
            m.frozen.size(), m.plastic->bits, b1.rows, b1.cols, pct(b1), b2.rows,
            b2.cols, pct(b2));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Storage-recycling binary neural network trainer"};
    app.require_subcommand(1);

    std::string config_path, model_path, split_name = "test";
    std::string report_fmt = "json", report_out;
    PendingFlags train_flags, eval_flags;

    CLI::App* train = app.add_subcommand("train", "Train under a fixed storage budget");
    train->add_option("--config", config_path, "Config file (key = value lines)");
    add_config_flags(train, train_flags, kTrainFlags);

    CLI::App* eval = app.add_subcommand("eval", "Evaluate a model file on one split");
    eval->add_option("--model", model_path, "Model file")->required();
    eval->add_option("--split", split_name, "train|validation|test (default test)");
    eval->add_option("--config", config_path, "Config file (key = value lines)");
    add_config_flags(eval, eval_flags, kTrainFlags);

    CLI::App* report = app.add_subcommand("report", "Storage and op-count report");
    report->add_option("--model", model_path, "Model file")->required();
    report->add_option("--format", report_fmt, "csv|json (default json)");
    report->add_option("--out", report_out, "Output path (default stdout)");

    CLI::App* inspect = app.add_subcommand("inspect", "Print model structure");
    inspect->add_option("--model", model_path, "Model file")->required();

    try {
        app.parse(argc, argv);
        if (train->parsed()) return cmd_train(config_path, train_flags);
        if (eval->parsed()) return cmd_eval(model_path, config_path, eval_flags, split_name);
        if (report->parsed()) return cmd_report(model_path, report_fmt, report_out);
        if (inspect->parsed()) return cmd_inspect(model_path);
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
