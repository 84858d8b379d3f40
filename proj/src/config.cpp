#include "rbnn/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>

#include "rbnn/errors.hpp"

namespace rbnn {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    size_t e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& want) {
    throw ConfigError("config key '" + key + "': invalid value '" + value + "' (want " +
                      want + ")");
}

double parse_f64(const std::string& key, const std::string& value) {
    double v = 0.0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
        bad_value(key, value, "a number");
    return v;
}

int64_t parse_i64(const std::string& key, const std::string& value) {
    int64_t v = 0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
        bad_value(key, value, "an integer");
    return v;
}

uint32_t parse_u32(const std::string& key, const std::string& value) {
    const int64_t v = parse_i64(key, value);
    if (v < 0 || v > int64_t(UINT32_MAX)) bad_value(key, value, "a non-negative integer");
    return uint32_t(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    bad_value(key, value, "true|false");
}

}  // namespace

const char* to_string(Backend b) { return b == Backend::real ? "real" : "fixed"; }
const char* to_string(RunMode m) { return m == RunMode::rbnn ? "rbnn" : "bnn_baseline"; }
const char* to_string(MeanMode m) {
    return m == MeanMode::dataset ? "dataset" : "half_range";
}
const char* to_string(Activation a) {
    return a == Activation::tanh_opt ? "tanh_opt" : "tanh";
}
const char* to_string(ReportFormat f) { return f == ReportFormat::csv ? "csv" : "json"; }
const char* to_string(BinarizeMode b) {
    return b == BinarizeMode::sign ? "sign" : "identity";
}

void apply_key_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "learning_rate") {
        cfg.train.learning_rate = parse_f64(key, value);
    } else if (key == "batch_size") {
        cfg.train.batch_size = parse_u32(key, value);
    } else if (key == "max_epochs") {
        cfg.train.max_epochs = parse_u32(key, value);
    } else if (key == "patience") {
        cfg.train.patience = parse_u32(key, value);
    } else if (key == "min_plastic_bits") {
        cfg.train.min_plastic_bits = int(parse_i64(key, value));
    } else if (key == "max_recursions") {
        cfg.train.max_recursions = int(parse_i64(key, value));
    } else if (key == "seed") {
        cfg.train.seed = parse_u32(key, value);
    } else if (key == "backend") {
        if (value == "real")
            cfg.train.backend = Backend::real;
        else if (value == "fixed")
            cfg.train.backend = Backend::fixed;
        else
            bad_value(key, value, "real|fixed");
    } else if (key == "mode") {
        if (value == "rbnn")
            cfg.train.mode = RunMode::rbnn;
        else if (value == "bnn_baseline")
            cfg.train.mode = RunMode::bnn_baseline;
        else
            bad_value(key, value, "rbnn|bnn_baseline");
    } else if (key == "binarize_mode") {
        if (value == "sign")
            cfg.train.binarize_mode = BinarizeMode::sign;
        else if (value == "identity")
            cfg.train.binarize_mode = BinarizeMode::identity;
        else
            bad_value(key, value, "sign|identity");
    } else if (key == "plateau_stop") {
        cfg.train.plateau_stop = parse_bool(key, value);
    } else if (key == "mnist_dir") {
        cfg.mnist_dir = value;
    } else if (key == "out_model_path") {
        cfg.out_model_path = value;
    } else if (key == "out_report_path") {
        cfg.out_report_path = value;
    } else if (key == "report_format") {
        if (value == "csv")
            cfg.report_format = ReportFormat::csv;
        else if (value == "json")
            cfg.report_format = ReportFormat::json;
        else
            bad_value(key, value, "csv|json");
    } else if (key == "mean_mode") {
        if (value == "dataset")
            cfg.mean_mode = MeanMode::dataset;
        else if (value == "half_range")
            cfg.mean_mode = MeanMode::half_range;
        else
            bad_value(key, value, "dataset|half_range");
    } else if (key == "activation") {
        if (value == "tanh_opt")
            cfg.activation = Activation::tanh_opt;
        else if (value == "tanh")
            cfg.activation = Activation::plain_tanh;
        else
            bad_value(key, value, "tanh_opt|tanh");
    } else if (key == "initial_hidden") {
        cfg.initial_hidden = parse_u32(key, value);
    } else if (key == "initial_bits") {
        cfg.initial_bits = int(parse_i64(key, value));
    } else if (key == "train_limit") {
        cfg.train_limit = parse_u32(key, value);
    } else if (key == "run_id") {
        cfg.run_id = value;
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config file '" + path + "': cannot open");
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config file '" + path + "' line " + std::to_string(lineno) +
                              ": expected 'key = value'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config file '" + path + "' line " + std::to_string(lineno) +
                              ": empty key");
        apply_key_value(cfg, key, value);
    }
}

std::string resolve_mnist_dir(const RunConfig& cfg) {
    if (!cfg.mnist_dir.empty()) return cfg.mnist_dir;
    if (const char* env = std::getenv("RBNN_MNIST_DIR"); env != nullptr && *env != '\0')
        return env;
    throw ConfigError(
        "config key 'mnist_dir' is required (use --mnist-dir, a config file entry, or "
        "the RBNN_MNIST_DIR environment variable)");
}

}  // namespace rbnn
