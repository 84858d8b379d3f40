#pragma once

#include <string>

#include "rbnn/dataset.hpp"
#include "rbnn/metrics.hpp"
#include "rbnn/train.hpp"

namespace rbnn {

// Full run configuration. Precedence is defaults < config file < flags; the
// CLI funnels every source through apply_key_value so all three layers share
// one parser. Every key has a documented default except mnist_dir.
struct RunConfig {
    TrainConfig train;
    std::string mnist_dir;  // falls back to $RBNN_MNIST_DIR
    std::string out_model_path = "model.rbnn";
    std::string out_report_path = "report.csv";
    ReportFormat report_format = ReportFormat::csv;
    MeanMode mean_mode = MeanMode::dataset;
    Activation activation = Activation::tanh_opt;
    uint32_t initial_hidden = 100;
    int initial_bits = 16;
    uint32_t train_limit = 0;  // 0 = full training split
    std::string run_id = "run";
};

// Applies one key=value pair, validating the value. Throws ConfigError with a
// message naming the key on unknown keys or bad values.
void apply_key_value(RunConfig& cfg, const std::string& key, const std::string& value);

// Plain-text config file: one `key = value` per line, '#' starts a comment.
void apply_config_file(RunConfig& cfg, const std::string& path);

// Resolves the mnist_dir fallback ($RBNN_MNIST_DIR); throws ConfigError
// naming the key when it is still missing.
std::string resolve_mnist_dir(const RunConfig& cfg);

const char* to_string(Backend b);
const char* to_string(RunMode m);
const char* to_string(MeanMode m);
const char* to_string(Activation a);
const char* to_string(ReportFormat f);
const char* to_string(BinarizeMode b);

}  // namespace rbnn
