#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rbnn/dataset.hpp"
#include "rbnn/model.hpp"

namespace rbnn {

enum class Backend { real, fixed };
enum class RunMode { rbnn, bnn_baseline };

// identity is a debug switch: plastic MACs use the underlying multi-bit
// weight values instead of their signs, which makes the training loss a
// smooth function of the weights (used by the finite-difference checks).
enum class BinarizeMode { sign, identity };

struct TrainConfig {
    double learning_rate = 0.25;
    uint32_t batch_size = 1000;
    uint32_t max_epochs = 1000;
    uint32_t patience = 50;  // epochs without validation improvement before stopping
    int min_plastic_bits = 2;
    int max_recursions = -1;  // -1 resolves to initial_bits - min_plastic_bits
    uint32_t seed = 42;
    Backend backend = Backend::real;
    RunMode mode = RunMode::rbnn;
    BinarizeMode binarize_mode = BinarizeMode::sign;
    bool plateau_stop = true;  // stop recursing when validation stops improving

    // Validates, resolves max_recursions against the bit budget and clamps
    // patience to max_epochs. Throws ConfigError on nonsense values.
    TrainConfig normalized(int initial_bits) const;
};

struct EpochStats {
    uint32_t epoch = 0;  // 1-based
    double train_error = 0.0, train_loss = 0.0;
    double val_error = 0.0, val_loss = 0.0;
    double test_error = 0.0, test_loss = 0.0;
};

struct IterationRecord {
    uint32_t recursion_index = 0;
    int plastic_bits = 0;
    std::vector<EpochStats> epochs;
    uint32_t best_epoch = 0;  // 1-based epoch with the lowest validation error
    double best_val_error = 1.0;
    double train_error_at_best = 1.0;
    double test_error_at_best = 1.0;
};

// Softmax cross-entropy for one example. loss = -sum t*log(p) with the log
// clamped at 1e-12; grad is w.r.t. the logits, scaled by 1/batch_size.
struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;
};
LossGrad loss_and_output_grad(std::span<const double> probs,
                              std::span<const double> target, uint32_t batch_size);

struct PlasticGradients {
    Matrix g1;  // h0 x in
    Matrix g2;  // out x h0
};

// Plastic activations and total logits for one batch (real backend).
struct ForwardCache {
    Matrix hidden;  // n x h0, plastic hidden activations
    Matrix logits;  // n x out, full enlarged-network logits
};

// Full enlarged-network forward for a batch: frozen sub-networks contribute
// constant logit terms, the plastic one runs on its binarized shadow (or its
// real values under BinarizeMode::identity).
ForwardCache forward_incremental(const RbnnModel& m, const Batch& batch,
                                 BinarizeMode bm = BinarizeMode::sign);

// Batch-accumulated gradients of the plastic weights only; frozen sub-networks
// have no gradient buffers at all. Gradients flow through the binarized MACs
// straight onto the multi-bit weights (straight-through update rule).
PlasticGradients backward_incremental(const RbnnModel& m, const Batch& batch,
                                      const ForwardCache& cache,
                                      BinarizeMode bm = BinarizeMode::sign);

// w <- saturating_update(w, -lr * g) entrywise, in the plastic Q1.f format.
void sgd_step(PlasticSubnet& p, const PlasticGradients& g, double learning_rate);

// One training iteration at the model's current recursion depth: shuffled
// mini-batch SGD with per-epoch validation/test evaluation, early stopping on
// patience, and retention of the plastic weights from the best-validation
// epoch. Reported errors always evaluate the binarized network.
IterationRecord train_iteration(RbnnModel& m, const DataSplit& data,
                                const TrainConfig& cfg);

struct RunResult {
    RbnnModel model;  // state at the best-validation iteration
    std::vector<IterationRecord> records;
    size_t best_iteration = 0;
};

// The whole recursive procedure: train, then repeatedly binarize-and-recycle
// while validation keeps improving (strictly), bits remain above
// min_plastic_bits, and max_recursions is not exceeded.
RunResult run_recursive(const DataSplit& data, uint32_t h0, int initial_bits,
                        const TrainConfig& cfg,
                        Activation activation = Activation::tanh_opt,
                        bool verbose = false);

struct EvalStats {
    size_t errors = 0;
    double loss_sum = 0.0;
    size_t count = 0;
    double error_rate() const { return count ? double(errors) / double(count) : 0.0; }
    double mean_loss() const { return count ? loss_sum / double(count) : 0.0; }
};

// Binarized evaluation of one split under the given compute backend.
EvalStats evaluate_split(const RbnnModel& m, const Split& split, Backend backend);

}  // namespace rbnn
