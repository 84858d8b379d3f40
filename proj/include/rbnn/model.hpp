#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rbnn/fixedpoint.hpp"
#include "rbnn/linalg.hpp"

namespace rbnn {

enum class Activation { tanh_opt, plain_tanh };

// Hidden activation. tanh_opt is the conventional scaled tanh
// 1.7159 * tanh(2x/3); plain tanh sits behind the config switch.
double act_hidden(double x, Activation a);
// Derivative expressed through the activation value y = act_hidden(x).
double act_hidden_deriv(double y, Activation a);

std::vector<double> softmax(std::span<const double> logits);

// Storage budget accounting. slot_count * initial_bits never changes; each
// freeze/recycle cycle converts one bit per slot into a frozen sign bit and
// hands the rest to the next plastic sub-network.
struct BitLedger {
    uint64_t slot_count = 0;    // synapse slots: in*h0 + h0*out
    uint32_t initial_bits = 0;  // bits per slot at the start
    uint32_t recursion_index = 0;
    uint32_t plastic_bits = 0;  // always initial_bits - recursion_index

    uint64_t total_bits() const { return slot_count * initial_bits; }
    bool conserved() const {
        return recursion_index + plastic_bits == initial_bits;
    }
};

// Immutable sign-only sub-network (one hidden layer).
struct FrozenSubnet {
    SignMatrix w1;  // h0 x in
    SignMatrix w2;  // out x h0
};

// Trainable sub-network holding plastic_bits-wide weights.
struct PlasticSubnet {
    IntMatrix w1;  // h0 x in raws
    IntMatrix w2;  // out x h0 raws
    int bits = 0;  // total bits per weight

    QFormat format() const { return weight_format(bits); }
    Matrix real_w1() const;
    Matrix real_w2() const;
};

struct RbnnModel {
    uint32_t h0 = 0;  // hidden units per sub-network
    uint32_t input_dim = 784;
    uint32_t output_dim = 10;
    uint32_t seed = 0;
    Activation activation = Activation::tanh_opt;
    BitLedger ledger;
    std::vector<FrozenSubnet> frozen;
    std::optional<PlasticSubnet> plastic;

    uint64_t total_subnets() const { return frozen.size() + (plastic ? 1 : 0); }
    uint64_t total_hidden() const { return h0 * total_subnets(); }
    uint64_t total_synapses() const { return ledger.slot_count * total_subnets(); }
};

// Fresh model: one plastic sub-network at full width, no frozen ones.
// Weights are drawn uniformly from (-r, r) with r = sqrt(6/(fan_in+fan_out))
// and quantized to Q1.(initial_bits-1).
RbnnModel new_model(uint32_t h0, int initial_bits, uint32_t seed,
                    uint32_t input_dim = 784, uint32_t output_dim = 10,
                    Activation act = Activation::tanh_opt);

// Binarizes the plastic sub-network into a new frozen one and re-initializes
// a one-bit-narrower plastic sub-network from the recycled storage. Throws
// BudgetExhausted when plastic_bits - 1 < min_plastic_bits.
void freeze_and_recycle(RbnnModel& m, int min_plastic_bits = 2);

struct ForwardResult {
    std::vector<double> probs;
    std::vector<double> logits;
    // Per-subnet pieces, frozen in order then plastic last.
    std::vector<std::vector<double>> hidden;
    std::vector<std::vector<double>> subnet_logits;
};

// Whole-model forward pass. Every MAC uses sign bits only: frozen weights are
// already signs, the plastic layers run on their binarized shadow.
ForwardResult forward(const RbnnModel& m, std::span<const double> x);

// argmax of forward(); ties break to the lowest class index.
int predict(const RbnnModel& m, std::span<const double> x);
int argmax_lowest(std::span<const double> v);

// Blocked whole-model logits for a batch of rows (real arithmetic). Row i of
// the result equals forward(m, X.row(i)).logits bit for bit.
Matrix batch_logits(const RbnnModel& m, const Matrix& x);

// Fixed-backend equivalent: inputs quantized to Q8.24, exact integer
// accumulation, activations re-quantized to Q8.24. Returned doubles are the
// exact real values of the fixed-point logits.
Matrix batch_logits_fixed(const RbnnModel& m, const Matrix& x);

// Per-subnet blocked primitives shared by the evaluators and the trainer.
// xt/logits/hidden use the lane-blocked layout from kernels.hpp; `logits`
// is accumulated into (+=), `hidden` may be null when not needed.
void subnet_forward_blk(const SignMatrix& w1, const SignMatrix& w2, Activation act,
                        const double* xt, size_t nlane, double* logits_acc,
                        double* hidden_out);
void subnet_forward_blk_i64(const SignMatrix& w1, const SignMatrix& w2, Activation act,
                            const int32_t* xt, size_t nlane, int64_t* logits_acc,
                            int32_t* hidden_out);

// Model file format (little-endian): "RBNN" + version 0x01, u32 fields h0,
// initial_bits, recursions, input_dim, output_dim, plastic_present, seed;
// packed sign bits of each frozen subnet (w1 then w2); plastic raws as i16.
std::vector<uint8_t> serialize(const RbnnModel& m);
RbnnModel deserialize(std::span<const uint8_t> bytes);
void save_model(const RbnnModel& m, const std::string& path);
RbnnModel load_model(const std::string& path);

}  // namespace rbnn
