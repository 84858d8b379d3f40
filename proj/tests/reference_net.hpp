#pragma once

// Independent dense reimplementation of the enlarged-network forward pass and
// loss, used as the oracle for forward and gradient checks. Deliberately
// shares no kernel or activation code with the library: plain loops and its
// own scaled-tanh definition.

#include <span>
#include <vector>

#include "rbnn/linalg.hpp"
#include "rbnn/model.hpp"

namespace refnet {

struct RefNet {
    std::vector<rbnn::Matrix> frozen_w1, frozen_w2;  // dense +/-1 entries
    rbnn::Matrix plastic_w1, plastic_w2;             // real-valued
    bool has_plastic = true;
    bool plastic_sign = true;  // true: MACs use sign(w); false: use w itself
    bool scaled_tanh = true;   // 1.7159 * tanh(2x/3) vs plain tanh
};

RefNet from_model(const rbnn::RbnnModel& m, bool plastic_sign);

std::vector<double> forward_logits(const RefNet& n, std::span<const double> x);
std::vector<std::vector<double>> forward_subnet_logits(const RefNet& n,
                                                       std::span<const double> x);
std::vector<double> probs_from_logits(std::span<const double> logits);

// Cross-entropy of one example (log clamped at 1e-12).
double example_loss(const RefNet& n, std::span<const double> x,
                    std::span<const double> target);

// Mean loss over a batch; matches the quantity whose gradient the training
// code accumulates.
double batch_mean_loss(const RefNet& n, const rbnn::Matrix& xs,
                       const rbnn::Matrix& targets);

}  // namespace refnet
