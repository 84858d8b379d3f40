#include "reference_net.hpp"

#include <algorithm>
#include <cmath>

namespace refnet {

namespace {

double act(double x, bool scaled) {
    return scaled ? 1.7159 * std::tanh(x * 2.0 / 3.0) : std::tanh(x);
}

std::vector<double> layer(const rbnn::Matrix& w, std::span<const double> x, bool sign) {
    std::vector<double> y(w.rows, 0.0);
    for (size_t i = 0; i < w.rows; ++i) {
        double acc = 0.0;
        for (size_t j = 0; j < w.cols; ++j) {
            const double wij = w.at(i, j);
            acc += (sign ? (wij < 0.0 ? -1.0 : 1.0) : wij) * x[j];
        }
        y[i] = acc;
    }
    return y;
}

std::vector<double> subnet_logits(const rbnn::Matrix& w1, const rbnn::Matrix& w2,
                                  std::span<const double> x, bool sign, bool scaled) {
    std::vector<double> hidden = layer(w1, x, sign);
    for (double& h : hidden) h = act(h, scaled);
    return layer(w2, hidden, sign);
}

}  // namespace

RefNet from_model(const rbnn::RbnnModel& m, bool plastic_sign) {
    RefNet n;
    n.scaled_tanh = m.activation == rbnn::Activation::tanh_opt;
    n.plastic_sign = plastic_sign;
    for (const rbnn::FrozenSubnet& fz : m.frozen) {
        n.frozen_w1.push_back(rbnn::dense(fz.w1));
        n.frozen_w2.push_back(rbnn::dense(fz.w2));
    }
    n.has_plastic = m.plastic.has_value();
    if (n.has_plastic) {
        n.plastic_w1 = m.plastic->real_w1();
        n.plastic_w2 = m.plastic->real_w2();
    }
    return n;
}

std::vector<std::vector<double>> forward_subnet_logits(const RefNet& n,
                                                       std::span<const double> x) {
    std::vector<std::vector<double>> parts;
    for (size_t s = 0; s < n.frozen_w1.size(); ++s)
        parts.push_back(subnet_logits(n.frozen_w1[s], n.frozen_w2[s], x, true,
                                      n.scaled_tanh));
    if (n.has_plastic)
        parts.push_back(subnet_logits(n.plastic_w1, n.plastic_w2, x, n.plastic_sign,
                                      n.scaled_tanh));
    return parts;
}

std::vector<double> forward_logits(const RefNet& n, std::span<const double> x) {
    const auto parts = forward_subnet_logits(n, x);
    std::vector<double> total(parts.empty() ? 0 : parts[0].size(), 0.0);
    for (const auto& p : parts)
        for (size_t c = 0; c < p.size(); ++c) total[c] += p[c];
    return total;
}

std::vector<double> probs_from_logits(std::span<const double> logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

double example_loss(const RefNet& n, std::span<const double> x,
                    std::span<const double> target) {
    const std::vector<double> logits = forward_logits(n, x);
    const std::vector<double> p = probs_from_logits(logits);
    double loss = 0.0;
    for (size_t c = 0; c < p.size(); ++c)
        if (target[c] != 0.0) loss -= target[c] * std::log(std::max(p[c], 1e-12));
    return loss;
}

double batch_mean_loss(const RefNet& n, const rbnn::Matrix& xs,
                       const rbnn::Matrix& targets) {
    double sum = 0.0;
    for (size_t r = 0; r < xs.rows; ++r)
        sum += example_loss(n, {xs.row(r), xs.cols}, {targets.row(r), targets.cols});
    return sum / double(xs.rows);
}

}  // namespace refnet
