#pragma once

// Central finite-difference checks of analytic network gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "csi_intruder/nn.hpp"

namespace gradcheck {

struct Result {
    double max_rel_error = 0.0;
    std::size_t coordinates = 0;
};

/// Compares `analytic` with central differences of `loss` at `count` random parameter coordinates.
/// Relative error is |a - n| / max(|a|, |n|, floor).
inline Result check(csi_intruder::nn::Network net, const std::function<double(const csi_intruder::nn::Network&)>& loss,
                    const csi_intruder::nn::Gradients& analytic, std::size_t count, std::uint64_t seed,
                    double h = 1e-5, double floor = 1e-7) {
    std::mt19937_64 rng(seed);
    Result r;
    auto& layers = net.layers();
    std::uniform_int_distribution<std::size_t> pick_layer(0, layers.size() - 1);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t l = pick_layer(rng);
        auto& layer = layers[l];
        const bool bias = std::uniform_int_distribution<int>(0, 4)(rng) == 0;
        double* param = nullptr;
        double a = 0.0;
        if (bias) {
            const auto i = std::uniform_int_distribution<Eigen::Index>(0, layer.bias.size() - 1)(rng);
            param = &layer.bias[i];
            a = analytic.bias[l][i];
        } else {
            const auto i = std::uniform_int_distribution<Eigen::Index>(0, layer.weights.rows() - 1)(rng);
            const auto j = std::uniform_int_distribution<Eigen::Index>(0, layer.weights.cols() - 1)(rng);
            param = &layer.weights(i, j);
            a = analytic.weights[l](i, j);
        }
        const double orig = *param;
        *param = orig + h;
        const double up = loss(net);
        *param = orig - h;
        const double down = loss(net);
        *param = orig;
        const double numeric = (up - down) / (2.0 * h);
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
        r.max_rel_error = std::max(r.max_rel_error, rel);
        ++r.coordinates;
    }
    return r;
}

}  // namespace gradcheck
