#pragma once

#include <cstdint>
#include <vector>

#include "cvs/nn/tensor.hpp"

namespace cvs::nn {

struct AdamHyper {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    bool operator==(const AdamHyper&) const = default;
};

/// Moment accumulators, one buffer per parameter tensor in declaration order.
template <class T>
struct AdamState {
    AdamHyper hyper;
    std::uint64_t step = 0;
    std::vector<Buffer<T>> first, second;

    AdamState() = default;
    AdamState(AdamHyper h, const std::vector<ParamRef<T>>& params);

    bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam update of every parameter from its gradient.
template <class T>
void adam_step(const std::vector<ParamRef<T>>& params, AdamState<T>& state);

}  // namespace cvs::nn
