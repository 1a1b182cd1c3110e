#include "cvs/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace cvs::nn {

template <class T>
AdamState<T>::AdamState(AdamHyper h, const std::vector<ParamRef<T>>& params) : hyper(h) {
    if (!(h.learning_rate > 0.0)) throw std::invalid_argument("Adam learning rate must be positive");
    for (const auto& p : params) {
        first.emplace_back(p.value.size(), T{0});
        second.emplace_back(p.value.size(), T{0});
    }
}

template <class T>
void adam_step(const std::vector<ParamRef<T>>& params, AdamState<T>& state) {
    if (params.size() != state.first.size()) throw std::invalid_argument("adam_step: parameter list does not match state");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].value.size() != state.first[i].size() || params[i].grad.size() != params[i].value.size()) {
            throw std::invalid_argument("adam_step: shape mismatch for " + params[i].name);
        }
    }
    ++state.step;
    const AdamHyper& h = state.hyper;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 / (1.0 - std::pow(h.beta1, t));
    const double c2 = 1.0 / (1.0 - std::pow(h.beta2, t));
    const T b1 = static_cast<T>(h.beta1), b2 = static_cast<T>(h.beta2);
    const T lr = static_cast<T>(h.learning_rate), eps = static_cast<T>(h.epsilon);
    const T tc1 = static_cast<T>(c1), tc2 = static_cast<T>(c2);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto value = params[i].value;
        auto grad = params[i].grad;
        auto& m = state.first[i];
        auto& v = state.second[i];
        for (std::size_t j = 0; j < value.size(); ++j) {
            const T g = grad[j];
            m[j] = b1 * m[j] + (T{1} - b1) * g;
            v[j] = b2 * v[j] + (T{1} - b2) * g * g;
            value[j] -= lr * (m[j] * tc1) / (std::sqrt(v[j] * tc2) + eps);
        }
    }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(const std::vector<ParamRef<float>>&, AdamState<float>&);
template void adam_step<double>(const std::vector<ParamRef<double>>&, AdamState<double>&);

}  // namespace cvs::nn
