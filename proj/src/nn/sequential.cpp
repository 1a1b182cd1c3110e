#include "cvs/nn/sequential.hpp"

#include <stdexcept>

namespace cvs::nn {

template <class T>
Sequential<T>::Sequential(const std::vector<LayerSpec>& specs, Shape input) : input_(std::move(input)) {
    Shape current = input_;
    for (const LayerSpec& spec : specs) {
        layers_.push_back(make_layer<T>(spec, current));
        current = layers_.back()->output_shape();
    }
}

template <class T>
Sequential<T>::Sequential(const Sequential& other) : input_(other.input_) {
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

template <class T>
Sequential<T>& Sequential<T>::operator=(const Sequential& other) {
    if (this != &other) {
        Sequential tmp(other);
        *this = std::move(tmp);
    }
    return *this;
}

template <class T>
std::vector<LayerSpec> Sequential<T>::specs() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers_) out.push_back(l->spec());
    return out;
}

template <class T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& in) const {
    Tensor<T> a = in, b;
    for (const auto& l : layers_) {
        l->forward(a, b, nullptr);
        std::swap(a, b);
    }
    return a;
}

template <class T>
const Tensor<T>& Sequential<T>::forward(const Tensor<T>& in, Tape<T>& tape) const {
    tape.values.resize(layers_.size() + 1);
    tape.caches.resize(layers_.size());
    tape.values[0] = in;
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->forward(tape.values[i], tape.values[i + 1], &tape.caches[i]);
    tape.valid = true;
    return tape.values.back();
}

template <class T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& dout, Tape<T>& tape) {
    if (!tape.valid || tape.values.size() != layers_.size() + 1) {
        throw std::logic_error("backward called without a matching forward pass");
    }
    if (dout.shape != tape.values.back().shape) throw std::invalid_argument("backward: upstream gradient shape mismatch");
    Tensor<T> grad = dout, next;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        layers_[i]->backward(tape.values[i], tape.values[i + 1], grad, &next, tape.caches[i]);
        std::swap(grad, next);
    }
    return grad;
}

template <class T>
void Sequential<T>::init(Rng& rng) {
    for (auto& l : layers_) l->init(rng);
}

template <class T>
void Sequential<T>::zero_grad() {
    for (auto& l : layers_) l->zero_grad();
}

template <class T>
std::vector<ParamRef<T>> Sequential<T>::parameters() {
    std::vector<ParamRef<T>> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        for (auto& p : layers_[i]->parameters()) {
            p.name = "layer" + std::to_string(i) + "." + p.name;
            out.push_back(p);
        }
    }
    return out;
}

template <class T>
std::size_t Sequential<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l->parameter_count();
    return n;
}

template class Sequential<float>;
template class Sequential<double>;

}  // namespace cvs::nn
