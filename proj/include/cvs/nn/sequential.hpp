#pragma once

#include <memory>
#include <vector>

#include "cvs/nn/layers.hpp"

namespace cvs::nn {

/// Intermediate values recorded by a forward pass for the matching backward.
template <class T>
struct Tape {
    std::vector<Tensor<T>> values;  ///< values[0] is the input, values[i+1] the output of layer i
    std::vector<LayerCache<T>> caches;
    bool valid = false;
};

/// A chain of layers built from LayerSpecs; shapes are inferred (and checked
/// against any declared shapes) at construction.
template <class T>
class Sequential {
public:
    Sequential() = default;
    Sequential(const std::vector<LayerSpec>& specs, Shape input);
    Sequential(const Sequential& other);
    Sequential& operator=(const Sequential& other);
    Sequential(Sequential&&) noexcept = default;
    Sequential& operator=(Sequential&&) noexcept = default;

    const Shape& input_shape() const { return input_; }
    Shape output_shape() const { return layers_.empty() ? input_ : layers_.back()->output_shape(); }
    std::size_t size() const { return layers_.size(); }
    const Layer<T>& layer(std::size_t i) const { return *layers_[i]; }
    std::vector<LayerSpec> specs() const;

    Tensor<T> forward(const Tensor<T>& in) const;
    const Tensor<T>& forward(const Tensor<T>& in, Tape<T>& tape) const;
    /// Accumulates parameter gradients and returns the input gradient. Throws
    /// std::logic_error when the tape holds no forward pass.
    Tensor<T> backward(const Tensor<T>& dout, Tape<T>& tape);

    void init(Rng& rng);
    void zero_grad();
    std::vector<ParamRef<T>> parameters();
    std::size_t parameter_count() const;

private:
    Shape input_;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
};

}  // namespace cvs::nn
