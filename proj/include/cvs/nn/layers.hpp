#pragma once

#include <memory>
#include <span>
#include <vector>

#include "cvs/nn/kernels.hpp"
#include "cvs/nn/layer_spec.hpp"
#include "cvs/nn/tensor.hpp"
#include "cvs/rng.hpp"

namespace cvs::nn {

template <class T>
void activate(Activation act, double slope, std::span<T> values);
/// In place: grad <- grad * act'(.), expressed through the activation output.
template <class T>
void activation_backward(Activation act, double slope, std::span<const T> output, std::span<T> grad);

/// Per-call scratch kept between forward and backward.
template <class T>
struct LayerCache {
    Buffer<T> workspace;
};

/// A layer owns its parameters and their gradient accumulators. forward() is
/// const and touches no layer state, so one network can serve concurrent
/// inference calls; backward() accumulates into the gradient buffers.
template <class T>
class Layer {
public:
    Layer(LayerSpec spec, Shape input) : spec_(std::move(spec)), input_(std::move(input)), output_(nn::output_shape(spec_, input_)) {}
    virtual ~Layer() = default;

    const LayerSpec& spec() const { return spec_; }
    const Shape& input_shape() const { return input_; }
    const Shape& output_shape() const { return output_; }

    /// `in` is (batch, input_shape...). When `cache` is null nothing is kept.
    virtual void forward(const Tensor<T>& in, Tensor<T>& out, LayerCache<T>* cache) const = 0;
    /// `in`/`out` are the tensors of the matching forward call; din may be null.
    virtual void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& dout, Tensor<T>* din,
                          LayerCache<T>& cache) = 0;
    virtual std::unique_ptr<Layer> clone() const = 0;

    /// Weights uniform in +-1/sqrt(fan_in); biases zero.
    virtual void init(Rng&) {}
    virtual std::size_t fan_in() const { return 0; }

    std::vector<ParamRef<T>> parameters();
    std::size_t parameter_count() const { return weight_.size() + bias_.size(); }
    void zero_grad();

protected:
    Shape batched(std::size_t n, const Shape& s) const {
        Shape out{n};
        out.insert(out.end(), s.begin(), s.end());
        return out;
    }
    void check_input(const Tensor<T>& in) const;

    LayerSpec spec_;
    Shape input_, output_;
    Buffer<T> weight_, bias_;
    Buffer<T> dweight_, dbias_;
};

template <class T>
class Conv2d final : public Layer<T> {
public:
    Conv2d(const LayerSpec& spec, const Shape& input);
    void forward(const Tensor<T>& in, Tensor<T>& out, LayerCache<T>* cache) const override;
    void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& dout, Tensor<T>* din,
                  LayerCache<T>& cache) override;
    std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }
    void init(Rng& rng) override;
    std::size_t fan_in() const override { return geom_.patch(); }
    const ConvGeometry& geometry() const { return geom_; }

private:
    ConvGeometry geom_;
};

/// Transposed convolution: the adjoint of the Conv2d with the mirrored
/// geometry, plus bias and activation.
template <class T>
class Deconv2d final : public Layer<T> {
public:
    Deconv2d(const LayerSpec& spec, const Shape& input);
    void forward(const Tensor<T>& in, Tensor<T>& out, LayerCache<T>* cache) const override;
    void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& dout, Tensor<T>* din,
                  LayerCache<T>& cache) override;
    std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Deconv2d>(*this); }
    void init(Rng& rng) override;
    std::size_t fan_in() const override { return geom_.out_channels * geom_.kernel_h * geom_.kernel_w; }
    const ConvGeometry& geometry() const { return geom_; }

private:
    ConvGeometry geom_;
};

template <class T>
class Dense final : public Layer<T> {
public:
    Dense(const LayerSpec& spec, const Shape& input);
    void forward(const Tensor<T>& in, Tensor<T>& out, LayerCache<T>* cache) const override;
    void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& dout, Tensor<T>* din,
                  LayerCache<T>& cache) override;
    std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }
    void init(Rng& rng) override;
    std::size_t fan_in() const override { return this->input_[0]; }
};

/// Flatten and reshape: data is untouched, only the shape changes.
template <class T>
class ShapeOnly final : public Layer<T> {
public:
    ShapeOnly(const LayerSpec& spec, const Shape& input) : Layer<T>(spec, input) {}
    void forward(const Tensor<T>& in, Tensor<T>& out, LayerCache<T>* cache) const override;
    void backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& dout, Tensor<T>* din,
                  LayerCache<T>& cache) override;
    std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ShapeOnly>(*this); }
};

template <class T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, const Shape& input);

}  // namespace cvs::nn
