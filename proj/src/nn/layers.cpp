#include "cvs/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Core>

namespace cvs::nn {

std::string shape_string(const Shape& s) {
    std::ostringstream out;
    out << '(';
    for (std::size_t i = 0; i < s.size(); ++i) out << (i ? "x" : "") << s[i];
    out << ')';
    return out.str();
}

std::string to_string(LayerKind k) {
    switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::deconv2d: return "deconv2d";
    case LayerKind::dense: return "dense";
    case LayerKind::flatten: return "flatten";
    case LayerKind::reshape: return "reshape";
    }
    return "?";
}

std::string to_string(Activation a) {
    switch (a) {
    case Activation::identity: return "identity";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::sigmoid: return "sigmoid";
    }
    return "?";
}

LayerKind parse_layer_kind(const std::string& s) {
    for (auto k : {LayerKind::conv2d, LayerKind::deconv2d, LayerKind::dense, LayerKind::flatten, LayerKind::reshape})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown layer kind '" + s + "'");
}

Activation parse_activation(const std::string& s) {
    for (auto a : {Activation::identity, Activation::leaky_relu, Activation::sigmoid})
        if (to_string(a) == s) return a;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

LayerSpec LayerSpec::conv(std::size_t channels, std::size_t kh, std::size_t kw, std::size_t sh, std::size_t sw,
                          std::size_t ph, std::size_t pw, Activation act) {
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.units = channels;
    s.kernel_h = kh, s.kernel_w = kw, s.stride_h = sh, s.stride_w = sw, s.pad_h = ph, s.pad_w = pw;
    s.activation = act;
    return s;
}

LayerSpec LayerSpec::deconv(std::size_t channels, std::size_t kh, std::size_t kw, std::size_t sh, std::size_t sw,
                            std::size_t ph, std::size_t pw, std::size_t oph, std::size_t opw, Activation act) {
    LayerSpec s = conv(channels, kh, kw, sh, sw, ph, pw, act);
    s.kind = LayerKind::deconv2d;
    s.out_pad_h = oph, s.out_pad_w = opw;
    return s;
}

LayerSpec LayerSpec::dense(std::size_t width, Activation act) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.units = width;
    s.activation = act;
    return s;
}

LayerSpec LayerSpec::flatten() {
    LayerSpec s;
    s.kind = LayerKind::flatten;
    return s;
}

LayerSpec LayerSpec::reshape(std::size_t c, std::size_t h, std::size_t w) {
    LayerSpec s;
    s.kind = LayerKind::reshape;
    s.target = {c, h, w};
    return s;
}

std::size_t conv_output_extent(std::size_t in, std::size_t k, std::size_t s, std::size_t p) {
    if (k == 0 || s == 0) throw std::invalid_argument("kernel and stride must be positive");
    const long span = static_cast<long>(in + 2 * p) - static_cast<long>(k);
    if (span < 0) throw std::invalid_argument("convolution padding produces a non-positive output size");
    return static_cast<std::size_t>(span) / s + 1;
}

std::size_t deconv_output_extent(std::size_t in, std::size_t k, std::size_t s, std::size_t p, std::size_t op) {
    if (k == 0 || s == 0) throw std::invalid_argument("kernel and stride must be positive");
    if (op >= s && op > 0) throw std::invalid_argument("output padding must be smaller than the stride");
    const long out = static_cast<long>((in - 1) * s + k + op) - static_cast<long>(2 * p);
    if (out <= 0) throw std::invalid_argument("transposed convolution produces a non-positive output size");
    return static_cast<std::size_t>(out);
}

Shape output_shape(const LayerSpec& spec, const Shape& input) {
    Shape out;
    switch (spec.kind) {
    case LayerKind::conv2d:
    case LayerKind::deconv2d:
        if (input.size() != 3) throw std::invalid_argument(to_string(spec.kind) + " expects a (C, H, W) input, got " + shape_string(input));
        if (spec.units == 0) throw std::invalid_argument("convolution needs at least one output channel");
        if (spec.kind == LayerKind::conv2d) {
            out = {spec.units, conv_output_extent(input[1], spec.kernel_h, spec.stride_h, spec.pad_h),
                   conv_output_extent(input[2], spec.kernel_w, spec.stride_w, spec.pad_w)};
        } else {
            out = {spec.units, deconv_output_extent(input[1], spec.kernel_h, spec.stride_h, spec.pad_h, spec.out_pad_h),
                   deconv_output_extent(input[2], spec.kernel_w, spec.stride_w, spec.pad_w, spec.out_pad_w)};
        }
        break;
    case LayerKind::dense:
        if (input.size() != 1) throw std::invalid_argument("dense expects a flat input, got " + shape_string(input));
        if (spec.units == 0) throw std::invalid_argument("dense layer needs a positive width");
        out = {spec.units};
        break;
    case LayerKind::flatten:
        out = {shape_size(input)};
        break;
    case LayerKind::reshape:
        if (shape_size(spec.target) != shape_size(input)) {
            throw std::invalid_argument("reshape " + shape_string(input) + " -> " + shape_string(spec.target) + " changes the element count");
        }
        out = spec.target;
        break;
    }
    if (!spec.declared_output.empty() && spec.declared_output != out) {
        throw std::invalid_argument(to_string(spec.kind) + " declared output " + shape_string(spec.declared_output) +
                                    " but computes " + shape_string(out));
    }
    return out;
}

// ---------------------------------------------------------------------------

template <class T>
void activate(Activation act, double slope, std::span<T> values) {
    switch (act) {
    case Activation::identity: return;
    case Activation::leaky_relu: {
        const T a = static_cast<T>(slope);
        for (T& v : values) v = v > T{0} ? v : a * v;
        return;
    }
    case Activation::sigmoid:
        for (T& v : values) v = T{1} / (T{1} + std::exp(-v));
        return;
    }
}

template <class T>
void activation_backward(Activation act, double slope, std::span<const T> output, std::span<T> grad) {
    switch (act) {
    case Activation::identity: return;
    case Activation::leaky_relu: {
        const T a = static_cast<T>(slope);
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= output[i] > T{0} ? T{1} : a;
        return;
    }
    case Activation::sigmoid:
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= output[i] * (T{1} - output[i]);
        return;
    }
}

template <class T>
std::vector<ParamRef<T>> Layer<T>::parameters() {
    std::vector<ParamRef<T>> out;
    if (!weight_.empty()) out.push_back({to_string(spec_.kind) + ".weight", weight_, dweight_});
    if (!bias_.empty()) out.push_back({to_string(spec_.kind) + ".bias", bias_, dbias_});
    return out;
}

template <class T>
void Layer<T>::zero_grad() {
    std::fill(dweight_.begin(), dweight_.end(), T{0});
    std::fill(dbias_.begin(), dbias_.end(), T{0});
}

template <class T>
void Layer<T>::check_input(const Tensor<T>& in) const {
    if (in.shape.size() != input_.size() + 1 || !std::equal(input_.begin(), input_.end(), in.shape.begin() + 1)) {
        throw std::invalid_argument(to_string(spec_.kind) + ": input " + shape_string(in.shape) + " does not match expected " +
                                    shape_string(input_));
    }
}

namespace {

template <class T>
void uniform_fill(Rng& rng, Buffer<T>& v, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (T& x : v) x = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d

template <class T>
Conv2d<T>::Conv2d(const LayerSpec& spec, const Shape& input) : Layer<T>(spec, input) {
    const Shape& out = this->output_;
    geom_ = ConvGeometry{input[0], input[1], input[2], out[0], out[1], out[2],
                         spec.kernel_h, spec.kernel_w, spec.stride_h, spec.stride_w, spec.pad_h, spec.pad_w};
    this->weight_.assign(geom_.weight_size(), T{0});
    this->bias_.assign(geom_.out_channels, T{0});
    this->dweight_.assign(this->weight_.size(), T{0});
    this->dbias_.assign(this->bias_.size(), T{0});
}

template <class T>
void Conv2d<T>::init(Rng& rng) {
    uniform_fill(rng, this->weight_, fan_in());
    std::fill(this->bias_.begin(), this->bias_.end(), T{0});
}

template <class T>
void Conv2d<T>::forward(const Tensor<T>& in, Tensor<T>& out, LayerCache<T>* cache) const {
    this->check_input(in);
    const std::size_t n = in.batch();
    out.resize(this->batched(n, this->output_));
    Buffer<T> local;
    Buffer<T>& ws = cache ? cache->workspace : local;
    ws.resize(n * geom_.patch() * geom_.out_pixels());
    kernels::conv2d_forward(geom_, n, in.data.data(), this->weight_.data(), this->bias_.data(), out.data.data(), ws.data());
    activate<T>(this->spec_.activation, this->spec_.leaky_slope, out.data);
}

template <class T>
void Conv2d<T>::backward(const Tensor<T>&, const Tensor<T>& out, const Tensor<T>& dout, Tensor<T>* din,
                         LayerCache<T>& cache) {
    Buffer<T> dz = dout.data;
    activation_backward<T>(this->spec_.activation, this->spec_.leaky_slope, out.data, dz);
    const std::size_t n = out.batch();
    if (din) din->resize(this->batched(n, this->input_));
    kernels::conv2d_backward(geom_, n, cache.workspace.data(), this->weight_.data(), dz.data(), this->dweight_.data(),
                             this->dbias_.data(), din ? din->data.data() : nullptr);
}

// ---------------------------------------------------------------------------
// Deconv2d

template <class T>
Deconv2d<T>::Deconv2d(const LayerSpec& spec, const Shape& input) : Layer<T>(spec, input) {
    const Shape& out = this->output_;
    // Mirrored geometry: the convolution from the output grid back to the input grid.
    geom_ = ConvGeometry{out[0], out[1], out[2], input[0], input[1], input[2],
                         spec.kernel_h, spec.kernel_w, spec.stride_h, spec.stride_w, spec.pad_h, spec.pad_w};
    if (conv_output_extent(out[1], spec.kernel_h, spec.stride_h, spec.pad_h) != input[1] ||
        conv_output_extent(out[2], spec.kernel_w, spec.stride_w, spec.pad_w) != input[2]) {
        throw std::invalid_argument("deconv2d geometry is not the adjoint of a convolution");
    }
    this->weight_.assign(geom_.weight_size(), T{0});
    this->bias_.assign(geom_.in_channels, T{0});
    this->dweight_.assign(this->weight_.size(), T{0});
    this->dbias_.assign(this->bias_.size(), T{0});
}

template <class T>
void Deconv2d<T>::init(Rng& rng) {
    uniform_fill(rng, this->weight_, fan_in());
    std::fill(this->bias_.begin(), this->bias_.end(), T{0});
}

template <class T>
void Deconv2d<T>::forward(const Tensor<T>& in, Tensor<T>& out, LayerCache<T>* cache) const {
    this->check_input(in);
    const std::size_t n = in.batch();
    out.resize(this->batched(n, this->output_));
    Buffer<T> local;
    Buffer<T>& ws = cache ? cache->workspace : local;
    ws.resize(n * geom_.patch() * geom_.out_pixels());
    kernels::deconv2d_forward(geom_, n, in.data.data(), this->weight_.data(), this->bias_.data(), out.data.data(), ws.data());
    activate<T>(this->spec_.activation, this->spec_.leaky_slope, out.data);
}

template <class T>
void Deconv2d<T>::backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& dout, Tensor<T>* din,
                           LayerCache<T>& cache) {
    Buffer<T> dz = dout.data;
    activation_backward<T>(this->spec_.activation, this->spec_.leaky_slope, out.data, dz);
    const std::size_t n = out.batch();
    if (din) din->resize(this->batched(n, this->input_));
    cache.workspace.resize(n * geom_.patch() * geom_.out_pixels());
    kernels::deconv2d_backward(geom_, n, in.data.data(), this->weight_.data(), dz.data(), this->dweight_.data(),
                               this->dbias_.data(), din ? din->data.data() : nullptr, cache.workspace.data());
}

// ---------------------------------------------------------------------------
// Dense

template <class T>
Dense<T>::Dense(const LayerSpec& spec, const Shape& input) : Layer<T>(spec, input) {
    this->weight_.assign(spec.units * input[0], T{0});
    this->bias_.assign(spec.units, T{0});
    this->dweight_.assign(this->weight_.size(), T{0});
    this->dbias_.assign(this->bias_.size(), T{0});
}

template <class T>
void Dense<T>::init(Rng& rng) {
    uniform_fill(rng, this->weight_, fan_in());
    std::fill(this->bias_.begin(), this->bias_.end(), T{0});
}

namespace {
template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
}

template <class T>
void Dense<T>::forward(const Tensor<T>& in, Tensor<T>& out, LayerCache<T>*) const {
    this->check_input(in);
    const auto n = static_cast<Eigen::Index>(in.batch());
    const auto width_in = static_cast<Eigen::Index>(this->input_[0]);
    const auto width_out = static_cast<Eigen::Index>(this->spec_.units);
    out.resize(this->batched(in.batch(), this->output_));
    Eigen::Map<const RowMat<T>> x(in.data.data(), n, width_in);
    Eigen::Map<const RowMat<T>> w(this->weight_.data(), width_out, width_in);
    Eigen::Map<RowMat<T>> y(out.data.data(), n, width_out);
    y.noalias() = x * w.transpose();
    y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(this->bias_.data(), width_out);
    activate<T>(this->spec_.activation, this->spec_.leaky_slope, out.data);
}

template <class T>
void Dense<T>::backward(const Tensor<T>& in, const Tensor<T>& out, const Tensor<T>& dout, Tensor<T>* din,
                        LayerCache<T>&) {
    Buffer<T> dz = dout.data;
    activation_backward<T>(this->spec_.activation, this->spec_.leaky_slope, out.data, dz);
    const auto n = static_cast<Eigen::Index>(in.batch());
    const auto width_in = static_cast<Eigen::Index>(this->input_[0]);
    const auto width_out = static_cast<Eigen::Index>(this->spec_.units);
    Eigen::Map<const RowMat<T>> x(in.data.data(), n, width_in);
    Eigen::Map<const RowMat<T>> w(this->weight_.data(), width_out, width_in);
    Eigen::Map<const RowMat<T>> g(dz.data(), n, width_out);
    Eigen::Map<RowMat<T>>(this->dweight_.data(), width_out, width_in).noalias() += g.transpose() * x;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(this->dbias_.data(), width_out) += g.colwise().sum();
    if (din) {
        din->resize(this->batched(in.batch(), this->input_));
        Eigen::Map<RowMat<T>>(din->data.data(), n, width_in).noalias() = g * w;
    }
}

// ---------------------------------------------------------------------------
// Flatten / reshape

template <class T>
void ShapeOnly<T>::forward(const Tensor<T>& in, Tensor<T>& out, LayerCache<T>*) const {
    this->check_input(in);
    out.shape = this->batched(in.batch(), this->output_);
    out.data = in.data;
}

template <class T>
void ShapeOnly<T>::backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& dout, Tensor<T>* din, LayerCache<T>&) {
    if (!din) return;
    din->shape = this->batched(in.batch(), this->input_);
    din->data = dout.data;
}

template <class T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, const Shape& input) {
    switch (spec.kind) {
    case LayerKind::conv2d: return std::make_unique<Conv2d<T>>(spec, input);
    case LayerKind::deconv2d: return std::make_unique<Deconv2d<T>>(spec, input);
    case LayerKind::dense: return std::make_unique<Dense<T>>(spec, input);
    case LayerKind::flatten:
    case LayerKind::reshape: return std::make_unique<ShapeOnly<T>>(spec, input);
    }
    throw std::invalid_argument("unknown layer kind");
}

#define CVS_INSTANTIATE(T)                                                                          \
    template void activate<T>(Activation, double, std::span<T>);                                    \
    template void activation_backward<T>(Activation, double, std::span<const T>, std::span<T>);    \
    template class Layer<T>;                                                                        \
    template class Conv2d<T>;                                                                       \
    template class Deconv2d<T>;                                                                     \
    template class Dense<T>;                                                                        \
    template class ShapeOnly<T>;                                                                    \
    template std::unique_ptr<Layer<T>> make_layer<T>(const LayerSpec&, const Shape&);

CVS_INSTANTIATE(float)
CVS_INSTANTIATE(double)
#undef CVS_INSTANTIATE

}  // namespace cvs::nn
