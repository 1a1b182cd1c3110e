#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cvs/nn/tensor.hpp"

namespace cvs::nn {

enum class LayerKind { conv2d, deconv2d, dense, flatten, reshape };
enum class Activation { identity, leaky_relu, sigmoid };

std::string to_string(LayerKind k);
std::string to_string(Activation a);
LayerKind parse_layer_kind(const std::string& s);
Activation parse_activation(const std::string& s);

inline constexpr double kLeakySlope = 0.01;

struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    std::size_t units = 0;  ///< output channels (conv/deconv) or width (dense)
    std::size_t kernel_h = 1, kernel_w = 1;
    std::size_t stride_h = 1, stride_w = 1;
    std::size_t pad_h = 0, pad_w = 0;
    std::size_t out_pad_h = 0, out_pad_w = 0;  ///< deconv only
    Activation activation = Activation::identity;
    double leaky_slope = kLeakySlope;
    Shape target;  ///< reshape target (C, H, W)
    Shape declared_output;  ///< optional; checked against the computed shape when non-empty

    static LayerSpec conv(std::size_t channels, std::size_t kh, std::size_t kw, std::size_t sh, std::size_t sw,
                          std::size_t ph, std::size_t pw, Activation act);
    static LayerSpec deconv(std::size_t channels, std::size_t kh, std::size_t kw, std::size_t sh, std::size_t sw,
                            std::size_t ph, std::size_t pw, std::size_t oph, std::size_t opw, Activation act);
    static LayerSpec dense(std::size_t width, Activation act);
    static LayerSpec flatten();
    static LayerSpec reshape(std::size_t c, std::size_t h, std::size_t w);

    bool operator==(const LayerSpec&) const = default;
};

/// floor((in + 2p - k) / s) + 1; throws when the result is not positive.
std::size_t conv_output_extent(std::size_t in, std::size_t k, std::size_t s, std::size_t p);
/// (in - 1) s - 2p + k + op; throws when the result is not positive or op >= s.
std::size_t deconv_output_extent(std::size_t in, std::size_t k, std::size_t s, std::size_t p, std::size_t op);

/// Per-sample output shape of a layer; throws std::invalid_argument on any
/// inconsistency, including a mismatch with declared_output.
Shape output_shape(const LayerSpec& spec, const Shape& input);

}  // namespace cvs::nn
