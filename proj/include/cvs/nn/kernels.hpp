#pragma once

#include <cstddef>
#include <span>

namespace cvs::nn {

/// Geometry of a 2-D convolution mapping (in_channels, in_h, in_w) to
/// (out_channels, out_h, out_w). A transposed convolution is described by the
/// geometry of the convolution it is the adjoint of: it maps the "out" side
/// back to the "in" side. Weights are stored as an
/// out_channels x (in_channels * kernel_h * kernel_w) row-major matrix in both
/// cases.
struct ConvGeometry {
    std::size_t in_channels = 1, in_h = 1, in_w = 1;
    std::size_t out_channels = 1, out_h = 1, out_w = 1;
    std::size_t kernel_h = 1, kernel_w = 1;
    std::size_t stride_h = 1, stride_w = 1;
    std::size_t pad_h = 0, pad_w = 0;

    std::size_t patch() const { return in_channels * kernel_h * kernel_w; }
    std::size_t in_pixels() const { return in_h * in_w; }
    std::size_t out_pixels() const { return out_h * out_w; }
    std::size_t in_size() const { return in_channels * in_pixels(); }
    std::size_t out_size() const { return out_channels * out_pixels(); }
    std::size_t weight_size() const { return out_channels * patch(); }
};

// Naive direct loops, serial. Kept as the oracle for the fast kernels and for
// the benchmark baseline. Outputs are overwritten; gradients accumulate.
namespace reference {

template <class T>
void conv2d_forward(const ConvGeometry& g, std::size_t batch, const T* in, const T* weight, const T* bias, T* out);
template <class T>
void conv2d_backward(const ConvGeometry& g, std::size_t batch, const T* in, const T* weight, const T* dout, T* dweight,
                     T* dbias, T* din);
/// in: (batch, out_channels, out_h, out_w); out: (batch, in_channels, in_h, in_w).
/// bias has in_channels entries.
template <class T>
void deconv2d_forward(const ConvGeometry& g, std::size_t batch, const T* in, const T* weight, const T* bias, T* out);
template <class T>
void deconv2d_backward(const ConvGeometry& g, std::size_t batch, const T* in, const T* weight, const T* dout, T* dweight,
                       T* dbias, T* din);

}  // namespace reference

// im2col + GEMM kernels, OpenMP-parallel over the batch. Same contracts as
// the reference versions. `workspace` must hold batch * patch * out_pixels
// values; the forward pass leaves the im2col columns there for backward.
namespace kernels {

template <class T>
void im2col(const ConvGeometry& g, const T* image, T* cols);
template <class T>
void col2im_add(const ConvGeometry& g, const T* cols, T* image);

template <class T>
void conv2d_forward(const ConvGeometry& g, std::size_t batch, const T* in, const T* weight, const T* bias, T* out,
                    T* workspace);
/// Uses the columns left in `workspace` by conv2d_forward. din may be null.
template <class T>
void conv2d_backward(const ConvGeometry& g, std::size_t batch, const T* workspace, const T* weight, const T* dout,
                     T* dweight, T* dbias, T* din);

template <class T>
void deconv2d_forward(const ConvGeometry& g, std::size_t batch, const T* in, const T* weight, const T* bias, T* out,
                      T* workspace);
/// `workspace` is scratch here (batch * patch * out_pixels). din may be null.
template <class T>
void deconv2d_backward(const ConvGeometry& g, std::size_t batch, const T* in, const T* weight, const T* dout,
                       T* dweight, T* dbias, T* din, T* workspace);

}  // namespace kernels

}  // namespace cvs::nn
