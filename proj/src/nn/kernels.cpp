#include <algorithm>
#include <vector>

#include <Eigen/Core>

#include "cvs/nn/kernels.hpp"

namespace cvs::nn::kernels {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

inline long signed_index(std::size_t base, std::size_t tap, std::size_t pad) {
    return static_cast<long>(base + tap) - static_cast<long>(pad);
}

}  // namespace

template <class T>
void im2col(const ConvGeometry& g, const T* image, T* cols) {
    const std::size_t P = g.out_pixels();
    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
        const T* plane = image + ci * g.in_pixels();
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                T* row = cols + ((ci * g.kernel_h + ky) * g.kernel_w + kx) * P;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const long iy = signed_index(oy * g.stride_h, ky, g.pad_h);
                    T* dst = row + oy * g.out_w;
                    if (iy < 0 || iy >= static_cast<long>(g.in_h)) {
                        std::fill_n(dst, g.out_w, T{0});
                        continue;
                    }
                    const T* src = plane + static_cast<std::size_t>(iy) * g.in_w;
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const long ix = signed_index(ox * g.stride_w, kx, g.pad_w);
                        dst[ox] = (ix >= 0 && ix < static_cast<long>(g.in_w)) ? src[ix] : T{0};
                    }
                }
            }
        }
    }
}

template <class T>
void col2im_add(const ConvGeometry& g, const T* cols, T* image) {
    const std::size_t P = g.out_pixels();
    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
        T* plane = image + ci * g.in_pixels();
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const T* row = cols + ((ci * g.kernel_h + ky) * g.kernel_w + kx) * P;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const long iy = signed_index(oy * g.stride_h, ky, g.pad_h);
                    if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
                    const T* src = row + oy * g.out_w;
                    T* dst = plane + static_cast<std::size_t>(iy) * g.in_w;
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const long ix = signed_index(ox * g.stride_w, kx, g.pad_w);
                        if (ix >= 0 && ix < static_cast<long>(g.in_w)) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

template <class T>
void conv2d_forward(const ConvGeometry& g, std::size_t batch, const T* in, const T* weight, const T* bias, T* out,
                    T* workspace) {
    const auto K = static_cast<Eigen::Index>(g.patch());
    const auto P = static_cast<Eigen::Index>(g.out_pixels());
    const auto C = static_cast<Eigen::Index>(g.out_channels);
    ConstMapMat<T> w(weight, C, K);
    const long nb = static_cast<long>(batch);
#pragma omp parallel for schedule(static) if (nb > 1)
    for (long n = 0; n < nb; ++n) {
        T* cols = workspace + static_cast<std::size_t>(n) * g.patch() * g.out_pixels();
        im2col(g, in + static_cast<std::size_t>(n) * g.in_size(), cols);
        MapMat<T> o(out + static_cast<std::size_t>(n) * g.out_size(), C, P);
        o.noalias() = w * ConstMapMat<T>(cols, K, P);
        if (bias) o.colwise() += Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(bias, C);
    }
}

template <class T>
void conv2d_backward(const ConvGeometry& g, std::size_t batch, const T* workspace, const T* weight, const T* dout,
                     T* dweight, T* dbias, T* din) {
    const auto K = static_cast<Eigen::Index>(g.patch());
    const auto P = static_cast<Eigen::Index>(g.out_pixels());
    const auto C = static_cast<Eigen::Index>(g.out_channels);
    MapMat<T> dw(dweight, C, K);
    // Serial over the batch so the accumulation order is fixed.
    for (std::size_t n = 0; n < batch; ++n) {
        ConstMapMat<T> dy(dout + n * g.out_size(), C, P);
        dw.noalias() += dy * ConstMapMat<T>(workspace + n * g.patch() * g.out_pixels(), K, P).transpose();
        if (dbias) Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(dbias, C) += dy.rowwise().sum();
    }
    if (!din) return;
    ConstMapMat<T> w(weight, C, K);
    const long nb = static_cast<long>(batch);
#pragma omp parallel if (nb > 1)
    {
        RowMat<T> dcols(K, P);
#pragma omp for schedule(static)
        for (long n = 0; n < nb; ++n) {
            const auto s = static_cast<std::size_t>(n);
            dcols.noalias() = w.transpose() * ConstMapMat<T>(dout + s * g.out_size(), C, P);
            T* dst = din + s * g.in_size();
            std::fill_n(dst, g.in_size(), T{0});
            col2im_add(g, dcols.data(), dst);
        }
    }
}

template <class T>
void deconv2d_forward(const ConvGeometry& g, std::size_t batch, const T* in, const T* weight, const T* bias, T* out,
                      T* workspace) {
    const auto K = static_cast<Eigen::Index>(g.patch());
    const auto P = static_cast<Eigen::Index>(g.out_pixels());
    const auto C = static_cast<Eigen::Index>(g.out_channels);
    ConstMapMat<T> w(weight, C, K);
    const long nb = static_cast<long>(batch);
#pragma omp parallel for schedule(static) if (nb > 1)
    for (long n = 0; n < nb; ++n) {
        const auto s = static_cast<std::size_t>(n);
        T* cols_ptr = workspace + s * g.patch() * g.out_pixels();
        MapMat<T> cols(cols_ptr, K, P);
        cols.noalias() = w.transpose() * ConstMapMat<T>(in + s * g.out_size(), C, P);
        T* dst = out + s * g.in_size();
        for (std::size_t ci = 0; ci < g.in_channels; ++ci)
            std::fill_n(dst + ci * g.in_pixels(), g.in_pixels(), bias ? bias[ci] : T{0});
        col2im_add(g, cols_ptr, dst);
    }
}

template <class T>
void deconv2d_backward(const ConvGeometry& g, std::size_t batch, const T* in, const T* weight, const T* dout,
                       T* dweight, T* dbias, T* din, T* workspace) {
    const auto K = static_cast<Eigen::Index>(g.patch());
    const auto P = static_cast<Eigen::Index>(g.out_pixels());
    const auto C = static_cast<Eigen::Index>(g.out_channels);
    ConstMapMat<T> w(weight, C, K);
    const long nb = static_cast<long>(batch);
#pragma omp parallel for schedule(static) if (nb > 1)
    for (long n = 0; n < nb; ++n) {
        const auto s = static_cast<std::size_t>(n);
        T* cols = workspace + s * g.patch() * g.out_pixels();
        im2col(g, dout + s * g.in_size(), cols);
        if (din) MapMat<T>(din + s * g.out_size(), C, P).noalias() = w * ConstMapMat<T>(cols, K, P);
    }
    MapMat<T> dw(dweight, C, K);
    for (std::size_t n = 0; n < batch; ++n) {
        dw.noalias() += ConstMapMat<T>(in + n * g.out_size(), C, P) *
                        ConstMapMat<T>(workspace + n * g.patch() * g.out_pixels(), K, P).transpose();
        if (dbias) {
            const T* d = dout + n * g.in_size();
            for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
                T acc{0};
                for (std::size_t p = 0; p < g.in_pixels(); ++p) acc += d[ci * g.in_pixels() + p];
                dbias[ci] += acc;
            }
        }
    }
}

#define CVS_INSTANTIATE(T)                                                                                           \
    template void im2col<T>(const ConvGeometry&, const T*, T*);                                                       \
    template void col2im_add<T>(const ConvGeometry&, const T*, T*);                                                   \
    template void conv2d_forward<T>(const ConvGeometry&, std::size_t, const T*, const T*, const T*, T*, T*);          \
    template void conv2d_backward<T>(const ConvGeometry&, std::size_t, const T*, const T*, const T*, T*, T*, T*);    \
    template void deconv2d_forward<T>(const ConvGeometry&, std::size_t, const T*, const T*, const T*, T*, T*);        \
    template void deconv2d_backward<T>(const ConvGeometry&, std::size_t, const T*, const T*, const T*, T*, T*, T*, T*);

CVS_INSTANTIATE(float)
CVS_INSTANTIATE(double)
#undef CVS_INSTANTIATE

}  // namespace cvs::nn::kernels
