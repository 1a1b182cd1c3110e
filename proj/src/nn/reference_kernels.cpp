#include <algorithm>

#include "cvs/nn/kernels.hpp"

namespace cvs::nn::reference {

namespace {

// Visits every (output pixel, kernel tap) pair whose input position falls
// inside the image: f(n, co, oy, ox, ci, ky, kx, iy, ix).
template <class F>
void for_each_tap(const ConvGeometry& g, std::size_t batch, F&& f) {
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t co = 0; co < g.out_channels; ++co)
            for (std::size_t oy = 0; oy < g.out_h; ++oy)
                for (std::size_t ox = 0; ox < g.out_w; ++ox)
                    for (std::size_t ci = 0; ci < g.in_channels; ++ci)
                        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
                            const long iy = static_cast<long>(oy * g.stride_h + ky) - static_cast<long>(g.pad_h);
                            if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
                            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                                const long ix = static_cast<long>(ox * g.stride_w + kx) - static_cast<long>(g.pad_w);
                                if (ix < 0 || ix >= static_cast<long>(g.in_w)) continue;
                                f(n, co, oy, ox, ci, ky, kx, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
                            }
                        }
}

}  // namespace

template <class T>
void conv2d_forward(const ConvGeometry& g, std::size_t batch, const T* in, const T* weight, const T* bias, T* out) {
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t co = 0; co < g.out_channels; ++co)
            std::fill_n(out + n * g.out_size() + co * g.out_pixels(), g.out_pixels(), bias ? bias[co] : T{0});
    for_each_tap(g, batch, [&](auto n, auto co, auto oy, auto ox, auto ci, auto ky, auto kx, auto iy, auto ix) {
        const T w = weight[co * g.patch() + (ci * g.kernel_h + ky) * g.kernel_w + kx];
        out[n * g.out_size() + co * g.out_pixels() + oy * g.out_w + ox] +=
            w * in[n * g.in_size() + ci * g.in_pixels() + iy * g.in_w + ix];
    });
}

template <class T>
void conv2d_backward(const ConvGeometry& g, std::size_t batch, const T* in, const T* weight, const T* dout, T* dweight,
                     T* dbias, T* din) {
    if (din) std::fill_n(din, batch * g.in_size(), T{0});
    if (dbias) {
        for (std::size_t n = 0; n < batch; ++n)
            for (std::size_t co = 0; co < g.out_channels; ++co)
                for (std::size_t p = 0; p < g.out_pixels(); ++p) dbias[co] += dout[n * g.out_size() + co * g.out_pixels() + p];
    }
    for_each_tap(g, batch, [&](auto n, auto co, auto oy, auto ox, auto ci, auto ky, auto kx, auto iy, auto ix) {
        const std::size_t wi = co * g.patch() + (ci * g.kernel_h + ky) * g.kernel_w + kx;
        const std::size_t ii = n * g.in_size() + ci * g.in_pixels() + iy * g.in_w + ix;
        const T d = dout[n * g.out_size() + co * g.out_pixels() + oy * g.out_w + ox];
        dweight[wi] += d * in[ii];
        if (din) din[ii] += d * weight[wi];
    });
}

template <class T>
void deconv2d_forward(const ConvGeometry& g, std::size_t batch, const T* in, const T* weight, const T* bias, T* out) {
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t ci = 0; ci < g.in_channels; ++ci)
            std::fill_n(out + n * g.in_size() + ci * g.in_pixels(), g.in_pixels(), bias ? bias[ci] : T{0});
    for_each_tap(g, batch, [&](auto n, auto co, auto oy, auto ox, auto ci, auto ky, auto kx, auto iy, auto ix) {
        const T w = weight[co * g.patch() + (ci * g.kernel_h + ky) * g.kernel_w + kx];
        out[n * g.in_size() + ci * g.in_pixels() + iy * g.in_w + ix] +=
            w * in[n * g.out_size() + co * g.out_pixels() + oy * g.out_w + ox];
    });
}

template <class T>
void deconv2d_backward(const ConvGeometry& g, std::size_t batch, const T* in, const T* weight, const T* dout, T* dweight,
                       T* dbias, T* din) {
    if (din) std::fill_n(din, batch * g.out_size(), T{0});
    if (dbias) {
        for (std::size_t n = 0; n < batch; ++n)
            for (std::size_t ci = 0; ci < g.in_channels; ++ci)
                for (std::size_t p = 0; p < g.in_pixels(); ++p) dbias[ci] += dout[n * g.in_size() + ci * g.in_pixels() + p];
    }
    for_each_tap(g, batch, [&](auto n, auto co, auto oy, auto ox, auto ci, auto ky, auto kx, auto iy, auto ix) {
        const std::size_t wi = co * g.patch() + (ci * g.kernel_h + ky) * g.kernel_w + kx;
        const std::size_t small = n * g.out_size() + co * g.out_pixels() + oy * g.out_w + ox;
        const T d = dout[n * g.in_size() + ci * g.in_pixels() + iy * g.in_w + ix];
        dweight[wi] += d * in[small];
        if (din) din[small] += d * weight[wi];
    });
}

#define CVS_INSTANTIATE(T)                                                                                            \
    template void conv2d_forward<T>(const ConvGeometry&, std::size_t, const T*, const T*, const T*, T*);              \
    template void conv2d_backward<T>(const ConvGeometry&, std::size_t, const T*, const T*, const T*, T*, T*, T*);     \
    template void deconv2d_forward<T>(const ConvGeometry&, std::size_t, const T*, const T*, const T*, T*);            \
    template void deconv2d_backward<T>(const ConvGeometry&, std::size_t, const T*, const T*, const T*, T*, T*, T*);

CVS_INSTANTIATE(float)
CVS_INSTANTIATE(double)
#undef CVS_INSTANTIATE

}  // namespace cvs::nn::reference
