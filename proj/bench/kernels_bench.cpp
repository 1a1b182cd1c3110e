#include <vector>

#include <benchmark/benchmark.h>

#include "cvs/nn/kernels.hpp"
#include "cvs/nn/layer_spec.hpp"
#include "cvs/rng.hpp"

using namespace cvs::nn;

namespace {

// A 5x5 stride-2 stage, 16 -> 32 channels.
ConvGeometry plate_stage(std::size_t size) {
    ConvGeometry g;
    g.in_channels = 16;
    g.out_channels = 32;
    g.in_h = g.in_w = size;
    g.kernel_h = g.kernel_w = 5;
    g.stride_h = g.stride_w = 2;
    g.pad_h = g.pad_w = 2;
    g.out_h = conv_output_extent(g.in_h, 5, 2, 2);
    g.out_w = conv_output_extent(g.in_w, 5, 2, 2);
    return g;
}

struct Buffers {
    std::vector<float> in, weight, bias, out, dout, dweight, dbias, din, workspace;

    Buffers(const ConvGeometry& g, std::size_t batch) {
        cvs::Rng rng(1);
        auto fill = [&](std::vector<float>& v, std::size_t n) {
            v.resize(n);
            for (float& x : v) x = static_cast<float>(rng.normal());
        };
        fill(in, batch * g.in_size());
        fill(weight, g.weight_size());
        fill(bias, g.out_channels);
        fill(dout, batch * g.out_size());
        out.resize(batch * g.out_size());
        dweight.resize(g.weight_size());
        dbias.resize(g.out_channels);
        din.resize(batch * g.in_size());
        workspace.resize(batch * g.patch() * g.out_pixels());
    }
};

constexpr std::size_t kBatch = 8;

void BM_conv_forward_reference(benchmark::State& state) {
    const ConvGeometry g = plate_stage(static_cast<std::size_t>(state.range(0)));
    Buffers b(g, kBatch);
    for (auto _ : state) {
        reference::conv2d_forward(g, kBatch, b.in.data(), b.weight.data(), b.bias.data(), b.out.data());
        benchmark::DoNotOptimize(b.out.data());
    }
}

void BM_conv_forward_fast(benchmark::State& state) {
    const ConvGeometry g = plate_stage(static_cast<std::size_t>(state.range(0)));
    Buffers b(g, kBatch);
    for (auto _ : state) {
        kernels::conv2d_forward(g, kBatch, b.in.data(), b.weight.data(), b.bias.data(), b.out.data(), b.workspace.data());
        benchmark::DoNotOptimize(b.out.data());
    }
}

void BM_conv_backward_reference(benchmark::State& state) {
    const ConvGeometry g = plate_stage(static_cast<std::size_t>(state.range(0)));
    Buffers b(g, kBatch);
    for (auto _ : state) {
        reference::conv2d_backward(g, kBatch, b.in.data(), b.weight.data(), b.dout.data(), b.dweight.data(), b.dbias.data(),
                                   b.din.data());
        benchmark::DoNotOptimize(b.din.data());
    }
}

void BM_conv_backward_fast(benchmark::State& state) {
    const ConvGeometry g = plate_stage(static_cast<std::size_t>(state.range(0)));
    Buffers b(g, kBatch);
    kernels::conv2d_forward(g, kBatch, b.in.data(), b.weight.data(), b.bias.data(), b.out.data(), b.workspace.data());
    for (auto _ : state) {
        kernels::conv2d_backward(g, kBatch, b.workspace.data(), b.weight.data(), b.dout.data(), b.dweight.data(), b.dbias.data(),
                                 b.din.data());
        benchmark::DoNotOptimize(b.din.data());
    }
}

// Transposed direction: dout-shaped input, in-shaped output.
void BM_deconv_forward_reference(benchmark::State& state) {
    const ConvGeometry g = plate_stage(static_cast<std::size_t>(state.range(0)));
    Buffers b(g, kBatch);
    for (auto _ : state) {
        reference::deconv2d_forward<float>(g, kBatch, b.dout.data(), b.weight.data(), nullptr, b.din.data());
        benchmark::DoNotOptimize(b.din.data());
    }
}

void BM_deconv_forward_fast(benchmark::State& state) {
    const ConvGeometry g = plate_stage(static_cast<std::size_t>(state.range(0)));
    Buffers b(g, kBatch);
    for (auto _ : state) {
        kernels::deconv2d_forward<float>(g, kBatch, b.dout.data(), b.weight.data(), nullptr, b.din.data(), b.workspace.data());
        benchmark::DoNotOptimize(b.din.data());
    }
}

}  // namespace

BENCHMARK(BM_conv_forward_reference)->Arg(25)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_conv_forward_fast)->Arg(25)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_conv_backward_reference)->Arg(25)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_conv_backward_fast)->Arg(25)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_deconv_forward_reference)->Arg(25)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_deconv_forward_fast)->Arg(25)->Arg(50)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
