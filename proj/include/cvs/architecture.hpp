#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cvs/nn/layer_spec.hpp"

namespace cvs {

struct ConvStage {
    std::size_t channels = 1;
    std::size_t kernel_h = 3, kernel_w = 3;
    std::size_t stride_h = 1, stride_w = 1;
    std::size_t pad_h = 0, pad_w = 0;

    bool operator==(const ConvStage&) const = default;
};

/// Encoder description from which the decoder is mirrored: conv stages, then
/// flatten and dense layers, then two parallel heads of width latent_dim.
struct ArchitectureParams {
    std::string name = "custom";
    std::size_t in_channels = 1;
    std::size_t rows = 0, cols = 0;
    std::vector<ConvStage> conv;
    std::vector<std::size_t> dense;
    std::size_t latent_dim = 2;
    std::size_t condition_dim = 1;
    double leaky_slope = nn::kLeakySlope;

    bool operator==(const ArchitectureParams&) const = default;
};

struct Architecture {
    ArchitectureParams params;
    nn::Shape input;       ///< (C, H, W)
    nn::Shape bottleneck;  ///< shape after the last conv stage
    std::size_t flatten_width = 0;
    std::vector<nn::LayerSpec> encoder;  ///< trunk up to the last hidden dense layer
    nn::LayerSpec mu_head, logvar_head;
    std::vector<nn::LayerSpec> decoder;  ///< input width latent_dim + condition_dim

    std::size_t decoder_input() const { return params.latent_dim + params.condition_dim; }
};

/// Builds the encoder and its mirror image. Each decoder deconvolution reuses
/// the geometry of the matching conv stage, with the output padding chosen so
/// the spatial extents retrace the encoder exactly. Throws
/// std::invalid_argument on an inconsistent description.
Architecture build_architecture(const ArchitectureParams& params);

/// 50x50 single-condition plate network: conv 64/128/128/64 (5x5), dense 512,
/// 128, latent 32.
ArchitectureParams table1_params();
/// 8x24 four-condition network: conv 32x3 (3x5), dense 64, latent 2.
ArchitectureParams table2_params();
/// The plate network with a quarter of the channels, for the given grid.
ArchitectureParams reduced_plate_params(std::size_t rows, std::size_t cols, std::size_t latent_dim);
/// 8x8 network small enough for finite-difference checks.
ArchitectureParams tiny_params(std::size_t condition_dim = 1);

ArchitectureParams preset_architecture(const std::string& name);

/// Layer-by-layer shape walkthrough, one line per layer.
std::string describe(const Architecture& arch);

}  // namespace cvs
