#include "cvs/architecture.hpp"

#include <sstream>
#include <stdexcept>

namespace cvs {

using nn::Activation;
using nn::LayerSpec;
using nn::Shape;

namespace {

std::size_t output_padding(std::size_t base, std::size_t target, std::size_t stride, const char* axis) {
    if (target < base || target - base >= stride) {
        throw std::invalid_argument(std::string("no output padding retraces the encoder along ") + axis);
    }
    return target - base;
}

}  // namespace

Architecture build_architecture(const ArchitectureParams& p) {
    if (p.in_channels == 0 || p.rows == 0 || p.cols == 0) throw std::invalid_argument("architecture input must be non-empty");
    if (p.latent_dim == 0 || p.condition_dim == 0) throw std::invalid_argument("latent and condition widths must be positive");
    if (!(p.leaky_slope >= 0.0 && p.leaky_slope < 1.0)) throw std::invalid_argument("leaky slope must lie in [0, 1)");

    Architecture a;
    a.params = p;
    a.input = {p.in_channels, p.rows, p.cols};

    std::vector<Shape> stage_inputs;
    Shape cur = a.input;
    for (const ConvStage& s : p.conv) {
        stage_inputs.push_back(cur);
        LayerSpec spec = LayerSpec::conv(s.channels, s.kernel_h, s.kernel_w, s.stride_h, s.stride_w, s.pad_h, s.pad_w,
                                         Activation::leaky_relu);
        spec.leaky_slope = p.leaky_slope;
        cur = nn::output_shape(spec, cur);
        a.encoder.push_back(spec);
    }
    a.bottleneck = cur;
    a.flatten_width = nn::shape_size(cur);
    a.encoder.push_back(LayerSpec::flatten());
    for (std::size_t w : p.dense) {
        LayerSpec spec = LayerSpec::dense(w, Activation::leaky_relu);
        spec.leaky_slope = p.leaky_slope;
        a.encoder.push_back(spec);
    }
    a.mu_head = LayerSpec::dense(p.latent_dim, Activation::identity);
    a.logvar_head = LayerSpec::dense(p.latent_dim, Activation::identity);

    for (auto it = p.dense.rbegin(); it != p.dense.rend(); ++it) {
        LayerSpec spec = LayerSpec::dense(*it, Activation::leaky_relu);
        spec.leaky_slope = p.leaky_slope;
        a.decoder.push_back(spec);
    }

    const bool has_conv = !p.conv.empty();
    LayerSpec widen = LayerSpec::dense(a.flatten_width, has_conv ? Activation::leaky_relu : Activation::sigmoid);
    widen.leaky_slope = p.leaky_slope;
    a.decoder.push_back(widen);
    a.decoder.push_back(LayerSpec::reshape(a.bottleneck[0], a.bottleneck[1], a.bottleneck[2]));

    cur = a.bottleneck;
    for (std::size_t i = p.conv.size(); i-- > 0;) {
        const ConvStage& s = p.conv[i];
        const Shape& target = stage_inputs[i];
        const std::size_t base_h = (cur[1] - 1) * s.stride_h + s.kernel_h - 2 * s.pad_h;
        const std::size_t base_w = (cur[2] - 1) * s.stride_w + s.kernel_w - 2 * s.pad_w;
        LayerSpec spec = LayerSpec::deconv(target[0], s.kernel_h, s.kernel_w, s.stride_h, s.stride_w, s.pad_h, s.pad_w,
                                           output_padding(base_h, target[1], s.stride_h, "rows"),
                                           output_padding(base_w, target[2], s.stride_w, "columns"),
                                           i == 0 ? Activation::sigmoid : Activation::leaky_relu);
        spec.leaky_slope = p.leaky_slope;
        spec.declared_output = target;
        cur = nn::output_shape(spec, cur);
        a.decoder.push_back(spec);
    }

    // walk the decoder once so shape errors surface here
    Shape d{a.decoder_input()};
    for (const LayerSpec& spec : a.decoder) d = nn::output_shape(spec, d);
    if (d != a.input) throw std::invalid_argument("decoder output " + nn::shape_string(d) + " differs from the input");
    return a;
}

ArchitectureParams table1_params() {
    ArchitectureParams p;
    p.name = "table1";
    p.rows = p.cols = 50;
    p.conv = {{64, 5, 5, 1, 1, 2, 2}, {128, 5, 5, 2, 2, 2, 2}, {128, 5, 5, 2, 2, 1, 1}, {64, 5, 5, 2, 2, 1, 1}};
    p.dense = {512, 128};
    p.latent_dim = 32;
    p.condition_dim = 1;
    return p;
}

ArchitectureParams table2_params() {
    ArchitectureParams p;
    p.name = "table2";
    p.rows = 8;
    p.cols = 24;
    p.conv = {{32, 3, 5, 1, 1, 1, 2}, {32, 3, 5, 2, 2, 1, 2}, {32, 3, 5, 1, 1, 1, 0}};
    p.dense = {64};
    p.latent_dim = 2;
    p.condition_dim = 4;
    return p;
}

ArchitectureParams reduced_plate_params(std::size_t rows, std::size_t cols, std::size_t latent_dim) {
    ArchitectureParams p;
    p.name = "reduced_plate";
    p.rows = rows;
    p.cols = cols;
    p.conv = {{16, 5, 5, 1, 1, 2, 2}, {32, 5, 5, 2, 2, 2, 2}, {32, 5, 5, 2, 2, 2, 2}, {16, 5, 5, 2, 2, 2, 2}};
    p.dense = {128, 64};
    p.latent_dim = latent_dim;
    p.condition_dim = 1;
    return p;
}

ArchitectureParams tiny_params(std::size_t condition_dim) {
    ArchitectureParams p;
    p.name = "tiny";
    p.rows = p.cols = 8;
    p.conv = {{3, 3, 3, 1, 1, 1, 1}, {4, 3, 3, 2, 2, 1, 1}};
    p.dense = {16};
    p.latent_dim = 2;
    p.condition_dim = condition_dim;
    return p;
}

ArchitectureParams preset_architecture(const std::string& name) {
    if (name == "table1") return table1_params();
    if (name == "table2") return table2_params();
    if (name == "reduced_plate") return reduced_plate_params(25, 25, 8);
    if (name == "tiny") return tiny_params();
    throw std::invalid_argument("unknown architecture preset '" + name + "'");
}

std::string describe(const Architecture& a) {
    std::ostringstream out;
    auto walk = [&](const char* part, const std::vector<LayerSpec>& specs, Shape shape) {
        out << part << " input " << nn::shape_string(shape) << '\n';
        for (const LayerSpec& spec : specs) {
            Shape next = nn::output_shape(spec, shape);
            out << "  " << nn::to_string(spec.kind);
            if (spec.kind == nn::LayerKind::conv2d || spec.kind == nn::LayerKind::deconv2d) {
                out << ' ' << spec.units << " (" << spec.kernel_h << 'x' << spec.kernel_w << ") stride (" << spec.stride_h
                    << 'x' << spec.stride_w << ") pad (" << spec.pad_h << 'x' << spec.pad_w << ')';
                if (spec.kind == nn::LayerKind::deconv2d) out << " out_pad (" << spec.out_pad_h << 'x' << spec.out_pad_w << ')';
            } else if (spec.kind == nn::LayerKind::dense) {
                out << " (" << nn::shape_size(shape) << " x " << spec.units << ')';
            }
            out << " -> " << nn::shape_string(next) << ' ' << nn::to_string(spec.activation) << '\n';
            shape = next;
        }
        return shape;
    };
    Shape h = walk("encoder", a.encoder, a.input);
    out << "heads 2 x (" << nn::shape_size(h) << " x " << a.params.latent_dim << ")\n";
    walk("decoder", a.decoder, Shape{a.decoder_input()});
    return out.str();
}

}  // namespace cvs
