#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cvs/architecture.hpp"
#include "cvs/nn/sequential.hpp"

namespace cvs {

inline constexpr double kLogvarBound = 20.0;

struct CvaeConfig {
    ArchitectureParams arch;
    double kl_weight = 1.0;  ///< lambda; the KL term is divided by the pixel count

    bool operator==(const CvaeConfig&) const = default;
};

/// Batched encoder output, each (N, l). logvar is already clamped.
template <class T>
struct EncoderOutput {
    nn::Tensor<T> mu, logvar;
};

/// Batch means of the loss terms. `kl` is the raw KL divergence per sample;
/// total = mse + kl_weight * kl / pixels.
struct LossTerms {
    double mse = 0.0;
    double kl = 0.0;
    double total = 0.0;
};

/// -1/2 sum(1 + logvar - mu^2 - exp(logvar)).
double kl_term(std::span<const double> mu, std::span<const double> logvar);

template <class T>
class Cvae {
public:
    explicit Cvae(CvaeConfig config);

    const CvaeConfig& config() const { return config_; }
    const Architecture& architecture() const { return arch_; }
    std::size_t latent_dim() const { return arch_.params.latent_dim; }
    std::size_t condition_dim() const { return arch_.params.condition_dim; }
    std::size_t pixels() const { return nn::shape_size(arch_.input); }

    void init(std::uint64_t seed);

    /// x is (N, C, H, W) in scaled space.
    EncoderOutput<T> encode(const nn::Tensor<T>& x) const;
    /// z = mu + eps * exp(logvar / 2), all (N, l).
    static nn::Tensor<T> reparameterize(const EncoderOutput<T>& enc, const nn::Tensor<T>& eps);
    /// [z; t] row by row: (N, l) and (N, k) -> (N, l + k).
    static nn::Tensor<T> condition_concat(const nn::Tensor<T>& z, const nn::Tensor<T>& t);
    /// (N, l + k) -> (N, C, H, W), every value in (0, 1).
    nn::Tensor<T> decode(const nn::Tensor<T>& zc) const;

    LossTerms loss(const nn::Tensor<T>& x, const nn::Tensor<T>& t, const nn::Tensor<T>& eps) const;
    /// Same value as loss(); parameter gradients are overwritten with the
    /// gradient of `total`.
    LossTerms loss_and_gradients(const nn::Tensor<T>& x, const nn::Tensor<T>& t, const nn::Tensor<T>& eps);

    /// Encoder trunk, mu head, logvar head, decoder, each in layer order.
    std::vector<nn::ParamRef<T>> parameters();
    std::size_t parameter_count() const;
    void zero_grad();

private:
    void check_batch(const nn::Tensor<T>& x, const nn::Tensor<T>& t, const nn::Tensor<T>& eps) const;

    CvaeConfig config_;
    Architecture arch_;
    nn::Sequential<T> encoder_, mu_head_, logvar_head_, decoder_;
    nn::Tape<T> enc_tape_, mu_tape_, lv_tape_, dec_tape_;
};

}  // namespace cvs
