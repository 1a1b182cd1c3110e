#include "cvs/surrogate.hpp"

#include <algorithm>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "cvs/rng.hpp"

namespace cvs {

namespace {

constexpr std::size_t kDecodeChunk = 128;

}  // namespace

bool inside_training_range(const MinMaxScaler& scaler, std::span<const double> t) {
    if (t.size() != scaler.condition_min.size()) throw std::invalid_argument("condition dimension does not match the scaler");
    for (std::size_t j = 0; j < t.size(); ++j) {
        if (t[j] < scaler.condition_min[j] || t[j] > scaler.condition_max[j]) return false;
    }
    return true;
}

std::vector<float> latent_draws(std::size_t n, std::size_t l, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<float> z(n * l);
    for (float& v : z) v = static_cast<float>(rng.normal());
    return z;
}

std::vector<double> decode_physical(const SurrogateModel& model, std::span<const double> conditions,
                                    std::span<const float> z, std::size_t n) {
    const std::size_t k = model.cvae.condition_dim(), l = model.cvae.latent_dim(), p = model.cvae.pixels();
    const std::size_t c = model.component_index();
    if (conditions.size() != n * k) throw std::invalid_argument("decode_physical: expected " + std::to_string(k) + " condition values per row");
    if (z.size() != n * l) throw std::invalid_argument("decode_physical: latent draws do not match the batch");
    if (model.scaler.condition_min.size() != k || c >= model.scaler.component_min.size()) {
        throw std::invalid_argument("decode_physical: scaler does not match the network");
    }
    std::vector<double> out(n * p);
    const std::size_t chunks = (n + kDecodeChunk - 1) / kDecodeChunk;
#pragma omp parallel for schedule(static)
    for (std::size_t b = 0; b < chunks; ++b) {
        const std::size_t lo = b * kDecodeChunk, m = std::min(kDecodeChunk, n - lo);
        nn::Tensor<float> zc(nn::Shape{m, l + k});
        for (std::size_t i = 0; i < m; ++i) {
            float* row = zc.sample(i);
            std::copy_n(z.data() + (lo + i) * l, l, row);
            for (std::size_t j = 0; j < k; ++j) {
                row[l + j] = static_cast<float>(model.scaler.scale_condition(j, conditions[(lo + i) * k + j]));
            }
        }
        const nn::Tensor<float> x = model.cvae.decode(zc);
        for (std::size_t i = 0; i < m * p; ++i) out[lo * p + i] = model.scaler.unscale_component(c, x.data[i]);
    }
    return out;
}

std::vector<double> sample_conditional(const SurrogateModel& model, std::span<const double> t, std::size_t n,
                                       std::uint64_t seed, bool* extrapolated) {
    if (t.size() != model.cvae.condition_dim()) {
        throw std::invalid_argument("condition has " + std::to_string(t.size()) + " entries, the model expects " +
                                    std::to_string(model.cvae.condition_dim()));
    }
    const bool inside = inside_training_range(model.scaler, t);
    if (!inside) spdlog::warn("condition lies outside the training range; the surrogate is extrapolating");
    if (extrapolated) *extrapolated = !inside;
    std::vector<double> conditions;
    conditions.reserve(n * t.size());
    for (std::size_t i = 0; i < n; ++i) conditions.insert(conditions.end(), t.begin(), t.end());
    return decode_physical(model, conditions, latent_draws(n, model.cvae.latent_dim(), seed), n);
}

}  // namespace cvs
