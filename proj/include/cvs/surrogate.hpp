#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cvs/cvae.hpp"
#include "cvs/dataset.hpp"
#include "cvs/field_gen.hpp"

namespace cvs {

/// A trained network for one strain component together with the scaler that
/// maps between physical and scaled space.
struct SurrogateModel {
    StrainComponent component = StrainComponent::xx;
    MinMaxScaler scaler;
    Cvae<float> cvae;

    std::size_t component_index() const { return static_cast<std::size_t>(component); }
};

/// True when every entry of t lies inside the training range of the scaler.
bool inside_training_range(const MinMaxScaler& scaler, std::span<const double> t);

/// Decodes [z_i; scale(t_i)] for each row and maps the result back to physical
/// units. conditions is N x k (physical), z is N x l. Returns N x H*W values.
std::vector<double> decode_physical(const SurrogateModel& model, std::span<const double> conditions,
                                    std::span<const float> z, std::size_t n);

/// n draws z ~ N(0, I) at the fixed physical condition t, decoded to physical
/// units (n x H*W). A condition outside the training range is decoded anyway
/// and reported through a logged warning and `extrapolated`.
std::vector<double> sample_conditional(const SurrogateModel& model, std::span<const double> t, std::size_t n,
                                       std::uint64_t seed, bool* extrapolated = nullptr);

/// Standard normal draws for n rows of width l from one seed.
std::vector<float> latent_draws(std::size_t n, std::size_t l, std::uint64_t seed);

}  // namespace cvs
