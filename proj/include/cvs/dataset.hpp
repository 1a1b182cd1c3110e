#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cvs/binary_io.hpp"
#include "cvs/field_gen.hpp"

namespace cvs {

/// One Monte-Carlo realization.
struct SampleRecord {
    std::vector<float> condition;   ///< k conditioning values (mm)
    std::vector<float> source_rvs;  ///< load-variable realizations, experiment-defined order
    std::vector<float> fields;      ///< n_components * rows * cols, component-major (xx, yy, xy)

    bool operator==(const SampleRecord&) const = default;
};

/// A collection of records sharing (k, n_components, rows, cols).
struct Dataset {
    std::uint32_t condition_dim = 1;
    std::uint32_t n_components = 3;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<SampleRecord> records;

    std::size_t pixels() const { return static_cast<std::size_t>(rows) * cols; }
    std::size_t size() const { return records.size(); }
    std::span<const float> field(std::size_t record, std::size_t component) const {
        return std::span<const float>(records[record].fields).subspan(component * pixels(), pixels());
    }
    /// Throws std::invalid_argument when a record disagrees with the header
    /// dimensions or carries non-finite field values.
    void validate() const;

    bool operator==(const Dataset&) const = default;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Uniformly random partition; |train| = round(train_fraction * N). Index
/// lists are returned in ascending order.
SplitIndices split_indices(std::size_t n, double train_fraction, std::uint64_t seed);
Dataset subset(const Dataset& data, std::span<const std::size_t> indices);
std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, std::uint64_t seed);

/// Global per-component min/max over every training pixel, plus per-entry
/// min/max of the condition vector.
struct MinMaxScaler {
    std::vector<double> component_min, component_max;
    std::vector<double> condition_min, condition_max;

    double scale_component(std::size_t c, double v) const {
        return (v - component_min[c]) / (component_max[c] - component_min[c]);
    }
    double unscale_component(std::size_t c, double s) const {
        return component_min[c] + s * (component_max[c] - component_min[c]);
    }
    double scale_condition(std::size_t j, double v) const {
        return (v - condition_min[j]) / (condition_max[j] - condition_min[j]);
    }
    double unscale_condition(std::size_t j, double s) const {
        return condition_min[j] + s * (condition_max[j] - condition_min[j]);
    }

    bool operator==(const MinMaxScaler&) const = default;
};

/// Throws std::invalid_argument on an empty split or a degenerate
/// (max == min) quantity.
MinMaxScaler scaler_fit(const Dataset& train);

/// A record in scaled space, kept in double precision so that invert(apply(r))
/// reproduces r.
struct ScaledRecord {
    std::vector<double> condition;
    std::vector<double> fields;
};

/// Values outside the training range map outside [0, 1]; nothing is clamped.
ScaledRecord scaler_apply(const MinMaxScaler& scaler, const SampleRecord& record, std::size_t pixels);
SampleRecord scaler_invert(const MinMaxScaler& scaler, const ScaledRecord& scaled, std::size_t pixels);

inline constexpr std::uint32_t kDatasetVersion = 1;

void save_dataset(const Dataset& data, const std::string& path);
/// Throws io::FormatError on bad magic, unsupported version, truncation or
/// inconsistent dimensions.
Dataset load_dataset(const std::string& path);
/// FNV-1a fingerprint of the serialized dataset bytes.
std::uint64_t dataset_fingerprint(const std::string& path);

/// One line per pixel: i,j,exx,eyy,exy (i = row, j = column).
void export_record_csv(const Dataset& data, std::size_t record, const std::string& path);

}  // namespace cvs
