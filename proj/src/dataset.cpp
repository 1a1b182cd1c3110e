#include "cvs/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "cvs/rng.hpp"

namespace cvs {

void Dataset::validate() const {
    if (condition_dim < 1) throw std::invalid_argument("dataset condition dimension must be >= 1");
    if (n_components != 1 && n_components != 3) throw std::invalid_argument("dataset must hold 1 or 3 strain components");
    const std::size_t per_record = n_components * pixels();
    for (std::size_t i = 0; i < records.size(); ++i) {
        const SampleRecord& r = records[i];
        if (r.condition.size() != condition_dim || r.fields.size() != per_record) {
            throw std::invalid_argument(fmt::format("record {} does not match dataset dimensions", i));
        }
        for (float v : r.fields) {
            if (!std::isfinite(v)) throw std::invalid_argument(fmt::format("record {} holds non-finite field values", i));
        }
    }
}

SplitIndices split_indices(std::size_t n, double train_fraction, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("split: empty dataset");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("split: train fraction must lie in (0, 1)");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order.begin(), order.end());
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    SplitIndices s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
    Dataset out{data.condition_dim, data.n_components, data.rows, data.cols, {}};
    out.records.reserve(indices.size());
    for (std::size_t i : indices) out.records.push_back(data.records.at(i));
    return out;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, std::uint64_t seed) {
    const SplitIndices s = split_indices(data.size(), train_fraction, seed);
    return {subset(data, s.train), subset(data, s.test)};
}

MinMaxScaler scaler_fit(const Dataset& train) {
    if (train.records.empty()) throw std::invalid_argument("scaler_fit: empty training split");
    const std::size_t nc = train.n_components, k = train.condition_dim, px = train.pixels();
    constexpr double inf = std::numeric_limits<double>::infinity();
    MinMaxScaler s{std::vector<double>(nc, inf), std::vector<double>(nc, -inf), std::vector<double>(k, inf),
                   std::vector<double>(k, -inf)};
    for (const SampleRecord& r : train.records) {
        for (std::size_t c = 0; c < nc; ++c) {
            for (std::size_t p = 0; p < px; ++p) {
                const double v = r.fields[c * px + p];
                s.component_min[c] = std::min(s.component_min[c], v);
                s.component_max[c] = std::max(s.component_max[c], v);
            }
        }
        for (std::size_t j = 0; j < k; ++j) {
            s.condition_min[j] = std::min<double>(s.condition_min[j], r.condition[j]);
            s.condition_max[j] = std::max<double>(s.condition_max[j], r.condition[j]);
        }
    }
    for (std::size_t c = 0; c < nc; ++c) {
        if (!(s.component_max[c] > s.component_min[c])) {
            throw std::invalid_argument(fmt::format("scaler_fit: strain component {} is degenerate (max == min)", c));
        }
    }
    for (std::size_t j = 0; j < k; ++j) {
        if (!(s.condition_max[j] > s.condition_min[j])) {
            throw std::invalid_argument(fmt::format("scaler_fit: condition entry {} is degenerate (max == min)", j));
        }
    }
    return s;
}

ScaledRecord scaler_apply(const MinMaxScaler& scaler, const SampleRecord& record, std::size_t pixels) {
    ScaledRecord out;
    out.condition.resize(record.condition.size());
    for (std::size_t j = 0; j < record.condition.size(); ++j) out.condition[j] = scaler.scale_condition(j, record.condition[j]);
    out.fields.resize(record.fields.size());
    for (std::size_t i = 0; i < record.fields.size(); ++i) out.fields[i] = scaler.scale_component(i / pixels, record.fields[i]);
    return out;
}

SampleRecord scaler_invert(const MinMaxScaler& scaler, const ScaledRecord& scaled, std::size_t pixels) {
    SampleRecord out;
    out.condition.resize(scaled.condition.size());
    for (std::size_t j = 0; j < scaled.condition.size(); ++j) {
        out.condition[j] = static_cast<float>(scaler.unscale_condition(j, scaled.condition[j]));
    }
    out.fields.resize(scaled.fields.size());
    for (std::size_t i = 0; i < scaled.fields.size(); ++i) {
        out.fields[i] = static_cast<float>(scaler.unscale_component(i / pixels, scaled.fields[i]));
    }
    return out;
}

void save_dataset(const Dataset& data, const std::string& path) {
    data.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.write("CVSD", 4);
    io::write_u32(out, kDatasetVersion);
    io::write_u32(out, static_cast<std::uint32_t>(data.records.size()));
    io::write_u32(out, data.condition_dim);
    io::write_u32(out, data.n_components);
    io::write_u32(out, data.rows);
    io::write_u32(out, data.cols);
    for (const SampleRecord& r : data.records) {
        io::write_f32s(out, r.condition.data(), r.condition.size());
        io::write_u32(out, static_cast<std::uint32_t>(r.source_rvs.size()));
        io::write_f32s(out, r.source_rvs.data(), r.source_rvs.size());
        io::write_f32s(out, r.fields.data(), r.fields.size());
    }
    out.flush();
    if (!out) throw std::runtime_error("failed while writing " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset " + path);
    io::expect_magic(in, "CVSD");
    const std::uint32_t version = io::read_u32(in, "version");
    if (version != kDatasetVersion) {
        throw io::FormatError(fmt::format("unsupported version {} in dataset {} (reader supports {})", version, path, kDatasetVersion));
    }
    Dataset data;
    const std::uint32_t n = io::read_u32(in, "record count");
    data.condition_dim = io::read_u32(in, "condition dimension");
    data.n_components = io::read_u32(in, "component count");
    data.rows = io::read_u32(in, "rows");
    data.cols = io::read_u32(in, "cols");
    if (data.condition_dim == 0 || data.condition_dim > 4096) throw io::FormatError("dimension mismatch: bad condition dimension");
    if (data.n_components != 1 && data.n_components != 3) throw io::FormatError("dimension mismatch: component count must be 1 or 3");
    if (data.rows == 0 || data.cols == 0 || data.pixels() > (1u << 24)) throw io::FormatError("dimension mismatch: bad field shape");

    data.records.resize(n);
    for (SampleRecord& r : data.records) {
        r.condition.resize(data.condition_dim);
        io::read_f32s(in, r.condition.data(), r.condition.size(), "conditions");
        const std::uint32_t n_rvs = io::read_u32(in, "source variable count");
        if (n_rvs > 4096) throw io::FormatError("dimension mismatch: implausible source variable count");
        r.source_rvs.resize(n_rvs);
        io::read_f32s(in, r.source_rvs.data(), n_rvs, "source variables");
        r.fields.resize(data.n_components * data.pixels());
        io::read_f32s(in, r.fields.data(), r.fields.size(), "fields");
    }
    if (in.peek() != std::char_traits<char>::eof()) throw io::FormatError("dimension mismatch: trailing bytes after last record");
    return data;
}

std::uint64_t dataset_fingerprint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        h = io::fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
    }
    return h;
}

void export_record_csv(const Dataset& data, std::size_t record, const std::string& path) {
    const SampleRecord& r = data.records.at(record);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << (data.n_components == 3 ? "i,j,exx,eyy,exy\n" : "i,j,value\n");
    const std::size_t px = data.pixels();
    for (std::uint32_t i = 0; i < data.rows; ++i) {
        for (std::uint32_t j = 0; j < data.cols; ++j) {
            const std::size_t p = static_cast<std::size_t>(i) * data.cols + j;
            out << i << ',' << j;
            for (std::size_t c = 0; c < data.n_components; ++c) out << ',' << fmt::format("{:.9g}", r.fields[c * px + p]);
            out << '\n';
        }
    }
}

}  // namespace cvs
