#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cvs::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& s);

/// Heap storage with a fixed alignment, so vectorized loops split the same
/// way wherever a buffer lands.
template <class T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

/// Row-major dense array; the first dimension is the batch.
template <class T>
struct Tensor {
    Shape shape;
    Buffer<T> data;

    Tensor() = default;
    explicit Tensor(Shape s, T fill = T{0}) : shape(std::move(s)), data(shape_size(shape), fill) {}
    Tensor(Shape s, const std::vector<T>& values) : shape(std::move(s)), data(values.begin(), values.end()) {
        if (data.size() != shape_size(shape)) throw std::invalid_argument("tensor data length does not match shape");
    }

    std::size_t size() const { return data.size(); }
    std::size_t batch() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t sample_size() const { return batch() == 0 ? 0 : data.size() / batch(); }
    Shape sample_shape() const { return Shape(shape.begin() + 1, shape.end()); }

    T* sample(std::size_t n) { return data.data() + n * sample_size(); }
    const T* sample(std::size_t n) const { return data.data() + n * sample_size(); }

    void resize(Shape s) {
        shape = std::move(s);
        data.assign(shape_size(shape), T{0});
    }
};

template <class T>
struct ParamRef {
    std::string name;
    std::span<T> value;
    std::span<T> grad;
};

}  // namespace cvs::nn
