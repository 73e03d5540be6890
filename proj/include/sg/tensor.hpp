// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sg/errors.hpp"

namespace sg {

enum class DType { F32, F64 };

const char* dtype_name(DType dt);
DType dtype_from_name(std::string_view name);

// Dense n-dimensional array, row-major, bit-exact storage in the tagged
// width. Arithmetic on tensors is done by the executors; this type only owns
// data and shape.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape, DType dtype);
    static Tensor from_f32(std::vector<std::size_t> shape, std::vector<float> data);
    static Tensor from_f64(std::vector<std::size_t> shape, std::vector<double> data);
    static Tensor scalar(float v);
    static Tensor scalar(double v);

    const std::vector<std::size_t>& shape() const { return shape_; }
    DType dtype() const { return dtype_; }
    std::size_t size() const;
    bool empty() const { return size() == 0; }

    template <typename T>
    std::span<const T> data() const;
    template <typename T>
    std::span<T> data();

    // element access as double regardless of width (reads only)
    double at(std::size_t i) const;
    void set(std::size_t i, double v);  // rounds to storage width

    Tensor astype(DType dt) const;
    Tensor reshaped(std::vector<std::size_t> shape) const;

    bool bit_equal(const Tensor& other) const;
    bool has_nan() const;

  private:
    std::vector<std::size_t> shape_;
    DType dtype_ = DType::F32;
    std::vector<float> f32_;
    std::vector<double> f64_;
};

std::size_t shape_size(const std::vector<std::size_t>& shape);
std::string shape_str(const std::vector<std::size_t>& shape);

// Reference-order inner product: fold-left, each product and each add rounded
// once in T. Empty input returns +0.
template <typename T>
T dot_sequential_span(std::span<const T> a, std::span<const T> b);

// Products accumulated sequentially within consecutive blocks of `block`
// elements; block partial sums combined left-to-right.
template <typename T>
T dot_blocked_span(std::span<const T> a, std::span<const T> b, std::size_t block);

// Reduction engine shared by the executors. block == 0 means sequential.
// preload seeds accumulator block 0 (epilogue-fused bias). fma contracts each
// multiply-add to a single rounding.
template <typename T>
T reduce_dot(std::span<const T> a, std::span<const T> b, std::size_t block, bool fma, T preload);

// Tensor-level wrappers with the error contract (length/dtype mismatch).
Tensor dot_sequential(const Tensor& a, const Tensor& b);
Tensor dot_blocked(const Tensor& a, const Tensor& b, std::size_t block);

extern template float dot_sequential_span<float>(std::span<const float>, std::span<const float>);
extern template double dot_sequential_span<double>(std::span<const double>, std::span<const double>);
extern template float dot_blocked_span<float>(std::span<const float>, std::span<const float>, std::size_t);
extern template double dot_blocked_span<double>(std::span<const double>, std::span<const double>, std::size_t);
extern template float reduce_dot<float>(std::span<const float>, std::span<const float>, std::size_t, bool, float);
extern template double reduce_dot<double>(std::span<const double>, std::span<const double>, std::size_t, bool, double);

}  // namespace sg
