// SPDX-License-Identifier: Apache-2.0
#include "sg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace sg {

const char* dtype_name(DType dt) { return dt == DType::F32 ? "fp32" : "fp64"; }

DType dtype_from_name(std::string_view name) {
    if (name == "fp32") return DType::F32;
    if (name == "fp64") return DType::F64;
    throw SerializationError("unknown dtype: " + std::string(name));
}

std::size_t shape_size(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, DType dtype) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.dtype_ = dtype;
    if (dtype == DType::F32)
        t.f32_.assign(shape_size(t.shape_), 0.0f);
    else
        t.f64_.assign(shape_size(t.shape_), 0.0);
    return t;
}

Tensor Tensor::from_f32(std::vector<std::size_t> shape, std::vector<float> data) {
    if (shape_size(shape) != data.size())
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    Tensor t;
    t.shape_ = std::move(shape);
    t.dtype_ = DType::F32;
    t.f32_ = std::move(data);
    return t;
}

Tensor Tensor::from_f64(std::vector<std::size_t> shape, std::vector<double> data) {
    if (shape_size(shape) != data.size())
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    Tensor t;
    t.shape_ = std::move(shape);
    t.dtype_ = DType::F64;
    t.f64_ = std::move(data);
    return t;
}

Tensor Tensor::scalar(float v) { return from_f32({1}, {v}); }
Tensor Tensor::scalar(double v) { return from_f64({1}, {v}); }

std::size_t Tensor::size() const {
    return dtype_ == DType::F32 ? f32_.size() : f64_.size();
}

template <>
std::span<const float> Tensor::data<float>() const {
    if (dtype_ != DType::F32) throw ShapeError("tensor is not fp32");
    return f32_;
}
template <>
std::span<const double> Tensor::data<double>() const {
    if (dtype_ != DType::F64) throw ShapeError("tensor is not fp64");
    return f64_;
}
template <>
std::span<float> Tensor::data<float>() {
    if (dtype_ != DType::F32) throw ShapeError("tensor is not fp32");
    return f32_;
}
template <>
std::span<double> Tensor::data<double>() {
    if (dtype_ != DType::F64) throw ShapeError("tensor is not fp64");
    return f64_;
}

double Tensor::at(std::size_t i) const {
    return dtype_ == DType::F32 ? static_cast<double>(f32_[i]) : f64_[i];
}

void Tensor::set(std::size_t i, double v) {
    if (dtype_ == DType::F32)
        f32_[i] = static_cast<float>(v);
    else
        f64_[i] = v;
}

Tensor Tensor::astype(DType dt) const {
    if (dt == dtype_) return *this;
    Tensor out = Tensor::zeros(shape_, dt);
    for (std::size_t i = 0; i < size(); ++i) out.set(i, at(i));
    return out;
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
    if (shape_size(shape) != size())
        throw ShapeError("reshape " + shape_str(shape_) + " -> " + shape_str(shape) +
                         " changes element count");
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
}

bool Tensor::bit_equal(const Tensor& other) const {
    if (dtype_ != other.dtype_ || shape_ != other.shape_) return false;
    if (dtype_ == DType::F32) {
        for (std::size_t i = 0; i < f32_.size(); ++i) {
            std::uint32_t a, b;
            static_assert(sizeof(float) == 4);
            std::memcpy(&a, &f32_[i], 4);
            std::memcpy(&b, &other.f32_[i], 4);
            if (a != b) return false;
        }
        return true;
    }
    for (std::size_t i = 0; i < f64_.size(); ++i) {
        std::uint64_t a, b;
        std::memcpy(&a, &f64_[i], 8);
        std::memcpy(&b, &other.f64_[i], 8);
        if (a != b) return false;
    }
    return true;
}

bool Tensor::has_nan() const {
    for (std::size_t i = 0; i < size(); ++i)
        if (std::isnan(at(i))) return true;
    return false;
}

namespace {

template <typename T>
void check_dot_args(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size())
        throw ShapeError("dot: length mismatch " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
}

}  // namespace

template <typename T>
T dot_sequential_span(std::span<const T> a, std::span<const T> b) {
    check_dot_args(a, b);
    T acc = T(0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const T p = a[i] * b[i];
        acc = acc + p;
    }
    return acc;
}

template <typename T>
T dot_blocked_span(std::span<const T> a, std::span<const T> b, std::size_t block) {
    check_dot_args(a, b);
    if (block < 1) throw ConfigError("dot_blocked: block must be >= 1");
    if (a.empty()) return T(0);
    T total = T(0);
    bool first = true;
    for (std::size_t b0 = 0; b0 < a.size(); b0 += block) {
        T part = T(0);
        const std::size_t end = std::min(b0 + block, a.size());
        for (std::size_t i = b0; i < end; ++i) {
            const T p = a[i] * b[i];
            part = part + p;
        }
        if (first) {
            total = part;
            first = false;
        } else {
            total = total + part;
        }
    }
    return total;
}

template <typename T>
T reduce_dot(std::span<const T> a, std::span<const T> b, std::size_t block, bool fma, T preload) {
    check_dot_args(a, b);
    const std::size_t n = a.size();
    const std::size_t bsz = block == 0 ? (n == 0 ? 1 : n) : block;
    T total = T(0);
    bool first = true;
    for (std::size_t b0 = 0; b0 < n || (b0 == 0 && n == 0); b0 += bsz) {
        T part = (b0 == 0) ? preload : T(0);
        const std::size_t end = std::min(b0 + bsz, n);
        for (std::size_t i = b0; i < end; ++i) {
            if (fma) {
                part = std::fma(a[i], b[i], part);
            } else {
                const T p = a[i] * b[i];
                part = part + p;
            }
        }
        if (first) {
            total = part;
            first = false;
        } else {
            total = total + part;
        }
        if (n == 0) break;
    }
    return total;
}

template float dot_sequential_span<float>(std::span<const float>, std::span<const float>);
template double dot_sequential_span<double>(std::span<const double>, std::span<const double>);
template float dot_blocked_span<float>(std::span<const float>, std::span<const float>, std::size_t);
template double dot_blocked_span<double>(std::span<const double>, std::span<const double>, std::size_t);
template float reduce_dot<float>(std::span<const float>, std::span<const float>, std::size_t, bool, float);
template double reduce_dot<double>(std::span<const double>, std::span<const double>, std::size_t, bool, double);

namespace {

void check_pair(const Tensor& a, const Tensor& b) {
    if (a.dtype() != b.dtype())
        throw ShapeError(std::string("dot: dtype mismatch ") + dtype_name(a.dtype()) + " vs " +
                         dtype_name(b.dtype()));
    if (a.size() != b.size())
        throw ShapeError("dot: length mismatch " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
}

}  // namespace

Tensor dot_sequential(const Tensor& a, const Tensor& b) {
    check_pair(a, b);
    if (a.dtype() == DType::F32)
        return Tensor::scalar(dot_sequential_span<float>(a.data<float>(), b.data<float>()));
    return Tensor::scalar(dot_sequential_span<double>(a.data<double>(), b.data<double>()));
}

Tensor dot_blocked(const Tensor& a, const Tensor& b, std::size_t block) {
    check_pair(a, b);
    if (a.dtype() == DType::F32)
        return Tensor::scalar(dot_blocked_span<float>(a.data<float>(), b.data<float>(), block));
    return Tensor::scalar(dot_blocked_span<double>(a.data<double>(), b.data<double>(), block));
}

}  // namespace sg
