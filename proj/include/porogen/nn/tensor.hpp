#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "porogen/core/aligned.hpp"
#include "porogen/core/errors.hpp"

namespace porogen::nn {

/// Dense row-major tensor. Templated so the same layer code runs in float for
/// training and in double for finite-difference checks.
template <typename T>
class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(std::vector<std::int64_t> shape) : shape_(std::move(shape)) {
        data_.assign(std::size_t(numel()), T(0));
    }

    Tensor(std::initializer_list<std::int64_t> shape)
        : Tensor(std::vector<std::int64_t>(shape)) {}

    const std::vector<std::int64_t>& shape() const { return shape_; }

    std::int64_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t ndim() const { return shape_.size(); }

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (auto d : shape_) n *= d;
        return shape_.empty() ? 0 : n;
    }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    T operator[](std::size_t i) const { return data_[i]; }

    AlignedVec<T>& raw() { return data_; }
    const AlignedVec<T>& raw() const { return data_; }

    void zero() { std::fill(data_.begin(), data_.end(), T(0)); }
    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    /// Same data, new shape; element count must match.
    Tensor reshaped(std::vector<std::int64_t> shape) const {
        Tensor out;
        out.shape_ = std::move(shape);
        if (out.numel() != numel()) throw DomainError("reshape: element count mismatch");
        out.data_ = data_;
        return out;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    static std::string shape_str(const std::vector<std::int64_t>& s) {
        std::string out = "(";
        for (std::size_t i = 0; i < s.size(); ++i)
            out += (i ? "," : "") + std::to_string(s[i]);
        return out + ")";
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = U(data_[i]);
        return out;
    }

  private:
    template <typename U>
    friend class Tensor;

    std::vector<std::int64_t> shape_;
    AlignedVec<T> data_;
};

template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T>* value = nullptr;
    Tensor<T>* grad = nullptr; // nullptr for non-trainable buffers
};

} // namespace porogen::nn
