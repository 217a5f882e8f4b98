#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "porogen/nn/tensor.hpp"

namespace porogen::nn {

/// Adam with per-parameter first/second moment estimates and bias correction:
///   m <- b1*m + (1-b1)*g            v <- b2*v + (1-b2)*g^2
///   p <- p - lr * (m/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps)
template <typename T>
class Adam {
  public:
    Adam(T lr, T beta1, T beta2, T eps = T(1e-8))
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

    void attach(const std::vector<ParamRef<T>>& params) {
        m_.clear();
        v_.clear();
        for (const auto& p : params) {
            m_.emplace_back(p.value->shape());
            v_.emplace_back(p.value->shape());
        }
        t_ = 0;
    }

    void step(const std::vector<ParamRef<T>>& params) {
        if (m_.size() != params.size())
            throw DomainError("Adam: optimizer not attached to this parameter set");
        ++t_;
        const T c1 = T(1) - std::pow(b1_, T(double(t_)));
        const T c2 = T(1) - std::pow(b2_, T(double(t_)));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor<T>& p = *params[i].value;
            const Tensor<T>& g = *params[i].grad;
            Tensor<T>& m = m_[i];
            Tensor<T>& v = v_[i];
            for (std::int64_t j = 0; j < p.numel(); ++j) {
                const T gj = g[std::size_t(j)];
                m[std::size_t(j)] = b1_ * m[std::size_t(j)] + (T(1) - b1_) * gj;
                v[std::size_t(j)] = b2_ * v[std::size_t(j)] + (T(1) - b2_) * gj * gj;
                const T mhat = m[std::size_t(j)] / c1;
                const T vhat = v[std::size_t(j)] / c2;
                p[std::size_t(j)] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    std::int64_t step_count() const { return t_; }
    void set_step_count(std::int64_t t) { t_ = t; }

    std::vector<Tensor<T>>& moments1() { return m_; }
    std::vector<Tensor<T>>& moments2() { return v_; }

    T learning_rate() const { return lr_; }
    void set_learning_rate(T lr) { lr_ = lr; }

  private:
    T lr_, b1_, b2_, eps_;
    std::int64_t t_ = 0;
    std::vector<Tensor<T>> m_, v_;
};

} // namespace porogen::nn
