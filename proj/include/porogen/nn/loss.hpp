#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "porogen/nn/tensor.hpp"

namespace porogen::nn {

/// Scores exactly at 0 or 1 are clamped to [eps, 1-eps] instead of erroring,
/// so saturated sigmoids cost a bounded loss rather than an infinity.
inline constexpr double kBceEps = 1e-7;

template <typename T>
T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

/// Mean over items of -[t*ln(s) + (1-t)*ln(1-s)].
template <typename T>
T bce_mean(std::span<const T> scores, std::span<const T> targets) {
    if (scores.size() != targets.size() || scores.empty())
        throw DomainError("bce: scores/targets must be equal-length and nonempty");
    T acc = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        T s = scores[i];
        if (s < T(kBceEps)) s = T(kBceEps);
        if (s > T(1) - T(kBceEps)) s = T(1) - T(kBceEps);
        const T t = targets[i];
        acc += -(t * std::log(s) + (T(1) - t) * std::log(T(1) - s));
    }
    return acc / T(scores.size());
}

/// Same, against one shared target value.
template <typename T>
T bce_mean(const Tensor<T>& scores, T target) {
    std::vector<T> t(std::size_t(scores.numel()), target);
    return bce_mean<T>(std::span<const T>(scores.data(), std::size_t(scores.numel())),
                       std::span<const T>(t.data(), t.size()));
}

/// d(bce_mean)/d(logit) for scores = sigmoid(logits): (s - t) / N per item.
/// Exact wherever the clamp is inactive.
template <typename T>
Tensor<T> bce_grad_wrt_logits(const Tensor<T>& scores, T target) {
    Tensor<T> g(scores.shape());
    const T n = T(double(scores.numel()));
    for (std::int64_t i = 0; i < scores.numel(); ++i)
        g[std::size_t(i)] = (scores[std::size_t(i)] - target) / n;
    return g;
}

template <typename T>
Tensor<T> sigmoid_all(const Tensor<T>& logits) {
    Tensor<T> s(logits.shape());
    for (std::int64_t i = 0; i < logits.numel(); ++i)
        s[std::size_t(i)] = sigmoid(logits[std::size_t(i)]);
    return s;
}

} // namespace porogen::nn

namespace porogen {

/// Binary cross-entropy over (0,1) scores and {0,1} targets; the published
/// loss convention for both discriminator terms and the generator objective.
inline double bce_loss(std::span<const double> scores, std::span<const int> targets) {
    if (scores.size() != targets.size() || scores.empty())
        throw DomainError("bce_loss: scores/targets must be equal-length and nonempty");
    std::vector<double> t(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (targets[i] != 0 && targets[i] != 1)
            throw DomainError("bce_loss: targets must be 0 or 1");
        t[i] = double(targets[i]);
    }
    return nn::bce_mean<double>(scores, std::span<const double>(t.data(), t.size()));
}

} // namespace porogen
