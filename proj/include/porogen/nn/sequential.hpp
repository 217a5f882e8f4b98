#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "porogen/nn/layers.hpp"

namespace porogen::nn {

/// Ordered stack of named layers. Registration order fixes parameter order,
/// which in turn fixes seeded initialization and checkpoint layout.
template <typename T>
class Sequential {
  public:
    template <typename L, typename... Args>
    L* add(const std::string& name, Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L* raw = layer.get();
        layers_.push_back({name, std::move(layer)});
        return raw;
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) {
        Tensor<T> cur = x;
        for (auto& [name, layer] : layers_) cur = layer->forward(cur, train);
        return cur;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> cur = dy;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
            cur = it->layer->backward(cur);
        return cur;
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
                 std::vector<ParamRef<T>>& buffers) {
        for (auto& [name, layer] : layers_)
            layer->collect(prefix.empty() ? name : prefix + "." + name, params, buffers);
    }

    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> p, b;
        collect("", p, b);
        return p;
    }

    void zero_grads() {
        std::vector<ParamRef<T>> p, b;
        collect("", p, b);
        for (auto& ref : p) ref.grad->zero();
    }

    std::size_t layer_count() const { return layers_.size(); }

    template <typename L>
    std::size_t count_of() const {
        std::size_t n = 0;
        for (const auto& e : layers_)
            if (dynamic_cast<const L*>(e.layer.get())) ++n;
        return n;
    }

  private:
    struct Entry {
        std::string name;
        std::unique_ptr<Layer<T>> layer;
    };
    std::vector<Entry> layers_;
};

} // namespace porogen::nn
