#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "porogen/core/parallel.hpp"
#include "porogen/nn/im2col.hpp"
#include "porogen/nn/tensor.hpp"

// Layers keep explicit forward caches and hand-written backward passes. All
// per-item arithmetic is identical whether an input arrives alone or inside a
// batch: forward passes loop item by item, so batched outputs are bitwise
// equal to single-sample calls. Batch loops fan out across worker threads;
// gradient reductions run in fixed thread order, which keeps results
// reproducible for a fixed worker count.

namespace porogen::nn {

namespace detail {
inline int this_thread() {
#ifdef _OPENMP
    return omp_get_thread_num();
#else
    return 0;
#endif
}
} // namespace detail

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapM = Eigen::Map<const MatRM<T>>;
template <typename T>
using MapV = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using CMapV = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

template <typename T>
class Layer {
  public:
    virtual ~Layer() = default;
    virtual Tensor<T> forward(const Tensor<T>& x, bool train) = 0;
    virtual Tensor<T> backward(const Tensor<T>& dy) = 0;
    virtual void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
                         std::vector<ParamRef<T>>& buffers) {
        (void)prefix;
        (void)params;
        (void)buffers;
    }
};

// --- Dense -------------------------------------------------------------------

template <typename T>
class Dense : public Layer<T> {
  public:
    Dense(std::int64_t in, std::int64_t out)
        : in_(in), out_(out), w_({out, in}), b_({out}), dw_({out, in}), db_({out}) {}

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        if (x.ndim() != 2 || x.dim(1) != in_)
            throw DomainError("Dense: expected input (N," + std::to_string(in_) + "), got " +
                              Tensor<T>::shape_str(x.shape()));
        x_ = x;
        const std::int64_t N = x.dim(0);
        Tensor<T> y({N, out_});
        CMapM<T> w(w_.data(), out_, in_);
        CMapV<T> b(b_.data(), out_);
        for (std::int64_t n = 0; n < N; ++n) {
            CMapV<T> xv(x.data() + n * in_, in_);
            MapV<T> yv(y.data() + n * out_, out_);
            yv.noalias() = w * xv;
            yv += b;
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        const std::int64_t N = x_.dim(0);
        CMapM<T> dym(dy.data(), N, out_);
        CMapM<T> xm(x_.data(), N, in_);
        MapM<T> dwm(dw_.data(), out_, in_);
        MapV<T> dbv(db_.data(), out_);
        dwm.noalias() += dym.transpose() * xm;
        dbv += dym.colwise().sum().transpose();

        Tensor<T> dx({N, in_});
        MapM<T> dxm(dx.data(), N, in_);
        CMapM<T> wm(w_.data(), out_, in_);
        dxm.noalias() = dym * wm;
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
                 std::vector<ParamRef<T>>&) override {
        params.push_back({prefix + ".W", &w_, &dw_});
        params.push_back({prefix + ".b", &b_, &db_});
    }

  private:
    std::int64_t in_, out_;
    Tensor<T> w_, b_, dw_, db_;
    Tensor<T> x_;
};

// --- Conv2d (stride-s, zero padding) ------------------------------------------

template <typename T>
class Conv2d : public Layer<T> {
  public:
    Conv2d(std::int64_t in_ch, std::int64_t out_ch, int kernel, int stride, int pad)
        : cin_(in_ch), cout_(out_ch), k_(kernel), s_(stride), p_(pad),
          w_({out_ch, in_ch * kernel * kernel}), b_({out_ch}),
          dw_({out_ch, in_ch * kernel * kernel}), db_({out_ch}) {}

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        check_input(x);
        x_ = x;
        const std::int64_t N = x.dim(0);
        const int H = int(x.dim(2)), W = int(x.dim(3));
        const int oh = conv_out_size(H, k_, s_, p_), ow = conv_out_size(W, k_, s_, p_);
        const std::int64_t P = std::int64_t(oh) * ow;
        const std::int64_t rows = cin_ * k_ * k_;

        Tensor<T> y({N, cout_, oh, ow});
        CMapM<T> wm(w_.data(), cout_, rows);
#pragma omp parallel num_threads(worker_count())
        {
            AlignedVec<T> cols(std::size_t(rows * P));
#pragma omp for schedule(static)
            for (std::int64_t n = 0; n < N; ++n) {
                im2col(x.data() + n * cin_ * H * W, int(cin_), H, W, k_, s_, p_, cols.data());
                CMapM<T> cm(cols.data(), rows, P);
                MapM<T> ym(y.data() + n * cout_ * P, cout_, P);
                ym.noalias() = wm * cm;
                for (std::int64_t c = 0; c < cout_; ++c) ym.row(c).array() += w_bias(c);
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        const std::int64_t N = x_.dim(0);
        const int H = int(x_.dim(2)), W = int(x_.dim(3));
        const int oh = int(dy.dim(2)), ow = int(dy.dim(3));
        const std::int64_t P = std::int64_t(oh) * ow;
        const std::int64_t rows = cin_ * k_ * k_;

        Tensor<T> dx({N, cin_, H, W});
        const int nw = worker_count();
        std::vector<Tensor<T>> dw_part(std::size_t(nw), Tensor<T>({cout_, rows}));
        std::vector<Tensor<T>> db_part(std::size_t(nw), Tensor<T>({cout_}));

        CMapM<T> wm(w_.data(), cout_, rows);
#pragma omp parallel num_threads(nw)
        {
            const int tid = detail::this_thread();
            AlignedVec<T> cols(std::size_t(rows * P));
            AlignedVec<T> dcols(std::size_t(rows * P));
            MapM<T> dwp(dw_part[std::size_t(tid)].data(), cout_, rows);
            MapV<T> dbp(db_part[std::size_t(tid)].data(), cout_);
#pragma omp for schedule(static)
            for (std::int64_t n = 0; n < N; ++n) {
                im2col(x_.data() + n * cin_ * H * W, int(cin_), H, W, k_, s_, p_, cols.data());
                CMapM<T> cm(cols.data(), rows, P);
                CMapM<T> dym(dy.data() + n * cout_ * P, cout_, P);
                dwp.noalias() += dym * cm.transpose();
                dbp += dym.rowwise().sum();

                MapM<T> dcm(dcols.data(), rows, P);
                dcm.noalias() = wm.transpose() * dym;
                col2im_add(dcols.data(), int(cin_), H, W, k_, s_, p_,
                           dx.data() + n * cin_ * H * W);
            }
        }
        reduce_in_order(dw_, dw_part);
        reduce_in_order(db_, db_part);
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
                 std::vector<ParamRef<T>>&) override {
        params.push_back({prefix + ".W", &w_, &dw_});
        params.push_back({prefix + ".b", &b_, &db_});
    }

  private:
    void check_input(const Tensor<T>& x) const {
        if (x.ndim() != 4 || x.dim(1) != cin_)
            throw DomainError("Conv2d: bad input shape " + Tensor<T>::shape_str(x.shape()));
        if (conv_out_size(int(x.dim(2)), k_, s_, p_) < 1)
            throw DomainError("Conv2d: input spatially smaller than kernel");
    }

    T w_bias(std::int64_t c) const { return b_[std::size_t(c)]; }

    static void reduce_in_order(Tensor<T>& acc, const std::vector<Tensor<T>>& parts) {
        for (const auto& p : parts)
            for (std::int64_t i = 0; i < acc.numel(); ++i) acc[std::size_t(i)] += p[std::size_t(i)];
    }

    std::int64_t cin_, cout_;
    int k_, s_, p_;
    Tensor<T> w_, b_, dw_, db_;
    Tensor<T> x_;
};

// --- ConvTranspose2d ------------------------------------------------------------

// Weight layout (C_in, C_out*k*k): the forward pass is the adjoint of a
// Conv2d data pass, so forward uses col2im and backward uses im2col.
template <typename T>
class ConvTranspose2d : public Layer<T> {
  public:
    ConvTranspose2d(std::int64_t in_ch, std::int64_t out_ch, int kernel, int stride, int pad)
        : cin_(in_ch), cout_(out_ch), k_(kernel), s_(stride), p_(pad),
          w_({in_ch, out_ch * kernel * kernel}), b_({out_ch}),
          dw_({in_ch, out_ch * kernel * kernel}), db_({out_ch}) {}

    static int out_size(int in, int kernel, int stride, int pad) {
        return (in - 1) * stride - 2 * pad + kernel;
    }

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        if (x.ndim() != 4 || x.dim(1) != cin_)
            throw DomainError("ConvTranspose2d: bad input shape " +
                              Tensor<T>::shape_str(x.shape()));
        x_ = x;
        const std::int64_t N = x.dim(0);
        const int H = int(x.dim(2)), W = int(x.dim(3));
        const int oh = out_size(H, k_, s_, p_), ow = out_size(W, k_, s_, p_);
        const std::int64_t Pin = std::int64_t(H) * W;
        const std::int64_t rows = cout_ * k_ * k_;

        Tensor<T> y({N, cout_, oh, ow});
        CMapM<T> wm(w_.data(), cin_, rows);
#pragma omp parallel num_threads(worker_count())
        {
            AlignedVec<T> cols(std::size_t(rows * Pin));
#pragma omp for schedule(static)
            for (std::int64_t n = 0; n < N; ++n) {
                CMapM<T> xm(x.data() + n * cin_ * Pin, cin_, Pin);
                MapM<T> cm(cols.data(), rows, Pin);
                cm.noalias() = wm.transpose() * xm;
                T* yn = y.data() + n * cout_ * oh * ow;
                col2im_add(cols.data(), int(cout_), oh, ow, k_, s_, p_, yn);
                for (std::int64_t c = 0; c < cout_; ++c) {
                    MapV<T> plane(yn + c * oh * ow, std::int64_t(oh) * ow);
                    plane.array() += b_[std::size_t(c)];
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        const std::int64_t N = x_.dim(0);
        const int H = int(x_.dim(2)), W = int(x_.dim(3));
        const int oh = int(dy.dim(2)), ow = int(dy.dim(3));
        const std::int64_t Pin = std::int64_t(H) * W;
        const std::int64_t rows = cout_ * k_ * k_;

        Tensor<T> dx({N, cin_, H, W});
        const int nw = worker_count();
        std::vector<Tensor<T>> dw_part(std::size_t(nw), Tensor<T>({cin_, rows}));
        std::vector<Tensor<T>> db_part(std::size_t(nw), Tensor<T>({cout_}));

        CMapM<T> wm(w_.data(), cin_, rows);
#pragma omp parallel num_threads(nw)
        {
            const int tid = detail::this_thread();
            AlignedVec<T> dcols(std::size_t(rows * Pin));
            MapM<T> dwp(dw_part[std::size_t(tid)].data(), cin_, rows);
#pragma omp for schedule(static)
            for (std::int64_t n = 0; n < N; ++n) {
                const T* dyn = dy.data() + n * cout_ * oh * ow;
                im2col(dyn, int(cout_), oh, ow, k_, s_, p_, dcols.data());
                CMapM<T> dcm(dcols.data(), rows, Pin);
                CMapM<T> xm(x_.data() + n * cin_ * Pin, cin_, Pin);
                MapM<T> dxm(dx.data() + n * cin_ * Pin, cin_, Pin);
                dxm.noalias() = wm * dcm;
                dwp.noalias() += xm * dcm.transpose();
                for (std::int64_t c = 0; c < cout_; ++c) {
                    CMapV<T> plane(dyn + c * oh * ow, std::int64_t(oh) * ow);
                    db_part[std::size_t(tid)][std::size_t(c)] += plane.sum();
                }
            }
        }
        reduce_in_order(dw_, dw_part);
        reduce_in_order(db_, db_part);
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
                 std::vector<ParamRef<T>>&) override {
        params.push_back({prefix + ".W", &w_, &dw_});
        params.push_back({prefix + ".b", &b_, &db_});
    }

  private:
    static void reduce_in_order(Tensor<T>& acc, const std::vector<Tensor<T>>& parts) {
        for (const auto& p : parts)
            for (std::int64_t i = 0; i < acc.numel(); ++i) acc[std::size_t(i)] += p[std::size_t(i)];
    }

    std::int64_t cin_, cout_;
    int k_, s_, p_;
    Tensor<T> w_, b_, dw_, db_;
    Tensor<T> x_;
};

// --- BatchNorm2d ------------------------------------------------------------------

template <typename T>
class BatchNorm2d : public Layer<T> {
  public:
    explicit BatchNorm2d(std::int64_t channels, T eps = T(1e-5), T momentum = T(0.1))
        : c_(channels), eps_(eps), momentum_(momentum), gamma_({channels}), beta_({channels}),
          dgamma_({channels}), dbeta_({channels}), run_mean_({channels}), run_var_({channels}) {
        gamma_.fill(T(1));
        run_var_.fill(T(1));
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) override {
        if (x.ndim() != 4 || x.dim(1) != c_)
            throw DomainError("BatchNorm2d: bad input shape " + Tensor<T>::shape_str(x.shape()));
        train_ = train;
        const std::int64_t N = x.dim(0), H = x.dim(2), W = x.dim(3);
        const std::int64_t plane = H * W, M = N * plane;

        xhat_ = Tensor<T>(x.shape());
        inv_std_ = Tensor<T>({c_});
        Tensor<T> y(x.shape());

        for (std::int64_t c = 0; c < c_; ++c) {
            T mean, var;
            if (train) {
                T sum = 0, sq = 0;
                for (std::int64_t n = 0; n < N; ++n) {
                    const T* p = x.data() + (n * c_ + c) * plane;
                    for (std::int64_t i = 0; i < plane; ++i) {
                        sum += p[i];
                        sq += p[i] * p[i];
                    }
                }
                mean = sum / T(M);
                var = sq / T(M) - mean * mean;
                if (var < T(0)) var = T(0);
                run_mean_[std::size_t(c)] =
                    (T(1) - momentum_) * run_mean_[std::size_t(c)] + momentum_ * mean;
                run_var_[std::size_t(c)] =
                    (T(1) - momentum_) * run_var_[std::size_t(c)] + momentum_ * var;
            } else {
                mean = run_mean_[std::size_t(c)];
                var = run_var_[std::size_t(c)];
            }
            const T inv = T(1) / std::sqrt(var + eps_);
            inv_std_[std::size_t(c)] = inv;
            const T g = gamma_[std::size_t(c)], b = beta_[std::size_t(c)];
            for (std::int64_t n = 0; n < N; ++n) {
                const T* px = x.data() + (n * c_ + c) * plane;
                T* ph = xhat_.data() + (n * c_ + c) * plane;
                T* py = y.data() + (n * c_ + c) * plane;
                for (std::int64_t i = 0; i < plane; ++i) {
                    ph[i] = (px[i] - mean) * inv;
                    py[i] = g * ph[i] + b;
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        const std::int64_t N = dy.dim(0), H = dy.dim(2), W = dy.dim(3);
        const std::int64_t plane = H * W, M = N * plane;
        Tensor<T> dx(dy.shape());

        for (std::int64_t c = 0; c < c_; ++c) {
            T sum_dy = 0, sum_dyxh = 0;
            for (std::int64_t n = 0; n < N; ++n) {
                const T* pdy = dy.data() + (n * c_ + c) * plane;
                const T* ph = xhat_.data() + (n * c_ + c) * plane;
                for (std::int64_t i = 0; i < plane; ++i) {
                    sum_dy += pdy[i];
                    sum_dyxh += pdy[i] * ph[i];
                }
            }
            dgamma_[std::size_t(c)] += sum_dyxh;
            dbeta_[std::size_t(c)] += sum_dy;

            const T g = gamma_[std::size_t(c)], inv = inv_std_[std::size_t(c)];
            if (train_) {
                const T k1 = sum_dy / T(M), k2 = sum_dyxh / T(M);
                for (std::int64_t n = 0; n < N; ++n) {
                    const T* pdy = dy.data() + (n * c_ + c) * plane;
                    const T* ph = xhat_.data() + (n * c_ + c) * plane;
                    T* pdx = dx.data() + (n * c_ + c) * plane;
                    for (std::int64_t i = 0; i < plane; ++i)
                        pdx[i] = g * inv * (pdy[i] - k1 - ph[i] * k2);
                }
            } else {
                for (std::int64_t n = 0; n < N; ++n) {
                    const T* pdy = dy.data() + (n * c_ + c) * plane;
                    T* pdx = dx.data() + (n * c_ + c) * plane;
                    for (std::int64_t i = 0; i < plane; ++i) pdx[i] = g * inv * pdy[i];
                }
            }
        }
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
                 std::vector<ParamRef<T>>& buffers) override {
        params.push_back({prefix + ".gamma", &gamma_, &dgamma_});
        params.push_back({prefix + ".beta", &beta_, &dbeta_});
        buffers.push_back({prefix + ".running_mean", &run_mean_, nullptr});
        buffers.push_back({prefix + ".running_var", &run_var_, nullptr});
    }

  private:
    std::int64_t c_;
    T eps_, momentum_;
    bool train_ = true;
    Tensor<T> gamma_, beta_, dgamma_, dbeta_, run_mean_, run_var_;
    Tensor<T> xhat_, inv_std_;
};

// --- activations --------------------------------------------------------------------

template <typename T>
class LeakyReLU : public Layer<T> {
  public:
    explicit LeakyReLU(T slope) : slope_(slope) {}

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        x_ = x;
        Tensor<T> y(x.shape());
        for (std::int64_t i = 0; i < x.numel(); ++i) {
            const T v = x[std::size_t(i)];
            y[std::size_t(i)] = v > T(0) ? v : slope_ * v;
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx(dy.shape());
        for (std::int64_t i = 0; i < dy.numel(); ++i)
            dx[std::size_t(i)] = x_[std::size_t(i)] > T(0) ? dy[std::size_t(i)]
                                                           : slope_ * dy[std::size_t(i)];
        return dx;
    }

  private:
    T slope_;
    Tensor<T> x_;
};

template <typename T>
class Tanh : public Layer<T> {
  public:
    Tensor<T> forward(const Tensor<T>& x, bool) override {
        y_ = Tensor<T>(x.shape());
        for (std::int64_t i = 0; i < x.numel(); ++i) y_[std::size_t(i)] = std::tanh(x[std::size_t(i)]);
        return y_;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx(dy.shape());
        for (std::int64_t i = 0; i < dy.numel(); ++i) {
            const T y = y_[std::size_t(i)];
            dx[std::size_t(i)] = dy[std::size_t(i)] * (T(1) - y * y);
        }
        return dx;
    }

  private:
    Tensor<T> y_;
};

// --- shape adapters -----------------------------------------------------------------

/// (N, F) -> (N, C, H, W) with F = C*H*W.
template <typename T>
class ReshapeToImage : public Layer<T> {
  public:
    ReshapeToImage(std::int64_t c, std::int64_t h, std::int64_t w) : c_(c), h_(h), w_(w) {}

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        if (x.ndim() != 2 || x.dim(1) != c_ * h_ * w_)
            throw DomainError("ReshapeToImage: bad input shape " +
                              Tensor<T>::shape_str(x.shape()));
        return x.reshaped({x.dim(0), c_, h_, w_});
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        return dy.reshaped({dy.dim(0), c_ * h_ * w_});
    }

  private:
    std::int64_t c_, h_, w_;
};

template <typename T>
class Flatten : public Layer<T> {
  public:
    Tensor<T> forward(const Tensor<T>& x, bool) override {
        shape_ = x.shape();
        std::int64_t f = 1;
        for (std::size_t i = 1; i < shape_.size(); ++i) f *= shape_[i];
        return x.reshaped({x.dim(0), f});
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        auto s = shape_;
        s[0] = dy.dim(0);
        return dy.reshaped(s);
    }

  private:
    std::vector<std::int64_t> shape_;
};

} // namespace porogen::nn
