#pragma once

#include <cstdint>

namespace porogen::nn {

inline int conv_out_size(int in, int kernel, int stride, int pad) {
    return (in + 2 * pad - kernel) / stride + 1;
}

/// Unfolds x (C,H,W) into cols (C*k*k rows, out_h*out_w columns, row-major).
/// Out-of-bounds taps read as zero.
template <typename T>
void im2col(const T* x, int C, int H, int W, int k, int stride, int pad, T* cols) {
    const int out_h = conv_out_size(H, k, stride, pad);
    const int out_w = conv_out_size(W, k, stride, pad);
    const std::int64_t P = std::int64_t(out_h) * out_w;

    for (int c = 0; c < C; ++c) {
        const T* xc = x + std::int64_t(c) * H * W;
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                T* row = cols + (std::int64_t(c) * k * k + ky * k + kx) * P;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    T* dst = row + std::int64_t(oy) * out_w;
                    if (iy < 0 || iy >= H) {
                        for (int ox = 0; ox < out_w; ++ox) dst[ox] = T(0);
                        continue;
                    }
                    const T* src = xc + std::int64_t(iy) * W;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        dst[ox] = (ix >= 0 && ix < W) ? src[ix] : T(0);
                    }
                }
            }
    }
}

/// Adjoint of im2col: scatter-adds cols back into x (C,H,W). x is accumulated,
/// not overwritten.
template <typename T>
void col2im_add(const T* cols, int C, int H, int W, int k, int stride, int pad, T* x) {
    const int out_h = conv_out_size(H, k, stride, pad);
    const int out_w = conv_out_size(W, k, stride, pad);
    const std::int64_t P = std::int64_t(out_h) * out_w;

    for (int c = 0; c < C; ++c) {
        T* xc = x + std::int64_t(c) * H * W;
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                const T* row = cols + (std::int64_t(c) * k * k + ky * k + kx) * P;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= H) continue;
                    const T* src = row + std::int64_t(oy) * out_w;
                    T* dst = xc + std::int64_t(iy) * W;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < W) dst[ix] += src[ox];
                    }
                }
            }
    }
}

} // namespace porogen::nn
