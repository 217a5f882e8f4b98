#include <doctest.h>

#include <cmath>
#include <functional>

#include "porogen/core/rng.hpp"
#include "porogen/nn/adam.hpp"
#include "porogen/nn/im2col.hpp"
#include "porogen/nn/layers.hpp"
#include "porogen/nn/loss.hpp"
#include "porogen/nn/sequential.hpp"

using namespace porogen;
using nn::Tensor;

namespace {

void fill_random(Tensor<double>& t, Rng& rng, double scale = 1.0) {
    for (std::int64_t i = 0; i < t.numel(); ++i) t[std::size_t(i)] = scale * rng.gaussian();
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
    double acc = 0;
    for (std::int64_t i = 0; i < a.numel(); ++i) acc += a[std::size_t(i)] * b[std::size_t(i)];
    return acc;
}

// L(layer) = <w, layer.forward(x)>; checks analytic dL/dparam and dL/dx
// against central finite differences.
void check_layer_gradients(nn::Layer<double>& layer, Tensor<double> x, Rng& rng,
                           double tol = 1e-7) {
    Tensor<double> y = layer.forward(x, true);
    Tensor<double> w(y.shape());
    fill_random(w, rng);

    std::vector<nn::ParamRef<double>> params, buffers;
    layer.collect("p", params, buffers);
    for (auto& p : params) p.grad->zero();

    const Tensor<double> dx = layer.backward(w);

    auto loss = [&]() { return dot(w, layer.forward(x, true)); };
    const double h = 1e-5;

    for (auto& p : params) {
        const std::int64_t probes = std::min<std::int64_t>(p.value->numel(), 6);
        for (std::int64_t k = 0; k < probes; ++k) {
            const std::size_t idx =
                std::size_t(rng.below(std::uint64_t(p.value->numel())));
            double& slot = (*p.value)[idx];
            const double keep = slot;
            slot = keep + h;
            const double up = loss();
            slot = keep - h;
            const double dn = loss();
            slot = keep;
            const double fd = (up - dn) / (2 * h);
            CHECK((*p.grad)[idx] == doctest::Approx(fd).epsilon(tol).scale(1.0));
        }
    }
    for (int k = 0; k < 6; ++k) {
        const std::size_t idx = std::size_t(rng.below(std::uint64_t(x.numel())));
        double& slot = x[idx];
        const double keep = slot;
        slot = keep + h;
        const double up = loss();
        slot = keep - h;
        const double dn = loss();
        slot = keep;
        const double fd = (up - dn) / (2 * h);
        CHECK(dx[idx] == doctest::Approx(fd).epsilon(tol).scale(1.0));
    }
}

} // namespace

TEST_CASE("im2col and col2im_add are adjoint") {
    Rng rng(1);
    const int C = 3, H = 7, W = 6, k = 4, s = 2, p = 1;
    const int oh = nn::conv_out_size(H, k, s, p), ow = nn::conv_out_size(W, k, s, p);

    Tensor<double> x({C, H, W}), cols({C * k * k, oh * ow});
    fill_random(x, rng);
    fill_random(cols, rng);

    Tensor<double> unfolded({C * k * k, oh * ow});
    nn::im2col(x.data(), C, H, W, k, s, p, unfolded.data());

    Tensor<double> folded({C, H, W});
    nn::col2im_add(cols.data(), C, H, W, k, s, p, folded.data());

    CHECK(dot(unfolded, cols) == doctest::Approx(dot(x, folded)).epsilon(1e-12));
}

TEST_CASE("Conv2d forward equals the direct definition") {
    Rng rng(2);
    const int N = 2, Cin = 3, Cout = 4, H = 8, W = 8, k = 4, s = 2, p = 1;
    nn::Conv2d<double> conv(Cin, Cout, k, s, p);

    std::vector<nn::ParamRef<double>> params, buffers;
    conv.collect("c", params, buffers);
    for (auto& pr : params) fill_random(*pr.value, rng, 0.5);
    const Tensor<double>& wt = *params[0].value; // (Cout, Cin*k*k)
    const Tensor<double>& bias = *params[1].value;

    Tensor<double> x({N, Cin, H, W});
    fill_random(x, rng);
    const Tensor<double> y = conv.forward(x, true);
    const int oh = nn::conv_out_size(H, k, s, p), ow = nn::conv_out_size(W, k, s, p);
    REQUIRE(y.shape() == std::vector<std::int64_t>({N, Cout, oh, ow}));

    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Cout; ++co)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = bias[std::size_t(co)];
                    for (int ci = 0; ci < Cin; ++ci)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int iy = oy * s - p + ky, ix = ox * s - p + kx;
                                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                                acc += wt[std::size_t(((co * Cin + ci) * k + ky) * k + kx)] *
                                       x[std::size_t(((n * Cin + ci) * H + iy) * W + ix)];
                            }
                    CHECK(y[std::size_t(((n * Cout + co) * oh + oy) * ow + ox)] ==
                          doctest::Approx(acc).epsilon(1e-10));
                }
}

TEST_CASE("ConvTranspose2d forward equals the scatter definition") {
    Rng rng(3);
    const int N = 2, Cin = 3, Cout = 2, H = 4, W = 4, k = 4, s = 2, p = 1;
    nn::ConvTranspose2d<double> deconv(Cin, Cout, k, s, p);

    std::vector<nn::ParamRef<double>> params, buffers;
    deconv.collect("d", params, buffers);
    for (auto& pr : params) fill_random(*pr.value, rng, 0.5);
    const Tensor<double>& wt = *params[0].value; // (Cin, Cout*k*k)
    const Tensor<double>& bias = *params[1].value;

    Tensor<double> x({N, Cin, H, W});
    fill_random(x, rng);
    const Tensor<double> y = deconv.forward(x, true);
    const int oh = nn::ConvTranspose2d<double>::out_size(H, k, s, p);
    const int ow = nn::ConvTranspose2d<double>::out_size(W, k, s, p);
    REQUIRE(y.shape() == std::vector<std::int64_t>({N, Cout, oh, ow}));

    Tensor<double> want(y.shape());
    for (int n = 0; n < N; ++n) {
        for (int co = 0; co < Cout; ++co)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox)
                    want[std::size_t(((n * Cout + co) * oh + oy) * ow + ox)] =
                        bias[std::size_t(co)];
        for (int ci = 0; ci < Cin; ++ci)
            for (int iy = 0; iy < H; ++iy)
                for (int ix = 0; ix < W; ++ix)
                    for (int co = 0; co < Cout; ++co)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int oy = iy * s - p + ky, ox = ix * s - p + kx;
                                if (oy < 0 || oy >= oh || ox < 0 || ox >= ow) continue;
                                want[std::size_t(((n * Cout + co) * oh + oy) * ow + ox)] +=
                                    wt[std::size_t((ci * Cout + co) * k * k + ky * k + kx)] *
                                    x[std::size_t(((n * Cin + ci) * H + iy) * W + ix)];
                            }
    }
    for (std::int64_t i = 0; i < y.numel(); ++i)
        CHECK(y[std::size_t(i)] == doctest::Approx(want[std::size_t(i)]).epsilon(1e-10));
}

TEST_CASE("layer gradients match central finite differences") {
    Rng rng(4);

    SUBCASE("Dense") {
        nn::Dense<double> layer(6, 5);
        std::vector<nn::ParamRef<double>> params, buffers;
        layer.collect("p", params, buffers);
        for (auto& p : params) fill_random(*p.value, rng, 0.3);
        Tensor<double> x({3, 6});
        fill_random(x, rng);
        check_layer_gradients(layer, x, rng);
    }
    SUBCASE("Conv2d") {
        nn::Conv2d<double> layer(2, 3, 4, 2, 1);
        std::vector<nn::ParamRef<double>> params, buffers;
        layer.collect("p", params, buffers);
        for (auto& p : params) fill_random(*p.value, rng, 0.3);
        Tensor<double> x({2, 2, 8, 8});
        fill_random(x, rng);
        check_layer_gradients(layer, x, rng);
    }
    SUBCASE("ConvTranspose2d") {
        nn::ConvTranspose2d<double> layer(3, 2, 4, 2, 1);
        std::vector<nn::ParamRef<double>> params, buffers;
        layer.collect("p", params, buffers);
        for (auto& p : params) fill_random(*p.value, rng, 0.3);
        Tensor<double> x({2, 3, 4, 4});
        fill_random(x, rng);
        check_layer_gradients(layer, x, rng);
    }
    SUBCASE("BatchNorm2d, train mode") {
        nn::BatchNorm2d<double> layer(3);
        std::vector<nn::ParamRef<double>> params, buffers;
        layer.collect("p", params, buffers);
        fill_random(*params[0].value, rng, 0.2); // gamma around 0 is fine for the check
        fill_random(*params[1].value, rng, 0.2);
        Tensor<double> x({4, 3, 5, 5});
        fill_random(x, rng);
        check_layer_gradients(layer, x, rng, 1e-5);
    }
    SUBCASE("LeakyReLU") {
        nn::LeakyReLU<double> layer(0.2);
        Tensor<double> x({2, 3, 4, 4});
        fill_random(x, rng);
        check_layer_gradients(layer, x, rng);
    }
    SUBCASE("Tanh") {
        nn::Tanh<double> layer;
        Tensor<double> x({2, 10});
        fill_random(x, rng);
        check_layer_gradients(layer, x, rng);
    }
}

TEST_CASE("sequential chain backpropagates through mixed layers") {
    Rng rng(5);
    nn::Sequential<double> net;
    net.add<nn::Conv2d<double>>("conv", 2, 4, 4, 2, 1);
    net.add<nn::BatchNorm2d<double>>("bn", 4);
    net.add<nn::LeakyReLU<double>>("act", 0.2);
    net.add<nn::Flatten<double>>("flat");
    net.add<nn::Dense<double>>("head", 4 * 4 * 4, 1);

    std::vector<nn::ParamRef<double>> params, buffers;
    net.collect("n", params, buffers);
    for (auto& p : params) fill_random(*p.value, rng, 0.3);

    Tensor<double> x({3, 2, 8, 8});
    fill_random(x, rng);

    auto loss = [&]() {
        const Tensor<double> y = net.forward(x, true);
        double acc = 0;
        for (std::int64_t i = 0; i < y.numel(); ++i) acc += y[std::size_t(i)];
        return acc;
    };

    net.zero_grads();
    const Tensor<double> y = net.forward(x, true);
    Tensor<double> dy(y.shape());
    dy.fill(1.0);
    const Tensor<double> dx = net.backward(dy);

    const double h = 1e-5;
    for (auto& p : params) {
        for (int probe = 0; probe < 4; ++probe) {
            const std::size_t idx = std::size_t(rng.below(std::uint64_t(p.value->numel())));
            double& slot = (*p.value)[idx];
            const double keep = slot;
            slot = keep + h;
            const double up = loss();
            slot = keep - h;
            const double dn = loss();
            slot = keep;
            CHECK((*p.grad)[idx] ==
                  doctest::Approx((up - dn) / (2 * h)).epsilon(1e-6).scale(1.0));
        }
    }
    for (int probe = 0; probe < 6; ++probe) {
        const std::size_t idx = std::size_t(rng.below(std::uint64_t(x.numel())));
        double& slot = x[idx];
        const double keep = slot;
        slot = keep + h;
        const double up = loss();
        slot = keep - h;
        const double dn = loss();
        slot = keep;
        CHECK(dx[idx] == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-6).scale(1.0));
    }
}

TEST_CASE("Adam reproduces the closed-form update") {
    Tensor<double> p({3});
    p[0] = 0.5;
    p[1] = -1.25;
    p[2] = 2.0;
    Tensor<double> g({3});
    g[0] = 0.1;
    g[1] = -0.7;
    g[2] = 0.0;

    const double lr = 2e-4, b1 = 0.5, b2 = 0.999, eps = 1e-8;
    nn::Adam<double> opt(lr, b1, b2, eps);
    std::vector<nn::ParamRef<double>> refs{{"p", &p, &g}};
    opt.attach(refs);

    const Tensor<double> p0 = p;
    opt.step(refs);
    for (int i = 0; i < 3; ++i) {
        const double gi = g[std::size_t(i)];
        const double m = (1 - b1) * gi, v = (1 - b2) * gi * gi;
        const double mhat = m / (1 - b1), vhat = v / (1 - b2);
        const double want = p0[std::size_t(i)] - lr * mhat / (std::sqrt(vhat) + eps);
        CHECK(std::fabs(p[std::size_t(i)] - want) <= 1e-10);
    }

    // second step exercises bias correction at t = 2
    Tensor<double> g2({3});
    g2[0] = -0.2;
    g2[1] = 0.05;
    g2[2] = 1.0;
    const Tensor<double> p1 = p;
    std::vector<nn::ParamRef<double>> refs2{{"p", &p, &g2}};
    opt.step(refs2);
    for (int i = 0; i < 3; ++i) {
        const double m1 = (1 - b1) * g[std::size_t(i)];
        const double v1 = (1 - b2) * g[std::size_t(i)] * g[std::size_t(i)];
        const double m2 = b1 * m1 + (1 - b1) * g2[std::size_t(i)];
        const double v2 = b2 * v1 + (1 - b2) * g2[std::size_t(i)] * g2[std::size_t(i)];
        const double mhat = m2 / (1 - b1 * b1), vhat = v2 / (1 - b2 * b2);
        const double want = p1[std::size_t(i)] - lr * mhat / (std::sqrt(vhat) + eps);
        CHECK(std::fabs(p[std::size_t(i)] - want) <= 1e-10);
    }
}

TEST_CASE("zero learning rate leaves parameters untouched") {
    Tensor<double> p({2});
    p[0] = 1.0;
    p[1] = -2.0;
    Tensor<double> g({2});
    g[0] = 0.3;
    g[1] = -0.4;
    nn::Adam<double> opt(0.0, 0.5, 0.999);
    std::vector<nn::ParamRef<double>> refs{{"p", &p, &g}};
    opt.attach(refs);
    opt.step(refs);
    CHECK(p[0] == 1.0);
    CHECK(p[1] == -2.0);
}

TEST_CASE("bce loss analytics") {
    // uniform 0.5 scores: ln 2 regardless of targets
    std::vector<double> s{0.5, 0.5, 0.5, 0.5};
    std::vector<int> t{1, 0, 1, 0};
    CHECK(bce_loss(s, t) == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    // hand-evaluated: -(ln 0.9 + ln 0.9)/2
    std::vector<double> s2{0.9, 0.1};
    std::vector<int> t2{1, 0};
    CHECK(bce_loss(s2, t2) == doctest::Approx(-std::log(0.9)).epsilon(1e-9));
    CHECK(bce_loss(s2, t2) == doctest::Approx(0.105360516).epsilon(1e-6));

    // near-perfect scores give a loss near zero
    std::vector<double> s3{1.0 - 1e-9, 1e-9};
    CHECK(bce_loss(s3, t2) < 1e-6);

    // clamping keeps saturated scores finite
    std::vector<double> s4{1.0, 0.0};
    std::vector<int> t4{0, 1};
    CHECK(std::isfinite(bce_loss(s4, t4)));
    CHECK(bce_loss(s4, t4) == doctest::Approx(-std::log(1e-7)).epsilon(1e-6));

    CHECK_THROWS_AS(bce_loss(std::vector<double>{}, std::vector<int>{}), DomainError);
    CHECK_THROWS_AS(bce_loss(s2, std::vector<int>{1}), DomainError);
    CHECK_THROWS_AS(bce_loss(s2, std::vector<int>{1, 2}), DomainError);
}
