#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "detbench/tensor.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace detbench;
using namespace testutil;

namespace {

ConvParams random_conv(std::mt19937& rng, int in_c, int out_c, int k,
                       int stride, int pad, int groups, bool bias) {
    ConvParams p;
    p.in_channels = in_c;
    p.out_channels = out_c;
    p.kh = p.kw = k;
    p.stride = stride;
    p.padding = pad;
    p.groups = groups;
    p.weights.resize(p.weight_count());
    fill_uniform(p.weights, rng);
    if (bias) {
        p.bias.resize(out_c);
        fill_uniform(p.bias, rng);
    }
    return p;
}

// Reference batchnorm inference: gamma * (x - mean) / sqrt(var + eps) + beta.
Tensor bn_reference(const Tensor& x, const BatchNormParams& bn) {
    Tensor y = x;
    for (int ni = 0; ni < x.n; ++ni)
        for (int ci = 0; ci < x.c; ++ci) {
            float scale = bn.gamma[ci] /
                          std::sqrt(bn.running_var[ci] + bn.epsilon);
            float shift = bn.beta[ci] - bn.running_mean[ci] * scale;
            float* d = y.chan(ni, ci);
            size_t px = static_cast<size_t>(x.h) * x.w;
            for (size_t i = 0; i < px; ++i) d[i] = d[i] * scale + shift;
        }
    return y;
}

BatchNormParams random_bn(std::mt19937& rng, int channels) {
    BatchNormParams bn;
    bn.gamma.resize(channels);
    bn.beta.resize(channels);
    bn.running_mean.resize(channels);
    bn.running_var.resize(channels);
    fill_uniform(bn.gamma, rng, 0.5f, 2.f);
    fill_uniform(bn.beta, rng);
    fill_uniform(bn.running_mean, rng);
    fill_uniform(bn.running_var, rng, 0.01f, 2.f);
    return bn;
}

}  // namespace

TEST_CASE("conv2d matches the quadruple-loop reference on randomized cases") {
    std::mt19937 rng(1234);
    const int kernels[] = {1, 3, 5};
    int cases = 0;
    for (int rep = 0; rep < 14; ++rep) {
        for (int k : kernels) {
            for (int grouping = 0; grouping < 3; ++grouping) {
                // grouping: 0 = dense, 1 = depthwise, 2 = two groups
                int in_c, out_c, groups;
                if (grouping == 0) {
                    in_c = 1 + int(rng() % 24);
                    out_c = 1 + int(rng() % 24);
                    groups = 1;
                } else if (grouping == 1) {
                    in_c = out_c = groups = 1 + int(rng() % 24);
                } else {
                    groups = 2;
                    in_c = 2 * (1 + int(rng() % 12));
                    out_c = 2 * (1 + int(rng() % 12));
                }
                int stride = 1 + int(rng() % 3);
                int pad = int(rng() % (k / 2 + 2));
                int h = k + int(rng() % 14);
                int w = k + int(rng() % 14);
                bool bias = (rng() % 2) == 0;
                ConvParams p =
                    random_conv(rng, in_c, out_c, k, stride, pad, groups, bias);
                Tensor x(1 + int(rng() % 2), in_c, h, w);
                fill_uniform(x, rng);
                Tensor fast = conv2d(x, p);
                Tensor ref = conv2d_naive(x, p);
                INFO("case ", cases, ": c=", in_c, "->", out_c, " k=", k,
                     " s=", stride, " p=", pad, " g=", groups, " hw=", h, "x",
                     w, " bias=", bias);
                REQUIRE(fast.same_shape(ref));
                REQUIRE(rel_err(fast, ref) <= 1e-5);
                ++cases;
            }
        }
    }
    CHECK(cases >= 100);
}

TEST_CASE("conv2d handles wide channel counts seen in real stages") {
    std::mt19937 rng(77);
    // Shapes from the actual networks: 1x1 96->96, 3x3 s2, depthwise 5x5.
    struct Case {
        int in_c, out_c, k, s, p, g, hw;
    } cases[] = {
        {96, 96, 1, 1, 0, 1, 13},  {48, 96, 3, 2, 1, 1, 26},
        {96, 96, 5, 1, 2, 96, 13}, {192, 384, 3, 2, 1, 1, 13},
        {384, 96, 1, 1, 0, 1, 13}, {96, 96, 3, 1, 1, 2, 13},
    };
    for (const Case& cs : cases) {
        ConvParams p = random_conv(rng, cs.in_c, cs.out_c, cs.k, cs.s, cs.p,
                                   cs.g, false);
        Tensor x(1, cs.in_c, cs.hw, cs.hw);
        fill_uniform(x, rng);
        CHECK(rel_err(conv2d(x, p), conv2d_naive(x, p)) <= 1e-5);
    }
}

TEST_CASE("max_pool matches its reference on randomized cases") {
    std::mt19937 rng(4321);
    const int kernels[] = {2, 3, 5, 9, 13};
    for (int rep = 0; rep < 8; ++rep) {
        for (int k : kernels) {
            int stride = 1 + int(rng() % 2);
            int pad = int(rng() % (k / 2 + 1));
            int c = 1 + int(rng() % 8);
            int h = k + int(rng() % 10);
            int w = k + int(rng() % 10);
            Tensor x(1, c, h, w);
            fill_uniform(x, rng, -5.f, 5.f);
            Tensor fast = max_pool(x, k, stride, pad);
            Tensor ref = max_pool_naive(x, k, stride, pad);
            INFO("k=", k, " s=", stride, " p=", pad, " hw=", h, "x", w);
            REQUIRE(fast.same_shape(ref));
            REQUIRE(rel_err(fast, ref) <= 1e-5);
        }
    }
}

TEST_CASE("batchnorm folding reproduces bn(conv(x)) within 1e-4 absolute") {
    std::mt19937 rng(99);
    int cases = 0;
    for (int rep = 0; rep < 36; ++rep) {
        for (int variant = 0; variant < 3; ++variant) {
            int in_c, out_c, k, groups;
            if (variant == 0) {  // 1x1 dense
                in_c = 1 + int(rng() % 32);
                out_c = 1 + int(rng() % 32);
                k = 1;
                groups = 1;
            } else if (variant == 1) {  // 3x3 dense
                in_c = 1 + int(rng() % 16);
                out_c = 1 + int(rng() % 16);
                k = 3;
                groups = 1;
            } else {  // depthwise 3x3 or 5x5
                in_c = out_c = groups = 1 + int(rng() % 16);
                k = (rng() % 2) ? 3 : 5;
            }
            bool bias = (rng() % 4) == 0;  // conv-into-bn rarely has one
            ConvParams conv =
                random_conv(rng, in_c, out_c, k, 1, k / 2, groups, bias);
            BatchNormParams bn = random_bn(rng, out_c);
            Tensor x(1, in_c, 9, 9);
            fill_uniform(x, rng);
            Tensor unfused = bn_reference(conv2d(x, conv), bn);
            Tensor fused = conv2d(x, fold_batchnorm(conv, bn));
            INFO("variant=", variant, " c=", in_c, "->", out_c, " k=", k);
            REQUIRE(fused.same_shape(unfused));
            REQUIRE(max_abs_diff(fused, unfused) <= 1e-4);
            ++cases;
        }
    }
    CHECK(cases >= 100);
}

TEST_CASE("activation scalar values") {
    auto one = [](float v, Act a) {
        Tensor t(1, 1, 1, 1);
        t.data[0] = v;
        return activation(t, a).data[0];
    };
    CHECK(one(0.f, Act::SiLU) == doctest::Approx(0.f));
    CHECK(one(1.f, Act::SiLU) == doctest::Approx(0.7310586f));
    CHECK(one(-1.f, Act::SiLU) == doctest::Approx(-0.2689414f));
    CHECK(one(3.f, Act::HardSwish) == doctest::Approx(3.f));
    CHECK(one(-3.f, Act::HardSwish) == doctest::Approx(0.f));
    CHECK(one(1.f, Act::HardSwish) == doctest::Approx(4.f / 6.f));
    CHECK(one(0.f, Act::HardSigmoid) == doctest::Approx(0.5f));
    CHECK(one(-4.f, Act::HardSigmoid) == doctest::Approx(0.f));
    CHECK(one(-1.f, Act::LeakyReLU) == doctest::Approx(-0.1f));
    CHECK(one(2.f, Act::LeakyReLU) == doctest::Approx(2.f));
    CHECK(one(-2.f, Act::Relu) == doctest::Approx(0.f));
    CHECK(one(1.5f, Act::Identity) == doctest::Approx(1.5f));
}

TEST_CASE("vectorized activations agree with the scalar formulas") {
    std::mt19937 rng(5);
    Tensor x(1, 4, 33, 29);  // odd tail exercises the scalar remainder
    fill_uniform(x, rng, -8.f, 8.f);
    for (Act a : {Act::SiLU, Act::HardSwish, Act::HardSigmoid, Act::Relu,
                  Act::LeakyReLU}) {
        Tensor got = activation(x, a);
        Tensor want = x;
        for (float& v : want.data) {
            switch (a) {
                case Act::SiLU: v = v / (1.f + std::exp(-v)); break;
                case Act::HardSwish: {
                    float r = std::min(std::max(v + 3.f, 0.f), 6.f);
                    v = v * r / 6.f;
                    break;
                }
                case Act::HardSigmoid:
                    v = std::min(std::max(v + 3.f, 0.f), 6.f) / 6.f;
                    break;
                case Act::Relu: v = std::max(v, 0.f); break;
                case Act::LeakyReLU: v = v > 0.f ? v : 0.1f * v; break;
                default: break;
            }
        }
        INFO("act=", act_name(a));
        CHECK(max_abs_diff(got, want) <= 1e-5);
    }
}

TEST_CASE("activation name round-trip and unknown-name error") {
    for (Act a : {Act::SiLU, Act::HardSwish, Act::LeakyReLU, Act::Identity,
                  Act::Relu, Act::HardSigmoid})
        CHECK(act_from_name(act_name(a)) == a);
    CHECK_THROWS_WITH_AS(act_from_name("gelu"),
                         "activation: unknown kind 'gelu'",
                         std::invalid_argument);
}

TEST_CASE("space_to_depth2x phase order and shape") {
    Tensor x(1, 1, 2, 2);
    x.data = {1.f, 2.f, 3.f, 4.f};  // rows: [1 2] / [3 4]
    Tensor y = space_to_depth2x(x);
    CHECK(y.c == 4);
    CHECK(y.h == 1);
    CHECK(y.w == 1);
    // Phases (y0x0, y1x0, y0x1, y1x1) -> 1, 3, 2, 4.
    CHECK(y.data[0] == 1.f);
    CHECK(y.data[1] == 3.f);
    CHECK(y.data[2] == 2.f);
    CHECK(y.data[3] == 4.f);

    Tensor big(2, 3, 8, 6);
    std::mt19937 rng(7);
    fill_uniform(big, rng);
    Tensor yb = space_to_depth2x(big);
    CHECK(yb.n == 2);
    CHECK(yb.c == 12);
    CHECK(yb.h == 4);
    CHECK(yb.w == 3);
    // Channel block ph holds input channel ci at phase offset (oy0, ox0).
    CHECK(yb.at(1, 3 + 2, 1, 1) == big.at(1, 2, 3, 2));   // phase (1,0)
    CHECK(yb.at(0, 6 + 1, 2, 2) == big.at(0, 1, 4, 5));   // phase (0,1)
    CHECK(yb.at(0, 9 + 0, 0, 0) == big.at(0, 0, 1, 1));   // phase (1,1)

    Tensor odd(1, 1, 3, 4);
    CHECK_THROWS_AS(space_to_depth2x(odd), std::invalid_argument);
}

TEST_CASE("upsample_nearest2x replicates each pixel") {
    Tensor x(1, 2, 2, 3);
    std::mt19937 rng(11);
    fill_uniform(x, rng);
    Tensor y = upsample_nearest2x(x);
    CHECK(y.h == 4);
    CHECK(y.w == 6);
    for (int ci = 0; ci < 2; ++ci)
        for (int yi = 0; yi < 4; ++yi)
            for (int xi = 0; xi < 6; ++xi)
                CHECK(y.at(0, ci, yi, xi) == x.at(0, ci, yi / 2, xi / 2));
}

TEST_CASE("concat, add, global pool, channelwise multiply") {
    std::mt19937 rng(13);
    Tensor a(1, 2, 3, 3), b(1, 3, 3, 3);
    fill_uniform(a, rng);
    fill_uniform(b, rng);
    Tensor cat = concat_channels({a, b});
    CHECK(cat.c == 5);
    CHECK(cat.at(0, 1, 2, 2) == a.at(0, 1, 2, 2));
    CHECK(cat.at(0, 2, 0, 1) == b.at(0, 0, 0, 1));

    Tensor bad(1, 3, 4, 3);
    CHECK_THROWS_AS(
        concat_channels(std::vector<const Tensor*>{&a, &bad}),
        std::invalid_argument);
    CHECK_THROWS_AS(concat_channels(std::vector<const Tensor*>{}),
                    std::invalid_argument);

    Tensor a2 = a;
    Tensor sum = add_elementwise(a, a2);
    CHECK(sum.at(0, 0, 1, 1) == doctest::Approx(2.f * a.at(0, 0, 1, 1)));
    CHECK_THROWS_AS(add_elementwise(a, b), std::invalid_argument);

    Tensor flat(1, 2, 2, 2, 1.f);
    flat.at(0, 1, 0, 0) = 5.f;
    Tensor gap = global_avg_pool(flat);
    CHECK(gap.h == 1);
    CHECK(gap.w == 1);
    CHECK(gap.at(0, 0, 0, 0) == doctest::Approx(1.f));
    CHECK(gap.at(0, 1, 0, 0) == doctest::Approx(2.f));

    Tensor gate(1, 2, 1, 1);
    gate.data = {2.f, 0.5f};
    Tensor scaled = mul_channelwise(flat, gate);
    CHECK(scaled.at(0, 0, 1, 1) == doctest::Approx(2.f));
    CHECK(scaled.at(0, 1, 0, 0) == doctest::Approx(2.5f));
    Tensor bad_gate(1, 2, 2, 1);
    CHECK_THROWS_AS(mul_channelwise(flat, bad_gate), std::invalid_argument);
}

TEST_CASE("conv output size formula") {
    CHECK(conv_out_dim(416, 3, 2, 1) == 208);
    CHECK(conv_out_dim(52, 1, 1, 0) == 52);
    CHECK(conv_out_dim(13, 5, 1, 2) == 13);
    CHECK(conv_out_dim(26, 3, 2, 1) == 13);
    CHECK(conv_out_dim(7, 3, 3, 0) == 2);
}

TEST_CASE("conv2d validates its configuration with structured errors") {
    std::mt19937 rng(3);
    ConvParams p = random_conv(rng, 4, 8, 3, 1, 1, 1, false);
    Tensor wrong_c(1, 5, 8, 8);
    CHECK_THROWS_WITH_AS(conv2d(wrong_c, p),
                         doctest::Contains("input channel mismatch"),
                         std::invalid_argument);

    ConvParams bad_groups = p;
    bad_groups.groups = 3;
    Tensor x(1, 4, 8, 8);
    CHECK_THROWS_WITH_AS(conv2d(x, bad_groups),
                         doctest::Contains("must divide"),
                         std::invalid_argument);

    ConvParams short_w = p;
    short_w.weights.pop_back();
    CHECK_THROWS_WITH_AS(conv2d(x, short_w),
                         doctest::Contains("weight buffer"),
                         std::invalid_argument);

    ConvParams bad_bias = p;
    bad_bias.bias = {1.f, 2.f};
    CHECK_THROWS_WITH_AS(conv2d(x, bad_bias),
                         doctest::Contains("bias buffer"),
                         std::invalid_argument);

    Tensor tiny(1, 4, 2, 2);
    ConvParams big_k = random_conv(rng, 4, 8, 5, 1, 0, 1, false);
    CHECK_THROWS_WITH_AS(conv2d(tiny, big_k),
                         doctest::Contains("output would be empty"),
                         std::invalid_argument);

    BatchNormParams bn = random_bn(rng, 6);
    CHECK_THROWS_WITH_AS(fold_batchnorm(p, bn),
                         doctest::Contains("fold_batchnorm"),
                         std::invalid_argument);
}
