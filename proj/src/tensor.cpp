#include "detbench/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define DETBENCH_HAVE_AVX2 1
#endif

namespace detbench {

std::string Tensor::shape_str() const {
    return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " +
           std::to_string(h) + ", " + std::to_string(w) + ")";
}

const char* act_name(Act a) {
    switch (a) {
        case Act::SiLU: return "silu";
        case Act::HardSwish: return "hardswish";
        case Act::LeakyReLU: return "leakyrelu";
        case Act::Identity: return "identity";
        case Act::Relu: return "relu";
        case Act::HardSigmoid: return "hardsigmoid";
    }
    return "identity";
}

Act act_from_name(const std::string& s) {
    if (s == "silu") return Act::SiLU;
    if (s == "hardswish") return Act::HardSwish;
    if (s == "leakyrelu") return Act::LeakyReLU;
    if (s == "identity") return Act::Identity;
    if (s == "relu") return Act::Relu;
    if (s == "hardsigmoid") return Act::HardSigmoid;
    throw std::invalid_argument("activation: unknown kind '" + s + "'");
}

namespace {

void check_conv_input(const Tensor& x, const ConvParams& p) {
    if (x.c != p.in_channels)
        throw std::invalid_argument(
            "conv2d: input channel mismatch: tensor has " +
            std::to_string(x.c) + " channels, params expect " +
            std::to_string(p.in_channels));
    if (p.in_channels % p.groups != 0 || p.out_channels % p.groups != 0)
        throw std::invalid_argument(
            "conv2d: groups=" + std::to_string(p.groups) +
            " must divide in_channels=" + std::to_string(p.in_channels) +
            " and out_channels=" + std::to_string(p.out_channels));
    if (p.weights.size() != p.weight_count())
        throw std::invalid_argument(
            "conv2d: weight buffer has " + std::to_string(p.weights.size()) +
            " values, layout needs " + std::to_string(p.weight_count()));
    if (p.has_bias() && static_cast<int>(p.bias.size()) != p.out_channels)
        throw std::invalid_argument(
            "conv2d: bias buffer has " + std::to_string(p.bias.size()) +
            " values, expected " + std::to_string(p.out_channels));
    int oh = conv_out_dim(x.h, p.kh, p.stride, p.padding);
    int ow = conv_out_dim(x.w, p.kw, p.stride, p.padding);
    if (oh <= 0 || ow <= 0)
        throw std::invalid_argument("conv2d: output would be empty for input " +
                                    x.shape_str());
}

#ifdef DETBENCH_HAVE_AVX2
thread_local std::vector<float> g_bpack;

// 4 rows of A against one packed 16-column tile of B (tile = K slabs of 16
// consecutive floats, so the k walk streams contiguous cache lines).
inline void kernel_4x16(int K, const float* a0, const float* a1,
                        const float* a2, const float* a3, const float* bt,
                        float* c0, float* c1, float* c2, float* c3) {
    __m256 acc00 = _mm256_loadu_ps(c0);
    __m256 acc01 = _mm256_loadu_ps(c0 + 8);
    __m256 acc10 = _mm256_loadu_ps(c1);
    __m256 acc11 = _mm256_loadu_ps(c1 + 8);
    __m256 acc20 = _mm256_loadu_ps(c2);
    __m256 acc21 = _mm256_loadu_ps(c2 + 8);
    __m256 acc30 = _mm256_loadu_ps(c3);
    __m256 acc31 = _mm256_loadu_ps(c3 + 8);
    for (int k = 0; k < K; ++k, bt += 16) {
        __m256 b0 = _mm256_loadu_ps(bt);
        __m256 b1 = _mm256_loadu_ps(bt + 8);
        __m256 av = _mm256_broadcast_ss(a0 + k);
        acc00 = _mm256_fmadd_ps(av, b0, acc00);
        acc01 = _mm256_fmadd_ps(av, b1, acc01);
        av = _mm256_broadcast_ss(a1 + k);
        acc10 = _mm256_fmadd_ps(av, b0, acc10);
        acc11 = _mm256_fmadd_ps(av, b1, acc11);
        av = _mm256_broadcast_ss(a2 + k);
        acc20 = _mm256_fmadd_ps(av, b0, acc20);
        acc21 = _mm256_fmadd_ps(av, b1, acc21);
        av = _mm256_broadcast_ss(a3 + k);
        acc30 = _mm256_fmadd_ps(av, b0, acc30);
        acc31 = _mm256_fmadd_ps(av, b1, acc31);
    }
    _mm256_storeu_ps(c0, acc00);
    _mm256_storeu_ps(c0 + 8, acc01);
    _mm256_storeu_ps(c1, acc10);
    _mm256_storeu_ps(c1 + 8, acc11);
    _mm256_storeu_ps(c2, acc20);
    _mm256_storeu_ps(c2 + 8, acc21);
    _mm256_storeu_ps(c3, acc30);
    _mm256_storeu_ps(c3 + 8, acc31);
}

inline void kernel_1x16(int K, const float* a, const float* bt, float* c) {
    __m256 acc0 = _mm256_loadu_ps(c);
    __m256 acc1 = _mm256_loadu_ps(c + 8);
    for (int k = 0; k < K; ++k, bt += 16) {
        __m256 av = _mm256_broadcast_ss(a + k);
        acc0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(bt), acc0);
        acc1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(bt + 8), acc1);
    }
    _mm256_storeu_ps(c, acc0);
    _mm256_storeu_ps(c + 8, acc1);
}
#endif

// C(M x N) += A(M x K) * B(K x N), row-major, C pre-filled with bias.
// AVX2/FMA path: N is walked in panels sized to keep a packed copy of the
// B panel cache-resident while every 4-row block of A sweeps over it;
// without the paneling B (often several MB of im2col data) would stream
// from memory once per row block. Scalar fallback is a blocked saxpy.
void gemm_f32(int M, int N, int K, const float* A, const float* B, float* C) {
#ifdef DETBENCH_HAVE_AVX2
    constexpr int MR = 4, NR = 16;
    // Panel budget ~768 KB; round the column count to whole tiles.
    int nb = static_cast<int>(768 * 1024 / sizeof(float)) / std::max(K, 1);
    nb = std::max(NR, std::min(1024, nb - nb % NR));
    int m4 = M - M % MR;
    for (int j0 = 0; j0 < N; j0 += nb) {
        int jb = std::min(nb, N - j0);
        int tiles = (jb + NR - 1) / NR;
        int rem = jb - (tiles - 1) * NR;  // columns in the last tile
        g_bpack.resize(static_cast<size_t>(tiles) * K * NR);
        float* pack = g_bpack.data();
        for (int t = 0; t < tiles; ++t) {
            int cols = t == tiles - 1 ? rem : NR;
            const float* src = B + j0 + static_cast<size_t>(t) * NR;
            float* dst = pack + static_cast<size_t>(t) * K * NR;
            if (cols == NR) {
                for (int k = 0; k < K; ++k, src += N, dst += NR)
                    std::memcpy(dst, src, sizeof(float) * NR);
            } else {  // zero-pad the ragged tile
                for (int k = 0; k < K; ++k, src += N, dst += NR) {
                    std::memcpy(dst, src, sizeof(float) * cols);
                    std::memset(dst + cols, 0, sizeof(float) * (NR - cols));
                }
            }
        }
        // Ragged columns run through the same kernels via a scratch tile.
        alignas(32) float ctmp[MR][NR];
        auto tile_ptr = [&](int t) {
            return pack + static_cast<size_t>(t) * K * NR;
        };
        for (int i = 0; i < m4; i += MR) {
            const float* a0 = A + static_cast<size_t>(i) * K;
            float* c0 = C + static_cast<size_t>(i) * N + j0;
            int full = rem == NR ? tiles : tiles - 1;
            for (int t = 0; t < full; ++t)
                kernel_4x16(K, a0, a0 + K, a0 + 2 * K, a0 + 3 * K, tile_ptr(t),
                            c0 + t * NR, c0 + N + t * NR, c0 + 2 * N + t * NR,
                            c0 + 3 * N + t * NR);
            if (rem != NR) {
                int t = tiles - 1;
                for (int r = 0; r < MR; ++r) {
                    std::memcpy(ctmp[r], c0 + static_cast<size_t>(r) * N + t * NR,
                                sizeof(float) * rem);
                    std::memset(ctmp[r] + rem, 0, sizeof(float) * (NR - rem));
                }
                kernel_4x16(K, a0, a0 + K, a0 + 2 * K, a0 + 3 * K, tile_ptr(t),
                            ctmp[0], ctmp[1], ctmp[2], ctmp[3]);
                for (int r = 0; r < MR; ++r)
                    std::memcpy(c0 + static_cast<size_t>(r) * N + t * NR,
                                ctmp[r], sizeof(float) * rem);
            }
        }
        for (int i = m4; i < M; ++i) {
            const float* a = A + static_cast<size_t>(i) * K;
            float* c = C + static_cast<size_t>(i) * N + j0;
            int full = rem == NR ? tiles : tiles - 1;
            for (int t = 0; t < full; ++t)
                kernel_1x16(K, a, tile_ptr(t), c + t * NR);
            if (rem != NR) {
                int t = tiles - 1;
                std::memcpy(ctmp[0], c + static_cast<size_t>(t) * NR,
                            sizeof(float) * rem);
                std::memset(ctmp[0] + rem, 0, sizeof(float) * (NR - rem));
                kernel_1x16(K, a, tile_ptr(t), ctmp[0]);
                std::memcpy(c + static_cast<size_t>(t) * NR, ctmp[0],
                            sizeof(float) * rem);
            }
        }
    }
#else
    for (int i = 0; i < M; ++i) {
        const float* a = A + static_cast<size_t>(i) * K;
        float* c = C + static_cast<size_t>(i) * N;
        for (int k = 0; k < K; ++k) {
            float av = a[k];
            if (av == 0.f) continue;
            const float* b = B + static_cast<size_t>(k) * N;
            for (int j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
#endif
}

// Scratch buffers reused across calls; bench loops must not reallocate.
thread_local std::vector<float> g_im2col;
thread_local std::vector<float> g_padbuf;

// Rows = icg*kh*kw, cols = oh*ow, for group channel range [c0, c0+icg).
void im2col(const Tensor& x, int ni, int c0, int icg, const ConvParams& p,
            int oh, int ow, float* col) {
    int px = oh * ow;
    for (int ci = 0; ci < icg; ++ci) {
        const float* src = x.chan(ni, c0 + ci);
        for (int ky = 0; ky < p.kh; ++ky) {
            for (int kx = 0; kx < p.kw; ++kx) {
                float* row =
                    col + (static_cast<size_t>(ci) * p.kh * p.kw +
                           static_cast<size_t>(ky) * p.kw + kx) * px;
                for (int oy = 0; oy < oh; ++oy) {
                    int iy = oy * p.stride - p.padding + ky;
                    float* dst = row + static_cast<size_t>(oy) * ow;
                    if (iy < 0 || iy >= x.h) {
                        std::memset(dst, 0, sizeof(float) * ow);
                        continue;
                    }
                    int ix0 = -p.padding + kx;
                    const float* srow = src + static_cast<size_t>(iy) * x.w;
                    if (p.stride == 1) {
                        int lead = std::max(0, -ix0);
                        int valid =
                            std::min(ow, x.w - ix0) - lead;  // in-bounds run
                        if (lead > 0) std::memset(dst, 0, sizeof(float) * lead);
                        if (valid > 0)
                            std::memcpy(dst + lead, srow + ix0 + lead,
                                        sizeof(float) * valid);
                        int tail = ow - lead - std::max(0, valid);
                        if (tail > 0)
                            std::memset(dst + ow - tail, 0,
                                        sizeof(float) * tail);
                    } else {
                        for (int ox = 0; ox < ow; ++ox) {
                            int ix = ix0 + ox * p.stride;
                            dst[ox] = (ix >= 0 && ix < x.w) ? srow[ix] : 0.f;
                        }
                    }
                }
            }
        }
    }
}

void depthwise_conv(const Tensor& x, const ConvParams& p, Tensor& y, int oh,
                    int ow) {
    int ph = x.h + 2 * p.padding, pw = x.w + 2 * p.padding;
    g_padbuf.resize(static_cast<size_t>(ph) * pw);
    float* pad = g_padbuf.data();
    for (int ni = 0; ni < x.n; ++ni) {
        for (int ci = 0; ci < x.c; ++ci) {
            std::memset(pad, 0, sizeof(float) * ph * pw);
            const float* src = x.chan(ni, ci);
            for (int iy = 0; iy < x.h; ++iy)
                std::memcpy(pad + static_cast<size_t>(iy + p.padding) * pw +
                                p.padding,
                            src + static_cast<size_t>(iy) * x.w,
                            sizeof(float) * x.w);
            const float* wts =
                p.weights.data() + static_cast<size_t>(ci) * p.kh * p.kw;
            float b = p.has_bias() ? p.bias[ci] : 0.f;
            float* dst = y.chan(ni, ci);
            for (int oy = 0; oy < oh; ++oy) {
                float* drow = dst + static_cast<size_t>(oy) * ow;
                const float* pbase =
                    pad + static_cast<size_t>(oy * p.stride) * pw;
                int ox = 0;
#ifdef DETBENCH_HAVE_AVX2
                if (p.stride == 1) {
                    // Accumulate the whole tap stencil in registers; one
                    // store per 8 outputs instead of one pass per tap.
                    for (; ox + 8 <= ow; ox += 8) {
                        __m256 acc = _mm256_set1_ps(b);
                        const float* prow = pbase + ox;
                        for (int ky = 0; ky < p.kh; ++ky, prow += pw)
                            for (int kx = 0; kx < p.kw; ++kx)
                                acc = _mm256_fmadd_ps(
                                    _mm256_set1_ps(wts[ky * p.kw + kx]),
                                    _mm256_loadu_ps(prow + kx), acc);
                        _mm256_storeu_ps(drow + ox, acc);
                    }
                }
#endif
                for (; ox < ow; ++ox) {
                    float acc = b;
                    const float* prow = pbase + ox * p.stride;
                    for (int ky = 0; ky < p.kh; ++ky, prow += pw)
                        for (int kx = 0; kx < p.kw; ++kx)
                            acc += wts[ky * p.kw + kx] * prow[kx];
                    drow[ox] = acc;
                }
            }
        }
    }
}

}  // namespace

Tensor conv2d(const Tensor& x, const ConvParams& p) {
    check_conv_input(x, p);
    int oh = conv_out_dim(x.h, p.kh, p.stride, p.padding);
    int ow = conv_out_dim(x.w, p.kw, p.stride, p.padding);
    Tensor y(x.n, p.out_channels, oh, ow);
    if (p.groups == p.in_channels && p.out_channels == p.in_channels) {
        depthwise_conv(x, p, y, oh, ow);
        return y;
    }
    int px = oh * ow;
    int icg = p.in_channels / p.groups;
    int ocg = p.out_channels / p.groups;
    int K = icg * p.kh * p.kw;
    bool pointwise =
        p.kh == 1 && p.kw == 1 && p.stride == 1 && p.padding == 0;
    if (!pointwise) g_im2col.resize(static_cast<size_t>(K) * px);
    for (int ni = 0; ni < x.n; ++ni) {
        for (int g = 0; g < p.groups; ++g) {
            const float* B;
            if (pointwise) {
                B = x.chan(ni, g * icg);  // already (icg x px)
            } else {
                im2col(x, ni, g * icg, icg, p, oh, ow, g_im2col.data());
                B = g_im2col.data();
            }
            float* C = y.chan(ni, g * ocg);
            for (int oc = 0; oc < ocg; ++oc) {
                float b = p.has_bias() ? p.bias[g * ocg + oc] : 0.f;
                float* crow = C + static_cast<size_t>(oc) * px;
                for (int j = 0; j < px; ++j) crow[j] = b;
            }
            const float* A =
                p.weights.data() + static_cast<size_t>(g) * ocg * K;
            gemm_f32(ocg, px, K, A, B, C);
        }
    }
    return y;
}

Tensor conv2d_naive(const Tensor& x, const ConvParams& p) {
    check_conv_input(x, p);
    int oh = conv_out_dim(x.h, p.kh, p.stride, p.padding);
    int ow = conv_out_dim(x.w, p.kw, p.stride, p.padding);
    Tensor y(x.n, p.out_channels, oh, ow);
    int icg = p.in_channels / p.groups;
    int ocg = p.out_channels / p.groups;
    for (int ni = 0; ni < x.n; ++ni)
        for (int oc = 0; oc < p.out_channels; ++oc) {
            int g = oc / ocg;
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    float acc = p.has_bias() ? p.bias[oc] : 0.f;
                    for (int ci = 0; ci < icg; ++ci)
                        for (int ky = 0; ky < p.kh; ++ky)
                            for (int kx = 0; kx < p.kw; ++kx) {
                                int iy = oy * p.stride - p.padding + ky;
                                int ix = ox * p.stride - p.padding + kx;
                                if (iy < 0 || iy >= x.h || ix < 0 ||
                                    ix >= x.w)
                                    continue;
                                float wv = p.weights
                                    [((static_cast<size_t>(oc) * icg + ci) *
                                          p.kh +
                                      ky) *
                                         p.kw +
                                     kx];
                                acc += wv * x.at(ni, g * icg + ci, iy, ix);
                            }
                    y.at(ni, oc, oy, ox) = acc;
                }
        }
    return y;
}

namespace {
inline float apply_act(float v, Act kind) {
    switch (kind) {
        case Act::SiLU:
            return v / (1.f + std::exp(-v));
        case Act::HardSwish: {
            float r = v + 3.f;
            r = r < 0.f ? 0.f : (r > 6.f ? 6.f : r);
            return v * r / 6.f;
        }
        case Act::LeakyReLU:
            return v > 0.f ? v : 0.1f * v;
        case Act::Identity:
            return v;
        case Act::Relu:
            return v > 0.f ? v : 0.f;
        case Act::HardSigmoid: {
            float r = v + 3.f;
            r = r < 0.f ? 0.f : (r > 6.f ? 6.f : r);
            return r / 6.f;
        }
    }
    return v;
}
#ifdef DETBENCH_HAVE_AVX2
// Cephes-style expf: range-reduce by log2(e), degree-6 polynomial, scale by
// 2^n through the exponent bits. ~1 ulp over the clamped range, which is far
// inside the tolerance of every consumer (the conv oracle never goes through
// here).
inline __m256 exp256_ps(__m256 x) {
    x = _mm256_min_ps(_mm256_max_ps(x, _mm256_set1_ps(-87.336544f)),
                      _mm256_set1_ps(88.376262f));
    __m256 n = _mm256_round_ps(
        _mm256_mul_ps(x, _mm256_set1_ps(1.44269504088896341f)),
        _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256 r = _mm256_fnmadd_ps(n, _mm256_set1_ps(0.693359375f), x);
    r = _mm256_fnmadd_ps(n, _mm256_set1_ps(-2.12194440e-4f), r);
    __m256 p = _mm256_set1_ps(1.9875691500e-4f);
    p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(1.3981999507e-3f));
    p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(8.3334519073e-3f));
    p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(4.1665795894e-2f));
    p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(1.6666665459e-1f));
    p = _mm256_fmadd_ps(p, r, _mm256_set1_ps(5.0000001201e-1f));
    p = _mm256_fmadd_ps(_mm256_mul_ps(p, r), r, _mm256_add_ps(r, _mm256_set1_ps(1.f)));
    __m256i bits = _mm256_slli_epi32(
        _mm256_add_epi32(_mm256_cvtps_epi32(n), _mm256_set1_epi32(127)), 23);
    return _mm256_mul_ps(p, _mm256_castsi256_ps(bits));
}

void activation_avx2(float* v, size_t count, Act kind) {
    const __m256 zero = _mm256_setzero_ps();
    const __m256 three = _mm256_set1_ps(3.f);
    const __m256 six = _mm256_set1_ps(6.f);
    const __m256 one = _mm256_set1_ps(1.f);
    size_t i = 0, n8 = count - count % 8;
    switch (kind) {
        case Act::SiLU:
            for (; i < n8; i += 8) {
                __m256 x = _mm256_loadu_ps(v + i);
                __m256 den =
                    _mm256_add_ps(one, exp256_ps(_mm256_sub_ps(zero, x)));
                _mm256_storeu_ps(v + i, _mm256_div_ps(x, den));
            }
            break;
        case Act::HardSwish:
            for (; i < n8; i += 8) {
                __m256 x = _mm256_loadu_ps(v + i);
                __m256 r = _mm256_min_ps(
                    _mm256_max_ps(_mm256_add_ps(x, three), zero), six);
                _mm256_storeu_ps(v + i,
                                 _mm256_div_ps(_mm256_mul_ps(x, r), six));
            }
            break;
        case Act::HardSigmoid:
            for (; i < n8; i += 8) {
                __m256 x = _mm256_loadu_ps(v + i);
                __m256 r = _mm256_min_ps(
                    _mm256_max_ps(_mm256_add_ps(x, three), zero), six);
                _mm256_storeu_ps(v + i, _mm256_div_ps(r, six));
            }
            break;
        case Act::Relu:
            for (; i < n8; i += 8)
                _mm256_storeu_ps(v + i,
                                 _mm256_max_ps(_mm256_loadu_ps(v + i), zero));
            break;
        case Act::LeakyReLU: {
            const __m256 slope = _mm256_set1_ps(0.1f);
            for (; i < n8; i += 8) {
                __m256 x = _mm256_loadu_ps(v + i);
                _mm256_storeu_ps(
                    v + i, _mm256_max_ps(x, _mm256_mul_ps(x, slope)));
            }
            break;
        }
        case Act::Identity:
            return;
    }
    for (; i < count; ++i) v[i] = apply_act(v[i], kind);
}
#endif
}  // namespace

void activation_inplace(Tensor& x, Act kind) {
    if (kind == Act::Identity) return;
#ifdef DETBENCH_HAVE_AVX2
    activation_avx2(x.data.data(), x.data.size(), kind);
#else
    for (float& v : x.data) v = apply_act(v, kind);
#endif
}

Tensor activation(const Tensor& x, Act kind) {
    Tensor y = x;
    activation_inplace(y, kind);
    return y;
}

Tensor max_pool(const Tensor& x, int kernel, int stride, int pad) {
    int oh = conv_out_dim(x.h, kernel, stride, pad);
    int ow = conv_out_dim(x.w, kernel, stride, pad);
    if (oh <= 0 || ow <= 0)
        throw std::invalid_argument("max_pool: output would be empty for " +
                                    x.shape_str());
    Tensor y(x.n, x.c, oh, ow);
    for (int ni = 0; ni < x.n; ++ni)
        for (int ci = 0; ci < x.c; ++ci) {
            const float* src = x.chan(ni, ci);
            float* dst = y.chan(ni, ci);
            for (int oy = 0; oy < oh; ++oy) {
                int y0 = oy * stride - pad;
                int ky0 = std::max(0, -y0), ky1 = std::min(kernel, x.h - y0);
                for (int ox = 0; ox < ow; ++ox) {
                    int x0 = ox * stride - pad;
                    int kx0 = std::max(0, -x0),
                        kx1 = std::min(kernel, x.w - x0);
                    float m = -std::numeric_limits<float>::infinity();
                    for (int ky = ky0; ky < ky1; ++ky) {
                        const float* row =
                            src + static_cast<size_t>(y0 + ky) * x.w + x0;
                        for (int kx = kx0; kx < kx1; ++kx)
                            m = std::max(m, row[kx]);
                    }
                    dst[static_cast<size_t>(oy) * ow + ox] = m;
                }
            }
        }
    return y;
}

Tensor max_pool_naive(const Tensor& x, int kernel, int stride, int pad) {
    int oh = conv_out_dim(x.h, kernel, stride, pad);
    int ow = conv_out_dim(x.w, kernel, stride, pad);
    Tensor y(x.n, x.c, oh, ow);
    for (int ni = 0; ni < x.n; ++ni)
        for (int ci = 0; ci < x.c; ++ci)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    float m = -std::numeric_limits<float>::infinity();
                    for (int ky = 0; ky < kernel; ++ky)
                        for (int kx = 0; kx < kernel; ++kx) {
                            int iy = oy * stride - pad + ky;
                            int ix = ox * stride - pad + kx;
                            if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w)
                                continue;
                            m = std::max(m, x.at(ni, ci, iy, ix));
                        }
                    y.at(ni, ci, oy, ox) = m;
                }
    return y;
}

Tensor upsample_nearest2x(const Tensor& x) {
    Tensor y(x.n, x.c, x.h * 2, x.w * 2);
    for (int ni = 0; ni < x.n; ++ni)
        for (int ci = 0; ci < x.c; ++ci) {
            const float* src = x.chan(ni, ci);
            float* dst = y.chan(ni, ci);
            for (int iy = 0; iy < x.h; ++iy) {
                const float* srow = src + static_cast<size_t>(iy) * x.w;
                float* d0 = dst + static_cast<size_t>(2 * iy) * y.w;
                for (int ix = 0; ix < x.w; ++ix) {
                    d0[2 * ix] = srow[ix];
                    d0[2 * ix + 1] = srow[ix];
                }
                std::memcpy(d0 + y.w, d0, sizeof(float) * y.w);
            }
        }
    return y;
}

Tensor concat_channels(const std::vector<const Tensor*>& xs) {
    if (xs.empty())
        throw std::invalid_argument("concat_channels: no inputs given");
    int n = xs[0]->n, h = xs[0]->h, w = xs[0]->w, c = 0;
    for (const Tensor* t : xs) {
        if (t->n != n || t->h != h || t->w != w)
            throw std::invalid_argument(
                "concat_channels: spatial/batch mismatch: " + t->shape_str() +
                " vs " + xs[0]->shape_str());
        c += t->c;
    }
    Tensor y(n, c, h, w);
    size_t plane = static_cast<size_t>(h) * w;
    for (int ni = 0; ni < n; ++ni) {
        int co = 0;
        for (const Tensor* t : xs) {
            std::memcpy(y.chan(ni, co), t->chan(ni, 0),
                        sizeof(float) * plane * t->c);
            co += t->c;
        }
    }
    return y;
}

Tensor concat_channels(const std::vector<Tensor>& xs) {
    std::vector<const Tensor*> ptrs;
    ptrs.reserve(xs.size());
    for (const Tensor& t : xs) ptrs.push_back(&t);
    return concat_channels(ptrs);
}

Tensor add_elementwise(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("add_elementwise: shape mismatch: " +
                                    a.shape_str() + " vs " + b.shape_str());
    Tensor y = a;
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += b.data[i];
    return y;
}

ConvParams fold_batchnorm(const ConvParams& conv, const BatchNormParams& bn) {
    if (bn.channels() != conv.out_channels)
        throw std::invalid_argument(
            "fold_batchnorm: bn has " + std::to_string(bn.channels()) +
            " channels, conv outputs " + std::to_string(conv.out_channels));
    ConvParams out = conv;
    out.bias.assign(conv.out_channels, 0.f);
    size_t per_oc = conv.weight_count() / conv.out_channels;
    for (int oc = 0; oc < conv.out_channels; ++oc) {
        float scale = bn.gamma[oc] /
                      std::sqrt(bn.running_var[oc] + bn.epsilon);
        float* w = out.weights.data() + static_cast<size_t>(oc) * per_oc;
        for (size_t i = 0; i < per_oc; ++i) w[i] *= scale;
        float b0 = conv.has_bias() ? conv.bias[oc] : 0.f;
        out.bias[oc] = bn.beta[oc] + (b0 - bn.running_mean[oc]) * scale;
    }
    return out;
}

Tensor space_to_depth2x(const Tensor& x) {
    if (x.h % 2 != 0 || x.w % 2 != 0)
        throw std::invalid_argument(
            "space_to_depth2x: spatial dims must be even, got " +
            x.shape_str());
    Tensor y(x.n, x.c * 4, x.h / 2, x.w / 2);
    // Phase order matches the usual focus-stem slicing:
    // (y0,x0), (y1,x0), (y0,x1), (y1,x1).
    const int phases[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
    for (int ni = 0; ni < x.n; ++ni)
        for (int ph = 0; ph < 4; ++ph)
            for (int ci = 0; ci < x.c; ++ci) {
                const float* src = x.chan(ni, ci);
                float* dst = y.chan(ni, ph * x.c + ci);
                int oy0 = phases[ph][0], ox0 = phases[ph][1];
                for (int oy = 0; oy < y.h; ++oy) {
                    const float* srow =
                        src + static_cast<size_t>(2 * oy + oy0) * x.w + ox0;
                    float* drow = dst + static_cast<size_t>(oy) * y.w;
                    for (int ox = 0; ox < y.w; ++ox) drow[ox] = srow[2 * ox];
                }
            }
    return y;
}

Tensor global_avg_pool(const Tensor& x) {
    Tensor y(x.n, x.c, 1, 1);
    double inv = 1.0 / (static_cast<double>(x.h) * x.w);
    for (int ni = 0; ni < x.n; ++ni)
        for (int ci = 0; ci < x.c; ++ci) {
            const float* src = x.chan(ni, ci);
            double s = 0.0;
            size_t px = static_cast<size_t>(x.h) * x.w;
            for (size_t i = 0; i < px; ++i) s += src[i];
            y.at(ni, ci, 0, 0) = static_cast<float>(s * inv);
        }
    return y;
}

Tensor mul_channelwise(const Tensor& x, const Tensor& gate) {
    if (gate.n != x.n || gate.c != x.c || gate.h != 1 || gate.w != 1)
        throw std::invalid_argument(
            "mul_channelwise: gate must be (n, c, 1, 1) matching input, got " +
            gate.shape_str() + " for input " + x.shape_str());
    Tensor y = x;
    size_t plane = static_cast<size_t>(x.h) * x.w;
    for (int ni = 0; ni < x.n; ++ni)
        for (int ci = 0; ci < x.c; ++ci) {
            float g = gate.at(ni, ci, 0, 0);
            float* dst = y.chan(ni, ci);
            for (size_t i = 0; i < plane; ++i) dst[i] *= g;
        }
    return y;
}

}  // namespace detbench
