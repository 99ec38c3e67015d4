#pragma once
#include <cstddef>
#include <string>
#include <vector>

namespace detbench {

// Dense rank-4 array, row-major (n, c, h, w), float32. The only runtime
// value type that flows through graphs.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<float> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, float fill = 0.f)
        : n(n_), c(c_), h(h_), w(w_),
          data(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {}

    size_t size() const { return data.size(); }
    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    float& at(int ni, int ci, int yi, int xi) {
        return data[((static_cast<size_t>(ni) * c + ci) * h + yi) * w + xi];
    }
    float at(int ni, int ci, int yi, int xi) const {
        return data[((static_cast<size_t>(ni) * c + ci) * h + yi) * w + xi];
    }
    float* chan(int ni, int ci) {
        return data.data() + (static_cast<size_t>(ni) * c + ci) * h * w;
    }
    const float* chan(int ni, int ci) const {
        return data.data() + (static_cast<size_t>(ni) * c + ci) * h * w;
    }
    std::string shape_str() const;
};

struct ConvParams {
    int in_channels = 0, out_channels = 0;
    int kh = 1, kw = 1;
    int stride = 1, padding = 0, groups = 1;
    std::vector<float> weights;  // [oc][ic/g][kh][kw]
    std::vector<float> bias;     // empty means no bias

    size_t weight_count() const {
        return static_cast<size_t>(out_channels) * (in_channels / groups) *
               kh * kw;
    }
    bool has_bias() const { return !bias.empty(); }
};

struct BatchNormParams {
    std::vector<float> gamma, beta, running_mean, running_var;
    float epsilon = 1e-5f;
    int channels() const { return static_cast<int>(gamma.size()); }
};

enum class Act { SiLU, HardSwish, LeakyReLU, Identity, Relu, HardSigmoid };

const char* act_name(Act a);
Act act_from_name(const std::string& s);

// Output spatial size for one axis.
inline int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// Fast path: im2col + blocked GEMM (1x1 stride-1 convs skip im2col,
// depthwise convs run direct loops). Bit-identical across runs.
Tensor conv2d(const Tensor& x, const ConvParams& p);
// Quadruple-loop reference; the test oracle for conv2d.
Tensor conv2d_naive(const Tensor& x, const ConvParams& p);

Tensor activation(const Tensor& x, Act kind);
void activation_inplace(Tensor& x, Act kind);

Tensor max_pool(const Tensor& x, int kernel, int stride, int pad);
Tensor max_pool_naive(const Tensor& x, int kernel, int stride, int pad);

Tensor upsample_nearest2x(const Tensor& x);
Tensor concat_channels(const std::vector<const Tensor*>& xs);
Tensor concat_channels(const std::vector<Tensor>& xs);
Tensor add_elementwise(const Tensor& a, const Tensor& b);

// Returns a conv whose forward equals bn(conv(x)) within 1e-4 absolute.
ConvParams fold_batchnorm(const ConvParams& conv, const BatchNormParams& bn);

// (n, c, h, w) -> (n, 4c, h/2, w/2); phase order: (y0x0, y1x0, y0x1, y1x1).
Tensor space_to_depth2x(const Tensor& x);

// Support ops for squeeze-excite gates.
Tensor global_avg_pool(const Tensor& x);                 // -> (n, c, 1, 1)
Tensor mul_channelwise(const Tensor& x, const Tensor& gate);  // gate (n,c,1,1)

}  // namespace detbench
