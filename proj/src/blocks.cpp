#include "detbench/blocks.hpp"

#include <cmath>
#include <stdexcept>

namespace detbench {

ConvParams GraphBuilder::make_conv(int in_c, int out_c, int k, int stride,
                                   int groups, bool bias) {
    ConvParams p;
    p.in_channels = in_c;
    p.out_channels = out_c;
    p.kh = p.kw = k;
    p.stride = stride;
    p.padding = (k - 1) / 2;
    p.groups = groups;
    p.weights.resize(p.weight_count());
    float fan_in = static_cast<float>(k) * k * (in_c / groups);
    std::normal_distribution<float> dist(0.f, std::sqrt(2.f / fan_in));
    for (float& w : p.weights) w = dist(rng);
    if (bias) {
        std::normal_distribution<float> bdist(0.f, 0.05f);
        p.bias.resize(out_c);
        for (float& b : p.bias) b = bdist(rng);
    }
    return p;
}

BatchNormParams GraphBuilder::make_bn(int channels) {
    BatchNormParams bn;
    bn.gamma.resize(channels);
    bn.beta.resize(channels);
    bn.running_mean.resize(channels);
    bn.running_var.resize(channels);
    std::normal_distribution<float> g(1.f, 0.1f), z(0.f, 0.1f);
    std::uniform_real_distribution<float> v(0.8f, 1.25f);
    for (int i = 0; i < channels; ++i) {
        bn.gamma[i] = g(rng);
        bn.beta[i] = z(rng);
        bn.running_mean[i] = z(rng);
        bn.running_var[i] = v(rng);
    }
    return bn;
}

int GraphBuilder::input(int channels, int size) {
    g.input_channels = channels;
    g.input_size = size;
    Node n;
    n.name = "input";
    n.kind = OpKind::Input;
    n.component = comp;
    return g.add_node(std::move(n));
}

int GraphBuilder::stub_input(int channels, int h, int w,
                             const std::string& name) {
    Node n;
    n.name = name;
    n.kind = OpKind::Input;
    n.component = comp;
    n.out_c = channels;
    n.out_h = h;
    n.out_w = w;
    return g.add_node(std::move(n));
}

int GraphBuilder::conv_bn_act(int in, int out_c, int k, int stride, Act a,
                              const std::string& name, int groups) {
    Node conv;
    conv.name = name + "/conv";
    conv.kind = OpKind::Conv;
    conv.component = comp;
    conv.inputs = {in};
    conv.conv = make_conv(channels_of(in), out_c, k, stride, groups, false);
    int ci = g.add_node(std::move(conv));

    Node bn;
    bn.name = name + "/bn";
    bn.kind = OpKind::BatchNorm;
    bn.component = comp;
    bn.inputs = {ci};
    bn.bn = make_bn(out_c);
    int bi = g.add_node(std::move(bn));
    if (a == Act::Identity) return bi;
    return act(bi, a, name + "/act");
}

int GraphBuilder::conv_bias(int in, int out_c, int k,
                            const std::string& name) {
    Node conv;
    conv.name = name;
    conv.kind = OpKind::Conv;
    conv.component = comp;
    conv.inputs = {in};
    conv.conv = make_conv(channels_of(in), out_c, k, 1, 1, true);
    return g.add_node(std::move(conv));
}

int GraphBuilder::act(int in, Act a, const std::string& name) {
    Node n;
    n.name = name;
    n.kind = OpKind::Activation;
    n.component = comp;
    n.inputs = {in};
    n.act = a;
    return g.add_node(std::move(n));
}

int GraphBuilder::maxpool(int in, int k, int stride, int pad,
                          const std::string& name) {
    Node n;
    n.name = name;
    n.kind = OpKind::MaxPool;
    n.component = comp;
    n.inputs = {in};
    n.pool_k = k;
    n.pool_s = stride;
    n.pool_p = pad;
    return g.add_node(std::move(n));
}

int GraphBuilder::upsample(int in, const std::string& name) {
    Node n;
    n.name = name;
    n.kind = OpKind::Upsample2x;
    n.component = comp;
    n.inputs = {in};
    return g.add_node(std::move(n));
}

int GraphBuilder::concat(const std::vector<int>& ins,
                         const std::string& name) {
    Node n;
    n.name = name;
    n.kind = OpKind::ConcatChannels;
    n.component = comp;
    n.inputs = ins;
    return g.add_node(std::move(n));
}

int GraphBuilder::add(int a, int b, const std::string& name) {
    Node n;
    n.name = name;
    n.kind = OpKind::Add;
    n.component = comp;
    n.inputs = {a, b};
    return g.add_node(std::move(n));
}

int GraphBuilder::space_to_depth(int in, const std::string& name) {
    Node n;
    n.name = name;
    n.kind = OpKind::SpaceToDepth2x;
    n.component = comp;
    n.inputs = {in};
    const Node& src = g.nodes[in];
    n.out_c = src.out_c * 4;
    n.out_h = src.out_h / 2;
    n.out_w = src.out_w / 2;
    return g.add_node(std::move(n));
}

int GraphBuilder::global_pool(int in, const std::string& name) {
    Node n;
    n.name = name;
    n.kind = OpKind::GlobalAvgPool;
    n.component = comp;
    n.inputs = {in};
    return g.add_node(std::move(n));
}

int GraphBuilder::mul(int x, int gate, const std::string& name) {
    Node n;
    n.name = name;
    n.kind = OpKind::MulChannelwise;
    n.component = comp;
    n.inputs = {x, gate};
    return g.add_node(std::move(n));
}

namespace {

// Squeeze width derives from base_c; the gated tensor may be wider (expanded
// bottlenecks gate their hidden channels).
int emit_se(GraphBuilder& b, int input, int base_c, const std::string& prefix) {
    int ch = b.channels_of(input);
    int cr = std::max(1, base_c / 4);
    int gap = b.global_pool(input, prefix + "/se/pool");
    int fc1 = b.conv_bias(gap, cr, 1, prefix + "/se/fc1");
    int a1 = b.act(fc1, Act::Relu, prefix + "/se/relu");
    int fc2 = b.conv_bias(a1, ch, 1, prefix + "/se/fc2");
    int gate = b.act(fc2, Act::HardSigmoid, prefix + "/se/gate");
    return b.mul(input, gate, prefix + "/se/scale");
}

int emit_darknet_bottleneck(GraphBuilder& b, int input, int out_c, Act a,
                            bool residual, const std::string& prefix) {
    int in_c = b.channels_of(input);
    int h = b.conv_bn_act(input, out_c, 1, 1, a, prefix + "/conv1");
    int y = b.conv_bn_act(h, out_c, 3, 1, a, prefix + "/conv2");
    if (residual && in_c == out_c) y = b.add(y, input, prefix + "/add");
    return y;
}

int emit_csp(GraphBuilder& b, int input, int out_c, int n, Act a,
             bool inner_residual, const std::string& prefix) {
    int h = out_c / 2;
    int x1 = b.conv_bn_act(input, h, 1, 1, a, prefix + "/conv1");
    int x2 = b.conv_bn_act(input, h, 1, 1, a, prefix + "/conv2");
    int y = x1;
    for (int i = 0; i < n; ++i)
        y = emit_darknet_bottleneck(b, y, h, a, inner_residual,
                                    prefix + "/m" + std::to_string(i));
    int cat = b.concat({y, x2}, prefix + "/cat");
    return b.conv_bn_act(cat, out_c, 1, 1, a, prefix + "/conv3");
}

int round_ratio(double ratio, int c) {
    return static_cast<int>(std::lround(ratio * c));
}

}  // namespace

int emit_block(GraphBuilder& b, const BlockSpec& s, int input,
               const std::string& prefix) {
    int in_c = b.channels_of(input);
    if (s.in_channels != 0 && s.in_channels != in_c)
        throw std::invalid_argument("block '" + prefix + "' (" + s.kind +
                                    ") declared for " +
                                    std::to_string(s.in_channels) +
                                    " input channels but is fed " +
                                    std::to_string(in_c));
    int out_c = s.out_channels != 0 ? s.out_channels : in_c;
    Act a = s.activation;
    bool can_res = s.use_residual && s.stride == 1 && in_c == out_c;

    if (s.kind == "ConvBnAct")
        return b.conv_bn_act(input, out_c, s.kernel, s.stride, a, prefix);

    if (s.kind == "DarknetBottleneck")
        return emit_darknet_bottleneck(b, input, out_c, a, can_res, prefix);

    if (s.kind == "CspLayer")
        return emit_csp(b, input, out_c, s.depth, a, s.use_residual, prefix);

    if (s.kind == "MbConv") {
        int h = round_ratio(s.expand_ratio, in_c);
        int x = input;
        if (h != in_c) x = b.conv_bn_act(x, h, 1, 1, a, prefix + "/expand");
        x = b.conv_bn_act(x, h, s.kernel, s.stride, a, prefix + "/dw", h);
        if (s.use_se) x = emit_se(b, x, in_c, prefix);
        x = b.conv_bn_act(x, out_c, 1, 1, Act::Identity, prefix + "/project");
        if (can_res) x = b.add(x, input, prefix + "/add");
        return x;
    }

    if (s.kind == "FusedMbConv") {
        int h = round_ratio(s.expand_ratio, in_c);
        int x;
        if (h == in_c) {
            x = b.conv_bn_act(input, out_c, 3, s.stride, a, prefix + "/fused");
        } else {
            x = b.conv_bn_act(input, h, 3, s.stride, a, prefix + "/fused");
            x = b.conv_bn_act(x, out_c, 1, 1, Act::Identity,
                              prefix + "/project");
        }
        if (can_res) x = b.add(x, input, prefix + "/add");
        return x;
    }

    if (s.kind == "Sandglass") {
        int h = std::max(8, round_ratio(s.reduce_ratio, out_c));
        int x = b.conv_bn_act(input, in_c, 3, 1, a, prefix + "/dw1", in_c);
        x = b.conv_bn_act(x, h, 1, 1, Act::Identity, prefix + "/reduce");
        x = b.conv_bn_act(x, out_c, 1, 1, a, prefix + "/expand");
        x = b.conv_bn_act(x, out_c, 3, s.stride, Act::Identity,
                          prefix + "/dw2", out_c);
        if (can_res) x = b.add(x, input, prefix + "/add");
        return x;
    }

    if (s.kind == "RegNetX") {
        int w = out_c / std::max(1, s.bottleneck_ratio);
        int groups = std::max(1, w / s.group_width);
        int x = b.conv_bn_act(input, w, 1, 1, a, prefix + "/reduce");
        x = b.conv_bn_act(x, w, 3, s.stride, a, prefix + "/grouped", groups);
        x = b.conv_bn_act(x, out_c, 1, 1, Act::Identity, prefix + "/expand");
        if (can_res) x = b.add(x, input, prefix + "/add");
        return x;
    }

    if (s.kind == "DsConv") {
        int x = b.conv_bn_act(input, in_c, s.kernel, s.stride, a,
                              prefix + "/dw", in_c);
        if (s.use_se) x = emit_se(b, x, in_c, prefix);
        return b.conv_bn_act(x, out_c, 1, 1, a, prefix + "/pw");
    }

    if (s.kind == "BsConv") {
        int x = b.conv_bn_act(input, out_c, 1, 1, a, prefix + "/pw");
        x = b.conv_bn_act(x, out_c, s.kernel, s.stride, a, prefix + "/dw",
                          out_c);
        if (s.use_se) x = emit_se(b, x, out_c, prefix);
        return x;
    }

    if (s.kind == "Focus") {
        int x = b.space_to_depth(input, prefix + "/s2d");
        return b.conv_bn_act(x, out_c, s.kernel, 1, a, prefix + "/conv");
    }

    if (s.kind == "SppBottleneck") {
        int h = in_c / std::max(1, s.spp_hidden_div);
        int x = b.conv_bn_act(input, h, 1, 1, a, prefix + "/reduce");
        int p5 = b.maxpool(x, 5, 1, 2, prefix + "/pool5");
        int p9 = b.maxpool(x, 9, 1, 4, prefix + "/pool9");
        int p13 = b.maxpool(x, 13, 1, 6, prefix + "/pool13");
        int cat = b.concat({x, p5, p9, p13}, prefix + "/cat");
        return b.conv_bn_act(cat, out_c, 1, 1, a, prefix + "/fuse");
    }

    if (s.kind == "SqueezeExcite") return emit_se(b, input, in_c, prefix);

    throw std::invalid_argument("block '" + prefix + "': unknown kind '" +
                                s.kind + "'");
}

Block build_block(const BlockSpec& spec, int input_hw) {
    if (spec.in_channels <= 0)
        throw std::invalid_argument("build_block: in_channels must be set");
    Block blk;
    blk.spec = spec;
    GraphBuilder b;
    b.input(spec.in_channels, input_hw);
    int out = emit_block(b, spec, 0, spec.kind);
    b.g.taps["out"] = out;
    b.g.model_name = spec.kind;
    blk.graph = std::move(b.g);
    return blk;
}

Tensor Block::forward(const Tensor& x) const {
    std::vector<Tensor> out;
    graph.forward(x, out);
    return out[graph.taps.at("out")];
}

}  // namespace detbench
