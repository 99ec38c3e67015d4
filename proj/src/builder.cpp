#include "detbench/builder.hpp"

#include <cmath>
#include <stdexcept>

namespace detbench {

namespace {

const int kBaseChannels[5] = {64, 128, 256, 512, 1024};
const int kBaseDepths[4] = {3, 9, 9, 3};

struct FamilyDefaults {
    std::string stem;
    int spp_div;
    Act act;
    std::vector<int> dwk;
    std::vector<int> se;
};

FamilyDefaults family_defaults(const std::string& family) {
    if (family == "CspDarknet")
        return {"focus", 2, Act::SiLU, {3, 3, 3, 3}, {0, 0, 0, 0}};
    if (family == "PpLcNet")
        return {"conv", 0, Act::HardSwish, {3, 3, 5, 5}, {0, 0, 0, 1}};
    throw std::invalid_argument("backbone family '" + family +
                                "' unknown (CspDarknet | PpLcNet)");
}

std::vector<int> resolve4(const std::vector<int>& given,
                          const std::vector<int>& fallback,
                          const char* what) {
    if (given.empty()) return fallback;
    if (given.size() != 4)
        throw std::invalid_argument(std::string(what) +
                                    " must list exactly 4 stages");
    return given;
}

std::string stage_kind(const BackboneSpec& s, int stage) {
    if (s.main_op == "Mixed")
        return stage < s.fused_stage_count ? "FusedMbConv" : "MbConv";
    return s.main_op;
}

}  // namespace

TapSet build_backbone(GraphBuilder& b, const BackboneSpec& spec) {
    if (spec.width_multiplier <= 0 || spec.depth_multiplier <= 0)
        throw std::invalid_argument(
            "backbone: width/depth multipliers must be positive");
    if (spec.channel_multiplier != 1 && spec.channel_multiplier != 2)
        throw std::invalid_argument("backbone: channel_multiplier must be 1 or 2");
    FamilyDefaults fam = family_defaults(spec.family);
    Act act = fam.act;
    std::string stem = spec.stem.empty() ? fam.stem : spec.stem;
    int spp_div = spec.spp_hidden_div < 0 ? fam.spp_div : spec.spp_hidden_div;

    int ch[5];
    for (int i = 0; i < 5; ++i)
        ch[i] = static_cast<int>(
                    std::lround(kBaseChannels[i] * spec.width_multiplier)) *
                spec.channel_multiplier;

    std::vector<int> default_depths(4);
    for (int i = 0; i < 4; ++i)
        default_depths[i] = std::max(
            1, static_cast<int>(
                   std::ceil(kBaseDepths[i] * spec.depth_multiplier)));
    std::vector<int> depths =
        resolve4(spec.stage_depths, default_depths, "stage_depths");
    for (int d : depths)
        if (d < 1)
            throw std::invalid_argument("backbone: stage depths must be >= 1");
    std::vector<int> se = resolve4(spec.stage_se, fam.se, "stage_se");
    std::vector<int> dwk =
        resolve4(spec.stage_dw_kernels, fam.dwk, "stage_dw_kernels");

    // Stem to stride 2.
    int x;
    if (stem == "focus") {
        BlockSpec fs;
        fs.kind = "Focus";
        fs.in_channels = b.channels_of(0);
        fs.out_channels = ch[0];
        fs.activation = act;
        x = emit_block(b, fs, 0, "backbone/stem");
    } else if (stem == "conv") {
        x = b.conv_bn_act(0, ch[0], 3, 2, act, "backbone/stem");
    } else {
        throw std::invalid_argument("backbone stem '" + stem +
                                    "' unknown (focus | conv)");
    }

    TapSet taps;
    bool lcnet_layout = spec.family == "PpLcNet";
    for (int i = 0; i < 4; ++i) {
        std::string sp = "backbone/stage" + std::to_string(i + 1);
        std::string kind = stage_kind(spec, i);
        int body = depths[i];
        if (lcnet_layout && kind != "CspLayer") {
            // Stage led by a stride-2 block of the stage's own family.
            BlockSpec lead;
            lead.kind = kind;
            lead.in_channels = ch[i];
            lead.out_channels = ch[i + 1];
            lead.stride = 2;
            lead.kernel = dwk[i];
            lead.activation = act;
            lead.expand_ratio = spec.expand_ratio;
            lead.reduce_ratio = spec.reduce_ratio;
            lead.use_se = se[i] != 0;
            lead.group_width = spec.group_width;
            lead.bottleneck_ratio = spec.bottleneck_ratio;
            x = emit_block(b, lead, x, sp + "/down");
            body -= 1;
        } else {
            x = b.conv_bn_act(x, ch[i + 1], 3, 2, act, sp + "/down");
        }
        if (!lcnet_layout && i == 3 && spp_div > 0) {
            BlockSpec spp;
            spp.kind = "SppBottleneck";
            spp.in_channels = ch[4];
            spp.out_channels = ch[4];
            spp.spp_hidden_div = spp_div;
            spp.activation = act;
            x = emit_block(b, spp, x, sp + "/spp");
        }
        if (kind == "CspLayer") {
            BlockSpec csp;
            csp.kind = "CspLayer";
            csp.in_channels = ch[i + 1];
            csp.out_channels = ch[i + 1];
            csp.depth = depths[i];
            csp.activation = act;
            csp.use_residual = true;
            x = emit_block(b, csp, x, sp + "/csp");
        } else {
            bool body_se = se[i] != 0 && !spec.se_s2_only;
            for (int j = 0; j < body; ++j) {
                BlockSpec blk;
                blk.kind = kind;
                blk.in_channels = ch[i + 1];
                blk.out_channels = ch[i + 1];
                blk.stride = 1;
                blk.kernel = dwk[i];
                blk.activation = act;
                blk.expand_ratio = spec.expand_ratio;
                blk.reduce_ratio = spec.reduce_ratio;
                blk.use_se = lcnet_layout
                                 ? body_se
                                 : (se[i] != 0 && kind == "MbConv");
                blk.group_width = spec.group_width;
                blk.bottleneck_ratio = spec.bottleneck_ratio;
                x = emit_block(b, blk, x,
                               sp + "/block" + std::to_string(j + 1));
            }
        }
        if (lcnet_layout && i == 3 && spp_div > 0) {
            BlockSpec spp;
            spp.kind = "SppBottleneck";
            spp.in_channels = ch[4];
            spp.out_channels = ch[4];
            spp.spp_hidden_div = spp_div;
            spp.activation = act;
            x = emit_block(b, spp, x, sp + "/spp");
        }
        if (i == 1) taps.p3 = x;
        if (i == 2) taps.p4 = x;
        if (i == 3) taps.p5 = x;
    }
    return taps;
}

int sum_merge(GraphBuilder& b, int trunk, int skip, Act act,
              const std::string& name) {
    if (b.channels_of(skip) != b.channels_of(trunk))
        skip = b.conv_bn_act(skip, b.channels_of(trunk), 1, 1, act,
                             name + "/lateral");
    return b.add(trunk, skip, name + "/sum");
}

namespace {

int fpn_merge(GraphBuilder& b, const FpnSpec& s, Act act, int trunk, int skip,
              const std::string& name) {
    if (s.merge == "Sum") return sum_merge(b, trunk, skip, act, name);
    if (s.merge != "Concat")
        throw std::invalid_argument("fpn merge '" + s.merge +
                                    "' unknown (Concat | Sum)");
    return b.concat({trunk, skip}, name + "/cat");
}

int fpn_csp(GraphBuilder& b, const FpnSpec& s, Act act, int input, int out_c,
            const std::string& name) {
    BlockSpec csp;
    csp.kind = "CspLayer";
    csp.in_channels = b.channels_of(input);
    csp.out_channels = out_c;
    csp.depth = s.inner_depth;
    csp.activation = act;
    csp.use_residual = false;
    return emit_block(b, csp, input, name);
}

// LCPAN merge unit: a stack of depthwise-separable convs.
int lcpan_stack(GraphBuilder& b, const FpnSpec& s, int input,
                const std::string& name) {
    int x = input;
    for (int i = 0; i < std::max(1, s.inner_depth); ++i) {
        BlockSpec ds;
        ds.kind = "DsConv";
        ds.in_channels = b.channels_of(x);
        ds.out_channels = s.fpn_channels;
        ds.kernel = s.dw_kernel;
        ds.activation = Act::HardSwish;
        x = emit_block(b, ds, x, name + "/ds" + std::to_string(i + 1));
    }
    return x;
}

int lcpan_down(GraphBuilder& b, const FpnSpec& s, int input,
               const std::string& name) {
    BlockSpec ds;
    ds.kind = "DsConv";
    ds.in_channels = b.channels_of(input);
    ds.out_channels = s.fpn_channels;
    ds.stride = 2;
    ds.kernel = s.dw_kernel;
    ds.activation = Act::HardSwish;
    return emit_block(b, ds, input, name);
}

}  // namespace

TapSet build_fpn(GraphBuilder& b, const FpnSpec& spec, const TapSet& taps) {
    TapSet in = taps;
    Act act = spec.kind == "LCPAN" ? Act::HardSwish : Act::SiLU;
    if (spec.equalize_to > 0) {
        in.p3 = b.conv_bn_act(in.p3, spec.equalize_to, 1, 1, act, "fpn/eq_p3");
        in.p4 = b.conv_bn_act(in.p4, spec.equalize_to, 1, 1, act, "fpn/eq_p4");
        in.p5 = b.conv_bn_act(in.p5, spec.equalize_to, 1, 1, act, "fpn/eq_p5");
    }
    int c3 = b.channels_of(in.p3);
    int c4 = b.channels_of(in.p4);
    int c5 = b.channels_of(in.p5);
    TapSet out;

    if (spec.kind == "PAFPN") {
        int lat0 = b.conv_bn_act(in.p5, c4, 1, 1, act, "fpn/lateral0");
        int up0 = b.upsample(lat0, "fpn/up0");
        int m0 = fpn_merge(b, spec, act, up0, in.p4, "fpn/merge_td4");
        int td4 = fpn_csp(b, spec, act, m0, c4, "fpn/csp_td4");
        int red1 = b.conv_bn_act(td4, c3, 1, 1, act, "fpn/reduce1");
        int up1 = b.upsample(red1, "fpn/up1");
        int m1 = fpn_merge(b, spec, act, up1, in.p3, "fpn/merge_td3");
        out.p3 = fpn_csp(b, spec, act, m1, c3, "fpn/csp_p3");
        int bu2 = b.conv_bn_act(out.p3, c3, 3, 2, act, "fpn/down_p3");
        int m2 = fpn_merge(b, spec, act, bu2, red1, "fpn/merge_bu4");
        out.p4 = fpn_csp(b, spec, act, m2, c4, "fpn/csp_p4");
        int bu1 = b.conv_bn_act(out.p4, c4, 3, 2, act, "fpn/down_p4");
        int m3 = fpn_merge(b, spec, act, bu1, lat0, "fpn/merge_bu5");
        out.p5 = fpn_csp(b, spec, act, m3, c5, "fpn/csp_p5");
        return out;
    }

    if (spec.kind == "SepFPN") {
        int lat0 = b.conv_bn_act(in.p5, c4, 1, 1, act, "fpn/lateral0");
        int up0 = b.upsample(lat0, "fpn/up0");
        int m0 = fpn_merge(b, spec, act, up0, in.p4, "fpn/merge_td4");
        int td4 = fpn_csp(b, spec, act, m0, c4, "fpn/csp_td4");
        int red1 = b.conv_bn_act(td4, c3, 1, 1, act, "fpn/reduce1");
        int up1 = b.upsample(red1, "fpn/up1");
        int m1 = fpn_merge(b, spec, act, up1, in.p3, "fpn/merge_td3");
        int td3 = fpn_csp(b, spec, act, m1, c3, "fpn/csp_td3");
        std::vector<int> oc = spec.out_csp;
        oc.resize(3, 0);
        int x3 = oc[0] ? fpn_csp(b, spec, act, td3, c3, "fpn/csp_out3") : td3;
        out.p3 = sum_merge(b, x3, in.p3, act, "fpn/res_p3");
        int x4 = oc[1] ? fpn_csp(b, spec, act, td4, c4, "fpn/csp_out4") : td4;
        out.p4 = sum_merge(b, x4, in.p4, act, "fpn/res_p4");
        int x5 = oc[2] ? fpn_csp(b, spec, act, lat0, c5, "fpn/csp_out5") : lat0;
        out.p5 = sum_merge(b, x5, in.p5, act, "fpn/res_p5");
        return out;
    }

    if (spec.kind == "LCPAN") {
        int eq = spec.fpn_channels;
        int e3 = b.conv_bn_act(in.p3, eq, 1, 1, act, "fpn/eq3");
        int e4 = b.conv_bn_act(in.p4, eq, 1, 1, act, "fpn/eq4");
        int e5 = b.conv_bn_act(in.p5, eq, 1, 1, act, "fpn/eq5");
        int up0 = b.upsample(e5, "fpn/up0");
        int m0 = fpn_merge(b, spec, act, up0, e4, "fpn/merge_td4");
        int t4 = lcpan_stack(b, spec, m0, "fpn/stack_td4");
        int up1 = b.upsample(t4, "fpn/up1");
        int m1 = fpn_merge(b, spec, act, up1, e3, "fpn/merge_td3");
        out.p3 = lcpan_stack(b, spec, m1, "fpn/stack_p3");
        int d3 = lcpan_down(b, spec, out.p3, "fpn/down_p3");
        int m2 = fpn_merge(b, spec, act, d3, t4, "fpn/merge_bu4");
        out.p4 = lcpan_stack(b, spec, m2, "fpn/stack_p4");
        int d4 = lcpan_down(b, spec, out.p4, "fpn/down_p4");
        int m3 = fpn_merge(b, spec, act, d4, e5, "fpn/merge_bu5");
        out.p5 = lcpan_stack(b, spec, m3, "fpn/stack_p5");
        return out;
    }

    throw std::invalid_argument("fpn kind '" + spec.kind +
                                "' unknown (PAFPN | LCPAN | SepFPN)");
}

HeadTaps build_head(GraphBuilder& b, const HeadSpec& spec, const TapSet& fpn) {
    if (spec.levels != 3)
        throw std::invalid_argument("head: exactly 3 pyramid levels supported");
    HeadTaps out;
    int w = spec.head_width;
    const int ins[3] = {fpn.p3, fpn.p4, fpn.p5};
    const char* names[3] = {"p3", "p4", "p5"};
    for (int l = 0; l < 3; ++l) {
        std::string hp = std::string("head/") + names[l];
        int stem = b.conv_bn_act(ins[l], w, 1, 1, Act::SiLU, hp + "/stem");
        int c1 = b.conv_bn_act(stem, w, 3, 1, Act::SiLU, hp + "/cls1");
        int c2 = b.conv_bn_act(c1, w, 3, 1, Act::SiLU, hp + "/cls2");
        out.cls[l] = b.conv_bias(c2, spec.num_classes, 1, hp + "/cls_pred");
        int r1 = b.conv_bn_act(stem, w, 3, 1, Act::SiLU, hp + "/reg1");
        int r2 = b.conv_bn_act(r1, w, 3, 1, Act::SiLU, hp + "/reg2");
        out.reg[l] = b.conv_bias(r2, 4, 1, hp + "/reg_pred");
        out.obj[l] = b.conv_bias(r2, 1, 1, hp + "/obj_pred");
    }
    return out;
}

Graph build_backbone_graph(const BackboneSpec& spec, int input_size) {
    GraphBuilder b;
    b.input(3, input_size);
    TapSet t = build_backbone(b, spec);
    b.g.taps["dark3"] = t.p3;
    b.g.taps["dark4"] = t.p4;
    b.g.taps["dark5"] = t.p5;
    b.g.model_name = "backbone";
    return std::move(b.g);
}

Graph build_fpn_graph(const FpnSpec& spec, std::array<int, 3> in_channels,
                      int input_size) {
    GraphBuilder b;
    b.comp = Component::Fpn;
    b.g.input_size = input_size;
    TapSet t;
    t.p3 = b.stub_input(in_channels[0], input_size / 8, input_size / 8, "in_p3");
    t.p4 =
        b.stub_input(in_channels[1], input_size / 16, input_size / 16, "in_p4");
    t.p5 =
        b.stub_input(in_channels[2], input_size / 32, input_size / 32, "in_p5");
    TapSet o = build_fpn(b, spec, t);
    b.g.taps["fpn_p3"] = o.p3;
    b.g.taps["fpn_p4"] = o.p4;
    b.g.taps["fpn_p5"] = o.p5;
    b.g.model_name = "fpn";
    return std::move(b.g);
}

Graph build_head_graph(const HeadSpec& spec, std::array<int, 3> in_channels,
                       int input_size) {
    GraphBuilder b;
    b.comp = Component::Head;
    b.g.input_size = input_size;
    TapSet t;
    t.p3 = b.stub_input(in_channels[0], input_size / 8, input_size / 8, "in_p3");
    t.p4 =
        b.stub_input(in_channels[1], input_size / 16, input_size / 16, "in_p4");
    t.p5 =
        b.stub_input(in_channels[2], input_size / 32, input_size / 32, "in_p5");
    HeadTaps h = build_head(b, spec, t);
    const char* names[3] = {"p3", "p4", "p5"};
    for (int l = 0; l < 3; ++l) {
        std::string base = std::string("head_outputs/") + names[l];
        b.g.taps[base + "/cls"] = h.cls[l];
        b.g.taps[base + "/reg"] = h.reg[l];
        b.g.taps[base + "/obj"] = h.obj[l];
    }
    b.g.model_name = "head";
    return std::move(b.g);
}

Graph compile(const ModelSpec& spec) {
    if (spec.input_size % 32 != 0 || spec.input_size <= 0)
        throw std::invalid_argument("compile: input_size must be a positive "
                                    "multiple of 32, got " +
                                    std::to_string(spec.input_size));
    GraphBuilder b;
    b.comp = Component::Backbone;
    b.input(3, spec.input_size);
    TapSet bt = build_backbone(b, spec.backbone);
    b.g.taps["dark3"] = bt.p3;
    b.g.taps["dark4"] = bt.p4;
    b.g.taps["dark5"] = bt.p5;
    b.comp = Component::Fpn;
    TapSet ft = build_fpn(b, spec.fpn, bt);
    b.g.taps["fpn_p3"] = ft.p3;
    b.g.taps["fpn_p4"] = ft.p4;
    b.g.taps["fpn_p5"] = ft.p5;
    b.comp = Component::Head;
    HeadTaps ht = build_head(b, spec.head, ft);
    const char* names[3] = {"p3", "p4", "p5"};
    for (int l = 0; l < 3; ++l) {
        std::string base = std::string("head_outputs/") + names[l];
        b.g.taps[base + "/cls"] = ht.cls[l];
        b.g.taps[base + "/reg"] = ht.reg[l];
        b.g.taps[base + "/obj"] = ht.obj[l];
    }
    b.g.model_name = spec.name.empty() ? "custom" : spec.name;
    return std::move(b.g);
}

namespace {
inline float sigmoidf(float v) { return 1.f / (1.f + std::exp(-v)); }
}

std::vector<Detection> decode_predictions(
    const std::vector<std::array<Tensor, 3>>& levels,
    const std::array<int, 3>& strides) {
    if (levels.size() != strides.size())
        throw std::invalid_argument("decode: need one stride per level");
    std::vector<Detection> dets;
    size_t total = 0;
    for (const auto& lv : levels)
        total += static_cast<size_t>(lv[0].h) * lv[0].w;
    dets.reserve(total);
    for (size_t l = 0; l < levels.size(); ++l) {
        const Tensor& cls = levels[l][0];
        const Tensor& reg = levels[l][1];
        const Tensor& obj = levels[l][2];
        if (reg.c != 4 || obj.c != 1)
            throw std::invalid_argument(
                "decode: expected reg channels 4 and obj channels 1, got " +
                std::to_string(reg.c) + "/" + std::to_string(obj.c));
        if (cls.h != reg.h || cls.w != reg.w || cls.h != obj.h)
            throw std::invalid_argument(
                "decode: per-level head maps disagree on grid size");
        float s = static_cast<float>(strides[l]);
        for (int gy = 0; gy < reg.h; ++gy)
            for (int gx = 0; gx < reg.w; ++gx) {
                Detection d;
                d.stride = strides[l];
                d.cx = (gx + reg.at(0, 0, gy, gx)) * s;
                d.cy = (gy + reg.at(0, 1, gy, gx)) * s;
                d.w = std::exp(reg.at(0, 2, gy, gx)) * s;
                d.h = std::exp(reg.at(0, 3, gy, gx)) * s;
                d.objectness = sigmoidf(obj.at(0, 0, gy, gx));
                d.class_scores.resize(cls.c);
                for (int ci = 0; ci < cls.c; ++ci)
                    d.class_scores[ci] = sigmoidf(cls.at(0, ci, gy, gx));
                dets.push_back(std::move(d));
            }
    }
    return dets;
}

std::vector<Detection> decode_predictions(
    const std::map<std::string, Tensor>& taps,
    const std::array<int, 3>& strides) {
    std::vector<std::array<Tensor, 3>> levels;
    for (const char* lv : {"p3", "p4", "p5"}) {
        std::string base = std::string("head_outputs/") + lv;
        auto need = [&](const std::string& k) -> const Tensor& {
            auto it = taps.find(k);
            if (it == taps.end())
                throw std::invalid_argument("decode: missing head output '" +
                                            k + "'");
            return it->second;
        };
        levels.push_back({need(base + "/cls"), need(base + "/reg"),
                          need(base + "/obj")});
    }
    return decode_predictions(levels, strides);
}

}  // namespace detbench
