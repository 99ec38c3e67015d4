#include <algorithm>
#include <stdexcept>

#include "detbench/builder.hpp"

namespace detbench {

namespace {

BackboneSpec gpu_backbone(const std::string& op, int fused, double expand,
                          const std::string& stem, int spp_div,
                          std::vector<int> depths, std::vector<int> se = {},
                          std::vector<int> dwk = {}, int gw = 16, int br = 1) {
    BackboneSpec s;
    s.family = "CspDarknet";
    s.main_op = op;
    s.fused_stage_count = fused;
    s.expand_ratio = expand;
    s.stem = stem;
    s.spp_hidden_div = spp_div;
    s.stage_depths = std::move(depths);
    s.stage_se = std::move(se);
    s.stage_dw_kernels = std::move(dwk);
    s.group_width = gw;
    s.bottleneck_ratio = br;
    return s;
}

BackboneSpec lcnet_backbone(const std::string& op, int cm,
                            std::vector<int> depths) {
    BackboneSpec s;
    s.family = "PpLcNet";
    s.main_op = op;
    s.channel_multiplier = cm;
    s.stage_depths = std::move(depths);
    s.se_s2_only = true;
    return s;
}

FpnSpec fpn_of(const std::string& kind, const std::string& merge,
               int equalize_to = 0) {
    FpnSpec f;
    f.kind = kind;
    f.merge = merge;
    f.equalize_to = equalize_to;
    if (kind == "LCPAN") {
        f.fpn_channels = 96;
        f.inner_depth = 2;
        f.dw_kernel = 5;
    }
    return f;
}

// The FPN study rows all share the strongest ablation backbone.
BackboneSpec fpn_study_backbone() {
    return gpu_backbone("Mixed", 2, 1.5, "conv", 2, {1, 2, 1, 1}, {},
                        {3, 3, 3, 5});
}

ModelSpec make(const std::string& name, BackboneSpec bb, FpnSpec fpn) {
    ModelSpec m;
    m.name = name;
    m.backbone = std::move(bb);
    m.fpn = std::move(fpn);
    return m;
}

const std::vector<std::string>& ordered_names() {
    static const std::vector<std::string> names = {
        "yolox_tiny",    "mbconv",        "fused_mbconv",  "mixed_f1",
        "mixed_f2",      "mixed_f1_e1p5", "mixed_f2_e1p5", "regnetx",
        "sandglass",     "picodet_ds",    "picodet_bs",    "picodet_ds_x2",
        "picodet_bs_x2", "pafpn",         "pafpn_sum",     "lcpan",
        "lcpan_sum",     "sepfpn"};
    return names;
}

}  // namespace

std::vector<std::string> preset_names() { return ordered_names(); }

bool is_preset(const std::string& name) {
    const auto& n = ordered_names();
    return std::find(n.begin(), n.end(), name) != n.end();
}

ModelSpec preset(const std::string& name) {
    FpnSpec pafpn_cat = fpn_of("PAFPN", "Concat");

    if (name == "yolox_tiny")
        return make(name, gpu_backbone("CspLayer", 0, 1.0, "", -1, {}),
                    pafpn_cat);
    if (name == "mbconv")
        return make(name,
                    gpu_backbone("MbConv", 0, 1.0, "focus", 2, {1, 2, 3, 1}),
                    pafpn_cat);
    if (name == "fused_mbconv")
        return make(
            name, gpu_backbone("FusedMbConv", 0, 1.0, "focus", 2, {1, 1, 3, 1}),
            pafpn_cat);
    if (name == "mixed_f1")
        return make(name,
                    gpu_backbone("Mixed", 1, 1.0, "conv", 4, {1, 1, 2, 2},
                                 {0, 0, 0, 1}),
                    pafpn_cat);
    if (name == "mixed_f2")
        return make(name,
                    gpu_backbone("Mixed", 2, 1.0, "conv", 2, {1, 2, 3, 1},
                                 {0, 0, 0, 1}),
                    pafpn_cat);
    if (name == "mixed_f1_e1p5")
        return make(name,
                    gpu_backbone("Mixed", 1, 1.5, "conv", 2, {1, 1, 1, 1}),
                    pafpn_cat);
    if (name == "mixed_f2_e1p5")
        return make(name, fpn_study_backbone(), pafpn_cat);
    if (name == "regnetx")
        return make(name,
                    gpu_backbone("RegNetX", 0, 1.0, "focus", 2, {1, 3, 3, 2},
                                 {}, {}, 48, 4),
                    pafpn_cat);
    if (name == "sandglass")
        return make(name,
                    gpu_backbone("Sandglass", 0, 1.0, "focus", 4, {1, 1, 1, 1}),
                    pafpn_cat);

    if (name == "picodet_ds")
        return make(name, lcnet_backbone("DsConv", 1, {3, 3, 4, 3}), pafpn_cat);
    if (name == "picodet_bs")
        return make(name, lcnet_backbone("BsConv", 1, {3, 3, 3, 3}), pafpn_cat);
    if (name == "picodet_ds_x2")
        return make(name, lcnet_backbone("DsConv", 2, {2, 3, 4, 3}),
                    fpn_of("PAFPN", "Concat", 96));
    if (name == "picodet_bs_x2")
        return make(name, lcnet_backbone("BsConv", 2, {2, 3, 4, 3}),
                    fpn_of("PAFPN", "Concat", 96));

    if (name == "pafpn") return make(name, fpn_study_backbone(), pafpn_cat);
    if (name == "pafpn_sum")
        return make(name, fpn_study_backbone(), fpn_of("PAFPN", "Sum"));
    if (name == "lcpan")
        return make(name, fpn_study_backbone(), fpn_of("LCPAN", "Concat"));
    if (name == "lcpan_sum")
        return make(name, fpn_study_backbone(), fpn_of("LCPAN", "Sum"));
    if (name == "sepfpn")
        return make(name, fpn_study_backbone(), fpn_of("SepFPN", "Concat"));

    std::string known;
    for (const auto& n : ordered_names()) known += "\n  " + n;
    throw std::invalid_argument("unknown preset '" + name +
                                "'; available presets:" + known);
}

std::vector<std::string> preset_group_names() {
    return {"table1", "table2", "table3", "table4", "table5"};
}

std::vector<std::string> preset_group(const std::string& group) {
    if (group == "table1")
        return {"yolox_tiny", "mbconv",  "mixed_f1",
                "fused_mbconv", "regnetx", "sandglass"};
    if (group == "table2")
        return {"yolox_tiny", "mixed_f1", "mixed_f2", "mixed_f1_e1p5",
                "mixed_f2_e1p5"};
    if (group == "table3" || group == "table4")
        return {"yolox_tiny", "picodet_ds", "picodet_bs", "picodet_ds_x2",
                "picodet_bs_x2"};
    if (group == "table5")
        return {"pafpn", "lcpan", "pafpn_sum", "lcpan_sum", "sepfpn"};
    throw std::invalid_argument(
        "unknown preset group '" + group +
        "'; available groups: table1 table2 table3 table4 table5");
}

}  // namespace detbench
