#pragma once
#include <string>
#include <vector>

#include "detbench/tensor.hpp"

namespace detbench {

// One micro-architecture instance: the atom of configuration.
struct BlockSpec {
    std::string kind;  // ConvBnAct, DarknetBottleneck, CspLayer, MbConv,
                       // FusedMbConv, Sandglass, RegNetX, DsConv, BsConv,
                       // Focus, SppBottleneck, SqueezeExcite
    int in_channels = 0;
    int out_channels = 0;
    int stride = 1;
    double expand_ratio = 1.0;   // MbConv / FusedMbConv
    double reduce_ratio = 0.5;   // Sandglass
    int depth = 1;               // CspLayer inner bottleneck count
    int kernel = 3;
    Act activation = Act::SiLU;
    bool use_residual = true;    // honored only where in/out/stride permit
    bool use_se = false;         // MbConv / DsConv / BsConv squeeze-excite
    int group_width = 16;        // RegNetX
    int bottleneck_ratio = 1;    // RegNetX inner width = out / ratio
    int spp_hidden_div = 2;      // SppBottleneck hidden width divisor
};

struct BackboneSpec {
    std::string family = "CspDarknet";  // CspDarknet | PpLcNet
    std::string main_op = "CspLayer";   // CspLayer | MbConv | FusedMbConv |
                                        // Mixed | Sandglass | RegNetX |
                                        // DsConv | BsConv
    int fused_stage_count = 0;          // Mixed: FusedMbConv in first k stages
    double expand_ratio = 1.0;
    double reduce_ratio = 0.5;
    double width_multiplier = 0.375;
    double depth_multiplier = 0.33;
    int channel_multiplier = 1;         // 1 or 2 (doubled-width CPU variants)
    std::string stem;                   // "" = family default (focus | conv)
    int spp_hidden_div = -1;            // -1 = family default (2 | none)
    std::vector<int> stage_depths;      // empty = ceil(depth_multiplier*base)
    std::vector<int> stage_se;          // empty = family default
    std::vector<int> stage_dw_kernels;  // empty = family default
    bool se_s2_only = false;            // SE only on a stage's stride-2 block
    int group_width = 16;               // RegNetX stages
    int bottleneck_ratio = 1;           // RegNetX stages
};

struct FpnSpec {
    std::string kind = "PAFPN";   // PAFPN | LCPAN | SepFPN
    std::string merge = "Concat"; // Concat | Sum
    int fpn_channels = 96;        // LCPAN equalized width
    int inner_depth = 1;          // CSP depth / LCPAN merge stack depth
    int dw_kernel = 5;            // LCPAN depthwise kernel
    std::vector<int> out_csp = {0, 1, 1};  // SepFPN per-level output CSPs
    int equalize_to = 0;          // >0: 1x1-equalize taps before the FPN
};

struct HeadSpec {
    int num_classes = 80;
    int head_width = 96;
    int levels = 3;
};

struct ModelSpec {
    std::string name;
    int input_size = 416;
    BackboneSpec backbone;
    FpnSpec fpn;
    HeadSpec head;
};

// JSON round-trip (schema described in README). Unknown fields are rejected;
// missing fields take the defaults above.
std::string to_json(const ModelSpec& spec, int indent = 2);
ModelSpec model_spec_from_json(const std::string& text);

}  // namespace detbench
