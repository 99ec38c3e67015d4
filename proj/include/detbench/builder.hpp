#pragma once
#include <array>
#include <map>
#include <string>
#include <vector>

#include "detbench/blocks.hpp"
#include "detbench/graph.hpp"
#include "detbench/specs.hpp"

namespace detbench {

struct TapSet {
    int p3 = -1, p4 = -1, p5 = -1;  // node indices at strides 8/16/32
};

struct HeadTaps {
    std::array<int, 3> cls{-1, -1, -1};
    std::array<int, 3> reg{-1, -1, -1};
    std::array<int, 3> obj{-1, -1, -1};
};

// Appenders: extend the builder's graph from an existing source node.
TapSet build_backbone(GraphBuilder& b, const BackboneSpec& spec);
TapSet build_fpn(GraphBuilder& b, const FpnSpec& spec, const TapSet& taps);
HeadTaps build_head(GraphBuilder& b, const HeadSpec& spec, const TapSet& fpn);

// Sum-merge helper: inserts a 1x1 lateral on the skip branch when channel
// counts differ (sized to the trunk), then adds.
int sum_merge(GraphBuilder& b, int trunk, int skip, Act act,
              const std::string& name);

// Fragment graphs for standalone analysis (shape & cost; not forward).
Graph build_backbone_graph(const BackboneSpec& spec, int input_size = 416);
Graph build_fpn_graph(const FpnSpec& spec, std::array<int, 3> in_channels,
                      int input_size = 416);
Graph build_head_graph(const HeadSpec& spec, std::array<int, 3> in_channels,
                       int input_size = 416);

// Full detector: backbone -> FPN -> head, with named taps
// dark3/dark4/dark5, fpn_p3/fpn_p4/fpn_p5, head_outputs/p{3,4,5}/{cls,reg,obj}.
Graph compile(const ModelSpec& spec);

struct Detection {
    float cx = 0, cy = 0, w = 0, h = 0;
    float objectness = 0;
    std::vector<float> class_scores;
    int stride = 0;
};

// Anchor-free decode: center = (grid + offset) * stride,
// size = exp(pred) * stride, sigmoid on objectness and class scores.
// One entry per grid cell per level (52^2 + 26^2 + 13^2 = 3549 at 416).
std::vector<Detection> decode_predictions(
    const std::vector<std::array<Tensor, 3>>& levels,  // {cls, reg, obj}
    const std::array<int, 3>& strides = {8, 16, 32});
std::vector<Detection> decode_predictions(
    const std::map<std::string, Tensor>& taps,
    const std::array<int, 3>& strides = {8, 16, 32});

// Named presets reproducing each published table row, plus table groups.
std::vector<std::string> preset_names();
bool is_preset(const std::string& name);
ModelSpec preset(const std::string& name);
std::vector<std::string> preset_group_names();
std::vector<std::string> preset_group(const std::string& group);

}  // namespace detbench
