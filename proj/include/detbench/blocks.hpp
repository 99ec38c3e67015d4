#pragma once
#include <random>
#include <string>
#include <vector>

#include "detbench/graph.hpp"
#include "detbench/specs.hpp"

namespace detbench {

// Incremental graph assembly with deterministic weight initialization.
struct GraphBuilder {
    Graph g;
    std::mt19937 rng{0x5EED5EEDu};
    Component comp = Component::Backbone;

    int input(int channels, int size);
    // Shape-only source node for fragment graphs (analysis, not forward).
    int stub_input(int channels, int h, int w, const std::string& name);

    int conv_bn_act(int in, int out_c, int k, int stride, Act act,
                    const std::string& name, int groups = 1);
    // Bare conv, bias + no BN + no activation (prediction / SE layers).
    int conv_bias(int in, int out_c, int k, const std::string& name);
    int act(int in, Act a, const std::string& name);
    int maxpool(int in, int k, int stride, int pad, const std::string& name);
    int upsample(int in, const std::string& name);
    int concat(const std::vector<int>& ins, const std::string& name);
    int add(int a, int b, const std::string& name);
    int space_to_depth(int in, const std::string& name);
    int global_pool(int in, const std::string& name);
    int mul(int x, int gate, const std::string& name);

    int channels_of(int idx) const { return g.nodes[idx].out_c; }

   private:
    ConvParams make_conv(int in_c, int out_c, int k, int stride, int groups,
                         bool bias);
    BatchNormParams make_bn(int channels);
};

// Appends one micro-architecture block; returns its output node index.
// Structures:
//   ConvBnAct          kxk conv + BN + act
//   DarknetBottleneck  1x1 -> 3x3, optional residual
//   CspLayer           two 1x1 branches, N bottlenecks, concat, 1x1 fuse
//   MbConv             [1x1 expand] -> depthwise -> [SE] -> 1x1 project
//   FusedMbConv        3x3 (expand) [-> 1x1 project when expanded]
//   Sandglass          depthwise -> 1x1 reduce -> 1x1 expand -> depthwise
//   RegNetX            1x1 -> 3x3 grouped -> 1x1
//   DsConv             depthwise -> [SE] -> 1x1
//   BsConv             1x1 -> depthwise -> [SE]
//   Focus              space-to-depth + 3x3 conv
//   SppBottleneck      1x1 reduce, {5,9,13} max-pools + identity, concat, 1x1
//   SqueezeExcite      GAP -> 1x1 -> ReLU -> 1x1 -> hard-sigmoid -> scale
int emit_block(GraphBuilder& b, const BlockSpec& spec, int input,
               const std::string& prefix);

// Standalone block: its own one-input graph, forward-capable and
// cost-reporting. Input spatial size fixes the flop accounting.
struct Block {
    BlockSpec spec;
    Graph graph;
    Tensor forward(const Tensor& x) const;
    size_t param_count() const { return graph.total_params(); }
    long long op_units() const { return graph.total_op_units(); }
};

Block build_block(const BlockSpec& spec, int input_hw = 32);

}  // namespace detbench
