#pragma once
#include <map>
#include <string>
#include <vector>

#include "detbench/tensor.hpp"

namespace detbench {

enum class OpKind {
    Input,
    Conv,
    BatchNorm,
    Activation,
    MaxPool,
    Upsample2x,
    ConcatChannels,
    Add,
    SpaceToDepth2x,
    GlobalAvgPool,
    MulChannelwise,
};

const char* op_name(OpKind k);

enum class Component { Backbone, Fpn, Head };
const char* component_name(Component c);

struct Node {
    std::string name;
    OpKind kind = OpKind::Input;
    Component component = Component::Backbone;
    std::vector<int> inputs;  // node indices

    ConvParams conv;      // Conv
    BatchNormParams bn;   // BatchNorm
    Act act = Act::Identity;          // Activation
    int pool_k = 0, pool_s = 0, pool_p = 0;  // MaxPool

    // Inferred output shape for batch 1; filled at build time.
    int out_c = 0, out_h = 0, out_w = 0;

    size_t param_count() const;
    // Multiply-accumulate style op units before the x2 flops convention:
    // conv = weights * out_px (+ out_c * out_px if biased), bn = 2 * c * px,
    // everything else 0.
    long long op_units() const;
};

struct Graph {
    std::string model_name;
    int input_size = 416;
    int input_channels = 3;
    std::vector<Node> nodes;
    // Named outputs: backbone taps, fpn levels, head maps.
    std::map<std::string, int> taps;

    int add_node(Node n);  // infers shape, returns index
    const Node& at(const std::string& name) const;
    int index_of(const std::string& name) const;

    // Executes every node in order; out[i] holds node i's tensor. Pass the
    // same vector across calls to reuse allocations. per_node_ms, when given,
    // receives one wall-clock duration per node.
    void forward(const Tensor& input, std::vector<Tensor>& out,
                 std::vector<double>* per_node_ms = nullptr) const;
    std::map<std::string, Tensor> forward_taps(const Tensor& input) const;

    // Rewires BatchNorm nodes out of the graph, merging them into their
    // producer convs. Param/flop accounting is done on the unfolded graph;
    // folding is for the timed path.
    Graph fold_batchnorm() const;

    // Canonical structural description: op kinds, shapes, wiring, kernel
    // geometry; no names or weights. Equal strings = isomorphic networks.
    std::string structure_signature() const;

    size_t total_params() const;
    long long total_op_units() const;
    void infer_node_shape(Node& n) const;
};

}  // namespace detbench
