#include "detbench/specs.hpp"

#include <set>
#include <stdexcept>

#include "json.hpp"

namespace detbench {

namespace {

using json = nlohmann::ordered_json;

json backbone_to_json(const BackboneSpec& b) {
    json j;
    j["family"] = b.family;
    j["main_op"] = b.main_op;
    j["fused_stage_count"] = b.fused_stage_count;
    j["expand_ratio"] = b.expand_ratio;
    j["reduce_ratio"] = b.reduce_ratio;
    j["width_multiplier"] = b.width_multiplier;
    j["depth_multiplier"] = b.depth_multiplier;
    j["channel_multiplier"] = b.channel_multiplier;
    j["stem"] = b.stem;
    j["spp_hidden_div"] = b.spp_hidden_div;
    j["stage_depths"] = b.stage_depths;
    j["stage_se"] = b.stage_se;
    j["stage_dw_kernels"] = b.stage_dw_kernels;
    j["se_s2_only"] = b.se_s2_only;
    j["group_width"] = b.group_width;
    j["bottleneck_ratio"] = b.bottleneck_ratio;
    return j;
}

json fpn_to_json(const FpnSpec& f) {
    json j;
    j["kind"] = f.kind;
    j["merge"] = f.merge;
    j["fpn_channels"] = f.fpn_channels;
    j["inner_depth"] = f.inner_depth;
    j["dw_kernel"] = f.dw_kernel;
    j["out_csp"] = f.out_csp;
    j["equalize_to"] = f.equalize_to;
    return j;
}

json head_to_json(const HeadSpec& h) {
    json j;
    j["num_classes"] = h.num_classes;
    j["head_width"] = h.head_width;
    j["levels"] = h.levels;
    return j;
}

void check_fields(const json& j, const std::set<std::string>& allowed,
                  const std::string& where) {
    if (!j.is_object())
        throw std::invalid_argument("model spec: '" + where +
                                    "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw std::invalid_argument("model spec: unknown field '" +
                                        it.key() + "' in " + where);
}

template <typename T>
void get_to_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

BackboneSpec backbone_from_json(const json& j) {
    check_fields(j,
                 {"family", "main_op", "fused_stage_count", "expand_ratio",
                  "reduce_ratio", "width_multiplier", "depth_multiplier",
                  "channel_multiplier", "stem", "spp_hidden_div",
                  "stage_depths", "stage_se", "stage_dw_kernels", "se_s2_only",
                  "group_width", "bottleneck_ratio"},
                 "backbone");
    BackboneSpec b;
    get_to_if(j, "family", b.family);
    get_to_if(j, "main_op", b.main_op);
    get_to_if(j, "fused_stage_count", b.fused_stage_count);
    get_to_if(j, "expand_ratio", b.expand_ratio);
    get_to_if(j, "reduce_ratio", b.reduce_ratio);
    get_to_if(j, "width_multiplier", b.width_multiplier);
    get_to_if(j, "depth_multiplier", b.depth_multiplier);
    get_to_if(j, "channel_multiplier", b.channel_multiplier);
    get_to_if(j, "stem", b.stem);
    get_to_if(j, "spp_hidden_div", b.spp_hidden_div);
    get_to_if(j, "stage_depths", b.stage_depths);
    get_to_if(j, "stage_se", b.stage_se);
    get_to_if(j, "stage_dw_kernels", b.stage_dw_kernels);
    get_to_if(j, "se_s2_only", b.se_s2_only);
    get_to_if(j, "group_width", b.group_width);
    get_to_if(j, "bottleneck_ratio", b.bottleneck_ratio);
    return b;
}

FpnSpec fpn_from_json(const json& j) {
    check_fields(j,
                 {"kind", "merge", "fpn_channels", "inner_depth", "dw_kernel",
                  "out_csp", "equalize_to"},
                 "fpn");
    FpnSpec f;
    get_to_if(j, "kind", f.kind);
    get_to_if(j, "merge", f.merge);
    get_to_if(j, "fpn_channels", f.fpn_channels);
    get_to_if(j, "inner_depth", f.inner_depth);
    get_to_if(j, "dw_kernel", f.dw_kernel);
    get_to_if(j, "out_csp", f.out_csp);
    get_to_if(j, "equalize_to", f.equalize_to);
    return f;
}

HeadSpec head_from_json(const json& j) {
    check_fields(j, {"num_classes", "head_width", "levels"}, "head");
    HeadSpec h;
    get_to_if(j, "num_classes", h.num_classes);
    get_to_if(j, "head_width", h.head_width);
    get_to_if(j, "levels", h.levels);
    return h;
}

}  // namespace

std::string to_json(const ModelSpec& spec, int indent) {
    json j;
    j["name"] = spec.name;
    j["input_size"] = spec.input_size;
    j["backbone"] = backbone_to_json(spec.backbone);
    j["fpn"] = fpn_to_json(spec.fpn);
    j["head"] = head_to_json(spec.head);
    return j.dump(indent);
}

ModelSpec model_spec_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("model spec: invalid JSON: ") +
                                    e.what());
    }
    check_fields(j, {"name", "input_size", "backbone", "fpn", "head"},
                 "model spec");
    ModelSpec m;
    get_to_if(j, "name", m.name);
    get_to_if(j, "input_size", m.input_size);
    if (j.contains("backbone")) m.backbone = backbone_from_json(j["backbone"]);
    if (j.contains("fpn")) m.fpn = fpn_from_json(j["fpn"]);
    if (j.contains("head")) m.head = head_from_json(j["head"]);
    return m;
}

}  // namespace detbench
