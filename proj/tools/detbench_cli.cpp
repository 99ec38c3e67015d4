// detbench: build, profile, and benchmark one-stage detector variants.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "detbench/bench.hpp"
#include "detbench/builder.hpp"
#include "detbench/profiler.hpp"
#include "detbench/specs.hpp"

using namespace detbench;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSpecError = 2;
constexpr int kExitVerifyFailed = 3;

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Accepts a preset name or a path to a ModelSpec JSON file.
ModelSpec resolve_model(const std::string& what) {
    if (is_preset(what)) return preset(what);
    if (what.find('/') != std::string::npos ||
        (what.size() > 5 && what.substr(what.size() - 5) == ".json"))
        return model_spec_from_json(slurp(what));
    return preset(what);  // throws, listing every preset
}

struct Overrides {
    double expand_ratio = -1;
    int fused_stages = -1;
    int channel_multiplier = 0;
    std::string fpn, merge;

    void add_flags(CLI::App* cmd) {
        cmd->add_option("--expand-ratio", expand_ratio,
                        "override backbone expansion ratio");
        cmd->add_option("--fused-stages", fused_stages,
                        "override how many leading stages use the fused block");
        cmd->add_option("--channel-multiplier", channel_multiplier,
                        "override backbone width multiplier (1 or 2)");
        cmd->add_option("--fpn", fpn, "override FPN kind: pafpn|lcpan|sepfpn");
        cmd->add_option("--merge", merge, "override FPN merge: concat|sum");
    }

    // Returns true if anything was overridden (the result then no longer
    // matches any published row, so metadata is not attached).
    bool apply(ModelSpec& spec) const {
        bool touched = false;
        if (expand_ratio >= 0) {
            spec.backbone.expand_ratio = expand_ratio;
            touched = true;
        }
        if (fused_stages >= 0) {
            spec.backbone.fused_stage_count = fused_stages;
            touched = true;
        }
        if (channel_multiplier > 0) {
            spec.backbone.channel_multiplier = channel_multiplier;
            touched = true;
        }
        if (!fpn.empty()) {
            spec.fpn.kind = canon_fpn(fpn);
            touched = true;
        }
        if (!merge.empty()) {
            spec.fpn.merge = canon_merge(merge);
            touched = true;
        }
        if (touched && !spec.name.empty()) spec.name += "@override";
        return touched;
    }

    static std::string lower(std::string s) {
        for (char& c : s) c = static_cast<char>(std::tolower(c));
        return s;
    }
    static std::string canon_fpn(const std::string& s) {
        std::string l = lower(s);
        if (l == "pafpn") return "PAFPN";
        if (l == "lcpan") return "LCPAN";
        if (l == "sepfpn") return "SepFPN";
        throw std::invalid_argument("--fpn '" + s +
                                    "' unknown (pafpn | lcpan | sepfpn)");
    }
    static std::string canon_merge(const std::string& s) {
        std::string l = lower(s);
        if (l == "concat" || l == "cat") return "Concat";
        if (l == "sum") return "Sum";
        throw std::invalid_argument("--merge '" + s + "' unknown (concat | sum)");
    }
};

std::string safe_name(const std::string& name) {
    std::string out = name.empty() ? "model" : name;
    for (char& c : out)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_')
            c = '_';
    return out;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

void try_attach_map(AnalysisReport& rep, const std::string& preset_name,
                    const std::string& tables_path) {
    try {
        auto tables = load_paper_tables(
            tables_path.empty() ? default_tables_path() : tables_path);
        attach_map_metadata(rep, tables, preset_name);
    } catch (const std::exception& e) {
        std::cerr << "note: mAP metadata unavailable (" << e.what() << ")\n";
    }
}

int cmd_list_presets() {
    for (const std::string& group : preset_group_names()) {
        std::printf("%s:\n", group.c_str());
        for (const std::string& name : preset_group(group))
            std::printf("  %s\n", name.c_str());
    }
    return kExitOk;
}

int cmd_show(const std::string& model, const Overrides& ov) {
    ModelSpec spec = resolve_model(model);
    ov.apply(spec);
    std::printf("%s\n", to_json(spec).c_str());
    return kExitOk;
}

int cmd_analyze(const std::string& model, const Overrides& ov, int input_size,
                bool as_json, bool as_csv, const std::string& out_path,
                const std::string& tables_path) {
    ModelSpec spec = resolve_model(model);
    bool touched = ov.apply(spec);
    if (input_size > 0) spec.input_size = input_size;
    AnalysisReport rep = analyze(compile(spec));
    if (!touched && is_preset(model)) try_attach_map(rep, model, tables_path);

    std::string text = as_json   ? report_to_json(rep)
                       : as_csv ? report_to_csv(rep)
                                : report_to_text(rep);
    if (out_path.empty()) {
        std::fputs(text.c_str(), stdout);
    } else {
        write_file(out_path, text);
        std::printf("wrote %s\n", out_path.c_str());
    }
    return kExitOk;
}

int cmd_bench(const std::string& model, const Overrides& ov, int input_size,
              const BenchConfig& cfg_in, const std::string& out_path) {
    ModelSpec spec = resolve_model(model);
    ov.apply(spec);
    if (input_size > 0) spec.input_size = input_size;
    BenchConfig cfg = cfg_in;
    cfg.input_size = spec.input_size;
    LatencyReport lat = run_bench(compile(spec), cfg);
    Breakdown b = component_breakdown(lat);

    std::string path = out_path.empty()
                           ? "bench_" + safe_name(lat.model) + ".json"
                           : out_path;
    write_file(path, latency_report_to_json(lat));
    std::printf(
        "%s @%d: median %.4f ms  mean %.4f ms  p95 %.4f ms  cv %.2f%%%s\n",
        lat.model.c_str(), cfg.input_size, lat.median_ms, lat.mean_ms,
        lat.p95_ms, lat.cv_pct, lat.unstable ? "  [unstable]" : "");
    std::printf("  backbone %.1f%%  fpn %.1f%%  head %.1f%%  (%d iters, batch "
                "%d, %d thread)\n",
                b.backbone_pct, b.fpn_pct, b.head_pct, cfg.measure_iters,
                cfg.batch, cfg.threads);
    std::printf("wrote %s\n", path.c_str());
    return kExitOk;
}

int cmd_sweep(const std::string& group, const std::vector<std::string>& names,
              int input_size, const BenchConfig& cfg_in,
              const std::string& out_csv, const std::string& tables_path) {
    std::vector<std::string> picks = names;
    if (!group.empty())
        for (const std::string& p : preset_group(group)) picks.push_back(p);
    if (picks.empty())
        throw std::invalid_argument(
            "sweep: pass --preset-group or at least one model");

    std::vector<ModelSpec> models;
    for (const std::string& p : picks) {
        ModelSpec spec = resolve_model(p);
        if (input_size > 0) spec.input_size = input_size;
        models.push_back(std::move(spec));
    }
    BenchConfig cfg = cfg_in;

    SweepOutputs out;
    out.csv_path = out_csv.empty() ? "sweep.csv" : out_csv;
    size_t slash = out.csv_path.find_last_of('/');
    out.scatter_path = slash == std::string::npos
                           ? "scatter.json"
                           : out.csv_path.substr(0, slash + 1) + "scatter.json";
    out.tables_path = tables_path;

    bool ok = run_sweep(models, cfg, out, std::cout);
    std::printf("wrote %s and %s\n", out.csv_path.c_str(),
                out.scatter_path.c_str());
    if (!ok) {
        std::fprintf(stderr, "sweep: some models failed; see the csv rows\n");
        return kExitVerifyFailed;
    }
    return kExitOk;
}

int cmd_verify_tables(const std::string& tables_path, bool as_json,
                      const std::string& out_path) {
    VerifyResult res = verify_tables(
        tables_path.empty() ? default_tables_path() : tables_path);
    std::string text =
        as_json ? verify_result_to_json(res) : verify_result_to_text(res);
    if (out_path.empty()) {
        std::fputs(text.c_str(), stdout);
    } else {
        write_file(out_path, text);
        std::printf("wrote %s\n", out_path.c_str());
    }
    return res.all_pass ? kExitOk : kExitVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "detbench: construct, profile, and benchmark lightweight one-stage "
        "detector variants on CPU"};
    app.require_subcommand(1);

    // list-presets
    auto* ls = app.add_subcommand("list-presets",
                                  "enumerate model presets grouped by table");

    // show
    std::string show_model;
    Overrides show_ov;
    auto* show = app.add_subcommand("show", "print the resolved model spec");
    show->add_option("model", show_model, "preset name or spec json path")
        ->required();
    show_ov.add_flags(show);

    // analyze
    std::string an_model, an_out, an_tables;
    Overrides an_ov;
    int an_input = 0;
    bool an_json = false, an_csv = false;
    auto* an = app.add_subcommand(
        "analyze", "static parameter / Gflops breakdown by component");
    an->add_option("model", an_model, "preset name or spec json path")
        ->required();
    an->add_option("--input-size", an_input,
                   "square input size (multiple of 32)");
    an->add_option("--out", an_out, "write the report to a file");
    an->add_option("--tables", an_tables,
                   "published-table metadata path (for the mAP column)");
    an->add_flag("--json", an_json, "emit JSON");
    an->add_flag("--csv", an_csv, "emit CSV");
    an_ov.add_flags(an);

    // bench
    std::string be_model, be_out;
    Overrides be_ov;
    int be_input = 0;
    BenchConfig be_cfg;
    auto* be = app.add_subcommand("bench",
                                  "single-thread CPU latency measurement");
    be->add_option("model", be_model, "preset name or spec json path")
        ->required();
    be->add_option("--input-size", be_input,
                   "square input size (multiple of 32)");
    be->add_option("--warmup", be_cfg.warmup_iters, "warmup iterations");
    be->add_option("--iters", be_cfg.measure_iters, "measured iterations");
    be->add_option("--seed", be_cfg.seed, "input tensor RNG seed");
    be->add_option("--out", be_out, "report path (default bench_<name>.json)");
    be_ov.add_flags(be);

    // sweep
    std::string sw_group, sw_out, sw_tables;
    std::vector<std::string> sw_models;
    int sw_input = 0;
    BenchConfig sw_cfg;
    auto* sw = app.add_subcommand(
        "sweep", "analyze + bench a model set; emits csv and scatter data");
    sw->add_option("models", sw_models, "preset names or spec json paths");
    sw->add_option("--preset-group", sw_group,
                   "bench every preset of a published-table group");
    sw->add_option("--input-size", sw_input,
                   "square input size (multiple of 32)");
    sw->add_option("--warmup", sw_cfg.warmup_iters, "warmup iterations");
    sw->add_option("--iters", sw_cfg.measure_iters, "measured iterations");
    sw->add_option("--seed", sw_cfg.seed, "input tensor RNG seed");
    sw->add_option("--out", sw_out, "csv path (default sweep.csv)");
    sw->add_option("--tables", sw_tables,
                   "published-table metadata path (for the mAP column)");

    // verify-tables
    std::string vt_tables, vt_out;
    bool vt_json = false;
    auto* vt = app.add_subcommand(
        "verify-tables",
        "check computed params/Gflops against the published cells");
    vt->add_option("--tables", vt_tables, "published-table metadata path");
    vt->add_option("--out", vt_out, "write the report to a file");
    vt->add_flag("--json", vt_json, "emit JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitSpecError;
    }

    try {
        if (ls->parsed()) return cmd_list_presets();
        if (show->parsed()) return cmd_show(show_model, show_ov);
        if (an->parsed()) {
            if (an_json && an_csv)
                throw std::invalid_argument("pick one of --json / --csv");
            return cmd_analyze(an_model, an_ov, an_input, an_json, an_csv,
                               an_out, an_tables);
        }
        if (be->parsed())
            return cmd_bench(be_model, be_ov, be_input, be_cfg, be_out);
        if (sw->parsed())
            return cmd_sweep(sw_group, sw_models, sw_input, sw_cfg, sw_out,
                             sw_tables);
        if (vt->parsed()) return cmd_verify_tables(vt_tables, vt_json, vt_out);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitSpecError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitSpecError;
    }
    return kExitOk;
}
