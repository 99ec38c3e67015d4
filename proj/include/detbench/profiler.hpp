#pragma once
#include <array>
#include <map>
#include <string>
#include <vector>

#include "detbench/graph.hpp"

namespace detbench {

struct AnalysisRow {
    std::string name;
    Component component = Component::Backbone;
    size_t params = 0;
    long long macs = 0;  // multiply-accumulate count at the analysed size
};

// "Gflops" follows the convention that reproduces the published totals:
// 2 x multiply-accumulates / 1e9. Elementwise, pooling, resize, and concat
// nodes carry zero cost; BN (pre-fold) costs 2 * c * px.
inline double gflops_from_macs(long long macs) { return 2.0 * macs / 1e9; }
inline double mparams(size_t params) { return params / 1e6; }

struct AnalysisReport {
    std::string model;
    int input_size = 416;
    std::vector<AnalysisRow> rows;
    std::array<size_t, 3> params_by{};   // indexed by Component
    std::array<long long, 3> macs_by{};
    size_t params_total = 0;
    long long macs_total = 0;
    double map_value = -1;  // <0: no published value attached
    std::string map_note;   // always "(paper-reported)" when attached

    size_t params(Component c) const {
        return params_by[static_cast<int>(c)];
    }
    long long macs(Component c) const { return macs_by[static_cast<int>(c)]; }
    double gflops(Component c) const { return gflops_from_macs(macs(c)); }
    double gflops_total() const { return gflops_from_macs(macs_total); }
};

// Parameter counts are resolution-independent; MACs are evaluated at the
// graph's own input size.
AnalysisReport count_params(const Graph& g);
// Re-evaluates MACs at a different square input size (must be a positive
// multiple of 32). Spatial sizes rescale per node stride; 1x1-spatial nodes
// (squeeze-excite internals) stay fixed.
AnalysisReport count_flops(const Graph& g, int input_hw);
AnalysisReport analyze(const Graph& g);  // both, at the graph's input size

std::string report_to_json(const AnalysisReport& r, bool per_node = true);
std::string report_to_csv(const AnalysisReport& r);
std::string report_to_text(const AnalysisReport& r);

struct Breakdown {
    double backbone_pct = 0, fpn_pct = 0, head_pct = 0;
};
// Static cost attribution by MACs.
Breakdown static_breakdown(const AnalysisReport& r);

// ---- published-table metadata (transcribed, never computed) ----

struct PaperRow {
    std::string label;   // row label as printed
    std::string preset;  // preset reproducing the row
    std::map<std::string, double> values;  // params_m, gflops, *_latency_ms, map
};

struct PaperTable {
    std::string name;   // table1..table5
    std::string title;
    std::string scope;  // "backbone" or "total"
    std::vector<PaperRow> rows;
};

std::vector<PaperTable> load_paper_tables(const std::string& path);
// First table (in table order) that lists the preset decides its mAP.
double paper_map_for(const std::vector<PaperTable>& tables,
                     const std::string& preset);
std::string default_tables_path();

void attach_map_metadata(AnalysisReport& r,
                         const std::vector<PaperTable>& tables,
                         const std::string& preset);

// ---- table verification (params/Gflops cells + orderings) ----

struct VerifyCell {
    std::string table, label, preset, metric;
    double computed = 0, published = 0, rel_err_pct = 0, tolerance_pct = 0;
    bool pass = false;
    bool skipped = false;  // latency / mAP: not verifiable by construction
};

struct VerifyOrdering {
    std::string table, metric;
    bool pass = false;
    std::vector<std::string> violations;
};

struct VerifyResult {
    std::vector<VerifyCell> cells;
    std::vector<VerifyOrdering> orderings;
    bool all_pass = false;
};

VerifyResult verify_tables(const std::string& tables_path);
std::string verify_result_to_text(const VerifyResult& r);
std::string verify_result_to_json(const VerifyResult& r);

}  // namespace detbench
