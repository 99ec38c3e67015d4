#include <fstream>
#include <sstream>
#include <string>

#include "detbench/bench.hpp"
#include "detbench/builder.hpp"
#include "detbench/profiler.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace detbench;

// Downstream consumers key on the JSON layout, so the outline of every
// produced document is pinned against a checked-in golden copy. Values are
// free to change; keys, nesting, and value kinds are not.

namespace {

const char* kind_of(const nlohmann::json& v) {
    if (v.is_string()) return "string";
    if (v.is_boolean()) return "boolean";
    if (v.is_null()) return "null";
    if (v.is_number()) return "number";
    return "?";
}

void outline(const nlohmann::json& v, const std::string& path,
             std::ostream& os) {
    if (v.is_object()) {
        if (v.empty()) os << path << ": object(empty)\n";
        for (auto it = v.begin(); it != v.end(); ++it)
            outline(it.value(), path + "." + it.key(), os);
    } else if (v.is_array()) {
        if (v.empty()) {
            os << path << ": array(empty)\n";
        } else {
            os << path << ": array\n";
            outline(v[0], path + "[]", os);
        }
    } else {
        os << path << ": " << kind_of(v) << "\n";
    }
}

std::string outline_of(const std::string& text) {
    std::ostringstream os;
    outline(nlohmann::json::parse(text), "$", os);
    return os.str();
}

void compare_to_golden(const std::string& name, const std::string& actual) {
    std::string golden_path =
        std::string(DETBENCH_GOLDEN_DIR) + "/" + name + ".txt";
    std::ifstream in(golden_path);
    if (!in) std::ofstream(name + ".actual") << actual;
    REQUIRE_MESSAGE(bool(in), "missing golden file ", golden_path,
                    "; computed outline written to ", name, ".actual");
    std::stringstream want;
    want << in.rdbuf();
    if (actual != want.str()) {
        // Leave the fresh outline next to the binary for diffing.
        std::ofstream(name + ".actual") << actual;
    }
    CHECK_MESSAGE(actual == want.str(), "schema drifted from ", golden_path,
                  "\n--- expected ---\n", want.str(), "--- actual ---\n",
                  actual);
}

}  // namespace

TEST_CASE("analysis JSON layout is stable") {
    Graph g = compile(preset("picodet_ds"));
    AnalysisReport r = analyze(g);
    attach_map_metadata(r, load_paper_tables(default_tables_path()),
                        "picodet_ds");
    compare_to_golden("analyze_schema", outline_of(report_to_json(r)));
}

TEST_CASE("latency JSON layout is stable") {
    ModelSpec m = preset("picodet_ds");
    m.input_size = 128;
    BenchConfig cfg;
    cfg.warmup_iters = 1;
    cfg.measure_iters = 3;
    LatencyReport r = run_bench(compile(m), cfg);
    compare_to_golden("bench_schema", outline_of(latency_report_to_json(r)));
}

TEST_CASE("model spec JSON layout is stable") {
    // picodet_ds_x2 exercises every optional backbone/fpn field family.
    compare_to_golden("spec_schema", outline_of(to_json(preset("picodet_ds_x2"))));
}

TEST_CASE("verification JSON layout is stable") {
    VerifyResult v = verify_tables(default_tables_path());
    compare_to_golden("verify_schema", outline_of(verify_result_to_json(v)));
}
