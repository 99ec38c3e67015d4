#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "detbench/bench.hpp"
#include "detbench/blocks.hpp"
#include "detbench/builder.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace detbench;

namespace {

// Convolution stack big enough to time reliably, small enough to stay fast.
Graph backbone_only_graph() {
    GraphBuilder b;
    b.g.model_name = "conv_stack";
    int x = b.input(3, 64);
    x = b.conv_bn_act(x, 32, 3, 2, Act::SiLU, "c1");
    x = b.conv_bn_act(x, 64, 3, 2, Act::SiLU, "c2");
    x = b.conv_bn_act(x, 64, 3, 1, Act::SiLU, "c3");
    b.g.taps["out"] = x;
    return std::move(b.g);
}

BenchConfig quick_cfg(int warmup, int iters) {
    BenchConfig cfg;
    cfg.warmup_iters = warmup;
    cfg.measure_iters = iters;
    return cfg;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("a backbone-only graph attributes all of its time to the backbone") {
    LatencyReport r = run_bench(backbone_only_graph(), quick_cfg(1, 8));
    CHECK(r.model == "conv_stack");
    CHECK(r.iter_total_ms.size() == 8);
    for (const auto& v : r.comp_iter_ms) CHECK(v.size() == 8);
    CHECK(r.median_ms > 0);
    CHECK(r.mean_ms > 0);
    CHECK(r.p95_ms >= r.median_ms);
    CHECK(r.cv_pct >= 0);
    CHECK(r.overhead_ms_per_node >= 0);
    CHECK(r.overhead_ms_per_node < 1.0);
    CHECK(!r.cpu_model.empty());
    CHECK(r.hardware_threads >= 1);
    CHECK(r.timestamp.find('T') != std::string::npos);
    Breakdown b = component_breakdown(r);
    CHECK(b.backbone_pct == doctest::Approx(100.0));
    CHECK(b.fpn_pct == doctest::Approx(0.0));
    CHECK(b.head_pct == doctest::Approx(0.0));
}

TEST_CASE("component times add up to the measured iteration total") {
    ModelSpec m = preset("picodet_ds");
    m.input_size = 128;  // same structure, desk-scale timings
    Graph g = compile(m);
    LatencyReport r = run_bench(g, quick_cfg(3, 25));
    double sum = r.component_ms(Component::Backbone) +
                 r.component_ms(Component::Fpn) +
                 r.component_ms(Component::Head);
    CHECK(sum > 0);
    // Per-node clock reads make the parts sum slightly below the outer
    // wall-clock mean; both live on the same scale.
    CHECK(sum == doctest::Approx(r.mean_ms).epsilon(0.05));
    Breakdown b = component_breakdown(r);
    CHECK(b.backbone_pct + b.fpn_pct + b.head_pct ==
          doctest::Approx(100.0).epsilon(1e-9));
    CHECK(b.backbone_pct > 0);
    CHECK(b.head_pct > 0);
}

TEST_CASE("cross-checked breakdown rejects mismatched reports") {
    ModelSpec m = preset("picodet_ds");
    m.input_size = 128;
    Graph g = compile(m);
    AnalysisReport rep = analyze(g);
    LatencyReport lat = run_bench(g, quick_cfg(1, 5));
    Breakdown direct = component_breakdown(lat);
    Breakdown checked = component_breakdown(rep, lat);
    CHECK(checked.backbone_pct == doctest::Approx(direct.backbone_pct));

    AnalysisReport other = analyze(compile(preset("picodet_bs")));
    CHECK_THROWS_WITH_AS(component_breakdown(other, lat),
                         doctest::Contains("component_breakdown"),
                         std::invalid_argument);
}

TEST_CASE("back-to-back runs of one graph agree on the median") {
    Graph g = backbone_only_graph();
    LatencyReport a = run_bench(g, quick_cfg(3, 30));
    LatencyReport b = run_bench(g, quick_cfg(3, 30));
    CHECK(std::abs(a.median_ms - b.median_ms) /
              std::max(a.median_ms, b.median_ms) <
          0.30);
}

TEST_CASE("bench fixes its protocol: batch 1, one thread, sane iteration "
          "counts") {
    Graph g = backbone_only_graph();
    BenchConfig cfg = quick_cfg(0, 1);
    cfg.batch = 2;
    CHECK_THROWS_WITH_AS(run_bench(g, cfg), doctest::Contains("batch"),
                         std::invalid_argument);
    cfg = quick_cfg(0, 1);
    cfg.threads = 4;
    CHECK_THROWS_WITH_AS(run_bench(g, cfg), doctest::Contains("threads"),
                         std::invalid_argument);
    cfg = quick_cfg(0, 0);
    CHECK_THROWS_AS(run_bench(g, cfg), std::invalid_argument);
    cfg = quick_cfg(-1, 1);
    CHECK_THROWS_AS(run_bench(g, cfg), std::invalid_argument);
}

TEST_CASE("the thread environment guard accepts only single-threaded runs") {
    check_thread_env();  // not set: fine
    setenv("DETBENCH_THREADS", "1", 1);
    CHECK_NOTHROW(check_thread_env());
    setenv("DETBENCH_THREADS", "4", 1);
    CHECK_THROWS_WITH_AS(check_thread_env(),
                         doctest::Contains("DETBENCH_THREADS"),
                         std::invalid_argument);
    CHECK_THROWS_AS(run_bench(backbone_only_graph(), quick_cfg(0, 1)),
                    std::invalid_argument);
    unsetenv("DETBENCH_THREADS");
    CHECK_NOTHROW(check_thread_env());
}

TEST_CASE("latency report JSON carries the config echo and a full breakdown") {
    Graph g = backbone_only_graph();
    BenchConfig cfg = quick_cfg(2, 7);
    cfg.seed = 123;
    LatencyReport r = run_bench(g, cfg);
    auto j = nlohmann::json::parse(latency_report_to_json(r));
    CHECK(j["model"] == "conv_stack");
    CHECK(j["config"]["warmup_iters"] == 2);
    CHECK(j["config"]["measure_iters"] == 7);
    CHECK(j["config"]["batch"] == 1);
    CHECK(j["config"]["threads"] == 1);
    CHECK(j["config"]["seed"] == 123);
    CHECK(j["config"]["input_size"] == 64);  // the compiled size is reported
    CHECK(j["latency_ms"]["median"].get<double>() > 0);
    double pct = j["breakdown_pct"]["backbone"].get<double>() +
                 j["breakdown_pct"]["fpn"].get<double>() +
                 j["breakdown_pct"]["head"].get<double>();
    CHECK(pct == doctest::Approx(100.0));
    CHECK(j["iterations"]["total_ms"].size() == 7);
    CHECK(j["iterations"]["head_ms"].size() == 7);
    CHECK(j["environment"]["hardware_threads"].get<unsigned>() >= 1);
}

TEST_CASE("sweep writes sorted rows, scatter points, and error rows") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "detbench_test_sweep";
    fs::create_directories(dir);
    SweepOutputs out;
    out.csv_path = (dir / "sweep.csv").string();
    out.scatter_path = (dir / "scatter.json").string();

    ModelSpec small = preset("picodet_ds");
    small.input_size = 128;
    ModelSpec custom;
    custom.name = "aaa_custom";
    custom.input_size = 128;
    custom.backbone.stage_depths = {1, 1, 1, 1};
    ModelSpec broken;
    broken.name = "zz_bad";
    broken.backbone.main_op = "Nope";

    std::ostringstream log;
    // Passed out of name order on purpose; rows must come out sorted.
    bool ok = run_sweep({small, broken, custom}, quick_cfg(1, 3), out, log);
    CHECK_FALSE(ok);
    CHECK(log.str().find("FAILED") != std::string::npos);

    std::string csv = slurp(out.csv_path);
    CHECK(csv.find("name,params_m,gflops,latency_ms,map,status\n") == 0);
    size_t a = csv.find("aaa_custom");
    size_t p = csv.find("picodet_ds");
    size_t z = csv.find("zz_bad");
    REQUIRE(a != std::string::npos);
    REQUIRE(p != std::string::npos);
    REQUIRE(z != std::string::npos);
    CHECK(a < p);
    CHECK(p < z);
    CHECK(csv.find("error:") != std::string::npos);
    // picodet_ds keeps its published mAP column even at the smaller size.
    CHECK(csv.substr(p, csv.find('\n', p) - p).find(",ok") !=
          std::string::npos);

    auto scat = nlohmann::json::parse(slurp(out.scatter_path));
    REQUIRE(scat.is_array());
    CHECK(scat.size() == 2);  // failed model contributes no point
    CHECK(scat[0]["label"] == "aaa_custom");
    CHECK(scat[0]["x"].get<double>() > 0);
    CHECK(scat[0]["y"].is_null());  // custom model: no published mAP
    CHECK(scat[1]["label"] == "picodet_ds");
    CHECK(scat[1]["y"].get<double>() > 0);

    // An empty sweep still writes a well-formed, header-only CSV.
    std::ostringstream log2;
    CHECK(run_sweep({}, quick_cfg(1, 1), out, log2));
    CHECK(slurp(out.csv_path) == "name,params_m,gflops,latency_ms,map,status\n");

    fs::remove_all(dir);
}
