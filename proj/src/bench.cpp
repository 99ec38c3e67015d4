#include "detbench/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <random>
#include <stdexcept>
#include <thread>

#include "detbench/blocks.hpp"
#include "detbench/builder.hpp"
#include "json.hpp"

namespace detbench {

namespace {

using json = nlohmann::ordered_json;
using clk = std::chrono::steady_clock;

double ms_between(clk::time_point a, clk::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
}

double vec_mean(const std::vector<double>& v) {
    if (v.empty()) return 0;
    double s = 0;
    for (double x : v) s += x;
    return s / v.size();
}

double vec_median(std::vector<double> v) {
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double vec_p95(std::vector<double> v) {
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end());
    size_t idx = static_cast<size_t>(std::ceil(0.95 * v.size()));
    return v[std::min(idx == 0 ? 0 : idx - 1, v.size() - 1)];
}

double vec_stddev(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0;
    double s = 0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / (v.size() - 1));
}

std::string read_cpu_model() {
    std::ifstream in("/proc/cpuinfo");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("model name", 0) == 0) {
            size_t pos = line.find(':');
            if (pos == std::string::npos) break;
            size_t b = line.find_first_not_of(" \t", pos + 1);
            return b == std::string::npos ? "unknown" : line.substr(b);
        }
    }
    return "unknown";
}

std::string utc_timestamp() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Per-node timing cost (clock reads + dispatch), estimated on a chain of
// no-op activations over a tiny tensor. Subtracting it is left to the
// reader; it is reported so component sums can be sanity-checked against
// the wall-clock total.
double measure_node_overhead_ms() {
    GraphBuilder b;
    b.g.model_name = "overhead_calibration";
    int x = b.input(1, 8);
    const int kNodes = 64;
    for (int i = 0; i < kNodes; ++i)
        x = b.act(x, Act::Identity, "idle" + std::to_string(i));
    Tensor in(1, 1, 8, 8, 0.5f);
    std::vector<Tensor> outs;
    std::vector<double> node_ms;
    b.g.forward(in, outs, &node_ms);  // warm
    std::vector<double> totals;
    totals.reserve(32);
    for (int i = 0; i < 32; ++i) {
        auto t0 = clk::now();
        b.g.forward(in, outs, &node_ms);
        auto t1 = clk::now();
        totals.push_back(ms_between(t0, t1));
    }
    return vec_median(totals) / kNodes;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        q += c;
        if (c == '"') q += '"';
    }
    q += '"';
    return q;
}

}  // namespace

void check_thread_env() {
    if (const char* env = std::getenv("DETBENCH_THREADS")) {
        if (std::string(env) != "1")
            throw std::invalid_argument(
                "DETBENCH_THREADS=" + std::string(env) +
                " is not supported: the timing protocol is single-threaded; "
                "unset it or set it to 1");
    }
}

Breakdown component_breakdown(const LatencyReport& lat) {
    double s = lat.component_mean_ms[0] + lat.component_mean_ms[1] +
               lat.component_mean_ms[2];
    Breakdown b;
    if (s > 0) {
        b.backbone_pct = 100.0 * lat.component_mean_ms[0] / s;
        b.fpn_pct = 100.0 * lat.component_mean_ms[1] / s;
        b.head_pct = 100.0 * lat.component_mean_ms[2] / s;
    }
    return b;
}

Breakdown component_breakdown(const AnalysisReport& rep,
                              const LatencyReport& lat) {
    if (rep.model != lat.model)
        throw std::invalid_argument(
            "component_breakdown: analysis is for '" + rep.model +
            "' but latency report is for '" + lat.model + "'");
    return component_breakdown(lat);
}

LatencyReport run_bench(const Graph& g, const BenchConfig& cfg) {
    if (cfg.batch != 1)
        throw std::invalid_argument(
            "bench protocol fixes batch=1, got " + std::to_string(cfg.batch));
    if (cfg.threads != 1)
        throw std::invalid_argument("bench protocol fixes threads=1, got " +
                                    std::to_string(cfg.threads));
    if (cfg.warmup_iters < 0 || cfg.measure_iters <= 0)
        throw std::invalid_argument(
            "bench: warmup must be >= 0 and iters >= 1");
    check_thread_env();

    // Timed path runs with BN folded into the convs; accounting elsewhere
    // stays on the unfolded graph.
    Graph timed = g.fold_batchnorm();

    std::mt19937 rng(cfg.seed);
    std::normal_distribution<float> dist(0.f, 1.f);
    Tensor x(1, timed.input_channels, timed.input_size, timed.input_size);
    for (float& v : x.data) v = dist(rng);

    std::vector<Tensor> outs;
    std::vector<double> node_ms;
    for (int i = 0; i < cfg.warmup_iters; ++i) timed.forward(x, outs);

    LatencyReport r;
    r.model = timed.model_name;
    r.cfg = cfg;
    r.cfg.input_size = timed.input_size;  // the compiled size is what ran
    r.iter_total_ms.reserve(cfg.measure_iters);
    for (auto& v : r.comp_iter_ms) v.reserve(cfg.measure_iters);

    for (int i = 0; i < cfg.measure_iters; ++i) {
        auto t0 = clk::now();
        timed.forward(x, outs, &node_ms);
        auto t1 = clk::now();
        r.iter_total_ms.push_back(ms_between(t0, t1));
        double comp[3] = {0, 0, 0};
        for (size_t k = 0; k < timed.nodes.size(); ++k)
            comp[static_cast<int>(timed.nodes[k].component)] += node_ms[k];
        for (int c = 0; c < 3; ++c) r.comp_iter_ms[c].push_back(comp[c]);
    }

    for (int c = 0; c < 3; ++c)
        r.component_mean_ms[c] = vec_mean(r.comp_iter_ms[c]);
    r.median_ms = vec_median(r.iter_total_ms);
    r.mean_ms = vec_mean(r.iter_total_ms);
    r.p95_ms = vec_p95(r.iter_total_ms);
    double sd = vec_stddev(r.iter_total_ms, r.mean_ms);
    r.cv_pct = r.mean_ms > 0 ? 100.0 * sd / r.mean_ms : 0;
    r.unstable = r.cv_pct > 15.0;
    r.overhead_ms_per_node = measure_node_overhead_ms();
    r.cpu_model = read_cpu_model();
    r.hardware_threads = std::thread::hardware_concurrency();
    r.timestamp = utc_timestamp();
    return r;
}

std::string latency_report_to_json(const LatencyReport& r) {
    json j;
    j["model"] = r.model;
    j["config"] = {{"warmup_iters", r.cfg.warmup_iters},
                   {"measure_iters", r.cfg.measure_iters},
                   {"batch", r.cfg.batch},
                   {"threads", r.cfg.threads},
                   {"input_size", r.cfg.input_size},
                   {"seed", r.cfg.seed}};
    j["latency_ms"] = {{"median", r.median_ms},
                       {"mean", r.mean_ms},
                       {"p95", r.p95_ms},
                       {"cv_pct", r.cv_pct},
                       {"unstable", r.unstable}};
    Breakdown b = component_breakdown(r);
    j["components_ms"] = {{"backbone", r.component_ms(Component::Backbone)},
                          {"fpn", r.component_ms(Component::Fpn)},
                          {"head", r.component_ms(Component::Head)}};
    j["breakdown_pct"] = {{"backbone", b.backbone_pct},
                          {"fpn", b.fpn_pct},
                          {"head", b.head_pct}};
    j["overhead_ms_per_node"] = r.overhead_ms_per_node;
    j["environment"] = {{"cpu_model", r.cpu_model},
                        {"hardware_threads", r.hardware_threads},
                        {"timestamp", r.timestamp}};
    j["iterations"] = {{"total_ms", r.iter_total_ms},
                       {"backbone_ms", r.comp_iter_ms[0]},
                       {"fpn_ms", r.comp_iter_ms[1]},
                       {"head_ms", r.comp_iter_ms[2]}};
    return j.dump(2) + "\n";
}

bool run_sweep(const std::vector<ModelSpec>& models, const BenchConfig& cfg,
               const SweepOutputs& out, std::ostream& log) {
    check_thread_env();  // fail the whole sweep early, not row by row
    std::vector<ModelSpec> sorted = models;
    std::sort(sorted.begin(), sorted.end(),
              [](const ModelSpec& a, const ModelSpec& b) {
                  return a.name < b.name;
              });

    std::vector<PaperTable> tables;
    try {
        tables = load_paper_tables(
            out.tables_path.empty() ? default_tables_path() : out.tables_path);
    } catch (const std::exception& e) {
        log << "note: running without published metadata, mAP column stays "
               "empty ("
            << e.what() << ")\n";
    }

    struct Row {
        std::string name;
        AnalysisReport rep;
        LatencyReport lat;
        bool ok = false;
        std::string error;
    };
    std::vector<Row> rows;
    rows.reserve(sorted.size());
    bool all_ok = true;

    for (size_t i = 0; i < sorted.size(); ++i) {
        Row row;
        row.name = sorted[i].name;
        log << "[" << (i + 1) << "/" << sorted.size() << "] " << row.name
            << ": " << std::flush;
        try {
            Graph g = compile(sorted[i]);
            row.rep = analyze(g);
            if (!tables.empty()) attach_map_metadata(row.rep, tables, row.name);
            row.lat = run_bench(g, cfg);
            row.ok = true;
            log << fmt("%.4f M params", mparams(row.rep.params_total)) << ", "
                << fmt("%.4f Gflops", row.rep.gflops_total()) << ", "
                << fmt("%.4f ms median", row.lat.median_ms)
                << (row.lat.unstable ? "  [unstable]" : "") << "\n";
        } catch (const std::exception& e) {
            row.error = e.what();
            all_ok = false;
            log << "FAILED: " << row.error << "\n";
        }
        rows.push_back(std::move(row));
    }

    std::ofstream csv(out.csv_path);
    if (!csv)
        throw std::runtime_error("cannot write csv output: " + out.csv_path);
    csv << "name,params_m,gflops,latency_ms,map,status\n";
    for (const Row& row : rows) {
        if (row.ok) {
            csv << row.name << ',' << fmt("%.4f", mparams(row.rep.params_total))
                << ',' << fmt("%.4f", row.rep.gflops_total()) << ','
                << fmt("%.4f", row.lat.median_ms) << ','
                << (row.rep.map_value >= 0 ? fmt("%.1f", row.rep.map_value)
                                           : std::string())
                << ",ok\n";
        } else {
            csv << row.name << ",,,,," << csv_field("error: " + row.error)
                << "\n";
        }
    }
    csv.close();

    json scat = json::array();
    for (const Row& row : rows) {
        if (!row.ok) continue;
        json p;
        p["label"] = row.name;
        p["x"] = row.lat.median_ms;
        if (row.rep.map_value >= 0)
            p["y"] = row.rep.map_value;
        else
            p["y"] = nullptr;
        p["params_m"] = mparams(row.rep.params_total);
        scat.push_back(std::move(p));
    }
    std::ofstream sc(out.scatter_path);
    if (!sc)
        throw std::runtime_error("cannot write scatter output: " +
                                 out.scatter_path);
    sc << scat.dump(2) << "\n";

    return all_ok;
}

}  // namespace detbench
