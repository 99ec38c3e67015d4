#pragma once
#include <array>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "detbench/graph.hpp"
#include "detbench/profiler.hpp"
#include "detbench/specs.hpp"

namespace detbench {

struct BenchConfig {
    int warmup_iters = 50;
    int measure_iters = 300;
    int batch = 1;    // fixed by protocol
    int threads = 1;  // fixed by protocol
    int input_size = 416;
    uint32_t seed = 42;
};

struct LatencyReport {
    std::string model;
    BenchConfig cfg;
    std::vector<double> iter_total_ms;               // per measured iteration
    std::array<std::vector<double>, 3> comp_iter_ms; // by Component, per iter
    std::array<double, 3> component_mean_ms{};       // by Component
    double median_ms = 0, mean_ms = 0, p95_ms = 0;
    double cv_pct = 0;      // stddev / mean, percent
    bool unstable = false;  // cv above 15%
    double overhead_ms_per_node = 0;  // timer + dispatch cost estimate
    std::string cpu_model;
    unsigned hardware_threads = 0;
    std::string timestamp;

    double component_ms(Component c) const {
        return component_mean_ms[static_cast<int>(c)];
    }
};

// Percentage attribution over {backbone, fpn, head}; sums to 100.
Breakdown component_breakdown(const LatencyReport& lat);
// Same, but cross-checked against the static analysis of the same model;
// errors if the two reports describe different models.
Breakdown component_breakdown(const AnalysisReport& rep,
                              const LatencyReport& lat);

// Folds BN, generates a deterministic random input from cfg.seed, runs
// warmup then measured iterations, single thread throughout.
LatencyReport run_bench(const Graph& g, const BenchConfig& cfg);

std::string latency_report_to_json(const LatencyReport& r);

// Errors if DETBENCH_THREADS is set to anything but "1".
void check_thread_env();

struct SweepOutputs {
    std::string csv_path;      // rollup rows, sorted by model name
    std::string scatter_path;  // latency/mAP scatter points
    std::string tables_path;   // published metadata for the mAP column
};

// Returns false if any model failed (its row records the error and the
// sweep continues).
bool run_sweep(const std::vector<ModelSpec>& models, const BenchConfig& cfg,
               const SweepOutputs& out, std::ostream& log);

}  // namespace detbench
