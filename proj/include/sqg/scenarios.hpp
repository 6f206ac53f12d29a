#pragma once

#include <map>
#include <string>
#include <vector>

#include "sqg/config.hpp"
#include "sqg/intertwine.hpp"

namespace sqg {

inline constexpr const char* kVersion = "0.1.0";

// one acceptance threshold: metric op bound, op in { "<=", ">=", "<", ">" }
struct ThresholdSpec {
    std::string metric;
    std::string op;
    double bound = 0;

    bool eval(double value) const;
    std::string text() const;
};

struct ThresholdResult {
    ThresholdSpec spec;
    double value = 0;
    bool pass = false;
};

struct Scenario {
    std::string name;    // unique
    std::string module;  // spectral_core | sqg_solver | extension_geometry |
                         // localization_extension | kernel_lab
    Config config;
    std::vector<ThresholdSpec> thresholds;
};

struct RunReport {
    std::string scenario;
    std::string module;
    std::uint64_t seed = 0;
    std::string version = kVersion;
    std::map<std::string, double> metrics;
    std::vector<ThresholdResult> results;
    std::vector<std::string> artifacts;
    double wall_time = 0;  // seconds; kept out of the JSON summary
    bool error = false;
    std::string error_kind;  // "config" | "numeric"
    std::string message;

    bool passed() const;
};

// thresholds parsed from the [thresholds] section: `metric = <op> <bound>`
std::vector<ThresholdSpec> thresholds_from_config(const Config& c);

// Dispatch one module computation.  `artifacts` collects paths of emitted
// files (CSV and field dumps under out_dir); out_dir may be empty to skip
// artifact emission.
std::map<std::string, double> run_module(const std::string& module, const Config& c,
                                         const std::string& out_dir,
                                         std::vector<std::string>& artifacts);

RunReport run_scenario(const Scenario& s, const std::string& out_dir);

// Runs scenarios in order with result reuse: scenarios sharing the same
// (module, config) pair are computed once.
std::vector<RunReport> run_scenarios(const std::vector<Scenario>& list,
                                     const std::string& out_dir);

// the named acceptance scenarios, one (or one shared run) per criterion
std::vector<Scenario> acceptance_suite();

std::string report_json(const std::vector<RunReport>& reports);
std::string report_table(const std::vector<RunReport>& reports);
// writes summary.json + summary.txt (+ summary_timings.txt with the wall
// times, externalized so the JSON is byte-stable across reruns)
void emit_report(const std::vector<RunReport>& reports, const std::string& out_dir);

}  // namespace sqg
