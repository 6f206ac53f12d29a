// sqg: scenario driver.  Subcommands wrap one module each; `suite` runs
// the built-in verification batch and `check` re-validates an emitted
// summary.json.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <algorithm>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sqg/scenarios.hpp"

namespace {

std::string resolve_out_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("SQG_OUT_DIR"); env && *env) return env;
    return "out";
}

std::string stem_of(const std::string& path) {
    auto slash = path.find_last_of('/');
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    auto dot = base.find_last_of('.');
    return dot == std::string::npos ? base : base.substr(0, dot);
}

int run_one(const std::string& module, const std::string& task, const std::string& config_path,
            const std::string& out_dir, bool quiet) {
    sqg::Scenario s;
    s.module = module;
    s.config = sqg::Config::parse_file(config_path);
    if (!s.config.has("task.name") && task[0]) s.config.set("task.name", task);
    s.name = s.config.str("scenario.name", stem_of(config_path));
    s.thresholds = sqg::thresholds_from_config(s.config);
    if (s.thresholds.empty())
        throw sqg::config_error(config_path + ": no [thresholds] section; nothing to validate");

    std::vector<sqg::RunReport> reports = sqg::run_scenarios({s}, out_dir);
    sqg::emit_report(reports, out_dir);
    if (!quiet) std::cout << sqg::report_table(reports);
    const sqg::RunReport& r = reports.front();
    if (r.error) {
        std::cerr << "sqg: [" << r.error_kind << "] " << r.message << "\n";
        return r.error_kind == "config" ? 2 : 3;
    }
    return r.passed() ? 0 : 1;
}

int run_suite(const std::string& out_dir, bool quiet, const std::vector<std::string>& only) {
    std::vector<sqg::Scenario> list = sqg::acceptance_suite();
    if (!only.empty()) {
        std::vector<sqg::Scenario> kept;
        for (auto& s : list)
            if (std::find(only.begin(), only.end(), s.name) != only.end())
                kept.push_back(std::move(s));
        if (kept.empty()) throw sqg::config_error("suite: no scenario matches --only filter");
        list = std::move(kept);
    }
    std::vector<sqg::RunReport> reports = sqg::run_scenarios(list, out_dir);
    sqg::emit_report(reports, out_dir);
    if (!quiet) std::cout << sqg::report_table(reports);
    int code = 0;
    for (const auto& r : reports) {
        if (r.error) {
            std::cerr << "sqg: " << r.scenario << ": [" << r.error_kind << "] " << r.message
                      << "\n";
            code = std::max(code, r.error_kind == "config" ? 2 : 3);
        } else if (!r.passed()) {
            code = std::max(code, 1);
        }
    }
    return code;
}

int run_check(const std::string& summary_path) {
    std::ifstream in(summary_path);
    if (!in) {
        std::cerr << "sqg check: cannot open '" << summary_path << "'\n";
        return 2;
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        std::cerr << "sqg check: parse failure: " << e.what() << "\n";
        return 2;
    }
    int pass = 0, fail = 0;
    for (const auto& s : doc.at("scenarios")) {
        bool ok = s.at("pass").get<bool>();
        // recompute from the per-threshold verdicts; a summary whose
        // rollup disagrees with its own rows is corrupt
        bool agg = !s.contains("error");
        for (const auto& t : s.at("thresholds")) agg = agg && t.at("pass").get<bool>();
        if (ok != agg) {
            std::cerr << "sqg check: scenario '" << s.at("scenario").get<std::string>()
                      << "': rollup disagrees with threshold rows\n";
            return 2;
        }
        (ok ? pass : fail)++;
    }
    if (pass != doc.at("passed").get<int>() || fail != doc.at("failed").get<int>()) {
        std::cerr << "sqg check: pass/fail counters disagree with scenario list\n";
        return 2;
    }
    std::cout << summary_path << ": " << pass << " passed, " << fail << " failed\n";
    return fail == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dissipative SQG estimate laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_flag, summary_path;
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "suppress the result table on stdout");

    struct Sub {
        const char* cmd;
        const char* module;
        const char* task;  // default task.name when the config omits it
        const char* help;
    };
    const Sub subs[] = {
        {"run", "sqg_solver", "run", "evolve theta and validate run diagnostics"},
        {"picard", "sqg_solver", "picard", "Picard iteration contraction check"},
        {"geometry", "extension_geometry", "flatten",
         "boundary flattening diffeomorphism checks"},
        {"intertwine", "localization_extension", "",
         "localization / extension operator checks"},
        {"kernels", "kernel_lab", "", "kernel normalization and certificate checks"},
    };
    std::vector<CLI::App*> cmds;
    for (const auto& s : subs) {
        CLI::App* c = app.add_subcommand(s.cmd, s.help);
        c->add_option("config", config_path, "scenario config file")->required();
        c->add_option("-o,--out", out_flag, "output directory (default $SQG_OUT_DIR or ./out)");
        cmds.push_back(c);
    }
    CLI::App* suite = app.add_subcommand("suite", "run the built-in verification suite");
    suite->add_option("-o,--out", out_flag, "output directory (default $SQG_OUT_DIR or ./out)");
    std::vector<std::string> only;
    suite->add_option("--only", only, "restrict to the named scenarios");
    CLI::App* check = app.add_subcommand("check", "re-validate an emitted summary.json");
    check->add_option("summary", summary_path, "path to summary.json")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        for (size_t i = 0; i < cmds.size(); ++i)
            if (cmds[i]->parsed())
                return run_one(subs[i].module, subs[i].task, config_path,
                               resolve_out_dir(out_flag), quiet);
        if (suite->parsed()) return run_suite(resolve_out_dir(out_flag), quiet, only);
        if (check->parsed()) return run_check(summary_path);
    } catch (const sqg::config_error& e) {
        std::cerr << "sqg: config error: " << e.what() << "\n";
        return 2;
    } catch (const sqg::numerical_error& e) {
        std::cerr << "sqg: numeric failure: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
