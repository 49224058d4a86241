// Command-line front end: sweep, solve and validate.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "foid/foid.hpp"

namespace {

struct Common {
    std::string config;
    std::vector<std::string> strategies;
    std::vector<double> ck;
    std::vector<double> pv;
    std::string out;
    std::string format;
    unsigned workers = 0;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "scenario config file (YAML)")->check(CLI::ExistingFile);
    cmd->add_option("--strategy", c.strategies, "OID, FOID or VoltVAr (repeatable)");
    cmd->add_option("--ck", c.ck, "fairness weight(s) for FOID");
    cmd->add_option("--pv", c.pv, "available PV per household in kW (repeatable)");
    cmd->add_option("--out", c.out, "output directory");
    cmd->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--workers", c.workers, "worker threads (0: all cores)");
}

foid::ScenarioConfig make_config(const Common& c) {
    foid::ScenarioConfig cfg = c.config.empty() ? foid::ScenarioConfig{} : foid::load_config(c.config);
    if (!c.strategies.empty()) {
        cfg.strategies.clear();
        for (const auto& s : c.strategies) cfg.strategies.push_back(foid::parse_strategy(s));
    }
    if (!c.ck.empty()) cfg.c_kappa = c.ck;
    if (!c.pv.empty()) {
        // explicit scenarios replace the grid
        cfg.pv_start = cfg.pv_stop = c.pv.front();
        cfg.extra_pv.assign(c.pv.begin() + 1, c.pv.end());
    }
    if (!c.out.empty()) cfg.output_dir = c.out;
    if (!c.format.empty()) cfg.format = foid::parse_format(c.format);
    if (c.workers) cfg.workers = c.workers;
    cfg.validate();
    return cfg;
}

void report_failures(const std::vector<foid::SweepRow>& rows) {
    for (const auto& r : rows)
        if (r.status != "optimal" && r.status != "converged")
            std::cerr << "warning: " << r.strategy << " ck=" << r.ck << " pv=" << r.scenario_kw << " kW: " << r.status
                      << (r.message.empty() ? "" : " (" + r.message + ")") << '\n';
}

int run_sweep(const Common& c) {
    const auto cfg = make_config(c);
    const auto rows = foid::run_sweep(cfg);
    const auto path = foid::export_rows(rows, cfg.format, cfg.output_dir);
    report_failures(rows);
    std::cout << "wrote " << rows.size() << " rows to " << path.string() << '\n';
    return 0;
}

int run_solve(const Common& c) {
    auto cfg = make_config(c);
    const auto rows = foid::run_sweep(cfg);
    if (c.out.empty()) {
        if (cfg.format == foid::OutputFormat::csv)
            foid::write_csv(rows, std::cout);
        else
            foid::write_json(rows, std::cout);
    } else {
        std::cout << "wrote " << foid::export_rows(rows, cfg.format, cfg.output_dir, "solve").string() << '\n';
    }
    report_failures(rows);
    for (const auto& r : rows)
        if (r.status != "optimal" && r.status != "converged") return 2;
    return 0;
}

int run_validate(const Common& c) {
    Common v = c;
    if (v.strategies.empty()) v.strategies = {"OID"};
    const auto cfg = make_config(v);
    const auto kase = foid::load_case(cfg);
    const auto rows = foid::run_sweep(kase, cfg);
    std::printf("%-11s %-8s %-6s %-16s %-12s %s\n", "scenario_kw", "strategy", "ck", "max_error_pu", "ac_max_v_pu",
                "ac_iterations");
    double worst = 0.0;
    for (const auto& r : rows) {
        if (r.status == "error") {
            std::printf("%-11.6g %-8s %-6.3g %s\n", r.scenario_kw, r.strategy.c_str(), r.ck, "solve failed");
            continue;
        }
        const auto val = foid::validate_row(kase, r);
        worst = std::max(worst, val.max_abs_error_pu);
        std::printf("%-11.6g %-8s %-6.3g %-16.6g %-12.6g %d\n", r.scenario_kw, r.strategy.c_str(), r.ck,
                    val.max_abs_error_pu, val.ac_max_v_pu, val.ac_iterations);
    }
    std::printf("worst linearization error: %.6g pu\n", worst);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fair optimal inverter dispatch on LV feeders"};
    app.require_subcommand(1);
    Common sweep_opts, solve_opts, validate_opts;
    auto* sweep = app.add_subcommand("sweep", "run the full scenario sweep and export the rows");
    add_common(sweep, sweep_opts);
    auto* solve = app.add_subcommand("solve", "solve a single scenario");
    add_common(solve, solve_opts);
    solve->get_option("--pv")->required();
    auto* validate = app.add_subcommand("validate", "report linearization error against the AC power flow");
    add_common(validate, validate_opts);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*sweep) return run_sweep(sweep_opts);
        if (*solve) return run_solve(solve_opts);
        if (*validate) return run_validate(validate_opts);
    } catch (const foid::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
