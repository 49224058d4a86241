#pragma once

// Scenario sweeps over uniform PV uptake: runs OID, FOID and local Volt/VAr
// control per scenario, collects metrics and exports CSV / JSON.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "foid/acflow.hpp"
#include "foid/dispatch.hpp"
#include "foid/error.hpp"
#include "foid/inverter.hpp"
#include "foid/linflow.hpp"
#include "foid/netmodel.hpp"
#include "foid/network_io.hpp"

namespace foid {

// ---------------------------------------------------------------------------
// Case

/// A network ready for dispatch: sensitivities, base-case loads and the
/// household buses that carry inverters (file order).
struct Case {
    NetworkModel net;
    SensitivityMatrices sens;
    InjectionVector loads;
    std::vector<int> household_buses;
    double total_load_kw = 0.0;
    double oversize = 1.1;
    double pf_min = 0.85;

    std::size_t households() const { return household_buses.size(); }

    /// One inverter per household, all with the same available power.
    std::vector<InverterSpec> fleet(double pv_kw) const {
        std::vector<InverterSpec> out;
        for (int bus : household_buses) out.push_back(InverterSpec::sized(bus, pv_kw, oversize, pf_min));
        return out;
    }

    /// Total available PV over total load.
    double ratio(double pv_kw) const {
        return total_load_kw > 0.0 ? static_cast<double>(households()) * pv_kw / total_load_kw : 0.0;
    }

    /// Per-household PV giving a PV:load ratio.
    double pv_for_ratio(double ratio) const { return ratio * total_load_kw / static_cast<double>(households()); }
};

inline Case make_case(NetworkModel net) {
    Case c;
    c.sens = sensitivity_matrices(net);
    c.loads = load_injection(net, c.sens);
    for (auto idx : net.households()) {
        c.household_buses.push_back(net.buses[idx].id);
        c.total_load_kw += net.buses[idx].load_p_kw;
    }
    c.net = std::move(net);
    return c;
}

/// Household loads of the built-in snapshot, kW, ordered along the feeder.
inline const std::vector<double>& builtin_loads_kw() {
    static const std::vector<double> loads{0.45, 0.38, 0.67, 2.23, 0.14, 2.00, 1.34, 3.17, 0.83, 0.23, 0.50, 5.08};
    return loads;
}

/// The 18-bus feeder: six poles 75 m apart, two 25 m drops per pole.
/// Mirrors data/builtin_18bus.yaml.
inline NetworkModel builtin_network() {
    NetworkModel net;
    net.bases.s_base_kva = 75.0;
    net.bases.v_base_v = 415.0 / std::numbers::sqrt3;
    net.frequency_hz = 50.0;
    net.v_nom = 1.0;
    net.v_min = 0.95;
    net.v_max = 1.05;
    net.transformer_s_max_kva = 75.0;
    net.buses.push_back({0, BusKind::slack, 0.0, 0.0});
    for (int p = 1; p <= 5; ++p) net.buses.push_back({p, BusKind::pole, 0.0, 0.0});
    const auto& loads = builtin_loads_kw();
    for (std::size_t k = 0; k < loads.size(); ++k)
        net.buses.push_back({6 + static_cast<int>(k), BusKind::household, loads[k], 0.0});
    for (int p = 0; p < 5; ++p) net.lines.push_back({p, p + 1, 0.075, 0.549, 0.230, 0.055, std::nullopt});
    for (int k = 0; k < 12; ++k) net.lines.push_back({k / 2, 6 + k, 0.025, 0.270, 0.240, 0.072, std::nullopt});
    validate(net);
    return net;
}

inline Case builtin_case() { return make_case(builtin_network()); }

// ---------------------------------------------------------------------------
// Configuration

enum class SweepStrategy { oid, foid, volt_var };

inline const char* to_string(SweepStrategy s) {
    switch (s) {
        case SweepStrategy::oid: return "OID";
        case SweepStrategy::foid: return "FOID";
        case SweepStrategy::volt_var: return "VoltVAr";
    }
    return "?";
}

inline SweepStrategy parse_strategy(const std::string& text) {
    std::string t;
    for (char ch : text) t += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (t == "oid") return SweepStrategy::oid;
    if (t == "foid") return SweepStrategy::foid;
    if (t == "voltvar" || t == "volt_var" || t == "volt/var" || t == "droop") return SweepStrategy::volt_var;
    throw ValidationError("unknown strategy '" + text + "' (expected OID, FOID or VoltVAr)");
}

enum class OutputFormat { csv, json };

inline OutputFormat parse_format(const std::string& text) {
    if (text == "csv") return OutputFormat::csv;
    if (text == "json") return OutputFormat::json;
    throw ValidationError("unknown format '" + text + "' (expected csv or json)");
}

inline FairnessMean parse_fairness_mean(const std::string& text) {
    if (text == "paper") return FairnessMean::h_plus_one;
    if (text == "exact") return FairnessMean::exact;
    throw ValidationError("unknown fairness_mean '" + text + "' (expected paper or exact)");
}

struct ScenarioConfig {
    std::optional<std::filesystem::path> network;  ///< built-in case when empty
    std::vector<SweepStrategy> strategies{SweepStrategy::oid, SweepStrategy::volt_var, SweepStrategy::foid};
    std::vector<double> c_kappa{0.01, 0.05, 0.1};
    double pv_start = 0.0;
    double pv_stop = 12.0;
    double pv_step = 0.8;
    std::vector<double> extra_pv;  ///< scenarios outside the regular grid, kW per household
    CostCoefficients costs;
    std::filesystem::path output_dir = "out";
    OutputFormat format = OutputFormat::csv;
    unsigned workers = 0;  ///< 0: hardware concurrency
    qcqp::SolverOptions solver;
    DroopOptions droop;

    void validate() const {
        if (!(pv_step > 0.0)) throw ValidationError("pv_per_household.step must be positive");
        if (!(pv_stop >= pv_start)) throw ValidationError("pv_per_household.stop must be >= start");
        if (!(pv_start >= 0.0)) throw ValidationError("pv_per_household.start must be >= 0");
        if (strategies.empty()) throw ValidationError("strategies must not be empty");
        const bool has_foid = std::find(strategies.begin(), strategies.end(), SweepStrategy::foid) != strategies.end();
        if (has_foid && c_kappa.empty()) throw ValidationError("FOID needs at least one c_kappa");
        for (double ck : c_kappa)
            if (!(ck >= 0.0)) throw ValidationError("c_kappa values must be >= 0");
        for (double pv : extra_pv)
            if (!(pv >= 0.0)) throw ValidationError("extra_pv values must be >= 0");
        costs.validate();
    }

    /// Sweep points: the regular grid followed by the extra scenarios.
    std::vector<double> pv_points() const {
        std::vector<double> out;
        const auto count = static_cast<long>(std::floor((pv_stop - pv_start) / pv_step + 1e-9));
        for (long k = 0; k <= count; ++k) out.push_back(pv_start + static_cast<double>(k) * pv_step);
        out.insert(out.end(), extra_pv.begin(), extra_pv.end());
        return out;
    }
};

inline ScenarioConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {}) {
    using namespace detail;
    const YAML::Node root = yaml_load_string(text);
    ScenarioConfig cfg;
    if (!root || root.IsNull()) return cfg;
    if (!root.IsMap()) throw ParseError("config file must be a YAML map", 1);

    auto wrap = [](const YAML::Node& node, const std::string& field, auto&& fn) {
        try {
            fn();
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), yaml_line(node), field);
        }
    };

    if (root["network"]) {
        std::filesystem::path p = yaml_get<std::string>(root, "network", "");
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        cfg.network = p;
    }
    if (const auto s = root["strategies"]) {
        if (!s.IsSequence()) throw ParseError("must be a list", yaml_line(s), "strategies");
        cfg.strategies.clear();
        for (std::size_t i = 0; i < s.size(); ++i)
            wrap(s[i], "strategies[" + std::to_string(i) + "]",
                 [&] { cfg.strategies.push_back(parse_strategy(s[i].as<std::string>())); });
    }
    if (const auto ck = root["c_kappa"]) {
        if (!ck.IsSequence()) throw ParseError("must be a list", yaml_line(ck), "c_kappa");
        cfg.c_kappa.clear();
        for (std::size_t i = 0; i < ck.size(); ++i) {
            try {
                cfg.c_kappa.push_back(ck[i].as<double>());
            } catch (const YAML::Exception&) {
                throw ParseError("invalid number", yaml_line(ck[i]), "c_kappa[" + std::to_string(i) + "]");
            }
        }
    }
    if (const auto pv = root["pv_per_household"]) {
        cfg.pv_start = yaml_get_or<double>(pv, "start", "pv_per_household.", cfg.pv_start);
        cfg.pv_stop = yaml_get_or<double>(pv, "stop", "pv_per_household.", cfg.pv_stop);
        cfg.pv_step = yaml_get_or<double>(pv, "step", "pv_per_household.", cfg.pv_step);
    }
    if (const auto ex = root["extra_pv"]) {
        if (!ex.IsSequence()) throw ParseError("must be a list", yaml_line(ex), "extra_pv");
        for (std::size_t i = 0; i < ex.size(); ++i) {
            try {
                cfg.extra_pv.push_back(ex[i].as<double>());
            } catch (const YAML::Exception&) {
                throw ParseError("invalid number", yaml_line(ex[i]), "extra_pv[" + std::to_string(i) + "]");
            }
        }
    }
    if (const auto c = root["costs"]) {
        cfg.costs.a = yaml_get_or<double>(c, "a", "costs.", cfg.costs.a);
        cfg.costs.b = yaml_get_or<double>(c, "b", "costs.", cfg.costs.b);
        cfg.costs.c = yaml_get_or<double>(c, "c", "costs.", cfg.costs.c);
        cfg.costs.d = yaml_get_or<double>(c, "d", "costs.", cfg.costs.d);
        if (c["fairness_mean"])
            wrap(c["fairness_mean"], "costs.fairness_mean", [&] {
                cfg.costs.fairness_mean = parse_fairness_mean(yaml_get<std::string>(c, "fairness_mean", "costs."));
            });
    }
    if (const auto o = root["output"]) {
        if (o["dir"]) cfg.output_dir = yaml_get<std::string>(o, "dir", "output.");
        if (o["format"])
            wrap(o["format"], "output.format",
                 [&] { cfg.format = parse_format(yaml_get<std::string>(o, "format", "output.")); });
    }
    if (root["workers"]) cfg.workers = yaml_get<unsigned>(root, "workers", "");
    if (const auto s = root["solver"]) {
        cfg.solver.tolerance = yaml_get_or<double>(s, "tolerance", "solver.", cfg.solver.tolerance);
        cfg.solver.max_iterations = yaml_get_or<int>(s, "max_iterations", "solver.", cfg.solver.max_iterations);
    }
    wrap(root, "", [&] { cfg.validate(); });
    return cfg;
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
    const std::string text = detail::read_text_file(path);
    try {
        return parse_config(text, path.parent_path());
    } catch (const ParseError& e) {
        throw e.with_prefix(path.string());
    }
}

inline Case load_case(const ScenarioConfig& cfg) {
    return cfg.network ? make_case(load_network(*cfg.network)) : builtin_case();
}

// ---------------------------------------------------------------------------
// Rows and metrics

struct SweepRow {
    double scenario_kw = 0.0;  ///< available PV per household
    double ratio = 0.0;
    std::string strategy;
    double ck = 0.0;
    double total_curtailment_kw = 0.0;
    double losses_kw = 0.0;
    double max_v_pu = 0.0;
    double fairness_variance = 0.0;
    std::vector<double> pc_kw;
    std::vector<double> qc_kvar;
    std::string status;
    std::string message;  ///< diagnostics, not exported

    bool operator==(const SweepRow& o) const {
        return scenario_kw == o.scenario_kw && ratio == o.ratio && strategy == o.strategy && ck == o.ck &&
               total_curtailment_kw == o.total_curtailment_kw && losses_kw == o.losses_kw &&
               max_v_pu == o.max_v_pu && fairness_variance == o.fairness_variance && pc_kw == o.pc_kw &&
               qc_kvar == o.qc_kvar && status == o.status;
    }
};

struct FairnessMetrics {
    double variance = 0.0;        ///< fairness penalty, (H + 1) mean normalization
    double exact_variance = 0.0;  ///< same with the plain mean
    double max_share = 0.0;
    int full_curtailment = 0;     ///< households curtailing (all but 1e-3 kW of) their output
};

/// Metrics from the curtailment shares p_c / p_av of a uniform-PV row.
inline FairnessMetrics fairness_metrics(const SweepRow& row, double full_tolerance_kw = 1e-3) {
    FairnessMetrics m;
    if (!(row.scenario_kw > 0.0) || row.pc_kw.empty()) return m;
    const std::vector<double> pav(row.pc_kw.size(), row.scenario_kw);
    m.variance = fairness_term(row.pc_kw, pav, FairnessMean::h_plus_one);
    m.exact_variance = fairness_term(row.pc_kw, pav, FairnessMean::exact);
    for (double pc : row.pc_kw) {
        m.max_share = std::max(m.max_share, pc / row.scenario_kw);
        if (pc >= row.scenario_kw - full_tolerance_kw) ++m.full_curtailment;
    }
    return m;
}

/// Largest household voltage of a profile. Linear profiles are measured by
/// the real part (the magnitude approximant the limits apply to), AC
/// profiles by the true magnitude.
inline double max_household_voltage(const Case& c, const VoltageProfile& profile, bool linear = true) {
    double vmax = 0.0;
    for (auto idx : c.net.households())
        vmax = std::max(vmax, linear ? profile.v_re(static_cast<Eigen::Index>(idx)) : profile.magnitude(idx));
    return vmax;
}

/// Net injections of a row's setpoints (reduced indexing, per-unit).
inline InjectionVector row_injection(const Case& c, const SweepRow& row) {
    std::vector<double> p_out(row.pc_kw.size());
    for (std::size_t i = 0; i < p_out.size(); ++i) p_out[i] = row.scenario_kw - row.pc_kw[i];
    return household_injection(c.net, c.sens, p_out, row.qc_kvar);
}

/// Runs one (scenario, strategy, c_kappa) combination. Failures are
/// recorded in the row status instead of thrown.
inline SweepRow run_scenario(const Case& c, double pv_kw, SweepStrategy strategy, double ck,
                             const CostCoefficients& costs = {}, const qcqp::SolverOptions& solver = {},
                             const DroopOptions& droop = {}) {
    SweepRow row;
    row.scenario_kw = pv_kw;
    row.ratio = c.ratio(pv_kw);
    row.strategy = to_string(strategy);
    row.ck = strategy == SweepStrategy::foid ? ck : 0.0;
    try {
        const auto fleet = c.fleet(pv_kw);
        VoltageProfile profile;
        if (strategy == SweepStrategy::volt_var) {
            const auto res = droop_equilibrium(c.net, c.sens, c.loads, fleet, droop);
            row.pc_kw = res.pc_kw;
            row.qc_kvar = res.qc_kvar;
            profile = res.profile;
            row.status = res.converged ? "converged" : "not_converged";
            row.message = res.diagnostics;
        } else {
            CostCoefficients k = costs;
            k.c_kappa = row.ck;
            const auto res = solve_dispatch(c.net, c.sens, c.loads, fleet, k,
                                            strategy == SweepStrategy::oid ? Strategy::oid : Strategy::foid, solver);
            row.pc_kw = res.pc_kw;
            row.qc_kvar = res.qc_kvar;
            profile = res.profile;
            row.status = res.status != qcqp::Status::optimal ? qcqp::to_string(res.status)
                         : res.violations.empty()           ? "optimal"
                                                            : "audit_failed";
            row.message = res.diagnostics;
        }
        for (double pc : row.pc_kw) row.total_curtailment_kw += pc;
        row.losses_kw = line_losses(c.net, profile);
        row.max_v_pu = max_household_voltage(c, profile);
        row.fairness_variance = fairness_metrics(row).variance;
    } catch (const std::exception& e) {
        row.status = "error";
        row.message = e.what();
        row.pc_kw.assign(c.households(), std::nan(""));
        row.qc_kvar.assign(c.households(), std::nan(""));
    }
    return row;
}

struct SweepTask {
    double pv_kw;
    SweepStrategy strategy;
    double ck;
};

/// Row order: scenario, then strategy in config order, then c_kappa.
inline std::vector<SweepTask> sweep_tasks(const ScenarioConfig& cfg) {
    std::vector<SweepTask> tasks;
    for (double pv : cfg.pv_points())
        for (auto s : cfg.strategies) {
            if (s == SweepStrategy::foid)
                for (double ck : cfg.c_kappa) tasks.push_back({pv, s, ck});
            else
                tasks.push_back({pv, s, 0.0});
        }
    return tasks;
}

inline std::vector<SweepRow> run_sweep(const Case& c, const ScenarioConfig& cfg) {
    cfg.validate();
    const auto tasks = sweep_tasks(cfg);
    std::vector<SweepRow> rows(tasks.size());
    unsigned workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(tasks.size(), 1)));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++)
            rows[i] = run_scenario(c, tasks[i].pv_kw, tasks[i].strategy, tasks[i].ck, cfg.costs, cfg.solver, cfg.droop);
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    return rows;
}

inline std::vector<SweepRow> run_sweep(const ScenarioConfig& cfg) { return run_sweep(load_case(cfg), cfg); }

// ---------------------------------------------------------------------------
// Export

namespace detail {

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v == 0.0 ? 0.0 : v);  // no "-0"
    return buf;
}

inline double round_number(double v) { return std::isfinite(v) ? std::stod(format_number(v)) : v; }

}  // namespace detail

inline std::vector<std::string> csv_header(std::size_t households) {
    std::vector<std::string> h{"scenario_kw", "ratio",    "strategy",  "ck", "total_curtailment_kw",
                               "losses_kw",   "max_v_pu", "fairness_variance"};
    for (std::size_t k = 1; k <= households; ++k) h.push_back("pc_" + std::to_string(k));
    for (std::size_t k = 1; k <= households; ++k) h.push_back("qc_" + std::to_string(k));
    h.push_back("status");
    return h;
}

inline void write_csv(const std::vector<SweepRow>& rows, std::ostream& out, std::size_t households = 12) {
    if (!rows.empty()) households = rows.front().pc_kw.size();
    const auto header = csv_header(households);
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    using detail::format_number;
    for (const auto& r : rows) {
        out << format_number(r.scenario_kw) << ',' << format_number(r.ratio) << ',' << r.strategy << ','
            << format_number(r.ck) << ',' << format_number(r.total_curtailment_kw) << ','
            << format_number(r.losses_kw) << ',' << format_number(r.max_v_pu) << ','
            << format_number(r.fairness_variance);
        for (double v : r.pc_kw) out << ',' << format_number(v);
        for (double v : r.qc_kvar) out << ',' << format_number(v);
        out << ',' << r.status << '\n';
    }
}

inline nlohmann::ordered_json row_to_json(const SweepRow& r) {
    using detail::round_number;
    nlohmann::ordered_json j;
    j["scenario_kw"] = round_number(r.scenario_kw);
    j["ratio"] = round_number(r.ratio);
    j["strategy"] = r.strategy;
    j["ck"] = round_number(r.ck);
    j["total_curtailment_kw"] = round_number(r.total_curtailment_kw);
    j["losses_kw"] = round_number(r.losses_kw);
    j["max_v_pu"] = round_number(r.max_v_pu);
    j["fairness_variance"] = round_number(r.fairness_variance);
    for (std::size_t k = 0; k < r.pc_kw.size(); ++k) j["pc_" + std::to_string(k + 1)] = round_number(r.pc_kw[k]);
    for (std::size_t k = 0; k < r.qc_kvar.size(); ++k) j["qc_" + std::to_string(k + 1)] = round_number(r.qc_kvar[k]);
    j["status"] = r.status;
    return j;
}

/// A JSON array with one object per row, one row per line.
inline void write_json(const std::vector<SweepRow>& rows, std::ostream& out) {
    out << "[";
    for (std::size_t i = 0; i < rows.size(); ++i) out << (i ? ",\n " : "\n ") << row_to_json(rows[i]).dump();
    out << (rows.empty() ? "]\n" : "\n]\n");
}

inline std::vector<SweepRow> parse_json_rows(const std::string& text) {
    std::vector<SweepRow> rows;
    nlohmann::json arr;
    try {
        arr = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.what());
    }
    if (!arr.is_array()) throw ParseError("expected a JSON array of rows");
    auto num = [](const nlohmann::json& v) { return v.is_null() ? std::nan("") : v.get<double>(); };
    for (const auto& j : arr) {
        SweepRow r;
        r.scenario_kw = num(j.at("scenario_kw"));
        r.ratio = num(j.at("ratio"));
        r.strategy = j.at("strategy").get<std::string>();
        r.ck = num(j.at("ck"));
        r.total_curtailment_kw = num(j.at("total_curtailment_kw"));
        r.losses_kw = num(j.at("losses_kw"));
        r.max_v_pu = num(j.at("max_v_pu"));
        r.fairness_variance = num(j.at("fairness_variance"));
        for (std::size_t k = 1; j.contains("pc_" + std::to_string(k)); ++k)
            r.pc_kw.push_back(num(j.at("pc_" + std::to_string(k))));
        for (std::size_t k = 1; j.contains("qc_" + std::to_string(k)); ++k)
            r.qc_kvar.push_back(num(j.at("qc_" + std::to_string(k))));
        r.status = j.at("status").get<std::string>();
        rows.push_back(std::move(r));
    }
    return rows;
}

/// Rows as they read back after export (numbers rounded to 6 significant digits).
inline SweepRow rounded(SweepRow r) {
    using detail::round_number;
    for (double* v : {&r.scenario_kw, &r.ratio, &r.ck, &r.total_curtailment_kw, &r.losses_kw, &r.max_v_pu,
                      &r.fairness_variance})
        *v = round_number(*v);
    for (auto& v : r.pc_kw) v = round_number(v);
    for (auto& v : r.qc_kvar) v = round_number(v);
    r.message.clear();
    return r;
}

/// Writes `sweep.csv` or `sweep.json` into `dir`; returns the file path.
inline std::filesystem::path export_rows(const std::vector<SweepRow>& rows, OutputFormat format,
                                         const std::filesystem::path& dir, const std::string& stem = "sweep") {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(dir.string() + ": " + ec.message());
    const auto path = dir / (stem + (format == OutputFormat::csv ? ".csv" : ".json"));
    std::ofstream out(path);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    if (format == OutputFormat::csv)
        write_csv(rows, out);
    else
        write_json(rows, out);
    if (!out) throw IoError(path.string() + ": write failed");
    return path;
}

// ---------------------------------------------------------------------------
// Linearization check

struct ValidationRow {
    double scenario_kw = 0.0;
    std::string strategy;
    double max_abs_error_pu = 0.0;
    double ac_max_v_pu = 0.0;
    int ac_iterations = 0;
    bool ac_converged = false;
};

/// Compares the linear voltages of a row's setpoints with the AC solution.
inline ValidationRow validate_row(const Case& c, const SweepRow& row) {
    ValidationRow v;
    v.scenario_kw = row.scenario_kw;
    v.strategy = row.strategy;
    const auto inj = row_injection(c, row);
    const auto rep = linearization_error(c.net, c.sens, inj);
    v.max_abs_error_pu = rep.max_abs;
    v.ac_max_v_pu = max_household_voltage(c, rep.ac.profile, false);
    v.ac_iterations = rep.ac.iterations;
    v.ac_converged = rep.ac.converged;
    return v;
}

}  // namespace foid
