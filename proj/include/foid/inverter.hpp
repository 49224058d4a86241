#pragma once

// Inverter capability set and the local Volt/VAr controller with Volt/Watt
// fallback, solved to a network equilibrium on the linear flow model.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "foid/error.hpp"
#include "foid/linflow.hpp"
#include "foid/netmodel.hpp"

namespace foid {

struct InverterSpec {
    int bus = 0;              ///< household bus id
    double p_av_kw = 0.0;     ///< available AC power
    double s_rating_kva = 0.0;
    double pf_min = 0.85;
    double derating = 1.0;    ///< p_av = derating * installed DC capacity

    /// Inverter sized `oversize` times the available power.
    static InverterSpec sized(int bus, double p_av_kw, double oversize = 1.1, double pf_min = 0.85) {
        return {bus, p_av_kw, oversize * p_av_kw, pf_min, 1.0};
    }

    double installed_capacity_kw() const { return p_av_kw / derating; }
    double tan_theta() const { return std::tan(std::acos(pf_min)); }
};

inline void validate(const InverterSpec& spec) {
    const std::string where = "inverter at bus " + std::to_string(spec.bus) + ": ";
    if (!(spec.p_av_kw >= 0.0)) throw ValidationError(where + "available power must be >= 0");
    if (!(spec.s_rating_kva >= spec.p_av_kw)) throw ValidationError(where + "rating must cover available power");
    if (!(spec.pf_min > 0.0 && spec.pf_min <= 1.0)) throw ValidationError(where + "pf_min must be in (0, 1]");
    if (!(spec.derating > 0.0)) throw ValidationError(where + "derating must be positive");
}

struct QBounds {
    double q_min = 0.0;  ///< kVAr, <= 0
    double q_max = 0.0;  ///< kVAr, >= 0
};

/// Reactive range at curtailment p_c: limited by the apparent rating and by
/// the minimum power factor at the remaining output p_av - p_c.
inline QBounds q_bounds(const InverterSpec& spec, double p_c_kw) {
    if (!(p_c_kw >= -1e-12 && p_c_kw <= spec.p_av_kw + 1e-12))
        throw PreconditionError("curtailment " + std::to_string(p_c_kw) + " kW outside [0, " +
                                std::to_string(spec.p_av_kw) + "]");
    const double p_out = std::max(spec.p_av_kw - p_c_kw, 0.0);
    const double by_rating = std::sqrt(std::max(spec.s_rating_kva * spec.s_rating_kva - p_out * p_out, 0.0));
    const double by_pf = spec.tan_theta() * p_out;
    const double q = std::min(by_rating, by_pf);
    return {-q, q};
}

/// Volt/VAr characteristic without deadband.
struct DroopCurve {
    double v_nom = 1.0;
    double v_max = 1.05;
    double slope = 0.0;  ///< kVAr per pu
    double q_min = 0.0;
    double q_max = 0.0;

    static DroopCurve from_bounds(double v_nom, double v_max, QBounds b) {
        if (!(v_max > v_nom)) throw PreconditionError("droop curve needs v_max > v_nom");
        return {v_nom, v_max, b.q_min / (v_nom - v_max), b.q_min, b.q_max};
    }
};

inline double droop_q(const DroopCurve& curve, double v) {
    return std::clamp(-curve.slope * (v - curve.v_nom), curve.q_min, curve.q_max);
}

struct DroopOptions {
    double damping = 0.5;
    double voltage_tolerance = 1e-6;  ///< pu
    double q_tolerance_kvar = 1e-8;   ///< distance to the curve at convergence
    int max_iterations = 100;         ///< per reactive fixed point
    int max_outer_iterations = 100;   ///< Volt/Watt rounds
    double bisection_tolerance_kw = 1e-4;
};

struct DroopResult {
    std::vector<double> pc_kw;
    std::vector<double> qc_kvar;
    VoltageProfile profile;
    int iterations = 0;        ///< reactive fixed-point iterations, all rounds
    int outer_iterations = 0;  ///< Volt/Watt rounds
    bool converged = false;
    std::string diagnostics;
};

namespace detail {

struct DroopState {
    const NetworkModel& net;
    const SensitivityMatrices& sens;
    const InjectionVector& loads;
    const std::vector<InverterSpec>& fleet;
    std::vector<Eigen::Index> reduced;  ///< reduced index of every inverter bus
    const DroopOptions& opt;
    int iterations = 0;

    InjectionVector injection(const std::vector<double>& pc, const std::vector<double>& q) const {
        InjectionVector inj = loads;
        for (std::size_t i = 0; i < fleet.size(); ++i) {
            inj.p_net(reduced[i]) += net.bases.power_to_pu(fleet[i].p_av_kw - pc[i]);
            inj.q_net(reduced[i]) += net.bases.power_to_pu(q[i]);
        }
        return inj;
    }

    /// Terminal voltages as seen by the controllers: the real part of the
    /// linear voltage, the same quantity the dispatch bounds.
    std::vector<double> terminal_voltages(const VoltageProfile& profile) const {
        std::vector<double> v(fleet.size());
        for (std::size_t i = 0; i < fleet.size(); ++i)
            v[i] = profile.v_re(static_cast<Eigen::Index>(sens.full_index[static_cast<std::size_t>(reduced[i])]));
        return v;
    }

    struct Fixed {
        std::vector<double> q;
        std::vector<double> v;
        VoltageProfile profile;
        bool converged = false;
    };

    /// Damped fixed point V -> Q(V) -> V at fixed curtailment.
    Fixed reactive_fixed_point(const std::vector<double>& pc) {
        std::vector<DroopCurve> curves;
        curves.reserve(fleet.size());
        for (std::size_t i = 0; i < fleet.size(); ++i)
            curves.push_back(DroopCurve::from_bounds(net.v_nom, net.v_max, q_bounds(fleet[i], pc[i])));

        Fixed f;
        f.q.assign(fleet.size(), 0.0);
        f.profile = voltages_from_injections(sens, injection(pc, f.q), net.v_nom);
        f.v = terminal_voltages(f.profile);
        for (int it = 0; it < opt.max_iterations; ++it) {
            ++iterations;
            for (std::size_t i = 0; i < fleet.size(); ++i)
                f.q[i] = (1.0 - opt.damping) * f.q[i] + opt.damping * droop_q(curves[i], f.v[i]);
            f.profile = voltages_from_injections(sens, injection(pc, f.q), net.v_nom);
            const auto v_new = terminal_voltages(f.profile);
            double dv = 0.0, dq = 0.0;
            for (std::size_t i = 0; i < fleet.size(); ++i) {
                dv = std::max(dv, std::abs(v_new[i] - f.v[i]));
                dq = std::max(dq, std::abs(f.q[i] - droop_q(curves[i], v_new[i])));
            }
            f.v = v_new;
            if (dv < opt.voltage_tolerance && dq < opt.q_tolerance_kvar) {
                f.converged = true;
                break;
            }
        }
        return f;
    }
};

}  // namespace detail

/// Equilibrium of the local controllers on the linear network model.
///
/// First the reactive fixed point is solved at zero curtailment. While any
/// inverter terminal sits above v_max, each violating inverter bisects its
/// own curtailment in [current, p_av] with all others frozen at the round's
/// snapshot; the round's results are applied together. Reactive bounds are
/// recomputed at the trial curtailment at every step.
inline DroopResult droop_equilibrium(const NetworkModel& net, const SensitivityMatrices& sens,
                                     const InjectionVector& loads, const std::vector<InverterSpec>& fleet,
                                     const DroopOptions& opt = {}) {
    check_dimensions(sens, loads);
    const auto red = net.reduced_indices();
    detail::DroopState st{net, sens, loads, fleet, {}, opt};
    for (const auto& inv : fleet) {
        validate(inv);
        const auto idx = net.index_of(inv.bus);
        if (net.buses[idx].kind != BusKind::household)
            throw ValidationError("inverter at bus " + std::to_string(inv.bus) + " is not on a household bus");
        st.reduced.push_back(red[idx]);
    }

    const double tol_v = net.v_max + 1e-9;
    std::vector<double> pc(fleet.size(), 0.0);
    DroopResult res;
    std::ostringstream diag;
    bool inner_ok = true;

    auto fixed = st.reactive_fixed_point(pc);
    inner_ok &= fixed.converged;
    int round = 0;
    bool stuck = false;
    for (; round < opt.max_outer_iterations; ++round) {
        std::vector<std::size_t> violating;
        for (std::size_t i = 0; i < fleet.size(); ++i)
            if (fixed.v[i] > tol_v && pc[i] < fleet[i].p_av_kw) violating.push_back(i);
        const bool any_violation =
            std::any_of(fixed.v.begin(), fixed.v.end(), [&](double v) { return v > tol_v; });
        if (!any_violation) break;
        if (violating.empty()) {
            stuck = true;
            break;
        }
        std::vector<double> next = pc;
        for (std::size_t i : violating) {
            double lo = pc[i], hi = fleet[i].p_av_kw;
            while (hi - lo > opt.bisection_tolerance_kw) {
                const double mid = 0.5 * (lo + hi);
                auto trial = pc;
                trial[i] = mid;
                const auto f = st.reactive_fixed_point(trial);
                inner_ok &= f.converged;
                (f.v[i] > net.v_max ? lo : hi) = mid;
            }
            next[i] = hi;
        }
        pc = std::move(next);
        fixed = st.reactive_fixed_point(pc);
        inner_ok &= fixed.converged;
    }

    const bool feasible = std::all_of(fixed.v.begin(), fixed.v.end(), [&](double v) { return v <= net.v_max + 1e-6; });
    res.converged = inner_ok && feasible && round < opt.max_outer_iterations;
    if (!inner_ok) diag << "reactive fixed point hit the iteration limit; ";
    if (stuck) diag << "voltage above v_max with every violating inverter fully curtailed; ";
    if (round >= opt.max_outer_iterations) diag << "Volt/Watt rounds exhausted; ";
    if (!feasible) {
        const auto it = std::max_element(fixed.v.begin(), fixed.v.end());
        diag << "max terminal voltage " << *it << " pu at bus " << fleet[static_cast<std::size_t>(it - fixed.v.begin())].bus;
    }

    res.pc_kw = pc;
    res.qc_kvar = fixed.q;
    res.profile = fixed.profile;
    res.iterations = st.iterations;
    res.outer_iterations = round;
    res.diagnostics = diag.str();
    return res;
}

}  // namespace foid
