#pragma once

// Linearized power flow around the nominal slack voltage.
//
//   Re{V} = |V_nom| + R p + X q
//   Im{V} =           X p - R q
//
// with p, q the net injections of the non-slack buses in per-unit and R, X
// the sensitivity matrices. Everything here is per-unit; kW/kVA appear only
// in the return values documented as such.

#include <cmath>
#include <string>
#include <vector>

#include "foid/error.hpp"
#include "foid/netmodel.hpp"

namespace foid {

/// Net injections of the non-slack buses (generation positive), per-unit.
struct InjectionVector {
    Vector p_net;
    Vector q_net;

    static InjectionVector zero(Eigen::Index n) { return {Vector::Zero(n), Vector::Zero(n)}; }

    InjectionVector operator+(const InjectionVector& o) const { return {p_net + o.p_net, q_net + o.q_net}; }
    InjectionVector operator*(double k) const { return {p_net * k, q_net * k}; }
};

/// Complex bus voltages over all buses (slack included), per-unit.
struct VoltageProfile {
    Vector v_re;
    Vector v_im;

    static VoltageProfile flat(std::size_t n, double v_nom) {
        return {Vector::Constant(static_cast<Eigen::Index>(n), v_nom), Vector::Zero(static_cast<Eigen::Index>(n))};
    }

    Complex at(std::size_t i) const {
        const auto k = static_cast<Eigen::Index>(i);
        return {v_re(k), v_im(k)};
    }
    double magnitude(std::size_t i) const { return std::abs(at(i)); }
    std::size_t size() const { return static_cast<std::size_t>(v_re.size()); }
};

/// Bus loads as a reduced-index injection (negative), per-unit.
inline InjectionVector load_injection(const NetworkModel& net, const SensitivityMatrices& sens) {
    auto inj = InjectionVector::zero(sens.size());
    for (Eigen::Index k = 0; k < sens.size(); ++k) {
        const auto& bus = net.buses[sens.full_index[static_cast<std::size_t>(k)]];
        inj.p_net(k) = -net.bases.power_to_pu(bus.load_p_kw);
        inj.q_net(k) = -net.bases.power_to_pu(bus.load_q_kvar);
    }
    return inj;
}

/// Household output (p_av - p_c, q_c in kW/kVAr, one entry per household in
/// file order) added to the bus loads.
inline InjectionVector household_injection(const NetworkModel& net, const SensitivityMatrices& sens,
                                           const std::vector<double>& p_out_kw,
                                           const std::vector<double>& q_out_kvar) {
    const auto houses = net.households();
    if (p_out_kw.size() != houses.size() || q_out_kvar.size() != houses.size())
        throw DimensionError("household injection needs one entry per household");
    auto inj = load_injection(net, sens);
    const auto red = net.reduced_indices();
    for (std::size_t h = 0; h < houses.size(); ++h) {
        const int k = red[houses[h]];
        if (k < 0) continue;
        inj.p_net(k) += net.bases.power_to_pu(p_out_kw[h]);
        inj.q_net(k) += net.bases.power_to_pu(q_out_kvar[h]);
    }
    return inj;
}

inline void check_dimensions(const SensitivityMatrices& sens, const InjectionVector& inj) {
    if (inj.p_net.size() != sens.size() || inj.q_net.size() != sens.size())
        throw DimensionError("injection vector has " + std::to_string(inj.p_net.size()) +
                             " entries, sensitivity matrices expect " + std::to_string(sens.size()));
}

inline VoltageProfile voltages_from_injections(const SensitivityMatrices& sens, const InjectionVector& inj,
                                               double v_nom) {
    check_dimensions(sens, inj);
    const Vector re = Vector::Constant(sens.size(), std::abs(v_nom)) + sens.r * inj.p_net + sens.x * inj.q_net;
    const Vector im = sens.x * inj.p_net - sens.r * inj.q_net;
    auto profile = VoltageProfile::flat(static_cast<std::size_t>(sens.size()) + 1, v_nom);
    profile.v_im(static_cast<Eigen::Index>(sens.slack)) = 0.0;
    for (Eigen::Index k = 0; k < sens.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(sens.full_index[static_cast<std::size_t>(k)]);
        profile.v_re(i) = re(k);
        profile.v_im(i) = im(k);
    }
    return profile;
}

/// The expression bounded by the voltage-magnitude limits, per non-slack bus.
/// Identical to the real part of the linear voltage.
inline Vector voltage_bound_expression(const SensitivityMatrices& sens, const InjectionVector& inj, double v_nom) {
    check_dimensions(sens, inj);
    return Vector::Constant(sens.size(), std::abs(v_nom)) + sens.r * inj.p_net + sens.x * inj.q_net;
}

/// |y*_mn (V_m - V_n)| per line, per-unit.
inline Vector line_current_magnitudes(const NetworkModel& net, const VoltageProfile& profile) {
    if (profile.size() != net.bus_count()) throw DimensionError("profile does not cover all buses");
    Vector out(static_cast<Eigen::Index>(net.lines.size()));
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
        const auto& line = net.lines[l];
        const Complex drop = profile.at(net.index_of(line.from)) - profile.at(net.index_of(line.to));
        out(static_cast<Eigen::Index>(l)) = std::abs(std::conj(line_admittance_pu(net, line)) * drop);
    }
    return out;
}

/// Total active series losses in kW: sum of Re{y}·|V_m - V_n|^2.
inline double line_losses(const NetworkModel& net, const VoltageProfile& profile) {
    if (profile.size() != net.bus_count()) throw DimensionError("profile does not cover all buses");
    double loss = 0.0;
    for (const auto& line : net.lines) {
        const auto m = net.index_of(line.from);
        const auto n = net.index_of(line.to);
        const double dre = profile.v_re(static_cast<Eigen::Index>(m)) - profile.v_re(static_cast<Eigen::Index>(n));
        const double dim = profile.v_im(static_cast<Eigen::Index>(m)) - profile.v_im(static_cast<Eigen::Index>(n));
        loss += std::conj(line_admittance_pu(net, line)).real() * (dre * dre + dim * dim);
    }
    return net.bases.power_to_kw(loss);
}

/// Apparent power through the transformer in kVA. Net export minus series
/// losses; the sign of the flow is irrelevant.
inline double transformer_apparent_power(const NetworkModel& net, const InjectionVector& inj, double losses_kw) {
    const double p0 = inj.p_net.sum() - net.bases.power_to_pu(losses_kw);
    const double q0 = inj.q_net.sum();
    return net.bases.power_to_kw(std::hypot(p0, q0));
}

}  // namespace foid
