#pragma once

// Exact AC power flow by Z-bus fixed-point iteration (constant-power
// injections). Only used to check the linear model, never by the optimizer.

#include <algorithm>
#include <cmath>
#include <limits>

#include "foid/error.hpp"
#include "foid/linflow.hpp"
#include "foid/netmodel.hpp"

namespace foid {

struct AcSolveOptions {
    double tolerance = 1e-8;  ///< max complex power mismatch, per-unit
    int max_iterations = 200;
    double damping = 1.0;
    double oscillation_damping = 0.5;
};

struct AcSolveReport {
    VoltageProfile profile;
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
};

namespace detail {

inline Eigen::VectorXcd ac_mismatch(const ComplexMatrix& ybus, const Eigen::VectorXcd& v,
                                    const Eigen::VectorXcd& s_injected, std::size_t slack) {
    const Eigen::VectorXcd current = ybus * v;
    Eigen::VectorXcd out(v.size() - 1);
    for (Eigen::Index i = 0, k = 0; i < v.size(); ++i) {
        if (i == static_cast<Eigen::Index>(slack)) continue;
        out(k) = s_injected(k) - v(i) * std::conj(current(i));
        ++k;
    }
    return out;
}

}  // namespace detail

inline AcSolveReport solve_ac(const NetworkModel& net, const InjectionVector& inj, const AcSolveOptions& opt = {}) {
    const ComplexMatrix ybus = build_ybus(net);
    const std::size_t slack = net.slack_index();
    const auto n = static_cast<Eigen::Index>(net.bus_count());
    if (inj.p_net.size() != n - 1 || inj.q_net.size() != n - 1)
        throw DimensionError("injection vector does not match the network");
    const double cap = 10.0 * net.bases.power_to_pu(net.transformer_s_max_kva);
    for (Eigen::Index k = 0; k < n - 1; ++k)
        if (!std::isfinite(inj.p_net(k)) || !std::isfinite(inj.q_net(k)) ||
            std::hypot(inj.p_net(k), inj.q_net(k)) > cap)
            throw PreconditionError("injection outside the AC solver sanity bound");

    const ComplexMatrix yrr = reduce(ybus, slack);
    Eigen::VectorXcd yrs(n - 1);
    for (Eigen::Index i = 0, k = 0; i < n; ++i) {
        if (i == static_cast<Eigen::Index>(slack)) continue;
        yrs(k++) = ybus(i, static_cast<Eigen::Index>(slack));
    }
    const Eigen::PartialPivLU<ComplexMatrix> lu(yrr);
    const Complex v_slack(net.v_nom, 0.0);

    Eigen::VectorXcd s(n - 1);
    for (Eigen::Index k = 0; k < n - 1; ++k) s(k) = Complex(inj.p_net(k), inj.q_net(k));

    Eigen::VectorXcd vr = Eigen::VectorXcd::Constant(n - 1, v_slack);
    Eigen::VectorXcd v(n);
    auto assemble = [&](const Eigen::VectorXcd& reduced) {
        for (Eigen::Index i = 0, k = 0; i < n; ++i)
            v(i) = i == static_cast<Eigen::Index>(slack) ? v_slack : reduced(k++);
    };

    AcSolveReport report;
    if (n == 1) {
        assemble(vr);
        report.converged = true;
        report.iterations = 1;
        report.profile.v_re = v.real();
        report.profile.v_im = v.imag();
        return report;
    }
    double alpha = opt.damping;
    double previous = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= opt.max_iterations; ++it) {
        Eigen::VectorXcd rhs = -yrs * v_slack;
        for (Eigen::Index k = 0; k < n - 1; ++k) rhs(k) += std::conj(s(k) / vr(k));
        const Eigen::VectorXcd next = lu.solve(rhs);
        vr += alpha * (next - vr);
        assemble(vr);
        const double residual = detail::ac_mismatch(ybus, v, s, slack).cwiseAbs().maxCoeff();
        report.iterations = it;
        report.residual = residual;
        if (!std::isfinite(residual)) break;
        if (residual < opt.tolerance) {
            report.converged = true;
            break;
        }
        if (residual > previous) alpha = std::min(alpha, opt.oscillation_damping);
        previous = residual;
    }
    report.profile.v_re = v.real();
    report.profile.v_im = v.imag();
    return report;
}

struct LinearizationReport {
    Vector error;  ///< |V_lin| - |V_ac| per bus (full indexing)
    double max_abs = 0.0;
    AcSolveReport ac;
    VoltageProfile linear;
};

inline LinearizationReport linearization_error(const NetworkModel& net, const SensitivityMatrices& sens,
                                               const InjectionVector& inj, const AcSolveOptions& opt = {}) {
    LinearizationReport rep;
    rep.ac = solve_ac(net, inj, opt);
    if (!rep.ac.converged)
        throw Error("AC power flow did not converge (residual " + std::to_string(rep.ac.residual) + ")");
    rep.linear = voltages_from_injections(sens, inj, net.v_nom);
    rep.error = Vector(static_cast<Eigen::Index>(net.bus_count()));
    for (std::size_t i = 0; i < net.bus_count(); ++i)
        rep.error(static_cast<Eigen::Index>(i)) = rep.linear.magnitude(i) - rep.ac.profile.magnitude(i);
    rep.max_abs = rep.error.cwiseAbs().maxCoeff();
    return rep;
}

inline LinearizationReport linearization_error(const NetworkModel& net, const InjectionVector& inj,
                                               const AcSolveOptions& opt = {}) {
    return linearization_error(net, sensitivity_matrices(net), inj, opt);
}

}  // namespace foid
