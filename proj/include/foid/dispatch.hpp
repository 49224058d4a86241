#pragma once

// Centralized inverter dispatch: minimize losses + inverter costs (+ a
// fairness penalty) over per-household curtailment and reactive power,
// subject to inverter capability, voltage, line and transformer limits on
// the linearized network.
//
// Decision vector (per-unit), for the households with p_av > 0:
//   x = [p_c (H) | q_c (H) | q+ (H) | q- (H)],   q_c = q+ - q-

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "foid/error.hpp"
#include "foid/inverter.hpp"
#include "foid/linflow.hpp"
#include "foid/netmodel.hpp"
#include "foid/qcqp.hpp"

namespace foid {

enum class Strategy { oid, foid };

inline const char* to_string(Strategy s) { return s == Strategy::oid ? "OID" : "FOID"; }

/// Normalization of the mean inside the fairness penalty.
/// `h_plus_one` (config keyword "paper") divides the sum of shares by H + 1,
/// `exact` by H.
enum class FairnessMean { h_plus_one, exact };

inline const char* to_string(FairnessMean m) { return m == FairnessMean::h_plus_one ? "paper" : "exact"; }

inline double fairness_alpha(std::size_t households, FairnessMean mean) {
    const auto h = static_cast<double>(households);
    return mean == FairnessMean::h_plus_one ? 1.0 / (h + 1.0) : 1.0 / h;
}

struct CostCoefficients {
    double a = 2.0;      ///< p_c^2
    double b = 0.05;     ///< p_c
    double c = 1.0;      ///< q_c^2
    double d = 0.025;    ///< |q_c|
    double c_kappa = 0.0;
    FairnessMean fairness_mean = FairnessMean::h_plus_one;

    void validate() const {
        if (!(a >= 0 && b >= 0 && c >= 0 && d >= 0 && c_kappa >= 0))
            throw ValidationError("cost coefficients must be nonnegative");
    }
};

/// Fairness penalty: sum over households of (share_h - alpha * sum of shares)^2
/// with share = p_c / p_av.
inline double fairness_term(const std::vector<double>& pc_kw, const std::vector<double>& pav_kw,
                            FairnessMean mean = FairnessMean::h_plus_one) {
    if (pc_kw.size() != pav_kw.size()) throw DimensionError("fairness_term: size mismatch");
    if (pc_kw.empty()) return 0.0;
    std::vector<double> share(pc_kw.size());
    for (std::size_t i = 0; i < pc_kw.size(); ++i) {
        if (!(pav_kw[i] > 0.0)) throw PreconditionError("fairness_term: household with zero available power");
        share[i] = pc_kw[i] / pav_kw[i];
    }
    double total = 0.0;
    for (double s : share) total += s;
    const double centre = fairness_alpha(share.size(), mean) * total;
    double k = 0.0;
    for (double s : share) k += (s - centre) * (s - centre);
    return k;
}

/// Assembled problem plus the affine maps needed to interpret its solution.
struct DispatchModel {
    qcqp::ConvexQCQP problem;
    std::vector<std::size_t> active;  ///< fleet indices with p_av > 0, in fleet order
    std::vector<Eigen::Index> active_reduced;
    // Re V = re0 + re_map x,  Im V = im0 + im_map x  (non-slack buses)
    Vector re0, im0;
    Matrix re_map, im_map;
    Strategy strategy = Strategy::oid;
    CostCoefficients costs;

    Eigen::Index households() const { return static_cast<Eigen::Index>(active.size()); }
    Eigen::Index pc(Eigen::Index h) const { return h; }
    Eigen::Index qc(Eigen::Index h) const { return households() + h; }
    Eigen::Index qp(Eigen::Index h) const { return 2 * households() + h; }
    Eigen::Index qm(Eigen::Index h) const { return 3 * households() + h; }
};

namespace detail {

/// Adds w * (row x + c)^2 to a quadratic form.
inline void add_square(qcqp::QuadraticForm& f, const Vector& row, double c, double w) {
    f.p += 2.0 * w * row * row.transpose();
    f.q += 2.0 * w * c * row;
    f.r += w * c * c;
}

}  // namespace detail

inline DispatchModel assemble(const NetworkModel& net, const SensitivityMatrices& sens, const InjectionVector& loads,
                              const std::vector<InverterSpec>& fleet, CostCoefficients costs, Strategy strategy) {
    check_dimensions(sens, loads);
    costs.validate();
    if (strategy == Strategy::oid) costs.c_kappa = 0.0;
    const auto& bases = net.bases;
    const auto red = net.reduced_indices();

    DispatchModel m;
    m.strategy = strategy;
    m.costs = costs;
    for (std::size_t i = 0; i < fleet.size(); ++i) {
        validate(fleet[i]);
        const auto idx = net.index_of(fleet[i].bus);
        if (net.buses[idx].kind != BusKind::household)
            throw ValidationError("inverter at bus " + std::to_string(fleet[i].bus) + " is not on a household bus");
        if (fleet[i].p_av_kw > 0.0) {
            m.active.push_back(i);
            m.active_reduced.push_back(red[idx]);
        }
    }
    const Eigen::Index H = m.households();
    const Eigen::Index n = 4 * H;
    const Eigen::Index nb = sens.size();
    auto& prob = m.problem;
    prob = qcqp::ConvexQCQP::with_variables(n);

    std::vector<double> pav(static_cast<std::size_t>(H)), smax(static_cast<std::size_t>(H)),
        tan_theta(static_cast<std::size_t>(H));
    for (Eigen::Index h = 0; h < H; ++h) {
        const auto& inv = fleet[m.active[static_cast<std::size_t>(h)]];
        pav[static_cast<std::size_t>(h)] = bases.power_to_pu(inv.p_av_kw);
        smax[static_cast<std::size_t>(h)] = bases.power_to_pu(inv.s_rating_kva);
        tan_theta[static_cast<std::size_t>(h)] = inv.tan_theta();
    }

    // Net injections: p = p_load + B (p_av - p_c), q = q_load + B q_c
    Vector p0 = loads.p_net, q0 = loads.q_net;
    Matrix dp = Matrix::Zero(nb, n), dq = Matrix::Zero(nb, n);
    for (Eigen::Index h = 0; h < H; ++h) {
        const auto k = m.active_reduced[static_cast<std::size_t>(h)];
        p0(k) += pav[static_cast<std::size_t>(h)];
        dp(k, m.pc(h)) -= 1.0;
        dq(k, m.qc(h)) += 1.0;
    }
    m.re0 = Vector::Constant(nb, std::abs(net.v_nom)) + sens.r * p0 + sens.x * q0;
    m.im0 = sens.x * p0 - sens.r * q0;
    m.re_map = sens.r * dp + sens.x * dq;
    m.im_map = sens.x * dp - sens.r * dq;

    // Full-bus access (slack constant at v_nom + j0)
    auto re_row = [&](std::size_t bus) -> std::pair<Vector, double> {
        const int k = red[bus];
        if (k < 0) return {Vector::Zero(n), std::abs(net.v_nom)};
        return {m.re_map.row(k).transpose(), m.re0(k)};
    };
    auto im_row = [&](std::size_t bus) -> std::pair<Vector, double> {
        const int k = red[bus];
        if (k < 0) return {Vector::Zero(n), 0.0};
        return {m.im_map.row(k).transpose(), m.im0(k)};
    };

    // Objective: losses
    auto& obj = prob.objective;
    for (const auto& line : net.lines) {
        const auto a = net.index_of(line.from), b = net.index_of(line.to);
        const double g = line_admittance_pu(net, line).real();
        const auto [ra, ca] = re_row(a);
        const auto [rb, cb] = re_row(b);
        const auto [ia, cia] = im_row(a);
        const auto [ib, cib] = im_row(b);
        detail::add_square(obj, ra - rb, ca - cb, g);
        detail::add_square(obj, ia - ib, cia - cib, g);
    }
    // inverter costs
    for (Eigen::Index h = 0; h < H; ++h) {
        obj.p(m.pc(h), m.pc(h)) += 2.0 * costs.a;
        obj.q(m.pc(h)) += costs.b;
        obj.p(m.qc(h), m.qc(h)) += 2.0 * costs.c;
        obj.q(m.qp(h)) += costs.d;
        obj.q(m.qm(h)) += costs.d;
    }
    // fairness: kappa = |T p_c|^2, T = (I - alpha 11') diag(1 / p_av)
    if (costs.c_kappa > 0.0 && H > 0) {
        const double alpha = fairness_alpha(static_cast<std::size_t>(H), costs.fairness_mean);
        Matrix t = Matrix::Identity(H, H) - alpha * Matrix::Ones(H, H);
        for (Eigen::Index h = 0; h < H; ++h) t.col(h) /= pav[static_cast<std::size_t>(h)];
        obj.p.topLeftCorner(H, H) += 2.0 * costs.c_kappa * t.transpose() * t;
    }
    obj.p = 0.5 * (obj.p + obj.p.transpose());

    // Inverter constraints
    for (Eigen::Index h = 0; h < H; ++h) {
        const auto hs = static_cast<std::size_t>(h);
        const std::string tag = "household " + std::to_string(fleet[m.active[hs]].bus);
        Vector row = Vector::Zero(n);
        row(m.pc(h)) = -1.0;
        prob.add_inequality(row, 0.0);
        row(m.pc(h)) = 1.0;
        prob.add_inequality(row, pav[hs]);

        // (p_av - p_c)^2 + q_c^2 <= S^2
        qcqp::QuadraticForm ball{Matrix::Zero(n, n), Vector::Zero(n), pav[hs] * pav[hs] - smax[hs] * smax[hs]};
        ball.p(m.pc(h), m.pc(h)) = 2.0;
        ball.p(m.qc(h), m.qc(h)) = 2.0;
        ball.q(m.pc(h)) = -2.0 * pav[hs];
        prob.add_quadratic(std::move(ball), tag + " apparent power");

        // |q_c| <= tan(theta) (p_av - p_c)
        row.setZero();
        row(m.qc(h)) = 1.0;
        row(m.pc(h)) = tan_theta[hs];
        prob.add_inequality(row, tan_theta[hs] * pav[hs]);
        row(m.qc(h)) = -1.0;
        prob.add_inequality(row, tan_theta[hs] * pav[hs]);

        row.setZero();
        row(m.qp(h)) = -1.0;
        prob.add_inequality(row, 0.0);
        row.setZero();
        row(m.qm(h)) = -1.0;
        prob.add_inequality(row, 0.0);

        row.setZero();
        row(m.qc(h)) = 1.0;
        row(m.qp(h)) = -1.0;
        row(m.qm(h)) = 1.0;
        prob.add_equality(row, 0.0);
    }

    if (H > 0) {
        // voltage limits on every non-slack bus
        for (Eigen::Index k = 0; k < nb; ++k) {
            const Vector row = m.re_map.row(k).transpose();
            prob.add_inequality(row, net.v_max - m.re0(k));
            prob.add_inequality(-row, m.re0(k) - net.v_min);
        }

        // line currents |y|^2 |dV|^2 <= i_max^2, only where a rating is given
        for (const auto& line : net.lines) {
            if (!line.i_max_a) continue;
            const auto a = net.index_of(line.from), b = net.index_of(line.to);
            const double y2 = std::norm(line_admittance_pu(net, line));
            const double imax = bases.current_to_pu(*line.i_max_a);
            qcqp::QuadraticForm f{Matrix::Zero(n, n), Vector::Zero(n), -imax * imax};
            const auto [ra, ca] = re_row(a);
            const auto [rb, cb] = re_row(b);
            const auto [ia, cia] = im_row(a);
            const auto [ib, cib] = im_row(b);
            detail::add_square(f, ra - rb, ca - cb, y2);
            detail::add_square(f, ia - ib, cia - cib, y2);
            prob.add_quadratic(std::move(f), "line " + std::to_string(line.from) + "-" + std::to_string(line.to));
        }

        // transformer: (sum p)^2 + (sum q)^2 <= S_t^2
        const double st = bases.power_to_pu(net.transformer_s_max_kva);
        qcqp::QuadraticForm tx{Matrix::Zero(n, n), Vector::Zero(n), -st * st};
        detail::add_square(tx, dp.colwise().sum().transpose(), p0.sum(), 1.0);
        detail::add_square(tx, dq.colwise().sum().transpose(), q0.sum(), 1.0);
        prob.add_quadratic(std::move(tx), "transformer");
    }

    if (const auto conv = qcqp::check_convexity(prob); !conv.convex)
        throw ValidationError("dispatch problem is not convex: " + conv.failing.front());
    return m;
}

struct ObjectiveTerms {
    double losses = 0.0;    ///< rho, per-unit
    double inverter = 0.0;  ///< phi, per-unit
    double fairness = 0.0;  ///< kappa (unweighted)
    double total = 0.0;     ///< rho + phi + c_kappa kappa
};

struct DispatchSolution {
    std::vector<double> pc_kw;    ///< per fleet entry (zero for p_av = 0)
    std::vector<double> qc_kvar;
    VoltageProfile profile;
    double total_curtailment_kw = 0.0;
    double line_losses_kw = 0.0;
    ObjectiveTerms terms;
    qcqp::Status status = qcqp::Status::numerical;
    qcqp::KktResiduals kkt;
    int iterations = 0;
    std::vector<std::string> violations;  ///< feasibility audit findings
    std::string diagnostics;

    bool ok() const { return status == qcqp::Status::optimal && violations.empty(); }
};

/// Re-checks a solution against the physical constraints, all in per-unit.
/// Returns one message per violated constraint, worst first.
inline std::vector<std::string> audit(const NetworkModel& net, const std::vector<InverterSpec>& fleet,
                                      const std::vector<double>& pc_kw, const std::vector<double>& qc_kvar,
                                      const VoltageProfile& profile, double tol = 1e-6) {
    const auto& bases = net.bases;
    std::vector<std::pair<double, std::string>> found;
    auto flag = [&](double excess, std::string what) {
        if (excess > tol) found.emplace_back(excess, std::move(what));
    };
    for (std::size_t i = 0; i < fleet.size(); ++i) {
        const std::string tag = "household " + std::to_string(fleet[i].bus) + ": ";
        const double pav = bases.power_to_pu(fleet[i].p_av_kw);
        const double pc = bases.power_to_pu(pc_kw[i]);
        const double qc = bases.power_to_pu(qc_kvar[i]);
        const double s = bases.power_to_pu(fleet[i].s_rating_kva);
        flag(-pc, tag + "negative curtailment");
        flag(pc - pav, tag + "curtailment above available power");
        flag((pav - pc) * (pav - pc) + qc * qc - s * s, tag + "apparent power above rating");
        flag(std::abs(qc) - fleet[i].tan_theta() * (pav - pc), tag + "power factor below minimum");
    }
    for (std::size_t b = 0; b < net.bus_count(); ++b) {
        if (b == net.slack_index()) continue;
        const double v = profile.v_re(static_cast<Eigen::Index>(b));
        flag(v - net.v_max, "bus " + std::to_string(net.buses[b].id) + ": voltage above v_max");
        flag(net.v_min - v, "bus " + std::to_string(net.buses[b].id) + ": voltage below v_min");
    }
    const auto currents = line_current_magnitudes(net, profile);
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
        const auto& line = net.lines[l];
        if (!line.i_max_a) continue;
        const double lim = bases.current_to_pu(*line.i_max_a);
        const double i = currents(static_cast<Eigen::Index>(l));
        flag(i * i - lim * lim, "line " + std::to_string(line.from) + "-" + std::to_string(line.to) + ": current above rating");
    }
    // transformer flow as the affine sum of net injections
    double p_sum = 0.0, q_sum = 0.0;
    for (const auto& bus : net.buses) {
        p_sum -= bases.power_to_pu(bus.load_p_kw);
        q_sum -= bases.power_to_pu(bus.load_q_kvar);
    }
    for (std::size_t i = 0; i < fleet.size(); ++i) {
        p_sum += bases.power_to_pu(fleet[i].p_av_kw - pc_kw[i]);
        q_sum += bases.power_to_pu(qc_kvar[i]);
    }
    const double st = bases.power_to_pu(net.transformer_s_max_kva);
    flag(p_sum * p_sum + q_sum * q_sum - st * st, "transformer above rating");

    std::sort(found.begin(), found.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    std::vector<std::string> out;
    for (auto& f : found) {
        std::ostringstream msg;
        msg << f.second << " (by " << f.first << ")";
        out.push_back(msg.str());
    }
    return out;
}

inline DispatchSolution solve_dispatch(const NetworkModel& net, const SensitivityMatrices& sens,
                                       const InjectionVector& loads, const std::vector<InverterSpec>& fleet,
                                       const CostCoefficients& costs, Strategy strategy,
                                       const qcqp::SolverOptions& solver = {}) {
    const DispatchModel m = assemble(net, sens, loads, fleet, costs, strategy);
    const auto sol = qcqp::solve(m.problem, solver);
    const auto& bases = net.bases;
    const Eigen::Index H = m.households();

    DispatchSolution out;
    out.status = sol.status;
    out.kkt = sol.kkt;
    out.iterations = sol.iterations;
    out.pc_kw.assign(fleet.size(), 0.0);
    out.qc_kvar.assign(fleet.size(), 0.0);
    for (Eigen::Index h = 0; h < H; ++h) {
        const auto i = m.active[static_cast<std::size_t>(h)];
        out.pc_kw[i] = bases.power_to_kw(sol.x(m.pc(h)));
        out.qc_kvar[i] = bases.power_to_kw(sol.x(m.qc(h)));
    }

    const auto red = net.reduced_indices();
    InjectionVector inj = loads;
    for (std::size_t i = 0; i < fleet.size(); ++i) {
        const auto k = red[net.index_of(fleet[i].bus)];
        inj.p_net(k) += bases.power_to_pu(fleet[i].p_av_kw - out.pc_kw[i]);
        inj.q_net(k) += bases.power_to_pu(out.qc_kvar[i]);
    }
    out.profile = voltages_from_injections(sens, inj, net.v_nom);
    out.line_losses_kw = line_losses(net, out.profile);

    // objective breakdown from the raw expressions
    out.terms.losses = bases.power_to_pu(out.line_losses_kw);
    std::vector<double> pc_act, pav_act;
    for (Eigen::Index h = 0; h < H; ++h) {
        const auto i = m.active[static_cast<std::size_t>(h)];
        const double pc = sol.x(m.pc(h));
        const double qc = sol.x(m.qc(h));
        out.terms.inverter += costs.a * pc * pc + costs.b * pc + costs.c * qc * qc +
                              costs.d * (sol.x(m.qp(h)) + sol.x(m.qm(h)));
        pc_act.push_back(out.pc_kw[i]);
        pav_act.push_back(fleet[i].p_av_kw);
    }
    out.terms.fairness = fairness_term(pc_act, pav_act, costs.fairness_mean);
    out.terms.total = out.terms.losses + out.terms.inverter + m.costs.c_kappa * out.terms.fairness;

    out.violations = audit(net, fleet, out.pc_kw, out.qc_kvar, out.profile);
    for (double pc : out.pc_kw) out.total_curtailment_kw += pc;

    std::ostringstream diag;
    if (sol.status != qcqp::Status::optimal) {
        diag << "solver status " << qcqp::to_string(sol.status);
        if (!out.violations.empty()) diag << "; worst constraint: " << out.violations.front();
    } else if (!out.violations.empty()) {
        diag << "audit: " << out.violations.front();
    }
    out.diagnostics = diag.str();
    return out;
}

}  // namespace foid
