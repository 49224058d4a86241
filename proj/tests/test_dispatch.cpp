#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "foid/acflow.hpp"
#include "foid/dispatch.hpp"
#include "foid/harness.hpp"

using namespace foid;

namespace {

/// Objective and feasibility of a dispatch computed straight from the
/// physical expressions, without the assembled problem.
struct Evaluation {
    double objective = 0.0;  ///< rho + phi + c_kappa kappa, per-unit
    double losses_pu = 0.0;
    double inverter_pu = 0.0;
    double fairness = 0.0;
    bool feasible = true;
};

Evaluation evaluate(const Case& c, const std::vector<InverterSpec>& fleet, const std::vector<double>& pc,
                    const std::vector<double>& qc, const CostCoefficients& costs, double tol = 1e-9) {
    const auto& b = c.net.bases;
    Evaluation e;
    std::vector<double> p_out(fleet.size());
    double p_sum = -c.total_load_kw, q_sum = 0.0;
    for (std::size_t i = 0; i < fleet.size(); ++i) {
        const double pav = fleet[i].p_av_kw;
        p_out[i] = pav - pc[i];
        p_sum += p_out[i];
        q_sum += qc[i];
        const double rating = fleet[i].s_rating_kva;
        const double tan_phi = std::tan(std::acos(fleet[i].pf_min));
        if (pc[i] < -tol || pc[i] > pav + tol) e.feasible = false;
        if (p_out[i] * p_out[i] + qc[i] * qc[i] > rating * rating + tol) e.feasible = false;
        if (std::abs(qc[i]) > tan_phi * p_out[i] + tol) e.feasible = false;
        const double pcu = b.power_to_pu(pc[i]), qcu = b.power_to_pu(qc[i]);
        e.inverter_pu += costs.a * pcu * pcu + costs.b * pcu + costs.c * qcu * qcu + costs.d * std::abs(qcu);
    }
    const auto profile =
        voltages_from_injections(c.sens, household_injection(c.net, c.sens, p_out, qc), c.net.v_nom);
    for (std::size_t k = 0; k < c.net.bus_count(); ++k) {
        const double v = profile.v_re(static_cast<Eigen::Index>(k));
        if (v > c.net.v_max + tol || v < c.net.v_min - tol) e.feasible = false;
    }
    if (std::hypot(p_sum, q_sum) > c.net.transformer_s_max_kva + 1e-6) e.feasible = false;
    e.losses_pu = b.power_to_pu(line_losses(c.net, profile));

    std::vector<double> share;
    for (std::size_t i = 0; i < fleet.size(); ++i)
        if (fleet[i].p_av_kw > 0.0) share.push_back(pc[i] / fleet[i].p_av_kw);
    if (!share.empty()) {
        double total = 0.0;
        for (double s : share) total += s;
        const double h = static_cast<double>(share.size());
        const double mean = total / (costs.fairness_mean == FairnessMean::h_plus_one ? h + 1.0 : h);
        for (double s : share) e.fairness += (s - mean) * (s - mean);
    }
    e.objective = e.losses_pu + e.inverter_pu + costs.c_kappa * e.fairness;
    return e;
}

/// Minimizes a convex function on [lo, hi] by golden-section search.
template <class F>
double golden_min(F&& f, double lo, double hi, double* arg = nullptr) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, d = hi;
    for (int i = 0; i < 200 && d - a > 1e-13; ++i) {
        const double x1 = d - g * (d - a), x2 = a + g * (d - a);
        if (f(x1) <= f(x2))
            d = x2;
        else
            a = x1;
    }
    if (arg) *arg = 0.5 * (a + d);
    return f(0.5 * (a + d));
}

/// Slack bus feeding one household through a single long line.
Case two_bus_case(double load_kw) {
    NetworkModel net;
    net.buses = {{0, BusKind::slack, 0.0, 0.0}, {1, BusKind::household, load_kw, 0.0}};
    net.lines = {{0, 1, 0.5, 0.549, 0.230, 0.0, std::nullopt}};
    validate(net);
    return make_case(net);
}

double sum(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

CostCoefficients with_ck(double ck) {
    CostCoefficients costs;
    costs.c_kappa = ck;
    return costs;
}

}  // namespace

TEST(FairnessTerm, EqualSharesAreNotNeutralUnderHPlusOneMean) {
    const std::vector<double> pav(12, 10.0), pc(12, 3.0);
    EXPECT_NEAR(fairness_term(pc, pav), 12.0 * 0.09 / 169.0, 1e-15);
    EXPECT_NEAR(fairness_term(pc, pav, FairnessMean::exact), 0.0, 1e-15);
}

TEST(FairnessTerm, TrivialCases) {
    const std::vector<double> pav(12, 4.0);
    EXPECT_DOUBLE_EQ(fairness_term(std::vector<double>(12, 0.0), pav), 0.0);
    std::vector<double> one(12, 0.0);
    one[11] = 2.0;
    EXPECT_GT(fairness_term(one, pav), 0.0);
    EXPECT_GT(fairness_term(one, pav, FairnessMean::exact), 0.0);
    EXPECT_DOUBLE_EQ(fairness_term({}, {}), 0.0);
}

TEST(FairnessTerm, RejectsZeroAvailablePowerAndMismatch) {
    EXPECT_THROW(fairness_term({0.0, 1.0}, {2.0, 0.0}), PreconditionError);
    EXPECT_THROW(fairness_term({0.0}, {2.0, 1.0}), DimensionError);
}

TEST(Assemble, TwelveHouseholdsGiveFortyEightConvexVariables) {
    const auto c = builtin_case();
    const auto m = assemble(c.net, c.sens, c.loads, c.fleet(6.4), with_ck(0.1), Strategy::foid);
    EXPECT_EQ(m.problem.n, 48);
    EXPECT_EQ(m.households(), 12);
    EXPECT_TRUE(qcqp::check_convexity(m.problem).convex);
    // per household: box (2), power factor (2), split signs (2); voltage bounds on 17 buses
    EXPECT_EQ(m.problem.g.rows(), 12 * 6 + 2 * 17);
    EXPECT_EQ(m.problem.a_eq.rows(), 12);
    // one apparent-power ball per inverter plus the transformer; no line ratings in the built-in case
    EXPECT_EQ(m.problem.quad.size(), 13u);
    EXPECT_EQ(m.problem.quad_names.back(), "transformer");
}

TEST(Assemble, OidIgnoresFairnessWeight) {
    const auto c = builtin_case();
    const auto m = assemble(c.net, c.sens, c.loads, c.fleet(6.4), with_ck(0.1), Strategy::oid);
    EXPECT_DOUBLE_EQ(m.costs.c_kappa, 0.0);
    const auto plain = assemble(c.net, c.sens, c.loads, c.fleet(6.4), with_ck(0.0), Strategy::foid);
    EXPECT_TRUE(m.problem.objective.p.isApprox(plain.problem.objective.p, 1e-15));
}

TEST(Assemble, RejectsBadInputs) {
    const auto c = builtin_case();
    CostCoefficients negative;
    negative.a = -1.0;
    EXPECT_THROW(assemble(c.net, c.sens, c.loads, c.fleet(2.0), negative, Strategy::oid), ValidationError);
    auto fleet = c.fleet(2.0);
    fleet[3].bus = 2;  // a pole
    EXPECT_THROW(assemble(c.net, c.sens, c.loads, fleet, {}, Strategy::oid), ValidationError);
    InjectionVector short_loads = InjectionVector::zero(3);
    EXPECT_THROW(assemble(c.net, c.sens, short_loads, c.fleet(2.0), {}, Strategy::oid), DimensionError);
}

TEST(Assemble, SkipsHouseholdsWithoutPv) {
    const auto c = builtin_case();
    auto fleet = c.fleet(4.0);
    fleet[0] = InverterSpec::sized(fleet[0].bus, 0.0);
    fleet[5] = InverterSpec::sized(fleet[5].bus, 0.0);
    const auto m = assemble(c.net, c.sens, c.loads, fleet, {}, Strategy::foid);
    EXPECT_EQ(m.households(), 10);
    EXPECT_EQ(m.problem.n, 40);
    const auto sol = solve_dispatch(c.net, c.sens, c.loads, fleet, with_ck(0.1), Strategy::foid);
    ASSERT_TRUE(sol.ok()) << sol.diagnostics;
    EXPECT_DOUBLE_EQ(sol.pc_kw[0], 0.0);
    EXPECT_DOUBLE_EQ(sol.qc_kvar[5], 0.0);
}

TEST(SolveDispatch, ZeroPvGivesLoadsOnlyLosses) {
    const auto c = builtin_case();
    const auto sol = solve_dispatch(c.net, c.sens, c.loads, c.fleet(0.0), {}, Strategy::oid);
    EXPECT_EQ(sol.status, qcqp::Status::optimal);
    EXPECT_TRUE(sol.violations.empty());
    for (std::size_t i = 0; i < 12; ++i) {
        EXPECT_DOUBLE_EQ(sol.pc_kw[i], 0.0);
        EXPECT_DOUBLE_EQ(sol.qc_kvar[i], 0.0);
    }
    const double loads_only = line_losses(c.net, voltages_from_injections(c.sens, c.loads, c.net.v_nom));
    EXPECT_GT(loads_only, 0.0);
    EXPECT_NEAR(sol.line_losses_kw, loads_only, 1e-12);
    EXPECT_NEAR(sol.terms.total, c.net.bases.power_to_pu(loads_only), 1e-12);
    EXPECT_DOUBLE_EQ(sol.terms.inverter, 0.0);
}

class TwoBusOracle : public ::testing::TestWithParam<std::tuple<double, Strategy>> {};

// With a single inverter the optimum can be found by nested one-dimensional
// searches: the inner minimum over q_c of a jointly convex function is convex
// in p_c, and for fixed p_c the feasible q_c form an interval.
TEST_P(TwoBusOracle, MatchesNestedSearch) {
    const auto [pv, strategy] = GetParam();
    const auto c = two_bus_case(0.5);
    const auto fleet = c.fleet(pv);
    const auto costs = with_ck(strategy == Strategy::foid ? 0.1 : 0.0);
    const auto& inv = fleet[0];
    const double r = c.sens.r(0, 0), x = c.sens.x(0, 0), s_base = c.net.bases.s_base_kva;
    const double v_load = voltages_from_injections(c.sens, c.loads, c.net.v_nom).v_re(1);
    const double tan_phi = std::tan(std::acos(inv.pf_min));

    auto q_range = [&](double pc) {
        const double p_out = inv.p_av_kw - pc;
        double q_hi = std::min(tan_phi * p_out, std::sqrt(std::max(0.0, inv.s_rating_kva * inv.s_rating_kva - p_out * p_out)));
        double q_lo = -q_hi;
        // v = v_load + (r p_out + x q) / s_base stays within the limits
        q_hi = std::min(q_hi, ((c.net.v_max - v_load) * s_base - r * p_out) / x);
        q_lo = std::max(q_lo, ((c.net.v_min - v_load) * s_base - r * p_out) / x);
        return std::pair{q_lo, q_hi};
    };
    auto value = [&](double pc, double qc) { return evaluate(c, fleet, {pc}, {qc}, costs, 1e-7).objective; };
    auto inner = [&](double pc) {
        const auto [lo, hi] = q_range(pc);
        if (lo > hi) return std::numeric_limits<double>::infinity();
        return golden_min([&](double q) { return value(pc, q); }, lo, hi);
    };
    // feasible p_c form [pc_lo, p_av]
    double lo = 0.0, hi = inv.p_av_kw;
    if (std::isfinite(inner(0.0))) {
        hi = 0.0;
    } else {
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (std::isfinite(inner(mid)) ? hi : lo) = mid;
        }
    }
    double pc_star = 0.0;
    const double best = golden_min(inner, hi, inv.p_av_kw, &pc_star);

    const auto sol = solve_dispatch(c.net, c.sens, c.loads, fleet, costs, strategy);
    ASSERT_TRUE(sol.ok()) << sol.diagnostics;
    EXPECT_NEAR(sol.pc_kw[0], pc_star, 1e-4);
    EXPECT_NEAR(sol.terms.total, best, 1e-9);
    EXPECT_NEAR(value(sol.pc_kw[0], sol.qc_kvar[0]), sol.terms.total, 1e-12);
}

INSTANTIATE_TEST_SUITE_P(SingleInverter, TwoBusOracle,
                         ::testing::Combine(::testing::Values(2.0, 9.0, 15.0, 25.0),
                                            ::testing::Values(Strategy::oid, Strategy::foid)));

struct Scenario {
    double pv;
    Strategy strategy;
    double ck;
};

class BuiltinDispatch : public ::testing::TestWithParam<Scenario> {};

TEST_P(BuiltinDispatch, FeasibleOptimalAndAcCompliant) {
    const auto s = GetParam();
    const auto c = builtin_case();
    const auto fleet = c.fleet(s.pv);
    const auto costs = with_ck(s.ck);
    const auto sol = solve_dispatch(c.net, c.sens, c.loads, fleet, costs, s.strategy);
    ASSERT_EQ(sol.status, qcqp::Status::optimal) << sol.diagnostics;
    EXPECT_TRUE(sol.violations.empty()) << sol.diagnostics;
    EXPECT_LT(sol.kkt.max(), 1e-7);
    EXPECT_NEAR(sol.total_curtailment_kw, sum(sol.pc_kw), 1e-12);

    // breakdown agrees with the raw expressions
    const auto e = evaluate(c, fleet, sol.pc_kw, sol.qc_kvar, costs, 1e-6);
    EXPECT_TRUE(e.feasible);
    EXPECT_NEAR(e.objective, sol.terms.total, 1e-12);
    EXPECT_NEAR(e.losses_pu, sol.terms.losses, 1e-12);
    EXPECT_NEAR(e.fairness, sol.terms.fairness, 1e-12);

    // Convexity: no feasible point on a segment towards another feasible
    // dispatch has a lower objective.
    std::vector<std::pair<std::vector<double>, std::vector<double>>> targets;
    std::vector<double> full(12), none(12, 0.0), half(12);
    for (std::size_t i = 0; i < 12; ++i) {
        full[i] = fleet[i].p_av_kw;
        half[i] = std::min(fleet[i].p_av_kw, sol.pc_kw[i] + 0.5);
    }
    targets.push_back({full, none});
    targets.push_back({half, sol.qc_kvar});
    std::vector<double> shifted_q = sol.qc_kvar;
    for (auto& q : shifted_q) q *= 0.9;
    targets.push_back({sol.pc_kw, shifted_q});
    for (const auto& [pc_t, qc_t] : targets) {
        for (double t : {1e-4, 1e-3, 1e-2, 0.1, 0.5, 1.0}) {
            std::vector<double> pc(12), qc(12);
            for (std::size_t i = 0; i < 12; ++i) {
                pc[i] = sol.pc_kw[i] + t * (pc_t[i] - sol.pc_kw[i]);
                qc[i] = sol.qc_kvar[i] + t * (qc_t[i] - sol.qc_kvar[i]);
            }
            // strict feasibility: a trial may not borrow from the solver's tolerance
            const auto trial = evaluate(c, fleet, pc, qc, costs, 0.0);
            if (trial.feasible) EXPECT_GE(trial.objective, sol.terms.total - 1e-9) << "t " << t;
        }
    }

    std::vector<double> p_out(12);
    for (std::size_t i = 0; i < 12; ++i) p_out[i] = s.pv - sol.pc_kw[i];
    const auto ac = solve_ac(c.net, household_injection(c.net, c.sens, p_out, sol.qc_kvar));
    ASSERT_TRUE(ac.converged);
    for (auto idx : c.net.households()) EXPECT_LE(ac.profile.magnitude(idx), c.net.v_max + 0.01);
}

INSTANTIATE_TEST_SUITE_P(Builtin, BuiltinDispatch,
                         ::testing::Values(Scenario{0.8, Strategy::oid, 0.0}, Scenario{2.4, Strategy::oid, 0.0},
                                           Scenario{4.8, Strategy::oid, 0.0}, Scenario{8.0, Strategy::oid, 0.0},
                                           Scenario{12.0, Strategy::oid, 0.0}, Scenario{14.77, Strategy::oid, 0.0},
                                           Scenario{4.8, Strategy::foid, 0.01}, Scenario{8.0, Strategy::foid, 0.05},
                                           Scenario{12.0, Strategy::foid, 0.1}, Scenario{14.77, Strategy::foid, 0.1}));

TEST(SolveDispatch, OidObjectiveNeverAboveFoidWithoutFairness) {
    const auto c = builtin_case();
    for (int k = 0; k < 16; ++k) {
        const double pv = 0.8 * k;
        const auto oid = solve_dispatch(c.net, c.sens, c.loads, c.fleet(pv), {}, Strategy::oid);
        const auto foid = solve_dispatch(c.net, c.sens, c.loads, c.fleet(pv), with_ck(0.1), Strategy::foid);
        ASSERT_TRUE(oid.ok() && foid.ok()) << "pv " << pv;
        EXPECT_LE(oid.terms.losses + oid.terms.inverter, foid.terms.losses + foid.terms.inverter + 1e-9) << "pv " << pv;
        if (oid.total_curtailment_kw > 1e-3)
            EXPECT_LE(foid.terms.fairness, oid.terms.fairness + 1e-6) << "pv " << pv;
    }
}

TEST(SolveDispatch, LineRatingIsRespected) {
    auto c = builtin_case();
    const double pv = 8.0;
    const auto free = solve_dispatch(c.net, c.sens, c.loads, c.fleet(pv), {}, Strategy::oid);
    ASSERT_TRUE(free.ok());
    const double i_free = c.net.bases.current_to_a(line_current_magnitudes(c.net, free.profile)(0));
    auto net = c.net;
    net.lines[0].i_max_a = 0.8 * i_free;
    validate(net);
    const auto rated = make_case(net);
    const auto m = assemble(rated.net, rated.sens, rated.loads, rated.fleet(pv), {}, Strategy::oid);
    EXPECT_EQ(m.problem.quad.size(), 14u);
    const auto sol = solve_dispatch(rated.net, rated.sens, rated.loads, rated.fleet(pv), {}, Strategy::oid);
    ASSERT_TRUE(sol.ok()) << sol.diagnostics;
    const double i = rated.net.bases.current_to_a(line_current_magnitudes(rated.net, sol.profile)(0));
    EXPECT_LE(i, 0.8 * i_free * (1.0 + 1e-6));
    EXPECT_GT(i, 0.8 * i_free * (1.0 - 1e-4));  // binding
    EXPECT_GT(sol.total_curtailment_kw, free.total_curtailment_kw);
}

TEST(SolveDispatch, TransformerLimitBinds) {
    auto net = builtin_network();
    net.transformer_s_max_kva = 40.0;
    const auto c = make_case(net);
    const auto fleet = c.fleet(12.0);
    const auto sol = solve_dispatch(c.net, c.sens, c.loads, fleet, {}, Strategy::oid);
    ASSERT_TRUE(sol.ok()) << sol.diagnostics;
    double p = -c.total_load_kw, q = 0.0;
    for (std::size_t i = 0; i < 12; ++i) {
        p += fleet[i].p_av_kw - sol.pc_kw[i];
        q += sol.qc_kvar[i];
    }
    EXPECT_LE(std::hypot(p, q), 40.0 + 1e-6);
    EXPECT_GT(std::hypot(p, q), 40.0 - 1e-3);
}

TEST(SolveDispatch, InfeasibleTransformerIsDiagnosed) {
    // 9.6 kW of PV cannot offset 17 kW of load through a 5 kVA transformer
    auto net = builtin_network();
    net.transformer_s_max_kva = 5.0;
    const auto c = make_case(net);
    const auto sol = solve_dispatch(c.net, c.sens, c.loads, c.fleet(0.8), {}, Strategy::oid);
    EXPECT_EQ(sol.status, qcqp::Status::infeasible);
    EXPECT_FALSE(sol.ok());
    EXPECT_NE(sol.diagnostics.find("infeasible"), std::string::npos);
}

TEST(SolveDispatch, ExactMeanFlagChangesOnlyFairness) {
    const auto c = builtin_case();
    auto costs = with_ck(0.1);
    costs.fairness_mean = FairnessMean::exact;
    const auto sol = solve_dispatch(c.net, c.sens, c.loads, c.fleet(12.0), costs, Strategy::foid);
    ASSERT_TRUE(sol.ok()) << sol.diagnostics;
    const auto e = evaluate(c, c.fleet(12.0), sol.pc_kw, sol.qc_kvar, costs, 1e-6);
    EXPECT_NEAR(e.fairness, sol.terms.fairness, 1e-12);
    const auto default_mean = solve_dispatch(c.net, c.sens, c.loads, c.fleet(12.0), with_ck(0.1), Strategy::foid);
    EXPECT_GT(std::abs(default_mean.total_curtailment_kw - sol.total_curtailment_kw), 1e-3);
}
