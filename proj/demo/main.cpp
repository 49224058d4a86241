// Solves one scenario of the built-in feeder with each strategy and prints
// the per-household curtailment.

#include <cstdio>

#include "foid/foid.hpp"

int main() {
    const auto kase = foid::builtin_case();
    const double pv = 8.0;  // kW available per household
    std::printf("PV %.1f kW per household, PV:load %.2f\n\n", pv, kase.ratio(pv));
    std::printf("%-8s %10s %10s %8s  per-household curtailment (kW)\n", "strategy", "curt. kW", "losses kW", "max V");
    const struct {
        foid::SweepStrategy s;
        double ck;
    } runs[] = {{foid::SweepStrategy::oid, 0.0}, {foid::SweepStrategy::foid, 0.1}, {foid::SweepStrategy::volt_var, 0.0}};
    for (const auto& r : runs) {
        const auto row = foid::run_scenario(kase, pv, r.s, r.ck);
        std::printf("%-8s %10.3f %10.3f %8.4f ", row.strategy.c_str(), row.total_curtailment_kw, row.losses_kw,
                    row.max_v_pu);
        for (double pc : row.pc_kw) std::printf(" %5.2f", pc);
        std::printf("  [%s]\n", row.status.c_str());
    }
}
