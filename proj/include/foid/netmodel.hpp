#pragma once

// Electrical model of a low-voltage feeder: topology, per-unit bases,
// admittance matrix and the voltage sensitivity matrices obtained from the
// inverse of the slack-reduced admittance matrix.

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "foid/error.hpp"

namespace foid {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class BusKind { slack, pole, household };

inline const char* to_string(BusKind kind) {
    switch (kind) {
        case BusKind::slack: return "slack";
        case BusKind::pole: return "pole";
        case BusKind::household: return "household";
    }
    return "?";
}

struct Bus {
    int id = 0;
    BusKind kind = BusKind::pole;
    double load_p_kw = 0.0;
    double load_q_kvar = 0.0;
};

struct Line {
    int from = 0;
    int to = 0;
    double length_km = 0.0;
    double r_ohm_per_km = 0.0;
    double l_mh_per_km = 0.0;
    double c_uf_per_km = 0.0;
    std::optional<double> i_max_a;  ///< ampacity; empty means unconstrained
};

/// Base quantities of the single-phase equivalent circuit.
struct PerUnitBases {
    double s_base_kva = 75.0;
    double v_base_v = 415.0 / std::numbers::sqrt3;

    double z_base_ohm() const { return v_base_v * v_base_v / (s_base_kva * 1e3); }
    double i_base_a() const { return s_base_kva * 1e3 / v_base_v; }

    Complex impedance_to_pu(Complex ohm) const { return ohm / z_base_ohm(); }
    Complex impedance_to_ohm(Complex pu) const { return pu * z_base_ohm(); }
    double power_to_pu(double kw) const { return kw / s_base_kva; }
    double power_to_kw(double pu) const { return pu * s_base_kva; }
    double current_to_pu(double a) const { return a / i_base_a(); }
    double current_to_a(double pu) const { return pu * i_base_a(); }
};

struct NetworkModel {
    std::vector<Bus> buses;
    std::vector<Line> lines;
    double transformer_s_max_kva = 75.0;
    double v_nom = 1.0;
    double v_min = 0.95;
    double v_max = 1.05;
    double frequency_hz = 50.0;
    PerUnitBases bases;
    bool include_shunts = false;

    std::size_t bus_count() const { return buses.size(); }

    /// Position of the bus with the given id in `buses`.
    std::size_t index_of(int id) const {
        for (std::size_t i = 0; i < buses.size(); ++i)
            if (buses[i].id == id) return i;
        throw ValidationError("unknown bus id " + std::to_string(id));
    }

    std::size_t slack_index() const {
        for (std::size_t i = 0; i < buses.size(); ++i)
            if (buses[i].kind == BusKind::slack) return i;
        throw ValidationError("network has no slack bus");
    }

    /// Bus indices of households in file order; household h (0-based) is
    /// `households()[h]`.
    std::vector<std::size_t> households() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < buses.size(); ++i)
            if (buses[i].kind == BusKind::household) out.push_back(i);
        return out;
    }

    /// Map from full bus index to reduced (slack removed) index, -1 for slack.
    std::vector<int> reduced_indices() const {
        std::vector<int> map(buses.size(), -1);
        const auto slack = slack_index();
        int k = 0;
        for (std::size_t i = 0; i < buses.size(); ++i)
            if (i != slack) map[i] = k++;
        return map;
    }
};

/// Series impedance in ohms. Shunt capacitance is handled by build_ybus.
inline Complex line_impedance(const Line& line, double frequency_hz) {
    if (!(frequency_hz > 0.0)) throw PreconditionError("frequency must be positive");
    const double x_per_km = 2.0 * std::numbers::pi * frequency_hz * line.l_mh_per_km * 1e-3;
    return Complex(line.r_ohm_per_km, x_per_km) * line.length_km;
}

inline Complex line_impedance_pu(const NetworkModel& net, const Line& line) {
    return net.bases.impedance_to_pu(line_impedance(line, net.frequency_hz));
}

inline Complex line_admittance_pu(const NetworkModel& net, const Line& line) {
    const Complex z = line_impedance_pu(net, line);
    if (std::abs(z) < 1e-15)
        throw SingularError("line " + std::to_string(line.from) + "-" + std::to_string(line.to) +
                            " has zero impedance");
    return 1.0 / z;
}

/// Half of the line charging admittance, placed at each end in the pi model.
inline Complex line_half_shunt_pu(const NetworkModel& net, const Line& line) {
    const double b_siemens =
        2.0 * std::numbers::pi * net.frequency_hz * line.c_uf_per_km * 1e-6 * line.length_km;
    return Complex(0.0, 0.5 * b_siemens * net.bases.z_base_ohm());
}

/// True when every bus is reachable from the slack bus through the lines.
/// On failure `unreachable` receives the ids of the isolated buses.
inline bool is_connected(const NetworkModel& net, std::vector<int>* unreachable = nullptr) {
    const std::size_t n = net.buses.size();
    if (n == 0) return false;
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& l : net.lines) {
        const auto a = net.index_of(l.from);
        const auto b = net.index_of(l.to);
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<bool> seen(n, false);
    std::queue<std::size_t> todo;
    const auto start = net.slack_index();
    todo.push(start);
    seen[start] = true;
    while (!todo.empty()) {
        const auto u = todo.front();
        todo.pop();
        for (auto v : adj[u])
            if (!seen[v]) {
                seen[v] = true;
                todo.push(v);
            }
    }
    bool ok = true;
    for (std::size_t i = 0; i < n; ++i)
        if (!seen[i]) {
            ok = false;
            if (unreachable) unreachable->push_back(net.buses[i].id);
        }
    return ok;
}

inline bool is_radial(const NetworkModel& net) {
    return net.lines.size() + 1 == net.buses.size() && is_connected(net);
}

/// Checks every NetworkModel, Bus and Line invariant; throws ValidationError
/// naming the first one violated.
inline void validate(const NetworkModel& net) {
    if (net.buses.empty()) throw ValidationError("network has no buses");
    std::unordered_map<int, int> seen_ids;
    int slack_count = 0;
    for (const auto& b : net.buses) {
        if (seen_ids[b.id]++ > 0) throw ValidationError("duplicate bus id " + std::to_string(b.id));
        if (b.kind == BusKind::slack) ++slack_count;
        if (b.kind == BusKind::household && b.load_p_kw < 0.0)
            throw ValidationError("household bus " + std::to_string(b.id) + " has negative load_p");
        if (b.kind == BusKind::pole && (b.load_p_kw != 0.0 || b.load_q_kvar != 0.0))
            throw ValidationError("pole bus " + std::to_string(b.id) + " carries load");
        if (!std::isfinite(b.load_p_kw) || !std::isfinite(b.load_q_kvar))
            throw ValidationError("bus " + std::to_string(b.id) + " has non-finite load");
    }
    if (slack_count != 1)
        throw ValidationError("network must have exactly one slack bus, found " +
                              std::to_string(slack_count));
    for (const auto& l : net.lines) {
        const std::string name = "line " + std::to_string(l.from) + "-" + std::to_string(l.to);
        if (!seen_ids.contains(l.from) || !seen_ids.contains(l.to))
            throw ValidationError(name + " references an unknown bus");
        if (l.from == l.to) throw ValidationError(name + " connects a bus to itself");
        if (!(l.length_km > 0.0)) throw ValidationError(name + " must have length > 0");
        if (!(l.r_ohm_per_km > 0.0)) throw ValidationError(name + " must have r_per_km > 0");
        if (l.l_mh_per_km < 0.0 || l.c_uf_per_km < 0.0)
            throw ValidationError(name + " has negative inductance or capacitance");
        if (l.i_max_a && !(*l.i_max_a > 0.0)) throw ValidationError(name + " must have i_max > 0");
    }
    if (!(net.v_min < net.v_nom && net.v_nom < net.v_max))
        throw ValidationError("voltage limits must satisfy v_min < v_nom < v_max");
    if (!(net.transformer_s_max_kva > 0.0))
        throw ValidationError("transformer_s_max must be positive");
    if (!(net.frequency_hz > 0.0)) throw ValidationError("frequency must be positive");
    if (!(net.bases.s_base_kva > 0.0) || !(net.bases.v_base_v > 0.0))
        throw ValidationError("per-unit bases must be positive");
    std::vector<int> isolated;
    if (!is_connected(net, &isolated))
        throw ValidationError("network is disconnected: bus " + std::to_string(isolated.front()) +
                              " is not reachable from the slack bus");
}

/// Nodal admittance matrix in per-unit, indexed like `net.buses`.
inline ComplexMatrix build_ybus(const NetworkModel& net) {
    const auto n = static_cast<Eigen::Index>(net.buses.size());
    ComplexMatrix y = ComplexMatrix::Zero(n, n);
    for (const auto& l : net.lines) {
        const auto a = static_cast<Eigen::Index>(net.index_of(l.from));
        const auto b = static_cast<Eigen::Index>(net.index_of(l.to));
        const Complex ys = line_admittance_pu(net, l);
        y(a, a) += ys;
        y(b, b) += ys;
        y(a, b) -= ys;
        y(b, a) -= ys;
        if (net.include_shunts) {
            const Complex sh = line_half_shunt_pu(net, l);
            y(a, a) += sh;
            y(b, b) += sh;
        }
    }
    return y;
}

/// Real and imaginary parts of the inverse slack-reduced admittance matrix.
/// Row/column k corresponds to full bus index `full_index[k]`.
struct SensitivityMatrices {
    Matrix r;
    Matrix x;
    std::size_t slack = 0;
    std::vector<std::size_t> full_index;

    Eigen::Index size() const { return r.rows(); }
};

inline ComplexMatrix reduce(const ComplexMatrix& ybus, std::size_t slack) {
    const auto n = ybus.rows();
    const auto s = static_cast<Eigen::Index>(slack);
    ComplexMatrix red(n - 1, n - 1);
    for (Eigen::Index i = 0, ri = 0; i < n; ++i) {
        if (i == s) continue;
        for (Eigen::Index j = 0, rj = 0; j < n; ++j) {
            if (j == s) continue;
            red(ri, rj++) = ybus(i, j);
        }
        ++ri;
    }
    return red;
}

inline SensitivityMatrices sensitivity_matrices(const ComplexMatrix& ybus, std::size_t slack) {
    if (ybus.rows() != ybus.cols()) throw DimensionError("ybus must be square");
    if (slack >= static_cast<std::size_t>(ybus.rows())) throw DimensionError("slack index out of range");
    const ComplexMatrix red = reduce(ybus, slack);
    Eigen::FullPivLU<ComplexMatrix> lu(red);
    lu.setThreshold(1e-13);
    if (!lu.isInvertible()) throw SingularError("reduced admittance matrix is singular");
    ComplexMatrix z = lu.inverse();
    // Y is complex symmetric, so is its inverse; remove rounding asymmetry.
    z = (0.5 * (z + z.transpose())).eval();

    SensitivityMatrices out;
    out.r = z.real();
    out.x = z.imag();
    out.slack = slack;
    for (std::size_t i = 0; i < static_cast<std::size_t>(ybus.rows()); ++i)
        if (i != slack) out.full_index.push_back(i);
    return out;
}

inline SensitivityMatrices sensitivity_matrices(const NetworkModel& net) {
    return sensitivity_matrices(build_ybus(net), net.slack_index());
}

}  // namespace foid
