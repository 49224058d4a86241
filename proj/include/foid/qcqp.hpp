#pragma once

// Dense primal-dual interior-point solver for convex QCQPs
//
//   minimize    1/2 x'P0 x + q0'x + r0
//   subject to  A x  = b
//               G x <= h
//               1/2 x'Pi x + qi'x + ri <= 0,  i = 1..k
//
// Each quadratic row is rewritten as a second-order cone after factoring
// Pi = F'F, so the solver works on
//
//   minimize 1/2 x'P0 x + q0'x   s.t.  A x = b,  G x + s = h,  s in K
//
// with K a product of the nonnegative orthant and second-order cones. Steps
// use Nesterov-Todd scaling and a Mehrotra predictor-corrector.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "foid/error.hpp"

namespace foid::qcqp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// 1/2 x'P x + q'x + r
struct QuadraticForm {
    Matrix p;
    Vector q;
    double r = 0.0;

    double operator()(const Vector& x) const { return 0.5 * x.dot(p * x) + q.dot(x) + r; }
    Vector gradient(const Vector& x) const { return p * x + q; }
};

struct ConvexQCQP {
    Index n = 0;
    QuadraticForm objective;
    Matrix a_eq;  ///< p x n
    Vector b_eq;
    Matrix g;  ///< m x n, G x <= h
    Vector h;
    std::vector<QuadraticForm> quad;
    std::vector<std::string> quad_names;  ///< optional, used in reports

    /// Empty problem with n variables and zero objective.
    static ConvexQCQP with_variables(Index n) {
        ConvexQCQP prob;
        prob.n = n;
        prob.objective = {Matrix::Zero(n, n), Vector::Zero(n), 0.0};
        prob.a_eq = Matrix::Zero(0, n);
        prob.b_eq = Vector::Zero(0);
        prob.g = Matrix::Zero(0, n);
        prob.h = Vector::Zero(0);
        return prob;
    }

    void add_equality(const Vector& row, double rhs) {
        a_eq.conservativeResize(a_eq.rows() + 1, n);
        a_eq.row(a_eq.rows() - 1) = row.transpose();
        b_eq.conservativeResize(b_eq.size() + 1);
        b_eq(b_eq.size() - 1) = rhs;
    }

    void add_inequality(const Vector& row, double rhs) {
        g.conservativeResize(g.rows() + 1, n);
        g.row(g.rows() - 1) = row.transpose();
        h.conservativeResize(h.size() + 1);
        h(h.size() - 1) = rhs;
    }

    void add_quadratic(QuadraticForm form, std::string name = {}) {
        quad.push_back(std::move(form));
        quad_names.push_back(name.empty() ? "quad[" + std::to_string(quad.size() - 1) + "]" : std::move(name));
    }

    std::string quad_name(std::size_t i) const {
        return i < quad_names.size() ? quad_names[i] : "quad[" + std::to_string(i) + "]";
    }
};

enum class Status { optimal, infeasible, max_iter, numerical };

inline const char* to_string(Status s) {
    switch (s) {
        case Status::optimal: return "optimal";
        case Status::infeasible: return "infeasible";
        case Status::max_iter: return "max_iter";
        case Status::numerical: return "numerical";
    }
    return "?";
}

struct KktResiduals {
    double stationarity = 0.0;  ///< gradient of the Lagrangian of the original problem
    double primal = 0.0;        ///< equality residual and constraint violation
    double dual = 0.0;          ///< conic dual residual and multiplier sign violation
    double gap = 0.0;           ///< complementarity s'z

    double max() const { return std::max({stationarity, primal, dual, gap}); }
};

struct SolverSolution {
    Vector x;
    Vector y;       ///< equality multipliers
    Vector z_lin;   ///< linear inequality multipliers (>= 0)
    Vector z_quad;  ///< quadratic constraint multipliers (>= 0)
    Status status = Status::numerical;
    KktResiduals kkt;
    int iterations = 0;
    double objective = 0.0;
    double dual_objective = -std::numeric_limits<double>::infinity();
};

struct SolverOptions {
    double tolerance = 1e-7;
    int max_iterations = 100;
    double step_fraction = 0.99;
    int refine_iterations = 3;  ///< extra iterations after the tolerance is met
};

// ---------------------------------------------------------------------------
// Convexity check

struct ConvexityReport {
    bool convex = true;
    std::vector<std::string> failing;
};

/// Attempts a Cholesky factorization of P + tol*I for the objective and
/// every quadratic row; a failure marks the block as not PSD.
inline bool is_psd(const Matrix& p, double tol = 1e-9) {
    if (p.rows() != p.cols()) return false;
    if (p.rows() == 0) return true;
    if (!p.isApprox(p.transpose(), 1e-10) && (p - p.transpose()).cwiseAbs().maxCoeff() > 1e-10) return false;
    const double scale = std::max(1.0, p.cwiseAbs().maxCoeff());
    const Matrix shifted = 0.5 * (p + p.transpose()) + tol * scale * Matrix::Identity(p.rows(), p.cols());
    Eigen::LLT<Matrix> llt(shifted);
    return llt.info() == Eigen::Success;
}

inline ConvexityReport check_convexity(const ConvexQCQP& prob, double tol = 1e-9) {
    ConvexityReport rep;
    if (!is_psd(prob.objective.p, tol)) rep.failing.push_back("objective");
    for (std::size_t i = 0; i < prob.quad.size(); ++i)
        if (!is_psd(prob.quad[i].p, tol)) rep.failing.push_back(prob.quad_name(i));
    rep.convex = rep.failing.empty();
    return rep;
}

inline void check_dimensions(const ConvexQCQP& prob) {
    const Index n = prob.n;
    auto bad = [](const std::string& what) { throw DimensionError("qcqp: " + what); };
    if (prob.objective.p.rows() != n || prob.objective.p.cols() != n) bad("objective P must be n x n");
    if (prob.objective.q.size() != n) bad("objective q must have n entries");
    if (prob.a_eq.cols() != n && prob.a_eq.rows() > 0) bad("A must have n columns");
    if (prob.a_eq.rows() != prob.b_eq.size()) bad("A and b disagree");
    if (prob.g.cols() != n && prob.g.rows() > 0) bad("G must have n columns");
    if (prob.g.rows() != prob.h.size()) bad("G and h disagree");
    for (const auto& qf : prob.quad)
        if (qf.p.rows() != n || qf.p.cols() != n || qf.q.size() != n) bad("quadratic row has wrong size");
}

// ---------------------------------------------------------------------------
// Cone algebra on K = R+^nl x Q^{d1} x ... x Q^{dk}

namespace detail {

struct Cone {
    Index nl = 0;
    std::vector<Index> soc;  ///< dimensions
    std::vector<Index> offset;

    Index size() const {
        Index m = nl;
        for (auto d : soc) m += d;
        return m;
    }
    double degree() const { return static_cast<double>(nl + static_cast<Index>(soc.size())); }
};

inline Vector identity(const Cone& k) {
    Vector e = Vector::Zero(k.size());
    e.head(k.nl).setOnes();
    for (std::size_t c = 0; c < k.soc.size(); ++c) e(k.offset[c]) = 1.0;
    return e;
}

/// Jordan product u o v.
inline Vector jordan(const Cone& k, const Vector& u, const Vector& v) {
    Vector out(k.size());
    out.head(k.nl) = u.head(k.nl).cwiseProduct(v.head(k.nl));
    for (std::size_t c = 0; c < k.soc.size(); ++c) {
        const Index o = k.offset[c], d = k.soc[c];
        out(o) = u.segment(o, d).dot(v.segment(o, d));
        out.segment(o + 1, d - 1) = u(o) * v.segment(o + 1, d - 1) + v(o) * u.segment(o + 1, d - 1);
    }
    return out;
}

/// Solves u o x = w for x.
inline Vector jordan_divide(const Cone& k, const Vector& u, const Vector& w) {
    Vector out(k.size());
    out.head(k.nl) = w.head(k.nl).cwiseQuotient(u.head(k.nl));
    for (std::size_t c = 0; c < k.soc.size(); ++c) {
        const Index o = k.offset[c], d = k.soc[c];
        const double u0 = u(o);
        const auto u1 = u.segment(o + 1, d - 1);
        const auto w1 = w.segment(o + 1, d - 1);
        const double det = u0 * u0 - u1.squaredNorm();
        const double x0 = (u0 * w(o) - u1.dot(w1)) / det;
        out(o) = x0;
        out.segment(o + 1, d - 1) = (w1 - x0 * u1) / u0;
    }
    return out;
}

/// Largest alpha with u + alpha du in K (infinity when unbounded).
inline double max_step(const Cone& k, const Vector& u, const Vector& du) {
    double alpha = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < k.nl; ++i)
        if (du(i) < 0.0) alpha = std::min(alpha, -u(i) / du(i));
    for (std::size_t c = 0; c < k.soc.size(); ++c) {
        const Index o = k.offset[c], d = k.soc[c];
        const double u0 = u(o), d0 = du(o);
        const auto u1 = u.segment(o + 1, d - 1);
        const auto d1 = du.segment(o + 1, d - 1);
        // f(a) = (u0 + a d0)^2 - |u1 + a d1|^2, f(0) > 0
        const double qa = d0 * d0 - d1.squaredNorm();
        const double qb = 2.0 * (u0 * d0 - u1.dot(d1));
        const double qc = u0 * u0 - u1.squaredNorm();
        double root = std::numeric_limits<double>::infinity();
        const double scale = std::max({std::abs(qa), std::abs(qb), std::abs(qc), 1e-300});
        if (std::abs(qa) <= 1e-14 * scale) {
            if (qb < 0.0) root = -qc / qb;
        } else {
            const double disc = qb * qb - 4.0 * qa * qc;
            if (disc >= 0.0) {
                const double sq = std::sqrt(disc);
                const double t = -0.5 * (qb + (qb >= 0.0 ? sq : -sq));
                for (double r : {t / qa, t != 0.0 ? qc / t : std::numeric_limits<double>::infinity()})
                    if (r > 0.0) root = std::min(root, r);
            }
        }
        alpha = std::min(alpha, root);
    }
    return alpha;
}

/// Nesterov-Todd scaling: symmetric block-diagonal W with W z = W^{-1} s.
struct Scaling {
    Matrix w;
    Matrix w_inv;
    Vector lambda;  ///< W z
};

inline Scaling nt_scaling(const Cone& k, const Vector& s, const Vector& z) {
    const Index m = k.size();
    Scaling sc;
    sc.w = Matrix::Zero(m, m);
    sc.w_inv = Matrix::Zero(m, m);
    for (Index i = 0; i < k.nl; ++i) {
        const double wi = std::sqrt(s(i) / z(i));
        sc.w(i, i) = wi;
        sc.w_inv(i, i) = 1.0 / wi;
    }
    for (std::size_t c = 0; c < k.soc.size(); ++c) {
        const Index o = k.offset[c], d = k.soc[c];
        const Vector sb = s.segment(o, d);
        const Vector zb = z.segment(o, d);
        const double sn = std::sqrt(std::max(sb(0) * sb(0) - sb.tail(d - 1).squaredNorm(), 1e-300));
        const double zn = std::sqrt(std::max(zb(0) * zb(0) - zb.tail(d - 1).squaredNorm(), 1e-300));
        const Vector sbar = sb / sn;
        const Vector zbar = zb / zn;
        const double gamma = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));
        Vector wbar(d);
        wbar(0) = (sbar(0) + zbar(0)) / (2.0 * gamma);
        wbar.tail(d - 1) = (sbar.tail(d - 1) - zbar.tail(d - 1)) / (2.0 * gamma);
        const double eta = std::sqrt(sn / zn);

        Matrix wb = Matrix::Identity(d, d);
        wb(0, 0) = wbar(0);
        wb.block(0, 1, 1, d - 1) = wbar.tail(d - 1).transpose();
        wb.block(1, 0, d - 1, 1) = wbar.tail(d - 1);
        wb.block(1, 1, d - 1, d - 1) += wbar.tail(d - 1) * wbar.tail(d - 1).transpose() / (1.0 + wbar(0));

        // inverse of wbar-matrix is J wb J
        Matrix wbi = wb;
        wbi.block(0, 1, 1, d - 1) *= -1.0;
        wbi.block(1, 0, d - 1, 1) *= -1.0;

        sc.w.block(o, o, d, d) = eta * wb;
        sc.w_inv.block(o, o, d, d) = wbi / eta;
    }
    sc.lambda = sc.w * z;
    return sc;
}

/// Pushes u into the interior so that every block has "eigenvalues" >= 1.
inline Vector interior_start(const Cone& k, Vector u) {
    for (Index i = 0; i < k.nl; ++i) u(i) = std::max(u(i), 1.0);
    for (std::size_t c = 0; c < k.soc.size(); ++c) {
        const Index o = k.offset[c], d = k.soc[c];
        const double tail = u.segment(o + 1, d - 1).norm();
        if (u(o) - tail < 1.0) u(o) = tail + 1.0;
    }
    return u;
}

/// The conic form of a QCQP: linear rows first, then one cone per
/// quadratic row of rank >= 1.
struct ConicForm {
    Cone cone;
    Matrix g;
    Vector h;
    Index n_linear_rows = 0;  ///< rows coming from the original G
    /// For each original quadratic row: cone index, or -1 when it was rank 0
    /// and became the linear row `linear_row`.
    std::vector<int> quad_cone;
    std::vector<Index> quad_linear_row;
    /// Per cone: head rho of the completed-square form, or -1 for the
    /// rotated form.
    std::vector<double> quad_rho;
};

inline ConicForm to_conic(const ConvexQCQP& prob) {
    const Index n = prob.n;
    ConicForm cf;
    std::vector<Vector> lin_rows;
    std::vector<double> lin_rhs;
    for (Index i = 0; i < prob.g.rows(); ++i) {
        lin_rows.emplace_back(prob.g.row(i).transpose());
        lin_rhs.push_back(prob.h(i));
    }
    cf.n_linear_rows = prob.g.rows();

    struct Block {
        Matrix rows;
        Vector rhs;
    };
    std::vector<Block> blocks;
    cf.quad_cone.assign(prob.quad.size(), -1);
    cf.quad_linear_row.assign(prob.quad.size(), -1);
    for (std::size_t i = 0; i < prob.quad.size(); ++i) {
        const auto& qf = prob.quad[i];
        const Matrix psym = 0.5 * (qf.p + qf.p.transpose());
        Eigen::SelfAdjointEigenSolver<Matrix> eig(psym);
        const Vector ev = eig.eigenvalues();
        const double lmax = ev.size() ? std::max(ev.maxCoeff(), 0.0) : 0.0;
        std::vector<Index> keep;
        for (Index j = 0; j < ev.size(); ++j)
            if (ev(j) > 1e-12 * std::max(1.0, lmax)) keep.push_back(j);
        if (keep.empty()) {
            // linear: q'x + r <= 0
            cf.quad_linear_row[i] = static_cast<Index>(lin_rows.size());
            lin_rows.emplace_back(qf.q);
            lin_rhs.push_back(-qf.r);
            continue;
        }
        const Index rank = static_cast<Index>(keep.size());
        Matrix f(rank, n);
        for (Index j = 0; j < rank; ++j)
            f.row(j) = std::sqrt(ev(keep[static_cast<std::size_t>(j)])) *
                       eig.eigenvectors().col(keep[static_cast<std::size_t>(j)]).transpose();
        // When q lies in the range of F' the square can be completed:
        // 1/2 |F x + u|^2 <= rho^2 / 2 with F'u = q, a plain cone
        // (rho, F x + u) with constant head. It is much better conditioned
        // than the rotated form, whose head moves with x.
        Vector u(rank);
        Vector q_range = Vector::Zero(n);
        for (Index j = 0; j < rank; ++j) {
            const auto v = eig.eigenvectors().col(keep[static_cast<std::size_t>(j)]);
            const double proj = v.dot(qf.q);
            u(j) = proj / std::sqrt(ev(keep[static_cast<std::size_t>(j)]));
            q_range += proj * v;
        }
        const double rho_sq = u.squaredNorm() - 2.0 * qf.r;
        const double q_scale = std::max({1.0, qf.q.norm(), std::sqrt(lmax)});
        Block b;
        if ((qf.q - q_range).norm() <= 1e-12 * q_scale && rho_sq >= 0.0) {
            b = {Matrix::Zero(rank + 1, n), Vector::Zero(rank + 1)};
            b.rhs(0) = std::sqrt(rho_sq);
            b.rows.block(1, 0, rank, n) = -f;
            b.rhs.tail(rank) = u;
            cf.quad_rho.push_back(std::sqrt(rho_sq));
        } else {
            // |F x|^2 <= 2 w, w = -q'x - r  <=>  (w + 1/2, F x, w - 1/2) in Q
            b = {Matrix::Zero(rank + 2, n), Vector::Zero(rank + 2)};
            b.rows.row(0) = qf.q.transpose();
            b.rhs(0) = 0.5 - qf.r;
            b.rows.block(1, 0, rank, n) = -f;
            b.rows.row(rank + 1) = qf.q.transpose();
            b.rhs(rank + 1) = -0.5 - qf.r;
            cf.quad_rho.push_back(-1.0);
        }
        cf.quad_cone[i] = static_cast<int>(blocks.size());
        blocks.push_back(std::move(b));
    }

    cf.cone.nl = static_cast<Index>(lin_rows.size());
    Index m = cf.cone.nl;
    for (const auto& b : blocks) {
        cf.cone.offset.push_back(m);
        cf.cone.soc.push_back(b.rows.rows());
        m += b.rows.rows();
    }
    cf.g = Matrix::Zero(m, n);
    cf.h = Vector::Zero(m);
    for (Index i = 0; i < cf.cone.nl; ++i) {
        cf.g.row(i) = lin_rows[static_cast<std::size_t>(i)].transpose();
        cf.h(i) = lin_rhs[static_cast<std::size_t>(i)];
    }
    for (std::size_t c = 0; c < blocks.size(); ++c) {
        cf.g.block(cf.cone.offset[c], 0, blocks[c].rows.rows(), n) = blocks[c].rows;
        cf.h.segment(cf.cone.offset[c], blocks[c].rows.rows()) = blocks[c].rhs;
    }
    return cf;
}

}  // namespace detail

/// KKT residuals of x and the multipliers against the original problem.
inline KktResiduals kkt_residuals(const ConvexQCQP& prob, const Vector& x, const Vector& y, const Vector& z_lin,
                                  const Vector& z_quad) {
    KktResiduals r;
    Vector grad = prob.objective.gradient(x);
    if (prob.a_eq.rows() > 0) grad += prob.a_eq.transpose() * y;
    if (prob.g.rows() > 0) grad += prob.g.transpose() * z_lin;
    for (std::size_t i = 0; i < prob.quad.size(); ++i)
        grad += z_quad(static_cast<Index>(i)) * prob.quad[i].gradient(x);
    r.stationarity = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;

    double primal = 0.0;
    if (prob.a_eq.rows() > 0) primal = (prob.a_eq * x - prob.b_eq).cwiseAbs().maxCoeff();
    if (prob.g.rows() > 0) primal = std::max(primal, (prob.g * x - prob.h).maxCoeff());
    for (const auto& qf : prob.quad) primal = std::max(primal, qf(x));
    r.primal = std::max(primal, 0.0);

    double dual = 0.0;
    if (z_lin.size()) dual = std::max(dual, -z_lin.minCoeff());
    if (z_quad.size()) dual = std::max(dual, -z_quad.minCoeff());
    r.dual = dual;

    double gap = 0.0;
    if (prob.g.rows() > 0) gap += z_lin.dot(prob.h - prob.g * x);
    for (std::size_t i = 0; i < prob.quad.size(); ++i) gap += -z_quad(static_cast<Index>(i)) * prob.quad[i](x);
    r.gap = std::abs(gap);
    return r;
}

namespace detail {

/// Refines an interior-point solution by Newton steps on the KKT equations
/// of the constraints that look active (slack below multiplier), treated as
/// equalities. On second-order cones the interior-point iterates approach
/// the solution only like sqrt(gap), so this recovers the last digits that
/// the cone scaling cannot deliver in double precision. Returns the refined
/// solution, or nothing when the steps do not lower the KKT residual.
inline std::optional<SolverSolution> polish(const ConvexQCQP& prob, const SolverSolution& start) {
    const Index n = prob.n;
    const Index p = prob.a_eq.rows();
    std::vector<Index> lin, quad;
    for (Index i = 0; i < prob.g.rows(); ++i)
        if (prob.h(i) - prob.g.row(i).dot(start.x) < start.z_lin(i)) lin.push_back(i);
    for (std::size_t i = 0; i < prob.quad.size(); ++i)
        if (-prob.quad[i](start.x) < start.z_quad(static_cast<Index>(i))) quad.push_back(static_cast<Index>(i));
    const Index nl = static_cast<Index>(lin.size()), nq = static_cast<Index>(quad.size());
    const Index dim = n + p + nl + nq;

    Vector x = start.x, y = start.y;
    Vector zl(nl), lq(nq);
    for (Index k = 0; k < nl; ++k) zl(k) = start.z_lin(lin[static_cast<std::size_t>(k)]);
    for (Index k = 0; k < nq; ++k) lq(k) = start.z_quad(quad[static_cast<std::size_t>(k)]);

    for (int step = 0; step < 4; ++step) {
        Matrix jac = Matrix::Zero(dim, dim);
        Vector res(dim);
        Matrix hess = prob.objective.p;
        Vector grad = prob.objective.gradient(x);
        if (p > 0) grad += prob.a_eq.transpose() * y;
        for (Index k = 0; k < nl; ++k) grad += zl(k) * prob.g.row(lin[static_cast<std::size_t>(k)]).transpose();
        for (Index k = 0; k < nq; ++k) {
            const auto& qf = prob.quad[static_cast<std::size_t>(quad[static_cast<std::size_t>(k)])];
            grad += lq(k) * qf.gradient(x);
            hess += lq(k) * qf.p;
        }
        res.head(n) = grad;
        jac.topLeftCorner(n, n) = hess;
        if (p > 0) {
            res.segment(n, p) = prob.a_eq * x - prob.b_eq;
            jac.block(0, n, n, p) = prob.a_eq.transpose();
            jac.block(n, 0, p, n) = prob.a_eq;
        }
        for (Index k = 0; k < nl; ++k) {
            const auto row = prob.g.row(lin[static_cast<std::size_t>(k)]);
            res(n + p + k) = row.dot(x) - prob.h(lin[static_cast<std::size_t>(k)]);
            jac.block(0, n + p + k, n, 1) = row.transpose();
            jac.block(n + p + k, 0, 1, n) = row;
        }
        for (Index k = 0; k < nq; ++k) {
            const auto& qf = prob.quad[static_cast<std::size_t>(quad[static_cast<std::size_t>(k)])];
            const Vector gq = qf.gradient(x);
            res(n + p + nl + k) = qf(x);
            jac.block(0, n + p + nl + k, n, 1) = gq;
            jac.block(n + p + nl + k, 0, 1, n) = gq.transpose();
        }
        if (res.cwiseAbs().maxCoeff() < 1e-14) break;
        // minimum-norm step: active sets that break constraint
        // qualification leave the multipliers undetermined
        const Vector delta = jac.completeOrthogonalDecomposition().solve(-res);
        if (!delta.allFinite()) return std::nullopt;
        x += delta.head(n);
        y += delta.segment(n, p);
        zl += delta.segment(n + p, nl);
        lq += delta.tail(nq);
    }

    SolverSolution out = start;
    out.x = x;
    out.y = y;
    out.z_lin.setZero();
    out.z_quad.setZero();
    for (Index k = 0; k < nl; ++k) out.z_lin(lin[static_cast<std::size_t>(k)]) = zl(k);
    for (Index k = 0; k < nq; ++k) out.z_quad(quad[static_cast<std::size_t>(k)]) = lq(k);
    out.kkt = kkt_residuals(prob, out.x, out.y, out.z_lin, out.z_quad);
    if (!(out.kkt.max() < start.kkt.max())) return std::nullopt;
    out.objective = prob.objective(out.x);
    return out;
}

}  // namespace detail

namespace detail {

inline SolverSolution solve_impl(const ConvexQCQP& prob, const SolverOptions& opt, bool classify);

/// Phase-I check used when the iterates jam: minimizes the largest
/// constraint violation t over (x, t), with t >= -1 and a tiny proximal
/// term on x. That problem is always strictly feasible; an optimum above
/// the tolerance proves the original constraints cannot be met.
inline bool violation_floor_exceeds(const ConvexQCQP& prob, const SolverOptions& opt) {
    const Index n = prob.n;
    auto aux = ConvexQCQP::with_variables(n + 1);
    aux.objective.p.topLeftCorner(n, n) = 1e-8 * Matrix::Identity(n, n);
    aux.objective.q(n) = 1.0;
    auto row = [&](const auto& a) {
        Vector r = Vector::Zero(n + 1);
        r.head(n) = a.transpose();
        r(n) = -1.0;
        return r;
    };
    for (Index i = 0; i < prob.a_eq.rows(); ++i) {
        aux.add_inequality(row(prob.a_eq.row(i)), prob.b_eq(i));
        aux.add_inequality(row(-prob.a_eq.row(i)), -prob.b_eq(i));
    }
    for (Index i = 0; i < prob.g.rows(); ++i) aux.add_inequality(row(prob.g.row(i)), prob.h(i));
    for (const auto& qf : prob.quad) {
        QuadraticForm f{Matrix::Zero(n + 1, n + 1), row(qf.q.transpose()), qf.r};
        f.p.topLeftCorner(n, n) = qf.p;
        aux.add_quadratic(std::move(f));
    }
    Vector lower = Vector::Zero(n + 1);
    lower(n) = -1.0;
    aux.add_inequality(lower, 1.0);
    const auto res = solve_impl(aux, opt, false);
    return res.status == Status::optimal && res.x(n) > 10.0 * opt.tolerance;
}

}  // namespace detail

inline SolverSolution solve(const ConvexQCQP& prob, const SolverOptions& opt = {}) {
    return detail::solve_impl(prob, opt, true);
}

inline SolverSolution detail::solve_impl(const ConvexQCQP& prob, const SolverOptions& opt, bool classify) {
    check_dimensions(prob);
    if (const auto conv = check_convexity(prob); !conv.convex)
        throw ValidationError("qcqp: not convex, failing block " + conv.failing.front());

    const Index n = prob.n;
    const Index p = prob.a_eq.rows();
    SolverSolution sol;
    sol.y = Vector::Zero(p);
    sol.z_lin = Vector::Zero(prob.g.rows());
    sol.z_quad = Vector::Zero(static_cast<Index>(prob.quad.size()));

    const detail::ConicForm cf = detail::to_conic(prob);
    const auto& K = cf.cone;
    const Index m = K.size();
    const Matrix& G = cf.g;
    const Vector& h = cf.h;
    const Matrix& P = prob.objective.p;
    const Vector& c = prob.objective.q;
    const Matrix& A = prob.a_eq;
    const Vector& b = prob.b_eq;

    auto finish = [&](const Vector& x, const Vector& y, const Vector& z, const Vector& s, Status status, int it) {
        sol.x = x;
        sol.y = y;
        sol.iterations = it;
        sol.status = status;
        sol.z_lin = z.head(prob.g.rows());
        for (std::size_t i = 0; i < prob.quad.size(); ++i) {
            if (cf.quad_cone[i] >= 0) {
                const auto ci = static_cast<std::size_t>(cf.quad_cone[i]);
                const Index o = K.offset[ci], d = K.soc[ci];
                // z0 + z2 is exact only when z is perfectly aligned with
                // the reflected slack, and the cone scaling degrades that
                // alignment near the boundary. Projecting the block's
                // contribution onto the constraint gradient is as accurate
                // as the conic stationarity residual itself.
                const Vector v = G.block(o, 0, d, n).transpose() * z.segment(o, d);
                const Vector grad = prob.quad[i].gradient(x);
                const double g2 = grad.squaredNorm();
                sol.z_quad(static_cast<Index>(i)) =
                    g2 > 1e-20 * std::max(1.0, v.squaredNorm()) ? v.dot(grad) / g2
                    : cf.quad_rho[ci] > 0.0                       ? z(o) / cf.quad_rho[ci]
                                                                  : z(o) + z(o + d - 1);
            } else {
                sol.z_quad(static_cast<Index>(i)) = z(cf.quad_linear_row[i]);
            }
        }
        sol.objective = prob.objective(x);
        sol.dual_objective = -0.5 * x.dot(P * x) - b.dot(y) - h.dot(z) + prob.objective.r;
        sol.kkt = kkt_residuals(prob, x, y, sol.z_lin, sol.z_quad);
        if (m > 0) sol.kkt.gap = std::max(sol.kkt.gap, std::abs(s.dot(z)));
        Vector rx = P * x + c + A.transpose() * y + G.transpose() * z;
        if (n > 0) sol.kkt.dual = std::max(sol.kkt.dual, rx.cwiseAbs().maxCoeff());
        return sol;
    };

    if (n == 0) {
        const bool feasible = (p == 0 || b.cwiseAbs().maxCoeff() <= opt.tolerance) &&
                              (m == 0 || K.nl == 0 || h.head(K.nl).minCoeff() >= -opt.tolerance) &&
                              std::all_of(prob.quad.begin(), prob.quad.end(),
                                          [&](const QuadraticForm& q) { return q.r <= opt.tolerance; });
        Vector z = Vector::Zero(m);
        return finish(Vector::Zero(0), Vector::Zero(p), z, Vector::Zero(m),
                      feasible ? Status::optimal : Status::infeasible, 0);
    }

    const Vector e = detail::identity(K);
    const double nu = std::max(K.degree(), 1.0);

    // Starting point: regularized least squares on (objective, G x ~ h) with
    // the equalities enforced, slacks pushed into the cone.
    Vector x(n), y(p), z(m), s(m);
    {
        Matrix kkt = Matrix::Zero(n + p, n + p);
        kkt.topLeftCorner(n, n) = P + G.transpose() * G + 1e-8 * Matrix::Identity(n, n);
        kkt.topRightCorner(n, p) = A.transpose();
        kkt.bottomLeftCorner(p, n) = A;
        Vector rhs(n + p);
        rhs.head(n) = -c + G.transpose() * h;
        rhs.tail(p) = b;
        const Vector sol0 = kkt.fullPivLu().solve(rhs);
        x = sol0.head(n);
        y = Vector::Zero(p);
        s = detail::interior_start(K, h - G * x);
        z = e;
    }

    // Best solution meeting the tolerance so far. Once one is found the
    // method runs a few more iterations: on nearly degenerate problems the
    // residuals can pass the tolerance while x is still visibly off.
    std::optional<SolverSolution> accepted;
    int extra = 0;
    auto accept = [&](const SolverSolution& cand) {
        if (!accepted || cand.kkt.max() < accepted->kkt.max()) accepted = cand;
    };
    auto try_polish = [&] {
        if (auto ps = detail::polish(prob, sol); ps && ps->kkt.max() < opt.tolerance) accept(*ps);
        return accepted.has_value();
    };

    Status status = Status::max_iter;
    int it = 0;
    double best_primal = std::numeric_limits<double>::infinity();
    int stall = 0;
    int tiny_steps = 0;
    for (; it < opt.max_iterations; ++it) {
        const Vector rx = P * x + c + A.transpose() * y + G.transpose() * z;
        const Vector ry = A * x - b;
        const Vector rz = G * x + s - h;
        const double gap = s.dot(z);
        const double mu = gap / nu;

        // convergence on the original-problem residuals
        finish(x, y, z, s, Status::optimal, it);
        const double conic_primal = std::max(ry.size() ? ry.cwiseAbs().maxCoeff() : 0.0,
                                             rz.size() ? rz.cwiseAbs().maxCoeff() : 0.0);
        if (sol.kkt.max() < opt.tolerance && conic_primal < opt.tolerance) {
            accept(sol);
        } else if (conic_primal < opt.tolerance && gap < opt.tolerance * std::max(1.0, std::abs(sol.objective)) &&
                   rx.cwiseAbs().maxCoeff() < opt.tolerance) {
            try_polish();
        }
        if (accepted && extra++ >= opt.refine_iterations) {
            status = Status::optimal;
            break;
        }

        // primal infeasibility certificate: A'y + G'z ~ 0, b'y + h'z < 0
        const double cert = -(b.dot(y) + h.dot(z));
        if (cert > 0.0 && !accepted) {
            const Vector ray = A.transpose() * y + G.transpose() * z;
            const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
            if (ray.cwiseAbs().maxCoeff() <= 1e-8 * cert * scale / std::max(1.0, P.cwiseAbs().maxCoeff()) &&
                conic_primal > opt.tolerance) {
                status = Status::infeasible;
                break;
            }
        }
        if (conic_primal < 0.5 * best_primal) {
            best_primal = conic_primal;
            stall = 0;
        } else if (!accepted && z.cwiseAbs().maxCoeff() > 1e10 && ++stall > 10) {
            status = Status::infeasible;
            break;
        }

        const detail::Scaling sc = detail::nt_scaling(K, s, z);
        const Matrix wi_g = sc.w_inv * G;
        Matrix kkt = Matrix::Zero(n + p, n + p);
        kkt.topLeftCorner(n, n) = P + wi_g.transpose() * wi_g;
        kkt.topRightCorner(n, p) = A.transpose();
        kkt.bottomLeftCorner(p, n) = A;
        const Eigen::PartialPivLU<Matrix> lu(kkt);

        struct Direction {
            Vector dx, dy, dz, ds;
        };
        auto newton = [&](const Vector& bx, const Vector& by, const Vector& bz, const Vector& bs) {
            const Vector t = detail::jordan_divide(K, sc.lambda, bs);
            const Vector wib = sc.w_inv * bz;
            Vector rhs(n + p);
            rhs.head(n) = bx - wi_g.transpose() * (t - wib);
            rhs.tail(p) = by;
            Vector sol_xy = lu.solve(rhs);
            for (int ref = 0; ref < 2; ++ref) sol_xy += lu.solve(rhs - kkt * sol_xy);
            Direction d;
            d.dx = sol_xy.head(n);
            d.dy = sol_xy.tail(p);
            d.dz = sc.w_inv * (wi_g * d.dx + t - wib);
            d.ds = bz - G * d.dx;
            return d;
        };

        const Vector lam_sq = detail::jordan(K, sc.lambda, sc.lambda);
        const Direction aff = newton(-rx, -ry, -rz, -lam_sq);
        if (!aff.dx.allFinite() || !aff.dz.allFinite()) {
            status = accepted || try_polish() ? Status::optimal : Status::numerical;
            break;
        }
        const double a_aff = std::min({1.0, detail::max_step(K, s, aff.ds), detail::max_step(K, z, aff.dz)});
        const double gap_aff = (s + a_aff * aff.ds).dot(z + a_aff * aff.dz);
        const double sigma = std::clamp(std::pow(std::max(gap_aff, 0.0) / gap, 3.0), 0.0, 1.0);

        const Vector ds_scaled = sc.w_inv * aff.ds;
        const Vector dz_scaled = sc.w * aff.dz;
        const Vector bs = -lam_sq - detail::jordan(K, ds_scaled, dz_scaled) + sigma * mu * e;
        Direction dir = newton(-rx, -ry, -rz, bs);
        if (!dir.dx.allFinite() || !dir.dz.allFinite()) {
            status = accepted || try_polish() ? Status::optimal : Status::numerical;
            break;
        }
        auto step_of = [&](const Direction& d) {
            const double a_max = std::min(detail::max_step(K, s, d.ds), detail::max_step(K, z, d.dz));
            return std::min(1.0, opt.step_fraction * a_max);
        };
        double alpha = step_of(dir);
        // Mehrotra's second-order term can overshoot and make the method
        // cycle; when the combined step would raise the gap, take the
        // plain centered Newton step instead.
        if ((s + alpha * dir.ds).dot(z + alpha * dir.dz) > gap) {
            const Direction centered = newton(-rx, -ry, -rz, -lam_sq + sigma * mu * e);
            const double a_c = step_of(centered);
            if (centered.dx.allFinite() && centered.dz.allFinite() &&
                (s + a_c * centered.ds).dot(z + a_c * centered.dz) < (s + alpha * dir.ds).dot(z + alpha * dir.dz)) {
                dir = centered;
                alpha = a_c;
            }
        }
        tiny_steps = alpha < 1e-8 ? tiny_steps + 1 : 0;
        if (!(alpha > 1e-14) || tiny_steps >= 5) {
            status = accepted || try_polish() ? Status::optimal : Status::numerical;
            break;
        }
        x += alpha * dir.dx;
        y += alpha * dir.dy;
        z += alpha * dir.dz;
        s += alpha * dir.ds;
    }
    if (accepted) {
        accepted->status = Status::optimal;
        accepted->iterations = it;
        return *accepted;
    }
    if (classify && (status == Status::numerical || status == Status::max_iter) &&
        detail::violation_floor_exceeds(prob, opt))
        status = Status::infeasible;
    return finish(x, y, z, s, status, it);
}

/// Writes the problem as JSON for cross-checking with an external solver.
inline void dump(const ConvexQCQP& prob, std::ostream& out) {
    auto mat = [](const Matrix& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (Index i = 0; i < m.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
            rows.push_back(row);
        }
        return rows;
    };
    auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    nlohmann::json j;
    j["n"] = prob.n;
    j["objective"] = {{"P", mat(prob.objective.p)}, {"q", vec(prob.objective.q)}, {"r", prob.objective.r}};
    j["A"] = mat(prob.a_eq);
    j["b"] = vec(prob.b_eq);
    j["G"] = mat(prob.g);
    j["h"] = vec(prob.h);
    j["quad"] = nlohmann::json::array();
    for (std::size_t i = 0; i < prob.quad.size(); ++i)
        j["quad"].push_back({{"name", prob.quad_name(i)},
                             {"P", mat(prob.quad[i].p)},
                             {"q", vec(prob.quad[i].q)},
                             {"r", prob.quad[i].r}});
    out << j.dump(1) << '\n';
}

}  // namespace foid::qcqp
