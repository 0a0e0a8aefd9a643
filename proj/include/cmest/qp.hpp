#pragma once

// Euclidean projection onto {w : A w <= b, E w = e}.
//
// project_polyhedron() is a dual active-set method (Goldfarb-Idnani with an
// identity Hessian): it starts from the unconstrained minimizer and adds the
// most violated constraint, taking partial steps that drop constraints whose
// multipliers would turn negative. Termination is finite, and an unbounded
// dual step proves the feasible set empty.
//
// project_dykstra() is Boyle-Dykstra cyclic projection onto the halfspaces.
// It converges linearly and serves as an independent cross-check.

#include "cmest/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace cmest {

struct QpResult {
    Vector point;
    std::vector<Eigen::Index> active;  // indices into the inequality rows
    Vector multipliers;                // one per entry of `active`, all >= 0
    int iterations = 0;
};

namespace detail {

struct ActiveSet {
    Matrix normals;  // d x q
    std::vector<Eigen::Index> rows;
    std::vector<double> u;

    Eigen::Index size() const { return static_cast<Eigen::Index>(rows.size()); }

    void drop(std::size_t j) {
        rows.erase(rows.begin() + static_cast<std::ptrdiff_t>(j));
        u.erase(u.begin() + static_cast<std::ptrdiff_t>(j));
        const Eigen::Index q = size();
        Matrix next(normals.rows(), q);
        for (Eigen::Index c = 0, k = 0; c <= q; ++c) {
            if (c == static_cast<Eigen::Index>(j)) continue;
            next.col(k++) = normals.col(c);
        }
        normals = std::move(next);
    }

    void add(Eigen::Index row, const Vector& n, double multiplier) {
        rows.push_back(row);
        u.push_back(multiplier);
        normals.conservativeResize(n.size(), size());
        normals.col(size() - 1) = n;
    }
};

// Projection onto inequalities only; x0 is the point to project.
inline QpResult dual_active_set(const Vector& x0, const Matrix& a, const Vector& b) {
    const Eigen::Index d = x0.size();
    const Eigen::Index m = a.rows();
    Vector row_norm(m);
    for (Eigen::Index i = 0; i < m; ++i) row_norm[i] = a.row(i).norm();

    Vector w = x0;
    ActiveSet act;
    act.normals.resize(d, 0);

    const int max_iter = 50 * static_cast<int>(m + d) + 100;
    int iter = 0;
    auto violation_tol = [&](Eigen::Index i) {
        return 1e-13 * std::max({1.0, std::abs(b[i]), row_norm[i] * w.lpNorm<Eigen::Infinity>()});
    };

    for (;;) {
        // Most violated constraint, scaled by its normal length.
        Eigen::Index p = -1;
        double worst = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (row_norm[i] == 0.0) {
                if (b[i] < 0.0) throw InfeasibleSet("polyhedron: constraint 0 <= b with b < 0");
                continue;
            }
            const double s = a.row(i).dot(w) - b[i];
            if (s > violation_tol(i) && s / row_norm[i] > worst) {
                if (std::find(act.rows.begin(), act.rows.end(), i) != act.rows.end()) continue;
                worst = s / row_norm[i];
                p = i;
            }
        }
        if (p < 0) break;

        const Vector np = a.row(p).transpose();
        double u_new = 0.0;
        for (;;) {
            if (++iter > max_iter)
                throw NumericFailure("polyhedron projection: active-set iteration cap reached",
                                     a.row(p).dot(w) - b[p]);
            // r = N^+ np, z = np - N r (component of np orthogonal to the active normals).
            Vector r;
            Vector z = np;
            if (act.size() > 0) {
                Eigen::ColPivHouseholderQR<Matrix> qr(act.normals);
                r = qr.solve(np);
                z = np - act.normals * r;
            }
            const bool dependent = z.norm() <= 1e-11 * np.norm();

            // Partial step: the first active multiplier to hit zero.
            double t1 = std::numeric_limits<double>::infinity();
            std::size_t drop = 0;
            for (std::size_t j = 0; j < act.rows.size(); ++j) {
                if (r[static_cast<Eigen::Index>(j)] > 1e-14) {
                    const double ratio = act.u[j] / r[static_cast<Eigen::Index>(j)];
                    if (ratio < t1) {
                        t1 = ratio;
                        drop = j;
                    }
                }
            }
            const double slack = a.row(p).dot(w) - b[p];
            const double t2 = dependent ? std::numeric_limits<double>::infinity() : slack / z.squaredNorm();

            if (!std::isfinite(t1) && !std::isfinite(t2))
                throw InfeasibleSet("polyhedron is empty (dual step unbounded)");

            const double t = std::min(t1, t2);
            for (std::size_t j = 0; j < act.rows.size(); ++j)
                act.u[j] = std::max(0.0, act.u[j] - t * r[static_cast<Eigen::Index>(j)]);
            u_new += t;
            if (!dependent) w -= t * z;

            if (t2 <= t1) {
                act.add(p, np, u_new);
                break;
            }
            act.drop(drop);
        }
    }

    QpResult out;
    out.point = std::move(w);
    out.active = act.rows;
    out.multipliers = Eigen::Map<const Vector>(act.u.data(), static_cast<Eigen::Index>(act.u.size()));
    out.iterations = iter;
    return out;
}

}  // namespace detail

/// Euclidean projection of x0 onto {w : A w <= b, E w = e}. E may have zero
/// rows. Throws InfeasibleSet when the set is empty.
inline QpResult project_polyhedron(const Vector& x0, const Matrix& a, const Vector& b, const Matrix& e = Matrix(),
                                   const Vector& e_rhs = Vector()) {
    const Eigen::Index d = x0.size();
    detail::require_dim(a.cols(), d, "project_polyhedron: A");
    detail::require_dim(b.size(), a.rows(), "project_polyhedron: b");
    if (e.rows() == 0) return detail::dual_active_set(x0, a, b);

    detail::require_dim(e.cols(), d, "project_polyhedron: E");
    detail::require_dim(e_rhs.size(), e.rows(), "project_polyhedron: e");
    // Eliminate equalities: w = w0 + Z v with w0 the least-norm solution and
    // Z an orthonormal basis of null(E).
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(e);
    const Vector w0 = cod.solve(e_rhs);
    if ((e * w0 - e_rhs).norm() > 1e-10 * (1.0 + e_rhs.norm()))
        throw InfeasibleSet("project_polyhedron: inconsistent equality constraints");
    Eigen::JacobiSVD<Matrix> svd(e, Eigen::ComputeFullV);
    const double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()[i] > 1e-12 * std::max(1.0, smax)) ++rank;
    const Matrix z = svd.matrixV().rightCols(d - rank);

    QpResult out;
    if (z.cols() == 0) {
        if ((a * w0 - b).maxCoeff() > 1e-10 * (1.0 + b.lpNorm<Eigen::Infinity>()))
            throw InfeasibleSet("project_polyhedron: equality solution violates inequalities");
        out.point = w0;
        return out;
    }
    const Matrix a_red = a * z;
    const Vector b_red = b - a * w0;
    QpResult red = detail::dual_active_set(z.transpose() * x0, a_red, b_red);
    out.point = w0 + z * red.point;
    out.active = std::move(red.active);
    out.multipliers = std::move(red.multipliers);
    out.iterations = red.iterations;
    return out;
}

struct DykstraResult {
    Vector point;
    int cycles = 0;
    bool converged = false;
    double last_move = 0.0;
};

/// Boyle-Dykstra alternating projections onto the halfspaces a_i^T w <= b_i.
/// Stops when the correction increments change by at most tol/10 in total
/// over a cycle (a cycle can return to its start while still moving), or
/// after 100 * m * d cycles.
inline DykstraResult project_dykstra(const Vector& x0, const Matrix& a, const Vector& b, double tol) {
    const Eigen::Index d = x0.size();
    const Eigen::Index m = a.rows();
    detail::require_dim(a.cols(), d, "project_dykstra: A");
    detail::require(tol > 0.0, "project_dykstra: tol must be positive");
    Vector row_sq(m);
    for (Eigen::Index i = 0; i < m; ++i) row_sq[i] = a.row(i).squaredNorm();

    Vector w = x0;
    Matrix incr = Matrix::Zero(d, m);
    DykstraResult out;
    const long cap = std::max<long>(1, 100L * m * d);
    for (long cycle = 1; cycle <= cap; ++cycle) {
        double moved = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            const Vector y = w + incr.col(i);
            const double s = a.row(i).dot(y) - b[i];
            if (s > 0.0 && row_sq[i] > 0.0)
                w = y - (s / row_sq[i]) * a.row(i).transpose();
            else
                w = y;
            moved += (y - w - incr.col(i)).norm();
            incr.col(i) = y - w;
        }
        out.cycles = static_cast<int>(cycle);
        out.last_move = moved;
        if (out.last_move <= tol / 10.0) {
            out.converged = true;
            break;
        }
    }
    out.point = std::move(w);
    return out;
}

}  // namespace cmest
