#pragma once

// Shared fixtures for the unit and acceptance tests: random sets, metrics and
// query points.

#include "cmest/geometry.hpp"
#include "cmest/random.hpp"

#include <initializer_list>
#include <string>

namespace cmest::testing {

inline Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

inline Matrix random_spd(CounterRng& rng, Eigen::Index d, double floor = 0.3) {
    Matrix g(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) g(i, j) = rng.normal();
    return g * g.transpose() / static_cast<double>(d) + floor * Matrix::Identity(d, d);
}

// Identity, diagonal or dense metric, one third each.
inline SpdMetric random_metric(CounterRng& rng, Eigen::Index d) {
    switch (rng.below(3)) {
        case 0: return SpdMetric::identity(d);
        case 1: {
            Vector diag(d);
            for (Eigen::Index i = 0; i < d; ++i) diag[i] = 0.25 + 3.0 * rng.uniform();
            return SpdMetric(Matrix(diag.asDiagonal()));
        }
        default: return SpdMetric(random_spd(rng, d));
    }
}

enum class SetKind { ball, box, polyhedron, cone };

inline const char* kind_label(SetKind k) {
    switch (k) {
        case SetKind::ball: return "ball";
        case SetKind::box: return "box";
        case SetKind::polyhedron: return "polyhedron";
        case SetKind::cone: return "cone";
    }
    return "?";
}

inline ConvexSet random_set(CounterRng& rng, SetKind kind, Eigen::Index d) {
    switch (kind) {
        case SetKind::ball: return Ball(rng.normal_vector(d), 0.5 + 1.5 * rng.uniform());
        case SetKind::box: {
            const Vector lo = rng.normal_vector(d);
            Vector w(d);
            for (Eigen::Index i = 0; i < d; ++i) w[i] = 0.2 + 1.8 * rng.uniform();
            return Box(lo, lo + w);
        }
        case SetKind::polyhedron: {
            const Eigen::Index m = d + 1 + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(d + 2)));
            Matrix a(m, d);
            for (Eigen::Index i = 0; i < m; ++i) a.row(i) = rng.normal_vector(d).transpose();
            const Vector c = 0.5 * rng.normal_vector(d);
            Vector b = a * c;
            for (Eigen::Index i = 0; i < m; ++i) b[i] += 0.1 + rng.uniform();
            return Polyhedron(a, b);
        }
        case SetKind::cone: {
            const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(d + 1)));
            Matrix a(m, d);
            for (Eigen::Index i = 0; i < m; ++i) a.row(i) = rng.normal_vector(d).transpose();
            return PolyhedralCone(a);
        }
    }
    throw InvalidArgument("random_set: bad kind");
}

// A query point that is exterior, on the boundary, or interior, in turn.
inline Vector random_point(CounterRng& rng, const ConvexSet& set, const SpdMetric& m, int which) {
    const Eigen::Index d = dim(set);
    const Vector far = 3.0 * rng.normal_vector(d);
    const Vector base = std::visit(overloaded{[&](const Ball& b) -> Vector { return b.center; },
                                              [&](const Box& b) -> Vector { return 0.5 * (b.lo + b.hi); },
                                              [&](const auto&) -> Vector { return Vector::Zero(d); }},
                                   set);
    Vector x = base + far;
    switch (which % 3) {
        case 0:
            if (contains(set, x, 0.0)) x = base + 10.0 * far;
            return x;
        case 1: return project(set, x, m);
        default: {
            const Vector y = project(set, x, m);
            // Strictly between an interior-ish anchor and the boundary point.
            const Vector anchor = project(set, base, m);
            return anchor + 0.5 * (y - anchor);
        }
    }
}

}  // namespace cmest::testing
