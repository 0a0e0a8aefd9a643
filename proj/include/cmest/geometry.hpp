#pragma once

// Closed convex constraint sets, S-metric projections onto them, support
// and normal cones, and one-sided directional derivatives of projections.
//
// Directional derivative dispatch, for y = pi(x) and u = x - y:
//   x interior                 -> identity
//   x on the boundary          -> projection onto the support cone at x
//   x exterior, ball           -> implicit differentiation of the KKT system
//   x exterior, polyhedral set -> projection onto C ∩ {t : <u, t>_S = 0},
//                                 C the support cone at y (locally conic case)

#include "cmest/core.hpp"
#include "cmest/metric.hpp"
#include "cmest/qp.hpp"
#include "cmest/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace cmest {

struct FullSpace {
    Eigen::Index dim = 1;
};

/// Euclidean ball {x : ||x - center||_2 <= radius}.
struct Ball {
    Vector center;
    double radius = 1.0;

    Ball(Vector c, double r) : center(std::move(c)), radius(r) {
        detail::require(center.size() >= 1, "Ball: empty center");
        detail::require(radius > 0.0 && std::isfinite(radius), "Ball: radius must be positive and finite");
    }
};

struct Box {
    Vector lo;
    Vector hi;

    Box(Vector l, Vector h) : lo(std::move(l)), hi(std::move(h)) {
        detail::require_dim(hi.size(), lo.size(), "Box");
        detail::require(lo.size() >= 1, "Box: empty bounds");
        detail::require((lo.array() <= hi.array()).all(), "Box: lo must be <= hi componentwise");
    }
};

/// {x : A x <= b}. Construction projects the origin to certify that the set
/// is nonempty and throws InfeasibleSet otherwise.
struct Polyhedron {
    Matrix a;
    Vector b;

    Polyhedron(Matrix a_, Vector b_) : a(std::move(a_)), b(std::move(b_)) {
        detail::require(a.cols() >= 1, "Polyhedron: A has no columns");
        detail::require_dim(b.size(), a.rows(), "Polyhedron: b");
        detail::require(a.allFinite() && b.allFinite(), "Polyhedron: non-finite data");
        if (a.rows() > 0) project_polyhedron(Vector::Zero(a.cols()), a, b);
    }
};

/// {x : A x <= 0}.
struct PolyhedralCone {
    Matrix a;

    explicit PolyhedralCone(Matrix a_) : a(std::move(a_)) {
        detail::require(a.cols() >= 1, "PolyhedralCone: A has no columns");
        detail::require(a.allFinite(), "PolyhedralCone: non-finite data");
    }
};

using ConvexSet = std::variant<FullSpace, Ball, Box, Polyhedron, PolyhedralCone>;

struct Halfspace {
    Vector normal;  // cone {t : normal^T t <= 0}
};

/// Support cone to a set at one of its points.
using SupportConeRep = std::variant<FullSpace, Halfspace, PolyhedralCone>;

template <class... Fs>
struct overloaded : Fs... {
    using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

inline Eigen::Index dim(const ConvexSet& set) {
    return std::visit(overloaded{[](const FullSpace& s) { return s.dim; },
                                 [](const Ball& s) { return s.center.size(); },
                                 [](const Box& s) { return s.lo.size(); },
                                 [](const Polyhedron& s) { return s.a.cols(); },
                                 [](const PolyhedralCone& s) { return s.a.cols(); }},
                      set);
}

inline std::string kind_name(const ConvexSet& set) {
    return std::visit(overloaded{[](const FullSpace&) { return std::string("full"); },
                                 [](const Ball&) { return std::string("ball"); },
                                 [](const Box&) { return std::string("box"); },
                                 [](const Polyhedron&) { return std::string("polyhedron"); },
                                 [](const PolyhedralCone&) { return std::string("cone"); }},
                      set);
}

/// Halfspace form (A, b) of a polyhedral set; nullopt for Ball.
inline std::optional<std::pair<Matrix, Vector>> halfspaces(const ConvexSet& set) {
    return std::visit(
        overloaded{[](const FullSpace& s) -> std::optional<std::pair<Matrix, Vector>> {
                       return std::pair{Matrix(0, s.dim), Vector(0)};
                   },
                   [](const Ball&) -> std::optional<std::pair<Matrix, Vector>> { return std::nullopt; },
                   [](const Box& s) -> std::optional<std::pair<Matrix, Vector>> {
                       const Eigen::Index d = s.lo.size();
                       Matrix a(2 * d, d);
                       a << Matrix::Identity(d, d), -Matrix::Identity(d, d);
                       Vector b(2 * d);
                       b << s.hi, -s.lo;
                       return std::pair{a, b};
                   },
                   [](const Polyhedron& s) -> std::optional<std::pair<Matrix, Vector>> {
                       return std::pair{s.a, s.b};
                   },
                   [](const PolyhedralCone& s) -> std::optional<std::pair<Matrix, Vector>> {
                       return std::pair{s.a, Vector::Zero(s.a.rows())};
                   }},
        set);
}

/// The set shifted by -shift, i.e. {x - shift : x in set}.
inline ConvexSet translate(const ConvexSet& set, const Vector& shift) {
    detail::require_dim(shift.size(), dim(set), "translate");
    return std::visit(overloaded{[](const FullSpace& s) -> ConvexSet { return s; },
                                 [&](const Ball& s) -> ConvexSet { return Ball(s.center - shift, s.radius); },
                                 [&](const Box& s) -> ConvexSet { return Box(s.lo - shift, s.hi - shift); },
                                 [&](const Polyhedron& s) -> ConvexSet { return Polyhedron(s.a, s.b - s.a * shift); },
                                 [&](const PolyhedralCone& s) -> ConvexSet {
                                     return Polyhedron(s.a, -(s.a * shift));
                                 }},
                      set);
}

/// Membership with Euclidean slack: every constraint may be violated by at
/// most tol in distance to its boundary.
inline bool contains(const ConvexSet& set, const Vector& x, double tol = 0.0) {
    detail::require_dim(x.size(), dim(set), "contains");
    detail::require(tol >= 0.0, "contains: tol must be >= 0");
    return std::visit(overloaded{[](const FullSpace&) { return true; },
                                 [&](const Ball& s) { return (x - s.center).norm() <= s.radius + tol; },
                                 [&](const Box& s) {
                                     return ((x.array() >= s.lo.array() - tol) && (x.array() <= s.hi.array() + tol))
                                         .all();
                                 },
                                 [&](const auto& s) {
                                     const auto hs = halfspaces(ConvexSet(s));
                                     const Vector r = hs->first * x - hs->second;
                                     for (Eigen::Index i = 0; i < r.size(); ++i)
                                         if (r[i] > tol * hs->first.row(i).norm()) return false;
                                     return true;
                                 }},
                      set);
}

namespace detail {

// S-projection onto {A x <= b, E x = 0} via the isotropic change of variables.
inline Vector project_halfspaces(const Vector& x, const Matrix& a, const Vector& b, const SpdMetric& m,
                                 const Matrix& eq = Matrix()) {
    if (a.rows() == 0 && eq.rows() == 0) return x;
    const Vector w = m.to_isotropic(x);
    const Matrix a_iso = m.normals_to_isotropic(a);
    Matrix eq_iso;
    Vector eq_rhs;
    if (eq.rows() > 0) {
        eq_iso = m.normals_to_isotropic(eq);
        eq_rhs = Vector::Zero(eq.rows());
    }
    const QpResult r = project_polyhedron(w, a_iso, b, eq_iso, eq_rhs);
    return m.from_isotropic(r.point);
}

// S-projection onto the Euclidean ball. The KKT conditions give
// y - c = (S + mu I)^{-1} S (x - c) with mu >= 0 chosen so ||y - c|| = R.
inline Vector project_ball(const Ball& ball, const Vector& x, const SpdMetric& m) {
    const Vector v = x - ball.center;
    const double r = v.norm();
    if (r <= ball.radius) return x;
    if (m.isotropic_scale()) return ball.center + (ball.radius / r) * v;

    Eigen::SelfAdjointEigenSolver<Matrix> eig(m.matrix());
    const Vector lam = eig.eigenvalues();
    const Vector vq = eig.eigenvectors().transpose() * v;
    auto radius_at = [&](double mu) {
        return (lam.array() * vq.array() / (lam.array() + mu)).matrix().norm();
    };
    double lo = 0.0;
    double hi = lam.maxCoeff() * vq.norm() / ball.radius;
    while (radius_at(hi) > ball.radius) hi *= 2.0;
    // Bisect to double precision; the 1e-12 contract is the looser bound.
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (radius_at(mid) > ball.radius ? lo : hi) = mid;
    }
    const Vector yq = (lam.array() * vq.array() / (lam.array() + hi)).matrix();
    Vector y = eig.eigenvectors() * yq;
    const double ny = y.norm();
    if (ny > 0.0) y *= ball.radius / ny;
    return ball.center + y;
}

// S-projection of z onto {t : n^T t <= 0}.
inline Vector project_halfspace_cone(const Vector& n, const Vector& z, const SpdMetric& m) {
    const double s = n.dot(z);
    if (s <= 0.0) return z;
    const Vector sn = m.solve(n);
    return z - (s / n.dot(sn)) * sn;
}

}  // namespace detail

/// Metric projection pi_set^S(x). `tol` is accepted for interface
/// compatibility; all branches here are exact up to rounding.
inline Vector project(const ConvexSet& set, const Vector& x, const SpdMetric& m, double tol = 1e-10) {
    const Eigen::Index d = dim(set);
    detail::require_dim(x.size(), d, "project");
    detail::require_dim(m.dim(), d, "project: metric");
    detail::require(tol > 0.0, "project: tol must be positive");
    return std::visit(overloaded{[&](const FullSpace&) -> Vector { return x; },
                                 [&](const Ball& s) -> Vector { return detail::project_ball(s, x, m); },
                                 [&](const Box& s) -> Vector {
                                     if (m.is_diagonal()) return x.cwiseMax(s.lo).cwiseMin(s.hi);
                                     const auto hs = halfspaces(ConvexSet(s));
                                     return detail::project_halfspaces(x, hs->first, hs->second, m)
                                         .cwiseMax(s.lo)
                                         .cwiseMin(s.hi);
                                 },
                                 [&](const Polyhedron& s) -> Vector {
                                     return detail::project_halfspaces(x, s.a, s.b, m);
                                 },
                                 [&](const PolyhedralCone& s) -> Vector {
                                     return detail::project_halfspaces(x, s.a, Vector::Zero(s.a.rows()), m);
                                 }},
                      set);
}

/// Projection through Dykstra's method (polyhedral sets only). Slower and
/// less accurate than project(); kept as an independent route.
inline DykstraResult project_dykstra(const ConvexSet& set, const Vector& x, const SpdMetric& m, double tol) {
    const auto hs = halfspaces(set);
    if (!hs) throw UnsupportedCase("project_dykstra: set is not polyhedral");
    const Vector w = m.to_isotropic(x);
    DykstraResult r = project_dykstra(w, m.normals_to_isotropic(hs->first), hs->second, tol);
    r.point = m.from_isotropic(r.point);
    return r;
}

/// Support cone at x0 in the set. A halfspace a^T x <= b counts as active
/// when |a^T x0 - b| <= tol_active * (1 + |b|).
inline SupportConeRep support_cone(const ConvexSet& set, const Vector& x0, double tol_active = 1e-7) {
    detail::require_dim(x0.size(), dim(set), "support_cone");
    if (!contains(set, x0, tol_active)) throw InvalidArgument("support_cone: point is not in the set");
    if (const auto* ball = std::get_if<Ball>(&set)) {
        const Vector v = x0 - ball->center;
        if (std::abs(v.norm() - ball->radius) <= tol_active * (1.0 + ball->radius)) return Halfspace{v};
        return FullSpace{x0.size()};
    }
    const auto hs = halfspaces(set);
    const Matrix& a = hs->first;
    const Vector& b = hs->second;
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        if (std::abs(a.row(i).dot(x0) - b[i]) <= tol_active * (1.0 + std::abs(b[i]))) rows.push_back(i);
    if (rows.empty()) return FullSpace{x0.size()};
    Matrix active(static_cast<Eigen::Index>(rows.size()), a.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) active.row(static_cast<Eigen::Index>(k)) = a.row(rows[k]);
    return PolyhedralCone(std::move(active));
}

inline bool cone_contains(const SupportConeRep& cone, const Vector& t, double tol) {
    return std::visit(overloaded{[](const FullSpace&) { return true; },
                                 [&](const Halfspace& h) { return h.normal.dot(t) <= tol * h.normal.norm(); },
                                 [&](const PolyhedralCone& c) {
                                     return contains(ConvexSet(c), t, tol);
                                 }},
                      cone);
}

/// S-projection onto a support cone, optionally intersected with the
/// hyperplane {t : <u, t>_S = 0}.
inline Vector project_cone(const SupportConeRep& cone, const Vector& z, const SpdMetric& m,
                           const std::optional<Vector>& orth_to = std::nullopt) {
    if (!orth_to) {
        return std::visit(
            overloaded{[&](const FullSpace&) -> Vector { return z; },
                       [&](const Halfspace& h) -> Vector { return detail::project_halfspace_cone(h.normal, z, m); },
                       [&](const PolyhedralCone& c) -> Vector {
                           return detail::project_halfspaces(z, c.a, Vector::Zero(c.a.rows()), m);
                       }},
            cone);
    }
    const Matrix eq = (m.matrix() * *orth_to).transpose();
    return std::visit(overloaded{[&](const FullSpace& f) -> Vector {
                                     return detail::project_halfspaces(z, Matrix(0, f.dim), Vector(0), m, eq);
                                 },
                                 [&](const Halfspace& h) -> Vector {
                                     return detail::project_halfspaces(z, h.normal.transpose(), Vector::Zero(1), m, eq);
                                 },
                                 [&](const PolyhedralCone& c) -> Vector {
                                     return detail::project_halfspaces(z, c.a, Vector::Zero(c.a.rows()), m, eq);
                                 }},
                      cone);
}

/// One-sided directional derivative D+pi_set^S(x; z).
inline Vector dproj(const ConvexSet& set, const Vector& x, const Vector& z, const SpdMetric& m) {
    const Eigen::Index d = dim(set);
    detail::require_dim(x.size(), d, "dproj: x");
    detail::require_dim(z.size(), d, "dproj: z");
    detail::require_dim(m.dim(), d, "dproj: metric");
    if (z.isZero(0.0)) return Vector::Zero(d);

    if (std::holds_alternative<FullSpace>(set)) return z;

    if (const auto* ball = std::get_if<Ball>(&set)) {
        const Vector v = x - ball->center;
        const double r = v.norm();
        const double band = 1e-12 * (1.0 + ball->radius);
        if (r < ball->radius - band) return z;
        if (r <= ball->radius + band) return detail::project_halfspace_cone(v, z, m);
        const Vector y = detail::project_ball(*ball, x, m);
        const Vector u = y - ball->center;
        const double mu = u.dot(m.matrix() * (x - y)) / u.squaredNorm();
        Matrix kkt = Matrix::Zero(d + 1, d + 1);
        kkt.topLeftCorner(d, d) = m.matrix() + mu * Matrix::Identity(d, d);
        kkt.block(0, d, d, 1) = u;
        kkt.block(d, 0, 1, d) = u.transpose();
        Vector rhs = Vector::Zero(d + 1);
        rhs.head(d) = m.matrix() * z;
        const Vector sol = kkt.partialPivLu().solve(rhs);
        return sol.head(d);
    }

    const auto hs = halfspaces(set);
    if (!hs) throw UnsupportedCase("dproj: no closed-form branch for this set");
    const Vector y = project(set, x, m);
    const Vector u = x - y;
    const SupportConeRep cone = support_cone(set, y);
    const double scale = 1.0 + x.norm();
    if (m.norm(u) <= 1e-12 * scale) return project_cone(cone, z, m);
    return project_cone(cone, z, m, u);
}

/// Forward difference (pi(x + eps z) - pi(x)) / eps.
inline Vector dproj_fd(const ConvexSet& set, const Vector& x, const Vector& z, const SpdMetric& m, double eps = 1e-6) {
    detail::require(eps > 0.0, "dproj_fd: eps must be positive");
    return (project(set, x + eps * z, m) - project(set, x, m)) / eps;
}

namespace detail {

// Deterministic probe stream for certificate checks.
inline constexpr std::uint64_t kProbeSeed = 0x5eed0fc0ffee1234ULL;

inline Vector random_feasible(const ConvexSet& set, const Vector& anchor, CounterRng& rng, const SpdMetric& m) {
    const Eigen::Index d = dim(set);
    return std::visit(overloaded{[&](const FullSpace&) -> Vector {
                                     return anchor + (1.0 + anchor.norm()) * rng.normal_vector(d);
                                 },
                                 [&](const Ball& s) -> Vector {
                                     Vector g = rng.normal_vector(d);
                                     g.normalize();
                                     const double rad = s.radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
                                     return s.center + rad * g;
                                 },
                                 [&](const Box& s) -> Vector {
                                     Vector w(d);
                                     for (Eigen::Index i = 0; i < d; ++i) w[i] = s.lo[i] + rng.uniform() * (s.hi[i] - s.lo[i]);
                                     return w;
                                 },
                                 [&](const auto&) -> Vector {
                                     const Vector g = anchor + (1.0 + anchor.norm()) * rng.normal_vector(d);
                                     return project(set, g, m);
                                 }},
                      set);
}

// Points w in the set maximizing (or probing) <v, w - x0>_S, used as
// "vertex/generator" probes.
inline std::vector<Vector> generator_probes(const ConvexSet& set, const Vector& x0, const Vector& v,
                                            const SpdMetric& m) {
    std::vector<Vector> out;
    const Vector sv = m.matrix() * v;
    if (sv.isZero(0.0)) return out;
    std::visit(overloaded{[&](const FullSpace&) { out.push_back(x0 + v); },
                          [&](const Ball& s) { out.push_back(s.center + s.radius * sv.normalized()); },
                          [&](const Box& s) {
                              Vector w(s.lo.size());
                              for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = sv[i] > 0.0 ? s.hi[i] : s.lo[i];
                              out.push_back(w);
                          },
                          [&](const auto&) {
                              // Step from x0 along the cone projection of v as far as the
                              // inactive constraints allow (capped at unit length).
                              const SupportConeRep cone = support_cone(set, x0);
                              const Vector dir = project_cone(cone, v, m);
                              const double nd = m.norm(dir);
                              // Rounding residue of a vector in the normal cone.
                              if (nd <= 1e-10 * (1.0 + m.norm(v))) return;
                              const Vector step = dir / nd;
                              const auto hs = halfspaces(set);
                              double t = 1.0;
                              for (Eigen::Index i = 0; i < hs->first.rows(); ++i) {
                                  const double rate = hs->first.row(i).dot(step);
                                  if (rate > 0.0) {
                                      const double slack = hs->second[i] - hs->first.row(i).dot(x0);
                                      if (slack > 1e-9 * (1.0 + std::abs(hs->second[i]))) t = std::min(t, slack / rate);
                                  }
                              }
                              const Vector w = x0 + t * step;
                              if (contains(set, w, 1e-9)) out.push_back(w);
                          }},
               set);
    return out;
}

}  // namespace detail

/// max <x - y, w - y>_S over generator probes and `n_random` random feasible
/// probes w. Nonpositive (up to rounding) iff y is the projection of x.
inline double characterization_gap(const ConvexSet& set, const Vector& x, const Vector& y, const SpdMetric& m,
                                   int n_random = 32) {
    CounterRng rng(detail::kProbeSeed);
    double gap = -std::numeric_limits<double>::infinity();
    const Vector r = x - y;
    for (const Vector& w : detail::generator_probes(set, y, r, m)) gap = std::max(gap, m.inner(r, w - y));
    for (int i = 0; i < n_random; ++i)
        gap = std::max(gap, m.inner(r, detail::random_feasible(set, y, rng, m) - y));
    return gap;
}

/// Whether v lies in the S-normal cone of the set at x0, tested on generator
/// probes and 64 random feasible probes: <v, w - x0>_S <= tol (1 + ||v||_S).
inline bool in_normal_cone(const ConvexSet& set, const Vector& x0, const Vector& v, const SpdMetric& m,
                           double tol = 1e-8) {
    const Eigen::Index d = dim(set);
    detail::require_dim(x0.size(), d, "in_normal_cone: x0");
    detail::require_dim(v.size(), d, "in_normal_cone: v");
    detail::require_dim(m.dim(), d, "in_normal_cone: metric");
    if (!contains(set, x0, std::max(tol, 1e-9))) throw InvalidArgument("in_normal_cone: point is not in the set");
    const double bound = tol * (1.0 + m.norm(v));
    for (const Vector& w : detail::generator_probes(set, x0, v, m)) {
        const Vector step = w - x0;
        const double len = m.norm(step);
        // Directional form for short steps so the test does not depend on the step length.
        const double val = len > 0.0 && len < 1.0 ? m.inner(v, step) / len : m.inner(v, step);
        if (val > bound) return false;
    }
    CounterRng rng(detail::kProbeSeed);
    for (int i = 0; i < 64; ++i)
        if (m.inner(v, detail::random_feasible(set, x0, rng, m) - x0) > bound) return false;
    return true;
}

// --- JSON -------------------------------------------------------------------

namespace detail {

inline Vector vector_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_array()) throw InvalidArgument(std::string(what) + ": expected an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw InvalidArgument(std::string(what) + ": expected numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

inline Matrix matrix_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_array() || j.empty()) throw InvalidArgument(std::string(what) + ": expected a nonempty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Matrix out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Vector row = vector_from_json(j[static_cast<std::size_t>(r)], what);
        if (row.size() != cols) throw InvalidArgument(std::string(what) + ": ragged rows");
        out.row(r) = row.transpose();
    }
    return out;
}

inline nlohmann::json to_json_array(const Vector& v) {
    nlohmann::json j = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

inline nlohmann::json to_json_array(const Matrix& a) {
    nlohmann::json j = nlohmann::json::array();
    for (Eigen::Index r = 0; r < a.rows(); ++r) j.push_back(to_json_array(Vector(a.row(r).transpose())));
    return j;
}

}  // namespace detail

inline ConvexSet set_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("type")) throw InvalidArgument("set: expected an object with \"type\"");
    const std::string type = j.at("type").get<std::string>();
    if (type == "full") return FullSpace{j.at("dim").get<Eigen::Index>()};
    if (type == "ball")
        return Ball(detail::vector_from_json(j.at("center"), "ball.center"), j.at("radius").get<double>());
    if (type == "box") return Box(detail::vector_from_json(j.at("lo"), "box.lo"), detail::vector_from_json(j.at("hi"), "box.hi"));
    if (type == "polyhedron")
        return Polyhedron(detail::matrix_from_json(j.at("a"), "polyhedron.a"), detail::vector_from_json(j.at("b"), "polyhedron.b"));
    if (type == "cone") return PolyhedralCone(detail::matrix_from_json(j.at("a"), "cone.a"));
    throw InvalidArgument("set: unknown type \"" + type + "\"");
}

inline nlohmann::json set_to_json(const ConvexSet& set) {
    using nlohmann::json;
    return std::visit(overloaded{[](const FullSpace& s) { return json{{"type", "full"}, {"dim", s.dim}}; },
                                 [](const Ball& s) {
                                     return json{{"type", "ball"}, {"center", detail::to_json_array(s.center)}, {"radius", s.radius}};
                                 },
                                 [](const Box& s) {
                                     return json{{"type", "box"}, {"lo", detail::to_json_array(s.lo)}, {"hi", detail::to_json_array(s.hi)}};
                                 },
                                 [](const Polyhedron& s) {
                                     return json{{"type", "polyhedron"}, {"a", detail::to_json_array(s.a)}, {"b", detail::to_json_array(s.b)}};
                                 },
                                 [](const PolyhedralCone& s) {
                                     return json{{"type", "cone"}, {"a", detail::to_json_array(s.a)}};
                                 }},
                      set);
}

inline SpdMetric metric_from_json(const nlohmann::json& j, Eigen::Index dim) {
    if (j.is_null() || (j.is_string() && j.get<std::string>() == "identity")) return SpdMetric::identity(dim);
    if (j.is_object() && j.contains("s")) {
        SpdMetric m(detail::matrix_from_json(j.at("s"), "metric.s"));
        detail::require_dim(m.dim(), dim, "metric");
        return m;
    }
    if (j.is_array()) {
        SpdMetric m(detail::matrix_from_json(j, "metric"));
        detail::require_dim(m.dim(), dim, "metric");
        return m;
    }
    throw InvalidArgument("metric: expected \"identity\", {\"s\": [[...]]} or a matrix");
}

inline nlohmann::json metric_to_json(const SpdMetric& m) {
    if (m.is_identity()) return "identity";
    return nlohmann::json{{"s", detail::to_json_array(m.matrix())}};
}

}  // namespace cmest
