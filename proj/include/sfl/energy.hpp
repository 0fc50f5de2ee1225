#pragma once

#include <cmath>
#include <utility>

#include "sfl/domain.hpp"
#include "sfl/field.hpp"

namespace sfl {

// Fields are "on M" when |I(u) - 1| is within this tolerance.
inline constexpr double kManifoldTolerance = 1e-6;

struct EnergyBreakdown {
    double kinetic = 0.0;     // sum over links of h^N |D u|^2
    double potential = 0.0;   // sum h^N V u^2
    double mass2 = 0.0;       // sum h^N u^2
    double total = 0.0;       // J
    double autonomous = 0.0;  // J_inf = kinetic + V_inf * mass2
    double deviation = 0.0;   // J - J_inf
};

// I(u) = sum h^N |u|^p
inline double mass_I(const GridFunction& u, double p) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += abs_pow(u[i], p);
    return s * u.grid().weight();
}

// Forward differences on every link of the full grid. Boundary values are
// zero, so links touching the boundary carry the Dirichlet jump.
inline double kinetic_energy(const GridFunction& u) {
    const Grid& g = u.grid();
    const int n = g.nodes_per_axis();
    double s = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
        const std::size_t st = g.stride(a);
        for (std::size_t i = 0; i < u.size(); ++i) {
            if (g.axis_index(i, a) == n - 1) continue;
            const double d = u[i + st] - u[i];
            s += d * d;
        }
    }
    return s * std::pow(g.spacing(), g.dim() - 2);
}

// Symmetric bilinear form behind J: B(u,u) = J(u).
inline double energy_bilinear(const GridFunction& u, const GridFunction& v, const Problem& pr) {
    const Grid& g = u.grid();
    const int n = g.nodes_per_axis();
    double kin = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
        const std::size_t st = g.stride(a);
        for (std::size_t i = 0; i < u.size(); ++i) {
            if (g.axis_index(i, a) == n - 1) continue;
            kin += (u[i + st] - u[i]) * (v[i + st] - v[i]);
        }
    }
    double pot = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) pot += pr.v[i] * u[i] * v[i];
    return kin * std::pow(g.spacing(), g.dim() - 2) + pot * g.weight();
}

inline EnergyBreakdown energy_J(const GridFunction& u, const Problem& pr) {
    EnergyBreakdown e;
    e.kinetic = kinetic_energy(u);
    double pot = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double u2 = u[i] * u[i];
        pot += pr.v[i] * u2;
        m2 += u2;
    }
    const double w = u.grid().weight();
    e.potential = pot * w;
    e.mass2 = m2 * w;
    e.total = e.kinetic + e.potential;
    e.autonomous = e.kinetic + pr.spec.v_inf * e.mass2;
    e.deviation = e.total - e.autonomous;
    return e;
}

inline double J(const GridFunction& u, const Problem& pr) { return energy_J(u, pr).total; }
inline double J_inf(const GridFunction& u, const Problem& pr) { return energy_J(u, pr).autonomous; }

// Norm squared from the V_inf inner product: sum |Du|^2 + V_inf u^2.
inline double h1_norm_squared(const GridFunction& u, const Problem& pr) { return energy_J(u, pr).autonomous; }

// -Delta_h u on interior nodes (5- or 7-point stencil), zero on the boundary.
inline GridFunction neg_laplacian(const GridFunction& u) {
    const Grid& g = u.grid();
    GridFunction out(u.grid_ptr());
    const double inv_h2 = 1.0 / (g.spacing() * g.spacing());
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (g.is_boundary(i)) continue;
        double acc = 0.0;
        for (int a = 0; a < g.dim(); ++a) {
            const std::size_t st = g.stride(a);
            acc += 2.0 * u[i] - u[i + st] - u[i - st];
        }
        out[i] = acc * inv_h2;
    }
    return out;
}

// -Delta_h u + V u - lambda |u|^(p-2) u, pointwise on interior nodes.
inline GridFunction euler_lagrange_field(const GridFunction& u, double lambda, const Problem& pr) {
    GridFunction r = neg_laplacian(u);
    const double p = pr.spec.p;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u.grid().is_boundary(i)) continue;
        const double a = std::abs(u[i]);
        r[i] += pr.v[i] * u[i] - lambda * abs_pow(a, p - 2.0) * u[i];
    }
    return r;
}

// Discrete L2 norm of the Euler-Lagrange residual.
inline double euler_lagrange_residual(const GridFunction& u, double lambda, const Problem& pr) {
    const GridFunction r = euler_lagrange_field(u, lambda, pr);
    double s = 0.0;
    for (double v : r.values()) s += v * v;
    return std::sqrt(s * u.grid().weight());
}

inline double l2_inner(const GridFunction& a, const GridFunction& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s * a.grid().weight();
}

inline double l2_norm(const GridFunction& a) { return std::sqrt(l2_inner(a, a)); }

// Lagrange multiplier of a point on M; mu = 2 J(u) / p.
inline double lagrange_multiplier(const GridFunction& u, const Problem& pr) {
    return 2.0 * J(u, pr) / pr.spec.p;
}

inline void require_on_manifold(const GridFunction& u, double p, double tol = kManifoldTolerance) {
    const double m = mass_I(u, p);
    if (std::abs(m - 1.0) > tol) {
        throw NotOnManifold("field is off the constraint manifold: I(u) = " + std::to_string(m));
    }
}

// L2 representative of J'(u) - mu I'(u) with mu = 2J(u)/p:
//   G = 2(-Delta_h u + V u) - 2 J(u) |u|^(p-2) u.
// For any direction v, <G, v> is the derivative of t -> J(normalize(u + t v)) at 0.
inline GridFunction manifold_gradient(const GridFunction& u, const Problem& pr) {
    require_on_manifold(u, pr.spec.p);
    return euler_lagrange_field(u, J(u, pr), pr) * 2.0;
}

inline double manifold_gradient_norm(const GridFunction& u, const Problem& pr) {
    return l2_norm(manifold_gradient(u, pr));
}

struct DeviationBound {
    double deviation = 0.0;  // |J(u) - J_inf(u)|
    double bound = 0.0;      // dual norm of W
};

inline DeviationBound deviation_bound(const GridFunction& u, const Problem& pr) {
    require_on_manifold(u, pr.spec.p);
    return {std::abs(energy_J(u, pr).deviation), pr.w_dual_norm};
}

// Explicit bound for the norm on a sublevel set {J <= alpha} of M:
// |u|^2 = J(u) + sum W u^2 <= alpha + |W^+|_q.
inline double sublevel_norm_bound(double alpha, const Problem& pr) {
    GridFunction wp(pr.grid);
    for (std::size_t i = 0; i < wp.size(); ++i) wp[i] = std::max(pr.w[i], 0.0);
    return alpha + dual_norm(wp, pr.spec.p);
}

}  // namespace sfl
