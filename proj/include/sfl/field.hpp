#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <utility>
#include <vector>

#include "sfl/error.hpp"
#include "sfl/grid.hpp"

namespace sfl {

// (sum h^N |u|^p)^(1/p)
inline double lp_norm(const GridFunction& u, double p) {
    if (p < 1.0) throw Error("lp_norm needs p >= 1");
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += abs_pow(u[i], p);
    return std::pow(s * u.grid().weight(), 1.0 / p);
}

inline double max_abs(const GridFunction& u) {
    double m = 0.0;
    for (double v : u.values()) m = std::max(m, std::abs(v));
    return m;
}

// Radial projection u / |u|_p onto the unit L^p sphere.
inline GridFunction lp_normalize(const GridFunction& u, double p) {
    const double n = lp_norm(u, p);
    if (!(n > 0.0)) throw Error("cannot normalize the zero field");
    return u * (1.0 / n);
}

struct SignParts {
    GridFunction plus;   // max(u, 0)
    GridFunction minus;  // max(-u, 0)
};

inline SignParts split_signs(const GridFunction& u) {
    SignParts s{GridFunction(u.grid_ptr()), GridFunction(u.grid_ptr())};
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u[i] > 0.0) {
            s.plus[i] = u[i];
        } else if (u[i] < 0.0) {
            s.minus[i] = -u[i];
        }
    }
    return s;
}

// Nearest lattice vector to a physical displacement.
inline LatticeVector to_lattice(const std::array<double, 3>& y, double h) {
    return {static_cast<int>(std::lround(y[0] / h)), static_cast<int>(std::lround(y[1] / h)),
            static_cast<int>(std::lround(y[2] / h))};
}

inline std::array<double, 3> lattice_to_physical(const LatticeVector& s, double h) {
    return {s[0] * h, s[1] * h, s[2] * h};
}

inline double lattice_length(const LatticeVector& s, double h) {
    return h * std::sqrt(double(s[0]) * s[0] + double(s[1]) * s[1] + double(s[2]) * s[2]);
}

// u(. - y) for a lattice vector y; values pushed past the boundary are dropped.
inline GridFunction translate(const GridFunction& u, const LatticeVector& shift) {
    const Grid& g = u.grid();
    GridFunction out(u.grid_ptr());
    const int n = g.nodes_per_axis();
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (g.is_boundary(i)) continue;
        auto idx = g.multi_index(i);
        bool inside = true;
        for (int a = 0; a < g.dim(); ++a) {
            idx[a] -= shift[a];
            if (idx[a] < 0 || idx[a] >= n) {
                inside = false;
                break;
            }
        }
        if (inside) out[i] = u[g.flat_index(idx)];
    }
    return out;
}

// Connected components of {u > eps} and {u < -eps} under face adjacency.
struct NodalLabeling {
    std::vector<int> labels;  // 0 on the zero set, 1..count otherwise
    int count = 0;
    std::vector<int> signs;   // sign of component k at signs[k-1]
};

inline double default_nodal_eps(const GridFunction& u) { return 1e-10 * max_abs(u); }

inline NodalLabeling nodal_domains(const GridFunction& u, std::optional<double> eps = std::nullopt) {
    const double tol = eps ? *eps : default_nodal_eps(u);
    if (tol < 0.0) throw Error("nodal threshold must be nonnegative");
    const Grid& g = u.grid();
    NodalLabeling out;
    out.labels.assign(u.size(), 0);
    auto sign_of = [&](std::size_t i) { return u[i] > tol ? 1 : (u[i] < -tol ? -1 : 0); };
    std::vector<std::size_t> stack;
    const int n = g.nodes_per_axis();
    for (std::size_t seed = 0; seed < u.size(); ++seed) {
        const int s = sign_of(seed);
        if (s == 0 || out.labels[seed] != 0) continue;
        const int label = ++out.count;
        out.signs.push_back(s);
        out.labels[seed] = label;
        stack.assign(1, seed);
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            for (int a = 0; a < g.dim(); ++a) {
                const int ia = g.axis_index(cur, a);
                const std::size_t st = g.stride(a);
                if (ia > 0) {
                    const std::size_t nb = cur - st;
                    if (out.labels[nb] == 0 && sign_of(nb) == s) {
                        out.labels[nb] = label;
                        stack.push_back(nb);
                    }
                }
                if (ia < n - 1) {
                    const std::size_t nb = cur + st;
                    if (out.labels[nb] == 0 && sign_of(nb) == s) {
                        out.labels[nb] = label;
                        stack.push_back(nb);
                    }
                }
            }
        }
    }
    return out;
}

// chi_{Omega_k} u for component k (1-based).
inline GridFunction restrict_to_domain(const GridFunction& u, const NodalLabeling& lab, int k) {
    GridFunction out(u.grid_ptr());
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (lab.labels[i] == k) out[i] = u[i];
    }
    return out;
}

}  // namespace sfl
