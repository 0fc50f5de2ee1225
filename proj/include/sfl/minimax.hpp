#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "sfl/groundstate.hpp"
#include "sfl/pathlab.hpp"

namespace sfl {

// (l1^q + l1inf^q)^(1/q) when l1 > 0, l1inf otherwise.
inline double lambda_sharp(double l1, double l1inf, double p) {
    if (!(l1inf > 0.0)) throw Error("lambda_sharp needs l1inf > 0");
    if (l1 <= 0.0) return l1inf;
    const double q = p / (p - 2.0);
    return std::pow(std::pow(l1, q) + std::pow(l1inf, q), 1.0 / q);
}

// Largest m >= 1 with
//   c >= (m-1)^sigma l1inf                    if t1 = 0 or l1 <= 0,
//   c >= (l1^q + (m-1) l1inf^q)^(1/q)         otherwise.
inline int multiplicity_floor(double c, double l1, double l1inf, double p, bool t1_zero) {
    if (!(l1inf > 0.0)) throw Error("multiplicity_floor needs l1inf > 0");
    const double q = p / (p - 2.0);
    const double sigma = 1.0 / q;
    const bool escape_only = t1_zero || l1 <= 0.0;
    auto allowed = [&](long m) {
        if (m <= 1) return true;
        const double k = static_cast<double>(m - 1);
        if (escape_only) return c >= std::pow(k, sigma) * l1inf;
        return c >= std::pow(std::pow(l1, q) + k * std::pow(l1inf, q), sigma);
    };
    if (c <= 0.0) return 1;
    double est = 0.0;
    if (escape_only) {
        est = std::pow(c / l1inf, q);
    } else {
        est = (std::pow(c, q) - std::pow(l1, q)) / std::pow(l1inf, q);
    }
    constexpr long cap = 1L << 30;
    long m = 1 + static_cast<long>(std::clamp(std::floor(est), 0.0, static_cast<double>(cap)));
    while (m < cap && allowed(m + 1)) ++m;
    while (m > 1 && !allowed(m)) --m;
    return static_cast<int>(m);
}

// ---------------------------------------------------------------------------
// Two-bump upper bounds for lambda_2
// ---------------------------------------------------------------------------

struct SweepEntry {
    double distance = 0.0;  // requested |y|
    LatticeVector shift{0, 0, 0};
    double path_max = 0.0;
    double theta = 0.0;
    double balanced_energy = 0.0;  // J at the balanced point
    double balanced_theta = 0.0;
    bool balanced_ok = false;      // J(u0) >= 2^sigma l1 - tol
    std::vector<std::string> warnings;
    std::vector<PathPoint> scan;
};

struct Lambda2Bounds {
    double lower = 0.0;
    std::string lower_rule;
    bool norm_condition = false;  // |W|_q < (2^sigma - 1) l1inf
    double upper = 0.0;
    std::size_t witness = 0;  // index into sweep
    double sharp = 0.0;
    std::vector<SweepEntry> sweep;
};

inline constexpr double kBalancedTolerance = 1e-6;

inline std::vector<double> default_y_sweep() { return {4.0, 6.0, 8.0, 10.0, 12.0}; }

inline Lambda2Bounds lambda2_bounds(const Problem& pr, const GridFunction& w1, double l1, const GridFunction& winf,
                                    double l1inf, const std::vector<double>& y_sweep = default_y_sweep(),
                                    int theta_samples = kDefaultThetaSamples) {
    if (y_sweep.empty()) throw Error("y sweep is empty");
    const double p = pr.spec.p;
    const double two_sigma = std::pow(2.0, pr.spec.sigma());
    Lambda2Bounds out;
    out.sharp = lambda_sharp(l1, l1inf, p);

    out.lower = two_sigma * l1;
    out.lower_rule = "2^sigma lambda_1";
    if (l1 > out.lower) {
        out.lower = l1;
        out.lower_rule = "lambda_1";
    }
    out.norm_condition = pr.w_dual_norm < (two_sigma - 1.0) * l1inf;
    if (out.norm_condition && two_sigma * l1inf - pr.w_dual_norm > out.lower) {
        out.lower = two_sigma * l1inf - pr.w_dual_norm;
        out.lower_rule = "2^sigma lambda_1^inf - |W|_q";
    }

    const double h = pr.grid->spacing();
    for (double d : y_sweep) {
        SweepEntry e;
        e.distance = d;
        e.shift = to_lattice({d, 0.0, 0.0}, h);
        const auto path = translated_bump_path(w1, winf, e.shift, p);
        e.warnings = path.warnings;
        auto mx = path_max_J(path, pr, theta_samples);
        e.path_max = mx.value;
        e.theta = mx.theta;
        e.scan = std::move(mx.scan);
        const auto bp = balanced_point(path, pr);
        e.balanced_theta = bp.theta;
        e.balanced_energy = J(bp.u0, pr);
        e.balanced_ok = e.path_max >= two_sigma * l1 - kBalancedTolerance &&
                        e.balanced_energy >= two_sigma * l1 - kBalancedTolerance;
        out.sweep.push_back(std::move(e));
    }
    out.witness = 0;
    for (std::size_t i = 1; i < out.sweep.size(); ++i) {
        if (out.sweep[i].path_max < out.sweep[out.witness].path_max) out.witness = i;
    }
    out.upper = out.sweep[out.witness].path_max;
    return out;
}

struct RadialLevels {
    double witness_inf = 0.0;  // J_inf of the normalized one-node radial state: upper bound for lambda_{2,r}^inf
    double upper = 0.0;        // J of the same field: upper bound for lambda_{2,r}
    double lower = 0.0;        // witness_inf - |W|_q
    double shooting_level = 0.0;
};

inline RadialLevels lambda2_radial(const Problem& pr, const RadialProfile& excited) {
    if (excited.sign_changes != 1) {
        throw Error("lambda2_radial needs a one-node profile, got " + std::to_string(excited.sign_changes) + " sign changes");
    }
    const GridFunction u = lp_normalize(profile_to_grid(excited, pr.grid), pr.spec.p);
    const auto e = energy_J(u, pr);
    RadialLevels out;
    out.witness_inf = e.autonomous;
    out.upper = e.total;
    out.lower = e.autonomous - pr.w_dual_norm;
    out.shooting_level = excited.level;
    return out;
}

// ---------------------------------------------------------------------------
// Path refinement
// ---------------------------------------------------------------------------

struct RefineOptions {
    int nodes = 32;
    int iterations = 20;
    int theta_samples = kDefaultThetaSamples;
    double increase_tolerance = 1e-8;  // relative
    double armijo = 1e-4;
};

struct RefineResult {
    PathFamily path;
    std::vector<double> max_history;  // path max before the first and after every iteration
};

namespace detail {

// Equal-arc redistribution of an odd string: nodes_[0..M) followed by -nodes_[0].
inline std::vector<GridFunction> reparameterize(const std::vector<GridFunction>& nodes, double p) {
    const std::size_t m = nodes.size();
    auto next = [&](std::size_t j) { return j + 1 < m ? nodes[j + 1] : -nodes.front(); };
    std::vector<double> arc(m + 1, 0.0);
    for (std::size_t j = 0; j < m; ++j) arc[j + 1] = arc[j] + l2_norm(next(j) - nodes[j]);
    std::vector<GridFunction> out;
    out.reserve(m);
    std::size_t seg = 0;
    for (std::size_t k = 0; k < m; ++k) {
        const double s = arc[m] * static_cast<double>(k) / static_cast<double>(m);
        while (seg + 1 < m && arc[seg + 1] < s) ++seg;
        const double len = arc[seg + 1] - arc[seg];
        const double f = len > 0.0 ? std::clamp((s - arc[seg]) / len, 0.0, 1.0) : 0.0;
        out.push_back(lp_normalize(combine(1.0 - f, nodes[seg], f, next(seg)), p));
    }
    return out;
}

}  // namespace detail

// Simplified string method on the half loop [0, pi): an Armijo descent step
// for every node, renormalization onto M, equal-arc reparameterization. The
// other half is the reflection, so oddness is exact.
inline RefineResult refine_path(const PathFamily& path, const Problem& pr, const RefineOptions& opt = {}) {
    if (opt.nodes < 2) throw Error("refine_path needs at least two nodes");
    const double p = pr.spec.p;
    std::vector<GridFunction> nodes;
    nodes.reserve(opt.nodes);
    for (int j = 0; j < opt.nodes; ++j) nodes.push_back(path.sample(static_cast<std::size_t>(j), opt.nodes));

    RefineResult res{PathFamily::sampled(nodes, p), {}};
    double current = path_max_J(res.path, pr, opt.theta_samples).value;
    res.max_history.push_back(current);
    const double h = pr.grid->spacing();
    std::vector<double> steps(nodes.size(), h * h / (8.0 * pr.grid->dim()));

    for (int it = 0; it < opt.iterations; ++it) {
        std::vector<GridFunction> moved(nodes.size());
        for (int attempt = 0;; ++attempt) {
            parallel_for(nodes.size(), [&](std::size_t j) {
                const GridFunction g = manifold_gradient(nodes[j], pr);
                const double gn2 = l2_inner(g, g);
                const double level = J(nodes[j], pr);
                double s = steps[j];
                for (int bt = 0; bt < 60; ++bt) {
                    GridFunction trial = lp_normalize(combine(1.0, nodes[j], -s, g), p);
                    if (J(trial, pr) <= level - opt.armijo * s * gn2) {
                        moved[j] = std::move(trial);
                        steps[j] = std::min(2.0 * s, 1e3);
                        return;
                    }
                    s *= 0.5;
                }
                moved[j] = nodes[j];
                steps[j] = s;
            });
            auto candidate = PathFamily::sampled(detail::reparameterize(moved, p), p);
            const double value = path_max_J(candidate, pr, opt.theta_samples).value;
            if (value <= current + opt.increase_tolerance * std::abs(current)) {
                nodes = candidate.nodes();
                res.path = std::move(candidate);
                current = value;
                break;
            }
            if (attempt >= 8) {
                throw ConvergenceFailure("refine_path: path max rose from " + std::to_string(current) + " to " +
                                         std::to_string(value) + " at iteration " + std::to_string(it));
            }
            for (double& s : steps) s *= 0.25;
        }
        res.max_history.push_back(current);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Bump diagnostic
// ---------------------------------------------------------------------------

struct Bump {
    std::array<double, 3> center{0.0, 0.0, 0.0};
    double mass = 0.0;  // I restricted to the basin
    double peak = 0.0;
};

struct ProfileDiagnostic {
    int count = 0;
    std::vector<Bump> bumps;  // sorted by decreasing mass
    double residual_mass = 0.0;
};

inline constexpr double kBumpMassThreshold = 0.05;
inline constexpr double kBumpSeparation = 4.0;  // in decay lengths

// Steepest-ascent watershed on |u|; basins whose peaks are closer than
// kBumpSeparation / decay_rate are merged, then basins below 5% of the mass
// are discarded into the residual.
inline ProfileDiagnostic bump_diagnostic(const GridFunction& u, const Problem& pr, double decay_rate = 1.0) {
    const Grid& g = u.grid();
    const double p = pr.spec.p;
    const std::size_t n = u.size();
    const int per_axis = g.nodes_per_axis();
    std::vector<std::size_t> up(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = i;
        double bv = std::abs(u[i]);
        for (int a = 0; a < g.dim(); ++a) {
            const int ia = g.axis_index(i, a);
            const std::size_t st = g.stride(a);
            if (ia > 0 && std::abs(u[i - st]) > bv) {
                best = i - st;
                bv = std::abs(u[best]);
            }
            if (ia < per_axis - 1 && std::abs(u[i + st]) > bv) {
                best = i + st;
                bv = std::abs(u[best]);
            }
        }
        up[i] = best;
    }
    std::vector<std::size_t> root(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = i;
        while (up[r] != r) r = up[r];
        root[i] = r;
    }
    const double total = mass_I(u, p);
    std::vector<std::size_t> peaks;
    std::vector<double> basin_mass(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (u[i] == 0.0) continue;
        basin_mass[root[i]] += abs_pow(u[i], p) * g.weight();
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (root[i] == i && basin_mass[i] > 0.0) peaks.push_back(i);
    }
    std::sort(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(u[a]) != std::abs(u[b]) ? std::abs(u[a]) > std::abs(u[b]) : a < b;
    });

    const double radius = kBumpSeparation / decay_rate;
    std::vector<Bump> bumps;
    for (std::size_t pk : peaks) {
        const auto x = g.position(pk);
        Bump* owner = nullptr;
        for (auto& b : bumps) {
            double d2 = 0.0;
            for (int a = 0; a < g.dim(); ++a) d2 += (x[a] - b.center[a]) * (x[a] - b.center[a]);
            if (std::sqrt(d2) < radius) {
                owner = &b;
                break;
            }
        }
        if (owner) {
            owner->mass += basin_mass[pk];
        } else {
            bumps.push_back({x, basin_mass[pk], std::abs(u[pk])});
        }
    }
    ProfileDiagnostic out;
    double kept = 0.0;
    for (const auto& b : bumps) {
        if (b.mass >= kBumpMassThreshold * total) {
            out.bumps.push_back(b);
            kept += b.mass;
        }
    }
    std::sort(out.bumps.begin(), out.bumps.end(), [](const Bump& a, const Bump& b) { return a.mass > b.mass; });
    out.count = static_cast<int>(out.bumps.size());
    out.residual_mass = total - kept;
    return out;
}

// ---------------------------------------------------------------------------
// Sign check for solutions
// ---------------------------------------------------------------------------

struct NodalityVerdict {
    double residual = 0.0;
    bool hypotheses = false;  // l1 <= 0 < lambda or l1 < 0 <= lambda
    bool nodal = false;       // at least two nodal domains
    bool consistent = true;   // hypotheses imply nodal
    int nodal_count = 0;
};

inline constexpr double kNodalityResidual = 1e-3;

inline NodalityVerdict nodality_check(const GridFunction& u, double lambda, double l1, const Problem& pr,
                                      double residual_threshold = kNodalityResidual) {
    NodalityVerdict v;
    v.residual = euler_lagrange_residual(u, lambda, pr);
    if (!(v.residual <= residual_threshold)) {
        throw Error("nodality_check: Euler-Lagrange residual " + std::to_string(v.residual) + " exceeds " +
                    std::to_string(residual_threshold));
    }
    v.hypotheses = (l1 <= 0.0 && 0.0 < lambda) || (l1 < 0.0 && 0.0 <= lambda);
    v.nodal_count = nodal_domains(u, 1e-8 * max_abs(u)).count;
    const auto parts = split_signs(u);
    v.nodal = v.nodal_count >= 2 && max_abs(parts.plus) > 0.0 && max_abs(parts.minus) > 0.0;
    v.consistent = !v.hypotheses || v.nodal;
    return v;
}

}  // namespace sfl
