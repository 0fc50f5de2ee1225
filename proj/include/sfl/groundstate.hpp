#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <numbers>
#include <optional>
#include <vector>

#include "sfl/domain.hpp"
#include "sfl/energy.hpp"
#include "sfl/field.hpp"

namespace sfl {

// Area of the unit sphere S^{N-1}.
inline double sphere_area(int dim) {
    switch (dim) {
        case 1: return 2.0;
        case 2: return 2.0 * std::numbers::pi;
        case 3: return 4.0 * std::numbers::pi;
        default: return 2.0 * std::pow(std::numbers::pi, dim / 2.0) / std::tgamma(dim / 2.0);
    }
}

// Radial solution of -w'' - (N-1)/r w' + V_inf w = lambda |w|^(p-2) w,
// stored normalized to unit L^p mass. Samples start at r0 with uniform step.
struct RadialProfile {
    int dim = 2;
    double p = 4.0;
    double v_inf = 1.0;
    double r0 = 0.0;
    double dr = 0.0;
    std::vector<double> r;
    std::vector<double> w;   // normalized values
    std::vector<double> dw;  // normalized derivatives
    int sign_changes = 0;
    double level = 0.0;          // lambda on M, equals |w_raw|_p^(p-2)
    double central_value = 0.0;  // normalized w(0)
    double central_curvature = 0.0;  // normalized w''(0)
    double scale = 1.0;          // |w_raw|_p, raw = normalized * scale
    double match_radius = 0.0;   // samples beyond follow the matched exponential tail

    // Cubic Hermite interpolation inside the sample range, even Taylor
    // expansion below r0 and the exponential tail past the last sample.
    [[nodiscard]] double value(double rr) const {
        if (rr <= r0) return central_value + 0.5 * central_curvature * rr * rr;
        const double t = (rr - r0) / dr;
        const auto i = static_cast<std::size_t>(t);
        if (i + 1 >= r.size()) {
            const double rl = r.back();
            return w.back() * std::exp(-std::sqrt(v_inf) * (rr - rl)) * std::pow(rl / rr, 0.5 * (dim - 1));
        }
        const double s = t - static_cast<double>(i);
        const double s2 = s * s;
        const double s3 = s2 * s;
        const double h00 = 2 * s3 - 3 * s2 + 1;
        const double h10 = s3 - 2 * s2 + s;
        const double h01 = -2 * s3 + 3 * s2;
        const double h11 = s3 - s2;
        return h00 * w[i] + h10 * dr * dw[i] + h01 * w[i + 1] + h11 * dr * dw[i + 1];
    }
};

struct ShootingOptions {
    double start_radius = 0.0125;  // h/10 at the reference spacing
    double step = 1e-3;
    double outer_radius = 32.0;
    int max_bisections = 200;
    int max_bracket_doublings = 60;
};

namespace detail {

struct ShotResult {
    int crossings = 0;
    bool turned = false;
};

struct RadialOde {
    int dim;
    double p;
    double v_inf;

    void rhs(double r, double w, double v, double& dw, double& dv) const {
        dw = v;
        dv = -(dim - 1) / r * v + v_inf * w - abs_pow(w, p - 2.0) * w;
    }

    void rk4(double r, double h, double& w, double& v) const {
        double k1w, k1v, k2w, k2v, k3w, k3v, k4w, k4v;
        rhs(r, w, v, k1w, k1v);
        rhs(r + 0.5 * h, w + 0.5 * h * k1w, v + 0.5 * h * k1v, k2w, k2v);
        rhs(r + 0.5 * h, w + 0.5 * h * k2w, v + 0.5 * h * k2v, k3w, k3v);
        rhs(r + h, w + h * k3w, v + h * k3v, k4w, k4v);
        w += h / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w);
        v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
    }

    // w''(0) from the equation with w'(0) = 0.
    [[nodiscard]] double curvature_at_origin(double alpha) const {
        return (v_inf * alpha - abs_pow(alpha, p - 2.0) * alpha) / dim;
    }
};

// Integrates from the origin and stops as soon as the shot is classified:
// more than `max_crossings` sign changes (overshoot), or |w| reaching a
// local minimum away from zero (undershoot).
inline ShotResult classify_shot(const RadialOde& ode, double alpha, int max_crossings, const ShootingOptions& opt) {
    const double c2 = ode.curvature_at_origin(alpha);
    double r = opt.start_radius;
    double w = alpha + 0.5 * c2 * r * r;
    double v = c2 * r;
    ShotResult res;
    if (c2 >= 0.0) {
        res.turned = true;  // at or below the constant solution: never leaves it downward
        return res;
    }
    const auto steps = static_cast<long>((opt.outer_radius - r) / opt.step);
    for (long s = 0; s < steps; ++s) {
        const double w_old = w;
        const double v_old = v;
        ode.rk4(r, opt.step, w, v);
        r += opt.step;
        if ((w_old > 0.0 && w <= 0.0) || (w_old < 0.0 && w >= 0.0)) {
            if (++res.crossings > max_crossings) return res;
        }
        // derivative changes sign while |w| was decreasing: |w| has a local minimum
        if (v_old * v <= 0.0 && v_old != 0.0 && w * v_old < 0.0 && w * v >= 0.0) {
            res.turned = true;
            return res;
        }
    }
    return res;
}

struct Trajectory {
    std::vector<double> r, w, v;
};

inline Trajectory integrate_full(const RadialOde& ode, double alpha, const ShootingOptions& opt) {
    Trajectory t;
    const double c2 = ode.curvature_at_origin(alpha);
    double r = opt.start_radius;
    double w = alpha + 0.5 * c2 * r * r;
    double v = c2 * r;
    const auto steps = static_cast<long>(std::ceil((opt.outer_radius - r) / opt.step));
    t.r.reserve(steps + 1);
    t.w.reserve(steps + 1);
    t.v.reserve(steps + 1);
    t.r.push_back(r);
    t.w.push_back(w);
    t.v.push_back(v);
    for (long s = 0; s < steps; ++s) {
        ode.rk4(r, opt.step, w, v);
        r = opt.start_radius + (s + 1) * opt.step;
        t.r.push_back(r);
        t.w.push_back(w);
        t.v.push_back(v);
    }
    return t;
}

// Composite Simpson on uniform samples; a trailing odd interval uses the trapezoid rule.
inline double simpson(const std::vector<double>& f, double h) {
    const std::size_t n = f.size();
    if (n < 2) return 0.0;
    const std::size_t m = (n - 1) % 2 == 0 ? n : n - 1;
    double s = 0.0;
    if (m >= 3) {
        s = f[0] + f[m - 1];
        for (std::size_t i = 1; i + 1 < m; ++i) s += (i % 2 == 1 ? 4.0 : 2.0) * f[i];
        s *= h / 3.0;
    }
    if (m != n) s += 0.5 * h * (f[n - 2] + f[n - 1]);
    return s;
}

}  // namespace detail

// Radial state with exactly `nodes` interior sign changes, found by bisection
// on w(0) with lambda = 1, then normalized to M.
inline RadialProfile shoot_radial(int dim, double p, double v_inf, int nodes, const ShootingOptions& opt = {}) {
    ProblemSpec check;
    check.dim = dim;
    check.p = p;
    check.v_inf = v_inf;
    check.validate();
    if (nodes < 0) throw InvalidSpec("node count must be nonnegative");

    const detail::RadialOde ode{dim, p, v_inf};
    // constant solution of the lambda = 1 equation; smaller shots never cross
    double lo = std::pow(v_inf, 1.0 / (p - 2.0));
    double hi = 2.0 * lo;
    int reached = 0;
    for (int d = 0;; ++d) {
        const auto shot = detail::classify_shot(ode, hi, nodes, opt);
        reached = shot.crossings;
        if (shot.crossings > nodes) break;
        lo = hi;
        hi *= 2.0;
        if (d >= opt.max_bracket_doublings) {
            throw ConvergenceFailure("shooting bracket not found for " + std::to_string(nodes) +
                                     " nodes; reached " + std::to_string(reached) + " sign changes");
        }
    }
    int it = 0;
    while (hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi) {
        if (++it > opt.max_bisections) throw ConvergenceFailure("shooting bisection did not converge");
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (detail::classify_shot(ode, mid, nodes, opt).crossings > nodes) {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    const auto tl = detail::integrate_full(ode, lo, opt);
    const auto th = detail::integrate_full(ode, hi, opt);
    const double alpha = 0.5 * (lo + hi);

    // The true solution lies between the two bracketing shots; trust it
    // while they agree and continue with the decaying exponential tail.
    std::size_t cut = tl.r.size();
    int seen = 0;
    for (std::size_t i = 0; i < tl.r.size(); ++i) {
        const double diff = std::abs(th.w[i] - tl.w[i]);
        const bool ok = diff <= 1e-3 * std::abs(tl.w[i]) || diff <= 1e-10 * alpha;
        if (i > 0 && ((tl.w[i - 1] + th.w[i - 1] > 0.0) != (tl.w[i] + th.w[i] > 0.0))) ++seen;
        if (!ok || seen > nodes) {
            cut = i;
            break;
        }
    }
    if (cut < 2 || tl.r[cut - 1] < std::min(opt.outer_radius, 8.0 / std::sqrt(v_inf))) {
        throw ConvergenceFailure("shooting lost precision too early (r = " +
                                 std::to_string(cut > 0 ? tl.r[cut - 1] : 0.0) + ")");
    }

    RadialProfile prof;
    prof.dim = dim;
    prof.p = p;
    prof.v_inf = v_inf;
    prof.r0 = opt.start_radius;
    prof.dr = opt.step;
    prof.r = tl.r;
    prof.w.resize(tl.r.size());
    prof.dw.resize(tl.r.size());
    const double k = std::sqrt(v_inf);
    const std::size_t last = cut - 1;
    const double wm = 0.5 * (tl.w[last] + th.w[last]);
    const double rm = tl.r[last];
    prof.match_radius = rm;
    for (std::size_t i = 0; i < tl.r.size(); ++i) {
        if (i <= last) {
            prof.w[i] = 0.5 * (tl.w[i] + th.w[i]);
            prof.dw[i] = 0.5 * (tl.v[i] + th.v[i]);
        } else {
            const double rr = tl.r[i];
            prof.w[i] = wm * std::exp(-k * (rr - rm)) * std::pow(rm / rr, 0.5 * (dim - 1));
            prof.dw[i] = prof.w[i] * (-k - 0.5 * (dim - 1) / rr);
        }
    }

    int changes = 0;
    for (std::size_t i = 1; i <= last; ++i) {
        if ((prof.w[i - 1] > 0.0) != (prof.w[i] > 0.0)) ++changes;
    }
    if (changes != nodes) {
        throw ConvergenceFailure("shooting produced " + std::to_string(changes) + " sign changes, wanted " +
                                 std::to_string(nodes));
    }
    prof.sign_changes = changes;

    // I(w) = |S^{N-1}| * int |w|^p r^{N-1} dr, with the small ball below r0 added.
    std::vector<double> integrand(prof.r.size());
    for (std::size_t i = 0; i < prof.r.size(); ++i) {
        integrand[i] = abs_pow(prof.w[i], p) * std::pow(prof.r[i], dim - 1);
    }
    const double area = sphere_area(dim);
    const double mass = area * (detail::simpson(integrand, prof.dr) + abs_pow(alpha, p) * std::pow(prof.r0, dim) / dim);
    prof.scale = std::pow(mass, 1.0 / p);
    prof.level = std::pow(prof.scale, p - 2.0);
    for (std::size_t i = 0; i < prof.r.size(); ++i) {
        prof.w[i] /= prof.scale;
        prof.dw[i] /= prof.scale;
    }
    prof.central_value = alpha / prof.scale;
    prof.central_curvature = ode.curvature_at_origin(alpha) / prof.scale;
    return prof;
}

inline RadialProfile shoot_ground(int dim, double p, double v_inf, const ShootingOptions& opt = {}) {
    return shoot_radial(dim, p, v_inf, 0, opt);
}

inline RadialProfile shoot_excited(int dim, double p, double v_inf, int nodes, const ShootingOptions& opt = {}) {
    if (nodes < 1) throw InvalidSpec("excited states need at least one node");
    return shoot_radial(dim, p, v_inf, nodes, opt);
}

// |S^{N-1}| * int (w'^2 + V_inf w^2) r^{N-1} dr of the normalized profile.
inline double radial_energy(const RadialProfile& prof) {
    std::vector<double> f(prof.r.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        f[i] = (prof.dw[i] * prof.dw[i] + prof.v_inf * prof.w[i] * prof.w[i]) * std::pow(prof.r[i], prof.dim - 1);
    }
    const double inner = prof.v_inf * prof.central_value * prof.central_value * std::pow(prof.r0, prof.dim) / prof.dim;
    return sphere_area(prof.dim) * (detail::simpson(f, prof.dr) + inner);
}

// Samples the profile on the grid around `center`; boundary nodes are zero.
inline GridFunction profile_to_grid(const RadialProfile& prof, const GridPtr& grid,
                                    const std::array<double, 3>& center = {0.0, 0.0, 0.0}) {
    GridFunction u(grid);
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (grid->is_boundary(i)) continue;
        const auto x = grid->position(i);
        const double d0 = x[0] - center[0];
        const double d1 = x[1] - center[1];
        const double d2 = x[2] - center[2];
        u[i] = prof.value(std::sqrt(d0 * d0 + d1 * d1 + d2 * d2));
    }
    return u;
}

struct DecayFit {
    double rate = 0.0;        // fitted exponential rate, estimates sqrt(V_inf)
    double c0 = 0.0;          // fitted prefactor of exp(-rate r) / r^{(N-1)/2}
    double a0 = 0.0;          // envelope rate, 0.95 * rate capped at sqrt(V_inf)
    double envelope_c = 0.0;  // smallest C with |w(r)| <= C exp(-a0 r) on the samples
    double r_min = 0.0;
    double r_max = 0.0;
    double residual = 0.0;    // RMS residual of the log-linear fit
};

inline constexpr double kEnvelopeSafety = 0.95;

// Least-squares fit of log(|w| r^{(N-1)/2}) = log C0 - rate * r on [r_min, r_max].
inline DecayFit fit_decay(const RadialProfile& prof, double v_inf, double r_min = 6.0, double r_max = 12.0) {
    if (!(r_max > r_min)) throw Error("decay fit window is empty");
    std::vector<double> xs, ys;
    double sign = 0.0;
    for (std::size_t i = 0; i < prof.r.size(); ++i) {
        if (prof.r[i] < r_min || prof.r[i] > r_max) continue;
        if (sign == 0.0) sign = prof.w[i] >= 0.0 ? 1.0 : -1.0;
        const double val = sign * prof.w[i];
        if (!(val > 0.0)) throw Error("decay fit window contains nonpositive values");
        xs.push_back(prof.r[i]);
        ys.push_back(std::log(val * std::pow(prof.r[i], 0.5 * (prof.dim - 1))));
    }
    if (xs.size() < 8) throw Error("decay fit window too short");
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
    }
    const double mx = sx / n;
    const double my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = ys[i] - (intercept + slope * xs[i]);
        ss += e * e;
    }
    DecayFit fit;
    fit.rate = -slope;
    fit.c0 = std::exp(intercept);
    fit.a0 = std::min(kEnvelopeSafety * fit.rate, std::sqrt(v_inf));
    fit.r_min = r_min;
    fit.r_max = r_max;
    fit.residual = std::sqrt(ss / n);
    double c = std::abs(prof.central_value);
    for (std::size_t i = 0; i < prof.r.size(); ++i) {
        c = std::max(c, std::abs(prof.w[i]) * std::exp(fit.a0 * prof.r[i]));
    }
    fit.envelope_c = c;
    return fit;
}

struct DescentOptions {
    double tol = 1e-6;            // stop when the manifold gradient norm drops below
    long max_iter = 100000;
    double lambda_floor = -1e8;   // J below this is reported as divergence
    double armijo = 1e-4;
    int nonmonotone_memory = 10;
};

struct DescentResult {
    GridFunction u;
    double level = 0.0;
    double grad_norm = 0.0;
    long iterations = 0;
    bool converged = false;
};

using DescentObserver = std::function<void(long iteration, const GridFunction& u, double level)>;

// Projected gradient descent on M: step along -G, retract by L^p
// normalization. Barzilai-Borwein step lengths with nonmonotone Armijo
// backtracking.
inline DescentResult descend_on_manifold(const GridFunction& start, const Problem& pr, const DescentOptions& opt = {},
                                         const DescentObserver& observe = {}) {
    const double p = pr.spec.p;
    GridFunction u = lp_normalize(start, p);
    double level = J(u, pr);
    GridFunction g = manifold_gradient(u, pr);
    double gn2 = l2_inner(g, g);
    const double h = pr.grid->spacing();
    double alpha = h * h / (8.0 * pr.grid->dim());
    std::deque<double> recent{level};

    DescentResult res;
    long it = 0;
    for (; it < opt.max_iter; ++it) {
        if (observe) observe(it, u, level);
        if (std::sqrt(gn2) < opt.tol) {
            res.converged = true;
            break;
        }
        const double ref = *std::max_element(recent.begin(), recent.end());
        double step = alpha;
        GridFunction trial;
        double trial_level = 0.0;
        for (int bt = 0;; ++bt) {
            trial = lp_normalize(combine(1.0, u, -step, g), p);
            trial_level = J(trial, pr);
            if (trial_level <= ref - opt.armijo * step * gn2) break;
            step *= 0.5;
            if (bt > 60) {
                // no decrease representable any more: stationary to roundoff
                res.u = u;
                res.level = level;
                res.grad_norm = std::sqrt(gn2);
                res.iterations = it;
                res.converged = std::sqrt(gn2) < 10.0 * opt.tol;
                return res;
            }
        }
        if (trial_level < opt.lambda_floor) {
            throw ConvergenceFailure("descent fell below the level floor (" + std::to_string(trial_level) + ")");
        }
        GridFunction g_new = manifold_gradient(trial, pr);
        const GridFunction s = trial - u;
        const GridFunction y = g_new - g;
        const double sy = l2_inner(s, y);
        const double ss = l2_inner(s, s);
        alpha = sy > 0.0 ? ss / sy : 2.0 * step;
        alpha = std::clamp(alpha, 1e-12, 1e3);
        u = std::move(trial);
        g = std::move(g_new);
        gn2 = l2_inner(g, g);
        level = trial_level;
        recent.push_back(level);
        if (static_cast<int>(recent.size()) > opt.nonmonotone_memory) recent.pop_front();
    }
    res.u = std::move(u);
    res.level = level;
    res.grad_norm = std::sqrt(gn2);
    res.iterations = it;
    return res;
}

inline GridFunction gaussian_seed(const GridPtr& grid, double width = 1.0) {
    GridFunction u(grid);
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (grid->is_boundary(i)) continue;
        const double r = grid->radius(i) / width;
        u[i] = std::exp(-0.5 * r * r);
    }
    return u;
}

struct GroundStateResult {
    GridFunction w;
    double lambda = 0.0;
    double grad_norm = 0.0;
    long iterations = 0;
    bool restarted_from_abs = false;
};

// Constrained minimization of J on M. Seeds from the interpolated shooting
// profile when W is present, from a Gaussian otherwise. A sign change in the
// result triggers one restart from |u|.
inline GroundStateResult minimize_lambda1(const Problem& pr, const DescentOptions& opt = {},
                                          std::optional<GridFunction> seed = std::nullopt) {
    GridFunction start;
    if (seed) {
        start = *seed;
    } else if (pr.spec.w.family == WFamily::zero) {
        start = gaussian_seed(pr.grid, 1.0 / std::sqrt(pr.spec.v_inf));
    } else {
        ShootingOptions so;
        so.start_radius = pr.grid->spacing() / 10.0;
        so.outer_radius = std::max(32.0, pr.grid->half_width() * std::sqrt(double(pr.grid->dim())) + 2.0);
        start = profile_to_grid(shoot_ground(pr.spec.dim, pr.spec.p, pr.spec.v_inf, so), pr.grid);
    }
    auto res = descend_on_manifold(start, pr, opt);
    GroundStateResult out;
    double lowest = *std::min_element(res.u.values().begin(), res.u.values().end());
    if (lowest < -1e-12 * max_abs(res.u)) {
        GridFunction a = res.u;
        for (double& v : a.values()) v = std::abs(v);
        res = descend_on_manifold(a, pr, opt);
        out.restarted_from_abs = true;
    }
    if (!res.converged) {
        throw ConvergenceFailure("lambda_1 descent stopped at gradient norm " + std::to_string(res.grad_norm) +
                                 " after " + std::to_string(res.iterations) + " iterations");
    }
    out.w = std::move(res.u);
    out.lambda = res.level;
    out.grad_norm = res.grad_norm;
    out.iterations = res.iterations;
    return out;
}

}  // namespace sfl
