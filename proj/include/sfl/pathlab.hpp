#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "sfl/energy.hpp"
#include "sfl/field.hpp"
#include "sfl/parallel.hpp"

namespace sfl {

// Maximum of J along the normalized trigonometric path through two unit
// blocks with disjoint supports, given J1 = J(u1) and J2 = J(u2):
//   both positive         (J1^q + J2^q)^(1/q),  q = p/(p-2)
//   one positive          the positive one
//   both nonpositive      max(J1, J2)
inline double disjoint_support_max(double j1, double j2, double p) {
    const double q = p / (p - 2.0);
    if (j1 > 0.0 && j2 > 0.0) {
        return std::pow(std::pow(j1, q) + std::pow(j2, q), 1.0 / q);
    }
    return std::max(j1, j2);
}

// Odd loop S^1 -> M. Either the two-block rule
//   gamma(theta) = normalize(u1 cos(theta) + u2 sin(theta)),
// or a sampled string of M nodes at theta_j = j pi / M on [0, pi), joined
// piecewise linearly, normalized, and extended by gamma(theta + pi) = -gamma(theta).
class PathFamily {
public:
    static PathFamily two_block(GridFunction u1, GridFunction u2, double p) {
        u1.check_same(u2);
        const double scale = std::max(max_abs(u1), max_abs(u2));
        if (max_abs(u1 - u2) <= 1e-12 * scale || max_abs(u1 + u2) <= 1e-12 * scale) {
            throw Error("path blocks must satisfy u2 != +-u1");
        }
        PathFamily path;
        path.p_ = p;
        path.u1_ = lp_normalize(u1, p);
        path.u2_ = lp_normalize(u2, p);
        return path;
    }

    static PathFamily sampled(std::vector<GridFunction> nodes, double p) {
        if (nodes.size() < 2) throw Error("a sampled path needs at least two nodes");
        PathFamily path;
        path.p_ = p;
        for (auto& n : nodes) n = lp_normalize(n, p);
        path.nodes_ = std::move(nodes);
        return path;
    }

    [[nodiscard]] bool is_two_block() const { return nodes_.empty(); }
    [[nodiscard]] double p() const { return p_; }
    [[nodiscard]] const GridFunction& u1() const { return u1_; }
    [[nodiscard]] const GridFunction& u2() const { return u2_; }
    [[nodiscard]] const std::vector<GridFunction>& nodes() const { return nodes_; }
    [[nodiscard]] const GridPtr& grid_ptr() const { return is_two_block() ? u1_.grid_ptr() : nodes_.front().grid_ptr(); }

    // Unnormalized point; normalize() of it is gamma(theta) for theta in [0, pi).
    [[nodiscard]] GridFunction raw_half(double t) const {
        if (is_two_block()) return combine(std::cos(t), u1_, std::sin(t), u2_);
        const double m = static_cast<double>(nodes_.size());
        const double pos = t / std::numbers::pi * m;
        auto j = static_cast<std::size_t>(std::floor(pos));
        if (j >= nodes_.size()) j = nodes_.size() - 1;
        const double frac = pos - static_cast<double>(j);
        if (j + 1 < nodes_.size()) return combine(1.0 - frac, nodes_[j], frac, nodes_[j + 1]);
        return combine(1.0 - frac, nodes_[j], -frac, nodes_.front());
    }

    [[nodiscard]] GridFunction at(double theta) const {
        double t = std::fmod(theta, 2.0 * std::numbers::pi);
        if (t < 0.0) t += 2.0 * std::numbers::pi;
        if (t >= std::numbers::pi) return -lp_normalize(raw_half(t - std::numbers::pi), p_);
        return lp_normalize(raw_half(t), p_);
    }

    // Sample j of 2*half_count equally spaced points on [0, 2 pi); sample
    // j + half_count is exactly the negation of sample j.
    [[nodiscard]] GridFunction sample(std::size_t j, std::size_t half_count) const {
        const std::size_t k = j % (2 * half_count);
        if (k >= half_count) return -sample(k - half_count, half_count);
        return lp_normalize(raw_half(std::numbers::pi * static_cast<double>(k) / static_cast<double>(half_count)), p_);
    }

    std::vector<std::string> warnings;

private:
    PathFamily() = default;
    double p_ = 4.0;
    GridFunction u1_, u2_;
    std::vector<GridFunction> nodes_;
};

struct PathPoint {
    double theta = 0.0;
    double energy = 0.0;      // J(gamma(theta))
    double plus_mass = 0.0;   // I(gamma(theta)^+)
    double minus_mass = 0.0;  // I(gamma(theta)^-)
};

struct PathMax {
    double value = 0.0;
    double theta = 0.0;
    std::vector<PathPoint> scan;  // the equally spaced samples on [0, pi)
};

namespace detail {

// J(gamma(t)) and the sign masses along a path, using the bilinear form for two-block paths.
class PathEvaluator {
public:
    PathEvaluator(const PathFamily& path, const Problem& pr) : path_(path), pr_(pr) {
        if (path.is_two_block()) {
            j11_ = J(path.u1(), pr);
            j22_ = J(path.u2(), pr);
            j12_ = energy_bilinear(path.u1(), path.u2(), pr);
        }
    }

    [[nodiscard]] PathPoint operator()(double t) const {
        PathPoint pt;
        pt.theta = t;
        const double p = path_.p();
        if (path_.is_two_block()) {
            const double c = std::cos(t);
            const double s = std::sin(t);
            const auto& a = path_.u1();
            const auto& b = path_.u2();
            double ip = 0.0, im = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                const double v = c * a[i] + s * b[i];
                if (v > 0.0) {
                    ip += abs_pow(v, p);
                } else {
                    im += abs_pow(v, p);
                }
            }
            const double total = ip + im;
            const double w = a.grid().weight();
            pt.energy = (c * c * j11_ + 2.0 * c * s * j12_ + s * s * j22_) / std::pow(total * w, 2.0 / p);
            pt.plus_mass = ip / total;
            pt.minus_mass = im / total;
        } else {
            const GridFunction u = lp_normalize(path_.raw_half(t), p);
            pt.energy = J(u, pr_);
            const auto parts = split_signs(u);
            pt.plus_mass = mass_I(parts.plus, p);
            pt.minus_mass = mass_I(parts.minus, p);
        }
        return pt;
    }

private:
    const PathFamily& path_;
    const Problem& pr_;
    double j11_ = 0.0, j12_ = 0.0, j22_ = 0.0;
};

}  // namespace detail

inline constexpr int kDefaultThetaSamples = 512;

// Max of J over `samples` equally spaced angles in [0, pi) (J is pi-periodic
// along an odd path), refined by golden-section search around the best one.
inline PathMax path_max_J(const PathFamily& path, const Problem& pr, int samples = kDefaultThetaSamples) {
    if (samples < 64) throw Error("path_max_J needs at least 64 samples");
    const detail::PathEvaluator eval(path, pr);
    PathMax out;
    out.scan.resize(static_cast<std::size_t>(samples));
    const double dt = std::numbers::pi / samples;
    parallel_for(out.scan.size(), [&](std::size_t j) { out.scan[j] = eval(dt * static_cast<double>(j)); });
    std::size_t best = 0;
    for (std::size_t j = 1; j < out.scan.size(); ++j) {
        if (out.scan[j].energy > out.scan[best].energy) best = j;
    }
    out.value = out.scan[best].energy;
    out.theta = out.scan[best].theta;

    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = out.theta - dt;
    double b = out.theta + dt;
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = eval(x1).energy;
    double f2 = eval(x2).energy;
    for (int it = 0; it < 100 && b - a > 1e-13; ++it) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = eval(x2).energy;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = eval(x1).energy;
        }
    }
    const double tm = 0.5 * (a + b);
    const double fm = eval(tm).energy;
    if (fm > out.value) {
        out.value = fm;
        out.theta = tm;
    }
    if (out.theta < 0.0) out.theta += std::numbers::pi;
    return out;
}

struct BalancedPoint {
    GridFunction u0;
    double theta = 0.0;
    double plus_mass = 0.0;
    double minus_mass = 0.0;
    int iterations = 0;
};

// Bisection for I(gamma^+) = I(gamma^-) on [0, pi]; f(pi) = -f(0) by oddness.
inline BalancedPoint balanced_point(const PathFamily& path, const Problem& pr, double tol = 1e-12) {
    const detail::PathEvaluator eval(path, pr);
    auto f = [&](double t) {
        const auto pt = eval(t);
        return std::pair{pt.plus_mass - pt.minus_mass, pt};
    };
    BalancedPoint out;
    auto [f0, p0] = f(0.0);
    double lo = 0.0;
    double hi = std::numbers::pi;
    double t = 0.0;
    PathPoint pt = p0;
    if (std::abs(f0) > tol) {
        // f(pi) = -f(0): keep the sign pattern [lo: sign f0, hi: -sign f0]
        for (int it = 0;; ++it) {
            t = 0.5 * (lo + hi);
            auto [fm, pm] = f(t);
            pt = pm;
            out.iterations = it + 1;
            if (std::abs(fm) <= tol) break;
            if ((fm > 0.0) == (f0 > 0.0)) {
                lo = t;
            } else {
                hi = t;
            }
            if (hi - lo < 1e-15 || it > 200) {
                throw ConvergenceFailure("balanced point bisection stalled at |f| = " + std::to_string(std::abs(fm)));
            }
        }
    }
    out.theta = t;
    out.u0 = path.at(t);
    out.plus_mass = pt.plus_mass;
    out.minus_mass = pt.minus_mass;
    return out;
}

// True when no node carries both blocks above `rel` of their maxima.
inline bool numerically_separated(const GridFunction& a, const GridFunction& b, double rel = 1e-10) {
    const double ta = rel * max_abs(a);
    const double tb = rel * max_abs(b);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::abs(a[i]) > ta && std::abs(b[i]) > tb) return false;
    }
    return true;
}

// gamma_{w1, w_inf(. - y)}: the path through the ground state and a far copy
// of the autonomous ground state.
inline PathFamily translated_bump_path(const GridFunction& w1, const GridFunction& winf, const LatticeVector& shift,
                                       double p) {
    auto path = PathFamily::two_block(w1, lp_normalize(translate(winf, shift), p), p);
    if (!numerically_separated(path.u1(), path.u2())) {
        path.warnings.push_back("blocks overlap numerically; the path is still well defined");
    }
    return path;
}

struct OverlapIntegrals {
    double first = 0.0;   // sum h^N w1^(p-1) w_inf(x - y)
    double second = 0.0;  // sum h^N w1 w_inf(x - y)^(p-1)
};

inline OverlapIntegrals overlap_integrals(const GridFunction& w1, const GridFunction& winf, const LatticeVector& shift,
                                          double p) {
    for (const auto* f : {&w1, &winf}) {
        const double lowest = *std::min_element(f->values().begin(), f->values().end());
        if (lowest < -1e-12 * max_abs(*f)) throw Error("overlap integrals need nonnegative fields");
    }
    const GridFunction wy = translate(winf, shift);
    OverlapIntegrals out;
    for (std::size_t i = 0; i < w1.size(); ++i) {
        const double a = std::max(w1[i], 0.0);
        const double b = std::max(wy[i], 0.0);
        out.first += abs_pow(a, p - 1.0) * b;
        out.second += a * abs_pow(b, p - 1.0);
    }
    out.first *= w1.grid().weight();
    out.second *= w1.grid().weight();
    return out;
}

struct InteractionDeviation {
    double energy_error = 0.0;  // max over theta of |J(w1 c + w_y s) - [l1 c^2 + (l1inf - int W w_y^2) s^2]|
    double norm_deficit = 0.0;  // max over theta of ((|c|^p + |s|^p)^(2/p) - |w1 c + w_y s|_p^2)^+
};

// Error terms of the two-bump expansion around a translated copy.
inline InteractionDeviation interaction_deviation(const GridFunction& w1, double l1, const GridFunction& winf,
                                                  double l1inf, const LatticeVector& shift, const Problem& pr,
                                                  int theta_samples = 128) {
    const double p = pr.spec.p;
    const GridFunction wy = translate(winf, shift);
    const double j11 = J(w1, pr);
    const double j22 = J(wy, pr);
    const double j12 = energy_bilinear(w1, wy, pr);
    double ww = 0.0;
    for (std::size_t i = 0; i < wy.size(); ++i) ww += pr.w[i] * wy[i] * wy[i];
    ww *= wy.grid().weight();
    InteractionDeviation out;
    for (int k = 0; k < theta_samples; ++k) {
        const double t = std::numbers::pi * k / theta_samples;
        const double c = std::cos(t);
        const double s = std::sin(t);
        const double exact = c * c * j11 + 2 * c * s * j12 + s * s * j22;
        const double model = l1 * c * c + (l1inf - ww) * s * s;
        out.energy_error = std::max(out.energy_error, std::abs(exact - model));
        const double n2 = std::pow(lp_norm(combine(c, w1, s, wy), p), 2.0);
        const double ref = std::pow(abs_pow(c, p) + abs_pow(s, p), 2.0 / p);
        out.norm_deficit = std::max(out.norm_deficit, ref - n2);
    }
    return out;
}

// Least-squares slope of log(y) against x.
inline double fit_log_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2) throw Error("slope fit needs at least two points");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(ys[i] > 0.0)) throw Error("log-slope fit needs positive values");
        mx += xs[i];
        my += std::log(ys[i]);
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (std::log(ys[i]) - my);
    }
    return sxy / sxx;
}

// ---------------------------------------------------------------------------
// Maps from spheres S^{m-1} into M
// ---------------------------------------------------------------------------

struct SphereSample {
    std::vector<double> y;
    double energy = 0.0;           // J
    double autonomous_energy = 0.0;  // J_inf
    int nodal_count = 0;
    LatticeVector lattice_shift{0, 0, 0};  // rounded R*y, for gamma_R
};

struct SphereMap {
    int m = 0;
    double radius = 0.0;  // R for gamma_R, 0 otherwise
    std::vector<GridFunction> blocks;
    std::vector<SphereSample> samples;
    std::size_t argmax_energy = 0;
    std::size_t argmax_autonomous = 0;

    [[nodiscard]] double max_energy() const { return samples.at(argmax_energy).energy; }
    [[nodiscard]] double max_autonomous_energy() const { return samples.at(argmax_autonomous).autonomous_energy; }

    void finalize() {
        argmax_energy = argmax_autonomous = 0;
        for (std::size_t i = 1; i < samples.size(); ++i) {
            if (samples[i].energy > samples[argmax_energy].energy) argmax_energy = i;
            if (samples[i].autonomous_energy > samples[argmax_autonomous].autonomous_energy) argmax_autonomous = i;
        }
    }
};

// Sample directions on S^{m-1}, closed under y -> -y: entry j + count/2 is
// the negation of entry j. Uniform angles on S^1, a Fibonacci lattice on
// S^2, seeded Gaussian directions above that.
inline std::vector<std::vector<double>> sphere_directions(int m, int count, std::uint64_t seed = 1) {
    if (m < 1) throw Error("sphere dimension must be positive");
    if (count < 2 || count % 2 != 0) throw Error("sphere sample count must be even and >= 2");
    const int half = count / 2;
    std::vector<std::vector<double>> dirs;
    dirs.reserve(count);
    if (m == 1) {
        for (int j = 0; j < half; ++j) dirs.push_back({1.0});
    } else if (m == 2) {
        for (int j = 0; j < half; ++j) {
            const double a = 2.0 * std::numbers::pi * j / count;
            dirs.push_back({std::cos(a), std::sin(a)});
        }
    } else if (m == 3) {
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (int j = 0; j < half; ++j) {
            const double z = 1.0 - (2.0 * j + 1.0) / half;
            const double rr = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double phi = golden * j;
            dirs.push_back({rr * std::cos(phi), rr * std::sin(phi), z});
        }
    } else {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal;
        for (int j = 0; j < half; ++j) {
            std::vector<double> y(m);
            double n2 = 0.0;
            do {
                n2 = 0.0;
                for (double& v : y) {
                    v = normal(rng);
                    n2 += v * v;
                }
            } while (n2 < 1e-12);
            for (double& v : y) v /= std::sqrt(n2);
            dirs.push_back(std::move(y));
        }
    }
    for (int j = 0; j < half; ++j) {
        auto neg = dirs[j];
        for (double& v : neg) v = -v;
        dirs.push_back(std::move(neg));
    }
    return dirs;
}

inline int default_sphere_samples(int m) { return m <= 2 ? 256 : 1024; }

// (w_inf(. + R y) - w_inf(. - R y)) / |...|_p for a lattice displacement R y.
inline GridFunction gamma_R_field(const GridFunction& winf, const LatticeVector& shift, double p) {
    const LatticeVector neg{-shift[0], -shift[1], -shift[2]};
    return lp_normalize(translate(winf, neg) - translate(winf, shift), p);
}

// gamma_R over sampled directions of S^{N-1}, with R y rounded to the lattice.
inline SphereMap gamma_R(const GridFunction& winf, double radius, const Problem& pr, int samples = 0) {
    const Grid& g = winf.grid();
    const int dim = g.dim();
    if (samples == 0) samples = default_sphere_samples(dim);
    const auto dirs = sphere_directions(dim, samples);
    SphereMap map;
    map.m = dim;
    map.radius = radius;
    map.samples.resize(dirs.size());
    const int half_nodes = g.nodes_per_axis() / 2;
    for (std::size_t k = 0; k < dirs.size(); ++k) {
        std::array<double, 3> y{0.0, 0.0, 0.0};
        for (int a = 0; a < dim; ++a) y[a] = radius * dirs[k][a];
        const auto shift = to_lattice(y, g.spacing());
        for (int a = 0; a < dim; ++a) {
            if (std::abs(shift[a]) >= half_nodes) {
                throw Error("R = " + std::to_string(radius) + " is too large for the box");
            }
        }
        map.samples[k].y = dirs[k];
        map.samples[k].lattice_shift = shift;
    }
    parallel_for(map.samples.size(), [&](std::size_t k) {
        auto& s = map.samples[k];
        const GridFunction u = gamma_R_field(winf, s.lattice_shift, pr.spec.p);
        const auto e = energy_J(u, pr);
        s.energy = e.total;
        s.autonomous_energy = e.autonomous;
        s.nodal_count = nodal_domains(u).count;
    });
    map.finalize();
    return map;
}

// normalize(sum_j y_j blocks_j)
inline GridFunction sphere_map_field(const std::vector<GridFunction>& blocks, const std::vector<double>& y, double p) {
    if (blocks.size() != y.size()) throw Error("direction and block counts differ");
    GridFunction u(blocks.front().grid_ptr());
    for (std::size_t j = 0; j < blocks.size(); ++j) u += blocks[j] * y[j];
    return lp_normalize(u, p);
}

inline bool supports_disjoint(const std::vector<GridFunction>& blocks) {
    if (blocks.empty()) return true;
    for (std::size_t i = 0; i < blocks.front().size(); ++i) {
        int nonzero = 0;
        for (const auto& b : blocks) nonzero += b[i] != 0.0 ? 1 : 0;
        if (nonzero > 1) return false;
    }
    return true;
}

// Sphere map built from the nodal domains of u0: blocks normalize(chi_k u0),
// y -> normalize(sum y_k block_k).
inline SphereMap nodal_sphere_map(const GridFunction& u0, const Problem& pr, int samples = 0,
                                  std::optional<double> eps = std::nullopt, std::uint64_t seed = 1) {
    const double p = pr.spec.p;
    if (J(u0, pr) < 0.0) throw Error("nodal sphere map needs J(u0) >= 0");
    const auto lab = nodal_domains(u0, eps);
    if (lab.count < 2) throw Error("nodal sphere map needs at least two nodal domains, found " + std::to_string(lab.count));
    SphereMap map;
    map.m = lab.count;
    for (int k = 1; k <= lab.count; ++k) map.blocks.push_back(lp_normalize(restrict_to_domain(u0, lab, k), p));

    const std::size_t m = map.blocks.size();
    std::vector<double> gram(m * m);
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a; b < m; ++b) {
            gram[a * m + b] = gram[b * m + a] = energy_bilinear(map.blocks[a], map.blocks[b], pr);
        }
    }
    if (samples == 0) samples = default_sphere_samples(map.m);
    const auto dirs = sphere_directions(map.m, samples, seed);
    map.samples.resize(dirs.size());
    for (std::size_t k = 0; k < dirs.size(); ++k) {
        const auto& y = dirs[k];
        double num = 0.0;
        double mass = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            mass += abs_pow(y[a], p);
            for (std::size_t b = 0; b < m; ++b) num += y[a] * y[b] * gram[a * m + b];
        }
        auto& s = map.samples[k];
        s.y = y;
        s.energy = num / std::pow(mass, 2.0 / p);
        s.autonomous_energy = s.energy;  // overwritten below when W != 0
        s.nodal_count = static_cast<int>(std::count_if(y.begin(), y.end(), [](double v) { return v != 0.0; }));
    }
    if (pr.spec.w.family != WFamily::zero) {
        parallel_for(map.samples.size(), [&](std::size_t k) {
            map.samples[k].autonomous_energy = J_inf(sphere_map_field(map.blocks, map.samples[k].y, p), pr);
        });
    }
    map.finalize();
    return map;
}

}  // namespace sfl
