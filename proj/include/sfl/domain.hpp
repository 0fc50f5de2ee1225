#pragma once

#include <cmath>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "sfl/error.hpp"
#include "sfl/grid.hpp"
#include "sfl/io.hpp"
#include "sfl/kvfile.hpp"

namespace sfl {

enum class WFamily { zero, exponential, compact_bump, tabulated };

inline const char* to_string(WFamily f) {
    switch (f) {
        case WFamily::zero: return "zero";
        case WFamily::exponential: return "exponential";
        case WFamily::compact_bump: return "compact_bump";
        case WFamily::tabulated: return "tabulated";
    }
    return "?";
}

inline WFamily parse_w_family(const std::string& s) {
    if (s == "zero") return WFamily::zero;
    if (s == "exponential") return WFamily::exponential;
    if (s == "compact_bump") return WFamily::compact_bump;
    if (s == "tabulated") return WFamily::tabulated;
    throw InvalidSpec("unknown perturbation family '" + s + "'");
}

// The perturbation W in V = V_inf - W.
//   zero:          W = 0
//   exponential:   W = c exp(-a|x|)
//   compact_bump:  W = c (1 - |x|^2/a^2)^2 for |x| < a, else 0
//   tabulated:     nodal values, from `table` if set, else read from `table_path`
struct Perturbation {
    WFamily family = WFamily::zero;
    double c = 0.0;
    double a = 1.0;
    std::string table_path;
    std::shared_ptr<const std::vector<double>> table;

    [[nodiscard]] bool is_radial() const { return family != WFamily::tabulated; }
};

struct ProblemSpec {
    int dim = 2;
    double p = 4.0;
    double v_inf = 1.0;
    Perturbation w;
    double box_l = 16.0;
    double spacing_h = 0.125;

    // Dual exponent p/(p-2) of the Hoelder pairing with u^2.
    [[nodiscard]] double q() const { return p / (p - 2.0); }
    // (p-2)/p; note sigma() * q() == 1.
    [[nodiscard]] double sigma() const { return (p - 2.0) / p; }

    [[nodiscard]] int half_nodes() const { return static_cast<int>(std::lround(box_l / spacing_h)); }

    void validate() const {
        if (dim < 2) throw InvalidSpec("dimension must be at least 2, got " + std::to_string(dim));
        if (dim > 3) throw InvalidSpec("only dimensions 2 and 3 are supported, got " + std::to_string(dim));
        if (!(p > 2.0)) throw InvalidSpec("exponent p must exceed 2");
        if (dim >= 3 && !(p < 2.0 * dim / (dim - 2.0))) {
            throw InvalidSpec("exponent p must be below the critical Sobolev exponent 2N/(N-2)");
        }
        if (!(v_inf > 0.0)) throw InvalidSpec("v_inf must be positive");
        if (!(spacing_h > 0.0) || !(box_l > 0.0)) throw InvalidSpec("box_l and spacing_h must be positive");
        const double ratio = box_l / spacing_h;
        if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio) || std::round(ratio) < 1.0) {
            throw InvalidSpec("box_l / spacing_h must be a positive integer");
        }
        if (w.family == WFamily::exponential && !(w.a > 0.0)) throw InvalidSpec("exponential W needs a > 0");
        if (w.family == WFamily::compact_bump && !(w.a > 0.0)) throw InvalidSpec("compact bump W needs a > 0");
        if (w.family == WFamily::tabulated && !w.table && w.table_path.empty()) {
            throw InvalidSpec("tabulated W needs w_table_path");
        }
    }
};

inline constexpr std::size_t kDefaultMaxNodes = std::size_t{1} << 25;

inline GridPtr build_grid(const ProblemSpec& spec, std::size_t max_nodes = kDefaultMaxNodes) {
    spec.validate();
    const int n = 2 * spec.half_nodes() + 1;
    double count = 1.0;
    for (int a = 0; a < spec.dim; ++a) count *= n;
    if (count > static_cast<double>(max_nodes)) {
        throw InvalidSpec("grid of " + std::to_string(static_cast<long long>(count)) +
                          " nodes exceeds the cap of " + std::to_string(max_nodes));
    }
    return std::make_shared<const Grid>(spec.dim, spec.box_l, spec.spacing_h, n);
}

namespace detail {

inline std::vector<double> load_w_table(const std::string& path, std::size_t expected) {
    if (path.size() > 5 && path.compare(path.size() - 5, 5, ".sflg") == 0) {
        auto f = read_field(path);
        if (f.size() != expected) throw InvalidSpec("tabulated W grid does not match the problem grid");
        return {f.values().begin(), f.values().end()};
    }
    std::ifstream in(path);
    if (!in) throw InvalidSpec("cannot open W table '" + path + "'");
    std::vector<double> v;
    v.reserve(expected);
    double x = 0.0;
    while (in >> x) v.push_back(x);
    if (!in.eof()) throw InvalidSpec("W table '" + path + "' contains a non-numeric token");
    if (v.size() != expected) {
        throw InvalidSpec("W table has " + std::to_string(v.size()) + " values, grid has " + std::to_string(expected));
    }
    return v;
}

}  // namespace detail

// Nodal values of W; boundary nodes are set to zero like every field.
inline GridFunction eval_W(const ProblemSpec& spec, const GridPtr& grid) {
    GridFunction w(grid);
    const Grid& g = *grid;
    switch (spec.w.family) {
        case WFamily::zero:
            break;
        case WFamily::exponential:
            for (std::size_t i = 0; i < g.size(); ++i) w[i] = spec.w.c * std::exp(-spec.w.a * g.radius(i));
            break;
        case WFamily::compact_bump:
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double s = g.radius(i) / spec.w.a;
                if (s < 1.0) w[i] = spec.w.c * (1.0 - s * s) * (1.0 - s * s);
            }
            break;
        case WFamily::tabulated: {
            const auto values = spec.w.table ? *spec.w.table : detail::load_w_table(spec.w.table_path, g.size());
            if (values.size() != g.size()) throw InvalidSpec("tabulated W does not match the grid size");
            for (std::size_t i = 0; i < g.size(); ++i) w[i] = values[i];
            break;
        }
    }
    w.zero_boundary();
    return w;
}

// (sum h^N |W|^q)^(1/q) with q = p/(p-2).
inline double dual_norm(const GridFunction& w, double p) {
    const double q = p / (p - 2.0);
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += abs_pow(w[i], q);
    const double r = std::pow(s * w.grid().weight(), 1.0 / q);
    if (!std::isfinite(r)) throw Error("overflow evaluating the dual norm of W");
    return r;
}

inline double dual_norm_W(const ProblemSpec& spec, const GridPtr& grid) { return dual_norm(eval_W(spec, grid), spec.p); }

// A spec together with its grid and the sampled potential. Immutable.
struct Problem {
    ProblemSpec spec;
    GridPtr grid;
    GridFunction w;
    GridFunction v;  // V_inf - W
    double w_dual_norm = 0.0;

    [[nodiscard]] double p() const { return spec.p; }
    [[nodiscard]] double v_inf() const { return spec.v_inf; }
};

inline Problem make_problem(const ProblemSpec& spec, std::size_t max_nodes = kDefaultMaxNodes) {
    Problem pr;
    pr.spec = spec;
    pr.grid = build_grid(spec, max_nodes);
    pr.w = eval_W(spec, pr.grid);
    pr.v = GridFunction(pr.grid);
    for (std::size_t i = 0; i < pr.v.size(); ++i) pr.v[i] = spec.v_inf - pr.w[i];
    pr.v.zero_boundary();
    pr.w_dual_norm = dual_norm(pr.w, spec.p);
    return pr;
}

// Same problem with W switched off (the autonomous problem at infinity).
inline Problem autonomous(const Problem& pr) {
    Problem out = pr;
    out.spec.w = Perturbation{};
    out.w = GridFunction(pr.grid);
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = pr.grid->is_boundary(i) ? 0.0 : pr.spec.v_inf;
    out.w_dual_norm = 0.0;
    return out;
}

inline const std::vector<std::string>& problem_keys() {
    static const std::vector<std::string> keys{"dim",       "p",        "v_inf", "box_l",       "spacing_h",
                                               "w_family",  "w_c",      "w_a",   "w_table_path"};
    return keys;
}

// Applies one problem key; returns false if the key is not a problem key.
inline bool apply_problem_key(ProblemSpec& spec, const KeyValue& kv, const std::string& source) {
    if (kv.key == "dim") {
        spec.dim = static_cast<int>(parse_integer(kv, source));
    } else if (kv.key == "p") {
        spec.p = parse_double(kv, source);
    } else if (kv.key == "v_inf") {
        spec.v_inf = parse_double(kv, source);
    } else if (kv.key == "box_l") {
        spec.box_l = parse_double(kv, source);
    } else if (kv.key == "spacing_h") {
        spec.spacing_h = parse_double(kv, source);
    } else if (kv.key == "w_family") {
        try {
            spec.w.family = parse_w_family(kv.value);
        } catch (const InvalidSpec& e) {
            throw ParseError(source, kv.line, kv.column, e.what());
        }
    } else if (kv.key == "w_c") {
        spec.w.c = parse_double(kv, source);
    } else if (kv.key == "w_a") {
        spec.w.a = parse_double(kv, source);
    } else if (kv.key == "w_table_path") {
        spec.w.table_path = kv.value;
    } else {
        return false;
    }
    return true;
}

// Parses a problem specification; unknown keys are rejected.
inline ProblemSpec parse_problem_spec(const std::string& text, const std::string& source = "<spec>") {
    ProblemSpec spec;
    for (const auto& kv : parse_key_values(text, source)) {
        if (!apply_problem_key(spec, kv, source)) {
            throw ParseError(source, kv.line, 1, "unknown key '" + kv.key + "'");
        }
    }
    spec.validate();
    return spec;
}

}  // namespace sfl
