#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sfl/domain.hpp"
#include "sfl/groundstate.hpp"
#include "sfl/io.hpp"
#include "sfl/kvfile.hpp"
#include "sfl/minimax.hpp"
#include "sfl/pathlab.hpp"
#include "sfl/report.hpp"

namespace sfl {

inline const std::vector<std::string>& experiment_tags() {
    static const std::vector<std::string> tags{"ground", "levels", "sweep-y", "gamma-r", "symmetry", "verify-all"};
    return tags;
}

struct Tolerances {
    double descent_tol = 1e-6;
    int theta_samples = kDefaultThetaSamples;
    int sphere_samples = 0;  // 0: 256 on S^1, 1024 on S^2
    std::vector<double> y_sweep = default_y_sweep();
    std::vector<double> gamma_radii{6.0, 9.0, 12.0};
    std::vector<double> overlap_distances{4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0};
    int refine_nodes = 32;
    int refine_iterations = 10;
    int random_fields = 100;
    int fd_directions = 10;
    int closed_form_trials = 20;
    double agreement_rel = 0.01;
    double decay_rel = 0.02;
    double sandwich_rel = 0.02;
    double sphere_rel = 0.02;
    double monotone_rel = 1e-6;
    double closed_form_abs = 1e-8;
    double bound_slack = 1e-6;
    double fd_ratio_min = 50.0;
    double fd_ratio_max = 200.0;
};

struct ExperimentConfig {
    ProblemSpec problem;
    std::string experiment = "verify-all";
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    Tolerances tol;
};

namespace detail {

inline bool apply_tolerance_key(Tolerances& t, const KeyValue& kv, const std::string& src) {
    auto real = [&](const char* name, double& slot) {
        if (kv.key != name) return false;
        slot = parse_double(kv, src);
        return true;
    };
    auto integer = [&](const char* name, int& slot) {
        if (kv.key != name) return false;
        const long long v = parse_integer(kv, src);
        if (v < 0 || v > 1'000'000) throw ParseError(src, kv.line, kv.column, "'" + kv.key + "' out of range");
        slot = static_cast<int>(v);
        return true;
    };
    auto list = [&](const char* name, std::vector<double>& slot) {
        if (kv.key != name) return false;
        slot = parse_double_list(kv, src);
        return true;
    };
    return real("descent_tol", t.descent_tol) || integer("theta_samples", t.theta_samples) ||
           integer("sphere_samples", t.sphere_samples) || list("y_sweep", t.y_sweep) ||
           list("gamma_radii", t.gamma_radii) || list("overlap_distances", t.overlap_distances) ||
           integer("refine_nodes", t.refine_nodes) || integer("refine_iterations", t.refine_iterations) ||
           integer("random_fields", t.random_fields) || integer("fd_directions", t.fd_directions) ||
           integer("closed_form_trials", t.closed_form_trials) || real("agreement_rel", t.agreement_rel) ||
           real("decay_rel", t.decay_rel) || real("sandwich_rel", t.sandwich_rel) ||
           real("sphere_rel", t.sphere_rel) || real("monotone_rel", t.monotone_rel) ||
           real("closed_form_abs", t.closed_form_abs) || real("bound_slack", t.bound_slack) ||
           real("fd_ratio_min", t.fd_ratio_min) || real("fd_ratio_max", t.fd_ratio_max);
}

}  // namespace detail

inline json to_json(const Tolerances& t) {
    return {{"descent_tol", t.descent_tol},
            {"theta_samples", t.theta_samples},
            {"sphere_samples", t.sphere_samples},
            {"y_sweep", t.y_sweep},
            {"gamma_radii", t.gamma_radii},
            {"overlap_distances", t.overlap_distances},
            {"refine_nodes", t.refine_nodes},
            {"refine_iterations", t.refine_iterations},
            {"random_fields", t.random_fields},
            {"fd_directions", t.fd_directions},
            {"closed_form_trials", t.closed_form_trials},
            {"agreement_rel", t.agreement_rel},
            {"decay_rel", t.decay_rel},
            {"sandwich_rel", t.sandwich_rel},
            {"sphere_rel", t.sphere_rel},
            {"monotone_rel", t.monotone_rel},
            {"closed_form_abs", t.closed_form_abs},
            {"bound_slack", t.bound_slack},
            {"fd_ratio_min", t.fd_ratio_min},
            {"fd_ratio_max", t.fd_ratio_max}};
}

inline json to_json(const ProblemSpec& s) {
    return {{"dim", s.dim},
            {"p", s.p},
            {"v_inf", s.v_inf},
            {"box_l", s.box_l},
            {"spacing_h", s.spacing_h},
            {"w_family", to_string(s.w.family)},
            {"w_c", s.w.c},
            {"w_a", s.w.a},
            {"w_table_path", s.w.table_path},
            {"q", s.q()},
            {"sigma", s.sigma()}};
}

// Everything that affects results; the output directory is left out.
inline json canonical_config(const ExperimentConfig& cfg) {
    return {{"problem", to_json(cfg.problem)},
            {"experiment", cfg.experiment},
            {"seed", cfg.seed},
            {"tolerances", to_json(cfg.tol)}};
}

inline ExperimentConfig config_from_entries(const std::vector<KeyValue>& entries, const std::string& source) {
    ExperimentConfig cfg;
    for (const auto& kv : entries) {
        if (apply_problem_key(cfg.problem, kv, source) || detail::apply_tolerance_key(cfg.tol, kv, source)) continue;
        if (kv.key == "experiment") {
            const auto& tags = experiment_tags();
            if (std::find(tags.begin(), tags.end(), kv.value) == tags.end()) {
                throw ParseError(source, kv.line, kv.column, "unknown experiment '" + kv.value + "'");
            }
            cfg.experiment = kv.value;
        } else if (kv.key == "seed") {
            const long long s = parse_integer(kv, source);
            if (s < 0) throw ParseError(source, kv.line, kv.column, "seed must be nonnegative");
            cfg.seed = static_cast<std::uint64_t>(s);
        } else if (kv.key == "out_dir") {
            cfg.out_dir = kv.value;
        } else {
            throw ParseError(source, kv.line, 1, "unknown key '" + kv.key + "'");
        }
    }
    try {
        cfg.problem.validate();
    } catch (const InvalidSpec& e) {
        throw InvalidSpec(source + ": " + e.what());
    }
    if (cfg.tol.theta_samples < 64) throw InvalidSpec(source + ": theta_samples must be at least 64");
    if (cfg.tol.y_sweep.empty() || cfg.tol.gamma_radii.empty()) throw InvalidSpec(source + ": empty sweep");
    if (cfg.tol.overlap_distances.size() < 2) throw InvalidSpec(source + ": need two overlap distances");
    return cfg;
}

inline ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source = "<config>") {
    return config_from_entries(parse_key_values(text, source), source);
}

// Reads a config file and applies `key=value` overrides on top.
inline ExperimentConfig load_experiment_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
    auto entries = read_key_value_file(path);
    for (std::size_t i = 0; i < overrides.size(); ++i) {
        const auto& o = overrides[i];
        const auto eq = o.find('=');
        const int line = static_cast<int>(i + 1);
        if (eq == std::string::npos) throw ParseError("--override", line, 1, "expected key=value, got '" + o + "'");
        KeyValue kv{std::string(detail::trim(o.substr(0, eq))), std::string(detail::trim(o.substr(eq + 1))), line,
                    static_cast<int>(eq + 2)};
        if (!detail::valid_key(kv.key)) throw ParseError("--override", line, 1, "invalid key in '" + o + "'");
        auto it = std::find_if(entries.begin(), entries.end(), [&](const KeyValue& e) { return e.key == kv.key; });
        if (it != entries.end()) {
            *it = kv;
        } else {
            entries.push_back(kv);
        }
    }
    return config_from_entries(entries, path);
}

// ---------------------------------------------------------------------------
// Cached computations shared by the experiment steps
// ---------------------------------------------------------------------------

struct PathRecord {
    std::string label;
    double path_max = 0.0;
    std::optional<double> balanced_energy;
    double bound = 0.0;  // 2^sigma lambda_1 of the problem the path lives in
};

class Lab {
public:
    explicit Lab(ExperimentConfig c) : cfg(std::move(c)), pr(make_problem(cfg.problem)), pr_inf(autonomous(pr)) {}

    ExperimentConfig cfg;
    Problem pr;
    Problem pr_inf;
    std::vector<PathRecord> paths;
    std::optional<Lambda2Bounds> bounds;
    std::optional<Lambda2Bounds> bounds_inf;
    std::optional<RadialLevels> radial;

    [[nodiscard]] bool perturbed() const { return cfg.problem.w.family != WFamily::zero; }
    [[nodiscard]] double two_sigma() const { return std::pow(2.0, cfg.problem.sigma()); }

    [[nodiscard]] DescentOptions descent() const {
        DescentOptions o;
        o.tol = cfg.tol.descent_tol;
        return o;
    }

    [[nodiscard]] ShootingOptions shooting() const {
        ShootingOptions o;
        o.start_radius = pr.grid->spacing() / 10.0;
        o.outer_radius = std::max(32.0, pr.grid->half_width() * std::sqrt(double(pr.grid->dim())) + 2.0);
        return o;
    }

    const RadialProfile& ground_profile() {
        if (!ground_profile_) {
            const auto& s = cfg.problem;
            ground_profile_ = shoot_ground(s.dim, s.p, s.v_inf, shooting());
        }
        return *ground_profile_;
    }

    const RadialProfile& excited_profile() {
        if (!excited_profile_) {
            const auto& s = cfg.problem;
            excited_profile_ = shoot_excited(s.dim, s.p, s.v_inf, 1, shooting());
        }
        return *excited_profile_;
    }

    const DecayFit& decay() {
        if (!decay_) decay_ = fit_decay(ground_profile(), cfg.problem.v_inf);
        return *decay_;
    }

    const GroundStateResult& ground_inf() {
        if (!ground_inf_) ground_inf_ = minimize_lambda1(pr_inf, descent());
        return *ground_inf_;
    }

    const GroundStateResult& ground() {
        if (!perturbed()) return ground_inf();
        if (!ground_) ground_ = minimize_lambda1(pr, descent());
        return *ground_;
    }

    std::mt19937_64 rng(std::uint64_t stream) const { return std::mt19937_64(cfg.seed * 1000003ULL + stream); }

private:
    std::optional<RadialProfile> ground_profile_;
    std::optional<RadialProfile> excited_profile_;
    std::optional<DecayFit> decay_;
    std::optional<GroundStateResult> ground_inf_;
    std::optional<GroundStateResult> ground_;
};

namespace steps {

inline std::string describe(const LatticeVector& s, int dim) {
    std::string out = "(";
    for (int a = 0; a < dim; ++a) out += (a ? "," : "") + std::to_string(s[a]);
    return out + ")";
}

inline std::string num(double v) {
    std::ostringstream os;
    os.precision(8);
    os << v;
    return os.str();
}

inline void ground(Lab& lab, Report& rep) {
    const auto& prof = lab.ground_profile();
    const auto& fit = lab.decay();
    const auto& gi = lab.ground_inf();
    const auto& g = lab.ground();
    const double sv = std::sqrt(lab.cfg.problem.v_inf);

    rep.level("lambda1_inf_shooting", prof.level, "shoot_ground", "radial shooting, normalized on M");
    rep.level("lambda1_inf", gi.lambda, "minimize_lambda1", "grid descent with W = 0");
    rep.level("lambda1", g.lambda, "minimize_lambda1", "grid descent with the configured W");
    rep.doc["ground"] = {{"central_value", prof.central_value},
                         {"scale", prof.scale},
                         {"match_radius", prof.match_radius},
                         {"grid_iterations", g.iterations},
                         {"grid_gradient_norm", g.grad_norm},
                         {"restarted_from_abs", g.restarted_from_abs},
                         {"autonomous_iterations", gi.iterations},
                         {"autonomous_gradient_norm", gi.grad_norm}};
    rep.doc["decay_fit"] = {{"operation", "fit_decay"},  {"rate", fit.rate},   {"c0", fit.c0},
                            {"a0", fit.a0},               {"envelope_c", fit.envelope_c},
                            {"r_min", fit.r_min},         {"r_max", fit.r_max}, {"residual", fit.residual}};

    const double agree = std::abs(gi.lambda - prof.level) / prof.level;
    rep.check("ground_state_agreement", agree <= lab.cfg.tol.agreement_rel, lab.cfg.tol.agreement_rel - agree,
              "shooting " + num(prof.level) + " vs grid " + num(gi.lambda) + ", relative " + num(agree));
    const double drel = std::abs(fit.rate - sv) / sv;
    rep.check("decay_rate", drel <= lab.cfg.tol.decay_rel, lab.cfg.tol.decay_rel - drel,
              "fitted rate " + num(fit.rate) + " vs sqrt(V_inf) " + num(sv));

    CsvTable profile({"r", "w", "dw"});
    for (std::size_t i = 0; i < prof.r.size(); ++i) profile.row({prof.r[i], prof.w[i], prof.dw[i]});
    rep.csv("profile.csv", profile);
    rep.files["ground_state.csv"] = field_to_csv(g.w);
}

inline CsvTable sweep_table(const Lambda2Bounds& b) {
    CsvTable t({"distance", "shift_x", "path_max", "theta", "balanced_theta", "balanced_energy"});
    for (const auto& e : b.sweep) {
        t.row({e.distance, double(e.shift[0]), e.path_max, e.theta, e.balanced_theta, e.balanced_energy});
    }
    return t;
}

inline void record_sweep(Lab& lab, const Lambda2Bounds& b, double l1, const std::string& tag) {
    for (const auto& e : b.sweep) {
        lab.paths.push_back({tag + " two-bump |y| = " + num(e.distance), e.path_max, e.balanced_energy,
                             lab.two_sigma() * l1});
    }
}

inline void levels(Lab& lab, Report& rep) {
    const auto& tol = lab.cfg.tol;
    const double p = lab.cfg.problem.p;
    const auto& g = lab.ground();
    const auto& gi = lab.ground_inf();
    const double l1 = g.lambda;
    const double l1inf = gi.lambda;
    const double ts = lab.two_sigma();

    lab.bounds = lambda2_bounds(lab.pr, g.w, l1, gi.w, l1inf, tol.y_sweep, tol.theta_samples);
    lab.bounds_inf = lab.perturbed() ? lambda2_bounds(lab.pr_inf, gi.w, l1inf, gi.w, l1inf, tol.y_sweep, tol.theta_samples)
                                     : *lab.bounds;
    const auto& b = *lab.bounds;
    const auto& bi = *lab.bounds_inf;
    record_sweep(lab, b, l1, "W");
    if (lab.perturbed()) record_sweep(lab, bi, l1inf, "W = 0");

    const double sharp = lambda_sharp(l1, l1inf, p);
    const auto& wit = b.sweep[b.witness];
    rep.interval("lambda2", b.lower, b.upper, "lambda2_bounds",
                 "lower by " + b.lower_rule + "; upper by the two-bump path with shift " +
                     describe(wit.shift, lab.cfg.problem.dim));
    rep.interval("lambda2_inf", bi.lower, bi.upper, "lambda2_bounds", "W = 0");
    rep.level("lambda2_inf_target", ts * l1inf, "2^sigma * lambda1_inf");
    rep.level("lambda_sharp", sharp, "lambda_sharp");
    rep.doc["problem"]["w_dual_norm"] = lab.pr.w_dual_norm;
    rep.doc["problem"]["norm_condition"] = b.norm_condition;

    lab.radial = lambda2_radial(lab.pr, lab.excited_profile());
    const auto& rl = *lab.radial;
    rep.level("lambda2r_inf_witness", rl.witness_inf, "lambda2_radial", "J_inf of the one-node radial state on the grid");
    rep.level("lambda2r_inf_shooting", rl.shooting_level, "shoot_excited");
    rep.interval("lambda2r", rl.lower, rl.upper, "lambda2_radial", "lower = witness - |W|_q");

    // ordering invariants
    const double slack = tol.bound_slack;
    std::vector<std::pair<std::string, double>> gaps{
        {"lambda2 lower <= upper", b.upper - b.lower + slack},
        {"lambda2_inf lower <= upper", bi.upper - bi.lower + slack},
        {"lambda1_inf <= lambda_sharp", sharp - l1inf + 1e-12 * l1inf},
        {"lambda_sharp <= 2^sigma lambda1_inf", ts * l1inf - sharp + 1e-12 * l1inf},
        {"lambda2r lower <= upper", rl.upper - rl.lower + slack}};
    const double wmin = *std::min_element(lab.pr.w.values().begin(), lab.pr.w.values().end());
    if (wmin >= 0.0) gaps.emplace_back("lambda1 <= lambda1_inf", l1inf - l1 + slack);
    double margin = gaps.front().second;
    std::string failed;
    for (const auto& [name, gap] : gaps) {
        margin = std::min(margin, gap);
        if (gap < 0.0) failed += (failed.empty() ? "" : "; ") + name;
    }
    rep.check("level_ordering", failed.empty(), margin, failed.empty() ? "all orderings hold" : "violated: " + failed);

    // two-bump sandwich at the farthest separation, problem at infinity
    const auto& far = bi.sweep.back();
    const double lower_shoot = ts * lab.ground_profile().level;
    const double srel = std::abs(far.path_max - lower_shoot) / lower_shoot;
    rep.check("two_bump_sandwich", srel <= tol.sandwich_rel, tol.sandwich_rel - srel,
              "W = 0: path max at |y| = " + num(far.distance) + " is " + num(far.path_max) +
                  ", 2^sigma lambda1_inf (shooting) = " + num(lower_shoot) + ", relative " + num(srel));

    // penalty scenario: W = c exp(-a|x|) with a below the fitted decay rate
    const auto& w = lab.cfg.problem.w;
    if (w.family == WFamily::exponential && w.c > 0.0 && w.a < lab.decay().a0) {
        const double need = 10.0 * tol.descent_tol;
        const double m1 = l1inf - l1;
        const double m2 = sharp - b.upper;
        rep.check("penalty_scenario", m1 > need && m2 > need, std::min(m1, m2) - need,
                  "lambda1_inf - lambda1 = " + num(m1) + ", lambda_sharp - lambda2 upper = " + num(m2) +
                      ", required > " + num(need));
    } else {
        rep.verdict("penalty_scenario", Status::inapplicable, 0.0,
                    "needs an exponential W with a below the fitted a0 = " + num(lab.decay().a0));
    }

    rep.csv("sweep_y.csv", sweep_table(b));
    if (lab.perturbed()) rep.csv("sweep_y_autonomous.csv", sweep_table(bi));
    CsvTable scan({"theta", "J", "I_plus", "I_minus"});
    for (const auto& pt : wit.scan) scan.row({pt.theta, pt.energy, pt.plus_mass, pt.minus_mass});
    rep.csv("path_scan.csv", scan);
}

inline void overlap(Lab& lab, Report& rep) {
    const auto& g = lab.ground();
    const auto& gi = lab.ground_inf();
    const double p = lab.cfg.problem.p;
    const double a0 = lab.decay().a0;
    std::vector<double> d, first, second, err, deficit;
    CsvTable t({"distance", "shift_x", "overlap_first", "overlap_second", "energy_error", "norm_deficit"});
    for (double y : lab.cfg.tol.overlap_distances) {
        const auto shift = to_lattice({y, 0.0, 0.0}, lab.pr.grid->spacing());
        const auto o = overlap_integrals(g.w, gi.w, shift, p);
        const auto dev = interaction_deviation(g.w, g.lambda, gi.w, gi.lambda, shift, lab.pr);
        const double dist = lattice_length(shift, lab.pr.grid->spacing());
        d.push_back(dist);
        first.push_back(o.first);
        second.push_back(o.second);
        err.push_back(dev.energy_error);
        deficit.push_back(dev.norm_deficit);
        t.row({dist, double(shift[0]), o.first, o.second, dev.energy_error, dev.norm_deficit});
    }
    const double s1 = fit_log_slope(d, first);
    const double s2 = fit_log_slope(d, second);
    const double need = -kEnvelopeSafety * a0;
    rep.doc["overlap"] = {{"operation", "overlap_integrals"}, {"slope_first", s1}, {"slope_second", s2},
                          {"required_slope", need}};
    const bool err_positive = std::all_of(err.begin(), err.end(), [](double v) { return v > 0.0; });
    if (err_positive) rep.doc["overlap"]["slope_energy_error"] = fit_log_slope(d, err);
    const bool def_positive = std::all_of(deficit.begin(), deficit.end(), [](double v) { return v > 0.0; });
    if (def_positive) rep.doc["overlap"]["slope_norm_deficit"] = fit_log_slope(d, deficit);
    rep.check("overlap_decay_rates", s1 <= need && s2 <= need, std::min(need - s1, need - s2),
              "slopes " + num(s1) + ", " + num(s2) + " vs required <= " + num(need));
    rep.csv("overlap.csv", t);
}

inline void gamma(Lab& lab, Report& rep) {
    const auto& tol = lab.cfg.tol;
    const auto& gi = lab.ground_inf();
    const int dim = lab.cfg.problem.dim;
    auto radii = tol.gamma_radii;
    std::sort(radii.begin(), radii.end());
    std::vector<double> maxima;
    json runs = json::array();
    bool nodal_two = true;
    for (double R : radii) {
        const auto map = gamma_R(gi.w, R, lab.pr, tol.sphere_samples);
        maxima.push_back(map.max_autonomous_energy());
        lab.paths.push_back({"gamma_R R = " + num(R), map.max_energy(), std::nullopt, lab.two_sigma() * lab.ground().lambda});
        std::vector<std::string> cols;
        for (int a = 0; a < dim; ++a) cols.push_back("y" + std::to_string(a));
        for (int a = 0; a < dim; ++a) cols.push_back("shift" + std::to_string(a));
        for (const char* c : {"J", "J_inf", "nodal_count"}) cols.emplace_back(c);
        CsvTable t(cols);
        json shifts = json::array();
        for (const auto& s : map.samples) {
            std::vector<double> row(s.y.begin(), s.y.end());
            for (int a = 0; a < dim; ++a) row.push_back(s.lattice_shift[a]);
            row.insert(row.end(), {s.energy, s.autonomous_energy, double(s.nodal_count)});
            t.row(row);
        }
        if (R == radii.back()) {
            nodal_two = std::all_of(map.samples.begin(), map.samples.end(), [](const SphereSample& s) { return s.nodal_count == 2; });
        }
        const auto& am = map.samples[map.argmax_autonomous];
        runs.push_back({{"R", R},
                        {"samples", map.samples.size()},
                        {"max_J_inf", map.max_autonomous_energy()},
                        {"max_J", map.max_energy()},
                        {"argmax_shift", std::vector<int>(am.lattice_shift.begin(), am.lattice_shift.begin() + dim)}});
        rep.csv("sphere_R" + num(R) + ".csv", t);
    }
    rep.doc["gamma_R"] = {{"operation", "gamma_R"}, {"runs", runs}};

    const double target = lab.two_sigma() * lab.ground_profile().level;
    const double rel = std::abs(maxima.back() - target) / target;
    double mono = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < maxima.size(); ++k) {
        mono = std::min(mono, (maxima[k] - maxima[k + 1]) / maxima[k] + tol.monotone_rel);
    }
    std::string values;
    for (std::size_t k = 0; k < maxima.size(); ++k) values += (k ? ", " : "") + num(maxima[k]);
    const bool close = rel <= tol.sphere_rel;
    const bool monotone = maxima.size() < 2 || mono >= 0.0;
    rep.check("odd_sphere_map", close && monotone, std::min(tol.sphere_rel - rel, maxima.size() < 2 ? 0.0 : mono),
              "max J_inf over R = " + values + "; relative gap to 2^sigma lambda1_inf (shooting) " + num(rel) +
                  (monotone ? "; nonincreasing in R" : "; increases in R"));
    rep.check("sphere_map_nodal", nodal_two, 0.0,
              nodal_two ? "two nodal domains at every sample of the largest R" : "a sample lacks exactly two nodal domains");
}

// Whether a field is invariant under the reflections of the grid.
inline bool reflection_symmetric(const GridFunction& u, double rel = 1e-12) {
    const Grid& g = u.grid();
    const int n = g.nodes_per_axis();
    const double tol = rel * max_abs(u);
    for (std::size_t i = 0; i < u.size(); ++i) {
        auto idx = g.multi_index(i);
        for (int a = 0; a < g.dim(); ++a) {
            auto m = idx;
            m[a] = n - 1 - m[a];
            if (std::abs(u[g.flat_index(m)] - u[i]) > tol) return false;
        }
    }
    return true;
}

inline void symmetry(Lab& lab, Report& rep) {
    const auto& rl = *lab.radial;
    const auto& b = *lab.bounds;
    const double ts = lab.two_sigma();
    const double shoot_target = ts * lab.ground_profile().level;
    const double m1 = rl.shooting_level - shoot_target;
    const double gap = rl.witness_inf - ts * lab.ground_inf().lambda;
    const bool condition = lab.pr.w_dual_norm < gap;
    std::string detail = "one-node level " + num(rl.shooting_level) + " vs 2^sigma lambda1_inf " + num(shoot_target);
    double margin = m1;
    bool ok = m1 > 0.0;
    if (condition) {
        const double m2 = rl.lower - b.upper;
        margin = std::min(margin, m2);
        ok = ok && m2 > 0.0;
        detail += "; |W|_q = " + num(lab.pr.w_dual_norm) + " < " + num(gap) + ", lambda2 upper " + num(b.upper) +
                  " vs lambda2r lower " + num(rl.lower);
    } else {
        detail += "; |W|_q = " + num(lab.pr.w_dual_norm) + " does not satisfy the norm condition, no certificate";
    }
    rep.check("symmetry_breaking", ok, margin, detail);

    const GridFunction u0 = lp_normalize(profile_to_grid(lab.excited_profile(), lab.pr.grid), lab.cfg.problem.p);
    const auto map = nodal_sphere_map(u0, lab.pr_inf, lab.cfg.tol.sphere_samples);
    bool radial_blocks = map.m == 2;
    for (const auto& blk : map.blocks) radial_blocks = radial_blocks && reflection_symmetric(blk);
    const double j0 = J(u0, lab.pr_inf);
    rep.doc["radial_sphere_map"] = {{"operation", "nodal_sphere_map"},
                                    {"blocks", map.m},
                                    {"J_u0", j0},
                                    {"max_J", map.max_energy()}};
    rep.check("radial_sphere_map", radial_blocks, 0.0,
              "one-node radial state splits into " + std::to_string(map.m) + " reflection-symmetric blocks; max J " +
                  num(map.max_energy()) + " vs J(u0) " + num(j0));
}

// Two blocks with supports separated by zero layers and a piecewise constant
// potential tuned so that their energies hit the requested values.
inline void closed_form(Lab& lab, Report& rep) {
    auto rng = lab.rng(1);
    std::uniform_real_distribution<double> up(2.5, 6.0), pos(0.2, 10.0), neg(-5.0, 0.0);
    double worst = 0.0;
    json trials = json::array();
    for (int t = 0; t < lab.cfg.tol.closed_form_trials; ++t) {
        ProblemSpec s;
        s.dim = 2;
        s.p = up(rng);
        s.box_l = 4.0;
        s.spacing_h = 0.25;
        Problem pc = make_problem(s);
        GridFunction b1(pc.grid), b2(pc.grid);
        for (std::size_t i = 0; i < b1.size(); ++i) {
            if (pc.grid->is_boundary(i)) continue;
            const auto x = pc.grid->position(i);
            const double r1 = std::hypot(x[0] + 2.0, x[1]);
            const double r2 = std::hypot(x[0] - 2.0, x[1]);
            if (r1 < 1.5) b1[i] = std::pow(1.0 - r1 * r1 / 2.25, 2);
            if (r2 < 1.5) b2[i] = std::pow(1.0 - r2 * r2 / 2.25, 2);
        }
        b1 = lp_normalize(b1, s.p);
        b2 = lp_normalize(b2, s.p);
        double t1 = 0.0, t2 = 0.0;
        switch (t % 3) {
            case 0: t1 = pos(rng); t2 = pos(rng); break;
            case 1: t1 = neg(rng); t2 = pos(rng); if (t % 2) std::swap(t1, t2); break;
            default: t1 = neg(rng); t2 = neg(rng); break;
        }
        auto tune = [&](const GridFunction& b, double target) {
            double m2 = 0.0;
            for (double v : b.values()) m2 += v * v;
            m2 *= pc.grid->weight();
            return (target - kinetic_energy(b)) / m2;
        };
        const double v1 = tune(b1, t1);
        const double v2 = tune(b2, t2);
        for (std::size_t i = 0; i < pc.v.size(); ++i) {
            if (pc.grid->is_boundary(i)) continue;
            pc.v[i] = pc.grid->position(i)[0] < 0.0 ? v1 : v2;
            pc.w[i] = s.v_inf - pc.v[i];
        }
        const double j1 = J(b1, pc);
        const double j2 = J(b2, pc);
        const double closed = disjoint_support_max(j1, j2, s.p);
        const double sampled = path_max_J(PathFamily::two_block(b1, b2, s.p), pc, lab.cfg.tol.theta_samples).value;
        const double err = std::abs(closed - sampled);
        worst = std::max(worst, err);
        trials.push_back({{"p", s.p}, {"J1", j1}, {"J2", j2}, {"closed_form", closed}, {"sampled", sampled}});
    }
    rep.doc["closed_form_trials"] = trials;
    const double tol = lab.cfg.tol.closed_form_abs;
    rep.check("disjoint_support_closed_form", worst <= tol, tol - worst,
              std::to_string(lab.cfg.tol.closed_form_trials) + " trials, worst |closed - sampled| = " + num(worst));
}

inline GridFunction random_bumps(const GridPtr& grid, std::mt19937_64& rng, int count, double spread) {
    std::uniform_real_distribution<double> centre(-spread, spread), width(0.5, 3.0), amp(-1.0, 1.0);
    GridFunction u(grid);
    for (int k = 0; k < count; ++k) {
        std::array<double, 3> c{centre(rng), centre(rng), centre(rng)};
        const double wdt = width(rng);
        const double a = amp(rng);
        for (std::size_t i = 0; i < u.size(); ++i) {
            if (grid->is_boundary(i)) continue;
            const auto x = grid->position(i);
            double r2 = 0.0;
            for (int d = 0; d < grid->dim(); ++d) r2 += (x[d] - c[d]) * (x[d] - c[d]);
            u[i] += a * std::exp(-0.5 * r2 / (wdt * wdt));
        }
    }
    return u;
}

inline void deviation(Lab& lab, Report& rep) {
    auto rng = lab.rng(2);
    std::uniform_real_distribution<double> noise(-1.0, 1.0);
    const double p = lab.cfg.problem.p;
    const double bound = lab.pr.w_dual_norm;
    double worst = -std::numeric_limits<double>::infinity();
    double margin = std::numeric_limits<double>::infinity();
    const int count = lab.cfg.tol.random_fields;
    for (int k = 0; k < count; ++k) {
        GridFunction u(lab.pr.grid);
        if (k % 4 == 3) {
            for (std::size_t i = 0; i < u.size(); ++i) {
                if (!lab.pr.grid->is_boundary(i)) u[i] = noise(rng);
            }
        } else {
            u = random_bumps(lab.pr.grid, rng, 1 + k % 5, lab.pr.grid->half_width() / 2.0);
        }
        u = lp_normalize(u, p);
        const auto db = deviation_bound(u, lab.pr);
        worst = std::max(worst, db.deviation);
        margin = std::min(margin, bound + lab.cfg.tol.bound_slack - db.deviation);
    }
    rep.check("potential_deviation_bound", margin >= 0.0, margin,
              std::to_string(count) + " random fields, worst |J - J_inf| = " + num(worst) + " vs |W|_q = " + num(bound));
}

inline void gradient(Lab& lab, Report& rep) {
    auto rng = lab.rng(3);
    const double p = lab.cfg.problem.p;
    const auto& grid = lab.pr.grid;
    const GridFunction u = lp_normalize(lab.ground().w + random_bumps(grid, rng, 2, 3.0) * 0.3, p);
    const GridFunction g = manifold_gradient(u, lab.pr);
    GridFunction dual(grid);
    for (std::size_t i = 0; i < u.size(); ++i) dual[i] = abs_pow(u[i], p - 2.0) * u[i];
    const double du = l2_inner(dual, u);
    auto phi = [&](const GridFunction& v, double t) { return J(lp_normalize(combine(1.0, u, t, v), p), lab.pr); };
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    json ratios = json::array();
    for (int k = 0; k < lab.cfg.tol.fd_directions; ++k) {
        GridFunction v = random_bumps(grid, rng, 1, 3.0);
        v -= u * (l2_inner(dual, v) / du);
        v *= 1.0 / l2_norm(v);
        const double exact = l2_inner(g, v);
        auto err = [&](double t) { return std::abs((phi(v, t) - phi(v, -t)) / (2.0 * t) - exact); };
        const double e1 = err(1e-2);
        const double e2 = err(1e-3);
        const double ratio = e1 / e2;
        ratios.push_back(ratio);
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    rep.doc["gradient_check"] = {{"operation", "manifold_gradient"}, {"ratios", ratios}};
    const auto& tol = lab.cfg.tol;
    rep.check("gradient_check", lo >= tol.fd_ratio_min && hi <= tol.fd_ratio_max,
              std::min(lo - tol.fd_ratio_min, tol.fd_ratio_max - hi),
              "central-difference error ratios in [" + num(lo) + ", " + num(hi) + "]");
}

inline void refine(Lab& lab, Report& rep) {
    const auto& b = *lab.bounds;
    const auto& g = lab.ground();
    const auto& gi = lab.ground_inf();
    RefineOptions opt;
    opt.nodes = lab.cfg.tol.refine_nodes;
    opt.iterations = lab.cfg.tol.refine_iterations;
    opt.theta_samples = lab.cfg.tol.theta_samples;
    const double p = lab.cfg.problem.p;
    const auto path = translated_bump_path(g.w, gi.w, b.sweep[b.witness].shift, p);
    try {
        const auto res = refine_path(path, lab.pr, opt);
        const auto bp = balanced_point(res.path, lab.pr);
        lab.paths.push_back({"refined two-bump witness", res.max_history.back(), J(bp.u0, lab.pr), lab.two_sigma() * g.lambda});
        rep.doc["refine"] = {{"operation", "refine_path"}, {"max_history", res.max_history}};
        rep.check("refine_monotone", true, res.max_history.front() - res.max_history.back(),
                  "path max " + num(res.max_history.front()) + " -> " + num(res.max_history.back()));
        CsvTable t({"iteration", "path_max"});
        for (std::size_t i = 0; i < res.max_history.size(); ++i) t.row({double(i), res.max_history[i]});
        rep.csv("refine.csv", t);
    } catch (const ConvergenceFailure& e) {
        rep.check("refine_monotone", false, -1.0, e.what());
    }
}

inline void diagnostics(Lab& lab, Report& rep) {
    const auto& g = lab.ground();
    const auto& gi = lab.ground_inf();
    const double rate = lab.decay().rate;
    const double p = lab.cfg.problem.p;
    auto to_json_diag = [](const ProfileDiagnostic& d) {
        json bumps = json::array();
        for (const auto& bmp : d.bumps) bumps.push_back({{"center", bmp.center}, {"mass", bmp.mass}, {"peak", bmp.peak}});
        return json{{"count", d.count}, {"bumps", bumps}, {"residual_mass", d.residual_mass}};
    };
    const auto& bi = *lab.bounds_inf;
    const auto far = translated_bump_path(gi.w, gi.w, bi.sweep.back().shift, p);
    const auto bp = balanced_point(far, lab.pr_inf);
    rep.doc["bump_diagnostic"] = {{"operation", "bump_diagnostic"},
                                  {"ground_state", to_json_diag(bump_diagnostic(g.w, lab.pr, rate))},
                                  {"balanced_two_bump", to_json_diag(bump_diagnostic(bp.u0, lab.pr_inf, rate))}};

    const double l1 = g.lambda;
    const double l1inf = gi.lambda;
    const auto& b = *lab.bounds;
    rep.doc["multiplicity_floor"] = {
        {"operation", "multiplicity_floor"},
        {"at_lambda2_upper", multiplicity_floor(b.upper, l1, l1inf, p, false)},
        {"at_lambda2_upper_t1_zero", multiplicity_floor(b.upper, l1, l1inf, p, true)},
        {"at_lambda2r_upper", multiplicity_floor(lab.radial->upper, l1, l1inf, p, false)}};

    const auto v = nodality_check(g.w, g.lambda, l1, lab.pr);
    rep.doc["nodality"] = {{"operation", "nodality_check"}, {"residual", v.residual}, {"hypotheses", v.hypotheses},
                           {"nodal_count", v.nodal_count}};
    rep.check("nodality_consistency", v.consistent, 0.0,
              v.hypotheses ? (v.nodal ? "hypotheses hold and the solution is nodal" : "hypotheses hold but the solution is not nodal")
                           : "hypotheses do not hold for the ground state, no claim");
}

inline void balanced(Lab& lab, Report& rep) {
    if (lab.paths.empty()) return;
    double margin = std::numeric_limits<double>::infinity();
    std::string worst;
    json list = json::array();
    for (const auto& r : lab.paths) {
        double m = r.path_max - (r.bound - lab.cfg.tol.bound_slack);
        if (r.balanced_energy) m = std::min(m, *r.balanced_energy - (r.bound - lab.cfg.tol.bound_slack));
        json e{{"path", r.label}, {"path_max", r.path_max}, {"bound", r.bound}};
        if (r.balanced_energy) e["balanced_energy"] = *r.balanced_energy;
        list.push_back(e);
        if (m < margin) {
            margin = m;
            worst = r.label;
        }
    }
    rep.doc["paths"] = list;
    rep.check("balanced_point_bound", margin >= 0.0, margin,
              std::to_string(lab.paths.size()) + " paths; tightest: " + worst);
}

}  // namespace steps

inline Report build_report(const ExperimentConfig& cfg) {
    Lab lab(cfg);
    Report rep;
    const json canon = canonical_config(cfg);
    rep.doc["experiment"] = cfg.experiment;
    rep.doc["problem"] = to_json(cfg.problem);
    rep.doc["levels"] = json::object();
    rep.doc["provenance"] = {{"config_hash", git_blob_hash(canon.dump())},
                             {"seed", cfg.seed},
                             {"tolerances", to_json(cfg.tol)},
                             {"grid",
                              {{"nodes_per_axis", lab.pr.grid->nodes_per_axis()},
                               {"node_count", lab.pr.grid->size()},
                               {"spacing", lab.pr.grid->spacing()},
                               {"half_width", lab.pr.grid->half_width()}}},
                             {"shooting",
                              {{"start_radius", lab.shooting().start_radius},
                               {"step", lab.shooting().step},
                               {"outer_radius", lab.shooting().outer_radius}}}};

    const std::string& e = cfg.experiment;
    const bool all = e == "verify-all";
    steps::ground(lab, rep);
    if (e == "levels" || e == "sweep-y" || e == "symmetry" || all) steps::levels(lab, rep);
    if (e == "sweep-y" || all) steps::overlap(lab, rep);
    if (e == "gamma-r" || all) steps::gamma(lab, rep);
    if (e == "symmetry" || all) steps::symmetry(lab, rep);
    if (all) {
        steps::closed_form(lab, rep);
        steps::deviation(lab, rep);
        steps::gradient(lab, rep);
        steps::refine(lab, rep);
        steps::diagnostics(lab, rep);
    }
    steps::balanced(lab, rep);
    return rep;
}

struct RunOutcome {
    Report report;
    std::string hash;
    int exit_code = 0;  // 0 all verdicts pass, 2 otherwise
};

inline RunOutcome run(const ExperimentConfig& cfg) {
    RunOutcome out{build_report(cfg), {}, 0};
    out.hash = out.report.write(cfg.out_dir);
    out.exit_code = out.report.all_pass() ? 0 : 2;
    return out;
}

}  // namespace sfl
