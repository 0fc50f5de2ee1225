#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "sfl/minimax.hpp"

using namespace sfl;

namespace {

Problem problem(double l, double h, Perturbation w = {}) {
    ProblemSpec s;
    s.box_l = l;
    s.spacing_h = h;
    s.w = w;
    return make_problem(s);
}

struct Fixture {
    Problem pr = problem(12.0, 0.25);
    GroundStateResult gs = minimize_lambda1(pr);
};

const Fixture& flat() {
    static const Fixture f;
    return f;
}

GridFunction antisymmetrize(const GridFunction& u) {
    const Grid& g = u.grid();
    GridFunction out(u.grid_ptr());
    const int n = g.nodes_per_axis();
    for (std::size_t i = 0; i < u.size(); ++i) {
        auto m = g.multi_index(i);
        m[0] = n - 1 - m[0];
        out[i] = 0.5 * (u[i] - u[g.flat_index(m)]);
    }
    return out;
}

}  // namespace

TEST(LambdaSharp, Formula) {
    EXPECT_NEAR(lambda_sharp(1.0, 1.0, 4.0), std::sqrt(2.0), 1e-15);
    EXPECT_EQ(lambda_sharp(-0.3, 2.0, 4.0), 2.0);
    EXPECT_EQ(lambda_sharp(0.0, 2.0, 4.0), 2.0);
    EXPECT_NEAR(lambda_sharp(1e-9, 2.0, 3.0), 2.0, 1e-12);
    EXPECT_NEAR(lambda_sharp(3.0, 4.0, 4.0), 5.0, 1e-14);
    EXPECT_THROW(lambda_sharp(1.0, 0.0, 4.0), Error);
}

TEST(MultiplicityFloor, BelowTheLimitLevelNothingEscapes) {
    EXPECT_EQ(multiplicity_floor(0.9, -1.0, 1.0, 4.0, false), 1);
    EXPECT_EQ(multiplicity_floor(0.9, 0.5, 1.0, 4.0, true), 1);
    EXPECT_EQ(multiplicity_floor(-3.0, -4.0, 1.0, 4.0, false), 1);
}

TEST(MultiplicityFloor, EqualityCountsAsAttained) {
    const double l1inf = 1.0;
    const double c = std::sqrt(2.0) * l1inf;
    EXPECT_EQ(multiplicity_floor(c, -1.0, l1inf, 4.0, false), 3);
    EXPECT_EQ(multiplicity_floor(c * (1 - 1e-12), -1.0, l1inf, 4.0, false), 2);
    EXPECT_EQ(multiplicity_floor(l1inf, -1.0, l1inf, 4.0, false), 2);
}

TEST(MultiplicityFloor, JustBelowTheSharpLevelWithAMassiveLimit) {
    const double l1 = 0.8, l1inf = 1.0, p = 4.0;
    const double sharp = lambda_sharp(l1, l1inf, p);
    EXPECT_EQ(multiplicity_floor(sharp * (1 - 1e-9), l1, l1inf, p, false), 1);
    EXPECT_EQ(multiplicity_floor(sharp, l1, l1inf, p, false), 2);
}

TEST(MultiplicityFloor, MonotoneInTheLevel) {
    for (bool t1_zero : {false, true}) {
        int last = 1;
        for (double c = 0.0; c < 20.0; c += 0.01) {
            const int m = multiplicity_floor(c, 0.7, 1.3, 3.0, t1_zero);
            EXPECT_GE(m, last);
            last = m;
        }
        EXPECT_GT(last, 10);
    }
}

TEST(Lambda2Bounds, AutonomousSandwich) {
    const auto& f = flat();
    const auto b = lambda2_bounds(f.pr, f.gs.w, f.gs.lambda, f.gs.w, f.gs.lambda, {4.0, 6.0, 8.0}, 128);
    EXPECT_DOUBLE_EQ(b.lower, std::sqrt(2.0) * f.gs.lambda);
    EXPECT_TRUE(b.norm_condition);
    ASSERT_EQ(b.sweep.size(), 3u);
    EXPECT_LE(b.lower, b.upper + 1e-6);
    EXPECT_NEAR(b.upper / b.lower, 1.0, 0.02);
    EXPECT_GT(b.sweep[0].path_max, b.sweep[2].path_max);
    EXPECT_EQ(b.witness, 2u);
    for (const auto& e : b.sweep) EXPECT_TRUE(e.balanced_ok);
}

TEST(Lambda2Bounds, LargePotentialDropsTheNormCondition) {
    auto pr = problem(12.0, 0.25, {WFamily::exponential, 3.0, 0.5});
    const auto& f = flat();
    ASSERT_GE(pr.w_dual_norm, (std::sqrt(2.0) - 1.0) * f.gs.lambda);
    const auto g = minimize_lambda1(pr);
    const auto b = lambda2_bounds(pr, g.w, g.lambda, f.gs.w, f.gs.lambda, {6.0}, 64);
    EXPECT_FALSE(b.norm_condition);
    if (g.lambda > 0.0) {
        EXPECT_DOUBLE_EQ(b.lower, std::sqrt(2.0) * g.lambda);
    }
    EXPECT_LE(b.lower, b.upper);
}

TEST(Lambda2Bounds, PenaltyScenarioBeatsTheSharpLevel) {
    auto pr = problem(12.0, 0.25, {WFamily::exponential, 0.5, 0.5});
    const auto& f = flat();
    const auto g = minimize_lambda1(pr);
    EXPECT_LT(g.lambda, f.gs.lambda - 1e-5);
    const auto b = lambda2_bounds(pr, g.w, g.lambda, f.gs.w, f.gs.lambda, {6.0, 8.0}, 128);
    EXPECT_LT(b.upper, lambda_sharp(g.lambda, f.gs.lambda, 4.0) - 1e-5);
}

TEST(Lambda2Radial, AutonomousPairCoincides) {
    const auto& f = flat();
    const auto excited = shoot_excited(2, 4.0, 1.0, 1);
    const auto r = lambda2_radial(f.pr, excited);
    EXPECT_DOUBLE_EQ(r.witness_inf, r.upper);
    EXPECT_DOUBLE_EQ(r.lower, r.witness_inf);
    EXPECT_GT(r.witness_inf, std::sqrt(2.0) * f.gs.lambda);
    EXPECT_THROW(lambda2_radial(f.pr, shoot_ground(2, 4.0, 1.0)), Error);
}

TEST(Lambda2Radial, SmallPotentialSeparatesTheLevels) {
    auto pr = problem(12.0, 0.25, {WFamily::exponential, 0.5, 0.5});
    const auto& f = flat();
    const auto r = lambda2_radial(pr, shoot_excited(2, 4.0, 1.0, 1));
    const double gap = r.witness_inf - std::sqrt(2.0) * f.gs.lambda;
    ASSERT_LT(pr.w_dual_norm, gap);
    const auto g = minimize_lambda1(pr);
    const auto b = lambda2_bounds(pr, g.w, g.lambda, f.gs.w, f.gs.lambda, {8.0}, 64);
    EXPECT_LT(b.upper, r.lower);
}

TEST(RefinePath, OddnessIsExact) {
    const auto& f = flat();
    const auto path = translated_bump_path(f.gs.w, f.gs.w, {24, 0, 0}, 4.0);
    RefineOptions opt;
    opt.nodes = 16;
    opt.iterations = 2;
    opt.theta_samples = 64;
    const auto res = refine_path(path, f.pr, opt);
    for (std::size_t j : {0u, 5u, 13u}) {
        const auto a = res.path.sample(j, 16);
        const auto b = res.path.sample(j + 16, 16);
        for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(b[i], -a[i]);
    }
    for (double t : {0.2, 1.3, 2.8}) {
        const auto a = res.path.at(t);
        const auto b = res.path.at(t + std::numbers::pi);
        for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(b[i], -a[i], 1e-12);
    }
    for (std::size_t k = 1; k < res.max_history.size(); ++k) {
        EXPECT_LE(res.max_history[k], res.max_history[k - 1] * (1 + 1e-8));
    }
}

TEST(RefinePath, PerturbedPathStrictlyImproves) {
    const auto& f = flat();
    std::mt19937_64 rng(2);
    std::normal_distribution<double> noise(0.0, 0.05);
    GridFunction u2 = translate(f.gs.w, {24, 0, 0});
    for (std::size_t i = 0; i < u2.size(); ++i) {
        if (!f.pr.grid->is_boundary(i)) u2[i] += noise(rng) * max_abs(f.gs.w);
    }
    const auto path = PathFamily::two_block(f.gs.w, u2, 4.0);
    RefineOptions opt;
    opt.nodes = 16;
    opt.iterations = 3;
    opt.theta_samples = 64;
    const auto res = refine_path(path, f.pr, opt);
    EXPECT_LT(res.max_history.back(), res.max_history.front() - 1e-3);
}

TEST(RefinePath, NearOptimalPathBarelyMoves) {
    auto pr = problem(20.0, 0.25);
    const auto gs = minimize_lambda1(pr);
    const auto path = translated_bump_path(gs.w, gs.w, {40, 0, 0}, 4.0);
    RefineOptions opt;
    opt.nodes = 32;
    opt.iterations = 2;
    const auto res = refine_path(path, pr, opt);
    EXPECT_LT(res.max_history.front() - res.max_history.back(), 1e-6);
    EXPECT_GE(res.max_history.back(), std::sqrt(2.0) * gs.lambda - 1e-6);
}

TEST(BumpDiagnostic, SingleGroundState) {
    const auto& f = flat();
    const auto d = bump_diagnostic(f.gs.w, f.pr);
    ASSERT_EQ(d.count, 1);
    EXPECT_NEAR(d.bumps[0].mass, 1.0, 1e-12);
    EXPECT_NEAR(d.bumps[0].center[0], 0.0, 1e-12);
    EXPECT_NEAR(d.residual_mass, 0.0, 1e-12);
}

TEST(BumpDiagnostic, TwoHalfMassBumps) {
    const auto& f = flat();
    for (double sign : {1.0, -1.0}) {
        const auto u = lp_normalize(translate(f.gs.w, {-20, 0, 0}) + translate(f.gs.w, {20, 0, 0}) * sign, 4.0);
        const auto d = bump_diagnostic(u, f.pr);
        ASSERT_EQ(d.count, 2);
        EXPECT_NEAR(d.bumps[0].mass, 0.5, 1e-3);
        EXPECT_NEAR(d.bumps[1].mass, 0.5, 1e-3);
        EXPECT_NEAR(std::abs(d.bumps[0].center[0]), 5.0, 1e-12);
        EXPECT_LE(d.bumps[0].mass + d.bumps[1].mass, 1.0 + 1e-12);
    }
}

TEST(BumpDiagnostic, CloseBumpsMergeAndSmallOnesAreResidual) {
    const auto& f = flat();
    const auto close = lp_normalize(translate(f.gs.w, {-4, 0, 0}) + translate(f.gs.w, {4, 0, 0}), 4.0);
    EXPECT_EQ(bump_diagnostic(close, f.pr).count, 1);
    const auto small = lp_normalize(f.gs.w + translate(f.gs.w, {28, 0, 0}) * 0.3, 4.0);
    const auto d = bump_diagnostic(small, f.pr);
    EXPECT_EQ(d.count, 1);
    EXPECT_GT(d.residual_mass, 0.0);
}

TEST(Nodality, GroundStateMakesNoClaim) {
    const auto& f = flat();
    const auto v = nodality_check(f.gs.w, f.gs.lambda, f.gs.lambda, f.pr);
    EXPECT_FALSE(v.hypotheses);
    EXPECT_FALSE(v.nodal);
    EXPECT_TRUE(v.consistent);
    EXPECT_LT(v.residual, 1e-6);
}

TEST(Nodality, LargeResidualIsRejected) {
    const auto& f = flat();
    EXPECT_THROW(nodality_check(f.gs.w, f.gs.lambda + 1.0, f.gs.lambda, f.pr), Error);
}

TEST(Nodality, ViolationIsReported) {
    const auto& f = flat();
    const auto v = nodality_check(f.gs.w, f.gs.lambda, -1.0, f.pr);
    EXPECT_TRUE(v.hypotheses);
    EXPECT_FALSE(v.consistent);
}

// Deep well: the ground level is negative while the least odd solution sits
// at a positive level.
TEST(Nodality, NodalSolutionInADeepWell) {
    auto pr = problem(8.0, 0.25, {WFamily::compact_bump, 3.0, 2.5});
    const auto g = minimize_lambda1(pr);
    ASSERT_LE(g.lambda, 0.0);
    GridFunction u(pr.grid);
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (pr.grid->is_boundary(i)) continue;
        const auto x = pr.grid->position(i);
        u[i] = x[0] * std::exp(-0.5 * (x[0] * x[0] + x[1] * x[1]));
    }
    DescentOptions opt;
    opt.tol = 1e-7;
    opt.max_iter = 100;
    DescentResult r;
    for (int k = 0; k < 200; ++k) {
        r = descend_on_manifold(u, pr, opt);
        u = antisymmetrize(r.u);
        if (r.converged) break;
    }
    ASSERT_TRUE(r.converged);
    u = lp_normalize(u, 4.0);
    const double lambda = J(u, pr);
    ASSERT_GT(lambda, 0.0);
    const auto v = nodality_check(u, lambda, g.lambda, pr);
    EXPECT_TRUE(v.hypotheses);
    EXPECT_TRUE(v.nodal);
    EXPECT_EQ(v.nodal_count, 2);
    EXPECT_TRUE(v.consistent);
}
