#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "sfl/energy.hpp"

using namespace sfl;

namespace {

Problem problem(double l, double h, Perturbation w = {}, int dim = 2) {
    ProblemSpec s;
    s.dim = dim;
    s.box_l = l;
    s.spacing_h = h;
    s.w = w;
    return make_problem(s);
}

GridFunction gaussian(const GridPtr& g, double cx = 0.0) {
    GridFunction u(g);
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (g->is_boundary(i)) continue;
        auto x = g->position(i);
        x[0] -= cx;
        double r2 = 0.0;
        for (int a = 0; a < g->dim(); ++a) r2 += x[a] * x[a];
        u[i] = std::exp(-0.5 * r2);
    }
    return u;
}

GridFunction random_smooth(const GridPtr& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> c(-3.0, 3.0), w(0.6, 2.0), a(-1.0, 1.0);
    GridFunction u(g);
    for (int k = 0; k < 3; ++k) {
        const double cx = c(rng), cy = c(rng), wd = w(rng), amp = a(rng);
        for (std::size_t i = 0; i < u.size(); ++i) {
            if (g->is_boundary(i)) continue;
            const auto x = g->position(i);
            u[i] += amp * std::exp(-0.5 * ((x[0] - cx) * (x[0] - cx) + (x[1] - cy) * (x[1] - cy)) / (wd * wd));
        }
    }
    return u;
}

}  // namespace

TEST(Energy, MassOfSingleNode) {
    auto pr = problem(2.0, 0.5);
    GridFunction u(pr.grid);
    u[pr.grid->center_index()] = 2.0;
    EXPECT_DOUBLE_EQ(mass_I(u, 4.0), 0.25 * 16.0);
    EXPECT_DOUBLE_EQ(mass_I(GridFunction(pr.grid), 4.0), 0.0);
}

// For u = exp(-|x|^2/2) in the plane: int u^2 = pi and int |grad u|^2 = pi.
TEST(Energy, GaussianOracleAndSecondOrderConvergence) {
    double previous_error = 0.0;
    for (double h : {0.25, 0.125}) {
        auto pr = problem(12.0, h);
        const auto e = energy_J(gaussian(pr.grid), pr);
        EXPECT_NEAR(e.mass2, std::numbers::pi, 1e-9);
        const double err = std::abs(e.kinetic - std::numbers::pi);
        EXPECT_LT(err, h * h);
        EXPECT_NEAR(e.total, 2.0 * std::numbers::pi, h * h);
        if (previous_error > 0.0) {
            EXPECT_NEAR(previous_error / err, 4.0, 0.2);
        }
        previous_error = err;
    }
}

TEST(Energy, AutonomousSplitMatchesPotential) {
    auto pr = problem(8.0, 0.25, {WFamily::exponential, 0.5, 0.5});
    const auto u = gaussian(pr.grid, 1.0);
    const auto e = energy_J(u, pr);
    double ww = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) ww += pr.w[i] * u[i] * u[i];
    ww *= pr.grid->weight();
    EXPECT_NEAR(e.deviation, -ww, 1e-12);
    EXPECT_NEAR(e.autonomous, e.kinetic + e.mass2, 1e-12);
    EXPECT_NEAR(J_inf(u, pr), e.autonomous, 1e-15);
}

TEST(Energy, BilinearFormIsSymmetricAndConsistent) {
    auto pr = problem(6.0, 0.25, {WFamily::exponential, 0.7, 1.0});
    std::mt19937_64 rng(5);
    const auto u = random_smooth(pr.grid, rng);
    const auto v = random_smooth(pr.grid, rng);
    EXPECT_NEAR(energy_bilinear(u, v, pr), energy_bilinear(v, u, pr), 1e-12);
    EXPECT_NEAR(energy_bilinear(u, u, pr), J(u, pr), 1e-12);
    EXPECT_NEAR(J(u + v, pr), J(u, pr) + 2 * energy_bilinear(u, v, pr) + J(v, pr), 1e-10);
}

TEST(Energy, LaplacianIsAdjointOfTheKineticForm) {
    auto pr = problem(6.0, 0.25);
    std::mt19937_64 rng(9);
    const auto u = random_smooth(pr.grid, rng);
    const auto v = random_smooth(pr.grid, rng);
    const double kin = energy_bilinear(u, v, pr) - pr.spec.v_inf * l2_inner(u, v);
    EXPECT_NEAR(l2_inner(neg_laplacian(u), v), kin, 1e-10);
}

TEST(Energy, ManifoldGuard) {
    auto pr = problem(4.0, 0.25);
    const auto u = gaussian(pr.grid);
    EXPECT_THROW(manifold_gradient(u * 3.0, pr), NotOnManifold);
    EXPECT_NO_THROW(manifold_gradient(lp_normalize(u, 4.0), pr));
}

TEST(Energy, GradientIsOrthogonalToTheField) {
    auto pr = problem(6.0, 0.25, {WFamily::exponential, 0.5, 0.5});
    std::mt19937_64 rng(3);
    const auto u = lp_normalize(random_smooth(pr.grid, rng), 4.0);
    EXPECT_NEAR(l2_inner(manifold_gradient(u, pr), u), 0.0, 1e-10);
}

TEST(Energy, GradientMatchesCentralDifferences) {
    auto pr = problem(6.0, 0.25, {WFamily::exponential, 0.5, 0.5});
    std::mt19937_64 rng(11);
    const double p = 4.0;
    const auto u = lp_normalize(random_smooth(pr.grid, rng), p);
    const auto g = manifold_gradient(u, pr);
    for (int k = 0; k < 5; ++k) {
        const auto v = random_smooth(pr.grid, rng);
        auto fd = [&](double t) {
            return (J(lp_normalize(u + v * t, p), pr) - J(lp_normalize(u - v * t, p), pr)) / (2 * t);
        };
        const double exact = l2_inner(g, v);
        const double e1 = std::abs(fd(1e-2) - exact);
        const double e2 = std::abs(fd(1e-3) - exact);
        EXPECT_GT(e1 / e2, 50.0);
        EXPECT_LT(e1 / e2, 200.0);
    }
}

TEST(Energy, ResidualVanishesForLinearEigenpairOnTheLattice) {
    // product of sines is an exact eigenvector of the discrete Laplacian
    auto pr = problem(2.0, 0.25);
    const auto& g = *pr.grid;
    GridFunction u(pr.grid);
    const double k = std::numbers::pi / 4.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const auto x = g.position(i);
        u[i] = std::sin(k * (x[0] + 2.0)) * std::sin(k * (x[1] + 2.0));
    }
    u.zero_boundary();
    const double mu = 2.0 * (2.0 - 2.0 * std::cos(k * 0.25)) / (0.25 * 0.25);
    const auto lap = neg_laplacian(u);
    for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(lap[i], mu * u[i], 1e-11);
}

TEST(Energy, DeviationBoundOnRandomFields) {
    auto pr = problem(8.0, 0.25, {WFamily::exponential, 0.8, 0.4});
    std::mt19937_64 rng(17);
    for (int k = 0; k < 20; ++k) {
        const auto u = lp_normalize(random_smooth(pr.grid, rng), 4.0);
        const auto d = deviation_bound(u, pr);
        EXPECT_LE(d.deviation, d.bound + 1e-12);
    }
    auto flat = problem(4.0, 0.25);
    const auto u = lp_normalize(gaussian(flat.grid), 4.0);
    EXPECT_EQ(deviation_bound(u, flat).deviation, 0.0);
    EXPECT_EQ(deviation_bound(u, flat).bound, 0.0);
}

TEST(Energy, SublevelSetsAreBounded) {
    auto pr = problem(8.0, 0.25, {WFamily::exponential, 1.5, 0.5});
    std::mt19937_64 rng(23);
    for (int k = 0; k < 10; ++k) {
        const auto u = lp_normalize(random_smooth(pr.grid, rng), 4.0);
        const double alpha = J(u, pr);
        EXPECT_LE(h1_norm_squared(u, pr), sublevel_norm_bound(alpha, pr) + 1e-12);
    }
}

TEST(Energy, LagrangeMultiplier) {
    auto pr = problem(4.0, 0.25);
    const auto u = lp_normalize(gaussian(pr.grid), 4.0);
    EXPECT_NEAR(lagrange_multiplier(u, pr), J(u, pr) / 2.0, 1e-14);
}
