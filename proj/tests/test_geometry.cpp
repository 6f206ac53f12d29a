#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sqg/geometry.hpp>

#include <cmath>

using namespace sqg;

// ============================================================================
// helpers
// ============================================================================

static const GammaField& quad_gamma() {
    static GammaField g =
        solve_gamma(BoundaryGraph::quadratic(0.1, 0.5, 0.1), Grid2D::box(-0.6, 0.6, -0.12, 0.24, 240, 72));
    return g;
}

static const GammaField& flat_gamma() {
    static GammaField g =
        solve_gamma(BoundaryGraph::flat(0.1, 0.5, 0.1), Grid2D::box(-0.6, 0.6, -0.12, 0.24, 240, 72));
    return g;
}

// ============================================================================
// smooth step
// ============================================================================

TEST_CASE("smooth01 is a monotone C1 step from 0 to 1") {
    CHECK(smooth01(-0.3) == 0.0);
    CHECK(smooth01(0.0) == 0.0);
    CHECK(smooth01(1.0) == 1.0);
    CHECK(smooth01(1.7) == 1.0);
    CHECK(smooth01(0.5) == doctest::Approx(0.5).epsilon(1e-12));  // odd symmetry about 1/2
    double prev = 0.0;
    for (int i = 1; i <= 50; ++i) {
        double v = smooth01(i / 50.0);
        CHECK(v >= prev);
        prev = v;
    }
    for (double r : {0.2, 0.45, 0.8}) {
        double d = 1e-6;
        double fd = (smooth01(r + d) - smooth01(r - d)) / (2 * d);
        CHECK(smooth01_deriv(r) == doctest::Approx(fd).epsilon(1e-6));
    }
    CHECK(smooth01_deriv(0.0) == 0.0);
    CHECK(smooth01_deriv(1.0) == 0.0);
}

// ============================================================================
// boundary graph
// ============================================================================

TEST_CASE("quadratic graph: slope bound, compact support, consistent derivatives") {
    BoundaryGraph g = BoundaryGraph::quadratic(0.1, 0.5, 0.1);
    CHECK(g.phi(0.0) == 0.0);
    CHECK(g.phi_p(0.0) == 0.0);
    CHECK(g.phi_pp(0.0) == doctest::Approx(1.0).epsilon(1e-12));  // C0 = 1
    CHECK(g.max_slope() <= 0.1 + 1e-12);
    // slope dies at the support edge and stays dead beyond it
    CHECK(g.phi_p(0.5) == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(g.phi_p(0.8) == 0.0);
    // quadratic window: phi = x^2/2 exactly
    double a1 = g.quad_window();
    CHECK(a1 > 0.0);
    CHECK(g.phi(0.5 * a1) == doctest::Approx(0.125 * a1 * a1).epsilon(1e-12));
    for (double x : {0.04, 0.21, 0.37, 0.49}) {
        double d = 1e-6;
        CHECK(g.phi_p(x) == doctest::Approx((g.phi(x + d) - g.phi(x - d)) / (2 * d)).epsilon(1e-7));
        CHECK(g.phi_pp(x) ==
              doctest::Approx((g.phi_p(x + d) - g.phi_p(x - d)) / (2 * d)).epsilon(1e-5));
    }
    // vertical cutoff: 1 at the boundary, 0 above H
    CHECK(g.chi(0.0) == 1.0);
    CHECK(g.chi(0.2) == 0.0);
}

TEST_CASE("graph parameters must leave room for the vertical cutoff") {
    CHECK_THROWS_AS(BoundaryGraph::quadratic(0.3, 0.5, 0.1), config_error);
}

TEST_CASE("flat graph has no profile at all") {
    BoundaryGraph g = BoundaryGraph::flat(0.1, 0.5, 0.1);
    CHECK(g.is_flat());
    for (double x : {-0.4, 0.0, 0.3}) {
        CHECK(g.phi(x) == 0.0);
        CHECK(g.phi_p(x) == 0.0);
        CHECK(g.phi_pp(x) == 0.0);
    }
}

// ============================================================================
// gamma field
// ============================================================================

TEST_CASE("gamma equals 1 on the boundary graph and solves its PDE") {
    BoundaryGraph g = BoundaryGraph::quadratic(0.1, 0.5, 0.1);
    const GammaField& gam = quad_gamma();
    for (double x1 : {-0.5, -0.2, 0.0, 0.3, 0.55}) {
        CHECK(gam.evaluate(x1, g.phi(x1)) == doctest::Approx(1.0).epsilon(1e-10));
    }
    // the residual is pure centered-difference error of the exact gamma,
    // so it must shrink roughly quadratically under grid refinement
    GammaField coarse = solve_gamma(g, Grid2D::box(-0.6, 0.6, -0.12, 0.24, 120, 36));
    CHECK(gam.pde_residual() < 0.05);
    CHECK(coarse.pde_residual() / gam.pde_residual() > 2.0);
}

TEST_CASE("flat graph gives gamma identically 1") {
    const GammaField& gam = flat_gamma();
    // on and above the boundary line; below it the characteristics never
    // meet the graph and the extension is unconstrained
    int j0 = (int)std::lround(-gam.grid.y0 / gam.grid.hy);
    CHECK((gam.val.rightCols(gam.grid.ny - j0) - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("grid samples agree with exact characteristic evaluation") {
    BoundaryGraph g = BoundaryGraph::quadratic(0.1, 0.5, 0.1);
    const GammaField& gam = quad_gamma();
    for (int j = 5; j < gam.grid.ny; j += 23)
        for (int i = 3; i < gam.grid.nx; i += 41)
            CHECK(gam.val(i, j) ==
                  doctest::Approx(gam.evaluate(gam.grid.x(i), gam.grid.y(j))).epsilon(1e-12));
}

// ============================================================================
// flattening diffeomorphism
// ============================================================================

TEST_CASE("Y maps the boundary graph onto the flat axis") {
    BoundaryGraph g = BoundaryGraph::quadratic(0.1, 0.5, 0.1);
    DiffeoMap map = build_diffeo(g, quad_gamma());
    for (double x1 : {-0.45, -0.1, 0.0, 0.25, 0.5}) {
        Vec2 y = map.Y({x1, g.phi(x1)});
        CHECK(std::abs(y[1]) < 1e-12);
    }
}

TEST_CASE("X inverts Y to Newton tolerance") {
    BoundaryGraph g = BoundaryGraph::quadratic(0.1, 0.5, 0.1);
    DiffeoMap map = build_diffeo(g, quad_gamma());
    for (double x1 : {-0.4, -0.05, 0.17, 0.42})
        for (double x2 : {0.01, 0.08, 0.18}) {
            Vec2 x{x1, x2};
            Vec2 back = map.X(map.Y(x));
            CHECK((back - x).norm() < 1e-9);
        }
}

TEST_CASE("analytic Jacobian matches finite differences") {
    BoundaryGraph g = BoundaryGraph::quadratic(0.1, 0.5, 0.1);
    DiffeoMap map = build_diffeo(g, quad_gamma());
    for (double x1 : {-0.3, 0.1, 0.33})
        for (double x2 : {0.03, 0.15}) {
            Mat2 a = map.grad_Y({x1, x2});
            Mat2 fd = map.grad_Y_fd({x1, x2});
            CHECK((a - fd).cwiseAbs().maxCoeff() < 1e-5);
            CHECK(map.det_Y({x1, x2}) == doctest::Approx(a.determinant()).epsilon(1e-10));
        }
}

TEST_CASE("diffeo stays close to the identity with positive Jacobian") {
    BoundaryGraph g = BoundaryGraph::quadratic(0.1, 0.5, 0.1);
    DiffeoMap map = build_diffeo(g, quad_gamma());
    CHECK(map.report.max_grad_dev < 0.25);
    CHECK(map.report.min_det > 0.5);
    CHECK(map.report.max_cross_strip < 1e-6);
}

TEST_CASE("flat graph yields the identity map") {
    BoundaryGraph g = BoundaryGraph::flat(0.1, 0.5, 0.1);
    DiffeoMap map = build_diffeo(g, flat_gamma());
    for (double x1 : {-0.35, 0.0, 0.2})
        for (double x2 : {0.02, 0.11}) {
            Vec2 y = map.Y({x1, x2});
            CHECK(y[0] == doctest::Approx(x1).epsilon(1e-12));
            CHECK(y[1] == doctest::Approx(x2).epsilon(1e-12));
        }
}

TEST_CASE("fast path interpolation tracks the exact evaluation") {
    BoundaryGraph g = BoundaryGraph::quadratic(0.1, 0.5, 0.1);
    DiffeoMap map = build_diffeo(g, quad_gamma());
    for (double x1 : {-0.31, 0.08, 0.27})
        for (double x2 : {0.04, 0.13}) {
            Vec2 a = map.Y({x1, x2});
            Vec2 e = map.Y_exact({x1, x2});
            CHECK((a - e).norm() < 1e-6);
        }
}

// ============================================================================
// conjugated coefficients
// ============================================================================

TEST_CASE("flat graph conjugates to the identity coefficients") {
    BoundaryGraph g = BoundaryGraph::flat(0.1, 0.5, 0.1);
    DiffeoMap map = build_diffeo(g, flat_gamma());
    Grid2D ygrid = Grid2D::box(-0.3, 0.3, 0.0, 0.12, 60, 12);
    ConjugatedCoefficients cc = conjugated_coefficients(map, ygrid);
    CHECK((cc.a11 - 1.0).abs().maxCoeff() < 1e-10);
    CHECK((cc.a22 - 1.0).abs().maxCoeff() < 1e-10);
    CHECK(cc.a12.abs().maxCoeff() < 1e-10);
    CHECK((cc.abold - 1.0).abs().maxCoeff() < 1e-10);
}

TEST_CASE("conjugated coefficients stay symmetric positive definite") {
    BoundaryGraph g = BoundaryGraph::quadratic(0.1, 0.5, 0.1);
    DiffeoMap map = build_diffeo(g, quad_gamma());
    Grid2D ygrid = Grid2D::box(-0.3, 0.3, 0.0, 0.12, 60, 12);
    ConjugatedCoefficients cc = conjugated_coefficients(map, ygrid);
    for (int j = 0; j < ygrid.ny; ++j)
        for (int i = 0; i < ygrid.nx; ++i) {
            double tr = cc.a11(i, j) + cc.a22(i, j);
            double det = cc.a11(i, j) * cc.a22(i, j) - cc.a12(i, j) * cc.a12(i, j);
            CHECK(det > 0.0);
            CHECK(tr > 0.0);
            CHECK(cc.abold(i, j) > 0.0);
        }
}
