#pragma once

#include <Eigen/Dense>

#include "sqg/grid.hpp"

namespace sqg {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

// C-infinity step: 0 for r <= 0, 1 for r >= 1.
double smooth01(double r);
double smooth01_deriv(double r);

// Boundary graph x2 = phi(x1) with compactly supported slope, plus the
// vertical cutoff chi(x2).  phi'' is an even trapezoid profile: C0 on
// [0,a1], linear to -c on [a1,a2], flat, linear back to 0 at ell; c is
// solved so phi'(ell) = 0.  This keeps phi'' continuous (gamma stays C^2)
// while max|phi'| stays below eps with margin.
class BoundaryGraph {
public:
    double eps = 0.1, ell = 0.5, H = 0.1, C0 = 1.0;

    static BoundaryGraph quadratic(double eps, double ell, double H, double C0 = 1.0);
    static BoundaryGraph flat(double eps, double ell, double H);  // phi == 0

    double phi(double x1) const;
    double phi_p(double x1) const;
    double phi_pp(double x1) const;
    double chi(double x2) const;
    double chi_p(double x2) const;

    bool is_flat() const { return flat_; }
    double max_slope() const;     // sampled sup |phi'|
    double quad_window() const { return a1_; }  // phi = C0 x^2/2 on |x1| <= a1

private:
    bool flat_ = false;
    double a1_ = 0, a2_ = 0, a3_ = 0, cneg_ = 0;
    void setup();
};

// gamma solving (-phi' d1 + d2) gamma = phi'' gamma, gamma = 1 on Gamma,
// by backward characteristic integration from each evaluation point.
class GammaField {
public:
    BoundaryGraph graph;
    Grid2D grid;
    Eigen::ArrayXXd val;   // node samples
    double ds = 5e-4;      // RK4 arc step

    // Exact evaluation (characteristic shooting down to Gamma).
    double evaluate(double x1, double x2) const;

    // sup_grid | -phi' d1 gamma + d2 gamma - phi'' gamma | by centered FD.
    double pde_residual() const;
};

GammaField solve_gamma(const BoundaryGraph& graph, const Grid2D& grid, double ds = 5e-4);

struct DiffeoReport {
    double max_grad_dev = 0;   // sup ||grad Y - I||_2 over the grid
    double min_det = 0;
    double max_cross_strip = 0;  // sup |grad Y1 . grad Y2| near Gamma (FD based)
};

// Y1 = x1 + chi(x2) I(x1,x2), I = int_0^{x1} (gamma - 1) dz;  Y2 = x2 - phi(x1).
class DiffeoMap {
public:
    BoundaryGraph graph;
    GammaField gamma;
    Grid2D grid;            // gamma/I sample grid
    Eigen::ArrayXXd Ifield; // cumulative Simpson per row
    DiffeoReport report;

    Vec2 Y(const Vec2& x) const;        // fast path (interpolated I)
    Vec2 Y_exact(const Vec2& x) const;  // Simpson + shooting, no grid interp
    double I_exact(double x1, double x2) const;

    // Analytic Jacobian, using d2 I = phi'(x1) gamma(x1,x2) (exact for the
    // continuum gamma; the FD variant below is the independent check).
    Mat2 grad_Y(const Vec2& x) const;
    Mat2 grad_Y_fd(const Vec2& x, double delta = 5e-5) const;
    double det_Y(const Vec2& x) const;

    Vec2 X(const Vec2& y) const;  // Newton inverse, tol 1e-12
};

// Verifies the DiffeoMap invariants; throws numerical_error with advice
// when ||grad Y - I|| exceeds 1/4 or det drops near 0.
DiffeoMap build_diffeo(const BoundaryGraph& graph, const GammaField& gamma);

struct ConjugatedCoefficients {
    Grid2D grid;  // target (half-space) grid in y coordinates
    Eigen::ArrayXXd a11, a12, a22, abold;
};

ConjugatedCoefficients conjugated_coefficients(const DiffeoMap& map, const Grid2D& ygrid);

}  // namespace sqg
