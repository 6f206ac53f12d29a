#pragma once

#include <Eigen/Sparse>
#include <array>
#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "sqg/basis.hpp"
#include "sqg/geometry.hpp"

namespace sqg {

// ===================================================================
// full-plane fields with parity tags
// ===================================================================

// parity: -1 odd, +1 even across y2 = 0, 0 untagged
struct PlaneField {
    Grid2D g;
    Eigen::ArrayXXd v;
    int parity = 0;

    PlaneField() = default;
    PlaneField(const Grid2D& grid, int par = 0)
        : g(grid), v(Eigen::ArrayXXd::Zero(grid.nx, grid.ny)), parity(par) {}

    GridField as_grid() const {
        GridField f;
        f.g = g;
        f.v = v;
        return f;
    }
    double max_abs() const { return v.abs().maxCoeff(); }
    double l2() const { return std::sqrt((v * v).sum() * g.hx * g.hy); }
};

// symmetric plane grid: nodes at k*h for k = -n..n in both directions
Grid2D plane_grid(double half_width, double h);
// upper half: y2 = 0..n*h, x symmetric
Grid2D upper_grid(double half_width, double h);

// mirror a half-space field (row at y2 = 0 required) across y2 = 0
PlaneField extend(const GridField& upper, int parity, double trace_tol = 1e-10);
GridField upper_half(const PlaneField& f);

PlaneField pf_diff_x(const PlaneField& f);
PlaneField pf_diff_y(const PlaneField& f);
// max deviation from the tagged parity over mirrored node pairs
double parity_defect(const PlaneField& f);

// ===================================================================
// extended coefficients and the operators L, B
// ===================================================================

struct ExtendedCoefficients {
    Grid2D g;
    Eigen::ArrayXXd a11, a12, a22, abold;

    static ExtendedCoefficients identity(const Grid2D& grid);
    // upper-half conjugated coefficients mirrored E/E/O/E
    static ExtendedCoefficients from_upper(const ConjugatedCoefficients& cc,
                                           double trace_tol = 1e-8);
    double min_eig() const;
    double min_abold() const { return abold.minCoeff(); }
};

using SpMat = Eigen::SparseMatrix<double>;

// divergence-form L = -d_i(a_ij d_j .): compact flux stencil on the
// diagonal coefficients, centered symmetric pairing on a12; homogeneous
// Dirichlet on the pad boundary.  Symmetric by construction.
SpMat assemble_L(const ExtendedCoefficients& c);
PlaneField apply_L(const SpMat& L, const PlaneField& f);
// B f = (a_ij / abold) (d_i abold)(d_j f), centered differences
PlaneField apply_B(const ExtendedCoefficients& c, const PlaneField& f);

// Crank-Nicolson e^{-tL} with per-dt factorization cache (shared across
// inputs; the cache is what keeps multi-patch sweeps affordable)
class HeatSolver {
public:
    explicit HeatSolver(SpMat L) : L_(std::move(L)) {}
    Eigen::VectorXd march(const Eigen::VectorXd& v, double dt, int nsteps);
    PlaneField evolve(const PlaneField& f, double t, int nsteps);
    const SpMat& matrix() const { return L_; }

private:
    Eigen::SimplicialLDLT<SpMat>& factor(double dt);
    SpMat L_;
    std::map<long long, std::shared_ptr<Eigen::SimplicialLDLT<SpMat>>> cache_;
};

// ===================================================================
// ball cover of the rectangle
// ===================================================================

// radial cutoff: 1 inside r_in, 0 outside r_out, smooth in between
struct RadialCutoff {
    Vec2 c{0, 0};
    double r_in = 0, r_out = 0;
    double value(const Vec2& x) const;
    Vec2 grad(const Vec2& x) const;
    double laplacian(const Vec2& x) const;
};

struct Patch {
    bool boundary = false;
    Vec2 center{0, 0};
    int edge = -1;  // 0 bottom, 1 right, 2 top, 3 left; -1 interior
    std::array<double, 5> radii{};  // r_j = r0 (1 + j/8), j = 0..4
};

struct BallCover {
    DomainSpec domain;
    double r0 = 0;
    int n_boundary = 0;
    std::vector<Patch> patches;
    RadialCutoff cutoff(int patch, int j) const;
};

BallCover build_cover(const DomainSpec& rect, double r0);

// rigid chart maps: y1 along the edge, y2 = inward distance
Vec2 domain_to_chart(const Patch& p, const Vec2& x, double Lx, double Ly);
Vec2 chart_to_domain(const Patch& p, const Vec2& y, double Lx, double Ly);

// ===================================================================
// odd-periodic continuation of a rectangle field
// ===================================================================

// Evaluation of a zero-trace field beyond the rectangle through odd
// reflections (the sine-basis continuation); keeps localized images
// smooth across the far edges of corner patches.
struct OmegaExtView {
    const GridField* f = nullptr;
    double node(int i, int j) const;
    double value(double x, double y) const;  // bicubic on reflected nodes
};

// ===================================================================
// the localization map F
// ===================================================================

// F(g) = O((chi g) o chart^{-1}) for boundary patches, plain chi*g shifted
// to the patch frame for interior patches.
PlaneField localize_extend(const GridField& g, const RadialCutoff& chi, const Patch& p,
                           const Grid2D& pgrid, double Lx, double Ly,
                           double trace_tol = 1e-9);

// curved-chart variant with an analytic integrand, used by the
// manufactured graph-domain cases
PlaneField localize_extend_curved(const std::function<double(const Vec2&)>& g,
                                  const RadialCutoff& chi, const DiffeoMap& map,
                                  const Grid2D& pgrid, double trace_tol = 1e-9);

// even extension of (w o chart^{-1}), e.g. cutoffs composed with X
PlaneField sample_even(const std::function<double(const Vec2&)>& w, const Patch& p,
                       const Grid2D& pgrid, double Lx, double Ly);

}  // namespace sqg
