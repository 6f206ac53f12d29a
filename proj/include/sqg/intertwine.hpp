#pragma once

#include "sqg/kernels.hpp"
#include "sqg/solver.hpp"

namespace sqg {

// ===================================================================
// intertwining residuals between Omega-side operators and their
// extended plane counterparts
// ===================================================================

enum class IntertwineMode { laplacian, heat, lambda, stream };

struct IntertwineResidual {
    PlaneField residual;
    double linf = 0, l2 = 0;
};

// rigid-chart residual on one cover patch; `t` is used by heat mode only
IntertwineResidual intertwine_residual(IntertwineMode mode, const SpectralField& theta,
                                       const BallCover& cover, int patch, double h_patch,
                                       double t = 0.1, const MarchScheme& ms = {});

// curved-chart Laplacian residual against a manufactured localized image
//   v(y) = y2 exp(-|y|^2 / w^2),
// comparing the assembled (L, B) pair on mirrored conjugated coefficients
// with the continuum conjugated operator evaluated through the map.
struct CurvedResidual {
    double linf = 0, l2 = 0;
};
CurvedResidual curved_laplacian_residual(const DiffeoMap& map, double half_width, double h,
                                         double bump_width = 0.07);

// residual of F(grad^perp(chi1 psi) . grad(chi theta)) - a grad^perp F(chi1 psi) . grad F(chi theta)
IntertwineResidual poisson_bracket_check(const SpectralField& psi, const SpectralField& theta,
                                         const BallCover& cover, int patch, double h_patch);

// ===================================================================
// the extended SQG system, patch by patch
// ===================================================================

struct PatchResidual {
    int patch = -1;
    bool boundary = false;
    double linf = 0, l2 = 0;
    double u_re_linf = -1;  // only when remainders are requested
};

struct ExtendedSystemReport {
    std::vector<PatchResidual> patches;
    double max_l2 = 0;
};

// Residual of the per-patch localized SQG equation at time t0, with
// d theta_i/dt from a centered difference of adjacent trajectory steps.
// The dissipation enters as F(chi Lambda theta): the L^{1/2} theta_i term
// and the lambda-intertwining part of the forcing cancel exactly, so no
// kernel march is needed for the residual itself.  `remainders` switches
// on the stream-function march that splits u_i into its leading term and
// the remainder u_re (reported, not part of the residual).
ExtendedSystemReport extended_system_residual(const SpectralField& theta0, double dt, double t0,
                                              const BallCover& cover, double h_patch,
                                              bool remainders = false);

// chart rotation matrix (constant for the rigid charts)
Mat2 chart_rotation(const Patch& p, double Lx, double Ly);

}  // namespace sqg
