#pragma once

#include <functional>
#include <vector>

#include "sqg/common.hpp"
#include "sqg/extension.hpp"

namespace sqg {

using Mat2 = Eigen::Matrix2d;

// ===================================================================
// coefficient fields
// ===================================================================

struct CoefficientField {
    Grid2D g;
    Eigen::ArrayXXd a11, a12, a22;

    static CoefficientField constant(const Grid2D& grid, const Mat2& A);
    static CoefficientField smooth(const Grid2D& grid,
                                   const std::function<Mat2(const Vec2&)>& A);
    Mat2 at(int i, int j) const;
    double ellipticity_floor() const;   // min eigenvalue over nodes
    double size_bound() const;          // sup|A| + sup|grad A| (centered differences)
    ExtendedCoefficients as_extended() const;  // abold = 1
};

// ===================================================================
// closed-form kernels
// ===================================================================

// heat kernel of d_t - div(A grad), constant A, d = 2
double gaussian_kernel(const Mat2& A, const Vec2& z, double t);
// kernel of d_t + L_A^{1/2}: c1 (det A)^{-1/2} t / (t^2 + |A^{-1/2}z|^2)^{3/2}
double half_kernel(const Mat2& A, const Vec2& z, double t);
// (1/sqrt(pi)) int rho^{-1/2} e^{-rho} G_A(z, t^2/(4 rho)) drho
double half_kernel_subordinated(const Mat2& A, const Vec2& z, double t, int n_nodes = 200);

// ===================================================================
// constant-coefficient square root (singular integral on a grid)
// ===================================================================

struct SingularScheme {
    double exclude_cells = 4.0;  // exclusion disc radius in cell units
    int hess_order = 4;          // Taylor-correction stencil order: 2 or 4
    double r_out = 0.0;          // 0 = auto from the grid extent
    int phi_nodes = 256;
};

// offset tables shared across evaluations on one (grid, A) pair
struct SingularTables {
    Grid2D g;
    Mat2 A;
    SingularScheme sch;
    Eigen::ArrayXXd K;  // h^2 / (A^{-1} z . z)^{3/2} per offset, masked
    int off_x = 0, off_y = 0;
    double s_in = 0;    // total included kernel mass sum
    Mat2 Q;             // second moments of the excluded cells
    double tail_phi = 0, r_out = 0;
};

SingularTables build_singular_tables(const Grid2D& g, const Mat2& A,
                                     const SingularScheme& sch = {});
// L_A^{1/2} u at every node of a compactly supported sampled field
GridField sqrt_const(const GridField& u, const SingularTables& tab);
double sqrt_const_at(const GridField& u, const SingularTables& tab, int i, int j);
// D(f)(x) = int |f(x)-f(y)|^2 (A^{-1}z.z)^{-3/2} dy (A = I for the paper form)
GridField d_functional(const GridField& f, const SingularTables& tab);

// ===================================================================
// variable-coefficient square roots by subordinated heat marching
// ===================================================================

struct MarchScheme {
    int nsub = 12;       // Crank-Nicolson substeps per geometric panel
    double s0 = 0;       // 0 = auto h^2
    double smax = 0;     // 0 = auto 40 / lambda_1(box)
    bool want_half = true;
    bool want_inv_half = true;
};

struct SqrtPair {
    PlaneField half;      // L^{1/2} u
    PlaneField inv_half;  // L^{-1/2} u
};

SqrtPair sqrt_variable(const PlaneField& u, HeatSolver& hs, const MarchScheme& sch = {});

// grid heat-kernel column H_L(., x0, t) from delta-like initial data
PlaneField heat_kernel_column(HeatSolver& hs, const Grid2D& g, const Mat2& A0, const Vec2& x0,
                              double t);

// ===================================================================
// frozen-coefficient Duhamel representation (constant A)
// ===================================================================

struct DuhamelConfig {
    double T = 0.1;
    int nt = 5;        // Simpson nodes in the source integral (odd)
    double tol = 1e-8;
    int max_iter = 50;
    Vec2 b{0, 0};      // constant drift
};

struct DuhamelResult {
    GridField v;                 // solution at time T
    std::vector<double> deltas;  // successive sup-distances
    int iterations = 0;
};

DuhamelResult frozen_duhamel_constant(const GridField& v0, const Mat2& A,
                                      const DuhamelConfig& cfg,
                                      const std::function<GridField(double)>& forcing = nullptr);

// linear (zero-padded) convolution with a displacement-sampled kernel
GridField kernel_convolve(const GridField& field, const std::function<double(const Vec2&)>& kernel);

// ===================================================================
// probes and certificates
// ===================================================================

struct MomentProbe {
    double ratio = 0;
    double lhs = 0, rhs = 0;
};
MomentProbe moment_bound_probe(const Mat2& A, double beta, int j, double h, double t);

struct BoundCertificate {
    std::string id;
    int n_fields = 0;
    uint64_t seed = 0;
    double min_ratio = 0;
    double min_pointwise = 0;  // pointwise_z1 only
    std::vector<double> per_field;
};

// random band-limited window fields for the certificate families
GridField random_band_field(const Grid2D& g, Rng& rng, double window_r, double k_band = 9.0);

// band field with polynomial moments up to `order` removed (bump-weighted
// least squares); keeps the free-plane heat evolution decaying fast enough
// that Dirichlet-box marches track it
GridField moment_free_band_field(const Grid2D& g, Rng& rng, double plateau, double window_r,
                                 double k_band, int order = 1, int n_modes = 12);

BoundCertificate certificate_pointwise_z1(const Grid2D& g, int n_fields, uint64_t seed);
BoundCertificate certificate_finite_diff_z16(const Grid2D& g, int n_fields, uint64_t seed,
                                             const std::vector<double>& hs);
BoundCertificate certificate_cubic_corcorv(const Grid2D& g, int n_fields, uint64_t seed,
                                           const std::vector<double>& hs);
BoundCertificate certificate_transport_z22(const Grid2D& g, int n_fields, uint64_t seed,
                                           const std::vector<double>& hs);

}  // namespace sqg
