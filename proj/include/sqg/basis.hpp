#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sqg/grid.hpp"

namespace sqg {

// Bounded domain description.  Rectangles get the closed-form sine basis;
// "discretized" domains get the dense eigensolve of the 5-point Laplacian
// on a node mask.
struct DomainSpec {
    enum class Kind { rectangle, discretized };
    Kind kind = Kind::rectangle;

    // rectangle (0,Lx) x (0,Ly)
    double Lx = 1.0, Ly = 1.0;

    // discretized: interior-node mask with spacing h; node (i,j) at (i*h, j*h)
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask;
    double h = 0.0;

    static DomainSpec rectangle(double Lx, double Ly);
    static DomainSpec unit_square() { return rectangle(1.0, 1.0); }
    static DomainSpec discretized(
        Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask, double h);

    std::string kind_name() const {
        return kind == Kind::rectangle ? "rectangle" : "discretized";
    }
};

// Dirichlet eigenpairs (-Delta w_j = mu_j w_j, w_j|_boundary = 0) sampled on
// a uniform grid, sorted by eigenvalue.  For rectangles the grid transforms
// are dense sine-matrix products; discrete sine orthogonality makes the
// projection exact for wavenumbers below the grid Nyquist.
class EigenBasis {
public:
    DomainSpec domain;
    Grid2D grid;
    int n_modes = 0;
    Eigen::VectorXd mu;  // ascending

    // rectangle: per-mode wavenumbers (k,l), 1-based
    std::vector<std::pair<int, int>> modes;
    int kmax = 0, lmax = 0;

    // value/derivative tables over grid nodes:
    //   Sx(k-1,i) = sqrt(2/Lx) sin(k pi x_i / Lx), Cx(k-1,i) = d/dx of that
    Eigen::MatrixXd Sx, Sy, Cx, Cy;

    // discretized: eigenvector samples per mode (grid-shaped, zero outside mask)
    std::vector<Eigen::ArrayXXd> vecs;
    std::vector<Eigen::ArrayXXd> vecs_dx, vecs_dy;

    // Mode values on the grid.
    Eigen::ArrayXXd mode_values(int j) const;

    // Coefficients -> grid samples (and spatial gradient).
    Eigen::ArrayXXd synth(const Eigen::VectorXd& coeff) const;
    void synth_grad(const Eigen::VectorXd& coeff, Eigen::ArrayXXd& gx,
                    Eigen::ArrayXXd& gy) const;

    // Grid samples -> coefficients (trapezoid inner products).
    Eigen::VectorXd analyze(const Eigen::ArrayXXd& values) const;
};

using BasisPtr = std::shared_ptr<const EigenBasis>;

// grid_n: interior resolution override (rectangle only; 0 = automatic
// dealias-safe choice of at least 2*kmax intervals).
BasisPtr build_eigenbasis(const DomainSpec& domain, int n_modes, int grid_n = 0);

// Cache round-trip: JSON header + flat little-endian float64 payload.
void save_eigenbasis(const EigenBasis& basis, const std::string& path);
BasisPtr load_eigenbasis(const std::string& path);

// Coefficient vector against a fixed basis.
struct SpectralField {
    BasisPtr basis;
    Eigen::VectorXd c;

    SpectralField() = default;
    SpectralField(BasisPtr b, Eigen::VectorXd coeff)
        : basis(std::move(b)), c(std::move(coeff)) {}
    static SpectralField zero(const BasisPtr& b) {
        return SpectralField(b, Eigen::VectorXd::Zero(b->n_modes));
    }
    double l2() const { return c.norm(); }  // Parseval
};

}  // namespace sqg
