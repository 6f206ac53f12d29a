#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "sqg/common.hpp"

namespace sqg {

// Uniform tensor grid; node (i,j) sits at (x0 + i*hx, y0 + j*hy),
// 0 <= i < nx, 0 <= j < ny.
struct Grid2D {
    int nx = 0, ny = 0;
    double hx = 0, hy = 0;
    double x0 = 0, y0 = 0;

    double x(int i) const { return x0 + i * hx; }
    double y(int j) const { return y0 + j * hy; }
    double x_max() const { return x0 + (nx - 1) * hx; }
    double y_max() const { return y0 + (ny - 1) * hy; }
    long count() const { return static_cast<long>(nx) * ny; }

    bool same(const Grid2D& o) const {
        return nx == o.nx && ny == o.ny && std::abs(hx - o.hx) < 1e-14 &&
               std::abs(hy - o.hy) < 1e-14 && std::abs(x0 - o.x0) < 1e-14 &&
               std::abs(y0 - o.y0) < 1e-14;
    }

    // Covering [ax,bx] x [ay,by] with (n+1) x (m+1) nodes.
    static Grid2D box(double ax, double bx, double ay, double by, int n, int m) {
        if (n < 1 || m < 1 || bx <= ax || by <= ay)
            throw config_error("Grid2D::box: degenerate box");
        return {n + 1, m + 1, (bx - ax) / n, (by - ay) / m, ax, ay};
    }
};

// Scalar samples on a Grid2D.  v(i,j) indexed by (x index, y index).
struct GridField {
    Grid2D g;
    Eigen::ArrayXXd v;

    GridField() = default;
    GridField(const Grid2D& grid, double fill = 0.0)
        : g(grid), v(Eigen::ArrayXXd::Constant(grid.nx, grid.ny, fill)) {}

    double max_abs() const { return v.abs().maxCoeff(); }
    // Trapezoid L2 norm (boundary rows weighted 1/2).
    double l2() const {
        Eigen::ArrayXd wx = Eigen::ArrayXd::Ones(g.nx);
        Eigen::ArrayXd wy = Eigen::ArrayXd::Ones(g.ny);
        wx(0) = wx(g.nx - 1) = 0.5;
        wy(0) = wy(g.ny - 1) = 0.5;
        double s = ((v * v).colwise() * wx).rowwise().sum().matrix().dot(wy.matrix());
        return std::sqrt(s * g.hx * g.hy);
    }

    template <typename F>
    static GridField sample(const Grid2D& grid, F&& f) {
        GridField out(grid);
        for (int j = 0; j < grid.ny; ++j)
            for (int i = 0; i < grid.nx; ++i) out.v(i, j) = f(grid.x(i), grid.y(j));
        return out;
    }
};

namespace detail {
// Catmull-Rom weights for fractional offset u in [0,1].
inline void cr_weights(double u, double w[4]) {
    double u2 = u * u, u3 = u2 * u;
    w[0] = 0.5 * (-u3 + 2 * u2 - u);
    w[1] = 0.5 * (3 * u3 - 5 * u2 + 2);
    w[2] = 0.5 * (-3 * u3 + 4 * u2 + u);
    w[3] = 0.5 * (u3 - u2);
}
}  // namespace detail

// Bicubic (Catmull-Rom) interpolation; points outside the grid read as 0.
inline double interp_bicubic(const GridField& f, double x, double y) {
    const Grid2D& g = f.g;
    double sx = (x - g.x0) / g.hx, sy = (y - g.y0) / g.hy;
    if (sx < -1e-12 || sy < -1e-12 || sx > g.nx - 1 + 1e-12 || sy > g.ny - 1 + 1e-12)
        return 0.0;
    int i0 = static_cast<int>(std::floor(sx));
    int j0 = static_cast<int>(std::floor(sy));
    if (i0 >= g.nx - 1) i0 = g.nx - 2;
    if (j0 >= g.ny - 1) j0 = g.ny - 2;
    double wu[4], wv[4];
    detail::cr_weights(sx - i0, wu);
    detail::cr_weights(sy - j0, wv);
    double acc = 0.0;
    for (int b = -1; b <= 2; ++b) {
        int j = std::min(std::max(j0 + b, 0), g.ny - 1);
        double row = 0.0;
        for (int a = -1; a <= 2; ++a) {
            int i = std::min(std::max(i0 + a, 0), g.nx - 1);
            row += wu[a + 1] * f.v(i, j);
        }
        acc += wv[b + 1] * row;
    }
    return acc;
}

inline double interp_bilinear(const GridField& f, double x, double y) {
    const Grid2D& g = f.g;
    double sx = (x - g.x0) / g.hx, sy = (y - g.y0) / g.hy;
    if (sx < 0 || sy < 0 || sx > g.nx - 1 || sy > g.ny - 1) return 0.0;
    int i0 = std::min(static_cast<int>(sx), g.nx - 2);
    int j0 = std::min(static_cast<int>(sy), g.ny - 2);
    double u = sx - i0, v = sy - j0;
    return (1 - u) * (1 - v) * f.v(i0, j0) + u * (1 - v) * f.v(i0 + 1, j0) +
           (1 - u) * v * f.v(i0, j0 + 1) + u * v * f.v(i0 + 1, j0 + 1);
}

// Centered differences, one-sided second order at the edges.
inline GridField diff_x(const GridField& f) {
    GridField out(f.g);
    int nx = f.g.nx;
    double h = f.g.hx;
    for (int j = 0; j < f.g.ny; ++j) {
        for (int i = 1; i + 1 < nx; ++i)
            out.v(i, j) = (f.v(i + 1, j) - f.v(i - 1, j)) / (2 * h);
        out.v(0, j) = (-3 * f.v(0, j) + 4 * f.v(1, j) - f.v(2, j)) / (2 * h);
        out.v(nx - 1, j) = (3 * f.v(nx - 1, j) - 4 * f.v(nx - 2, j) + f.v(nx - 3, j)) / (2 * h);
    }
    return out;
}

inline GridField diff_y(const GridField& f) {
    GridField out(f.g);
    int ny = f.g.ny;
    double h = f.g.hy;
    for (int i = 0; i < f.g.nx; ++i) {
        for (int j = 1; j + 1 < ny; ++j)
            out.v(i, j) = (f.v(i, j + 1) - f.v(i, j - 1)) / (2 * h);
        out.v(i, 0) = (-3 * f.v(i, 0) + 4 * f.v(i, 1) - f.v(i, 2)) / (2 * h);
        out.v(i, ny - 1) = (3 * f.v(i, ny - 1) - 4 * f.v(i, ny - 2) + f.v(i, ny - 3)) / (2 * h);
    }
    return out;
}

}  // namespace sqg
