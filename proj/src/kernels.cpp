#include "sqg/kernels.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>

#include "sqg/gauss.hpp"

namespace sqg {

namespace {
void check_spd(const Mat2& A) {
    if (std::abs(A(0, 1) - A(1, 0)) > 1e-12 * (1 + A.cwiseAbs().maxCoeff()) || A(0, 0) <= 0 ||
        A.determinant() <= 0)
        throw config_error("coefficient matrix must be symmetric positive definite");
}
double quad_form_inv(const Mat2& A, const Vec2& z) {
    return z.dot(A.inverse() * z);  // z . A^{-1} z
}
const double kC1 = 1.0 / (2.0 * M_PI);  // half-kernel normalization, d = 2
}  // namespace

// ===================================================================
// coefficient fields
// ===================================================================

CoefficientField CoefficientField::constant(const Grid2D& grid, const Mat2& A) {
    check_spd(A);
    CoefficientField c;
    c.g = grid;
    c.a11 = Eigen::ArrayXXd::Constant(grid.nx, grid.ny, A(0, 0));
    c.a12 = Eigen::ArrayXXd::Constant(grid.nx, grid.ny, A(0, 1));
    c.a22 = Eigen::ArrayXXd::Constant(grid.nx, grid.ny, A(1, 1));
    return c;
}

CoefficientField CoefficientField::smooth(const Grid2D& grid,
                                          const std::function<Mat2(const Vec2&)>& A) {
    CoefficientField c;
    c.g = grid;
    c.a11.resize(grid.nx, grid.ny);
    c.a12.resize(grid.nx, grid.ny);
    c.a22.resize(grid.nx, grid.ny);
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) {
            Mat2 a = A(Vec2(grid.x(i), grid.y(j)));
            check_spd(a);
            c.a11(i, j) = a(0, 0);
            c.a12(i, j) = a(0, 1);
            c.a22(i, j) = a(1, 1);
        }
    return c;
}

Mat2 CoefficientField::at(int i, int j) const {
    Mat2 a;
    a << a11(i, j), a12(i, j), a12(i, j), a22(i, j);
    return a;
}

double CoefficientField::ellipticity_floor() const {
    double m = std::numeric_limits<double>::max();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double tr = a11(i, j) + a22(i, j);
            double det = a11(i, j) * a22(i, j) - a12(i, j) * a12(i, j);
            m = std::min(m, tr / 2 - std::sqrt(std::max(0.0, tr * tr / 4 - det)));
        }
    return m;
}

double CoefficientField::size_bound() const {
    double amax = std::max({a11.abs().maxCoeff(), a12.abs().maxCoeff(), a22.abs().maxCoeff()});
    double gmax = 0;
    for (const auto* comp : {&a11, &a12, &a22}) {
        GridField f;
        f.g = g;
        f.v = *comp;
        gmax = std::max({gmax, diff_x(f).max_abs(), diff_y(f).max_abs()});
    }
    return amax + gmax;
}

ExtendedCoefficients CoefficientField::as_extended() const {
    ExtendedCoefficients c;
    c.g = g;
    c.a11 = a11;
    c.a12 = a12;
    c.a22 = a22;
    c.abold = Eigen::ArrayXXd::Ones(g.nx, g.ny);
    return c;
}

// ===================================================================
// closed-form kernels
// ===================================================================

double gaussian_kernel(const Mat2& A, const Vec2& z, double t) {
    check_spd(A);
    if (t <= 0) throw config_error("gaussian_kernel: t > 0 required");
    return std::exp(-quad_form_inv(A, z) / (4 * t)) /
           (4 * M_PI * t * std::sqrt(A.determinant()));
}

double half_kernel(const Mat2& A, const Vec2& z, double t) {
    check_spd(A);
    if (t <= 0) throw config_error("half_kernel: t > 0 required");
    double q = quad_form_inv(A, z);
    return kC1 * t / (std::sqrt(A.determinant()) * std::pow(t * t + q, 1.5));
}

double half_kernel_subordinated(const Mat2& A, const Vec2& z, double t, int n_nodes) {
    // (1/sqrt(pi)) int rho^{-1/2} e^{-rho} G_A(z, t^2/(4 rho)) drho, log substitution
    auto nodes = gauss_legendre(n_nodes, std::log(1e-9), std::log(80.0));
    double acc = 0;
    for (auto [u, w] : nodes) {
        double rho = std::exp(u);
        acc += w * std::sqrt(rho) * std::exp(-rho) * gaussian_kernel(A, z, t * t / (4 * rho));
    }
    return acc / std::sqrt(M_PI);
}

// ===================================================================
// singular-integral tables
// ===================================================================

SingularTables build_singular_tables(const Grid2D& g, const Mat2& A, const SingularScheme& sch) {
    check_spd(A);
    if (std::abs(g.hx - g.hy) > 1e-14) throw config_error("singular tables need a square grid");
    if (sch.hess_order != 2 && sch.hess_order != 4)
        throw config_error("hess_order must be 2 or 4");
    const double h = g.hx;
    SingularTables tab;
    tab.g = g;
    tab.A = A;
    tab.sch = sch;
    tab.r_out = sch.r_out > 0 ? sch.r_out : (g.x_max() - g.x0);
    Mat2 Ai = A.inverse();

    tab.off_x = (int)std::floor(tab.r_out / h);
    tab.off_y = tab.off_x;
    tab.K = Eigen::ArrayXXd::Zero(2 * tab.off_x + 1, 2 * tab.off_y + 1);
    double s_in = 0;
    for (int b = -tab.off_y; b <= tab.off_y; ++b)
        for (int a = -tab.off_x; a <= tab.off_x; ++a) {
            double rc = std::hypot((double)a, (double)b);
            if (rc <= sch.exclude_cells || rc * h > tab.r_out) continue;
            Vec2 z(a * h, b * h);
            double q = z.dot(Ai * z);
            double val = h * h / std::pow(q, 1.5);
            tab.K(a + tab.off_x, b + tab.off_y) = val;
            s_in += val;
        }
    tab.s_in = s_in;

    // second moments of the excluded cells (fine tensor quadrature; polar
    // closed form on the singular center cell)
    Mat2 Q = Mat2::Zero();
    auto gq = gauss_legendre(6);
    for (int b = -(int)sch.exclude_cells; b <= (int)sch.exclude_cells; ++b)
        for (int a = -(int)sch.exclude_cells; a <= (int)sch.exclude_cells; ++a) {
            if (std::hypot((double)a, (double)b) > sch.exclude_cells) continue;
            if (a == 0 && b == 0) continue;
            for (auto [xu, xw] : gq)
                for (auto [yu, yw] : gq) {
                    Vec2 z((a + 0.5 * xu) * h, (b + 0.5 * yu) * h);
                    double q = z.dot(Ai * z);
                    double w = xw * yw * 0.25 * h * h / std::pow(q, 1.5);
                    Q(0, 0) += w * z[0] * z[0];
                    Q(0, 1) += w * z[0] * z[1];
                    Q(1, 1) += w * z[1] * z[1];
                }
        }
    // center cell: radial integral collapses to a phi integral
    {
        const int n = 1024;
        for (int k = 0; k < n; ++k) {
            double phi = 2 * M_PI * (k + 0.5) / n;
            Vec2 e(std::cos(phi), std::sin(phi));
            double rmax = 0.5 * h / std::max(std::abs(e[0]), std::abs(e[1]));
            double w = (2 * M_PI / n) * rmax / std::pow(e.dot(Ai * e), 1.5);
            Q(0, 0) += w * e[0] * e[0];
            Q(0, 1) += w * e[0] * e[1];
            Q(1, 1) += w * e[1] * e[1];
        }
    }
    Q(1, 0) = Q(0, 1);
    tab.Q = Q;

    // angular tail integral int (e . A^{-1} e)^{-3/2} dphi
    {
        const int n = 1024;
        double acc = 0;
        for (int k = 0; k < n; ++k) {
            double phi = 2 * M_PI * k / n;
            Vec2 e(std::cos(phi), std::sin(phi));
            acc += std::pow(e.dot(Ai * e), -1.5);
        }
        tab.tail_phi = acc * 2 * M_PI / n;
    }
    return tab;
}

namespace {

inline double upad(const GridField& u, int i, int j) {
    if (i < 0 || j < 0 || i >= u.g.nx || j >= u.g.ny) return 0.0;
    return u.v(i, j);
}

// Hessian entries with zero padding outside the grid
void hessian_at(const GridField& u, int i, int j, int order, double H[3]) {
    const double h = u.g.hx, ih2 = 1.0 / (h * h);
    if (order == 2) {
        H[0] = (upad(u, i + 1, j) - 2 * upad(u, i, j) + upad(u, i - 1, j)) * ih2;
        H[2] = (upad(u, i, j + 1) - 2 * upad(u, i, j) + upad(u, i, j - 1)) * ih2;
        H[1] = (upad(u, i + 1, j + 1) + upad(u, i - 1, j - 1) - upad(u, i + 1, j - 1) -
                upad(u, i - 1, j + 1)) *
               0.25 * ih2;
        return;
    }
    H[0] = (-upad(u, i - 2, j) + 16 * upad(u, i - 1, j) - 30 * upad(u, i, j) +
            16 * upad(u, i + 1, j) - upad(u, i + 2, j)) *
           ih2 / 12.0;
    H[2] = (-upad(u, i, j - 2) + 16 * upad(u, i, j - 1) - 30 * upad(u, i, j) +
            16 * upad(u, i, j + 1) - upad(u, i, j + 2)) *
           ih2 / 12.0;
    static const int off[4] = {-2, -1, 1, 2};
    static const double cf[4] = {1.0 / 12, -8.0 / 12, 8.0 / 12, -1.0 / 12};
    double acc = 0;
    for (int p = 0; p < 4; ++p)
        for (int q = 0; q < 4; ++q) acc += cf[p] * cf[q] * upad(u, i + off[p], j + off[q]);
    H[1] = acc / (h * h);
}

void gradient_at(const GridField& u, int i, int j, int order, double G[2]) {
    const double ih = 1.0 / u.g.hx;
    if (order == 2) {
        G[0] = (upad(u, i + 1, j) - upad(u, i - 1, j)) * 0.5 * ih;
        G[1] = (upad(u, i, j + 1) - upad(u, i, j - 1)) * 0.5 * ih;
        return;
    }
    G[0] = (upad(u, i - 2, j) - 8 * upad(u, i - 1, j) + 8 * upad(u, i + 1, j) -
            upad(u, i + 2, j)) *
           ih / 12.0;
    G[1] = (upad(u, i, j - 2) - 8 * upad(u, i, j - 1) + 8 * upad(u, i, j + 1) -
            upad(u, i, j + 2)) *
           ih / 12.0;
}

double offset_sum(const GridField& u, const SingularTables& tab, int i, int j) {
    const int nx = u.g.nx, ny = u.g.ny;
    int a0 = std::max(-tab.off_x, -i), a1 = std::min(tab.off_x, nx - 1 - i);
    int b0 = std::max(-tab.off_y, -j), b1 = std::min(tab.off_y, ny - 1 - j);
    double acc = 0;
    for (int b = b0; b <= b1; ++b) {
        const double* krow = &tab.K(a0 + tab.off_x, b + tab.off_y);
        const double* urow = &u.v(i + a0, j + b);
        int n = a1 - a0 + 1;
        for (int a = 0; a < n; ++a) acc += krow[a] * urow[a];
    }
    return acc;
}

}  // namespace

double sqrt_const_at(const GridField& u, const SingularTables& tab, int i, int j) {
    const double c0 = std::tgamma(1.5) / (M_PI * std::tgamma(0.5));
    double pref = c0 / std::sqrt(tab.A.determinant());
    double H[3];
    hessian_at(u, i, j, tab.sch.hess_order, H);
    double corr = -0.5 * (H[0] * tab.Q(0, 0) + 2 * H[1] * tab.Q(0, 1) + H[2] * tab.Q(1, 1));
    double far = u.v(i, j) * tab.s_in - offset_sum(u, tab, i, j);
    double tail = u.v(i, j) * tab.tail_phi / tab.r_out;
    return pref * (far + corr + tail);
}

GridField sqrt_const(const GridField& u, const SingularTables& tab) {
    if (!u.g.same(tab.g)) throw config_error("sqrt_const: grid mismatch with tables");
    GridField out;
    out.g = u.g;
    out.v.resize(u.g.nx, u.g.ny);
#pragma omp parallel for schedule(static)
    for (int j = 0; j < u.g.ny; ++j)
        for (int i = 0; i < u.g.nx; ++i) out.v(i, j) = sqrt_const_at(u, tab, i, j);
    return out;
}

GridField d_functional(const GridField& f, const SingularTables& tab) {
    if (!f.g.same(tab.g)) throw config_error("d_functional: grid mismatch with tables");
    GridField f2;
    f2.g = f.g;
    f2.v = f.v * f.v;
    GridField out;
    out.g = f.g;
    out.v.resize(f.g.nx, f.g.ny);
#pragma omp parallel for schedule(static)
    for (int j = 0; j < f.g.ny; ++j)
        for (int i = 0; i < f.g.nx; ++i) {
            double fx = f.v(i, j);
            double far = fx * fx * tab.s_in - 2 * fx * offset_sum(f, tab, i, j) +
                         offset_sum(f2, tab, i, j);
            double G[2];
            gradient_at(f, i, j, tab.sch.hess_order, G);
            double corr = G[0] * G[0] * tab.Q(0, 0) + 2 * G[0] * G[1] * tab.Q(0, 1) +
                          G[1] * G[1] * tab.Q(1, 1);
            double tail = fx * fx * tab.tail_phi / tab.r_out;
            out.v(i, j) = far + corr + tail;
        }
    return out;
}

// ===================================================================
// subordinated square roots on a heat solver
// ===================================================================

SqrtPair sqrt_variable(const PlaneField& u, HeatSolver& hs, const MarchScheme& sch) {
    const Grid2D& g = u.g;
    const double h = g.hx;
    double s0 = sch.s0 > 0 ? sch.s0 : h * h;
    double smax = sch.smax;
    if (smax <= 0) {
        double Wx = (g.nx - 1) * g.hx, Wy = (g.ny - 1) * g.hy;
        double lam1 = M_PI * M_PI * (1.0 / (Wx * Wx) + 1.0 / (Wy * Wy));
        smax = 40.0 / lam1;
    }
    int nsub = sch.nsub + (sch.nsub % 2);  // Simpson needs an even interval count

    Eigen::Map<const Eigen::VectorXd> u0(u.v.data(), u.v.size());
    Eigen::VectorXd Lu = hs.matrix() * u0;
    Eigen::VectorXd LLu = hs.matrix() * Lu;

    // small-s segments, Taylor in s
    Eigen::VectorXd I_half =
        2 * std::sqrt(s0) * Lu - (std::pow(s0, 1.5) / 3.0) * LLu;
    Eigen::VectorXd I_inv = 2 * std::sqrt(s0) * u0 - (2.0 / 3.0) * std::pow(s0, 1.5) * Lu +
                            0.2 * std::pow(s0, 2.5) * LLu;

    // march to s0 to seed the panel sweep
    Eigen::VectorXd ucur = hs.march(u0, s0 / nsub, nsub);
    double a = s0;
    while (a < smax * (1 - 1e-12)) {
        double b = std::min(2 * a, smax);
        double dt = (b - a) / nsub;
        for (int k = 0; k <= nsub; ++k) {
            double s = a + k * dt;
            double w = (k == 0 || k == nsub) ? 1.0 : (k % 2 ? 4.0 : 2.0);
            w *= dt / 3.0;
            if (sch.want_half) I_half += w * std::pow(s, -1.5) * (u0 - ucur);
            if (sch.want_inv_half) I_inv += w * std::pow(s, -0.5) * ucur;
            if (k < nsub) ucur = hs.march(ucur, dt, 1);
        }
        a = b;
    }
    if (sch.want_half) I_half += 2.0 / std::sqrt(smax) * u0;  // algebraic tail, u_s ~ 0

    SqrtPair out;
    if (sch.want_half) {
        out.half = PlaneField(g, u.parity);
        Eigen::Map<Eigen::VectorXd>(out.half.v.data(), out.half.v.size()) =
            I_half / (2 * std::sqrt(M_PI));
    }
    if (sch.want_inv_half) {
        out.inv_half = PlaneField(g, u.parity);
        Eigen::Map<Eigen::VectorXd>(out.inv_half.v.data(), out.inv_half.v.size()) =
            I_inv / std::sqrt(M_PI);
    }
    return out;
}

PlaneField heat_kernel_column(HeatSolver& hs, const Grid2D& g, const Mat2& A0, const Vec2& x0,
                              double t) {
    const double h = g.hx;
    double t0 = h * h;
    if (t <= t0) throw config_error("heat_kernel_column: t must exceed the seeding time h^2");
    PlaneField seed(g, 0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            seed.v(i, j) = gaussian_kernel(A0, Vec2(g.x(i) - x0[0], g.y(j) - x0[1]), t0);
    int nsteps = std::max(1, (int)std::ceil((t - t0) / h));
    return hs.evolve(seed, t - t0, nsteps);
}

// ===================================================================
// linear convolution via FFT
// ===================================================================

GridField kernel_convolve(const GridField& field,
                          const std::function<double(const Vec2&)>& kernel) {
    const int nx = field.g.nx, ny = field.g.ny;
    const int px = 2 * nx, py = 2 * ny;
    const double hx = field.g.hx, hy = field.g.hy;
    std::vector<std::complex<double>> fa((size_t)px * py, 0.0), fb((size_t)px * py, 0.0);
    auto at = [px](int i, int j) { return (size_t)i + (size_t)px * j; };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) fa[at(i, j)] = field.v(i, j);
    for (int b = -(ny - 1); b <= ny - 1; ++b)
        for (int a = -(nx - 1); a <= nx - 1; ++a)
            fb[at((a + px) % px, (b + py) % py)] = kernel(Vec2(a * hx, b * hy)) * hx * hy;

    auto run = [&](std::complex<double>* data, int sign) {
        fftw_plan p = fftw_plan_dft_2d(py, px, reinterpret_cast<fftw_complex*>(data),
                                       reinterpret_cast<fftw_complex*>(data), sign,
                                       FFTW_ESTIMATE);
        fftw_execute(p);
        fftw_destroy_plan(p);
    };
    run(fa.data(), FFTW_FORWARD);
    run(fb.data(), FFTW_FORWARD);
    for (size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
    run(fa.data(), FFTW_BACKWARD);
    GridField out;
    out.g = field.g;
    out.v.resize(nx, ny);
    const double norm = 1.0 / ((double)px * py);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) out.v(i, j) = fa[at(i, j)].real() * norm;
    return out;
}

// ===================================================================
// frozen-coefficient Duhamel fixed point (constant A)
// ===================================================================

DuhamelResult frozen_duhamel_constant(const GridField& v0, const Mat2& A,
                                      const DuhamelConfig& cfg,
                                      const std::function<GridField(double)>& forcing) {
    check_spd(A);
    if (cfg.nt < 3 || cfg.nt % 2 == 0) throw config_error("frozen_duhamel: nt must be odd >= 3");
    const int nt = cfg.nt;
    const double dt = cfg.T / (nt - 1);

    auto conv_at = [&](const GridField& f, double tk) {
        // kernel of d_t + b.grad + L_A^{1/2} frozen everywhere: H_A(z - b t, t)
        return kernel_convolve(
            f, [&](const Vec2& z) { return half_kernel(A, z - cfg.b * tk, tk); });
    };

    // base propagation of the initial data to each time node
    std::vector<GridField> base(nt);
    base[0] = v0;
    for (int n = 1; n < nt; ++n) base[n] = conv_at(v0, n * dt);

    std::vector<GridField> v = base;  // iterate m = 0
    DuhamelResult res;
    res.v = v.back();
    if (!forcing) {
        // for constant A and constant b every frozen-correction term in F
        // vanishes identically, so the first iterate is already the fixed point
        res.iterations = 1;
        res.deltas = {0.0};
        return res;
    }

    std::vector<GridField> F(nt);
    for (int n = 0; n < nt; ++n) F[n] = forcing(n * dt);

    double prev_delta = std::numeric_limits<double>::max();
    int grew = 0;
    for (int m = 0; m < cfg.max_iter; ++m) {
        std::vector<GridField> vn = base;
        for (int n = 1; n < nt; ++n) {
            // composite integral of K_{t_n - s} F(s) over s = 0..t_n
            for (int k = 0; k <= n; ++k) {
                double w;
                if (n % 2 == 0) {  // Simpson
                    w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
                    w *= dt / 3.0;
                } else {  // trapezoid on odd prefixes
                    w = (k == 0 || k == n) ? 0.5 * dt : dt;
                }
                GridField contrib = (k == n) ? F[k] : conv_at(F[k], (n - k) * dt);
                vn[n].v += w * contrib.v;
            }
        }
        double delta = 0;
        for (int n = 0; n < nt; ++n) delta = std::max(delta, (vn[n].v - v[n].v).abs().maxCoeff());
        v = std::move(vn);
        res.deltas.push_back(delta);
        res.iterations = m + 1;
        if (delta < cfg.tol) break;
        if (delta > prev_delta) {
            if (++grew >= 2)
                throw numerical_error(
                    "frozen_duhamel: fixed point is not contracting; shorten the horizon T");
        } else {
            grew = 0;
        }
        prev_delta = delta;
    }
    res.v = v.back();
    return res;
}

// ===================================================================
// moment-bound probe
// ===================================================================

MomentProbe moment_bound_probe(const Mat2& A, double beta, int j, double h, double t) {
    check_spd(A);
    if (beta < 0 || beta >= 1 || (j != 0 && j != 1))
        throw config_error("moment_bound_probe: beta in [0,1), j in {0,1}");
    Mat2 Ai = A.inverse();
    double det_s = std::sqrt(A.determinant());
    auto gradH = [&](const Vec2& z) -> Vec2 {
        double q = z.dot(Ai * z);
        return (-3.0 * kC1 * t / (det_s * std::pow(t * t + q, 2.5))) * (Ai * z);
    };
    auto integrand = [&](const Vec2& z) {
        Vec2 zh = z + Vec2(h, 0);
        if (j == 0) return std::abs(half_kernel(A, zh, t) - half_kernel(A, z, t));
        return (gradH(zh) - gradH(z)).norm();
    };
    const int nr = 560, nphi = 96;
    double rmin = 1e-5 * std::min(t, h), rmax = 2e4 * std::max({t, h, 1.0});
    double du = std::log(rmax / rmin) / (nr - 1);
    double acc = 0;
    for (int ir = 0; ir < nr; ++ir) {
        double r = rmin * std::exp(ir * du);
        double wr = (ir == 0 || ir == nr - 1 ? 0.5 : 1.0) * du * r * r;
        double ring = 0;
        for (int ip = 0; ip < nphi; ++ip) {
            double phi = 2 * M_PI * ip / nphi;
            Vec2 z(r * std::cos(phi), r * std::sin(phi));
            ring += integrand(z) * std::pow(r, beta);
        }
        acc += wr * ring * 2 * M_PI / nphi;
    }
    MomentProbe out;
    out.lhs = acc;
    out.rhs = std::pow(std::min(h / t, 1.0), 1.0 - beta) * std::pow(h, beta) / std::pow(t, j);
    out.ratio = out.lhs / out.rhs;
    return out;
}

// ===================================================================
// certificate families
// ===================================================================

GridField random_band_field(const Grid2D& g, Rng& rng, double window_r, double k_band) {
    int n_modes = (int)rng.uniform_int(8, 32);
    struct Mode {
        double kx, ky, amp, phase;
    };
    std::vector<Mode> modes(n_modes);
    for (auto& m : modes) {
        double ang = rng.uniform(0, 2 * M_PI);
        double mag = k_band * rng.uniform(0.25, 1.0);
        m = {mag * std::cos(ang), mag * std::sin(ang), rng.uniform(-1.0, 1.0) / n_modes,
             rng.uniform(0, 2 * M_PI)};
    }
    RadialCutoff win{Vec2(0, 0), 0.6 * window_r, window_r};
    GridField out;
    out.g = g;
    out.v.resize(g.nx, g.ny);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            Vec2 x(g.x(i), g.y(j));
            double w = win.value(x);
            double s = 0;
            if (w > 0)
                for (const auto& m : modes)
                    s += m.amp * std::cos(m.kx * x[0] + m.ky * x[1] + m.phase);
            out.v(i, j) = w * s;
        }
    return out;
}

GridField moment_free_band_field(const Grid2D& g, Rng& rng, double plateau, double window_r,
                                 double k_band, int order, int n_modes) {
    RadialCutoff win{Vec2(0, 0), plateau, window_r};
    GridField u;
    u.g = g;
    u.v.resize(g.nx, g.ny);
    std::vector<std::array<double, 4>> modes(n_modes);
    for (auto& m : modes) {
        double ang = rng.uniform(0, 2 * M_PI);
        double mag = k_band * rng.uniform(0.25, 1.0);
        m = {mag * std::cos(ang), mag * std::sin(ang), rng.uniform(-1.0, 1.0) / n_modes,
             rng.uniform(0, 2 * M_PI)};
    }
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            Vec2 x(g.x(i), g.y(j));
            double w = win.value(x), s = 0;
            if (w > 0)
                for (const auto& m : modes) s += m[2] * std::cos(m[0] * x[0] + m[1] * x[1] + m[3]);
            u.v(i, j) = w * s;
        }
    // remove bump-weighted polynomial moments up to the requested order
    std::vector<std::array<int, 2>> pows;
    for (int d = 0; d <= order; ++d)
        for (int px = 0; px <= d; ++px) pows.push_back({d - px, px});
    const int nb = (int)pows.size();
    std::vector<Eigen::ArrayXXd> basis(nb, Eigen::ArrayXXd(g.nx, g.ny));
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            Vec2 x(g.x(i), g.y(j));
            double b = win.value(x);
            for (int a = 0; a < nb; ++a)
                basis[a](i, j) = b * std::pow(x[0], pows[a][0]) * std::pow(x[1], pows[a][1]);
        }
    auto mom = [&](const Eigen::ArrayXXd& f, int px, int py) {
        double s = 0;
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                s += f(i, j) * std::pow(g.x(i), px) * std::pow(g.y(j), py);
        return s;
    };
    Eigen::MatrixXd M(nb, nb);
    Eigen::VectorXd r(nb);
    for (int a = 0; a < nb; ++a) {
        r[a] = mom(u.v, pows[a][0], pows[a][1]);
        for (int b = 0; b < nb; ++b) M(a, b) = mom(basis[b], pows[a][0], pows[a][1]);
    }
    Eigen::VectorXd c = M.fullPivLu().solve(r);
    for (int a = 0; a < nb; ++a) u.v -= c[a] * basis[a];
    return u;
}

namespace {
double window_radius(const Grid2D& g) { return 0.85 * std::min(-g.x0, -g.y0); }

// finite difference along e1 by an exact grid shift
GridField delta_shift(const GridField& u, int m) {
    GridField d;
    d.g = u.g;
    d.v = Eigen::ArrayXXd::Zero(u.g.nx, u.g.ny);
    for (int i = 0; i < u.g.nx; ++i) {
        int ip = i + m;
        for (int j = 0; j < u.g.ny; ++j)
            d.v(i, j) = (ip < u.g.nx ? u.v(ip, j) : 0.0) - u.v(i, j);
    }
    return d;
}
}  // namespace

BoundCertificate certificate_pointwise_z1(const Grid2D& g, int n_fields, uint64_t seed) {
    SingularScheme sch;
    sch.hess_order = 2;  // keeps the discrete integrand a sum of squares
    SingularTables tab = build_singular_tables(g, Mat2::Identity(), sch);
    BoundCertificate cert;
    cert.id = "pointwise_z1";
    cert.n_fields = n_fields;
    cert.seed = seed;
    cert.min_pointwise = std::numeric_limits<double>::max();
    cert.min_ratio = std::numeric_limits<double>::max();
    for (int f = 0; f < n_fields; ++f) {
        Rng rng(seed, "z1 field " + std::to_string(f));
        GridField v = random_band_field(g, rng, window_radius(g));
        GridField v2;
        v2.g = g;
        v2.v = v.v * v.v;
        GridField s1 = sqrt_const(v, tab), s2 = sqrt_const(v2, tab);
        GridField D = d_functional(v, tab);
        Eigen::ArrayXXd W = v.v * s1.v - 0.5 * s2.v;
        cert.min_pointwise = std::min(cert.min_pointwise, W.minCoeff());
        double dmax = D.v.maxCoeff();
        double mr = std::numeric_limits<double>::max();
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                if (D.v(i, j) > 1e-12 * dmax) mr = std::min(mr, W(i, j) / D.v(i, j));
        cert.per_field.push_back(mr);
        cert.min_ratio = std::min(cert.min_ratio, mr);
    }
    return cert;
}

namespace {
BoundCertificate cubic_cert(const Grid2D& g, int n_fields, uint64_t seed,
                            const std::vector<double>& hs, bool derivative_input,
                            const char* id, const char* label) {
    SingularTables tab = build_singular_tables(g, Mat2::Identity());
    BoundCertificate cert;
    cert.id = id;
    cert.n_fields = n_fields;
    cert.seed = seed;
    cert.min_ratio = std::numeric_limits<double>::max();
    for (int f = 0; f < n_fields; ++f) {
        Rng rng(seed, std::string(label) + std::to_string(f));
        GridField u = random_band_field(g, rng, window_radius(g));
        if (derivative_input) u = diff_x(u);
        double unorm = u.max_abs();
        double mr = std::numeric_limits<double>::max();
        for (double h : hs) {
            int m = std::max(1, (int)std::lround(h / g.hx));
            double he = m * g.hx;
            GridField d = delta_shift(u, m);
            GridField D = d_functional(d, tab);
            double floor = 1e-6 * d.max_abs();
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) {
                    double dv = std::abs(d.v(i, j));
                    if (dv <= floor) continue;
                    mr = std::min(mr, D.v(i, j) * unorm * he / (dv * dv * dv));
                }
        }
        cert.per_field.push_back(mr);
        cert.min_ratio = std::min(cert.min_ratio, mr);
    }
    return cert;
}
}  // namespace

BoundCertificate certificate_finite_diff_z16(const Grid2D& g, int n_fields, uint64_t seed,
                                             const std::vector<double>& hs) {
    return cubic_cert(g, n_fields, seed, hs, false, "finite_diff_z16", "z16 field ");
}

BoundCertificate certificate_cubic_corcorv(const Grid2D& g, int n_fields, uint64_t seed,
                                           const std::vector<double>& hs) {
    return cubic_cert(g, n_fields, seed, hs, true, "cubic_corcorv", "corcorv field ");
}

BoundCertificate certificate_transport_z22(const Grid2D& g, int n_fields, uint64_t seed,
                                           const std::vector<double>& hs) {
    SingularTables tab = build_singular_tables(g, Mat2::Identity());
    SpMat L = assemble_L(ExtendedCoefficients::identity(g));
    HeatSolver hsolver(L);
    BoundCertificate cert;
    cert.id = "transport_z22";
    cert.n_fields = n_fields;
    cert.seed = seed;
    cert.min_ratio = std::numeric_limits<double>::max();
    for (int f = 0; f < n_fields; ++f) {
        Rng rng(seed, "z22 field " + std::to_string(f));
        GridField v = random_band_field(g, rng, window_radius(g));
        double vn = v.max_abs();
        PlaneField pv(g, 0);
        pv.v = v.v;
        MarchScheme ms;
        ms.want_half = false;
        PlaneField w = sqrt_variable(pv, hsolver, ms).inv_half;  // L^{-1/2} v
        GridField wx = diff_x(w.as_grid()), wy = diff_y(w.as_grid());
        double mr = std::numeric_limits<double>::max();
        for (double h : hs) {
            int m = std::max(1, (int)std::lround(h / g.hx));
            double he = m * g.hx;
            GridField dv = delta_shift(v, m);
            GridField dwx = delta_shift(wx, m), dwy = delta_shift(wy, m);
            GridField D = d_functional(dv, tab);
            double logfac = std::pow(std::log(2.0 / he), 6.0) * he * he * vn * vn;
            double floor = 1e-6 * dv.max_abs();
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) {
                    double dvv = std::abs(dv.v(i, j));
                    if (dvv <= floor) continue;
                    double lhs = std::hypot(dwx.v(i, j), dwy.v(i, j)) * dvv * dvv / he;
                    if (lhs <= 0) continue;
                    double rhs = vn * (D.v(i, j) + logfac);
                    mr = std::min(mr, rhs / lhs);
                }
        }
        cert.per_field.push_back(mr);
        cert.min_ratio = std::min(cert.min_ratio, mr);
    }
    return cert;
}

}  // namespace sqg
