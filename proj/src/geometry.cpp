#include "sqg/geometry.hpp"

#include <cmath>

namespace sqg {

// ===================================================================
// smooth step
// ===================================================================

static double expstep(double r) { return r > 0 ? std::exp(-1.0 / r) : 0.0; }

double smooth01(double r) {
    if (r <= 0) return 0.0;
    if (r >= 1) return 1.0;
    double f = expstep(r), g = expstep(1 - r);
    return f / (f + g);
}

double smooth01_deriv(double r) {
    if (r <= 0 || r >= 1) return 0.0;
    double f = expstep(r), g = expstep(1 - r);
    double s = f + g;
    return f * g * (1.0 / (r * r) + 1.0 / ((1 - r) * (1 - r))) / (s * s);
}

// ===================================================================
// BoundaryGraph
// ===================================================================

BoundaryGraph BoundaryGraph::quadratic(double eps, double ell, double H, double C0) {
    if (!(eps > 0) || !(ell > 0) || !(H > 0) || !(C0 > 0))
        throw config_error("BoundaryGraph: parameters must be positive");
    if (!(H > eps * ell))
        throw config_error("BoundaryGraph: requires H > eps*ell");
    BoundaryGraph g;
    g.eps = eps;
    g.ell = ell;
    g.H = H;
    g.C0 = C0;
    g.setup();
    return g;
}

BoundaryGraph BoundaryGraph::flat(double eps, double ell, double H) {
    BoundaryGraph g = quadratic(eps, ell, H, 1.0);
    g.flat_ = true;
    return g;
}

void BoundaryGraph::setup() {
    // trapezoid phi'' profile; the negative plateau depth balances the
    // integral so phi'(ell) = 0
    a1_ = 0.45 * eps / C0;
    a2_ = a1_ + 0.4 * eps / C0;
    a3_ = 0.7 * ell;
    if (!(a2_ < a3_))
        throw config_error("BoundaryGraph: eps too large relative to ell");
    double num = C0 * a1_ + 0.5 * C0 * (a2_ - a1_);
    double den = 0.5 * (a2_ - a1_) + (a3_ - a2_) + 0.5 * (ell - a3_);
    cneg_ = num / den;
    if (cneg_ > C0)
        throw config_error("BoundaryGraph: slope profile exceeds curvature bound");
}

// C^1 ramp (smootherstep) and its integral; int_0^1 S = 1/2, matching the
// linear ramp so the c balance below is unaffected
static double sstep(double u) { return u * u * (3 - 2 * u); }
static double sstep_int(double u) { return u * u * u * (1 - 0.5 * u); }

double BoundaryGraph::phi_pp(double x1) const {
    if (flat_) return 0.0;
    double x = std::abs(x1);
    if (x <= a1_) return C0;
    if (x <= a2_) return C0 - (C0 + cneg_) * sstep((x - a1_) / (a2_ - a1_));
    if (x <= a3_) return -cneg_;
    if (x <= ell) return -cneg_ * (1 - sstep((x - a3_) / (ell - a3_)));
    return 0.0;
}

double BoundaryGraph::phi_p(double x1) const {
    if (flat_) return 0.0;
    double x = std::abs(x1), s = x1 < 0 ? -1.0 : 1.0;
    double w1 = a2_ - a1_, w2 = ell - a3_;
    double p1 = C0 * a1_;
    double p2 = p1 + C0 * w1 - (C0 + cneg_) * w1 * 0.5;
    double p3 = p2 - cneg_ * (a3_ - a2_);
    if (x <= a1_) return s * C0 * x;
    if (x <= a2_) {
        double u = (x - a1_) / w1;
        return s * (p1 + C0 * w1 * u - (C0 + cneg_) * w1 * sstep_int(u));
    }
    if (x <= a3_) return s * (p2 - cneg_ * (x - a2_));
    if (x <= ell) {
        double u = (x - a3_) / w2;
        return s * (p3 - cneg_ * w2 * (u - sstep_int(u)));
    }
    return 0.0;
}

double BoundaryGraph::phi(double x1) const {
    if (flat_) return 0.0;
    double x = std::abs(x1);
    if (x <= a1_) return 0.5 * C0 * x * x;
    // phi' is piecewise quartic; 6-point Gauss per piece is exact
    static const double gx[6] = {-0.9324695142031521, -0.6612093864662645,
                                 -0.2386191860831969, 0.2386191860831969,
                                 0.6612093864662645,  0.9324695142031521};
    static const double gw[6] = {0.1713244923791704, 0.3607615730481386,
                                 0.4679139345726910, 0.4679139345726910,
                                 0.3607615730481386, 0.1713244923791704};
    double acc = 0.5 * C0 * a1_ * a1_;
    double lo = a1_;
    for (double bp : {a2_, a3_, ell, x}) {
        double hi = std::min(x, bp);
        if (hi <= lo) {
            if (bp >= x) break;
            continue;
        }
        double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        for (int q = 0; q < 6; ++q) acc += half * gw[q] * phi_p(mid + half * gx[q]);
        lo = hi;
        if (hi >= x) break;
    }
    return acc;
}

double BoundaryGraph::chi(double x2) const { return smooth01((2 * H - std::abs(x2)) / H); }

double BoundaryGraph::chi_p(double x2) const {
    double s = x2 < 0 ? 1.0 : -1.0;
    return s / H * smooth01_deriv((2 * H - std::abs(x2)) / H);
}

double BoundaryGraph::max_slope() const {
    double m = 0;
    for (int i = 0; i <= 4000; ++i) m = std::max(m, std::abs(phi_p(i * ell / 4000)));
    return m;
}

// ===================================================================
// gamma by backward characteristic shooting
// ===================================================================

namespace {

struct CharState {
    double xi, lg;  // horizontal position, log gamma
};

// one RK4 step of length h along the characteristic, oriented so the
// vertical coordinate moves by dir*h (dir = -1: descend toward Gamma)
inline CharState rk4_step(const BoundaryGraph& g, CharState s, double h, double dir) {
    // moving along +eta: dxi/deta = -phi', dlg/deta = phi''; oriented step
    // deta = dir*h, so rhs carries the dir factor
    auto rx = [&](double xi) { return dir * (-g.phi_p(xi)); };
    auto rl = [&](double xi) { return dir * g.phi_pp(xi); };
    double k1x = rx(s.xi), k1l = rl(s.xi);
    double k2x = rx(s.xi + 0.5 * h * k1x), k2l = rl(s.xi + 0.5 * h * k1x);
    double k3x = rx(s.xi + 0.5 * h * k2x), k3l = rl(s.xi + 0.5 * h * k2x);
    double k4x = rx(s.xi + h * k3x), k4l = rl(s.xi + h * k3x);
    return {s.xi + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x),
            s.lg + h / 6 * (k1l + 2 * k2l + 2 * k3l + k4l)};
}

double shoot_gamma(const BoundaryGraph& g, double x1, double x2, double ds) {
    if (g.is_flat()) return 1.0;
    double q0 = x2 - g.phi(x1);
    if (std::abs(q0) < 1e-15) return 1.0;
    double dir = q0 > 0 ? -1.0 : 1.0;  // vertical travel direction toward Gamma
    CharState s{x1, 0.0};
    double eta = x2;
    long max_steps = static_cast<long>(std::abs(q0) / ds * 1.2) + 16;
    for (long n = 0; n < max_steps; ++n) {
        CharState nxt = rk4_step(g, s, ds, dir);
        double eta2 = eta + dir * ds;
        double q = eta2 - g.phi(nxt.xi);
        if (q * q0 <= 0.0) {
            // bisect the final partial step
            double lo = 0.0, hi = ds;
            CharState land = nxt;
            for (int b = 0; b < 60; ++b) {
                double mid = 0.5 * (lo + hi);
                CharState trial = rk4_step(g, s, mid, dir);
                double qt = eta + dir * mid - g.phi(trial.xi);
                if (qt * q0 <= 0.0) {
                    hi = mid;
                    land = trial;
                } else {
                    lo = mid;
                }
            }
            // lg accumulated from the point down to Gamma equals
            // lg(Gamma) - lg(point) with lg(Gamma) = 0
            return std::exp(-land.lg);
        }
        s = nxt;
        eta = eta2;
    }
    throw numerical_error("solve_gamma: characteristic failed to reach the data curve");
}

}  // namespace

double GammaField::evaluate(double x1, double x2) const {
    return shoot_gamma(graph, x1, x2, ds);
}

double GammaField::pde_residual() const {
    double worst = 0;
    for (int j = 1; j + 1 < grid.ny; ++j)
        for (int i = 1; i + 1 < grid.nx; ++i) {
            double gx = (val(i + 1, j) - val(i - 1, j)) / (2 * grid.hx);
            double gy = (val(i, j + 1) - val(i, j - 1)) / (2 * grid.hy);
            double r = -graph.phi_p(grid.x(i)) * gx + gy -
                       graph.phi_pp(grid.x(i)) * val(i, j);
            worst = std::max(worst, std::abs(r));
        }
    return worst;
}

GammaField solve_gamma(const BoundaryGraph& graph, const Grid2D& grid, double ds) {
    if (!(ds > 0)) throw config_error("solve_gamma: ds must be positive");
    GammaField f;
    f.graph = graph;
    f.grid = grid;
    f.ds = ds;
    f.val.resize(grid.nx, grid.ny);
#pragma omp parallel for
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i)
            f.val(i, j) = shoot_gamma(graph, grid.x(i), grid.y(j), ds);
    return f;
}

// ===================================================================
// DiffeoMap
// ===================================================================

double DiffeoMap::I_exact(double x1, double x2) const {
    // composite Simpson on [0, x1] with shooting at nodes and midpoints
    if (std::abs(x1) < 1e-15 || graph.is_flat()) return 0.0;
    // fixed interval count: keeps I_exact smooth in x1 (a count tied to
    // ceil(|x1|/h) would jump under the finite differences taken of it)
    int n = 384;
    double h = x1 / n, acc = 0.0;
    double prev = gamma.evaluate(0.0, x2) - 1.0;
    for (int k = 0; k < n; ++k) {
        double mid = gamma.evaluate((k + 0.5) * h, x2) - 1.0;
        double nxt = gamma.evaluate((k + 1.0) * h, x2) - 1.0;
        acc += h / 6.0 * (prev + 4 * mid + nxt);
        prev = nxt;
    }
    return acc;
}

Vec2 DiffeoMap::Y(const Vec2& x) const {
    double c = graph.chi(x(1));
    double y1 = x(0);
    if (c != 0.0) {
        GridField If;
        If.g = grid;
        If.v = Ifield;  // cheap shallow-ish copy of array; fine at this size
        y1 += c * interp_bicubic(If, x(0), x(1));
    }
    return {y1, x(1) - graph.phi(x(0))};
}

Vec2 DiffeoMap::Y_exact(const Vec2& x) const {
    double c = graph.chi(x(1));
    double y1 = x(0) + (c != 0.0 ? c * I_exact(x(0), x(1)) : 0.0);
    return {y1, x(1) - graph.phi(x(0))};
}

Mat2 DiffeoMap::grad_Y(const Vec2& x) const {
    double c = graph.chi(x(1)), cp = graph.chi_p(x(1));
    double g = (c != 0.0 || cp != 0.0) ? gamma.evaluate(x(0), x(1)) : 1.0;
    double I = 0.0;
    if (cp != 0.0) {
        GridField If;
        If.g = grid;
        If.v = Ifield;
        I = interp_bicubic(If, x(0), x(1));
    }
    double pp = graph.phi_p(x(0));
    Mat2 M;
    M(0, 0) = 1.0 + c * (g - 1.0);
    M(0, 1) = c * g * pp + cp * I;  // uses d2 I = phi' gamma
    M(1, 0) = -pp;
    M(1, 1) = 1.0;
    return M;
}

Mat2 DiffeoMap::grad_Y_fd(const Vec2& x, double delta) const {
    Mat2 M;
    Vec2 e1{delta, 0}, e2{0, delta};
    Vec2 ypx = Y_exact(x + e1), ymx = Y_exact(x - e1);
    Vec2 ypy = Y_exact(x + e2), ymy = Y_exact(x - e2);
    M(0, 0) = (ypx(0) - ymx(0)) / (2 * delta);
    M(0, 1) = (ypy(0) - ymy(0)) / (2 * delta);
    M(1, 0) = (ypx(1) - ymx(1)) / (2 * delta);
    M(1, 1) = (ypy(1) - ymy(1)) / (2 * delta);
    return M;
}

double DiffeoMap::det_Y(const Vec2& x) const { return grad_Y(x).determinant(); }

Vec2 DiffeoMap::X(const Vec2& y) const {
    Vec2 x = y;
    for (int it = 0; it < 50; ++it) {
        Vec2 r = Y(x) - y;
        if (r.norm() < 1e-12) return x;
        x -= grad_Y(x).partialPivLu().solve(r);
    }
    double res = (Y(x) - y).norm();
    throw numerical_error("invert_diffeo: Newton stalled, |Y(x)-y| = " + std::to_string(res));
}

DiffeoMap build_diffeo(const BoundaryGraph& graph, const GammaField& gamma) {
    DiffeoMap m;
    m.graph = graph;
    m.gamma = gamma;
    m.grid = gamma.grid;
    const Grid2D& g = m.grid;

    // locate x = 0 column, then cumulative Simpson per row both ways
    int i0 = (int)std::lround(-g.x0 / g.hx);
    if (i0 < 0 || i0 >= g.nx || std::abs(g.x(i0)) > 1e-12)
        throw config_error("build_diffeo: gamma grid must contain the x1 = 0 column");
    m.Ifield = Eigen::ArrayXXd::Zero(g.nx, g.ny);
    for (int j = 0; j < g.ny; ++j) {
        double y = g.y(j);
        for (int i = i0; i + 1 < g.nx; ++i) {
            double mid = gamma.evaluate(g.x(i) + 0.5 * g.hx, y) - 1.0;
            m.Ifield(i + 1, j) =
                m.Ifield(i, j) + g.hx / 6.0 * ((gamma.val(i, j) - 1.0) + 4 * mid +
                                               (gamma.val(i + 1, j) - 1.0));
        }
        for (int i = i0; i > 0; --i) {
            double mid = gamma.evaluate(g.x(i) - 0.5 * g.hx, y) - 1.0;
            m.Ifield(i - 1, j) =
                m.Ifield(i, j) - g.hx / 6.0 * ((gamma.val(i, j) - 1.0) + 4 * mid +
                                               (gamma.val(i - 1, j) - 1.0));
        }
    }

    // invariants over the grid
    double dev = 0, mind = 1e300;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double c = graph.chi(g.y(j)), cp = graph.chi_p(g.y(j));
            double ga = gamma.val(i, j), pp = graph.phi_p(g.x(i));
            Mat2 M;
            M << 1.0 + c * (ga - 1.0), c * ga * pp + cp * m.Ifield(i, j), -pp, 1.0;
            Mat2 D = M - Mat2::Identity();
            dev = std::max(dev, std::sqrt((D.transpose() * D).eigenvalues().real().maxCoeff()));
            mind = std::min(mind, M.determinant());
        }
    m.report.max_grad_dev = dev;
    m.report.min_det = mind;
    if (dev > 0.25)
        throw numerical_error(
            "build_diffeo: ||grad Y - I|| = " + std::to_string(dev) +
            " > 1/4; reduce eps or the cutoff height H");
    if (mind < 0.5)
        throw numerical_error("build_diffeo: det grad Y too small (" +
                              std::to_string(mind) + ")");

    // independent cross-term check near Gamma: FD of Y_exact against the
    // analytic grad Y2 row
    if (!graph.is_flat()) {
        double worst = 0;
        for (int a = 0; a <= 20; ++a)
            for (int b = 1; b <= 6; ++b) {
                double x1 = -0.7 * graph.ell + a * (1.4 * graph.ell / 20);
                double x2 = graph.phi(x1) + b * (0.5 * graph.H / 6);
                Mat2 M = m.grad_Y_fd({x1, x2});
                worst = std::max(worst,
                                 std::abs(M(0, 0) * (-graph.phi_p(x1)) + M(0, 1)));
            }
        m.report.max_cross_strip = worst;
    }
    return m;
}

ConjugatedCoefficients conjugated_coefficients(const DiffeoMap& map, const Grid2D& ygrid) {
    ConjugatedCoefficients out;
    out.grid = ygrid;
    out.a11.resize(ygrid.nx, ygrid.ny);
    out.a12.resize(ygrid.nx, ygrid.ny);
    out.a22.resize(ygrid.nx, ygrid.ny);
    out.abold.resize(ygrid.nx, ygrid.ny);
#pragma omp parallel for
    for (int j = 0; j < ygrid.ny; ++j)
        for (int i = 0; i < ygrid.nx; ++i) {
            Vec2 y{ygrid.x(i), ygrid.y(j)};
            Vec2 x = map.X(y);
            Mat2 M = map.grad_Y(x);
            out.a11(i, j) = M(0, 0) * M(0, 0) + M(0, 1) * M(0, 1);
            out.a12(i, j) = M(0, 0) * M(1, 0) + M(0, 1) * M(1, 1);
            out.a22(i, j) = M(1, 0) * M(1, 0) + M(1, 1) * M(1, 1);
            out.abold(i, j) = M.determinant();
        }
    return out;
}

}  // namespace sqg
