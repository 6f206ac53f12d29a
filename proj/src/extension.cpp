#include "sqg/extension.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace sqg {

// ===================================================================
// plane grids and parity
// ===================================================================

Grid2D plane_grid(double half_width, double h) {
    if (half_width <= 0 || h <= 0) throw config_error("plane_grid: bad extent");
    int n = (int)std::ceil(half_width / h - 1e-9);
    Grid2D g;
    g.nx = 2 * n + 1;
    g.ny = 2 * n + 1;
    g.hx = h;
    g.hy = h;
    g.x0 = -n * h;
    g.y0 = -n * h;
    return g;
}

Grid2D upper_grid(double half_width, double h) {
    Grid2D g = plane_grid(half_width, h);
    g.ny = (g.ny + 1) / 2;
    g.y0 = 0.0;
    return g;
}

PlaneField extend(const GridField& upper, int parity, double trace_tol) {
    if (parity != 1 && parity != -1) throw config_error("extend: parity must be +1 or -1");
    if (std::abs(upper.g.y0) > 1e-12) throw config_error("extend: field must start at y2 = 0");
    const int nu = upper.g.ny;
    Grid2D pg = upper.g;
    pg.ny = 2 * nu - 1;
    pg.y0 = -(nu - 1) * upper.g.hy;
    PlaneField out(pg, parity);
    if (parity == -1) {
        double scale = upper.max_abs();
        double trace = upper.v.col(0).abs().maxCoeff();
        if (trace > trace_tol * (1.0 + scale)) {
            std::ostringstream os;
            os << "extend: odd extension of a field with nonzero trace (|f|_{y2=0} = " << trace
               << "); subtract the trace or use the even extension";
            throw config_error(os.str());
        }
    }
    const int j0 = nu - 1;  // row index of y2 = 0 in the plane grid
    for (int j = 0; j < nu; ++j) {
        out.v.col(j0 + j) = upper.v.col(j);
        if (j > 0) out.v.col(j0 - j) = parity * upper.v.col(j);
    }
    if (parity == -1) out.v.col(j0).setZero();
    return out;
}

GridField upper_half(const PlaneField& f) {
    const int j0 = (f.g.ny - 1) / 2;
    GridField out;
    out.g = f.g;
    out.g.ny = f.g.ny - j0;
    out.g.y0 = f.g.y(j0);
    out.v = f.v.rightCols(f.g.ny - j0);
    return out;
}

PlaneField pf_diff_x(const PlaneField& f) {
    PlaneField out(f.g, f.parity);
    out.v = diff_x(f.as_grid()).v;
    return out;
}

PlaneField pf_diff_y(const PlaneField& f) {
    PlaneField out(f.g, -f.parity);
    out.v = diff_y(f.as_grid()).v;
    return out;
}

double parity_defect(const PlaneField& f) {
    if (f.parity == 0) return 0.0;
    const int ny = f.g.ny;
    double worst = 0.0;
    for (int j = 0; j < ny; ++j) {
        int jm = ny - 1 - j;
        worst = std::max(worst, (f.v.col(j) - f.parity * f.v.col(jm)).abs().maxCoeff());
    }
    return worst;
}

// ===================================================================
// extended operators
// ===================================================================

ExtendedCoefficients ExtendedCoefficients::identity(const Grid2D& grid) {
    ExtendedCoefficients c;
    c.g = grid;
    c.a11 = Eigen::ArrayXXd::Ones(grid.nx, grid.ny);
    c.a22 = c.a11;
    c.abold = c.a11;
    c.a12 = Eigen::ArrayXXd::Zero(grid.nx, grid.ny);
    return c;
}

ExtendedCoefficients ExtendedCoefficients::from_upper(const ConjugatedCoefficients& cc,
                                                      double trace_tol) {
    auto mirror = [&](const Eigen::ArrayXXd& up, int parity) {
        GridField f;
        f.g = cc.grid;
        f.v = up;
        return extend(f, parity, trace_tol).v;
    };
    ExtendedCoefficients c;
    const int nu = cc.grid.ny;
    c.g = cc.grid;
    c.g.ny = 2 * nu - 1;
    c.g.y0 = -(nu - 1) * cc.grid.hy;
    c.a11 = mirror(cc.a11, 1);
    c.a22 = mirror(cc.a22, 1);
    c.a12 = mirror(cc.a12, -1);
    c.abold = mirror(cc.abold, 1);
    return c;
}

double ExtendedCoefficients::min_eig() const {
    double m = std::numeric_limits<double>::max();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double tr = a11(i, j) + a22(i, j);
            double det = a11(i, j) * a22(i, j) - a12(i, j) * a12(i, j);
            double disc = std::sqrt(std::max(0.0, tr * tr / 4 - det));
            m = std::min(m, tr / 2 - disc);
        }
    return m;
}

SpMat assemble_L(const ExtendedCoefficients& c) {
    const int nx = c.g.nx, ny = c.g.ny;
    const double ihx2 = 1.0 / (c.g.hx * c.g.hx), ihy2 = 1.0 / (c.g.hy * c.g.hy);
    const int N = nx * ny;
    auto id = [nx](int i, int j) { return i + nx * j; };
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve((size_t)N * 10);
    // diagonal coefficients: flux form on half-edges, ghost zeros outside
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            int p = id(i, j);
            if (i + 1 < nx) {
                double w = 0.5 * (c.a11(i, j) + c.a11(i + 1, j)) * ihx2;
                int q = id(i + 1, j);
                trip.emplace_back(p, p, w);
                trip.emplace_back(q, q, w);
                trip.emplace_back(p, q, -w);
                trip.emplace_back(q, p, -w);
            }
            if (j + 1 < ny) {
                double w = 0.5 * (c.a22(i, j) + c.a22(i, j + 1)) * ihy2;
                int q = id(i, j + 1);
                trip.emplace_back(p, p, w);
                trip.emplace_back(q, q, w);
                trip.emplace_back(p, q, -w);
                trip.emplace_back(q, p, -w);
            }
            // boundary ghost edges keep the Dirichlet form coercive
            if (i == 0 || i == nx - 1) trip.emplace_back(p, p, c.a11(i, j) * ihx2);
            if (j == 0 || j == ny - 1) trip.emplace_back(p, p, c.a22(i, j) * ihy2);
        }
    }
    // mixed coefficient: centered symmetric pairing a12 (D1 f D2 g + D2 f D1 g)
    const double cx = 0.5 / c.g.hx, cy = 0.5 / c.g.hy;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            double a = c.a12(i, j);
            if (a == 0.0) continue;
            for (int sx : {-1, 1}) {
                int ii = i + sx;
                if (ii < 0 || ii >= nx) continue;
                for (int sy : {-1, 1}) {
                    int jj = j + sy;
                    if (jj < 0 || jj >= ny) continue;
                    double val = a * (sx * cx) * (sy * cy);
                    trip.emplace_back(id(ii, j), id(i, jj), val);
                    trip.emplace_back(id(i, jj), id(ii, j), val);
                }
            }
        }
    }
    SpMat L(N, N);
    L.setFromTriplets(trip.begin(), trip.end());
    L.makeCompressed();
    return L;
}

PlaneField apply_L(const SpMat& L, const PlaneField& f) {
    PlaneField out(f.g, f.parity);
    Eigen::Map<const Eigen::VectorXd> vin(f.v.data(), f.v.size());
    Eigen::Map<Eigen::VectorXd>(out.v.data(), out.v.size()) = L * vin;
    return out;
}

PlaneField apply_B(const ExtendedCoefficients& c, const PlaneField& f) {
    GridField ab;
    ab.g = c.g;
    ab.v = c.abold;
    Eigen::ArrayXXd d1a = diff_x(ab).v, d2a = diff_y(ab).v;
    Eigen::ArrayXXd d1f = diff_x(f.as_grid()).v, d2f = diff_y(f.as_grid()).v;
    PlaneField out(f.g, f.parity);
    out.v = (c.a11 * d1a * d1f + c.a12 * (d1a * d2f + d2a * d1f) + c.a22 * d2a * d2f) / c.abold;
    out.parity = 0;  // the product rule does not preserve a single parity tag
    if (f.parity != 0) out.parity = f.parity;
    return out;
}

Eigen::SimplicialLDLT<SpMat>& HeatSolver::factor(double dt) {
    long long key = 0;
    std::memcpy(&key, &dt, sizeof(double));
    auto it = cache_.find(key);
    if (it == cache_.end()) {
        SpMat A = L_ * (0.5 * dt);
        SpMat I(L_.rows(), L_.cols());
        I.setIdentity();
        A = A + I;
        auto f = std::make_shared<Eigen::SimplicialLDLT<SpMat>>();
        f->compute(A);
        if (f->info() != Eigen::Success)
            throw numerical_error("HeatSolver: Crank-Nicolson factorization failed");
        it = cache_.emplace(key, f).first;
    }
    return *it->second;
}

Eigen::VectorXd HeatSolver::march(const Eigen::VectorXd& v, double dt, int nsteps) {
    auto& fac = factor(dt);
    Eigen::VectorXd u = v;
    for (int s = 0; s < nsteps; ++s) {
        Eigen::VectorXd rhs = u - 0.5 * dt * (L_ * u);
        u = fac.solve(rhs);
    }
    return u;
}

PlaneField HeatSolver::evolve(const PlaneField& f, double t, int nsteps) {
    if (t < 0) throw config_error("HeatSolver: negative time");
    PlaneField out = f;
    if (t == 0 || nsteps <= 0) return out;
    Eigen::Map<const Eigen::VectorXd> vin(f.v.data(), f.v.size());
    Eigen::VectorXd u = march(vin, t / nsteps, nsteps);
    Eigen::Map<Eigen::VectorXd>(out.v.data(), out.v.size()) = u;
    return out;
}

// ===================================================================
// radial cutoffs
// ===================================================================

namespace {
// expstep e^{-1/u} with first two derivatives
struct Exp3 {
    double f, fp, fpp;
};
Exp3 expstep(double u) {
    if (u <= 0) return {0, 0, 0};
    double f = std::exp(-1.0 / u);
    double u2 = u * u;
    return {f, f / u2, f * (1.0 / (u2 * u2) - 2.0 / (u2 * u))};
}
// sigma(u) = f(u)/(f(u)+f(1-u)) with derivatives
void sigma3(double u, double& s, double& sp, double& spp) {
    if (u <= 0) {
        s = sp = spp = 0;
        return;
    }
    if (u >= 1) {
        s = 1;
        sp = spp = 0;
        return;
    }
    Exp3 a = expstep(u), b = expstep(1.0 - u);
    double g = b.f, gp = -b.fp, gpp = b.fpp;
    double q = a.f + g, qp = a.fp + gp;
    double n = a.fp * g - a.f * gp;
    double np = a.fpp * g - a.f * gpp;
    s = a.f / q;
    sp = n / (q * q);
    spp = np / (q * q) - 2.0 * n * qp / (q * q * q);
}
}  // namespace

double RadialCutoff::value(const Vec2& x) const {
    double d = (x - c).norm();
    double s, sp, spp;
    sigma3((r_out - d) / (r_out - r_in), s, sp, spp);
    return s;
}

Vec2 RadialCutoff::grad(const Vec2& x) const {
    double d = (x - c).norm();
    if (d <= r_in || d >= r_out || d < 1e-14) return Vec2::Zero();
    double w = r_out - r_in;
    double s, sp, spp;
    sigma3((r_out - d) / w, s, sp, spp);
    return (-sp / w) * (x - c) / d;
}

double RadialCutoff::laplacian(const Vec2& x) const {
    double d = (x - c).norm();
    if (d <= r_in || d >= r_out || d < 1e-14) return 0.0;
    double w = r_out - r_in;
    double s, sp, spp;
    sigma3((r_out - d) / w, s, sp, spp);
    double P1 = -sp / w, P2 = spp / (w * w);
    return P2 + P1 / d;
}

// ===================================================================
// ball cover
// ===================================================================

namespace {

std::vector<Patch> lay_patches(double Lx, double Ly, double r0, double bspace, double ispace) {
    std::vector<Patch> out;
    std::array<double, 5> radii;
    for (int j = 0; j < 5; ++j) radii[j] = r0 * (1.0 + j / 8.0);
    // boundary balls, counterclockwise, each edge owns its starting corner
    auto add_edge = [&](int edge, Vec2 a, Vec2 b) {
        double len = (b - a).norm();
        int m = std::max(1, (int)std::ceil(len / bspace));
        for (int k = 0; k < m; ++k) {
            Patch p;
            p.boundary = true;
            p.edge = edge;
            p.center = a + (b - a) * ((double)k / m);
            p.radii = radii;
            out.push_back(p);
        }
    };
    add_edge(0, {0, 0}, {Lx, 0});
    add_edge(1, {Lx, 0}, {Lx, Ly});
    add_edge(2, {Lx, Ly}, {0, Ly});
    add_edge(3, {0, Ly}, {0, 0});
    // interior lattice: centers deep enough that B^3 stays inside
    double dmin = radii[3] * 1.0000001;
    if (2 * dmin < std::min(Lx, Ly)) {
        auto line = [&](double L) {
            double w = L - 2 * dmin;
            int m = std::max(0, (int)std::ceil(w / ispace));
            std::vector<double> xs;
            for (int k = 0; k <= m; ++k) xs.push_back(dmin + (m ? w * k / m : w / 2));
            return xs;
        };
        for (double cx : line(Lx))
            for (double cy : line(Ly)) {
                Patch p;
                p.boundary = false;
                p.edge = -1;
                p.center = Vec2(cx, cy);
                p.radii = radii;
                out.push_back(p);
            }
    }
    return out;
}

}  // namespace

BallCover build_cover(const DomainSpec& rect, double r0) {
    if (rect.kind != DomainSpec::Kind::rectangle)
        throw config_error("build_cover: rectangle domain required");
    double Lx = rect.Lx, Ly = rect.Ly;
    if (r0 <= 0 || 1.375 * r0 >= 0.5 * std::min(Lx, Ly))
        throw config_error("build_cover: need 0 < 1.375 r0 < min(Lx,Ly)/2");

    const int NP = 161;  // probe lattice for coverage / overlap verification
    std::vector<std::pair<double, double>> spacings = {
        {0.5, 1.25}, {0.42, 1.0}, {0.35, 0.85}};
    std::string fail;
    for (auto [bs, is] : spacings) {
        auto patches = lay_patches(Lx, Ly, r0, bs * r0, is * r0);
        bool ok = true;
        std::ostringstream bad;
        for (int pj = 0; pj < NP && ok; ++pj)
            for (int pi = 0; pi < NP; ++pi) {
                Vec2 x(Lx * pi / (NP - 1.0), Ly * pj / (NP - 1.0));
                int cnt = 0;
                for (const auto& p : patches)
                    if ((x - p.center).norm() <= r0) ++cnt;
                if (cnt < 1 || cnt > 8) {
                    bad << "node (" << x[0] << ", " << x[1] << ") hit by " << cnt << " balls; ";
                    ok = false;
                    break;
                }
            }
        // interior balls: third ring inside the domain
        for (const auto& p : patches)
            if (!p.boundary) {
                double depth = std::min({p.center[0], Lx - p.center[0], p.center[1],
                                         Ly - p.center[1]});
                if (depth < p.radii[3]) {
                    bad << "interior ball at (" << p.center[0] << ", " << p.center[1]
                        << ") leaks through the boundary; ";
                    ok = false;
                }
            }
        if (ok) {
            BallCover cover;
            cover.domain = rect;
            cover.r0 = r0;
            cover.patches = std::move(patches);
            cover.n_boundary = 0;
            for (const auto& p : cover.patches)
                if (p.boundary) ++cover.n_boundary;
            return cover;
        }
        fail = bad.str();
    }
    throw numerical_error("build_cover: could not verify cover (" + fail + ")");
}

RadialCutoff BallCover::cutoff(int patch, int j) const {
    if (patch < 0 || patch >= (int)patches.size() || j < 0 || j > 3)
        throw config_error("BallCover::cutoff: bad index");
    const Patch& p = patches[patch];
    return RadialCutoff{p.center, p.radii[j], p.radii[j + 1]};
}

Vec2 domain_to_chart(const Patch& p, const Vec2& x, double Lx, double Ly) {
    if (!p.boundary) return x - p.center;
    switch (p.edge) {
        case 0: return {x[0] - p.center[0], x[1]};
        case 1: return {x[1] - p.center[1], Lx - x[0]};
        case 2: return {p.center[0] - x[0], Ly - x[1]};
        case 3: return {p.center[1] - x[1], x[0]};
    }
    throw config_error("domain_to_chart: bad edge");
}

Vec2 chart_to_domain(const Patch& p, const Vec2& y, double Lx, double Ly) {
    if (!p.boundary) return y + p.center;
    switch (p.edge) {
        case 0: return {y[0] + p.center[0], y[1]};
        case 1: return {Lx - y[1], y[0] + p.center[1]};
        case 2: return {p.center[0] - y[0], Ly - y[1]};
        case 3: return {y[1], p.center[1] - y[0]};
    }
    throw config_error("chart_to_domain: bad edge");
}

// ===================================================================
// odd-periodic continuation
// ===================================================================

double OmegaExtView::node(int i, int j) const {
    const int nx = f->g.nx, ny = f->g.ny;
    double s = 1.0;
    int px = 2 * (nx - 1);
    int m = ((i % px) + px) % px;
    if (m > nx - 1) {
        m = px - m;
        s = -s;
    }
    int py = 2 * (ny - 1);
    int n = ((j % py) + py) % py;
    if (n > ny - 1) {
        n = py - n;
        s = -s;
    }
    return s * f->v(m, n);
}

namespace {
inline double catmull(double p0, double p1, double p2, double p3, double t) {
    return 0.5 * (2 * p1 + (-p0 + p2) * t + (2 * p0 - 5 * p1 + 4 * p2 - p3) * t * t +
                  (-p0 + 3 * p1 - 3 * p2 + p3) * t * t * t);
}
}  // namespace

double OmegaExtView::value(double x, double y) const {
    const Grid2D& g = f->g;
    double fx = (x - g.x0) / g.hx, fy = (y - g.y0) / g.hy;
    int ix = (int)std::floor(fx), iy = (int)std::floor(fy);
    double tx = fx - ix, ty = fy - iy;
    double col[4];
    for (int b = 0; b < 4; ++b) {
        col[b] = catmull(node(ix - 1, iy - 1 + b), node(ix, iy - 1 + b), node(ix + 1, iy - 1 + b),
                         node(ix + 2, iy - 1 + b), tx);
    }
    return catmull(col[0], col[1], col[2], col[3], ty);
}

// ===================================================================
// localization map F
// ===================================================================

namespace {
int zero_row(const Grid2D& g) {
    for (int j = 0; j < g.ny; ++j)
        if (std::abs(g.y(j)) < 1e-12) return j;
    throw config_error("localization grid must contain the row y2 = 0");
}

void mirror_odd(PlaneField& out, int j0, double trace_tol) {
    double scale = out.v.abs().maxCoeff();
    double trace = out.v.col(j0).abs().maxCoeff();
    if (trace > trace_tol * (1.0 + scale)) {
        std::ostringstream os;
        os << "localize_extend: localized image has nonzero trace " << trace
           << " on the flattened boundary";
        throw numerical_error(os.str());
    }
    out.v.col(j0).setZero();
    for (int j = j0 + 1; j < out.g.ny; ++j) out.v.col(2 * j0 - j) = -out.v.col(j);
    out.parity = -1;
}
}  // namespace

PlaneField localize_extend(const GridField& g, const RadialCutoff& chi, const Patch& p,
                           const Grid2D& pgrid, double Lx, double Ly, double trace_tol) {
    OmegaExtView ext{&g};
    PlaneField out(pgrid, 0);
    if (p.boundary) {
        int j0 = zero_row(pgrid);
        for (int j = j0; j < pgrid.ny; ++j)
            for (int i = 0; i < pgrid.nx; ++i) {
                Vec2 x = chart_to_domain(p, Vec2(pgrid.x(i), pgrid.y(j)), Lx, Ly);
                double w = chi.value(x);
                out.v(i, j) = w == 0.0 ? 0.0 : w * ext.value(x[0], x[1]);
            }
        mirror_odd(out, j0, trace_tol);
    } else {
        for (int j = 0; j < pgrid.ny; ++j)
            for (int i = 0; i < pgrid.nx; ++i) {
                Vec2 x = Vec2(pgrid.x(i), pgrid.y(j)) + p.center;
                double w = chi.value(x);
                out.v(i, j) = w == 0.0 ? 0.0 : w * ext.value(x[0], x[1]);
            }
    }
    return out;
}

PlaneField localize_extend_curved(const std::function<double(const Vec2&)>& g,
                                  const RadialCutoff& chi, const DiffeoMap& map,
                                  const Grid2D& pgrid, double trace_tol) {
    PlaneField out(pgrid, 0);
    int j0 = zero_row(pgrid);
    for (int j = j0; j < pgrid.ny; ++j)
        for (int i = 0; i < pgrid.nx; ++i) {
            Vec2 x = map.X(Vec2(pgrid.x(i), pgrid.y(j)));
            double w = chi.value(x);
            out.v(i, j) = w == 0.0 ? 0.0 : w * g(x);
        }
    mirror_odd(out, j0, trace_tol);
    return out;
}

PlaneField sample_even(const std::function<double(const Vec2&)>& w, const Patch& p,
                       const Grid2D& pgrid, double Lx, double Ly) {
    PlaneField out(pgrid, 0);
    if (p.boundary) {
        int j0 = zero_row(pgrid);
        for (int j = j0; j < pgrid.ny; ++j)
            for (int i = 0; i < pgrid.nx; ++i)
                out.v(i, j) = w(chart_to_domain(p, Vec2(pgrid.x(i), pgrid.y(j)), Lx, Ly));
        for (int j = j0 + 1; j < pgrid.ny; ++j) out.v.col(2 * j0 - j) = out.v.col(j);
        out.parity = 1;
    } else {
        for (int j = 0; j < pgrid.ny; ++j)
            for (int i = 0; i < pgrid.nx; ++i)
                out.v(i, j) = w(Vec2(pgrid.x(i), pgrid.y(j)) + p.center);
    }
    return out;
}

}  // namespace sqg
