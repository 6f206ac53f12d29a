#include "sqg/solver.hpp"

#include <cmath>

namespace sqg {

// ===================================================================
// diagnostics
// ===================================================================

HolderProbe holder_seminorm(const GridField& f, double alpha, const AnalysisParams& p) {
    if (!(alpha > 0) || alpha > 1) throw config_error("holder_seminorm: alpha in (0,1]");
    const Grid2D& g = f.g;
    static const int dirs[8][2] = {{1, 0},  {-1, 0}, {0, 1},  {0, -1},
                                   {1, 1},  {1, -1}, {-1, 1}, {-1, -1}};
    HolderProbe best;
    int stride = std::max(1, p.sample_stride);
    for (double m : p.h_set) {
        int ci = std::max(1, (int)std::lround(m / g.hx));
        int cj = std::max(1, (int)std::lround(m / g.hy));
        for (auto& d : dirs) {
            int di = d[0] * ci, dj = d[1] * cj;
            double hx = di * g.hx, hy = dj * g.hy;
            double hn = std::pow(std::hypot(hx, hy), alpha);
            for (int j = 0; j < g.ny; j += stride)
                for (int i = 0; i < g.nx; i += stride) {
                    int i2 = i + di, j2 = j + dj;
                    double other = (i2 >= 0 && i2 < g.nx && j2 >= 0 && j2 < g.ny)
                                       ? f.v(i2, j2)
                                       : 0.0;  // zero extension outside
                    double q = std::abs(f.v(i, j) - other) / hn;
                    if (q > best.value) {
                        best.value = q;
                        best.x = g.x(i);
                        best.y = g.y(j);
                        best.dx = hx;
                        best.dy = hy;
                    }
                }
        }
    }
    return best;
}

// ===================================================================
// nonlinear term
// ===================================================================

static void dealias_coeffs(SpectralField& f, double frac) {
    const EigenBasis& b = *f.basis;
    if (b.domain.kind == DomainSpec::Kind::rectangle) {
        for (int j = 0; j < b.n_modes; ++j)
            if (b.modes[j].first > frac * b.kmax || b.modes[j].second > frac * b.lmax)
                f.c(j) = 0.0;
    } else {
        double mu_cut = frac * frac * b.mu(b.n_modes - 1);
        for (int j = 0; j < b.n_modes; ++j)
            if (b.mu(j) > mu_cut) f.c(j) = 0.0;
    }
}

// N(theta) = -P_dealias(u . grad theta); also reports max |u| for CFL.
static SpectralField nonlinear_term(const SpectralField& th, double dealias, double* umax) {
    GridField ux, uy, tx, ty;
    riesz_velocity(th, ux, uy);
    reconstruct_grad(th, tx, ty);
    GridField adv(th.basis->grid);
    adv.v = -(ux.v * tx.v + uy.v * ty.v);
    SpectralField n = project(th.basis, adv);
    dealias_coeffs(n, dealias);
    if (umax) *umax = std::sqrt((ux.v * ux.v + uy.v * uy.v).maxCoeff());
    return n;
}

// ===================================================================
// time stepping
// ===================================================================

struct StepDetail {
    SimState next;
    double energy_residual = 0;
    double umax = 0;
};

static StepDetail step_detail(const SimState& s, const SimConfig& cfg) {
    const double dt = cfg.dt;
    const Eigen::VectorXd& mu = s.theta.basis->mu;
    Eigen::ArrayXd lam = mu.array().sqrt();
    Eigen::ArrayXd E = (-dt * lam).exp();
    Eigen::ArrayXd Eh = (-0.5 * dt * lam).exp();

    StepDetail out;
    SpectralField k1 = SpectralField::zero(s.theta.basis);
    if (cfg.nonlinear) k1 = nonlinear_term(s.theta, cfg.dealias, &out.umax);

    SpectralField star(s.theta.basis,
                       (E * (s.theta.c.array() + dt * k1.c.array())).matrix());
    SpectralField k2 = SpectralField::zero(s.theta.basis);
    if (cfg.nonlinear) k2 = nonlinear_term(star, cfg.dealias, nullptr);

    out.next.theta = SpectralField(
        s.theta.basis,
        (E * s.theta.c.array() + 0.5 * dt * (E * k1.c.array() + k2.c.array())).matrix());
    out.next.t = s.t + dt;
    out.next.step = s.step + 1;

    // discrete energy law: (E_{n+1}-E_n)/dt + 2 || Lambda^{1/2} theta_half ||^2
    Eigen::ArrayXd half = Eh * (s.theta.c.array() + 0.5 * dt * k1.c.array());
    double e0 = s.theta.c.squaredNorm(), e1 = out.next.theta.c.squaredNorm();
    out.energy_residual = (e1 - e0) / dt + 2.0 * (lam * half * half).sum();
    return out;
}

SimState step(const SimState& s, const SimConfig& cfg) {
    return step_detail(s, cfg).next;
}

static DiagnosticsRecord diagnostics(const SpectralField& th, double t,
                                     const AnalysisParams& p) {
    DiagnosticsRecord r;
    r.time = t;
    GridField f = reconstruct(th);
    r.linf = f.max_abs();
    r.l2 = th.l2();
    r.lam_half_l2 = apply_dirichlet_power(th, 0.5).l2();
    r.holder_alpha = holder_seminorm(f, p.alpha, p).value;
    GridField gx, gy;
    reconstruct_grad(th, gx, gy);
    double grad_inf = std::sqrt((gx.v * gx.v + gy.v * gy.v).maxCoeff());
    double seminorm = std::max(holder_seminorm(gx, 0.5 * p.alpha, p).value,
                               holder_seminorm(gy, 0.5 * p.alpha, p).value);
    r.c1alpha_est = r.linf + grad_inf + seminorm;
    return r;
}

RunResult run(const SimConfig& cfg, const SpectralField& theta0) {
    if (!cfg.basis) throw config_error("run: missing basis");
    if (!(cfg.dt > 0) || !(cfg.t_end >= 0)) throw config_error("run: dt/t_end invalid");
    long nsteps = (long)std::llround(cfg.t_end / cfg.dt);

    RunResult res;
    SimState s;
    s.theta = theta0;
    double h = std::min(cfg.basis->grid.hx, cfg.basis->grid.hy);
    double prev_linf = reconstruct(theta0).max_abs();
    double drift = 0.0, integral = 0.0, prev_c1 = 0.0;
    bool have_prev_c1 = false;

    auto push_record = [&](const SpectralField& th, double t) {
        DiagnosticsRecord r = diagnostics(th, t, cfg.analysis);
        if (have_prev_c1)
            integral += 0.5 * (prev_c1 + r.c1alpha_est) *
                        (t - res.records.back().time);
        prev_c1 = r.c1alpha_est;
        have_prev_c1 = true;
        r.c1alpha_integral = integral;
        r.max_drift = drift;
        res.records.push_back(r);
    };

    push_record(s.theta, 0.0);
    if (cfg.store_snapshots) {
        res.snapshots.push_back(s.theta.c);
        res.snapshot_times.push_back(0.0);
    }

    for (long n = 0; n < nsteps; ++n) {
        StepDetail d = step_detail(s, cfg);
        if (cfg.nonlinear && d.umax * cfg.dt / h > cfg.cfl_limit)
            throw numerical_error("run: CFL limit exceeded (max|u| dt/h = " +
                                  std::to_string(d.umax * cfg.dt / h) + ")");
        if (!d.next.theta.c.allFinite())
            throw numerical_error("run: non-finite state at step " + std::to_string(n + 1));
        s = d.next;
        res.max_energy_residual = std::max(res.max_energy_residual, std::abs(d.energy_residual));
        double linf = reconstruct(s.theta).max_abs();
        if (linf > 1e6) throw numerical_error("run: blow-up detected");
        drift += std::max(0.0, linf - prev_linf);
        prev_linf = linf;
        if (cfg.store_snapshots) {
            res.snapshots.push_back(s.theta.c);
            res.snapshot_times.push_back(s.t);
        }
        if ((n + 1) % std::max(1, cfg.cadence) == 0 || n + 1 == nsteps) {
            push_record(s.theta, s.t);
            res.records.back().energy_residual = d.energy_residual;
        }
    }
    res.final_state = s;
    res.max_drift = drift;

    // least-squares slope of log ||theta||_L2 against time over the last
    // half of the run (skips the initial transient)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    double t_half = 0.5 * s.t;
    for (const auto& r : res.records) {
        if (r.l2 <= 0 || r.time < t_half) continue;
        double lx = r.time, ly = std::log(r.l2);
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
        ++m;
    }
    if (m < 2) {  // too few records past the halfway mark; use the full run
        sx = sy = sxx = sxy = 0;
        m = 0;
        for (const auto& r : res.records) {
            if (r.l2 <= 0) continue;
            double lx = r.time, ly = std::log(r.l2);
            sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
            ++m;
        }
    }
    if (m >= 2 && sxx * m - sx * sx > 1e-30)
        res.fitted_decay_rate = -(m * sxy - sx * sy) / (m * sxx - sx * sx);
    return res;
}

// ===================================================================
// linear drift problem and Picard iteration
// ===================================================================

static SpectralField drift_term(const SpectralField& v, double t, const SimConfig& cfg,
                                const DriftField& b, const ForcingField& f) {
    GridField bx(v.basis->grid), by(v.basis->grid), tx, ty;
    b(t, bx, by);
    reconstruct_grad(v, tx, ty);
    GridField adv(v.basis->grid);
    adv.v = -(bx.v * tx.v + by.v * ty.v);
    SpectralField n = project(v.basis, adv);
    dealias_coeffs(n, cfg.dealias);
    if (f) n.c += f(t).c;
    return n;
}

Trajectory linear_drift_solve(const SimConfig& cfg, const SpectralField& v0,
                              const DriftField& b, const ForcingField& f) {
    long nsteps = (long)std::llround(cfg.t_end / cfg.dt);
    const double dt = cfg.dt;
    Eigen::ArrayXd lam = v0.basis->mu.array().sqrt();
    Eigen::ArrayXd E = (-dt * lam).exp();

    Trajectory traj;
    traj.basis = v0.basis;
    traj.coeffs.reserve(nsteps + 1);
    traj.times.reserve(nsteps + 1);
    SpectralField v = v0;
    traj.coeffs.push_back(v.c);
    traj.times.push_back(0.0);
    for (long n = 0; n < nsteps; ++n) {
        double t = n * dt;
        SpectralField k1 = drift_term(v, t, cfg, b, f);
        SpectralField star(v.basis, (E * (v.c.array() + dt * k1.c.array())).matrix());
        SpectralField k2 = drift_term(star, t + dt, cfg, b, f);
        v.c = (E * v.c.array() + 0.5 * dt * (E * k1.c.array() + k2.c.array())).matrix();
        if (!v.c.allFinite())
            throw numerical_error("linear_drift_solve: non-finite state");
        traj.coeffs.push_back(v.c);
        traj.times.push_back((n + 1) * dt);
    }
    return traj;
}

static double traj_distance(const Trajectory& a, const Trajectory& b) {
    double d = 0.0;
    for (size_t n = 0; n < a.coeffs.size(); ++n) {
        SpectralField diff(a.basis, a.coeffs[n] - b.coeffs[n]);
        d = std::max(d, reconstruct(diff).max_abs());
    }
    return d;
}

PicardResult picard_iterate(const SimConfig& cfg, const SpectralField& theta0, int n_iter) {
    if (n_iter < 1) throw config_error("picard_iterate: n_iter must be >= 1");
    long nsteps = (long)std::llround(cfg.t_end / cfg.dt);
    const double dt = cfg.dt;
    Eigen::ArrayXd lam = theta0.basis->mu.array().sqrt();

    // v^0: free fractional decay
    Trajectory prev;
    prev.basis = theta0.basis;
    for (long n = 0; n <= nsteps; ++n) {
        prev.coeffs.push_back(((-n * dt * lam).exp() * theta0.c.array()).matrix());
        prev.times.push_back(n * dt);
    }

    PicardResult res;
    for (int k = 0; k < n_iter; ++k) {
        const Trajectory& frozen = prev;
        DriftField b = [&frozen, dt, nsteps](double t, GridField& bx, GridField& by) {
            long idx = std::min((long)std::llround(t / dt), nsteps);
            SpectralField v(frozen.basis, frozen.coeffs[(size_t)idx]);
            riesz_velocity(v, bx, by);
        };
        Trajectory next = linear_drift_solve(cfg, theta0, b);
        res.distances.push_back(traj_distance(next, prev));
        prev = std::move(next);
    }
    for (size_t k = 1; k < res.distances.size(); ++k)
        res.ratios.push_back(res.distances[k] / std::max(res.distances[k - 1], 1e-300));
    res.last = std::move(prev);
    return res;
}

TraceCheck boundary_trace_check(const SpectralField& theta) {
    GridField f = reconstruct(theta);
    const Grid2D& g = f.g;
    TraceCheck out;
    auto quad = [](double f1, double f2, double f3) { return 3 * f1 - 3 * f2 + f3; };
    for (int i = 0; i < g.nx; ++i) {
        out.max_spectral = std::max({out.max_spectral, std::abs(f.v(i, 0)),
                                     std::abs(f.v(i, g.ny - 1))});
        out.max_extrapolated =
            std::max({out.max_extrapolated,
                      std::abs(quad(f.v(i, 1), f.v(i, 2), f.v(i, 3))),
                      std::abs(quad(f.v(i, g.ny - 2), f.v(i, g.ny - 3), f.v(i, g.ny - 4)))});
    }
    for (int j = 0; j < g.ny; ++j) {
        out.max_spectral = std::max({out.max_spectral, std::abs(f.v(0, j)),
                                     std::abs(f.v(g.nx - 1, j))});
        out.max_extrapolated =
            std::max({out.max_extrapolated,
                      std::abs(quad(f.v(1, j), f.v(2, j), f.v(3, j))),
                      std::abs(quad(f.v(g.nx - 2, j), f.v(g.nx - 3, j), f.v(g.nx - 4, j)))});
    }
    return out;
}

std::vector<TraceCheck> boundary_trace_check(const SpectralField& theta, int n) {
    if (n < 0) throw config_error("boundary_trace_check: n must be >= 0");
    std::vector<TraceCheck> out;
    SpectralField f = theta;
    for (int k = 0; k <= n; ++k) {
        out.push_back(boundary_trace_check(f));
        f.c = (f.basis->mu.array() * f.c.array()).matrix();  // -Delta eigenmultiplier
    }
    return out;
}

}  // namespace sqg
