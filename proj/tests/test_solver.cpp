#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sqg/config.hpp>
#include <sqg/solver.hpp>
#include <sqg/spectral.hpp>

#include <cmath>

using namespace sqg;

// ============================================================================
// helpers
// ============================================================================

static SpectralField band_data(const BasisPtr& b, uint64_t seed, double amp) {
    Config c;
    c.set("initial.type", "random_band");
    c.set("initial.band", "6");
    c.set("initial.amplitude", std::to_string(amp));
    return initial_data(c, b, Rng(seed, "solver test"));
}

// brute-force Hoelder quotient over all node pairs at snapped displacements;
// mirrors the definition, not the implementation
static double brute_holder(const GridField& f, double alpha, const AnalysisParams& p) {
    double best = 0.0;
    const Grid2D& g = f.g;
    auto val = [&](int i, int j) {
        if (i < 0 || j < 0 || i >= g.nx || j >= g.ny) return 0.0;  // zero extension
        return f.v(i, j);
    };
    for (double h : p.h_set) {
        int mx = (int)std::lround(h / g.hx);
        int my = (int)std::lround(h / g.hy);
        for (int j = 0; j < g.ny; j += p.sample_stride)
            for (int i = 0; i < g.nx; i += p.sample_stride)
                for (auto [di, dj] : {std::pair{mx, 0}, {0, my}, {mx, my}, {mx, -my}}) {
                    double dist = std::hypot(di * g.hx, dj * g.hy);
                    if (dist == 0.0) continue;
                    double q = std::abs(val(i + di, j + dj) - val(i, j)) / std::pow(dist, alpha);
                    best = std::max(best, q);
                }
    }
    return best;
}

// ============================================================================
// linear evolution (integrating factor is exact on the dissipative part)
// ============================================================================

TEST_CASE("linear run decays each mode like exp(-sqrt(mu) t)") {
    BasisPtr b = build_eigenbasis(DomainSpec::unit_square(), 16);
    SpectralField th = SpectralField::zero(b);
    th.c[0] = 1.0;
    th.c[5] = -0.4;
    SimConfig cfg;
    cfg.basis = b;
    cfg.dt = 1e-3;
    cfg.t_end = 0.2;
    cfg.nonlinear = false;
    RunResult rr = run(cfg, th);
    double t = rr.final_state.t;
    CHECK(t == doctest::Approx(0.2).epsilon(1e-12));
    for (int j : {0, 5})
        CHECK(rr.final_state.theta.c[j] ==
              doctest::Approx(th.c[j] * std::exp(-std::sqrt(b->mu(j)) * t)).epsilon(1e-10));
}

// ============================================================================
// weak maximum principle & energy law
// ============================================================================

TEST_CASE("sup norm never increases along nonlinear runs") {
    BasisPtr b = build_eigenbasis(DomainSpec::unit_square(), 16 * 16);
    for (uint64_t seed : {1u, 2u, 3u}) {
        SimConfig cfg;
        cfg.basis = b;
        cfg.dt = 1e-3;
        cfg.t_end = 0.3;
        cfg.cadence = 5;
        RunResult rr = run(cfg, band_data(b, seed, 0.5));
        CHECK(rr.max_drift <= 1e-10);
        for (size_t k = 1; k < rr.records.size(); ++k)
            CHECK(rr.records[k].linf <= rr.records[k - 1].linf * (1.0 + 1e-12));
    }
}

TEST_CASE("discrete energy law: d/dt ||theta||^2 tracks -2||Lambda^{1/2} theta||^2") {
    BasisPtr b = build_eigenbasis(DomainSpec::unit_square(), 12 * 12);
    SimConfig cfg;
    cfg.basis = b;
    cfg.dt = 2e-4;
    cfg.t_end = 0.1;
    cfg.cadence = 1;
    RunResult rr = run(cfg, band_data(b, 4, 0.3));
    CHECK(rr.max_energy_residual < 1e-6);
}

TEST_CASE("nonlinear term conserves energy: L2 decay equals the linear rate") {
    // with a single mode the transport term vanishes (u is orthogonal to
    // grad theta), so the nonlinear run must match the linear decay
    BasisPtr b = build_eigenbasis(DomainSpec::unit_square(), 8 * 8);
    SpectralField th = SpectralField::zero(b);
    th.c[0] = 0.7;
    SimConfig cfg;
    cfg.basis = b;
    cfg.dt = 1e-3;
    cfg.t_end = 0.1;
    RunResult nl = run(cfg, th);
    cfg.nonlinear = false;
    RunResult lin = run(cfg, th);
    CHECK((nl.final_state.theta.c - lin.final_state.theta.c).cwiseAbs().maxCoeff() < 1e-9);
}

// ============================================================================
// Hoelder seminorm against brute force
// ============================================================================

TEST_CASE("holder_seminorm equals the brute-force quotient scan") {
    BasisPtr b = build_eigenbasis(DomainSpec::unit_square(), 10 * 10, 40);
    Rng rng(17, "holder");
    SpectralField f = SpectralField::zero(b);
    for (int j = 0; j < b->n_modes; ++j) f.c[j] = rng.uniform(-1.0, 1.0);
    GridField g = reconstruct(f);
    AnalysisParams p;
    p.alpha = 0.3;
    p.sample_stride = 1;
    HolderProbe probe = holder_seminorm(g, p.alpha, p);
    double brute = brute_holder(g, p.alpha, p);
    CHECK(probe.value == doctest::Approx(brute).epsilon(1e-12));
    CHECK(probe.value > 0.0);
}

// ============================================================================
// determinism & snapshots
// ============================================================================

TEST_CASE("same config and seed give bitwise-identical trajectories") {
    BasisPtr b = build_eigenbasis(DomainSpec::unit_square(), 12 * 12);
    SimConfig cfg;
    cfg.basis = b;
    cfg.dt = 1e-3;
    cfg.t_end = 0.05;
    cfg.store_snapshots = true;
    RunResult r1 = run(cfg, band_data(b, 8, 0.4));
    RunResult r2 = run(cfg, band_data(b, 8, 0.4));
    REQUIRE(r1.snapshots.size() == r2.snapshots.size());
    for (size_t k = 0; k < r1.snapshots.size(); ++k)
        CHECK((r1.snapshots[k].array() == r2.snapshots[k].array()).all());
}

TEST_CASE("snapshots start at t = 0 and advance by dt") {
    BasisPtr b = build_eigenbasis(DomainSpec::unit_square(), 8 * 8);
    SimConfig cfg;
    cfg.basis = b;
    cfg.dt = 5e-4;
    cfg.t_end = 0.01;
    cfg.store_snapshots = true;
    RunResult rr = run(cfg, band_data(b, 9, 0.2));
    REQUIRE(rr.snapshot_times.size() == rr.snapshots.size());
    CHECK(rr.snapshot_times.front() == 0.0);
    for (size_t k = 1; k < rr.snapshot_times.size(); ++k)
        CHECK(rr.snapshot_times[k] - rr.snapshot_times[k - 1] ==
              doctest::Approx(5e-4).epsilon(1e-9));
}

// ============================================================================
// CFL guard
// ============================================================================

TEST_CASE("violating the CFL limit raises a numerical error") {
    BasisPtr b = build_eigenbasis(DomainSpec::unit_square(), 16 * 16);
    SimConfig cfg;
    cfg.basis = b;
    cfg.dt = 0.5;  // absurd step for this velocity scale
    cfg.t_end = 1.0;
    CHECK_THROWS_AS(run(cfg, band_data(b, 10, 5.0)), numerical_error);
}

// ============================================================================
// linear drift problem
// ============================================================================

TEST_CASE("drift solve with b = 0 reproduces the fractional decay") {
    BasisPtr b = build_eigenbasis(DomainSpec::unit_square(), 12);
    SpectralField v0 = SpectralField::zero(b);
    v0.c[0] = 1.0;
    SimConfig cfg;
    cfg.basis = b;
    cfg.dt = 1e-4;
    cfg.t_end = 0.02;
    DriftField none = [](double, GridField& bx, GridField& by) {
        bx.v.setZero();
        by.v.setZero();
    };
    Trajectory tr = linear_drift_solve(cfg, v0, none);
    REQUIRE(!tr.coeffs.empty());
    double t = tr.times.back();
    double want = std::exp(-std::sqrt(b->mu(0)) * t);
    CHECK(tr.coeffs.back()[0] == doctest::Approx(want).epsilon(1e-6));
}

TEST_CASE("picard iteration contracts for small data") {
    BasisPtr b = build_eigenbasis(DomainSpec::unit_square(), 8 * 8);
    SpectralField th = band_data(b, 12, 0.1);
    SimConfig cfg;
    cfg.basis = b;
    cfg.dt = 1e-3;
    cfg.t_end = 0.05;
    PicardResult pr = picard_iterate(cfg, th, 5);
    REQUIRE(pr.ratios.size() >= 2);
    // skip the first ratio (distance from the free-decay initialization)
    for (size_t k = 1; k < pr.ratios.size(); ++k) CHECK(pr.ratios[k] < 1.0);
}

// ============================================================================
// boundary traces
// ============================================================================

TEST_CASE("spectral boundary traces vanish for span data, including iterates") {
    BasisPtr b = build_eigenbasis(DomainSpec::rectangle(1.0, 0.8), 20);
    Rng rng(6, "trace");
    SpectralField f = SpectralField::zero(b);
    for (int j = 0; j < b->n_modes; ++j) f.c[j] = rng.uniform(-1.0, 1.0);
    TraceCheck tc = boundary_trace_check(f);
    CHECK(tc.max_spectral < 1e-12);
    auto iters = boundary_trace_check(f, 3);
    REQUIRE(iters.size() == 4);
    for (const auto& t : iters) CHECK(t.max_spectral < 1e-12 * std::max(1.0, t.max_extrapolated));
}
