#pragma once

#include <functional>
#include <vector>

#include "sqg/spectral.hpp"

namespace sqg {

struct AnalysisParams {
    double alpha = 0.02;                       // Hoelder exponent tracked
    std::vector<double> h_set = {0.05, 0.1, 0.2};  // displacement magnitudes
    int sample_stride = 2;                     // base-point subsampling
};

// Location/value of the discrete Hoelder quotient maximum.
struct HolderProbe {
    double value = 0.0;  // the seminorm
    double x = 0, y = 0;
    double dx = 0, dy = 0;
};

struct DiagnosticsRecord {
    double time = 0;
    double linf = 0;
    double l2 = 0;
    double lam_half_l2 = 0;       // ||Lambda^{1/2} theta||_L2
    double holder_alpha = 0;      // [theta]_{C^alpha} estimate
    double c1alpha_est = 0;       // ||theta||_{C^{1+alpha/2}} estimate
    double c1alpha_integral = 0;  // running int_0^t of the previous column
    double max_drift = 0;         // cumulative positive drift of ||theta||_inf
    double energy_residual = 0;   // discrete energy-law defect
};

struct SimConfig {
    BasisPtr basis;
    double dt = 1e-3;
    double t_end = 0.1;
    bool nonlinear = true;
    double dealias = 2.0 / 3.0;
    double cfl_limit = 0.5;
    int cadence = 10;  // diagnostics every N steps
    AnalysisParams analysis;
    bool store_snapshots = false;
};

struct SimState {
    SpectralField theta;
    double t = 0;
    long step = 0;
};

struct RunResult {
    std::vector<DiagnosticsRecord> records;
    SimState final_state;
    double fitted_decay_rate = 0;   // least squares on log ||theta||_L2
    double max_drift = 0;           // total positive L-inf drift over the run
    double max_energy_residual = 0;
    std::vector<Eigen::VectorXd> snapshots;  // per step incl. t = 0
    std::vector<double> snapshot_times;
};

// [theta]_{C^alpha} over grid nodes and snapped displacements; zero
// extension outside the domain grid.
HolderProbe holder_seminorm(const GridField& f, double alpha, const AnalysisParams& p);

// One integrating-factor Heun step of d theta/dt + P(u . grad theta) + Lambda theta = 0.
SimState step(const SimState& s, const SimConfig& cfg);

RunResult run(const SimConfig& cfg, const SpectralField& theta0);

// Advection velocity and forcing for the linear drift problem
// d v/dt + b . grad v + Lambda v = f.
using DriftField = std::function<void(double t, GridField& bx, GridField& by)>;
using ForcingField = std::function<SpectralField(double t)>;

struct Trajectory {
    std::vector<Eigen::VectorXd> coeffs;  // one per step, incl. t = 0
    std::vector<double> times;
    BasisPtr basis;
};

Trajectory linear_drift_solve(const SimConfig& cfg, const SpectralField& v0,
                              const DriftField& b, const ForcingField& f = nullptr);

struct PicardResult {
    std::vector<double> distances;  // d_k = sup_t || v^k - v^{k-1} ||_inf
    std::vector<double> ratios;     // d_{k+1} / d_k
    Trajectory last;
};

// Picard/mild-solution iteration: v^0 = free Lambda-decay of theta0, then
// v^{k+1} solves the linear drift problem with b frozen from v^k.
PicardResult picard_iterate(const SimConfig& cfg, const SpectralField& theta0, int n_iter);

struct TraceCheck {
    double max_spectral = 0;      // |theta| on boundary nodes (exact tables)
    double max_extrapolated = 0;  // quadratic extrapolation from interior
};
TraceCheck boundary_trace_check(const SpectralField& theta);
// traces of the iterated Laplacians: entry k checks Delta^k theta, k = 0..n
std::vector<TraceCheck> boundary_trace_check(const SpectralField& theta, int n);

}  // namespace sqg
